#include "coag/simulator.hpp"

#include <cmath>
#include <stdexcept>

namespace coag {

void Fenwick::add(int i, long long d) {
  for (; i <= n_; i += i & -i) tree_[static_cast<std::size_t>(i)] += d;
}

long long Fenwick::prefix(int i) const {
  long long s = 0;
  for (; i > 0; i -= i & -i) s += tree_[static_cast<std::size_t>(i)];
  return s;
}

int Fenwick::find(long long r) const {
  int pos = 0;
  int pw = 1;
  while ((pw << 1) <= n_) pw <<= 1;
  for (; pw > 0; pw >>= 1) {
    int next = pos + pw;
    if (next <= n_ && tree_[static_cast<std::size_t>(next)] <= r) {
      pos = next;
      r -= tree_[static_cast<std::size_t>(next)];
    }
  }
  return pos + 1;
}

ParticleState::ParticleState(const Grid& grid, double h, const KernelSpec& spec)
    : grid_(grid),
      h_(h),
      spec_(spec),
      thinning_(spec.cutoff > 0.0 || spec.family == KernelFamily::ProductSqrt ||
                spec.family == KernelFamily::Smooth),
      majorant_c_(majorant_coeff(spec)),
      counts_(static_cast<std::size_t>(grid.nbins), 0),
      count_tree_(grid.nbins),
      unit_tree_(grid.nbins) {
  if (!(h > 0.0)) throw std::invalid_argument("particle weight h must be positive");
  validate(spec_);
}

ParticleState ParticleState::monodisperse(const Grid& grid, double h, const KernelSpec& spec) {
  ParticleState state(grid, h, spec);
  double inv = 1.0 / h;
  long long rounded = std::llround(inv);
  long long count = (std::abs(inv - static_cast<double>(rounded)) < 1e-9 * inv)
                        ? rounded
                        : static_cast<long long>(std::floor(inv));
  state.insert(1, count);
  return state;
}

void ParticleState::insert(int bin, long long count) {
  if (bin < 1 || bin > grid_.nbins) throw std::out_of_range("bin outside grid");
  if (count < 1) throw std::invalid_argument("insert count must be positive");
  counts_[static_cast<std::size_t>(bin - 1)] += count;
  count_tree_.add(bin, count);
  unit_tree_.add(bin, bin * count);
  n_ += count;
  units_ += static_cast<long long>(bin) * count;
}

void ParticleState::remove_particle(int bin) {
  counts_[static_cast<std::size_t>(bin - 1)] -= 1;
  count_tree_.add(bin, -1);
  unit_tree_.add(bin, -bin);
  n_ -= 1;
  units_ -= bin;
}

double ParticleState::total_rate() const {
  if (n_ < 2) return 0.0;
  double pairs = 0.5 * static_cast<double>(n_) * static_cast<double>(n_ - 1);
  double mass = grid_.delta * static_cast<double>(units_);
  double mass_pairs = static_cast<double>(n_ - 1) * mass;  // sum over pairs of x_i + x_j
  if (thinning_) return h_ * majorant_c_ * (pairs + mass_pairs);
  if (spec_.family == KernelFamily::Constant) return h_ * spec_.coeff * pairs;
  return h_ * spec_.coeff * mass_pairs;  // additive
}

int ParticleState::draw_uniform_bin(RngStream& rng) const {
  return count_tree_.find(static_cast<long long>(
      rng.uniform_below(static_cast<std::uint64_t>(count_tree_.total()))));
}

int ParticleState::draw_mass_biased_bin(RngStream& rng) const {
  return unit_tree_.find(static_cast<long long>(
      rng.uniform_below(static_cast<std::uint64_t>(unit_tree_.total()))));
}

ParticleState::Proposal ParticleState::propose(RngStream& rng) {
  Proposal p;
  bool mass_biased_first;
  if (thinning_) {
    // Majorant c*(1 + x + y) splits into a uniform-pair part and a
    // mass-weighted part; pick the component by its share of the pair sum.
    double pairs = 0.5 * static_cast<double>(n_) * static_cast<double>(n_ - 1);
    double mass_pairs = static_cast<double>(n_ - 1) * grid_.delta * static_cast<double>(units_);
    mass_biased_first = rng.uniform01() * (pairs + mass_pairs) >= pairs;
  } else {
    mass_biased_first = spec_.family == KernelFamily::Additive;
  }

  p.a = mass_biased_first ? draw_mass_biased_bin(rng) : draw_uniform_bin(rng);
  // Second draw is uniform over the other particles; mask one particle of
  // the first bin for the draw, then restore it.
  count_tree_.add(p.a, -1);
  p.b = draw_uniform_bin(rng);
  count_tree_.add(p.a, 1);

  if (!thinning_) {
    p.accept = true;
    return p;
  }
  double xa = grid_.mass(p.a), xb = grid_.mass(p.b);
  double bound = majorant_c_ * (1.0 + xa + xb);
  p.accept = rng.uniform01() * bound < kernel_eval(spec_, xa, xb);
  return p;
}

std::pair<int, int> ParticleState::sample_pair(RngStream& rng) {
  if (n_ < 2) throw std::logic_error("sample_pair needs at least two particles");
  for (;;) {
    Proposal p = propose(rng);
    if (p.accept) return {p.a, p.b};
  }
}

double ParticleState::next_holding(RngStream& rng) {
  double rate = total_rate();
  if (rate <= 0.0) return std::numeric_limits<double>::infinity();
  return rng.exponential(rate);
}

std::optional<Event> ParticleState::jump(RngStream& rng) {
  if (n_ < 2) return std::nullopt;
  ++proposals_;
  Proposal p = propose(rng);
  if (!p.accept) return std::nullopt;
  ++accepted_;
  remove_particle(p.a);
  remove_particle(p.b);
  long long merged = static_cast<long long>(p.a) + static_cast<long long>(p.b);
  if (merged <= grid_.nbins) {
    insert(static_cast<int>(merged));
  } else {
    overflow_units_ += merged;
  }
  return Event{time_, grid_.mass(p.a), grid_.mass(p.b),
               grid_.delta * static_cast<double>(merged)};
}

StepResult ParticleState::step(RngStream& rng) {
  if (n_ < 2) return {std::numeric_limits<double>::infinity(), std::nullopt};
  double dt = next_holding(rng);
  advance(dt);
  return {dt, jump(rng)};
}

GridMeasure ParticleState::empirical() const {
  GridMeasure nu = zero_measure(grid_);
  for (int bin = 1; bin <= grid_.nbins; ++bin) {
    nu.w[bin - 1] = h_ * static_cast<double>(counts_[static_cast<std::size_t>(bin - 1)]);
  }
  nu.overflow = h_ * grid_.delta * static_cast<double>(overflow_units_);
  return nu;
}

PathResult simulate_path(ParticleState& state, const std::vector<double>& times,
                         RngStream& rng) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < state.time() || (i > 0 && times[i] < times[i - 1])) {
      throw std::invalid_argument("snapshot times must be nondecreasing and not precede the state");
    }
  }
  PathResult out;
  out.snapshots.reserve(times.size());
  std::size_t ti = 0;
  while (ti < times.size() && state.particle_count() >= 2) {
    double dt = state.next_holding(rng);
    if (!std::isfinite(dt)) break;
    double t_next = state.time() + dt;
    while (ti < times.size() && times[ti] < t_next) {
      out.snapshots.push_back(state.empirical());
      ++ti;
    }
    if (ti == times.size()) break;  // nothing left to observe; drop the pending jump
    state.advance(dt);
    if (auto ev = state.jump(rng)) out.events.push_back(*ev);
  }
  while (ti < times.size()) {
    out.snapshots.push_back(state.empirical());
    ++ti;
  }
  return out;
}

}  // namespace coag
