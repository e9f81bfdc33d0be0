#pragma once

#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "coag/kernel.hpp"
#include "coag/measure.hpp"
#include "coag/rng.hpp"

namespace coag {

// Integer prefix-sum tree over bins 1..n: point update, prefix query, and
// inverse lookup (smallest index whose prefix exceeds a target), all O(log n).
class Fenwick {
 public:
  explicit Fenwick(int n) : n_(n), tree_(static_cast<std::size_t>(n) + 1, 0) {}

  void add(int i, long long d);
  long long prefix(int i) const;  // sum over [1, i]
  long long total() const { return prefix(n_); }
  // Smallest i with prefix(i) > r; requires 0 <= r < total().
  int find(long long r) const;

 private:
  int n_;
  std::vector<long long> tree_;
};

struct Event {
  double time = 0.0;
  double mass_a = 0.0;
  double mass_b = 0.0;
  double merged = 0.0;  // mass_a + mass_b, recorded even when it leaves the grid
};
using EventLog = std::vector<Event>;

struct StepResult {
  double dt = 0.0;               // holding time consumed by this proposal
  std::optional<Event> event;    // empty for a thinning rejection (state unchanged)
};

// Finite particle system with pairwise merges at rate h * K(x_i, x_j).
// Bookkeeping is integer-exact: particle counts per bin plus on-grid and
// overflow mass in grid units, so mass conservation is an integer identity.
// Constant and additive rates have closed-form totals and direct pair
// sampling; every other spec (including cutoffs) is simulated by thinning
// against the linear majorant, with null events at the majorant rate.
class ParticleState {
 public:
  ParticleState(const Grid& grid, double h, const KernelSpec& spec);

  // floor(1/h) particles of unit grid mass at time zero.
  static ParticleState monodisperse(const Grid& grid, double h, const KernelSpec& spec);

  void insert(int bin, long long count = 1);

  const Grid& grid() const { return grid_; }
  const KernelSpec& spec() const { return spec_; }
  double h() const { return h_; }
  double time() const { return time_; }
  long long particle_count() const { return n_; }
  long long count_in_bin(int bin) const { return counts_[bin - 1]; }
  long long mass_units() const { return units_; }
  long long overflow_units() const { return overflow_units_; }
  long long proposals() const { return proposals_; }
  long long accepted() const { return accepted_; }
  bool uses_thinning() const { return thinning_; }

  // Total event intensity: the exact pair sum h * sum_{i<j} K for the
  // closed-form families, the majorant pair sum for thinning families.
  double total_rate() const;

  // Unordered pair with probability proportional to K(x_i, x_j); loops over
  // rejected majorant proposals internally, so the returned law is exact.
  std::pair<int, int> sample_pair(RngStream& rng);

  // One proposal: holding time at total_rate(), then accept/reject. With
  // fewer than two particles returns dt = +inf and no event (absorbing).
  StepResult step(RngStream& rng);

  // Pieces of step() for drivers that must observe the state between the
  // holding time and the jump (snapshots at fixed times).
  double next_holding(RngStream& rng);
  void advance(double dt) { time_ += dt; }
  std::optional<Event> jump(RngStream& rng);

  // h * counts as a measure; overflow converted to mass units.
  GridMeasure empirical() const;

 private:
  struct Proposal {
    int a = 0, b = 0;
    bool accept = false;
  };
  Proposal propose(RngStream& rng);
  void remove_particle(int bin);
  int draw_uniform_bin(RngStream& rng) const;
  int draw_mass_biased_bin(RngStream& rng) const;

  Grid grid_;
  double h_;
  KernelSpec spec_;
  bool thinning_;
  double majorant_c_;
  std::vector<long long> counts_;
  mutable Fenwick count_tree_;
  mutable Fenwick unit_tree_;
  long long n_ = 0;
  long long units_ = 0;
  long long overflow_units_ = 0;
  double time_ = 0.0;
  long long proposals_ = 0;
  long long accepted_ = 0;
};

struct PathResult {
  EventLog events;
  std::vector<GridMeasure> snapshots;  // one per requested time, in order
};

// Runs the jump chain until the last requested time (or absorption), snapping
// the state at each requested time. Snapshot at time s reflects all events
// with time < s plus the initial state; requested times must be nondecreasing
// and not precede the current state time.
PathResult simulate_path(ParticleState& state, const std::vector<double>& times, RngStream& rng);

}  // namespace coag
