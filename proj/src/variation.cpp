#include "coag/variation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace coag {

namespace {

enum class Part { Full, AOnly, BOnly };

std::size_t mesh_lookup(double t, double dt, std::size_t count, const char* what) {
  if (!(dt > 0.0)) throw std::logic_error(std::string(what) + ": empty field");
  const auto i = static_cast<long long>(std::llround(t / dt));
  if (i < 0 || i >= static_cast<long long>(count) ||
      std::abs(t - static_cast<double>(i) * dt) > 1e-6 * dt)
    throw std::invalid_argument(std::string(what) + ": time not on the field mesh");
  return static_cast<std::size_t>(i);
}

// Kinetic node index of a time that must sit on the full-step mesh.
std::size_t full_node(const KineticSolution& kin, double t, const char* what) {
  const std::size_t i2 = kin.node_index(t);
  if (i2 % 2 != 0)
    throw std::invalid_argument(std::string(what) + ": time must sit on the full-step mesh");
  return i2;
}

void check_table(const Eigen::MatrixXd& table, const Grid& grid, const char* what) {
  if (table.rows() != grid.nbins || table.cols() != grid.nbins)
    throw std::invalid_argument(std::string(what) + ": kernel table size != grid");
}

GridFunction apply_core(const GridFunction& g, const GridMeasure& mu,
                        const Eigen::MatrixXd& table, Part part) {
  if (!(g.grid == mu.grid)) throw std::invalid_argument("grid mismatch");
  check_table(table, g.grid, "apply");
  const int N = g.grid.nbins;
  GridFunction out = zero_function(g.grid);
  if (part == Part::BOnly) {
    out.v = (table * (g.v * mu.w).matrix()).array();
    return out;
  }
  const Eigen::ArrayXd ext = extended_values(g);
  for (int z = 1; z <= N; ++z) {
    const auto tcol = table.col(z - 1).array();
    const double gz = g.v[z - 1];
    if (part == Part::Full) {
      out.v[z - 1] = ((ext.segment(z, N) - gz - g.v) * tcol * mu.w).sum();
    } else {  // AOnly
      out.v[z - 1] = ((ext.segment(z, N) - gz) * tcol * mu.w).sum();
    }
  }
  return out;
}

// One backward RK4 step of dg/ds = +Op g (s runs r -> 0), from the full node
// 2*(i+1) down to 2*i, with stage states read at the stored half nodes.
Eigen::ArrayXd backward_step(const Eigen::ArrayXd& gv, std::size_t i,
                             const KineticSolution& kin, const Eigen::MatrixXd& table,
                             Part part) {
  const Grid& grid = kin.grid();
  const double dt = kin.dt();
  const GridMeasure& hi = kin.state(2 * i + 2);
  const GridMeasure& mid = kin.state(2 * i + 1);
  const GridMeasure& lo = kin.state(2 * i);
  GridFunction stage{grid, gv};
  const Eigen::ArrayXd k1 = apply_core(stage, hi, table, part).v;
  stage.v = gv + (0.5 * dt) * k1;
  const Eigen::ArrayXd k2 = apply_core(stage, mid, table, part).v;
  stage.v = gv + (0.5 * dt) * k2;
  const Eigen::ArrayXd k3 = apply_core(stage, mid, table, part).v;
  stage.v = gv + dt * k3;
  const Eigen::ArrayXd k4 = apply_core(stage, lo, table, part).v;
  return gv + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

PropagatorField backward_core(const GridFunction& g_r, double r, const KernelSpec& spec,
                              const KineticSolution& kinetic, Part part) {
  validate(spec);
  if (!(g_r.grid == kinetic.grid())) throw std::invalid_argument("solve_backward: grid mismatch");
  const std::size_t top = full_node(kinetic, r, "solve_backward");
  const std::size_t M = top / 2;
  const Eigen::MatrixXd table = kernel_table(spec, kinetic.grid());
  const double dt = kinetic.dt();

  PropagatorField field;
  field.grid = kinetic.grid();
  field.dt = dt;
  field.terminal_time = r;
  field.times.resize(M + 1);
  field.values.resize(M + 1);
  field.times[M] = r;
  field.values[M] = g_r;
  Eigen::ArrayXd g = g_r.v;
  for (std::size_t i = M; i-- > 0;) {
    g = backward_step(g, i, kinetic, table, part);
    field.times[i] = static_cast<double>(i) * dt;
    field.values[i] = GridFunction{kinetic.grid(), g};
  }
  return field;
}

// du <- gain of ordered pairs (u slot, nu slot) minus both loss terms:
//   du_k = sum_{i+j=k} K(i,j) u_i nu_j - u_k (K nu)_k - nu_k (K u)_k,
// dof <- first-moment flux of the off-grid gain. With (u, nu) = (xi, mu)
// this is the linearized dynamics; with (u, nu) = (xi_x, xi_w) it is the
// symmetric source of the second variation.
void linearized_apply(const Eigen::MatrixXd& table, const Grid& grid, const Eigen::ArrayXd& u,
                      const Eigen::ArrayXd& nu, Eigen::ArrayXd& du, double& dof) {
  const int N = grid.nbins;
  const Eigen::VectorXd knu = table * nu.matrix();
  const Eigen::VectorXd ku = table * u.matrix();
  du = -(u * knu.array()) - (nu * ku.array());
  dof = 0.0;
  for (int i = 1; i <= N; ++i) {
    const double ui = u[i - 1];
    if (ui == 0.0) continue;
    const int on = N - i;  // j <= N - i keeps the merged pair on the grid
    if (on > 0) du.segment(i, on) += ui * (table.col(i - 1).head(on).array() * nu.head(on));
    for (int j = on + 1; j <= N; ++j)
      dof += ui * table(j - 1, i - 1) * nu[j - 1] * grid.mass(i + j);
  }
}

std::size_t full_steps_available(const KineticSolution& kinetic) {
  if (kinetic.size() == 0) throw std::invalid_argument("variation: empty kinetic solution");
  return (kinetic.size() - 1) / 2;
}

}  // namespace

double merged_value(const GridFunction& g, int bin) {
  const int N = g.grid.nbins;
  if (bin < 1) throw std::out_of_range("merged_value: bin must be >= 1");
  if (bin <= N) return g.v[bin - 1];
  if (N == 1) return g.v[0];
  return g.v[N - 1] + static_cast<double>(bin - N) * (g.v[N - 1] - g.v[N - 2]);
}

Eigen::ArrayXd extended_values(const GridFunction& g) {
  const int N = g.grid.nbins;
  Eigen::ArrayXd ext(2 * N);
  ext.head(N) = g.v;
  const double slope = (N >= 2) ? g.v[N - 1] - g.v[N - 2] : 0.0;
  for (int m = N + 1; m <= 2 * N; ++m)
    ext[m - 1] = g.v[N - 1] + static_cast<double>(m - N) * slope;
  return ext;
}

GridFunction apply_a(const GridFunction& g, const GridMeasure& mu, const Eigen::MatrixXd& table) {
  return apply_core(g, mu, table, Part::AOnly);
}
GridFunction apply_a(const GridFunction& g, const GridMeasure& mu, const KernelSpec& spec) {
  return apply_core(g, mu, kernel_table(spec, g.grid), Part::AOnly);
}
GridFunction apply_b(const GridFunction& g, const GridMeasure& mu, const Eigen::MatrixXd& table) {
  return apply_core(g, mu, table, Part::BOnly);
}
GridFunction apply_b(const GridFunction& g, const GridMeasure& mu, const KernelSpec& spec) {
  return apply_core(g, mu, kernel_table(spec, g.grid), Part::BOnly);
}
GridFunction apply_lambda(const GridFunction& g, const GridMeasure& mu,
                          const Eigen::MatrixXd& table) {
  return apply_core(g, mu, table, Part::Full);
}
GridFunction apply_lambda(const GridFunction& g, const GridMeasure& mu, const KernelSpec& spec) {
  return apply_core(g, mu, kernel_table(spec, g.grid), Part::Full);
}

std::size_t PropagatorField::node_index(double t) const {
  return mesh_lookup(t, dt, times.size(), "PropagatorField");
}
std::size_t VariationField::node_index(double t) const {
  return mesh_lookup(t, dt, times.size(), "VariationField");
}
std::size_t SecondVariationField::node_index(double t) const {
  return mesh_lookup(t, dt, times.size(), "SecondVariationField");
}

PropagatorField solve_backward(const GridFunction& g_r, double r, const KernelSpec& spec,
                               const KineticSolution& kinetic) {
  return backward_core(g_r, r, spec, kinetic, Part::Full);
}

PropagatorField solve_backward_a_only(const GridFunction& g_r, double r, const KernelSpec& spec,
                                      const KineticSolution& kinetic) {
  return backward_core(g_r, r, spec, kinetic, Part::AOnly);
}

VariationField solve_variation(double x, const KernelSpec& spec,
                               const KineticSolution& kinetic) {
  validate(spec);
  const Grid& grid = kinetic.grid();
  const int bin = grid_bin(grid, x);
  const Eigen::MatrixXd table = kernel_table(spec, grid);
  const double dt = kinetic.dt();
  const std::size_t M = full_steps_available(kinetic);
  const int N = grid.nbins;

  VariationField field;
  field.grid = grid;
  field.dt = dt;
  field.source_mass = x;
  field.times.reserve(M + 1);
  field.states.reserve(M + 1);

  GridMeasure xi = dirac(grid, bin);
  field.times.push_back(0.0);
  field.states.push_back(xi);

  Eigen::ArrayXd k1(N), k2(N), k3(N), k4(N), tmp(N);
  double o1 = 0, o2 = 0, o3 = 0, o4 = 0;
  for (std::size_t i = 0; i < M; ++i) {
    const GridMeasure& lo = kinetic.state(2 * i);
    const GridMeasure& mid = kinetic.state(2 * i + 1);
    const GridMeasure& hi = kinetic.state(2 * i + 2);
    linearized_apply(table, grid, xi.w, lo.w, k1, o1);
    tmp = xi.w + (0.5 * dt) * k1;
    linearized_apply(table, grid, tmp, mid.w, k2, o2);
    tmp = xi.w + (0.5 * dt) * k2;
    linearized_apply(table, grid, tmp, mid.w, k3, o3);
    tmp = xi.w + dt * k3;
    linearized_apply(table, grid, tmp, hi.w, k4, o4);
    xi.w += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    xi.overflow += (dt / 6.0) * (o1 + 2.0 * o2 + 2.0 * o3 + o4);
    field.times.push_back(static_cast<double>(i + 1) * dt);
    field.states.push_back(xi);
  }
  return field;
}

SecondVariationField solve_second_variation(double x, double w, const KernelSpec& spec,
                                            const KineticSolution& kinetic) {
  validate(spec);
  const Grid& grid = kinetic.grid();
  const int bx = grid_bin(grid, x);
  const int bw = grid_bin(grid, w);
  const Eigen::MatrixXd table = kernel_table(spec, grid);
  const double dt = kinetic.dt();
  const std::size_t M = full_steps_available(kinetic);
  const int N = grid.nbins;

  SecondVariationField field;
  field.grid = grid;
  field.dt = dt;
  field.source_x = x;
  field.source_w = w;
  field.times.reserve(M + 1);
  field.states.reserve(M + 1);

  // joint state: both first variations and the second variation
  Eigen::ArrayXd xx = Eigen::ArrayXd::Zero(N), xw = Eigen::ArrayXd::Zero(N),
                 ee = Eigen::ArrayXd::Zero(N);
  xx[bx - 1] = 1.0;
  xw[bw - 1] = 1.0;
  double ofx = 0.0, ofw = 0.0, ofe = 0.0;
  field.times.push_back(0.0);
  field.states.push_back(zero_measure(grid));

  struct Slope {
    Eigen::ArrayXd xx, xw, ee;
    double ofx = 0, ofw = 0, ofe = 0;
  };
  Eigen::ArrayXd omega(N);
  auto eval = [&](const Eigen::ArrayXd& sxx, const Eigen::ArrayXd& sxw,
                  const Eigen::ArrayXd& see, const GridMeasure& mu, Slope& out) {
    double o = 0.0;
    linearized_apply(table, grid, sxx, mu.w, out.xx, out.ofx);
    linearized_apply(table, grid, sxw, mu.w, out.xw, out.ofw);
    linearized_apply(table, grid, see, mu.w, out.ee, out.ofe);
    linearized_apply(table, grid, sxx, sxw, omega, o);  // symmetric source
    out.ee += omega;
    out.ofe += o;
  };

  Slope s1, s2, s3, s4;
  s1.xx.resize(N); s1.xw.resize(N); s1.ee.resize(N);
  s2 = s1; s3 = s1; s4 = s1;
  Eigen::ArrayXd txx(N), txw(N), tee(N);
  for (std::size_t i = 0; i < M; ++i) {
    const GridMeasure& lo = kinetic.state(2 * i);
    const GridMeasure& mid = kinetic.state(2 * i + 1);
    const GridMeasure& hi = kinetic.state(2 * i + 2);
    eval(xx, xw, ee, lo, s1);
    txx = xx + (0.5 * dt) * s1.xx; txw = xw + (0.5 * dt) * s1.xw; tee = ee + (0.5 * dt) * s1.ee;
    eval(txx, txw, tee, mid, s2);
    txx = xx + (0.5 * dt) * s2.xx; txw = xw + (0.5 * dt) * s2.xw; tee = ee + (0.5 * dt) * s2.ee;
    eval(txx, txw, tee, mid, s3);
    txx = xx + dt * s3.xx; txw = xw + dt * s3.xw; tee = ee + dt * s3.ee;
    eval(txx, txw, tee, hi, s4);
    xx += (dt / 6.0) * (s1.xx + 2.0 * s2.xx + 2.0 * s3.xx + s4.xx);
    xw += (dt / 6.0) * (s1.xw + 2.0 * s2.xw + 2.0 * s3.xw + s4.xw);
    ee += (dt / 6.0) * (s1.ee + 2.0 * s2.ee + 2.0 * s3.ee + s4.ee);
    ofx += (dt / 6.0) * (s1.ofx + 2.0 * s2.ofx + 2.0 * s3.ofx + s4.ofx);
    ofw += (dt / 6.0) * (s1.ofw + 2.0 * s2.ofw + 2.0 * s3.ofw + s4.ofw);
    ofe += (dt / 6.0) * (s1.ofe + 2.0 * s2.ofe + 2.0 * s3.ofe + s4.ofe);
    field.times.push_back(static_cast<double>(i + 1) * dt);
    field.states.push_back(GridMeasure{grid, ee, ofe});
  }
  return field;
}

SecondVariationField solve_second_variation_duhamel(double x, double w, const KernelSpec& spec,
                                                    const KineticSolution& kinetic, double t) {
  validate(spec);
  const Grid& grid = kinetic.grid();
  const std::size_t top = full_node(kinetic, t, "solve_second_variation_duhamel");
  const std::size_t M = top / 2;
  SecondVariationField field;
  field.grid = grid;
  field.dt = kinetic.dt();
  field.source_x = x;
  field.source_w = w;
  field.times = {t};
  if (M == 0) {
    field.states = {zero_measure(grid)};
    return field;
  }
  if (M % 2 != 0)
    throw std::invalid_argument(
        "solve_second_variation_duhamel: need an even step count for Simpson");

  const Eigen::MatrixXd table = kernel_table(spec, grid);
  const double dt = kinetic.dt();
  const int N = grid.nbins;
  const VariationField fx = solve_variation(x, spec, kinetic);
  const VariationField fw = solve_variation(w, spec, kinetic);

  Eigen::ArrayXd eta = Eigen::ArrayXd::Zero(N);
  double eta_of = 0.0;
  Eigen::ArrayXd u(N), k1(N), k2(N), k3(N), k4(N), tmp(N);
  double uo = 0, o1 = 0, o2 = 0, o3 = 0, o4 = 0;
  for (std::size_t s = 0; s <= M; ++s) {
    const double cs =
        (dt / 3.0) * ((s == 0 || s == M) ? 1.0 : (s % 2 == 1 ? 4.0 : 2.0));
    // source injected at node s, then carried homogeneously to node M
    linearized_apply(table, grid, fx.states[s].w, fw.states[s].w, u, uo);
    for (std::size_t i = s; i < M; ++i) {
      const GridMeasure& lo = kinetic.state(2 * i);
      const GridMeasure& mid = kinetic.state(2 * i + 1);
      const GridMeasure& hi = kinetic.state(2 * i + 2);
      linearized_apply(table, grid, u, lo.w, k1, o1);
      tmp = u + (0.5 * dt) * k1;
      linearized_apply(table, grid, tmp, mid.w, k2, o2);
      tmp = u + (0.5 * dt) * k2;
      linearized_apply(table, grid, tmp, mid.w, k3, o3);
      tmp = u + dt * k3;
      linearized_apply(table, grid, tmp, hi.w, k4, o4);
      u += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      uo += (dt / 6.0) * (o1 + 2.0 * o2 + 2.0 * o3 + o4);
    }
    eta += cs * u;
    eta_of += cs * uo;
  }
  field.states = {GridMeasure{grid, eta, eta_of}};
  return field;
}

PropagatorField propagator_series(const GridFunction& g_r, double r, const KernelSpec& spec,
                                  const KineticSolution& kinetic, int terms, bool drop_b) {
  if (terms < 0) throw std::invalid_argument("propagator_series: terms must be >= 0");
  PropagatorField base = solve_backward_a_only(g_r, r, spec, kinetic);
  if (terms == 0) return base;
  const Eigen::MatrixXd table = kernel_table(spec, kinetic.grid());
  const Grid& grid = kinetic.grid();
  const double dt = kinetic.dt();
  const std::size_t M = base.values.size() - 1;
  const int N = grid.nbins;

  std::vector<Eigen::ArrayXd> u(M + 1);
  for (std::size_t i = 0; i <= M; ++i) u[i] = base.values[i].v;

  std::vector<Eigen::ArrayXd> v(M + 1);
  for (int j = 1; j <= terms; ++j) {
    for (std::size_t i = 0; i <= M; ++i) {
      v[i] = drop_b ? Eigen::ArrayXd::Zero(N).eval()
                    : apply_core(GridFunction{grid, u[i]}, kinetic.state(2 * i), table,
                                 Part::BOnly)
                          .v;
    }
    // running trapezoid of int_t^r S^{t,s} v_s ds, carried by the A-flow
    Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(N);
    u[M] = base.values[M].v;
    for (std::size_t i = M; i-- > 0;) {
      acc = backward_step(acc + (0.5 * dt) * v[i + 1], i, kinetic, table, Part::AOnly);
      acc += (0.5 * dt) * v[i];
      u[i] = base.values[i].v - acc;
    }
  }

  PropagatorField out = base;
  for (std::size_t i = 0; i <= M; ++i) out.values[i] = GridFunction{grid, u[i]};
  return out;
}

}  // namespace coag
