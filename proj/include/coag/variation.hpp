#pragma once

#include <Eigen/Dense>
#include <vector>

#include "coag/kernel.hpp"
#include "coag/kinetic.hpp"
#include "coag/measure.hpp"

namespace coag {

// Value of g at bin index m, allowing m past the grid: off-grid values
// continue linearly from the last two bins. The mass function extends to
// exactly its own values, so merged-mass differences g(i+j) - g(i) - g(j)
// vanish identically for it, keeping the conservation channel degenerate.
double merged_value(const GridFunction& g, int bin);

// merged_value tabulated for bins 1..2N (every sum of two grid bins).
Eigen::ArrayXd extended_values(const GridFunction& g);

// Collision pieces of the linearized dynamics at a frozen state mu:
//   apply_a:      (Ag)(z) = sum_x [g(z+x) - g(z)] K(x,z) mu(x)
//   apply_b:      (Bg)(z) = sum_x  g(x)           K(x,z) mu(x)
//   apply_lambda: (A - B), computed with the per-pair grouping
//                 [g(z+x) - g(z) - g(x)] so degenerate channels cancel
//                 term by term, not merely in aggregate.
GridFunction apply_a(const GridFunction& g, const GridMeasure& mu, const KernelSpec& spec);
GridFunction apply_a(const GridFunction& g, const GridMeasure& mu, const Eigen::MatrixXd& table);
GridFunction apply_b(const GridFunction& g, const GridMeasure& mu, const KernelSpec& spec);
GridFunction apply_b(const GridFunction& g, const GridMeasure& mu, const Eigen::MatrixXd& table);
GridFunction apply_lambda(const GridFunction& g, const GridMeasure& mu, const KernelSpec& spec);
GridFunction apply_lambda(const GridFunction& g, const GridMeasure& mu,
                          const Eigen::MatrixXd& table);

// Backward solution g_t on the full-step nodes 0, dt, ..., r; values.back()
// is the supplied terminal function.
struct PropagatorField {
  Grid grid;
  double dt = 0.0;
  double terminal_time = 0.0;
  std::vector<double> times;
  std::vector<GridFunction> values;

  std::size_t node_index(double t) const;
  const GridFunction& at_time(double t) const { return values[node_index(t)]; }
};

// Integrates gdot = -Lambda_t g backward from r, stepping by the kinetic dt
// with RK4 stage states read off the stored half-step nodes (no
// interpolation). r must sit on the full-step mesh.
PropagatorField solve_backward(const GridFunction& g_r, double r, const KernelSpec& spec,
                               const KineticSolution& kinetic);

// Same flow with the B part dropped (gdot = -A_t g): the base flow the
// perturbation expansion is built around.
PropagatorField solve_backward_a_only(const GridFunction& g_r, double r, const KernelSpec& spec,
                                      const KineticSolution& kinetic);

// First variation of the kinetic flow in the initial measure, seeded with a
// unit atom at mass x; signed states on the full-step nodes, off-grid merge
// flux tracked on each state's overflow channel.
struct VariationField {
  Grid grid;
  double dt = 0.0;
  double source_mass = 0.0;
  std::vector<double> times;
  std::vector<GridMeasure> states;

  std::size_t node_index(double t) const;
  const GridMeasure& at_time(double t) const { return states[node_index(t)]; }
};

VariationField solve_variation(double x, const KernelSpec& spec, const KineticSolution& kinetic);

// Second variation with unit atoms at masses x and w, integrated jointly
// with both first variations; starts from zero.
struct SecondVariationField {
  Grid grid;
  double dt = 0.0;
  double source_x = 0.0;
  double source_w = 0.0;
  std::vector<double> times;
  std::vector<GridMeasure> states;

  std::size_t node_index(double t) const;
  const GridMeasure& at_time(double t) const { return states[node_index(t)]; }
};

SecondVariationField solve_second_variation(double x, double w, const KernelSpec& spec,
                                            const KineticSolution& kinetic);

// The same object at the single time t through its integral representation:
// the source built from the two first variations at each mesh node,
// propagated homogeneously to t and quadratured with Simpson's rule
// (t/dt must be an even node count). Cross-check path, not the default.
SecondVariationField solve_second_variation_duhamel(double x, double w, const KernelSpec& spec,
                                                    const KineticSolution& kinetic, double t);

// Truncated expansion of solve_backward around the A-only flow S:
//   u_0 = S g_r,   u_j = S g_r - int_t^r S (B u_{j-1}) ds  (trapezoid),
// returning u_terms. With drop_b the B term is zeroed and every order
// reproduces the A-only flow bitwise.
PropagatorField propagator_series(const GridFunction& g_r, double r, const KernelSpec& spec,
                                  const KineticSolution& kinetic, int terms, bool drop_b = false);

}  // namespace coag
