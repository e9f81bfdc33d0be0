#pragma once

#include <Eigen/Dense>
#include <vector>

#include "coag/kernel.hpp"
#include "coag/measure.hpp"

namespace coag {

// Time derivative of the truncated coagulation dynamics at state mu: gain
// into bin k from pairs merging to k, loss from every pair touching k, and
// the first-moment flux of merges leaving the grid on the overflow channel.
// moment(rhs, 1) + rhs.overflow vanishes identically (pairwise cancellation).
GridMeasure coagulation_rhs(const GridMeasure& mu, const KernelSpec& spec);
GridMeasure coagulation_rhs(const GridMeasure& mu, const Eigen::MatrixXd& table);

// Dense trajectory of the mean-field dynamics. The integrator runs classical
// RK4 at half the nominal step and stores every half-node, so downstream
// linear solvers stepping by dt find exact stage data at t, t+dt/2, t+dt
// instead of interpolating.
class KineticSolution {
 public:
  const Grid& grid() const { return grid_; }
  const KernelSpec& spec() const { return spec_; }
  double dt() const { return dt_; }
  double mesh_step() const { return 0.5 * dt_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& requested_times() const { return requested_; }
  std::size_t size() const { return states_.size(); }
  const GridMeasure& state(std::size_t i) const { return states_[i]; }

  // Index of the mesh node at time t; throws if t is not a mesh node
  // (within dt * 1e-6).
  std::size_t node_index(double t) const;
  const GridMeasure& at_time(double t) const { return states_[node_index(t)]; }

  double initial_mass() const { return initial_mass_; }
  // Most negative weight produced by any accepted step, before clipping.
  double min_weight() const { return min_weight_; }
  // Total first-moment mass added by clipping negatives to zero.
  double clipped_mass() const { return clipped_mass_; }

 private:
  friend KineticSolution solve_kinetic(const GridMeasure&, const KernelSpec&,
                                       const std::vector<double>&, double);
  Grid grid_{1.0, 1};
  KernelSpec spec_;
  double dt_ = 0.0;
  std::vector<double> times_;
  std::vector<double> requested_;
  std::vector<GridMeasure> states_;
  double initial_mass_ = 0.0;
  double min_weight_ = 0.0;
  double clipped_mass_ = 0.0;
};

// Fixed-step RK4 from mu0 up to times.back(). Every requested time must sit
// on the half-step mesh. Negative undershoots are clipped to zero with the
// clipped mass audited on the solution; a conservation drift beyond 1e-6
// relative or an undershoot beyond 1e-8 aborts with std::runtime_error.
KineticSolution solve_kinetic(const GridMeasure& mu0, const KernelSpec& spec,
                              const std::vector<double>& times, double dt);

// max over mesh nodes of |mass(t) + overflow(t) - initial| / initial
// (absolute when the initial mass is zero).
double conservation_residual(const KineticSolution& sol);

// Closed-form monodisperse solution for the constant kernel: initial weight
// a at bin 1 and rate coefficient c give, with q = act/(act+2),
//   n_k(t) = a (1 + act/2)^{-2} q^{k-1}.
// Returned with overflow 0: it is the on-grid restriction of the full
// solution (tail mass beyond bin N is not represented).
GridMeasure constant_kernel_reference(const Grid& grid, double c, double a, double t);

// ||mu_t(mu0a) - mu_t(mu0b)|| / ||mu0a - mu0b|| in the selected norm at
// time t, solving both trajectories at step dt. Equal inputs return 0.
double lipschitz_probe(const GridMeasure& mu0a, const GridMeasure& mu0b,
                       const KernelSpec& spec, double t, double dt,
                       const NormSelector& sel);

}  // namespace coag
