#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "coag/kernel.hpp"
#include "coag/kinetic.hpp"
#include "coag/measure.hpp"
#include "coag/variation.hpp"

namespace coag {

// Centered, sqrt(1/h)-rescaled deviation of an empirical state from its
// kinetic counterpart.
GridMeasure fluctuation_field(const GridMeasure& z, const GridMeasure& mu, double h);

// Local covariance rate of the fluctuation noise:
//   Pi(mu; phi, psi) = (1/4) sum_{x,y} dphi(x,y) dpsi(x,y) K(x,y) mu(x) mu(y)
// over ordered pairs of grid atoms, with dphi(x,y) = phi(x+y) - phi(x) -
// phi(y) read through merged_value past the top bin. Each difference is
// grouped per pair, so the conserved mass channel vanishes term by term.
double pi_form(const GridMeasure& mu, const GridFunction& phi, const GridFunction& psi,
               const KernelSpec& spec);
double pi_form(const GridMeasure& mu, const GridFunction& phi, const GridFunction& psi,
               const Eigen::MatrixXd& table);

// sigma^2(t) = 2 int_0^t Pi(mu_s; U^{s,t} phi, U^{s,t} phi) ds by the
// trapezoid rule on the full-step nodes; t must sit on the full-step mesh.
double ou_variance(const GridFunction& phi, double t, const KernelSpec& spec,
                   const KineticSolution& kinetic);

// Limit Gaussian law of the functionals phi_j observed at times[j]: mean
// from a deterministic initial deviation, covariance from the accumulated
// noise carried by the backward flow.
struct OUCovariance {
  std::vector<double> times;
  Eigen::VectorXd mean;
  Eigen::MatrixXd sigma;
};

OUCovariance ou_covariance(const std::vector<double>& times,
                           const std::vector<GridFunction>& phis, const GridMeasure& f0,
                           const KernelSpec& spec, const KineticSolution& kinetic);

// exp(i p . mean - p' sigma p / 2)
std::complex<double> char_fn(const OUCovariance& cov, const Eigen::VectorXd& p);

}  // namespace coag
