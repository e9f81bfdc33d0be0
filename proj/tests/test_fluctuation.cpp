#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "coag/fluctuation.hpp"
#include "coag/kernel.hpp"
#include "coag/kinetic.hpp"
#include "coag/measure.hpp"
#include "coag/rng.hpp"
#include "coag/variation.hpp"
#include "doctest.h"

using namespace coag;

namespace {

GridMeasure random_measure(const Grid& grid, RngStream& rng, double scale = 1.0) {
  GridMeasure nu = zero_measure(grid);
  for (int k = 0; k < grid.nbins; ++k) nu.w[k] = scale * rng.uniform01();
  return nu;
}

GridFunction random_function(const Grid& grid, RngStream& rng) {
  GridFunction g = zero_function(grid);
  for (int k = 0; k < grid.nbins; ++k) g.v[k] = 2.0 * rng.uniform01() - 1.0;
  return g;
}

}  // namespace

TEST_SUITE("fluctuation") {
  TEST_CASE("fluctuation field centers and rescales") {
    const Grid grid{1.0, 4};
    GridMeasure z = zero_measure(grid);
    z.w << 0.5, 0.25, 0.0, 0.125;
    z.overflow = 0.5;
    GridMeasure mu = zero_measure(grid);
    mu.w << 0.4, 0.3, 0.0, 0.1;
    mu.overflow = 0.3;
    const GridMeasure f = fluctuation_field(z, mu, 0.04);
    CHECK(f.w[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(f.w[1] == doctest::Approx(-0.25).epsilon(1e-14));
    CHECK(f.w[2] == 0.0);
    CHECK(f.overflow == doctest::Approx(1.0).epsilon(1e-14));

    const GridMeasure null = fluctuation_field(mu, mu, 0.01);
    CHECK((null.w == 0.0).all());
    CHECK(null.overflow == 0.0);

    CHECK_THROWS_AS(fluctuation_field(z, mu, 0.0), std::invalid_argument);
    const Grid other{0.5, 4};
    CHECK_THROWS_AS(fluctuation_field(zero_measure(other), mu, 0.01), std::invalid_argument);
  }

  TEST_CASE("noise form on a single atom") {
    // one atom of weight a, phi = psi = indicator of the doubled mass:
    // only the (1,1) pair contributes, with difference one
    const Grid grid{1.0, 10};
    const double a = 0.7, c = 1.3;
    const GridMeasure mu = dirac(grid, 1, a);
    const GridFunction phi = indicator_function(grid, 2);
    const KernelSpec spec{KernelFamily::Constant, c};
    CHECK(pi_form(mu, phi, phi, spec) == doctest::Approx(0.25 * c * a * a).epsilon(1e-14));
  }

  TEST_CASE("noise form is symmetric and bilinear") {
    const Grid grid{0.5, 40};
    RngStream rng(31);
    const GridMeasure mu = random_measure(grid, rng, 0.6);
    const GridFunction f = random_function(grid, rng);
    const GridFunction g = random_function(grid, rng);
    for (const auto family : {KernelFamily::Constant, KernelFamily::Additive,
                              KernelFamily::ProductSqrt, KernelFamily::Smooth}) {
      const KernelSpec spec{family, 1.1};
      CHECK(pi_form(mu, f, g, spec) == pi_form(mu, g, f, spec));
      const GridFunction sum{grid, f.v + g.v};
      const double lhs = pi_form(mu, sum, sum, spec);
      const double rhs =
          pi_form(mu, f, f, spec) + 2.0 * pi_form(mu, f, g, spec) + pi_form(mu, g, g, spec);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }

  TEST_CASE("noise form annihilates the mass channel bitwise") {
    const Grid grid{0.25, 50};
    RngStream rng(33);
    const GridFunction e = mass_function(grid);
    for (const auto family : {KernelFamily::Constant, KernelFamily::Additive,
                              KernelFamily::ProductSqrt, KernelFamily::Smooth}) {
      const KernelSpec spec{family, 0.9};
      const GridMeasure mu = random_measure(grid, rng);
      const GridFunction psi = random_function(grid, rng);
      CHECK(pi_form(mu, e, psi, spec) == 0.0);
      CHECK(pi_form(mu, psi, e, spec) == 0.0);
      CHECK(pi_form(mu, e, e, spec) == 0.0);
    }
  }

  TEST_CASE("accumulated variance of the monomer count matches the closed form") {
    // unit-rate constant kernel from a unit atom, phi = monomer indicator,
    // t = 1: the backward flow stays of the form a(s) 1_{x=1} + C(s) and the
    // time integral comes out rational
    const double exact = 716.0 / 2187.0;
    const Grid grid{1.0, 80};
    const KernelSpec spec{KernelFamily::Constant, 1.0};
    const GridFunction phi = indicator_function(grid, 1);

    std::vector<double> errs;
    for (const double dt : {0.02, 0.01, 0.005}) {
      const KineticSolution kin = solve_kinetic(dirac(grid, 1), spec, {1.0}, dt);
      errs.push_back(std::abs(ou_variance(phi, 1.0, spec, kin) - exact));
    }
    CHECK(errs[1] <= 2e-6);
    CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.17));
    CHECK(errs[1] / errs[2] == doctest::Approx(4.0).epsilon(0.17));
  }

  TEST_CASE("accumulated variance degenerates on the mass channel") {
    const Grid grid{0.25, 60};
    const KernelSpec spec{KernelFamily::ProductSqrt, 0.7};
    const KineticSolution kin = solve_kinetic(dirac(grid, 2, 0.8), spec, {0.5}, 0.01);
    const GridFunction e = mass_function(grid);
    CHECK(ou_variance(e, 0.5, spec, kin) == 0.0);
    CHECK(ou_variance(indicator_function(grid, 1), 0.0, spec, kin) == 0.0);
  }

  TEST_CASE("joint law reduces to the scalar variance on one channel") {
    const Grid grid{1.0, 60};
    const KernelSpec spec{KernelFamily::Constant, 1.0};
    const KineticSolution kin = solve_kinetic(dirac(grid, 1), spec, {1.0}, 0.01);
    const GridFunction phi = indicator_function(grid, 1);
    const OUCovariance cov =
        ou_covariance({1.0}, {phi}, zero_measure(grid), spec, kin);
    CHECK(cov.sigma(0, 0) == ou_variance(phi, 1.0, spec, kin));
    CHECK(cov.mean[0] == 0.0);
  }

  TEST_CASE("joint law mean carries the initial deviation through the backward flow") {
    const Grid grid{1.0, 70};
    const KernelSpec spec{KernelFamily::Constant, 1.0};
    const KineticSolution kin = solve_kinetic(dirac(grid, 1), spec, {0.5}, 0.01);
    const OUCovariance cov = ou_covariance({0.5}, {constant_function(grid, 1.0)},
                                           dirac(grid, 1, 0.5), spec, kin);
    // flat terminal functional: the flow keeps it flat with the squared ratio value
    const double want = 0.5 * std::pow(2.0 / 2.5, 2);
    CHECK(std::abs(cov.mean[0] - want) <= 1e-8);
  }

  TEST_CASE("joint law is symmetric, positive semidefinite, and Cauchy-Schwarz tight") {
    const Grid grid{1.0, 60};
    const KernelSpec spec{KernelFamily::Additive, 0.8};
    const KineticSolution kin = solve_kinetic(dirac(grid, 1), spec, {1.0}, 0.01);
    const std::vector<double> times{0.25, 0.5, 1.0};
    const std::vector<GridFunction> phis{indicator_function(grid, 1),
                                         indicator_function(grid, 2),
                                         power_function(grid, 2.0)};
    const OUCovariance cov = ou_covariance(times, phis, zero_measure(grid), spec, kin);
    CHECK(cov.sigma == cov.sigma.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov.sigma);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * cov.sigma.trace());
    for (int l = 0; l < 3; ++l)
      for (int k = 0; k < 3; ++k)
        CHECK(std::abs(cov.sigma(l, k)) <=
              std::sqrt(cov.sigma(l, l) * cov.sigma(k, k)) + 1e-12);

    CHECK_THROWS_AS(ou_covariance({}, {}, zero_measure(grid), spec, kin),
                    std::invalid_argument);
    CHECK_THROWS_AS(ou_covariance({0.5}, phis, zero_measure(grid), spec, kin),
                    std::invalid_argument);
  }

  TEST_CASE("characteristic function of the joint law") {
    OUCovariance cov;
    cov.times = {1.0};
    cov.mean.resize(1);
    cov.mean << 0.3;
    cov.sigma.resize(1, 1);
    cov.sigma << 0.5;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
    CHECK(char_fn(cov, zero) == std::complex<double>(1.0, 0.0));
    Eigen::VectorXd p(1);
    p << 1.2;
    const std::complex<double> c = char_fn(cov, p);
    const double amp = std::exp(-0.5 * 0.5 * 1.44);
    CHECK(c.real() == doctest::Approx(amp * std::cos(0.36)).epsilon(1e-14));
    CHECK(c.imag() == doctest::Approx(amp * std::sin(0.36)).epsilon(1e-14));
    CHECK(std::abs(c) <= 1.0);
    CHECK(-2.0 * std::log(std::abs(c)) == doctest::Approx(0.72).epsilon(1e-12));

    Eigen::VectorXd wrong(2);
    wrong << 1.0, 2.0;
    CHECK_THROWS_AS(char_fn(cov, wrong), std::invalid_argument);
  }
}
