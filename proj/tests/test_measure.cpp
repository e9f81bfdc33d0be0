#include <cmath>
#include <complex>
#include <vector>

#include "coag/measure.hpp"
#include "coag/rng.hpp"
#include "doctest.h"

using namespace coag;

namespace {

// Independent route to theta_k: the oscillatory frequency-side integral
//   theta_k(x,y) = int_R conj(Phi_x(p)) Phi_y(p) / (1+p^2) dp,
//   Phi_x(p) = int_0^x (1+z^k) e^{ipz} dz,
// with Phi evaluated by plain panel quadrature (no cancellation-prone closed
// forms) and the p-axis integrated over aligned oscillation-resolving panels.
std::complex<double> finite_fourier(double x, double k, double p) {
  Eigen::ArrayXd nodes, weights;
  std::complex<double> acc(0.0, 0.0);
  const int panels = std::max(1, static_cast<int>(std::ceil(x * 4.0)));
  const double w = x / panels;
  for (int q = 0; q < panels; ++q) {
    gauss_legendre(16, q * w, (q + 1) * w, nodes, weights);
    for (int j = 0; j < 16; ++j) {
      const double z = nodes[j];
      acc += weights[j] * (1.0 + std::pow(z, k)) *
             std::complex<double>(std::cos(p * z), std::sin(p * z));
    }
  }
  return acc;
}

double theta_frequency_side(double x, double y, double k) {
  double acc = 0.0;
  Eigen::ArrayXd nodes, weights;
  const double panel = 0.25;
  const int panels = 800;  // covers p in [0, 200]; the tail decays like p^-4
  for (int q = 0; q < panels; ++q) {
    gauss_legendre(8, q * panel, (q + 1) * panel, nodes, weights);
    for (int j = 0; j < 8; ++j) {
      const double p = nodes[j];
      const std::complex<double> fx = finite_fourier(x, k, p);
      const std::complex<double> fy = finite_fourier(y, k, p);
      acc += 2.0 * weights[j] * (std::conj(fx) * fy).real() / (1.0 + p * p);
    }
  }
  return acc;
}

GridMeasure random_measure(const Grid& grid, RngStream& rng, double scale = 1.0) {
  GridMeasure nu = zero_measure(grid);
  for (int m = 0; m < grid.nbins; ++m) nu.w[m] = scale * (rng.uniform01() - 0.5);
  return nu;
}

}  // namespace

TEST_SUITE("measure") {

TEST_CASE("moments and pairings against direct summation") {
  const Grid grid{1.0, 6};
  GridMeasure nu = zero_measure(grid);
  nu.w << 0.5, 0.25, 0.0, 0.125, 0.0, 0.0625;

  CHECK(moment(dirac(grid, 3), 2.0) == doctest::Approx(9.0));
  CHECK(moment(nu, 0.0) == doctest::Approx(0.9375));

  double m1 = 0.0, m2 = 0.0;
  for (int m = 1; m <= 6; ++m) {
    m1 += grid.mass(m) * nu.w[m - 1];
    m2 += grid.mass(m) * grid.mass(m) * nu.w[m - 1];
  }
  CHECK(moment(nu, 1.0) == doctest::Approx(m1).epsilon(1e-14));
  CHECK(moment(nu, 2.0) == doctest::Approx(m2).epsilon(1e-14));

  const GridFunction g = power_function(grid, 2.0);
  CHECK(pair(g, nu) == doctest::Approx(m2).epsilon(1e-14));
  CHECK(pair(indicator_function(grid, 4), nu) == doctest::Approx(0.125));
}

TEST_CASE("weighted norm uses absolute weights") {
  const Grid grid{1.0, 2};
  GridMeasure nu = zero_measure(grid);
  nu.w << -0.5, 0.25;
  CHECK(weighted_norm(nu, 1.0) == doctest::Approx(2.0 * 0.5 + 3.0 * 0.25));
}

TEST_CASE("closed right tail at the atoms") {
  const Grid grid{1.0, 3};
  GridMeasure nu = zero_measure(grid);
  nu.w << 0.5, 0.25, 0.0;
  const GridFunction t = tail_function(nu);
  CHECK(t.v[0] == doctest::Approx(0.75));
  CHECK(t.v[1] == doctest::Approx(0.25));  // tail on (1,2]: the value at 1.5
  CHECK(t.v[2] == 0.0);

  const GridFunction td = tail_function(dirac(grid, 2));
  CHECK(td.v[0] == 1.0);  // the tail keeps the atom at its own location
  CHECK(td.v[1] == 1.0);
  CHECK(td.v[2] == 0.0);

  RngStream rng(3);
  const GridMeasure r = random_measure(Grid{0.5, 20}, rng);
  CHECK(tail_function(r).v[0] == doctest::Approx(moment(r, 0.0)).epsilon(1e-13));
}

TEST_CASE("dual m1 norm: hand-integrated values") {
  const Grid grid{1.0, 4};
  // Unit atom at mass 2, weight equal to 1+y on [0,2]: integral is 4.
  CHECK(dual_norm_m1(dirac(grid, 2), 1.0) == doctest::Approx(4.0).epsilon(1e-14));

  GridMeasure nu = zero_measure(grid);
  nu.w << 0.5, 0.25, 0.0, 0.0;
  CHECK(dual_norm_m1(nu, 0.0) == doctest::Approx(2.0).epsilon(1e-14));  // weight 1+y^0 = 2
  CHECK(dual_norm_m1(nu, 1.0) == doctest::Approx(0.75 * 1.5 + 0.25 * 2.5).epsilon(1e-14));

  // Scaling in the weight and vanishing on the zero measure.
  CHECK(dual_norm_m1(zero_measure(grid), 1.0) == 0.0);
}

TEST_CASE("monodisperse load pins the initial fluctuation to zero") {
  const Grid grid{1.0, 4};
  const GridMeasure a = monodisperse(grid, 1.0 / 3.0);
  CHECK(a.w[0] == doctest::Approx(1.0).epsilon(1e-15));
  const GridMeasure b = monodisperse(grid, 0.3);
  CHECK(b.w[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK_THROWS_AS(monodisperse(grid, 0.0), std::domain_error);
}

TEST_CASE("gauss-legendre rule sanity") {
  Eigen::ArrayXd x, w;
  gauss_legendre(2, 0.0, 1.0, x, w);
  double cubic = 0.0;
  for (int j = 0; j < 2; ++j) cubic += w[j] * x[j] * x[j] * x[j];
  CHECK(cubic == doctest::Approx(0.25).epsilon(1e-14));
  gauss_legendre(8, 0.0, 1.0, x, w);
  double expint = 0.0;
  for (int j = 0; j < 8; ++j) expint += w[j] * std::exp(x[j]);
  CHECK(expint == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-13));
}

TEST_CASE("theta pair kernel: symmetry and the frequency-side oracle") {
  // k = 1 values, checked against the oscillatory integral.
  for (auto [x, y] : {std::pair{1.0, 1.0}, {2.0, 2.0}, {1.0, 3.0}, {0.5, 2.5}}) {
    const double direct = sobolev_theta(x, y, 1.0);
    const double freq = theta_frequency_side(x, y, 1.0);
    CHECK(direct == doctest::Approx(freq).epsilon(2e-6));
    CHECK(sobolev_theta(y, x, 1.0) == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("dual sobolev norm agrees with the theta quadratic form") {
  const Grid grid{1.0, 3};
  // Dirac: norm^2 = theta_k(x,x) / (2 pi).
  for (int bin : {1, 2, 3}) {
    const double x = grid.mass(bin);
    const double direct = dual_norm_sobolev(dirac(grid, bin), 1.0, 8);
    const double via_theta = std::sqrt(sobolev_theta(x, x, 1.0, 16) / (2.0 * M_PI));
    CHECK(direct == doctest::Approx(via_theta).epsilon(1e-6));
  }
  // Signed three-atom measure against the pairwise form.
  GridMeasure nu = zero_measure(grid);
  nu.w << 0.75, -0.5, 0.3;
  double form = 0.0;
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j)
      form += sobolev_theta(grid.mass(i), grid.mass(j), 1.0, 16) * nu.w[i - 1] * nu.w[j - 1];
  CHECK(dual_norm_sobolev(nu, 1.0, 8) ==
        doctest::Approx(std::sqrt(form / (2.0 * M_PI))).epsilon(1e-6));
}

TEST_CASE("dual sobolev norm axioms on random data") {
  const Grid grid{0.5, 24};
  RngStream rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const GridMeasure a = random_measure(grid, rng);
    const GridMeasure b = random_measure(grid, rng);
    const double na = dual_norm_sobolev(a, 1.0);
    const double nb = dual_norm_sobolev(b, 1.0);

    GridMeasure scaled = a;
    scaled.w *= -3.5;
    CHECK(dual_norm_sobolev(scaled, 1.0) == doctest::Approx(3.5 * na).epsilon(1e-12));

    GridMeasure sum = a;
    sum.w += b.w;
    CHECK(dual_norm_sobolev(sum, 1.0) <= na + nb + 1e-12 * (1.0 + na + nb));
  }
  CHECK(dual_norm_sobolev(zero_measure(grid), 1.0) == 0.0);
}

TEST_CASE("dirac dual sobolev norm grows like sqrt(x) times the weight") {
  const Grid grid{0.5, 32};
  const double k = 1.0;
  std::vector<double> ratio;
  for (int bin : {1, 2, 4, 8, 16, 32}) {
    const double x = grid.mass(bin);
    ratio.push_back(dual_norm_sobolev(dirac(grid, bin), k) /
                    (std::sqrt(x) * (1.0 + std::pow(x, k))));
  }
  double lo = ratio[0], hi = ratio[0];
  for (double r : ratio) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  // One fitted constant covers the whole mass range.
  CHECK(hi / lo < 2.0);
  for (double r : ratio) CHECK(r <= hi * 1.0 + 1e-12);
}

TEST_CASE("rejected arguments") {
  const Grid grid{1.0, 4};
  CHECK_THROWS_AS(dual_norm_sobolev(dirac(grid, 1), 0.5), std::domain_error);
  CHECK_THROWS_AS(dual_norm_sobolev(dirac(grid, 1), 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(dual_norm_m1(dirac(grid, 1), -1.0), std::domain_error);
  CHECK_THROWS_AS(dirac(grid, 0), std::out_of_range);
  CHECK_THROWS_AS(dirac(grid, 5), std::out_of_range);
  CHECK_THROWS_AS(pair(power_function(Grid{1.0, 3}, 1.0), dirac(grid, 1)), std::invalid_argument);
  CHECK_THROWS_AS(tabulated_function(grid, Eigen::ArrayXd::Zero(3)), std::invalid_argument);
}

}  // TEST_SUITE
