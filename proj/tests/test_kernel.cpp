#include <cmath>

#include "coag/kernel.hpp"
#include "coag/rng.hpp"
#include "doctest.h"

using namespace coag;

namespace {

KernelSpec constant_spec(double c) { return {KernelFamily::Constant, c, 0.0, SmoothShape::Saturating}; }
KernelSpec additive_spec(double c) { return {KernelFamily::Additive, c, 0.0, SmoothShape::Saturating}; }
KernelSpec product_spec(double c) { return {KernelFamily::ProductSqrt, c, 0.0, SmoothShape::Saturating}; }
KernelSpec smooth_spec(double c, SmoothShape s) { return {KernelFamily::Smooth, c, 0.0, s}; }

const KernelSpec kAllFamilies[] = {
    constant_spec(2.0),
    additive_spec(1.0),
    product_spec(0.5),
    smooth_spec(1.0, SmoothShape::Constant),
    smooth_spec(2.0, SmoothShape::Additive),
    smooth_spec(1.5, SmoothShape::Saturating),
};

}  // namespace

TEST_SUITE("kernel") {

TEST_CASE("pointwise values of the stock families") {
  CHECK(kernel_eval(constant_spec(2.0), 1.5, 7.0) == 2.0);
  CHECK(kernel_eval(additive_spec(1.0), 4.0, 4.0) == 8.0);
  CHECK(kernel_eval(additive_spec(2.5), 1.0, 3.0) == doctest::Approx(10.0));
  CHECK(kernel_eval(product_spec(0.5), 1.0, 4.0) == doctest::Approx(3.0));
  CHECK(kernel_eval(smooth_spec(1.0, SmoothShape::Constant), 9.0, 0.5) == 1.0);
  CHECK(kernel_eval(smooth_spec(2.0, SmoothShape::Additive), 1.0, 2.0) == doctest::Approx(6.0));
  // Saturating shape at a table knot: s(1) = 1/2, s(3) = 3/4.
  CHECK(kernel_eval(smooth_spec(1.0, SmoothShape::Saturating), 1.0, 3.0) ==
        doctest::Approx(1.5 * 1.75));
}

TEST_CASE("cutoff truncates only past the level") {
  const KernelSpec kn = with_cutoff(additive_spec(1.0), 5.0);
  CHECK(kernel_eval(kn, 2.0, 3.0) == 5.0);   // x+y = n stays exact
  CHECK(kernel_eval(kn, 1.0, 3.0) == 4.0);
  CHECK(kernel_eval(kn, 4.0, 4.0) == 5.0);   // min(8, 1*5)
  // Monotone in the level and recovering K for large levels.
  RngStream rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double x = 10.0 * rng.uniform01(), y = 10.0 * rng.uniform01();
    double prev = 0.0;
    for (double level : {1.0, 2.0, 5.0, 10.0, 50.0}) {
      const double v = kernel_eval(with_cutoff(additive_spec(1.0), level), x, y);
      CHECK(v >= prev - 1e-15);
      CHECK(v <= 1.0 * level * (1.0 + 1e-15) + (x + y <= level ? x + y : 0.0));
      prev = v;
    }
    CHECK(kernel_eval(with_cutoff(additive_spec(1.0), 1e6), x, y) == x + y);
  }
}

TEST_CASE("symmetry in the arguments") {
  RngStream rng(11);
  for (const auto& spec : kAllFamilies) {
    for (int i = 0; i < 10000; ++i) {
      const double x = 20.0 * rng.uniform01(), y = 20.0 * rng.uniform01();
      CHECK(kernel_eval(spec, x, y) == kernel_eval(spec, y, x));
    }
  }
}

TEST_CASE("linear majorant dominates every family") {
  RngStream rng(13);
  for (const auto& spec : kAllFamilies) {
    for (int i = 0; i < 10000; ++i) {
      const double x = 50.0 * rng.uniform01(), y = 50.0 * rng.uniform01();
      CHECK(kernel_eval(spec, x, y) <= kernel_majorant(spec, x, y) * (1.0 + 1e-14));
    }
    // Cutoff only lowers rates, never raises them past the majorant.
    const KernelSpec kn = with_cutoff(spec, 3.0);
    for (int i = 0; i < 1000; ++i) {
      const double x = 50.0 * rng.uniform01(), y = 50.0 * rng.uniform01();
      CHECK(kernel_eval(kn, x, y) <= kernel_eval(spec, x, y) * (1.0 + 1e-14));
    }
  }
}

TEST_CASE("product family majorant constant is tight at x = y = 1/4") {
  const KernelSpec spec = product_spec(2.0);
  CHECK(majorant_coeff(spec) == doctest::Approx(3.0));
  CHECK(kernel_eval(spec, 0.25, 0.25) == doctest::Approx(kernel_majorant(spec, 0.25, 0.25)));
}

TEST_CASE("smooth family is nondecreasing with bounded differences") {
  RngStream rng(17);
  const double eps = 1e-4;
  for (SmoothShape shape : {SmoothShape::Constant, SmoothShape::Additive, SmoothShape::Saturating}) {
    const KernelSpec spec = smooth_spec(1.25, shape);
    for (int i = 0; i < 5000; ++i) {
      const double x = 80.0 * rng.uniform01(), y = 80.0 * rng.uniform01();
      const double k0 = kernel_eval(spec, x, y);
      const double kx = kernel_eval(spec, x + eps, y);
      CHECK(kx >= k0 - 1e-12);
      // First differences stay under 2*coeff for every built-in shape.
      CHECK(std::abs(kx - k0) / eps <= 2.0 * spec.coeff + 1e-6);
    }
  }
}

TEST_CASE("kernel_table matches pointwise evaluation and is symmetric") {
  const Grid grid{0.5, 24};
  for (const auto& spec : {additive_spec(2.0), product_spec(1.0),
                           with_cutoff(smooth_spec(1.0, SmoothShape::Saturating), 4.0)}) {
    const Eigen::MatrixXd table = kernel_table(spec, grid);
    REQUIRE(table.rows() == 24);
    CHECK((table - table.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 1; i <= 24; i += 5)
      for (int j = 1; j <= 24; j += 3)
        CHECK(table(i - 1, j - 1) == kernel_eval(spec, grid.mass(i), grid.mass(j)));
  }
}

TEST_CASE("names identify family, shape and cutoff") {
  CHECK(kernel_name(constant_spec(1.0)) == "constant");
  CHECK(kernel_name(additive_spec(1.0)) == "additive");
  CHECK(kernel_name(product_spec(1.0)) == "product_sqrt");
  CHECK(kernel_name(smooth_spec(1.0, SmoothShape::Saturating)) == "smooth_saturating");
  CHECK(kernel_name(with_cutoff(additive_spec(1.0), 5.0)).find("cutoff") != std::string::npos);
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS(kernel_eval(constant_spec(1.0), -1.0, 2.0), std::domain_error);
  CHECK_THROWS_AS(kernel_eval(KernelSpec{KernelFamily::Constant, 0.0, 0.0, SmoothShape::Constant}, 1.0, 1.0),
                  std::domain_error);
  CHECK_THROWS_AS(kernel_eval(KernelSpec{KernelFamily::Additive, -2.0, 0.0, SmoothShape::Constant}, 1.0, 1.0),
                  std::domain_error);
  CHECK_THROWS_AS(with_cutoff(constant_spec(1.0), 0.0), std::domain_error);
  CHECK_THROWS_AS(with_cutoff(constant_spec(1.0), -3.0), std::domain_error);
}

}  // TEST_SUITE
