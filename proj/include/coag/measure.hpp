#pragma once

#include <Eigen/Dense>

namespace coag {

// Uniform mass grid: bin k (1-based) carries the atom at mass k*delta,
// k = 1..nbins. Mass zero is not a bin; functions vanish there by convention.
struct Grid {
  double delta = 1.0;
  int nbins = 0;

  double mass(int bin) const { return delta * bin; }
  bool operator==(const Grid&) const = default;
};

// Finite signed measure supported on the grid atoms; w[k-1] is the weight at
// mass k*delta. overflow holds first-moment mass that left the grid past the
// top bin. It is nonnegative and nondecreasing along physical evolutions but
// can be signed for differences of measures.
struct GridMeasure {
  Grid grid;
  Eigen::ArrayXd w;
  double overflow = 0.0;
};

// Scalar test function sampled at the grid atoms; v[k-1] is the value at
// mass k*delta.
struct GridFunction {
  Grid grid;
  Eigen::ArrayXd v;
};

// Bin carrying the given mass; throws unless the mass is a grid atom
// (within delta * 1e-9) inside the grid.
int grid_bin(const Grid& grid, double mass);

GridMeasure zero_measure(const Grid& grid);
GridMeasure dirac(const Grid& grid, int bin, double weight = 1.0);

// floor(1/h) unit-mass atoms carrying weight h each: the mean-one monodisperse
// initial load whose empirical and limit measures coincide exactly.
GridMeasure monodisperse(const Grid& grid, double h);

GridFunction zero_function(const Grid& grid);
GridFunction constant_function(const Grid& grid, double c);
GridFunction power_function(const Grid& grid, double p);
GridFunction mass_function(const Grid& grid);
GridFunction indicator_function(const Grid& grid, int bin);
GridFunction tabulated_function(const Grid& grid, Eigen::ArrayXd values);

// Elementwise arithmetic on a shared grid; overflow combines the same way.
GridMeasure operator+(const GridMeasure& a, const GridMeasure& b);
GridMeasure operator-(const GridMeasure& a, const GridMeasure& b);
GridMeasure operator*(double s, const GridMeasure& a);

// sum_m (m delta)^k w_m over the grid part (overflow excluded).
double moment(const GridMeasure& nu, double k);

// sum_m g(m delta) w_m.
double pair(const GridFunction& g, const GridMeasure& nu);

// sum_m (1 + (m delta)^k) |w_m|.
double weighted_norm(const GridMeasure& nu, double k);

// Closed right tail at the atoms: value at bin m is sum_{j >= m} w_j, i.e.
// nu[x, infinity) read at x = m*delta with the atom at x included. As a
// function of continuous x the tail is piecewise constant on ((m-1)d, m*d].
GridFunction tail_function(const GridMeasure& nu);

// int_0^inf |tail(y)| (1 + y^k) dy, evaluated exactly from the step tail.
double dual_norm_m1(const GridMeasure& nu, double k);

// Dual Sobolev norm for the weight 1+x^k, k > 1/2: the quadratic form
// (1/2) int int u(z) u(w) exp(-|z-w|) dz dw with u(z) = (1+z^k) * tail(z),
// which is the closed form of the oscillatory pair kernel theta_k below.
// quad_order is the per-cell Gauss-Legendre order. Throws std::domain_error
// if the form comes out negative beyond roundoff (quadrature failure).
double dual_norm_sobolev(const GridMeasure& nu, double k, int quad_order = 6);

// theta_k(x,y) = pi * int_[0,x] int_[0,y] (1+z^k)(1+w^k) exp(-|z-w|) dz dw,
// the pair kernel of the same quadratic form: the norm squared of nu equals
// (1/2pi) sum_ij theta_k(x_i, x_j) w_i w_j. Exposed for cross-checks.
double sobolev_theta(double x, double y, double k, int panels_per_unit = 8);

// Nodes/weights of the n-point Gauss-Legendre rule on [a,b] (n <= 16).
void gauss_legendre(int n, double a, double b, Eigen::ArrayXd& nodes, Eigen::ArrayXd& weights);

enum class NormKind { Weighted, DualM1, DualSobolev };

// Norm family selector: Weighted and DualM1 use the weight 1 + x^k;
// DualSobolev needs k > 1/2 and a per-cell quadrature order.
struct NormSelector {
  NormKind kind = NormKind::Weighted;
  double k = 1.0;
  int quad_order = 6;
};

double measure_norm(const GridMeasure& nu, const NormSelector& sel);

}  // namespace coag
