#include "coag/measure.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace coag {

namespace {

void check_grid(const Grid& grid) {
  if (grid.nbins < 1 || !(grid.delta > 0.0))
    throw std::invalid_argument("grid: need nbins >= 1 and delta > 0");
}

void check_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw std::invalid_argument("grid mismatch");
}

Eigen::ArrayXd grid_masses(const Grid& grid) {
  return Eigen::ArrayXd::LinSpaced(grid.nbins, 1.0, static_cast<double>(grid.nbins)) * grid.delta;
}

}  // namespace

int grid_bin(const Grid& grid, double mass) {
  check_grid(grid);
  const auto bin = static_cast<long long>(std::llround(mass / grid.delta));
  if (bin < 1 || bin > grid.nbins || std::abs(mass - static_cast<double>(bin) * grid.delta) >
                                         1e-9 * grid.delta)
    throw std::invalid_argument("grid_bin: mass is not a grid atom");
  return static_cast<int>(bin);
}

GridMeasure zero_measure(const Grid& grid) {
  check_grid(grid);
  return {grid, Eigen::ArrayXd::Zero(grid.nbins), 0.0};
}

GridMeasure dirac(const Grid& grid, int bin, double weight) {
  check_grid(grid);
  if (bin < 1 || bin > grid.nbins) throw std::out_of_range("dirac: bin outside grid");
  GridMeasure nu = zero_measure(grid);
  nu.w[bin - 1] = weight;
  return nu;
}

GridMeasure monodisperse(const Grid& grid, double h) {
  if (!(h > 0.0)) throw std::domain_error("monodisperse: h must be positive");
  const auto count = static_cast<long long>(std::floor(1.0 / h));
  if (count < 1) throw std::domain_error("monodisperse: h > 1 leaves no particles");
  return dirac(grid, 1, h * static_cast<double>(count));
}

GridFunction zero_function(const Grid& grid) {
  check_grid(grid);
  return {grid, Eigen::ArrayXd::Zero(grid.nbins)};
}

GridFunction constant_function(const Grid& grid, double c) {
  check_grid(grid);
  return {grid, Eigen::ArrayXd::Constant(grid.nbins, c)};
}

GridFunction power_function(const Grid& grid, double p) {
  check_grid(grid);
  if (p < 0.0) throw std::domain_error("power_function: negative exponent");
  return {grid, grid_masses(grid).pow(p)};
}

GridFunction mass_function(const Grid& grid) { return power_function(grid, 1.0); }

GridFunction indicator_function(const Grid& grid, int bin) {
  check_grid(grid);
  if (bin < 1 || bin > grid.nbins) throw std::out_of_range("indicator_function: bin outside grid");
  GridFunction g = zero_function(grid);
  g.v[bin - 1] = 1.0;
  return g;
}

GridFunction tabulated_function(const Grid& grid, Eigen::ArrayXd values) {
  check_grid(grid);
  if (values.size() != grid.nbins)
    throw std::invalid_argument("tabulated_function: value count != nbins");
  return {grid, std::move(values)};
}

GridMeasure operator+(const GridMeasure& a, const GridMeasure& b) {
  check_same_grid(a.grid, b.grid);
  return {a.grid, a.w + b.w, a.overflow + b.overflow};
}

GridMeasure operator-(const GridMeasure& a, const GridMeasure& b) {
  check_same_grid(a.grid, b.grid);
  return {a.grid, a.w - b.w, a.overflow - b.overflow};
}

GridMeasure operator*(double s, const GridMeasure& a) {
  return {a.grid, s * a.w, s * a.overflow};
}

double moment(const GridMeasure& nu, double k) {
  check_grid(nu.grid);
  if (k == 0.0) return nu.w.sum();
  if (k == 1.0) return (grid_masses(nu.grid) * nu.w).sum();
  return (grid_masses(nu.grid).pow(k) * nu.w).sum();
}

double pair(const GridFunction& g, const GridMeasure& nu) {
  check_same_grid(g.grid, nu.grid);
  return (g.v * nu.w).sum();
}

double weighted_norm(const GridMeasure& nu, double k) {
  check_grid(nu.grid);
  return ((1.0 + grid_masses(nu.grid).pow(k)) * nu.w.abs()).sum();
}

GridFunction tail_function(const GridMeasure& nu) {
  check_grid(nu.grid);
  GridFunction t{nu.grid, Eigen::ArrayXd(nu.grid.nbins)};
  double acc = 0.0;
  for (int m = nu.grid.nbins; m >= 1; --m) {
    acc += nu.w[m - 1];
    t.v[m - 1] = acc;
  }
  return t;
}

double dual_norm_m1(const GridMeasure& nu, double k) {
  if (k < 0.0) throw std::domain_error("dual_norm_m1: k must be nonnegative");
  const GridFunction t = tail_function(nu);
  const double d = nu.grid.delta;
  double acc = 0.0;
  double bl = 0.0;  // left endpoint power (k+1)
  for (int m = 1; m <= nu.grid.nbins; ++m) {
    const double br = std::pow(d * m, k + 1.0);
    acc += std::abs(t.v[m - 1]) * (d + (br - bl) / (k + 1.0));
    bl = br;
  }
  return acc;
}

void gauss_legendre(int n, double a, double b, Eigen::ArrayXd& nodes, Eigen::ArrayXd& weights) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  nodes.resize(n);
  weights.resize(n);
  const int m = (n + 1) / 2;
  const double xm = 0.5 * (b + a), xl = 0.5 * (b - a);
  for (int i = 0; i < m; ++i) {
    // Newton on P_n from the Chebyshev estimate of the i-th root.
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    nodes[i] = xm - xl * z;
    nodes[n - 1 - i] = xm + xl * z;
    weights[i] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
    weights[n - 1 - i] = weights[i];
  }
}

namespace {

// One-sided exponential moving integral I(z) = int_0^z u(w) exp(w - z) dw
// accumulated cell by cell; all exponents are <= 0 so nothing overflows.
struct SobolevQuadrature {
  double q = 0.0;       // int u(z) I(z) dz
  double abs_mass = 0.0;  // int |u|, for the failure threshold scale
};

SobolevQuadrature sobolev_form(const GridMeasure& nu, double k, int order) {
  const int n = nu.grid.nbins;
  const double d = nu.grid.delta;
  const GridFunction tail = tail_function(nu);

  Eigen::ArrayXd ref_x, ref_w;  // reference rule on [0,1]
  gauss_legendre(order, 0.0, 1.0, ref_x, ref_w);

  SobolevQuadrature out;
  double boundary = 0.0;  // I at the left edge of the current cell
  Eigen::ArrayXd fz(order), inner(order);
  for (int m = 1; m <= n; ++m) {
    const double a = d * (m - 1);
    const double t = tail.v[m - 1];
    // Outer nodes of this cell and the inner integral evaluated at them.
    for (int j = 0; j < order; ++j) {
      const double z = a + d * ref_x[j];
      fz[j] = 1.0 + std::pow(z, k);
      const double width = z - a;
      double local = 0.0;
      for (int l = 0; l < order; ++l) {
        const double w = a + width * ref_x[l];
        local += width * ref_w[l] * (1.0 + std::pow(w, k)) * std::exp(w - z);
      }
      inner[j] = boundary * std::exp(a - z) + t * local;
    }
    for (int j = 0; j < order; ++j) {
      const double uz = t * fz[j];
      out.q += d * ref_w[j] * uz * inner[j];
      out.abs_mass += d * ref_w[j] * std::abs(uz);
    }
    // Advance I to the right edge of the cell.
    const double b = d * m;
    double local = 0.0;
    for (int l = 0; l < order; ++l) {
      const double w = a + d * ref_x[l];
      local += d * ref_w[l] * (1.0 + std::pow(w, k)) * std::exp(w - b);
    }
    boundary = boundary * std::exp(-d) + t * local;
  }
  return out;
}

}  // namespace

double dual_norm_sobolev(const GridMeasure& nu, double k, int quad_order) {
  check_grid(nu.grid);
  if (!(k > 0.5)) throw std::domain_error("dual_norm_sobolev: requires k > 1/2");
  if (quad_order < 2) throw std::invalid_argument("dual_norm_sobolev: quad_order must be >= 2");
  const SobolevQuadrature form = sobolev_form(nu, k, quad_order);
  const double scale = std::max(form.abs_mass * form.abs_mass, 1e-300);
  if (form.q < -1e-10 * scale)
    throw std::domain_error("dual_norm_sobolev: negative quadratic form (quadrature failure)");
  return std::sqrt(std::max(form.q, 0.0));
}

double sobolev_theta(double x, double y, double k, int panels_per_unit) {
  if (!(x >= 0.0) || !(y >= 0.0)) throw std::domain_error("sobolev_theta: masses must be nonnegative");
  if (!(k > 0.5)) throw std::domain_error("sobolev_theta: requires k > 1/2");
  if (x == 0.0 || y == 0.0) return 0.0;
  const int order = 8;
  Eigen::ArrayXd ref_x, ref_w;
  gauss_legendre(order, 0.0, 1.0, ref_x, ref_w);

  // Composite rule over [lo,hi] of g; panels sized ~1/panels_per_unit.
  const auto composite = [&](double lo, double hi, auto&& g) {
    double acc = 0.0;
    if (hi <= lo) return acc;
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) * panels_per_unit)));
    const double wdt = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
      const double a = lo + p * wdt;
      for (int j = 0; j < order; ++j) acc += wdt * ref_w[j] * g(a + wdt * ref_x[j]);
    }
    return acc;
  };

  const double val = composite(0.0, x, [&](double z) {
    const double fz = 1.0 + std::pow(z, k);
    const double lower = composite(0.0, std::min(z, y), [&](double w) {
      return (1.0 + std::pow(w, k)) * std::exp(w - z);
    });
    const double upper = composite(std::min(z, y), y, [&](double w) {
      return (1.0 + std::pow(w, k)) * std::exp(z - w);
    });
    return fz * (lower + upper);
  });
  return M_PI * val;
}

double measure_norm(const GridMeasure& nu, const NormSelector& sel) {
  switch (sel.kind) {
    case NormKind::Weighted:
      return weighted_norm(nu, sel.k);
    case NormKind::DualM1:
      return dual_norm_m1(nu, sel.k);
    case NormKind::DualSobolev:
      return dual_norm_sobolev(nu, sel.k, sel.quad_order);
  }
  throw std::invalid_argument("measure_norm: unknown norm kind");
}

}  // namespace coag
