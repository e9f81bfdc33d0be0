#include "coag/kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace coag {

namespace {

// Saturation profile s(x) = x/(1+x) tabulated on a uniform mesh with linear
// interpolation, constant past the last knot. Chords of a concave profile lie
// below it, so the table keeps s <= x and the product form stays dominated by
// coeff*(1+x+y); knot monotonicity keeps the kernel nondecreasing.
constexpr int kSatKnots = 257;
constexpr double kSatStep = 0.25;

double saturating_profile(double x) {
  static const std::array<double, kSatKnots> table = [] {
    std::array<double, kSatKnots> t{};
    for (int i = 0; i < kSatKnots; ++i) {
      const double xi = kSatStep * i;
      t[i] = xi / (1.0 + xi);
    }
    return t;
  }();
  if (x <= 0.0) return 0.0;
  const double pos = x / kSatStep;
  if (pos >= kSatKnots - 1) return table[kSatKnots - 1];
  const int i = static_cast<int>(pos);
  const double f = pos - i;
  return table[i] + f * (table[i + 1] - table[i]);
}

double bare_eval(const KernelSpec& spec, double x, double y) {
  switch (spec.family) {
    case KernelFamily::Constant:
      return spec.coeff;
    case KernelFamily::Additive:
      return spec.coeff * (x + y);
    case KernelFamily::ProductSqrt:
      // Grouped so the value is bitwise symmetric in (x, y).
      return spec.coeff * ((1.0 + std::sqrt(x)) * (1.0 + std::sqrt(y)));
    case KernelFamily::Smooth:
      switch (spec.shape) {
        case SmoothShape::Constant:
          return spec.coeff;
        case SmoothShape::Additive:
          return spec.coeff * (x + y);
        case SmoothShape::Saturating:
          return spec.coeff * ((1.0 + saturating_profile(x)) * (1.0 + saturating_profile(y)));
      }
  }
  throw std::logic_error("kernel_eval: unknown family");
}

}  // namespace

void validate(const KernelSpec& spec) {
  if (!(spec.coeff > 0.0)) throw std::domain_error("kernel: coeff must be positive");
  if (spec.cutoff < 0.0) throw std::domain_error("kernel: cutoff must be nonnegative");
}

double kernel_eval(const KernelSpec& spec, double x, double y) {
  validate(spec);
  if (x < 0.0 || y < 0.0) throw std::domain_error("kernel: negative mass");
  const double k = bare_eval(spec, x, y);
  if (spec.cutoff > 0.0 && x + y > spec.cutoff)
    return std::min(k, spec.coeff * spec.cutoff);
  return k;
}

double majorant_coeff(const KernelSpec& spec) {
  validate(spec);
  if (spec.family == KernelFamily::ProductSqrt) return 1.5 * spec.coeff;
  return spec.coeff;
}

double kernel_majorant(const KernelSpec& spec, double x, double y) {
  if (x < 0.0 || y < 0.0) throw std::domain_error("kernel: negative mass");
  return majorant_coeff(spec) * (1.0 + x + y);
}

KernelSpec with_cutoff(KernelSpec spec, double level) {
  if (!(level > 0.0)) throw std::domain_error("with_cutoff: level must be positive");
  spec.cutoff = level;
  validate(spec);
  return spec;
}

std::string kernel_name(const KernelSpec& spec) {
  validate(spec);
  std::string name;
  switch (spec.family) {
    case KernelFamily::Constant: name = "constant"; break;
    case KernelFamily::Additive: name = "additive"; break;
    case KernelFamily::ProductSqrt: name = "product_sqrt"; break;
    case KernelFamily::Smooth:
      switch (spec.shape) {
        case SmoothShape::Constant: name = "smooth_constant"; break;
        case SmoothShape::Additive: name = "smooth_additive"; break;
        case SmoothShape::Saturating: name = "smooth_saturating"; break;
      }
      break;
  }
  if (spec.cutoff > 0.0) name += "+cutoff(" + std::to_string(spec.cutoff) + ")";
  return name;
}

Eigen::MatrixXd kernel_table(const KernelSpec& spec, const Grid& grid) {
  validate(spec);
  if (grid.nbins < 1 || !(grid.delta > 0.0))
    throw std::invalid_argument("kernel_table: bad grid");
  Eigen::MatrixXd table(grid.nbins, grid.nbins);
  for (int j = 0; j < grid.nbins; ++j) {
    const double y = grid.mass(j + 1);
    for (int i = 0; i <= j; ++i) {
      const double v = kernel_eval(spec, grid.mass(i + 1), y);
      table(i, j) = v;
      table(j, i) = v;
    }
  }
  return table;
}

}  // namespace coag
