#pragma once

#include <string>

#include <Eigen/Dense>

#include "coag/measure.hpp"

namespace coag {

// Symmetric coagulation rate families, all dominated by C'(1+x+y):
//   Constant    K = c
//   Additive    K = C (x + y)
//   ProductSqrt K = C (1+sqrt(x))(1+sqrt(y))
//   Smooth      nondecreasing in each argument with bounded derivatives;
//               built-in shapes: constant, additive, and a tabulated
//               saturating product C (1+s(x))(1+s(y)), s = x/(1+x) read from
//               a lookup table.
enum class KernelFamily { Constant, Additive, ProductSqrt, Smooth };
enum class SmoothShape { Constant, Additive, Saturating };

struct KernelSpec {
  KernelFamily family = KernelFamily::Constant;
  double coeff = 1.0;
  // cutoff level n > 0 truncates: K_n = K for x+y <= n, min(K, coeff*n) past
  // it, so K_n <= coeff*max(n,1) everywhere. 0 means no cutoff.
  double cutoff = 0.0;
  SmoothShape shape = SmoothShape::Saturating;
};

// Throws std::domain_error on nonpositive coeff or negative cutoff.
void validate(const KernelSpec& spec);

// K(x,y) at nonnegative masses (throws std::domain_error on negative mass).
double kernel_eval(const KernelSpec& spec, double x, double y);

// Smallest stock constant C' with K <= C'(1+x+y) for the family
// (ProductSqrt needs 3C/2, tight at x = y = 1/4; the others use C).
double majorant_coeff(const KernelSpec& spec);

double kernel_majorant(const KernelSpec& spec, double x, double y);

KernelSpec with_cutoff(KernelSpec spec, double level);

std::string kernel_name(const KernelSpec& spec);

// K sampled at all atom pairs of the grid; entry (i,j) is K((i+1)d, (j+1)d).
Eigen::MatrixXd kernel_table(const KernelSpec& spec, const Grid& grid);

}  // namespace coag
