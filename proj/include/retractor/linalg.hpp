#ifndef RETRACTOR_LINALG_HPP
#define RETRACTOR_LINALG_HPP

#include <optional>

#include "retractor/vec.hpp"

namespace retractor {

/// Small dense row-major matrix. Everything in this project lives in
/// dimension <= ~10, so plain O(n^3) routines are all we need.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  static Matrix identity(int n);

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
};

Matrix matmul(const Matrix& lhs, const Matrix& rhs);
Matrix transpose(const Matrix& m);
void matvec_into(const Matrix& m, const Vec& x, Vec& out);
Vec matvec(const Matrix& m, const Vec& x);

/// Gaussian elimination with partial pivoting. Returns nullopt when a pivot
/// underflows (singular to working precision).
std::optional<Vec> lu_solve(Matrix m, Vec rhs);

/// Infinity-norm condition estimate ||M||_inf * ||M^-1||_inf computed from
/// the explicit inverse. Returns +inf when singular.
double cond_inf(const Matrix& m);

double norm_inf(const Vec& v);

}  // namespace retractor

#endif  // RETRACTOR_LINALG_HPP
