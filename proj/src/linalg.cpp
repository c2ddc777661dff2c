#include "retractor/linalg.hpp"

#include <cmath>
#include <limits>

#include "retractor/errors.hpp"

namespace retractor {

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix matmul(const Matrix& lhs, const Matrix& rhs) {
  if (lhs.cols != rhs.rows) throw ContractViolation("matmul: shape mismatch");
  Matrix out(lhs.rows, rhs.cols);
  for (int i = 0; i < lhs.rows; ++i) {
    for (int k = 0; k < lhs.cols; ++k) {
      const double v = lhs(i, k);
      if (v == 0.0) continue;
      for (int j = 0; j < rhs.cols; ++j) out(i, j) += v * rhs(k, j);
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
  return out;
}

void matvec_into(const Matrix& m, const Vec& x, Vec& out) {
  if (static_cast<int>(x.size()) != m.cols)
    throw ContractViolation("matvec: shape mismatch");
  out.assign(static_cast<std::size_t>(m.rows), 0.0);
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += m(i, j) * x[j];
    out[i] = s;
  }
}

Vec matvec(const Matrix& m, const Vec& x) {
  Vec out;
  matvec_into(m, x, out);
  return out;
}

std::optional<Vec> lu_solve(Matrix m, Vec rhs) {
  if (m.rows != m.cols || static_cast<int>(rhs.size()) != m.rows)
    throw ContractViolation("lu_solve: shape mismatch");
  const int n = m.rows;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    double best = std::fabs(m(col, col));
    for (int r = col + 1; r < n; ++r) {
      const double v = std::fabs(m(r, col));
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best < 1e-300) return std::nullopt;
    if (pivot != col) {
      for (int j = 0; j < n; ++j) std::swap(m(pivot, j), m(col, j));
      std::swap(rhs[pivot], rhs[col]);
    }
    const double inv = 1.0 / m(col, col);
    for (int r = col + 1; r < n; ++r) {
      const double f = m(r, col) * inv;
      if (f == 0.0) continue;
      m(r, col) = 0.0;
      for (int j = col + 1; j < n; ++j) m(r, j) -= f * m(col, j);
      rhs[r] -= f * rhs[col];
    }
  }
  Vec x(static_cast<std::size_t>(n), 0.0);
  for (int i = n - 1; i >= 0; --i) {
    double s = rhs[i];
    for (int j = i + 1; j < n; ++j) s -= m(i, j) * x[j];
    x[i] = s / m(i, i);
  }
  return x;
}

double norm_inf(const Vec& v) {
  double m = 0.0;
  for (double t : v) m = std::max(m, std::fabs(t));
  return m;
}

double cond_inf(const Matrix& m) {
  if (m.rows != m.cols) throw ContractViolation("cond_inf: square matrix required");
  const int n = m.rows;
  double norm_m = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += std::fabs(m(i, j));
    norm_m = std::max(norm_m, row);
  }
  // Inverse column by column; any singular solve means cond = inf.
  Matrix inv(n, n);
  for (int j = 0; j < n; ++j) {
    Vec e(static_cast<std::size_t>(n), 0.0);
    e[j] = 1.0;
    auto col = lu_solve(m, e);
    if (!col) return std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) inv(i, j) = (*col)[i];
  }
  double norm_inv = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += std::fabs(inv(i, j));
    norm_inv = std::max(norm_inv, row);
  }
  return norm_m * norm_inv;
}

}  // namespace retractor
