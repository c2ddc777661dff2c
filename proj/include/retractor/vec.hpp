#ifndef RETRACTOR_VEC_HPP
#define RETRACTOR_VEC_HPP

#include <cstddef>
#include <vector>

namespace retractor {

using Vec = std::vector<double>;

inline void sub_into(const Vec& a, const Vec& b, Vec& out) {
  out.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
}

inline Vec sub(const Vec& a, const Vec& b) {
  Vec r;
  sub_into(a, b, r);
  return r;
}

inline Vec add(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vec scaled(const Vec& a, double s) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = s * a[i];
  return r;
}

/// out = a*x + b*y
inline void axpby_into(double a, const Vec& x, double b, const Vec& y,
                       Vec& out) {
  out.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
}

/// (1-t)*a + t*b
inline Vec lerp(const Vec& a, const Vec& b, double t) {
  Vec r;
  axpby_into(1.0 - t, a, t, b, r);
  return r;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace retractor

#endif  // RETRACTOR_VEC_HPP
