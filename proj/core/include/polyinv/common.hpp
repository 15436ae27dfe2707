#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace polyinv {

using Vector = std::vector<double>;

namespace detail {

inline void msg_append(std::ostringstream&) {}

template <typename T, typename... Rest>
void msg_append(std::ostringstream& os, const T& head, const Rest&... rest) {
  os << head;
  msg_append(os, rest...);
}

}  // namespace detail

template <typename... Parts>
std::string concat(const Parts&... parts) {
  std::ostringstream os;
  detail::msg_append(os, parts...);
  return os.str();
}

// Contract violations (bad dimensions, malformed structures, invalid options).
template <typename... Parts>
[[noreturn]] void fail_invalid(const Parts&... parts) {
  throw std::invalid_argument(concat(parts...));
}

// Numeric failures (singular matrices, infeasible programs, divergence).
template <typename... Parts>
[[noreturn]] void fail_numeric(const Parts&... parts) {
  throw std::runtime_error(concat(parts...));
}

// x^n by repeated squaring; n >= 0.
inline double int_pow(double x, int n) {
  double acc = 1.0;
  double base = x;
  while (n > 0) {
    if (n & 1) acc *= base;
    base *= base;
    n >>= 1;
  }
  return acc;
}

// (t)_+^alpha: exact zero on the non-positive branch, exp(alpha*log t) otherwise.
inline double rectified_pow(double t, double alpha) {
  if (t <= 0.0) return 0.0;
  return std::pow(t, alpha);
}

// |a-b| relative to max(|a|, |b|, 1): pure relative error for large values,
// absolute error near zero.
inline double rel_diff(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1.0});
  return std::fabs(a - b) / denom;
}

inline bool is_finite(double x) { return std::isfinite(x); }

}  // namespace polyinv
