#include "polyinv/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace polyinv {

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    fail_invalid("matmul: inner dimensions differ (", a.cols, " vs ", b.rows, ")");
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols != static_cast<int>(x.size()))
    fail_invalid("matvec: expected vector of size ", a.cols, ", got ", x.size());
  Vector y(a.rows, 0.0);
  for (int i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols; ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) fail_invalid("matrix subtraction: shape mismatch");
  Matrix c = a;
  for (size_t i = 0; i < c.a.size(); ++i) c.a[i] -= b.a[i];
  return c;
}

double norm_inf(const Matrix& a) {
  double best = 0.0;
  for (int i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols; ++j) s += std::fabs(a(i, j));
    best = std::max(best, s);
  }
  return best;
}

double max_abs(const Matrix& a) {
  double best = 0.0;
  for (double v : a.a) best = std::max(best, std::fabs(v));
  return best;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) fail_invalid("max_abs_diff: shape mismatch");
  double best = 0.0;
  for (size_t i = 0; i < a.a.size(); ++i) best = std::max(best, std::fabs(a.a[i] - b.a[i]));
  return best;
}

double max_abs_diff(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) fail_invalid("max_abs_diff: length mismatch");
  double best = 0.0;
  for (size_t i = 0; i < a.size(); ++i) best = std::max(best, std::fabs(a[i] - b[i]));
  return best;
}

LuFactor lu_factor(const Matrix& a) {
  if (a.rows != a.cols) fail_invalid("lu_factor: matrix must be square, got ", a.rows, "x", a.cols);
  const int n = a.rows;
  LuFactor f;
  f.lu = a;
  f.piv.resize(n);
  for (int i = 0; i < n; ++i) f.piv[i] = i;
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::fabs(f.lu(k, k));
    for (int i = k + 1; i < n; ++i) {
      const double v = std::fabs(f.lu(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best == 0.0) fail_numeric("lu_factor: singular matrix (pivot column ", k, ")");
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(f.lu(k, j), f.lu(p, j));
      std::swap(f.piv[k], f.piv[p]);
      f.sign = -f.sign;
    }
    const double pivot = f.lu(k, k);
    for (int i = k + 1; i < n; ++i) {
      const double m = f.lu(i, k) / pivot;
      f.lu(i, k) = m;
      if (m == 0.0) continue;
      for (int j = k + 1; j < n; ++j) f.lu(i, j) -= m * f.lu(k, j);
    }
  }
  return f;
}

Vector lu_solve(const LuFactor& f, const Vector& b) {
  const int n = f.lu.rows;
  if (static_cast<int>(b.size()) != n) fail_invalid("lu_solve: rhs size mismatch");
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    double s = b[f.piv[i]];
    for (int j = 0; j < i; ++j) s -= f.lu(i, j) * y[j];
    y[i] = s;
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int j = i + 1; j < n; ++j) s -= f.lu(i, j) * y[j];
    y[i] = s / f.lu(i, i);
  }
  return y;
}

Matrix lu_inverse(const LuFactor& f) {
  const int n = f.lu.rows;
  Matrix inv(n, n);
  Vector e(n, 0.0);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    Vector col = lu_solve(f, e);
    e[j] = 0.0;
    for (int i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

Matrix invert(const Matrix& a) { return lu_inverse(lu_factor(a)); }

double cond_inf(const Matrix& a) {
  Matrix inv = invert(a);
  return norm_inf(a) * norm_inf(inv);
}

bool cholesky_factor(Matrix& a) {
  if (a.rows != a.cols) fail_invalid("cholesky_factor: matrix must be square");
  const int n = a.rows;
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double l = std::sqrt(d);
    a(j, j) = l;
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / l;
    }
  }
  // zero the strict upper triangle so the factor is unambiguous
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) a(i, j) = 0.0;
  return true;
}

Vector cholesky_solve(const Matrix& chol, const Vector& b) {
  const int n = chol.rows;
  if (static_cast<int>(b.size()) != n) fail_invalid("cholesky_solve: rhs size mismatch");
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= chol(i, k) * y[k];
    y[i] = s / chol(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= chol(k, i) * y[k];
    y[i] = s / chol(i, i);
  }
  return y;
}

Matrix random_gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.a) v = dist(rng);
  return m;
}

Matrix random_orthogonal(int n, std::mt19937_64& rng) {
  Matrix a = random_gaussian(n, n, rng);
  // Householder QR; q accumulates the reflections.
  Matrix q = Matrix::identity(n);
  for (int k = 0; k < n; ++k) {
    double norm = 0.0;
    for (int i = k; i < n; ++i) norm += a(i, k) * a(i, k);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double alpha = a(k, k) >= 0.0 ? -norm : norm;
    Vector v(n, 0.0);
    v[k] = a(k, k) - alpha;
    for (int i = k + 1; i < n; ++i) v[i] = a(i, k);
    double vtv = 0.0;
    for (int i = k; i < n; ++i) vtv += v[i] * v[i];
    if (vtv == 0.0) continue;
    const double beta = 2.0 / vtv;
    for (int j = k; j < n; ++j) {
      double s = 0.0;
      for (int i = k; i < n; ++i) s += v[i] * a(i, j);
      s *= beta;
      for (int i = k; i < n; ++i) a(i, j) -= s * v[i];
    }
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = k; i < n; ++i) s += v[i] * q(i, j);
      s *= beta;
      for (int i = k; i < n; ++i) q(i, j) -= s * v[i];
    }
  }
  // Rows of q now hold Q^T from the reflection product; fix signs so the
  // implied R has positive diagonal, then return Q.
  Matrix out(n, n);
  for (int i = 0; i < n; ++i) {
    const double s = a(i, i) < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) out(j, i) = s * q(i, j);
  }
  return out;
}

PermDiag PermDiag::identity(int n) {
  PermDiag t;
  t.src.resize(n);
  t.diag.assign(n, 1.0);
  for (int i = 0; i < n; ++i) t.src[i] = i;
  return t;
}

void PermDiag::validate() const {
  if (src.size() != diag.size()) fail_invalid("PermDiag: perm/diag length mismatch");
  if (!is_permutation(src)) fail_invalid("PermDiag: src is not a permutation");
  for (double d : diag)
    if (!(d > 0.0) || !is_finite(d)) fail_invalid("PermDiag: diagonal entries must be positive and finite");
}

Vector PermDiag::apply(const Vector& z) const {
  if (z.size() != src.size()) fail_invalid("PermDiag::apply: size mismatch");
  Vector u(z.size());
  for (size_t i = 0; i < z.size(); ++i) u[i] = diag[i] * z[src[i]];
  return u;
}

Vector PermDiag::apply_inverse(const Vector& u) const {
  if (u.size() != src.size()) fail_invalid("PermDiag::apply_inverse: size mismatch");
  Vector z(u.size());
  for (size_t i = 0; i < u.size(); ++i) z[src[i]] = u[i] / diag[i];
  return z;
}

PermDiag PermDiag::inverse() const {
  const int n = size();
  PermDiag inv;
  inv.src = inverse_permutation(src);
  inv.diag.resize(n);
  for (int i = 0; i < n; ++i) inv.diag[src[i]] = 1.0 / diag[i];
  // (T^-1 u)_j = u_{src^-1[j]} / diag_{src^-1[j]}; rewritten in apply() form
  // this is src' = src^-1 and diag'_j = 1/diag_{src'^-1...}; the assignment
  // above places 1/diag_i at position src[i] = the coordinate it restores.
  return inv;
}

Matrix PermDiag::as_matrix() const {
  const int n = size();
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, src[i]) = diag[i];
  return m;
}

Matrix left_apply(const PermDiag& t, const Matrix& w) {
  if (t.size() != w.rows) fail_invalid("left_apply: PermDiag size ", t.size(), " vs rows ", w.rows);
  Matrix out(w.rows, w.cols);
  for (int i = 0; i < w.rows; ++i)
    for (int j = 0; j < w.cols; ++j) out(i, j) = t.diag[i] * w(t.src[i], j);
  return out;
}

Matrix right_apply_inverse(const Matrix& w, const PermDiag& t) {
  if (t.size() != w.cols) fail_invalid("right_apply_inverse: PermDiag size ", t.size(), " vs cols ", w.cols);
  Matrix out(w.rows, w.cols);
  for (int i = 0; i < w.rows; ++i)
    for (int j = 0; j < w.cols; ++j) out(i, j) = w(i, t.src[j]) / t.diag[j];
  return out;
}

Matrix left_apply_inverse(const PermDiag& t, const Matrix& w) {
  if (t.size() != w.rows) fail_invalid("left_apply_inverse: PermDiag size ", t.size(), " vs rows ", w.rows);
  Matrix out(w.rows, w.cols);
  for (int i = 0; i < w.rows; ++i)
    for (int j = 0; j < w.cols; ++j) out(t.src[i], j) = w(i, j) / t.diag[i];
  return out;
}

Matrix right_apply(const Matrix& w, const PermDiag& t) {
  if (t.size() != w.cols) fail_invalid("right_apply: PermDiag size ", t.size(), " vs cols ", w.cols);
  Matrix out(w.rows, w.cols);
  for (int i = 0; i < w.rows; ++i)
    for (int j = 0; j < w.cols; ++j) out(i, t.src[j]) = w(i, j) * t.diag[j];
  return out;
}

bool is_permutation(const std::vector<int>& perm) {
  const int n = static_cast<int>(perm.size());
  std::vector<char> seen(n, 0);
  for (int v : perm) {
    if (v < 0 || v >= n || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

std::vector<int> inverse_permutation(const std::vector<int>& perm) {
  std::vector<int> inv(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int>(i);
  return inv;
}

}  // namespace polyinv
