#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "polyinv/common.hpp"

namespace polyinv {

// Dense row-major matrix. Everything in this project is small (dims <= a few
// dozen), so the implementation favors clarity over blocking.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

  static Matrix identity(int n);
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, const Vector& x);
Matrix transpose(const Matrix& a);
Matrix operator-(const Matrix& a, const Matrix& b);

double norm_inf(const Matrix& a);        // max absolute row sum
double max_abs(const Matrix& a);         // entrywise max |a_ij|
double max_abs_diff(const Matrix& a, const Matrix& b);
double max_abs_diff(const Vector& a, const Vector& b);

// LU factorization with partial pivoting, kept for solves and inversion.
struct LuFactor {
  Matrix lu;
  std::vector<int> piv;
  int sign = 1;
};

// Throws on singular input.
LuFactor lu_factor(const Matrix& a);
Vector lu_solve(const LuFactor& f, const Vector& b);
Matrix lu_inverse(const LuFactor& f);
Matrix invert(const Matrix& a);

// Infinity-norm condition estimate ||A||_inf * ||A^-1||_inf.
double cond_inf(const Matrix& a);

// In-place lower Cholesky of a symmetric positive definite matrix; returns
// false (leaving the input partially overwritten) if a pivot is not positive.
bool cholesky_factor(Matrix& a);
Vector cholesky_solve(const Matrix& chol, const Vector& b);

Matrix random_gaussian(int rows, int cols, std::mt19937_64& rng);

// Q factor of a Gaussian matrix via Householder QR, with the sign convention
// diag(R) > 0 so the distribution is Haar and the result deterministic in rng.
Matrix random_orthogonal(int n, std::mt19937_64& rng);

// Permutation composed with a positive diagonal, acting as
// (T z)_i = diag_i * z_{src[i]}  (i.e. row i of T picks source coordinate
// src[i]).  Used for hidden-layer mixing in the MLP protocol.
struct PermDiag {
  std::vector<int> src;      // new index -> source index
  std::vector<double> diag;  // scale at the new index

  static PermDiag identity(int n);
  int size() const { return static_cast<int>(src.size()); }
  void validate() const;

  Vector apply(const Vector& z) const;       // T z
  Vector apply_inverse(const Vector& u) const;  // T^-1 u
  PermDiag inverse() const;
  Matrix as_matrix() const;
};

// T * W (rows of W reordered/scaled) and W * T^-1 (columns compensated).
Matrix left_apply(const PermDiag& t, const Matrix& w);
Matrix right_apply_inverse(const Matrix& w, const PermDiag& t);
// T^-1 * W and W * T (the recovery direction).
Matrix left_apply_inverse(const PermDiag& t, const Matrix& w);
Matrix right_apply(const Matrix& w, const PermDiag& t);

bool is_permutation(const std::vector<int>& perm);
std::vector<int> inverse_permutation(const std::vector<int>& perm);

}  // namespace polyinv
