#include "polyinv/attention.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "polyinv/common.hpp"

namespace polyinv {

namespace {
constexpr double kLnEpsilon = 1e-5;  // keeps constant rows finite
}

void AttentionParams::validate() const {
  if (w_q.rows < 1 || w_q.cols < 1) fail_invalid("attention: empty W_Q");
  if (w_k.rows != w_q.rows || w_k.cols != w_q.cols)
    fail_invalid("attention: W_K is ", w_k.rows, "x", w_k.cols, ", expected ", w_q.rows, "x",
                 w_q.cols);
  if (w_v.rows != w_q.rows) fail_invalid("attention: W_V rows ", w_v.rows, " != d ", w_q.rows);
  if (w_o.rows != w_v.cols || w_o.cols != w_q.rows)
    fail_invalid("attention: W_O is ", w_o.rows, "x", w_o.cols, ", expected ", w_v.cols, "x",
                 w_q.rows);
  for (const Matrix* m : {&w_q, &w_k, &w_v, &w_o})
    for (double v : m->a)
      if (!is_finite(v)) fail_invalid("attention: non-finite parameter");
}

AttentionOutput attention_forward(const AttentionParams& p, const Matrix& x) {
  p.validate();
  if (x.cols != p.d()) fail_invalid("attention_forward: x has ", x.cols, " features, expected ", p.d());
  const int n = x.rows;
  AttentionOutput out;
  const Matrix q = matmul(x, p.w_q);
  const Matrix k = matmul(x, p.w_k);
  out.s = matmul(q, transpose(k));

  const double scale = 1.0 / std::sqrt(static_cast<double>(p.d_k()));
  out.a = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    double row_max = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) row_max = std::max(row_max, out.s(i, j) * scale);
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      out.a(i, j) = std::exp(out.s(i, j) * scale - row_max);
      denom += out.a(i, j);
    }
    for (int j = 0; j < n; ++j) out.a(i, j) /= denom;
  }
  out.y = matmul(matmul(out.a, matmul(x, p.w_v)), p.w_o);
  return out;
}

AttentionParams qk_transform(const AttentionParams& p, const Matrix& p_mix) {
  p.validate();
  if (p_mix.rows != p.d_k() || p_mix.cols != p.d_k())
    fail_invalid("qk_transform: mix must be ", p.d_k(), "x", p.d_k());
  AttentionParams out = p;
  out.w_q = matmul(p.w_q, p_mix);
  out.w_k = matmul(p.w_k, transpose(invert(p_mix)));
  return out;
}

AttentionParams vo_transform(const AttentionParams& p, const Matrix& r_mix) {
  p.validate();
  if (r_mix.rows != p.d_v() || r_mix.cols != p.d_v())
    fail_invalid("vo_transform: mix must be ", p.d_v(), "x", p.d_v());
  AttentionParams out = p;
  out.w_v = matmul(p.w_v, r_mix);
  out.w_o = matmul(invert(r_mix), p.w_o);
  return out;
}

Matrix layer_norm(const LayerNormParams& p, const Matrix& x) {
  const int d = x.cols;
  if (static_cast<int>(p.gamma.size()) != d || static_cast<int>(p.beta.size()) != d)
    fail_invalid("layer_norm: gamma/beta size must be ", d);
  if (d < 2) fail_invalid("layer_norm: needs at least 2 features");
  Matrix out(x.rows, d);
  for (int i = 0; i < x.rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += x(i, j);
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = x(i, j) - mean;
      var += c * c;
    }
    var /= d;
    const double inv_sigma = 1.0 / std::sqrt(var + kLnEpsilon);
    for (int j = 0; j < d; ++j) out(i, j) = p.gamma[j] * (x(i, j) - mean) * inv_sigma + p.beta[j];
  }
  return out;
}

void BlockParams::validate() const {
  attn.validate();
  const int dim = attn.d();
  if (static_cast<int>(ln1.gamma.size()) != dim || static_cast<int>(ln1.beta.size()) != dim ||
      static_cast<int>(ln2.gamma.size()) != dim || static_cast<int>(ln2.beta.size()) != dim)
    fail_invalid("block: layer-norm parameter sizes must equal d = ", dim);
  if (ffn.w1.cols != dim || ffn.w2.rows != dim || ffn.w2.cols != ffn.w1.rows)
    fail_invalid("block: FFN shapes must be h x d and d x h with d = ", dim);
}

namespace {

Matrix ffn_forward(const FfnParams& f, const Matrix& u) {
  Matrix h = matmul(u, transpose(f.w1));
  for (double& v : h.a)
    v = f.activation == FfnActivation::Relu ? (v > 0.0 ? v : 0.0) : std::tanh(v);
  return matmul(h, transpose(f.w2));
}

}  // namespace

Matrix block_forward(const BlockParams& bp, const Matrix& x) {
  bp.validate();
  if (x.cols != bp.d()) fail_invalid("block_forward: x has ", x.cols, " features, expected ", bp.d());
  Matrix y = x;
  const Matrix sa = attention_forward(bp.attn, layer_norm(bp.ln1, x)).y;
  for (size_t i = 0; i < y.a.size(); ++i) y.a[i] += sa.a[i];
  const Matrix ff = ffn_forward(bp.ffn, layer_norm(bp.ln2, y));
  Matrix z = y;
  for (size_t i = 0; i < z.a.size(); ++i) z.a[i] += ff.a[i];
  return z;
}

Matrix permute_cols(const Matrix& x, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != x.cols || !is_permutation(perm))
    fail_invalid("permute_cols: not a permutation of ", x.cols, " columns");
  Matrix out(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) out(i, j) = x(i, perm[j]);
  return out;
}

BlockParams permute_block(const BlockParams& bp, const std::vector<int>& perm) {
  bp.validate();
  const int d = bp.d();
  if (static_cast<int>(perm.size()) != d || !is_permutation(perm))
    fail_invalid("permute_block: not a permutation of ", d, " features");
  if (bp.attn.d_v() != d)
    fail_invalid("permute_block: requires d_v == d (value/output mixing is conjugated), got d_v = ",
                 bp.attn.d_v());

  auto rows_by = [&](const Matrix& w) {  // out(i,:) = w(perm[i],:)
    Matrix out(w.rows, w.cols);
    for (int i = 0; i < w.rows; ++i)
      for (int j = 0; j < w.cols; ++j) out(i, j) = w(perm[i], j);
    return out;
  };
  auto conjugate = [&](const Matrix& w) {  // out(i,j) = w(perm[i],perm[j])
    Matrix out(w.rows, w.cols);
    for (int i = 0; i < w.rows; ++i)
      for (int j = 0; j < w.cols; ++j) out(i, j) = w(perm[i], perm[j]);
    return out;
  };
  auto vec_by = [&](const Vector& v) {
    Vector out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[perm[i]];
    return out;
  };

  BlockParams out = bp;
  out.attn.w_q = rows_by(bp.attn.w_q);
  out.attn.w_k = rows_by(bp.attn.w_k);
  out.attn.w_v = conjugate(bp.attn.w_v);
  out.attn.w_o = conjugate(bp.attn.w_o);
  out.ln1.gamma = vec_by(bp.ln1.gamma);
  out.ln1.beta = vec_by(bp.ln1.beta);
  out.ln2.gamma = vec_by(bp.ln2.gamma);
  out.ln2.beta = vec_by(bp.ln2.beta);
  out.ffn.w1 = permute_cols(bp.ffn.w1, perm);  // W1 P
  out.ffn.w2 = rows_by(bp.ffn.w2);             // P^-1 W2
  return out;
}

AttentionParams make_random_attention(int d, int dk, int dv, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AttentionParams p;
  p.w_q = random_gaussian(d, dk, rng);
  p.w_k = random_gaussian(d, dk, rng);
  p.w_v = random_gaussian(d, dv, rng);
  p.w_o = random_gaussian(dv, d, rng);
  return p;
}

BlockParams make_random_block(int d, int h, int dk, FfnActivation activation, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  BlockParams bp;
  bp.attn.w_q = random_gaussian(d, dk, rng);
  bp.attn.w_k = random_gaussian(d, dk, rng);
  bp.attn.w_v = random_gaussian(d, d, rng);
  bp.attn.w_o = random_gaussian(d, d, rng);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  bp.ln1.gamma.resize(d);
  bp.ln1.beta.resize(d);
  bp.ln2.gamma.resize(d);
  bp.ln2.beta.resize(d);
  for (int j = 0; j < d; ++j) {
    bp.ln1.gamma[j] = u(rng);
    bp.ln1.beta[j] = u(rng) - 1.0;
    bp.ln2.gamma[j] = u(rng);
    bp.ln2.beta[j] = u(rng) - 1.0;
  }
  bp.ffn.w1 = random_gaussian(h, d, rng);
  bp.ffn.w2 = random_gaussian(d, h, rng);
  bp.ffn.activation = activation;
  return bp;
}

}  // namespace polyinv
