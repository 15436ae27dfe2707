#pragma once

// Single-head self-attention and a Pre-LN transformer block at toy scale,
// with the parameter transforms that leave them invariant/equivariant:
// query-key bilinear mixing, value-output mixing, and feature permutation.

#include <cstdint>
#include <vector>

#include "polyinv/linalg.hpp"

namespace polyinv {

struct AttentionParams {
  Matrix w_q, w_k;  // d x d_k
  Matrix w_v;       // d x d_v
  Matrix w_o;       // d_v x d

  int d() const { return w_q.rows; }
  int d_k() const { return w_q.cols; }
  int d_v() const { return w_v.cols; }
  void validate() const;
};

struct AttentionOutput {
  Matrix s;  // n x n raw scores X Wq Wk^T X^T
  Matrix a;  // n x n row-softmax of s / sqrt(d_k)
  Matrix y;  // n x d attention output A (X Wv) Wo
};

// Rows of x are tokens.  Rows of the returned a sum to 1.
AttentionOutput attention_forward(const AttentionParams& p, const Matrix& x);

// W_Q' = W_Q P, W_K' = W_K P^-T for invertible P: scores and weights are
// unchanged because Q' K'^T == Q K^T.
AttentionParams qk_transform(const AttentionParams& p, const Matrix& p_mix);

// W_V' = W_V R, W_O' = R^-1 W_O for invertible R: the product W_V W_O and
// hence the output are unchanged while the factors move.
AttentionParams vo_transform(const AttentionParams& p, const Matrix& r_mix);

struct LayerNormParams {
  Vector gamma, beta;
};

// Row-wise y = gamma .* (x - mean) / sqrt(var + 1e-5) + beta.
Matrix layer_norm(const LayerNormParams& p, const Matrix& x);

enum class FfnActivation { Relu, Tanh };

struct FfnParams {
  Matrix w1;  // h x d
  Matrix w2;  // d x h
  FfnActivation activation = FfnActivation::Relu;
};

struct BlockParams {
  AttentionParams attn;
  LayerNormParams ln1, ln2;
  FfnParams ffn;

  int d() const { return attn.d(); }
  void validate() const;
};

// Pre-LN block: Y = X + Attn(LN1(X)), Z = Y + FFN(LN2(Y)),
// FFN(U) = act(U W1^T) W2^T row-wise.
Matrix block_forward(const BlockParams& bp, const Matrix& x);

// Feature relabeling: perm maps new feature index -> source index.  The
// returned block satisfies block_forward(out, permute_cols(X)) ==
// permute_cols(block_forward(bp, X)).  Requires d_v == d (the value/output
// mixing is conjugated by the permutation).
BlockParams permute_block(const BlockParams& bp, const std::vector<int>& perm);

// Column relabeling x'(:,i) = x(:,perm[i]) used by the equivariance checks.
Matrix permute_cols(const Matrix& x, const std::vector<int>& perm);

AttentionParams make_random_attention(int d, int dk, int dv, std::uint64_t seed);
BlockParams make_random_block(int d, int h, int dk, FfnActivation activation, std::uint64_t seed);

}  // namespace polyinv
