#pragma once

#include <vector>

#include "polyinv/common.hpp"

namespace polyinv {

// One signed power term: eps * (w . z + b)^r with integer degree r >= 0 and
// sign slot eps in {+1, -1}.  The sign slot exists so output sign flips stay
// representable for every degree (flipping (w, b) only works for odd r).
struct AffineTerm {
  Vector w;
  double b = 0.0;
  int degree = 1;
  int sign = 1;
};

// [P(z)]_j = sum_k eps_{j,k} (w_{j,k} . z + b_{j,k})^{r_{j,k}}
struct PolyLayer {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<std::vector<AffineTerm>> outputs;  // outputs[j] = term list of coordinate j
};

// [M(z)]_i = (polarity_i * z_i)_+^alpha, elementwise.  polarity defaults to
// all +1; a -1 entry selects the opposite rectification branch.
struct MonomialLayer {
  int dim = 0;
  double alpha = 1.0;
  std::vector<int> polarity;  // entries in {+1, -1}, size == dim
};

// f = P_L . M_{L-1} . ... . M_1 . P_1 with L = poly_layers.size().
struct PolyNetwork {
  std::vector<int> dims;  // d_0 .. d_L
  std::vector<PolyLayer> poly_layers;
  std::vector<MonomialLayer> monomial_layers;  // size L-1

  int depth() const { return static_cast<int>(poly_layers.size()); }
  int input_dim() const { return dims.empty() ? 0 : dims.front(); }
  int output_dim() const { return dims.empty() ? 0 : dims.back(); }
};

// Throws std::invalid_argument naming the offending layer/term on any
// structural violation (dim chain, weight lengths, alpha <= 0, degree < 0,
// sign or polarity outside {+1,-1}, non-finite parameters).
void validate(const PolyNetwork& net);

// Optional capture of intermediate values during evaluate().
struct EvalTrace {
  std::vector<Vector> pre_activation;   // P_l output, l = 1..L
  std::vector<Vector> post_activation;  // M_l output, l = 1..L-1
};

Vector evaluate(const PolyNetwork& net, const Vector& x, EvalTrace* trace = nullptr);

// Convenience builders used across tests and tools.
PolyNetwork make_linear_identity(int dim);  // single layer, one degree-1 unit term per output

}  // namespace polyinv
