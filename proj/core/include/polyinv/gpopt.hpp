#pragma once

// Geometric-program builders for the two reparameterization objectives
// (regularizer minimization and parameter-range minimization), application of
// solutions back onto a network, and uniform quantization.

#include <optional>
#include <utility>
#include <vector>

#include "polyinv/gp.hpp"
#include "polyinv/invariance.hpp"
#include "polyinv/polynet.hpp"

namespace polyinv {

enum class RegKind { Frobenius, L1 };

// How the per-layer spans couple to the epigraph variable t:
//   Total: t bounds the sum of all layer spans (single constraint).
//   Worst: t bounds each layer span separately (min-max).
enum class SpanCoupling { Total, Worst };

struct RegGpOptions {
  bool anchors = true;  // product of diagonals = 1 per interface
  std::optional<std::pair<double, double>> bounds;  // [d_min, d_max] on diagonals
};

struct RangeGpOptions {
  double zero_tolerance = 1e-12;  // parameters at or below this magnitude are excluded
  bool anchors = true;
  std::optional<std::pair<double, double>> bounds;
  SpanCoupling coupling = SpanCoupling::Total;
};

// Objective: sum over layers of transformed squared-parameter costs, as a
// posynomial in the interface diagonals; mu weighs bias terms.  Last-layer
// bias cost is diagonal-independent and lands in constant_offset.
// Requires depth >= 2 and all degrees >= 1.
GpProblem build_frobenius_gp(const PolyNetwork& net, double mu, const RegGpOptions& options = {});

// Same structure with 1-norms: |.| coefficients, exponents 1/(alpha*r) and -1.
GpProblem build_l1_gp(const PolyNetwork& net, double mu, const RegGpOptions& options = {});

// Epigraph program: minimize t subject to per-layer span bounds on the
// transformed parameter magnitudes, split by sign.  Span variables are only
// created for the sign sets that are nonempty.
GpProblem build_range_gp(const PolyNetwork& net, const RangeGpOptions& options = {});

// Diagonal-only invariance element read off a solution (identity permutation
// and polarity).  Throws if a diagonal for some interface coordinate is absent.
InvarianceElement element_from_solution(const PolyNetwork& net, const GpSolution& sol);

// element_from_solution + apply: the returned network computes the same map.
PolyNetwork apply_gp_solution(const PolyNetwork& net, const GpSolution& sol);

// Direct summation over stored parameters: Frobenius sums ||w||^2 + mu*b^2
// per term, L1 sums ||w||_1 + mu*|b|.
double measure_regularizer(const PolyNetwork& net, RegKind kind, double mu);

struct LayerSpan {
  double pos = 0.0;  // largest positive parameter
  double neg = 0.0;  // largest magnitude among negative parameters
  double span() const { return pos + neg; }
};

// Per poly layer, the positive/negative extremes over weights and biases,
// ignoring entries at or below zero_tolerance in magnitude.
std::vector<LayerSpan> measure_layer_spans(const PolyNetwork& net, double zero_tolerance = 1e-12);

struct QuantizationReport {
  double max_error = 0.0;  // max |param - quantized| over the whole net
  Vector steps;            // quantization step per poly layer (0 for all-zero scope)
};

// Uniform symmetric quantization to 2^bits levels spanning [-M, M] where M is
// the largest parameter magnitude per layer (per_layer) or over the whole net.
// bits must lie in [2, 16].  All-zero scopes are left unchanged.
std::pair<PolyNetwork, QuantizationReport> quantize_uniform(const PolyNetwork& net, int bits,
                                                            bool per_layer);

}  // namespace polyinv
