#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "polyinv/linalg.hpp"
#include "polyinv/polynet.hpp"

namespace polyinv {

// Transform at the interface between P_l and M_l / P_{l+1}.  The inserted map
// after P_l is, coordinatewise,
//   (T z)_i = polarity[src] * diag[src]^(1/alpha_l) * z[src],  src = perm[i],
// i.e. diag and polarity are aligned with the SOURCE coordinate they act on
// and the permutation reorders afterwards (matrix form T = Pi * (S D)^(1/alpha)).
struct InterfaceTransform {
  std::vector<int> perm;      // new index -> source index
  std::vector<double> diag;   // positive scale at the source index
  std::vector<int> polarity;  // +-1 sign at the source index

  static InterfaceTransform identity(int n);
  int size() const { return static_cast<int>(perm.size()); }
  void validate() const;
};

// Invertible input change x -> S0 x.  Keeps the numerically computed inverse
// (partial-pivot LU); construction rejects condition numbers above 1e8 and
// inverses whose residual ||S0*A0 - I||_max exceeds 1e-8.
struct InputTransform {
  Matrix S0;
  Matrix A0;

  static InputTransform identity(int n);
  static InputTransform from_matrix(const Matrix& s0);
  int dim() const { return S0.rows; }
  bool is_identity() const;
};

struct InvarianceElement {
  InputTransform input;
  std::vector<InterfaceTransform> interfaces;

  static InvarianceElement identity(const std::vector<int>& dims);
};

// Reparameterizes the network.  The result satisfies
//   evaluate(apply(net, g), S0 x) == evaluate(net, x),
// so elements with S0 == I preserve the realized map pointwise.  Degrees are
// only reordered; each absorbed output scale s = diag^(1/alpha) enters a term
// as s^(1/degree) on (w, b); sign flips live in the term sign slot and the
// monomial polarity mask; the next layer's incoming weights compensate the
// (permutation, diag) part.
PolyNetwork apply(const PolyNetwork& net, const InvarianceElement& g);

// Group operations under left-to-right action:
//   apply(net, compose(g1, g2)) == apply(apply(net, g1), g2).
InvarianceElement compose(const InvarianceElement& g1, const InvarianceElement& g2);
InvarianceElement inverse(const InvarianceElement& g);

struct Box {
  double lo = -2.0;
  double hi = 2.0;
};

struct EquivalenceReport {
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  int n_samples = 0;
  bool pass = false;
};

// Samples uniform inputs in the box and compares outputs coordinatewise.
// Relative error uses denominator max(|a|,|b|,1).
EquivalenceReport verify_equivalence(const PolyNetwork& net_a, const PolyNetwork& net_b,
                                     int n_samples, const Box& box, double tol,
                                     std::uint64_t seed = 0x5eedULL);

// Same, but evaluates net_b on S0*x (the check for elements that also change
// the input parameterization).
EquivalenceReport verify_equivalence_mapped(const PolyNetwork& net_a, const PolyNetwork& net_b,
                                            const Matrix& s0, int n_samples, const Box& box,
                                            double tol, std::uint64_t seed = 0x5eedULL);

struct RandomElementOptions {
  bool allow_polarity = false;
  bool allow_permutation = true;
  std::pair<double, double> diag_range{0.5, 2.0};
  bool general_linear_input = false;  // if false, S0 == I
};

// Deterministic in (dims, alphas, seed, options).  Random S0 draws are
// Gaussian, resampled until cond_inf <= 1e3.
InvarianceElement random_element(const std::vector<int>& dims, const std::vector<double>& alphas,
                                 std::uint64_t seed, const RandomElementOptions& options = {});

}  // namespace polyinv
