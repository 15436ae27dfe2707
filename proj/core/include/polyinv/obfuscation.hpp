#pragma once

// Two obfuscation protocols:
//  - session-based private inference over the polynomial family (the model
//    owner reparameterizes, the input owner masks inputs with an invertible R
//    absorbed into the first layer);
//  - obfuscated remote MLP training behind reversible permutation/diagonal
//    masks, with exact parameter recovery afterwards.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "polyinv/invariance.hpp"
#include "polyinv/linalg.hpp"
#include "polyinv/mlp.hpp"
#include "polyinv/polynet.hpp"

namespace polyinv {

// ---------- private inference over PolyNetwork ----------

struct SessionOptions {
  bool allow_polarity = true;
  bool orthogonal_input = true;  // R orthogonal (norm-preserving); else general Gaussian
  std::pair<double, double> diag_range{0.5, 2.0};
};

struct InferenceSession {
  InvarianceElement bob_element;    // hidden-interface transforms, identity input
  InvarianceElement alice_element;  // identity interfaces, input transform R
  PolyNetwork published_bob;        // the model owner's session parameters
  PolyNetwork published_alice;      // what the evaluator actually runs
};

// One protocol round: publishes session parameters and evaluates the masked
// input; the returned y equals evaluate(net, x).  Seed 0 means "identity
// transform" on that side.
std::pair<Vector, InferenceSession> session_inference(const PolyNetwork& net,
                                                      std::uint64_t seed_bob,
                                                      std::uint64_t seed_alice, const Vector& x,
                                                      const SessionOptions& options = {});

struct LinkageReport {
  std::vector<double> pairwise_distances;  // max-abs parameter distance, all session pairs
  double min_pairwise_distance = 0.0;
  bool has_second_factorization = false;
  double refactor_param_gap = 0.0;  // rebuilt publication vs session[0]'s, max-abs
  double refactor_input_gap = 0.0;  // max-abs distance between the two input masks
  EquivalenceReport refactor_equivalence;
};

// (a) measures how far apart different sessions' published parameters are and
// (b) constructs a second, distinct (input mask, parameter set) factorization
// reproducing session[0]'s publication — pushing a permutation/diagonal map
// across the first layer and compensating in the mask — so the publication
// does not identify the session secrets.
LinkageReport linkage_probe(const std::vector<InferenceSession>& sessions, std::uint64_t seed);

// Flattens all stored parameters (weights, biases, signs, mask) for distance
// reporting between published networks.
Vector flatten_parameters(const PolyNetwork& net);

// ---------- obfuscated remote MLP training ----------

enum class HeadKind { ClassPermutation, Orthogonal };

struct TaskHead {
  HeadKind kind = HeadKind::ClassPermutation;
  std::vector<int> class_perm;  // new row -> source row (ClassPermutation)
  Matrix q;                     // orthogonal output mix (Orthogonal)
};

struct MlpObfuscationSecret {
  Matrix r;                      // input mask (invertible)
  Matrix r_inv;
  std::vector<PermDiag> hidden;  // T_1..T_{L-1}, one per hidden interface
  TaskHead head;

  void validate(const std::vector<int>& dims) const;
};

struct SecretOptions {
  bool identity = false;          // degenerate secret: every transform is the identity
  bool orthogonal_r = true;       // QR-based R; otherwise well-conditioned Gaussian
  bool permutation_only = false;  // hidden diagonals pinned to 1 (orthogonal subgroup)
  std::pair<double, double> diag_range{0.5, 2.0};
};

MlpObfuscationSecret make_secret(const std::vector<int>& dims, HeadKind head, std::uint64_t seed,
                                 const SecretOptions& options = {});

// W~_1 = T_1 W_1 R^-1, W~_l = T_l W_l T_{l-1}^-1, W~_L = head(W_L T_{L-1}^-1),
// b~_l = T_l b_l, b~_L = head(b_L).  For all x, the obfuscated model on R*x
// computes head(model(x)).
MlpModel obfuscate_mlp(const MlpModel& model, const MlpObfuscationSecret& secret);

// Exact inverse of obfuscate_mlp (also applies to the server-trained model).
MlpModel recover_mlp(const MlpModel& trained, const MlpObfuscationSecret& secret);

// Inputs mapped by R; class targets relabeled through the head permutation,
// regression targets rotated by Q.  Task kind must match the head kind.
Dataset obfuscate_dataset(const Dataset& data, const MlpObfuscationSecret& secret);

// In-process stand-in for the remote trainer.  Takes and returns serialized
// JSON messages (model {"W","b"}, dataset, hyperparameters) so tests can audit
// exactly what crosses the boundary.
std::string training_server(const std::string& model_json, const std::string& dataset_json,
                            const std::string& hp_json);

}  // namespace polyinv
