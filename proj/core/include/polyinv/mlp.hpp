#pragma once

// Minimal ReLU multilayer perceptron with a deterministic SGD trainer, used
// by the remote-training protocol.  Everything is seeded; no ambient entropy.

#include <cstdint>
#include <vector>

#include "polyinv/linalg.hpp"

namespace polyinv {

struct MlpModel {
  std::vector<Matrix> w;  // w[l]: dims[l+1] x dims[l]
  std::vector<Vector> b;  // b[l]: dims[l+1]

  int depth() const { return static_cast<int>(w.size()); }
  int input_dim() const { return w.empty() ? 0 : w.front().cols; }
  int output_dim() const { return w.empty() ? 0 : w.back().rows; }
  std::vector<int> dims() const;
  void validate() const;
};

// Seeded Gaussian entries scaled by 1/sqrt(fan_in); zero biases.
MlpModel make_mlp(const std::vector<int>& dims, std::uint64_t seed);

enum class TaskKind { Classification, Regression };
enum class LossKind { Mse, SoftmaxXent };

struct Dataset {
  TaskKind task = TaskKind::Classification;
  std::vector<Vector> inputs;
  std::vector<int> class_targets;      // classification: index per sample
  std::vector<Vector> vector_targets;  // regression: target vector per sample

  int size() const { return static_cast<int>(inputs.size()); }
  void validate(int input_dim, int output_dim) const;
};

struct TrainHp {
  double lr = 0.01;
  int epochs = 1;
  int batch = 1;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::SoftmaxXent;
};

// Forward pass; when acts is non-null it receives the layer inputs
// (acts[0] = x, acts[l] = post-ReLU activation entering layer l).
Vector mlp_forward(const MlpModel& m, const Vector& x, std::vector<Vector>* acts = nullptr);

// log(sum exp(z)) accumulated in ascending value order, so any permutation of
// z yields the bit-identical result (the permuted-loss invariance is exact).
double canonical_logsumexp(const Vector& z);

// Per-sample loss: Mse = 0.5*||f(x) - y||^2; SoftmaxXent = logsumexp(z) - z_y.
double sample_loss(const MlpModel& m, const Vector& x, int class_target,
                   const Vector* vector_target, LossKind loss);
double dataset_loss(const MlpModel& m, const Dataset& data, LossKind loss);

// Fraction of samples whose argmax logit equals the class target.
double classification_accuracy(const MlpModel& m, const Dataset& data);

struct MlpGradients {
  std::vector<Matrix> w;
  std::vector<Vector> b;
};

// Backpropagated gradient of sample_loss for one sample.
MlpGradients mlp_gradients(const MlpModel& m, const Vector& x, int class_target,
                           const Vector* vector_target, LossKind loss);

// Plain minibatch SGD, deterministic in hp.seed (initial shuffling state and
// every epoch's order derive from it).  Throws with epoch/batch diagnostics
// if the loss turns non-finite.
MlpModel train_sgd(MlpModel model, const Dataset& data, const TrainHp& hp);

}  // namespace polyinv
