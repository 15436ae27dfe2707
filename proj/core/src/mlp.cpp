#include "polyinv/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "polyinv/common.hpp"

namespace polyinv {

std::vector<int> MlpModel::dims() const {
  std::vector<int> d;
  if (w.empty()) return d;
  d.push_back(w.front().cols);
  for (const Matrix& m : w) d.push_back(m.rows);
  return d;
}

void MlpModel::validate() const {
  if (w.empty()) fail_invalid("mlp: no layers");
  if (w.size() != b.size()) fail_invalid("mlp: weight/bias layer counts differ");
  for (size_t l = 0; l < w.size(); ++l) {
    if (l > 0 && w[l].cols != w[l - 1].rows)
      fail_invalid("mlp layer ", l, ": input dim ", w[l].cols, " does not chain with ",
                   w[l - 1].rows);
    if (static_cast<int>(b[l].size()) != w[l].rows)
      fail_invalid("mlp layer ", l, ": bias size mismatch");
    for (double v : w[l].a)
      if (!is_finite(v)) fail_invalid("mlp layer ", l, ": non-finite weight");
    for (double v : b[l])
      if (!is_finite(v)) fail_invalid("mlp layer ", l, ": non-finite bias");
  }
}

MlpModel make_mlp(const std::vector<int>& dims, std::uint64_t seed) {
  if (dims.size() < 2) fail_invalid("make_mlp: need at least input and output dims");
  for (int d : dims)
    if (d < 1) fail_invalid("make_mlp: nonpositive width");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MlpModel m;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    Matrix w(dims[l + 1], dims[l]);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    for (double& v : w.a) v = scale * gauss(rng);
    m.w.push_back(std::move(w));
    m.b.emplace_back(dims[l + 1], 0.0);
  }
  return m;
}

void Dataset::validate(int input_dim, int output_dim) const {
  if (inputs.empty()) fail_invalid("dataset: empty");
  for (const Vector& x : inputs)
    if (static_cast<int>(x.size()) != input_dim)
      fail_invalid("dataset: input size ", x.size(), " != model input dim ", input_dim);
  if (task == TaskKind::Classification) {
    if (class_targets.size() != inputs.size()) fail_invalid("dataset: target count mismatch");
    for (int c : class_targets)
      if (c < 0 || c >= output_dim)
        fail_invalid("dataset: class index ", c, " outside [0,", output_dim, ")");
  } else {
    if (vector_targets.size() != inputs.size()) fail_invalid("dataset: target count mismatch");
    for (const Vector& y : vector_targets)
      if (static_cast<int>(y.size()) != output_dim)
        fail_invalid("dataset: target size ", y.size(), " != model output dim ", output_dim);
  }
}

Vector mlp_forward(const MlpModel& m, const Vector& x, std::vector<Vector>* acts) {
  if (static_cast<int>(x.size()) != m.input_dim())
    fail_invalid("mlp_forward: input size ", x.size(), " != ", m.input_dim());
  Vector z = x;
  if (acts) {
    acts->clear();
    acts->push_back(z);
  }
  const int depth = m.depth();
  for (int l = 0; l < depth; ++l) {
    Vector nxt = matvec(m.w[l], z);
    for (int i = 0; i < static_cast<int>(nxt.size()); ++i) nxt[i] += m.b[l][i];
    if (l + 1 < depth)
      for (double& v : nxt) v = v > 0.0 ? v : 0.0;
    z = std::move(nxt);
    if (acts && l + 1 < depth) acts->push_back(z);
  }
  return z;
}

double canonical_logsumexp(const Vector& z) {
  Vector s = z;
  std::sort(s.begin(), s.end());
  const double m = s.back();
  double acc = 0.0;
  for (double v : s) acc += std::exp(v - m);
  return m + std::log(acc);
}

namespace {

// Loss gradient with respect to the logits/outputs.
Vector output_gradient(const Vector& out, int class_target, const Vector* vector_target,
                       LossKind loss) {
  Vector g(out.size());
  if (loss == LossKind::SoftmaxXent) {
    const double lse = canonical_logsumexp(out);
    for (size_t i = 0; i < out.size(); ++i) g[i] = std::exp(out[i] - lse);
    g[class_target] -= 1.0;
  } else {
    for (size_t i = 0; i < out.size(); ++i) g[i] = out[i] - (*vector_target)[i];
  }
  return g;
}

void check_target(const Vector& out, int class_target, const Vector* vector_target,
                  LossKind loss) {
  if (loss == LossKind::SoftmaxXent) {
    if (class_target < 0 || class_target >= static_cast<int>(out.size()))
      fail_invalid("loss: class target ", class_target, " outside [0,", out.size(), ")");
  } else {
    if (!vector_target || vector_target->size() != out.size())
      fail_invalid("loss: regression target missing or mis-sized");
  }
}

}  // namespace

double sample_loss(const MlpModel& m, const Vector& x, int class_target,
                   const Vector* vector_target, LossKind loss) {
  const Vector out = mlp_forward(m, x);
  check_target(out, class_target, vector_target, loss);
  if (loss == LossKind::SoftmaxXent) return canonical_logsumexp(out) - out[class_target];
  double s = 0.0;
  for (size_t i = 0; i < out.size(); ++i) {
    const double d = out[i] - (*vector_target)[i];
    s += d * d;
  }
  return 0.5 * s;
}

double dataset_loss(const MlpModel& m, const Dataset& data, LossKind loss) {
  double total = 0.0;
  for (int n = 0; n < data.size(); ++n)
    total += sample_loss(m, data.inputs[n],
                         data.task == TaskKind::Classification ? data.class_targets[n] : -1,
                         data.task == TaskKind::Regression ? &data.vector_targets[n] : nullptr,
                         loss);
  return total / data.size();
}

double classification_accuracy(const MlpModel& m, const Dataset& data) {
  if (data.task != TaskKind::Classification) fail_invalid("accuracy: not a classification set");
  int hits = 0;
  for (int n = 0; n < data.size(); ++n) {
    const Vector out = mlp_forward(m, data.inputs[n]);
    const int pred =
        static_cast<int>(std::max_element(out.begin(), out.end()) - out.begin());
    hits += pred == data.class_targets[n];
  }
  return static_cast<double>(hits) / data.size();
}

MlpGradients mlp_gradients(const MlpModel& m, const Vector& x, int class_target,
                           const Vector* vector_target, LossKind loss) {
  std::vector<Vector> acts;
  const Vector out = mlp_forward(m, x, &acts);
  check_target(out, class_target, vector_target, loss);
  const int depth = m.depth();

  MlpGradients g;
  g.w.resize(depth);
  g.b.resize(depth);
  Vector delta = output_gradient(out, class_target, vector_target, loss);
  for (int l = depth - 1; l >= 0; --l) {
    g.b[l] = delta;
    g.w[l] = Matrix(m.w[l].rows, m.w[l].cols);
    for (int i = 0; i < m.w[l].rows; ++i)
      for (int j = 0; j < m.w[l].cols; ++j) g.w[l](i, j) = delta[i] * acts[l][j];
    if (l == 0) break;
    Vector prev(m.w[l].cols, 0.0);
    for (int j = 0; j < m.w[l].cols; ++j) {
      double s = 0.0;
      for (int i = 0; i < m.w[l].rows; ++i) s += m.w[l](i, j) * delta[i];
      // ReLU gate: activation was max(pre, 0); zero activation blocks the path.
      prev[j] = acts[l][j] > 0.0 ? s : 0.0;
    }
    delta = std::move(prev);
  }
  return g;
}

MlpModel train_sgd(MlpModel model, const Dataset& data, const TrainHp& hp) {
  model.validate();
  data.validate(model.input_dim(), model.output_dim());
  if (!(hp.lr >= 0.0) || hp.epochs < 0 || hp.batch < 1)
    fail_invalid("train_sgd: bad hyperparameters");
  if (data.task == TaskKind::Classification && hp.loss == LossKind::Mse)
    fail_invalid("train_sgd: mse loss needs regression targets");
  if (data.task == TaskKind::Regression && hp.loss == LossKind::SoftmaxXent)
    fail_invalid("train_sgd: softmax-xent loss needs class targets");

  const int n = data.size();
  const int depth = model.depth();
  std::mt19937_64 rng(hp.seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n; start += hp.batch) {
      const int end = std::min(n, start + hp.batch);
      MlpGradients acc;
      acc.w.resize(depth);
      acc.b.resize(depth);
      for (int l = 0; l < depth; ++l) {
        acc.w[l] = Matrix(model.w[l].rows, model.w[l].cols);
        acc.b[l].assign(model.b[l].size(), 0.0);
      }
      for (int s = start; s < end; ++s) {
        const int idx = order[s];
        MlpGradients g = mlp_gradients(
            model, data.inputs[idx],
            data.task == TaskKind::Classification ? data.class_targets[idx] : -1,
            data.task == TaskKind::Regression ? &data.vector_targets[idx] : nullptr, hp.loss);
        for (int l = 0; l < depth; ++l) {
          for (size_t i = 0; i < g.w[l].a.size(); ++i) acc.w[l].a[i] += g.w[l].a[i];
          for (size_t i = 0; i < g.b[l].size(); ++i) acc.b[l][i] += g.b[l][i];
        }
      }
      const double scale = hp.lr / (end - start);
      for (int l = 0; l < depth; ++l) {
        for (size_t i = 0; i < acc.w[l].a.size(); ++i) model.w[l].a[i] -= scale * acc.w[l].a[i];
        for (size_t i = 0; i < acc.b[l].size(); ++i) model.b[l][i] -= scale * acc.b[l][i];
      }
      for (int l = 0; l < depth; ++l)
        for (double v : model.w[l].a)
          if (!is_finite(v))
            fail_numeric("train_sgd: non-finite parameters at epoch ", epoch, " batch ",
                         start / hp.batch, " (lr too large or data unscaled?)");
    }
  }
  return model;
}

}  // namespace polyinv
