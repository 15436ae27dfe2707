#include "polyinv/obfuscation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "polyinv/common.hpp"
#include "polyinv/json_io.hpp"

namespace polyinv {

namespace {

Matrix well_conditioned_gaussian(int n, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 256; ++attempt) {
    Matrix m = random_gaussian(n, n, rng);
    if (cond_inf(m) <= 1e3) return m;
  }
  fail_numeric("could not sample a well-conditioned matrix of size ", n);
}

std::vector<int> random_permutation(int n, std::mt19937_64& rng) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

double log_uniform(std::pair<double, double> range, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(std::log(range.first), std::log(range.second));
  return std::exp(u(rng));
}

}  // namespace

// ---------- private inference ----------

std::pair<Vector, InferenceSession> session_inference(const PolyNetwork& net,
                                                      std::uint64_t seed_bob,
                                                      std::uint64_t seed_alice, const Vector& x,
                                                      const SessionOptions& options) {
  validate(net);
  if (static_cast<int>(x.size()) != net.input_dim())
    fail_invalid("session_inference: input size ", x.size(), " != ", net.input_dim());

  InferenceSession session;
  if (seed_bob == 0) {
    session.bob_element = InvarianceElement::identity(net.dims);
  } else {
    std::vector<double> alphas;
    for (const MonomialLayer& m : net.monomial_layers) alphas.push_back(m.alpha);
    RandomElementOptions opt;
    opt.allow_polarity = options.allow_polarity;
    opt.allow_permutation = true;
    opt.diag_range = options.diag_range;
    opt.general_linear_input = false;
    session.bob_element = random_element(net.dims, alphas, seed_bob, opt);
  }
  session.published_bob = apply(net, session.bob_element);

  session.alice_element = InvarianceElement::identity(net.dims);
  if (seed_alice != 0) {
    std::mt19937_64 rng(seed_alice);
    const Matrix r = options.orthogonal_input ? random_orthogonal(net.input_dim(), rng)
                                              : well_conditioned_gaussian(net.input_dim(), rng);
    session.alice_element.input = InputTransform::from_matrix(r);
  }
  session.published_alice = apply(session.published_bob, session.alice_element);

  const Vector masked = matvec(session.alice_element.input.S0, x);
  Vector y = evaluate(session.published_alice, masked);
  return {std::move(y), std::move(session)};
}

Vector flatten_parameters(const PolyNetwork& net) {
  Vector flat;
  for (const PolyLayer& layer : net.poly_layers)
    for (const auto& output : layer.outputs)
      for (const AffineTerm& t : output) {
        flat.insert(flat.end(), t.w.begin(), t.w.end());
        flat.push_back(t.b);
        flat.push_back(static_cast<double>(t.sign));
        flat.push_back(static_cast<double>(t.degree));
      }
  for (const MonomialLayer& m : net.monomial_layers)
    for (int q : m.polarity) flat.push_back(static_cast<double>(q));
  return flat;
}

LinkageReport linkage_probe(const std::vector<InferenceSession>& sessions, std::uint64_t seed) {
  LinkageReport report;
  if (sessions.empty()) return report;

  report.min_pairwise_distance = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < sessions.size(); ++i)
    for (size_t j = i + 1; j < sessions.size(); ++j) {
      const Vector a = flatten_parameters(sessions[i].published_alice);
      const Vector b = flatten_parameters(sessions[j].published_alice);
      double d = a.size() == b.size() ? max_abs_diff(a, b)
                                      : std::numeric_limits<double>::infinity();
      report.pairwise_distances.push_back(d);
      report.min_pairwise_distance = std::min(report.min_pairwise_distance, d);
    }
  if (sessions.size() < 2) report.min_pairwise_distance = 0.0;

  // Second factorization of session[0]'s publication: choose a random
  // permutation/diagonal map M on the input, publish theta' = theta-hat with M
  // pushed across the first layer, and mask with R' = R M^-1; then theta'
  // masked by R' reproduces published_alice while (R', theta') differs from
  // (R, theta-hat).
  const InferenceSession& s0 = sessions.front();
  const int d0 = s0.published_bob.input_dim();
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  PermDiag pd;
  pd.src = random_permutation(d0, rng);
  pd.diag.resize(d0);
  for (double& v : pd.diag) v = log_uniform({0.5, 2.0}, rng);
  const Matrix m = pd.as_matrix();

  InvarianceElement push = InvarianceElement::identity(s0.published_bob.dims);
  push.input = InputTransform::from_matrix(m);
  const PolyNetwork theta_prime = apply(s0.published_bob, push);

  const Matrix r = s0.alice_element.input.S0;
  const Matrix r_prime = matmul(r, pd.inverse().as_matrix());

  InvarianceElement mask = InvarianceElement::identity(s0.published_bob.dims);
  mask.input = InputTransform::from_matrix(r_prime);
  const PolyNetwork rebuilt = apply(theta_prime, mask);

  report.has_second_factorization = true;
  report.refactor_param_gap =
      max_abs_diff(flatten_parameters(rebuilt), flatten_parameters(s0.published_alice));
  report.refactor_input_gap = max_abs_diff(r_prime, r);
  report.refactor_equivalence =
      verify_equivalence(rebuilt, s0.published_alice, 200, Box{}, 1e-9, seed);
  return report;
}

// ---------- obfuscated remote MLP training ----------

void MlpObfuscationSecret::validate(const std::vector<int>& dims) const {
  const int depth = static_cast<int>(dims.size()) - 1;
  if (depth < 1) fail_invalid("secret: empty dimension chain");
  if (r.rows != dims.front() || r.cols != dims.front())
    fail_invalid("secret: R is ", r.rows, "x", r.cols, ", expected ", dims.front());
  if (max_abs_diff(matmul(r, r_inv), Matrix::identity(r.rows)) > 1e-6)
    fail_invalid("secret: R and its inverse do not multiply to identity");
  if (static_cast<int>(hidden.size()) != depth - 1)
    fail_invalid("secret: expected ", depth - 1, " hidden transforms, got ", hidden.size());
  for (int l = 0; l < depth - 1; ++l) {
    hidden[l].validate();
    if (hidden[l].size() != dims[l + 1])
      fail_invalid("secret: hidden transform ", l, " has size ", hidden[l].size(), ", expected ",
                   dims[l + 1]);
    for (double d : hidden[l].diag)
      if (!(d > 0.0)) fail_invalid("secret: hidden diagonal must be positive");
  }
  if (head.kind == HeadKind::ClassPermutation) {
    if (static_cast<int>(head.class_perm.size()) != dims.back() ||
        !is_permutation(head.class_perm))
      fail_invalid("secret: class permutation is not a bijection over ", dims.back(), " classes");
  } else {
    if (head.q.rows != dims.back() || head.q.cols != dims.back())
      fail_invalid("secret: Q is ", head.q.rows, "x", head.q.cols, ", expected ", dims.back());
    if (max_abs_diff(matmul(transpose(head.q), head.q), Matrix::identity(head.q.rows)) > 1e-8)
      fail_invalid("secret: Q is not orthogonal within 1e-8");
  }
}

MlpObfuscationSecret make_secret(const std::vector<int>& dims, HeadKind head_kind,
                                 std::uint64_t seed, const SecretOptions& options) {
  if (dims.size() < 2) fail_invalid("make_secret: need at least input and output dims");
  const int depth = static_cast<int>(dims.size()) - 1;
  std::mt19937_64 rng(seed);
  MlpObfuscationSecret s;
  s.head.kind = head_kind;

  if (options.identity) {
    s.r = Matrix::identity(dims.front());
    s.r_inv = s.r;
    for (int l = 1; l < depth; ++l) s.hidden.push_back(PermDiag::identity(dims[l]));
    if (head_kind == HeadKind::ClassPermutation) {
      s.head.class_perm.resize(dims.back());
      std::iota(s.head.class_perm.begin(), s.head.class_perm.end(), 0);
    } else {
      s.head.q = Matrix::identity(dims.back());
    }
    return s;
  }

  s.r = options.orthogonal_r ? random_orthogonal(dims.front(), rng)
                             : well_conditioned_gaussian(dims.front(), rng);
  s.r_inv = options.orthogonal_r ? transpose(s.r) : invert(s.r);
  for (int l = 1; l < depth; ++l) {
    PermDiag t;
    t.src = random_permutation(dims[l], rng);
    t.diag.resize(dims[l]);
    for (double& v : t.diag) v = options.permutation_only ? 1.0 : log_uniform(options.diag_range, rng);
    s.hidden.push_back(std::move(t));
  }
  if (head_kind == HeadKind::ClassPermutation)
    s.head.class_perm = random_permutation(dims.back(), rng);
  else
    s.head.q = random_orthogonal(dims.back(), rng);
  s.validate(dims);
  return s;
}

namespace {

Matrix head_rows(const TaskHead& head, const Matrix& w, bool forward) {
  if (head.kind == HeadKind::Orthogonal)
    return forward ? matmul(head.q, w) : matmul(transpose(head.q), w);
  Matrix out(w.rows, w.cols);
  for (int i = 0; i < w.rows; ++i) {
    const int src = head.class_perm[i];
    for (int j = 0; j < w.cols; ++j) {
      if (forward)
        out(i, j) = w(src, j);
      else
        out(src, j) = w(i, j);
    }
  }
  return out;
}

Vector head_vec(const TaskHead& head, const Vector& v, bool forward) {
  if (head.kind == HeadKind::Orthogonal)
    return forward ? matvec(head.q, v) : matvec(transpose(head.q), v);
  Vector out(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    if (forward)
      out[i] = v[head.class_perm[i]];
    else
      out[head.class_perm[i]] = v[i];
  }
  return out;
}

}  // namespace

MlpModel obfuscate_mlp(const MlpModel& model, const MlpObfuscationSecret& secret) {
  model.validate();
  secret.validate(model.dims());
  const int depth = model.depth();
  MlpModel out = model;
  for (int l = 0; l < depth; ++l) {
    Matrix w = l == 0 ? matmul(model.w[0], secret.r_inv)
                      : right_apply_inverse(model.w[l], secret.hidden[l - 1]);
    if (l == depth - 1) {
      out.w[l] = head_rows(secret.head, w, true);
      out.b[l] = head_vec(secret.head, model.b[l], true);
    } else {
      out.w[l] = left_apply(secret.hidden[l], w);
      out.b[l] = secret.hidden[l].apply(model.b[l]);
    }
  }
  return out;
}

MlpModel recover_mlp(const MlpModel& trained, const MlpObfuscationSecret& secret) {
  trained.validate();
  secret.validate(trained.dims());
  const int depth = trained.depth();
  MlpModel out = trained;
  for (int l = 0; l < depth; ++l) {
    Matrix w = l == depth - 1 ? head_rows(secret.head, trained.w[l], false)
                              : left_apply_inverse(secret.hidden[l], trained.w[l]);
    out.w[l] = l == 0 ? matmul(w, secret.r) : right_apply(w, secret.hidden[l - 1]);
    out.b[l] = l == depth - 1 ? head_vec(secret.head, trained.b[l], false)
                              : secret.hidden[l].apply_inverse(trained.b[l]);
  }
  return out;
}

Dataset obfuscate_dataset(const Dataset& data, const MlpObfuscationSecret& secret) {
  if (data.task == TaskKind::Classification && secret.head.kind != HeadKind::ClassPermutation)
    fail_invalid("obfuscate_dataset: classification targets need a class-permutation head");
  if (data.task == TaskKind::Regression && secret.head.kind != HeadKind::Orthogonal)
    fail_invalid("obfuscate_dataset: regression targets need an orthogonal head");
  Dataset out = data;
  for (Vector& x : out.inputs) x = matvec(secret.r, x);
  if (data.task == TaskKind::Classification) {
    // Obfuscated logit i carries source class class_perm[i], so source label y
    // becomes the position holding it.
    const std::vector<int> inv = inverse_permutation(secret.head.class_perm);
    for (int& y : out.class_targets) y = inv[y];
  } else {
    for (Vector& y : out.vector_targets) y = matvec(secret.head.q, y);
  }
  return out;
}

std::string training_server(const std::string& model_json, const std::string& dataset_json,
                            const std::string& hp_json) {
  const MlpModel model = mlp_from_json(parse_json(model_json, "model message"));
  const Dataset data = dataset_from_json(parse_json(dataset_json, "dataset message"));
  const TrainHp hp = train_hp_from_json(parse_json(hp_json, "hyperparameter message"));
  const MlpModel trained = train_sgd(model, data, hp);
  return to_json(trained).dump();
}

}  // namespace polyinv
