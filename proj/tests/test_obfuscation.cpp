#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "polyinv/json_io.hpp"
#include "polyinv/obfuscation.hpp"
#include "support/random_networks.hpp"

using namespace polyinv;
using polyinv::testing::make_blob_dataset;
using polyinv::testing::make_quadratic_demo;
using polyinv::testing::make_random_alphas;
using polyinv::testing::make_random_dims;
using polyinv::testing::make_random_network;
using polyinv::testing::make_regression_dataset;

namespace {

double max_param_diff(const MlpModel& a, const MlpModel& b) {
  REQUIRE(a.w.size() == b.w.size());
  double m = 0.0;
  for (std::size_t l = 0; l < a.w.size(); ++l) {
    m = std::max(m, max_abs_diff(a.w[l], b.w[l]));
    m = std::max(m, max_abs_diff(a.b[l], b.b[l]));
  }
  return m;
}

Vector random_input(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector x(n);
  for (double& v : x) v = gauss(rng);
  return x;
}

}  // namespace

TEST_SUITE_BEGIN("obfuscation");

// ---------- remote MLP training masks ----------

TEST_CASE("identity secret leaves model, dataset and recovery untouched") {
  const MlpModel m = make_mlp({4, 8, 3}, 21);
  SecretOptions opt;
  opt.identity = true;
  const MlpObfuscationSecret secret =
      make_secret(m.dims(), HeadKind::ClassPermutation, 77, opt);
  const MlpModel masked = obfuscate_mlp(m, secret);
  CHECK(max_param_diff(masked, m) == 0.0);
  CHECK(max_param_diff(recover_mlp(masked, secret), m) == 0.0);

  const Dataset data = make_blob_dataset(30, 4, 3, 5);
  const Dataset masked_data = obfuscate_dataset(data, secret);
  CHECK(masked_data.class_targets == data.class_targets);
  for (int i = 0; i < data.size(); ++i)
    CHECK(max_abs_diff(masked_data.inputs[i], data.inputs[i]) == 0.0);
}

TEST_CASE("obfuscated model computes the head image of the original map") {
  std::mt19937_64 rng(301);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const std::vector<int> dims{5, 7, 6, 4};
    const MlpModel m = make_mlp(dims, seed);

    SUBCASE("class-permutation head") {
      const MlpObfuscationSecret secret =
          make_secret(dims, HeadKind::ClassPermutation, seed * 13 + 1);
      const MlpModel masked = obfuscate_mlp(m, secret);
      for (int rep = 0; rep < 20; ++rep) {
        const Vector x = random_input(5, rng);
        const Vector direct = mlp_forward(m, x);
        const Vector via = mlp_forward(masked, matvec(secret.r, x));
        for (int j = 0; j < 4; ++j)
          CHECK(via[j] == doctest::Approx(direct[secret.head.class_perm[j]]).epsilon(1e-10));
      }
    }
    SUBCASE("orthogonal head") {
      const MlpObfuscationSecret secret = make_secret(dims, HeadKind::Orthogonal, seed * 13 + 2);
      const MlpModel masked = obfuscate_mlp(m, secret);
      for (int rep = 0; rep < 20; ++rep) {
        const Vector x = random_input(5, rng);
        const Vector want = matvec(secret.head.q, mlp_forward(m, x));
        const Vector got = mlp_forward(masked, matvec(secret.r, x));
        CHECK(max_abs_diff(got, want) < 1e-10);
      }
    }
  }
}

TEST_CASE("recovery inverts obfuscation to high precision") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const std::vector<int> dims{6, 9, 5, 3};
    const MlpModel m = make_mlp(dims, seed);
    SecretOptions opt;
    opt.orthogonal_r = (seed % 2 == 0);
    const HeadKind head = seed % 3 == 0 ? HeadKind::Orthogonal : HeadKind::ClassPermutation;
    const MlpObfuscationSecret secret = make_secret(dims, head, seed * 101 + 7, opt);
    const MlpModel roundtrip = recover_mlp(obfuscate_mlp(m, secret), secret);
    CHECK(max_param_diff(roundtrip, m) < 1e-10);
  }
}

TEST_CASE("permutation-only secrets use unit diagonals and permuted rows") {
  const std::vector<int> dims{4, 6, 5, 3};
  SecretOptions opt;
  opt.permutation_only = true;
  const MlpObfuscationSecret secret =
      make_secret(dims, HeadKind::ClassPermutation, 909, opt);
  REQUIRE(secret.hidden.size() == 2);
  for (const PermDiag& t : secret.hidden) {
    CHECK(is_permutation(t.src));
    for (double d : t.diag) CHECK(d == 1.0);
  }

  // With unit diagonals every obfuscated weight entry equals some original
  // entry up to the input mask: check the middle layer exactly (rows permuted
  // by T_2, columns by T_1).
  const MlpModel m = make_mlp(dims, 42);
  const MlpModel masked = obfuscate_mlp(m, secret);
  const PermDiag& t1 = secret.hidden[0];
  const PermDiag& t2 = secret.hidden[1];
  // (T2 W T1^-1)(i, j) = W(t2.src[i], t1.src[j]) for pure permutations.
  for (int i = 0; i < masked.w[1].rows; ++i)
    for (int j = 0; j < masked.w[1].cols; ++j)
      CHECK(masked.w[1](i, j) ==
            doctest::Approx(m.w[1](t2.src[i], t1.src[j])).epsilon(1e-12));
}

TEST_CASE("dataset obfuscation preserves label multiplicities and geometry") {
  const std::vector<int> dims{4, 8, 3};
  const Dataset data = make_blob_dataset(90, 4, 3, 44);
  const MlpObfuscationSecret secret = make_secret(dims, HeadKind::ClassPermutation, 55);
  const Dataset masked = obfuscate_dataset(data, secret);

  // Class histogram is re-indexed, not changed.
  std::vector<int> before(3, 0), after(3, 0);
  for (int y : data.class_targets) ++before[y];
  for (int y : masked.class_targets) ++after[y];
  const std::vector<int> inv = inverse_permutation(secret.head.class_perm);
  for (int c = 0; c < 3; ++c) CHECK(after[inv[c]] == before[c]);

  // Orthogonal input masks preserve pairwise distances.
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 40; ++rep) {
    const int i = static_cast<int>(rng() % data.size());
    const int j = static_cast<int>(rng() % data.size());
    double d0 = 0.0, d1 = 0.0;
    for (int k = 0; k < 4; ++k) {
      const double a = data.inputs[i][k] - data.inputs[j][k];
      const double b = masked.inputs[i][k] - masked.inputs[j][k];
      d0 += a * a;
      d1 += b * b;
    }
    CHECK(std::sqrt(d1) == doctest::Approx(std::sqrt(d0)).epsilon(1e-10));
  }
}

TEST_CASE("obfuscated loss equals plain loss") {
  const std::vector<int> dims{4, 8, 3};
  const MlpModel m = make_mlp(dims, 61);
  const Dataset data = make_blob_dataset(60, 4, 3, 62);

  SUBCASE("pure class relabeling: bitwise (canonical log-sum-exp)") {
    // Identity masks except for the class permutation: logits are bit-equal
    // up to reordering, and the order-canonical log-sum-exp erases the
    // reordering entirely.
    SecretOptions id;
    id.identity = true;
    MlpObfuscationSecret secret = make_secret(dims, HeadKind::ClassPermutation, 63, id);
    secret.head.class_perm = {2, 0, 1};
    const double plain = dataset_loss(m, data, LossKind::SoftmaxXent);
    const double masked = dataset_loss(obfuscate_mlp(m, secret), obfuscate_dataset(data, secret),
                                       LossKind::SoftmaxXent);
    CHECK(masked == plain);  // bitwise
  }
  SUBCASE("full masks: equal up to float noise") {
    SecretOptions opt;
    opt.permutation_only = true;
    const MlpObfuscationSecret secret =
        make_secret(dims, HeadKind::ClassPermutation, 63, opt);
    const double plain = dataset_loss(m, data, LossKind::SoftmaxXent);
    const double masked = dataset_loss(obfuscate_mlp(m, secret), obfuscate_dataset(data, secret),
                                       LossKind::SoftmaxXent);
    CHECK(masked == doctest::Approx(plain).epsilon(1e-10));
  }
  SUBCASE("orthogonal head on a regression set") {
    const Dataset reg = make_regression_dataset(60, 4, 3, 64);
    const MlpObfuscationSecret secret = make_secret(dims, HeadKind::Orthogonal, 65);
    const double plain = dataset_loss(m, reg, LossKind::Mse);
    const double masked = dataset_loss(obfuscate_mlp(m, secret), obfuscate_dataset(reg, secret),
                                       LossKind::Mse);
    CHECK(masked == doctest::Approx(plain).epsilon(1e-10));
  }
}

TEST_CASE("obfuscated training recovers the controlled training run") {
  // Orthogonal-subgroup masks (permutation-only hidden transforms, orthogonal
  // R, class-permutation head) commute with SGD on the softmax loss: training
  // the masked model on the masked set then unmasking matches training the
  // plain model directly, up to float noise from reordered arithmetic.
  const std::vector<int> dims{4, 10, 3};
  const MlpModel m = make_mlp(dims, 71);
  const Dataset data = make_blob_dataset(80, 4, 3, 72);
  TrainHp hp;
  hp.lr = 0.05;
  hp.epochs = 40;
  hp.batch = 8;
  hp.seed = 5;

  SecretOptions opt;
  opt.permutation_only = true;
  opt.orthogonal_r = true;
  const MlpObfuscationSecret secret = make_secret(dims, HeadKind::ClassPermutation, 73, opt);

  const MlpModel control = train_sgd(m, data, hp);
  const MlpModel trained_masked = train_sgd(obfuscate_mlp(m, secret),
                                            obfuscate_dataset(data, secret), hp);
  const MlpModel recovered = recover_mlp(trained_masked, secret);
  CHECK(max_param_diff(recovered, control) < 1e-6);
}

TEST_CASE("training server round-trips models through the json boundary") {
  const std::vector<int> dims{4, 6, 3};
  const MlpModel m = make_mlp(dims, 81);
  const Dataset data = make_blob_dataset(40, 4, 3, 82);
  TrainHp hp;
  hp.lr = 0.05;
  hp.epochs = 10;
  hp.batch = 8;
  hp.seed = 9;

  const std::string reply =
      training_server(to_json(m).dump(), to_json(data).dump(), to_json(hp).dump());
  const MlpModel server_model = mlp_from_json(parse_json(reply, "server reply"));
  const MlpModel local_model = train_sgd(m, data, hp);
  // nlohmann prints shortest-round-trip doubles, so the boundary is lossless.
  CHECK(max_param_diff(server_model, local_model) == 0.0);

  CHECK_THROWS_AS(training_server("{", to_json(data).dump(), to_json(hp).dump()),
                  std::invalid_argument);
}

TEST_CASE("secret validation rejects malformed masks") {
  const std::vector<int> dims{4, 6, 3};
  MlpObfuscationSecret s = make_secret(dims, HeadKind::ClassPermutation, 91);

  SUBCASE("inconsistent inverse") {
    s.r_inv(0, 0) += 0.5;
    CHECK_THROWS_AS(s.validate(dims), std::invalid_argument);
  }
  SUBCASE("wrong hidden count") {
    s.hidden.clear();
    CHECK_THROWS_AS(s.validate(dims), std::invalid_argument);
  }
  SUBCASE("nonpositive hidden diagonal") {
    s.hidden[0].diag[0] = 0.0;
    CHECK_THROWS_AS(s.validate(dims), std::invalid_argument);
  }
  SUBCASE("class permutation not a bijection") {
    s.head.class_perm = {0, 0, 2};
    CHECK_THROWS_AS(s.validate(dims), std::invalid_argument);
  }
  SUBCASE("non-orthogonal Q") {
    MlpObfuscationSecret t = make_secret(dims, HeadKind::Orthogonal, 92);
    t.head.q(0, 0) += 0.1;
    CHECK_THROWS_AS(t.validate(dims), std::invalid_argument);
  }
  SUBCASE("task/head mismatch in dataset masking") {
    const Dataset classification = make_blob_dataset(10, 4, 3, 93);
    const MlpObfuscationSecret ortho = make_secret(dims, HeadKind::Orthogonal, 94);
    CHECK_THROWS_AS(obfuscate_dataset(classification, ortho), std::invalid_argument);
    const Dataset regression = make_regression_dataset(10, 4, 3, 95);
    CHECK_THROWS_AS(obfuscate_dataset(regression, s), std::invalid_argument);
  }
}

// ---------- session-based private inference ----------

TEST_CASE("session with zero seeds publishes the network verbatim") {
  const PolyNetwork net = make_quadratic_demo();
  const Vector x{1.0, 0.0, 0.0};
  const auto [y, session] = session_inference(net, 0, 0, x);
  CHECK(y[0] == 72.0);
  CHECK(max_abs_diff(flatten_parameters(session.published_alice), flatten_parameters(net)) == 0.0);
}

TEST_CASE("sessions reproduce the direct evaluation on masked inputs") {
  std::mt19937_64 rng(401);
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto dims = make_random_dims(3, 4, seed + 500);
    const auto alphas = make_random_alphas(2, seed + 500);
    polyinv::testing::RandomNetOptions ropt;
    ropt.polarity = true;
    const PolyNetwork net = make_random_network(dims, alphas, seed + 500, ropt);

    SessionOptions sopt;
    sopt.orthogonal_input = (seed % 2 == 0);
    for (int rep = 0; rep < 10; ++rep) {
      const Vector x = random_input(net.input_dim(), rng);
      const Vector direct = evaluate(net, x);
      const auto [y, session] = session_inference(net, seed * 3 + 1, seed * 3 + 2, x, sopt);
      for (std::size_t j = 0; j < y.size(); ++j) {
        const double denom = std::max({std::fabs(direct[j]), std::fabs(y[j]), 1.0});
        CHECK(std::fabs(y[j] - direct[j]) / denom < 1e-9);
      }
    }
  }
}

TEST_CASE("distinct sessions publish distinct parameters") {
  const auto dims = make_random_dims(3, 4, 600);
  const auto alphas = make_random_alphas(2, 600);
  const PolyNetwork net = make_random_network(dims, alphas, 600);
  const Vector x(net.input_dim(), 0.25);

  std::vector<InferenceSession> sessions;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    auto [y, session] = session_inference(net, s * 11 + 1, s * 11 + 2, x);
    sessions.push_back(std::move(session));
  }
  const LinkageReport report = linkage_probe(sessions, 1234);
  REQUIRE(report.pairwise_distances.size() == 3);
  CHECK(report.min_pairwise_distance > 1e-3);

  // The rebuilt (mask', parameters') pair reproduces session[0]'s publication
  // while differing from the original factorization.
  CHECK(report.has_second_factorization);
  CHECK(report.refactor_param_gap < 1e-9);
  CHECK(report.refactor_input_gap > 1e-3);
  CHECK(report.refactor_equivalence.pass);
}

TEST_CASE("session input size is validated") {
  const PolyNetwork net = make_quadratic_demo();
  CHECK_THROWS_AS(session_inference(net, 1, 2, Vector{1.0}), std::invalid_argument);
}

TEST_SUITE_END();
