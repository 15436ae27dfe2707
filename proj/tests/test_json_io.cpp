#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "polyinv/attention.hpp"
#include "polyinv/invariance.hpp"
#include "polyinv/json_io.hpp"
#include "polyinv/mlp.hpp"
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

// Message carried by std::invalid_argument contains the fragment.
#define CHECK_THROWS_CONTAINS(expr, fragment)                       \
  do {                                                              \
    bool caught_ = false;                                           \
    try {                                                           \
      (void)(expr);                                                 \
    } catch (const std::invalid_argument& e_) {                     \
      caught_ = true;                                               \
      CHECK(std::string(e_.what()).find(fragment) != std::string::npos); \
    }                                                               \
    CHECK(caught_);                                                 \
  } while (0)

}  // namespace

TEST_SUITE_BEGIN("json_io");

TEST_CASE("polynetwork round-trips through json") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const auto dims = make_random_dims(3, 4, seed);
    const auto alphas = make_random_alphas(2, seed);
    polyinv::testing::RandomNetOptions opt;
    opt.polarity = true;
    const PolyNetwork net = make_random_network(dims, alphas, seed, opt);

    const PolyNetwork back = polynet_from_json(to_json(net));
    CHECK(back.dims == net.dims);
    REQUIRE(back.poly_layers.size() == net.poly_layers.size());
    for (std::size_t l = 0; l < net.poly_layers.size(); ++l) {
      const auto& a = net.poly_layers[l].outputs;
      const auto& b = back.poly_layers[l].outputs;
      REQUIRE(a.size() == b.size());
      for (std::size_t o = 0; o < a.size(); ++o) {
        REQUIRE(a[o].size() == b[o].size());
        for (std::size_t t = 0; t < a[o].size(); ++t) {
          CHECK(a[o][t].w == b[o][t].w);  // bitwise: shortest-round-trip doubles
          CHECK(a[o][t].b == b[o][t].b);
          CHECK(a[o][t].degree == b[o][t].degree);
          CHECK(a[o][t].sign == b[o][t].sign);
        }
      }
    }
    for (std::size_t l = 0; l < net.monomial_layers.size(); ++l) {
      CHECK(back.monomial_layers[l].alpha == net.monomial_layers[l].alpha);
      CHECK(back.monomial_layers[l].polarity == net.monomial_layers[l].polarity);
    }
  }
}

TEST_CASE("term fields b, r, eps default to 0, 1, 1 and polarity to all ones") {
  const std::string text = R"({
    "dims": [2, 1],
    "alphas": [],
    "layers": [[[{"w": [0.5, -1.5]}]]]
  })";
  const PolyNetwork net = polynet_from_json(parse_json(text, "inline"));
  const AffineTerm& t = net.poly_layers[0].outputs[0][0];
  CHECK(t.b == 0.0);
  CHECK(t.degree == 1);
  CHECK(t.sign == 1);
  CHECK(net.monomial_layers.empty());

  // Same defaults through a monomial layer: polarity comes back +1.
  const std::string deep = R"({
    "dims": [2, 2, 1],
    "alphas": [2.0],
    "layers": [
      [[{"w": [1, 0]}], [{"w": [0, 1]}]],
      [[{"w": [1, 1]}]]
    ]
  })";
  const PolyNetwork two = polynet_from_json(parse_json(deep, "inline"));
  CHECK(two.monomial_layers[0].polarity == std::vector<int>{1, 1});
}

TEST_CASE("polarity is serialized only when some entry is negative") {
  PolyNetwork net = make_quadratic_demo();
  CHECK_FALSE(to_json(net).contains("polarity"));
  net.monomial_layers[0].polarity[1] = -1;
  const Json j = to_json(net);
  REQUIRE(j.contains("polarity"));
  const PolyNetwork back = polynet_from_json(j);
  CHECK(back.monomial_layers[0].polarity == std::vector<int>{1, -1});
}

TEST_CASE("invariance elements round-trip and default S0 to the identity") {
  const auto dims = make_random_dims(3, 4, 7);
  const auto alphas = make_random_alphas(2, 7);
  RandomElementOptions opt;
  opt.allow_polarity = true;
  const InvarianceElement g = random_element(dims, alphas, 99, opt);

  const InvarianceElement back = element_from_json(to_json(g), dims.front());
  CHECK(max_abs_diff(back.input.S0, g.input.S0) == 0.0);
  REQUIRE(back.interfaces.size() == g.interfaces.size());
  for (std::size_t l = 0; l < g.interfaces.size(); ++l) {
    CHECK(back.interfaces[l].perm == g.interfaces[l].perm);
    CHECK(back.interfaces[l].diag == g.interfaces[l].diag);
    CHECK(back.interfaces[l].polarity == g.interfaces[l].polarity);
  }

  // Identity S0 is omitted on write and restored on read.
  const InvarianceElement id = InvarianceElement::identity(dims);
  const Json j = to_json(id);
  CHECK_FALSE(j.contains("S0"));
  const InvarianceElement id_back = element_from_json(j, dims.front());
  CHECK(id_back.input.is_identity());
}

TEST_CASE("interface polarity defaults to all ones when omitted") {
  const std::string text = R"({
    "interfaces": [{"perm": [1, 0], "diag": [2.0, 0.5]}]
  })";
  const InvarianceElement g = element_from_json(parse_json(text, "inline"), 3);
  CHECK(g.interfaces[0].polarity == std::vector<int>{1, 1});
  CHECK(g.input.is_identity());
}

TEST_CASE("mlp models, datasets and hyperparameters round-trip") {
  const MlpModel m = make_mlp({4, 6, 3}, 13);
  const MlpModel m2 = mlp_from_json(to_json(m));
  REQUIRE(m2.dims() == m.dims());
  for (int l = 0; l < m.depth(); ++l) {
    CHECK(max_abs_diff(m2.w[l], m.w[l]) == 0.0);
    CHECK(max_abs_diff(m2.b[l], m.b[l]) == 0.0);
  }

  const Dataset cls = make_blob_dataset(25, 4, 3, 17);
  const Dataset cls2 = dataset_from_json(to_json(cls));
  CHECK(cls2.task == TaskKind::Classification);
  CHECK(cls2.class_targets == cls.class_targets);
  for (int i = 0; i < cls.size(); ++i)
    CHECK(max_abs_diff(cls2.inputs[i], cls.inputs[i]) == 0.0);

  const Dataset reg = make_regression_dataset(25, 4, 2, 18);
  const Dataset reg2 = dataset_from_json(to_json(reg));
  CHECK(reg2.task == TaskKind::Regression);
  for (int i = 0; i < reg.size(); ++i)
    CHECK(max_abs_diff(reg2.vector_targets[i], reg.vector_targets[i]) == 0.0);

  TrainHp hp;
  hp.lr = 0.125;
  hp.epochs = 7;
  hp.batch = 5;
  hp.seed = 42;
  hp.loss = LossKind::Mse;
  const TrainHp hp2 = train_hp_from_json(to_json(hp));
  CHECK(hp2.lr == hp.lr);
  CHECK(hp2.epochs == hp.epochs);
  CHECK(hp2.batch == hp.batch);
  CHECK(hp2.seed == hp.seed);
  CHECK(hp2.loss == LossKind::Mse);
}

TEST_CASE("attention and block parameters round-trip") {
  const AttentionParams p = make_random_attention(5, 4, 5, 19);
  const AttentionParams p2 = attention_from_json(to_json(p));
  CHECK(max_abs_diff(p2.w_q, p.w_q) == 0.0);
  CHECK(max_abs_diff(p2.w_k, p.w_k) == 0.0);
  CHECK(max_abs_diff(p2.w_v, p.w_v) == 0.0);
  CHECK(max_abs_diff(p2.w_o, p.w_o) == 0.0);

  const BlockParams bp = make_random_block(5, 8, 4, FfnActivation::Tanh, 20);
  const BlockParams bp2 = block_from_json(to_json(bp));
  CHECK(max_abs_diff(bp2.attn.w_q, bp.attn.w_q) == 0.0);
  CHECK(max_abs_diff(bp2.ffn.w1, bp.ffn.w1) == 0.0);
  CHECK(max_abs_diff(bp2.ffn.w2, bp.ffn.w2) == 0.0);
  CHECK(bp2.ffn.activation == FfnActivation::Tanh);
  CHECK(max_abs_diff(bp2.ln1.gamma, bp.ln1.gamma) == 0.0);
  CHECK(max_abs_diff(bp2.ln2.beta, bp.ln2.beta) == 0.0);
}

TEST_CASE("json writers emit deterministic text") {
  const PolyNetwork net = make_random_network(make_random_dims(3, 4, 23),
                                              make_random_alphas(2, 23), 23);
  CHECK(to_json(net).dump() == to_json(net).dump());
  const MlpModel m = make_mlp({3, 4, 2}, 23);
  CHECK(to_json(m).dump(2) == to_json(m).dump(2));
}

TEST_CASE("malformed documents fail with field context") {
  SUBCASE("invalid json text") {
    CHECK_THROWS_CONTAINS(parse_json("{unterminated", "model file"), "model file");
  }
  SUBCASE("missing required field") {
    CHECK_THROWS_CONTAINS(polynet_from_json(parse_json("{\"dims\": [2, 1]}", "x")), "alphas");
  }
  SUBCASE("wrong field type") {
    const std::string text = R"({"dims": "nope", "alphas": [], "layers": []})";
    CHECK_THROWS_CONTAINS(polynet_from_json(parse_json(text, "x")), "dims");
  }
  SUBCASE("layer count mismatch") {
    const std::string text = R"({"dims": [2, 1], "alphas": [], "layers": [[], []]})";
    CHECK_THROWS_AS(polynet_from_json(parse_json(text, "x")), std::invalid_argument);
  }
  SUBCASE("ragged matrix") {
    const std::string text = R"({"W": [[[1, 2], [3]]], "b": [[0, 0]]})";
    CHECK_THROWS_CONTAINS(mlp_from_json(parse_json(text, "x")), "row");
  }
  SUBCASE("unknown task") {
    const std::string text = R"({"task": "ranking", "inputs": [[1]], "targets": [0]})";
    CHECK_THROWS_CONTAINS(dataset_from_json(parse_json(text, "x")), "ranking");
  }
  SUBCASE("unknown loss") {
    const std::string text = R"({"lr": 0.1, "epochs": 1, "batch": 1, "seed": 0, "loss": "hinge"})";
    CHECK_THROWS_CONTAINS(train_hp_from_json(parse_json(text, "x")), "hinge");
  }
  SUBCASE("unknown ffn activation") {
    Json j = to_json(make_random_block(4, 6, 3, FfnActivation::Relu, 1));
    j["ffn"]["activation"] = "gelu";
    CHECK_THROWS_CONTAINS(block_from_json(j), "gelu");
  }
}

TEST_CASE("file helpers round-trip and report path errors") {
  const std::string path = "/tmp/polyinv_json_io_test.json";
  const Json j = to_json(make_mlp({2, 2}, 3));
  save_json_file(path, j);
  const Json back = load_json_file(path);
  CHECK(back == j);
  std::remove(path.c_str());

  CHECK_THROWS_CONTAINS(load_json_file("/nonexistent/dir/x.json"), "/nonexistent/dir/x.json");
}

TEST_SUITE_END();
