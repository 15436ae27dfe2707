#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "polyinv/invariance.hpp"
#include "polyinv/polynet.hpp"
#include "support/random_networks.hpp"

using namespace polyinv;

namespace {

// Max parameter difference between two structurally identical networks
// (infinity when the shapes or discrete slots differ).
double net_param_max_diff(const PolyNetwork& a, const PolyNetwork& b) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (a.dims != b.dims) return inf;
  double m = 0.0;
  for (size_t l = 0; l < a.poly_layers.size(); ++l)
    for (size_t j = 0; j < a.poly_layers[l].outputs.size(); ++j) {
      const auto& ta = a.poly_layers[l].outputs[j];
      const auto& tb = b.poly_layers[l].outputs[j];
      if (ta.size() != tb.size()) return inf;
      for (size_t k = 0; k < ta.size(); ++k) {
        if (ta[k].degree != tb[k].degree || ta[k].sign != tb[k].sign) return inf;
        m = std::max(m, std::fabs(ta[k].b - tb[k].b));
        for (size_t i = 0; i < ta[k].w.size(); ++i)
          m = std::max(m, std::fabs(ta[k].w[i] - tb[k].w[i]));
      }
    }
  for (size_t l = 0; l < a.monomial_layers.size(); ++l) {
    if (a.monomial_layers[l].polarity != b.monomial_layers[l].polarity) return inf;
    m = std::max(m, std::fabs(a.monomial_layers[l].alpha - b.monomial_layers[l].alpha));
  }
  return m;
}

}  // namespace

TEST_SUITE_BEGIN("invariance");

TEST_CASE("swap-and-scale element rewrites the demo parameters as expected") {
  const PolyNetwork net = testing::make_quadratic_demo();
  InvarianceElement g = InvarianceElement::identity(net.dims);
  g.interfaces[0].perm = {1, 0};
  g.interfaces[0].diag = {4.0, 9.0};  // aligned with the source coordinate

  const PolyNetwork out = apply(net, g);

  // New output 0 is old output 1 scaled by 9^(1/(alpha*r)): sqrt(3) on the
  // quadratic term, 3 on the linear term.
  CHECK(out.poly_layers[0].outputs[0][0].w[0] == doctest::Approx(std::sqrt(3.0)));
  CHECK(out.poly_layers[0].outputs[0][1].w[0] == doctest::Approx(3.0));
  // New output 1 is old output 0 scaled by 4^(1/(alpha*r)).
  CHECK(out.poly_layers[0].outputs[1][0].w[0] == doctest::Approx(std::sqrt(2.0)));
  CHECK(out.poly_layers[0].outputs[1][1].w[0] == doctest::Approx(2.0));
  // Downstream weights divide by the source scale and follow the permutation.
  CHECK(out.poly_layers[1].outputs[0][0].w[0] == doctest::Approx(1.0 / 9.0));
  CHECK(out.poly_layers[1].outputs[0][0].w[1] == doctest::Approx(1.0 / 4.0));

  const EquivalenceReport rep = verify_equivalence(net, out, 500, Box{}, 1e-12);
  CHECK(rep.pass);
  CHECK(evaluate(out, {1.0, 0.0, 0.0})[0] == doctest::Approx(72.0).epsilon(1e-13));
}

TEST_CASE("polarity flips move into sign slots and the rectification mask") {
  const PolyNetwork net = testing::make_quadratic_demo();
  InvarianceElement g = InvarianceElement::identity(net.dims);
  g.interfaces[0].polarity = {-1, 1};

  const PolyNetwork out = apply(net, g);
  CHECK(out.poly_layers[0].outputs[0][0].sign == -1);
  CHECK(out.poly_layers[0].outputs[0][1].sign == -1);
  CHECK(out.poly_layers[0].outputs[1][0].sign == 1);
  CHECK(out.monomial_layers[0].polarity == std::vector<int>{-1, 1});
  // Downstream weights carry no sign: the mask already undoes the flip.
  CHECK(out.poly_layers[1].outputs[0][0].w[0] == doctest::Approx(1.0));

  CHECK(verify_equivalence(net, out, 500, Box{}, 1e-12).pass);
}

TEST_CASE("identity element is an exact no-op") {
  const PolyNetwork net = testing::make_random_network({3, 4, 3, 2}, {2.0, 1.0}, 17);
  const PolyNetwork out = apply(net, InvarianceElement::identity(net.dims));
  CHECK(net_param_max_diff(net, out) == 0.0);
}

TEST_CASE("random elements preserve the realized map") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    CAPTURE(seed);
    const auto dims = testing::make_random_dims(3, 6, seed);
    const auto alphas = testing::make_random_alphas(2, seed);
    const PolyNetwork net = testing::make_random_network(dims, alphas, seed,
                                                         {.max_terms = 3, .polarity = true});
    RandomElementOptions opts;
    opts.allow_polarity = true;
    const InvarianceElement g = random_element(dims, alphas, seed + 1000, opts);
    const PolyNetwork out = apply(net, g);
    const EquivalenceReport rep = verify_equivalence(net, out, 300, Box{}, 1e-9, seed);
    CAPTURE(rep.max_rel_err);
    CHECK(rep.pass);
  }
}

TEST_CASE("general-linear input transforms relocate the input space") {
  const std::vector<int> dims{4, 3, 2};
  const std::vector<double> alphas{2.0};
  const PolyNetwork net = testing::make_random_network(dims, alphas, 23);
  RandomElementOptions opts;
  opts.general_linear_input = true;
  const InvarianceElement g = random_element(dims, alphas, 5, opts);
  REQUIRE_FALSE(g.input.is_identity());
  const PolyNetwork out = apply(net, g);
  CHECK(verify_equivalence_mapped(net, out, g.input.S0, 300, Box{}, 1e-9).pass);
}

TEST_CASE("composition law matches sequential application") {
  const std::vector<int> dims{3, 4, 3, 2};
  const auto alphas = testing::make_random_alphas(2, 7);
  const PolyNetwork net = testing::make_random_network(dims, alphas, 7);
  RandomElementOptions opts;
  opts.allow_polarity = true;
  opts.general_linear_input = true;
  const InvarianceElement g1 = random_element(dims, alphas, 71, opts);
  const InvarianceElement g2 = random_element(dims, alphas, 72, opts);

  const PolyNetwork sequential = apply(apply(net, g1), g2);
  const PolyNetwork composed = apply(net, compose(g1, g2));
  CHECK(net_param_max_diff(sequential, composed) < 1e-11);
}

TEST_CASE("inverse elements undo the reparameterization") {
  const std::vector<int> dims{3, 5, 4, 2};
  const auto alphas = testing::make_random_alphas(2, 9);
  const PolyNetwork net = testing::make_random_network(dims, alphas, 9);
  RandomElementOptions opts;
  opts.allow_polarity = true;
  opts.general_linear_input = true;
  const InvarianceElement g = random_element(dims, alphas, 91, opts);

  const PolyNetwork back = apply(apply(net, g), inverse(g));
  CHECK(net_param_max_diff(net, back) < 1e-10);

  // compose(g, inverse(g)) is the identity element.
  const InvarianceElement e = compose(g, inverse(g));
  for (const InterfaceTransform& t : e.interfaces) {
    for (int i = 0; i < t.size(); ++i) {
      CHECK(t.perm[i] == i);
      CHECK(t.diag[i] == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(t.polarity[i] == 1);
    }
  }
  for (int i = 0; i < e.input.dim(); ++i)
    for (int j = 0; j < e.input.dim(); ++j)
      CHECK(e.input.S0(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
}

TEST_CASE("same seed reproduces the same element") {
  const std::vector<int> dims{3, 4, 2};
  const std::vector<double> alphas{1.5};
  RandomElementOptions opts;
  opts.allow_polarity = true;
  const InvarianceElement a = random_element(dims, alphas, 1234, opts);
  const InvarianceElement b = random_element(dims, alphas, 1234, opts);
  CHECK(a.interfaces[0].perm == b.interfaces[0].perm);
  CHECK(a.interfaces[0].polarity == b.interfaces[0].polarity);
  for (int i = 0; i < a.interfaces[0].size(); ++i)
    CHECK(a.interfaces[0].diag[i] == b.interfaces[0].diag[i]);
}

TEST_CASE("scaling cannot be absorbed into a degree-0 term") {
  PolyNetwork net = testing::make_quadratic_demo();
  AffineTerm c;
  c.w = {0.0, 0.0, 0.0};
  c.degree = 0;
  net.poly_layers[0].outputs[0].push_back(c);
  validate(net);

  InvarianceElement g = InvarianceElement::identity(net.dims);
  g.interfaces[0].diag = {2.0, 1.0};
  CHECK_THROWS_AS(apply(net, g), std::invalid_argument);

  // Sign flips stay representable: the sign slot absorbs them.
  InvarianceElement flip = InvarianceElement::identity(net.dims);
  flip.interfaces[0].polarity = {-1, 1};
  const PolyNetwork out = apply(net, flip);
  CHECK(out.poly_layers[0].outputs[0][2].sign == -1);
  CHECK(verify_equivalence(net, out, 300, Box{}, 1e-12).pass);
}

TEST_CASE("element validation rejects malformed transforms") {
  InterfaceTransform t = InterfaceTransform::identity(3);
  SUBCASE("perm must be a bijection") {
    t.perm = {0, 0, 2};
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  }
  SUBCASE("diag must be positive") {
    t.diag[1] = -2.0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  }
  SUBCASE("polarity entries must be +-1") {
    t.polarity[0] = 0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  }
  SUBCASE("singular input transforms are rejected") {
    Matrix s(2, 2);
    s(0, 0) = 1.0;
    s(0, 1) = 1.0;
    s(1, 0) = 1.0;
    s(1, 1) = 1.0;
    CHECK_THROWS(InputTransform::from_matrix(s));
  }
  SUBCASE("interface size must match the network width") {
    const PolyNetwork net = testing::make_quadratic_demo();
    InvarianceElement g = InvarianceElement::identity(net.dims);
    g.interfaces[0] = InterfaceTransform::identity(5);
    CHECK_THROWS_AS(apply(net, g), std::invalid_argument);
  }
}

TEST_SUITE_END();
