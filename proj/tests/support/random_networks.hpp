#pragma once

// Shared fixtures for tests and the acceptance runner: calibrated random
// networks (activations stay bounded on the sampling box by construction),
// deliberately unbalanced copies for the range program, small datasets, and
// the two-layer quadratic demo network.

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "polyinv/invariance.hpp"
#include "polyinv/mlp.hpp"
#include "polyinv/polynet.hpp"

namespace polyinv::testing {

struct RandomNetOptions {
  int max_terms = 3;
  int max_degree = 3;
  double target = 1.2;    // calibrated max |w.z + b| over the probe set
  bool polarity = false;  // mix -1 entries into the monomial masks
};

// Random network whose intermediate values stay near [-target^r, target^r] on
// box inputs: each affine form is rescaled against probe points propagated
// through the layers already built.  Keeps deep compositions of powers from
// overflowing while leaving the parameters generic.
inline PolyNetwork make_random_network(const std::vector<int>& dims,
                                       const std::vector<double>& alphas, std::uint64_t seed,
                                       const RandomNetOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::uniform_int_distribution<int> term_count(1, opt.max_terms);
  std::uniform_int_distribution<int> degree(1, opt.max_degree);
  std::uniform_int_distribution<int> coin(0, 1);

  const int depth = static_cast<int>(dims.size()) - 1;
  PolyNetwork net;
  net.dims = dims;

  const int n_probes = 64;
  std::vector<Vector> probes(n_probes, Vector(dims[0]));
  for (Vector& p : probes)
    for (double& v : p) v = unif(rng);

  for (int l = 0; l < depth; ++l) {
    PolyLayer layer;
    layer.input_dim = dims[l];
    layer.output_dim = dims[l + 1];
    layer.outputs.resize(dims[l + 1]);
    for (auto& terms : layer.outputs) {
      const int k = term_count(rng);
      for (int t = 0; t < k; ++t) {
        AffineTerm a;
        a.w.resize(dims[l]);
        for (double& v : a.w) v = gauss(rng) / std::sqrt(static_cast<double>(dims[l]));
        a.b = 0.2 * gauss(rng);
        a.degree = degree(rng);
        a.sign = coin(rng) ? 1 : -1;
        double peak = 0.0;
        for (const Vector& p : probes) {
          double s = a.b;
          for (int i = 0; i < dims[l]; ++i) s += a.w[i] * p[i];
          peak = std::max(peak, std::fabs(s));
        }
        const double scale = opt.target / std::max(peak, 1e-6);
        for (double& v : a.w) v *= scale;
        a.b *= scale;
        terms.push_back(std::move(a));
      }
    }
    net.poly_layers.push_back(layer);

    std::vector<Vector> next(n_probes, Vector(dims[l + 1]));
    for (int s = 0; s < n_probes; ++s)
      for (int j = 0; j < dims[l + 1]; ++j) {
        double acc = 0.0;
        for (const AffineTerm& a : layer.outputs[j]) {
          double z = a.b;
          for (int i = 0; i < dims[l]; ++i) z += a.w[i] * probes[s][i];
          acc += a.sign * int_pow(z, a.degree);
        }
        next[s][j] = acc;
      }

    if (l + 1 < depth) {
      MonomialLayer m;
      m.dim = dims[l + 1];
      m.alpha = alphas[l];
      m.polarity.assign(m.dim, 1);
      if (opt.polarity)
        for (int& p : m.polarity) p = coin(rng) ? 1 : -1;
      net.monomial_layers.push_back(m);
      for (Vector& p : next)
        for (int i = 0; i < m.dim; ++i) p[i] = rectified_pow(m.polarity[i] * p[i], m.alpha);
    }
    probes = std::move(next);
  }
  validate(net);
  return net;
}

inline std::vector<double> make_random_alphas(int n_interfaces, std::uint64_t seed) {
  static const double choices[] = {0.5, 1.0, 1.5, 2.0, 3.0};
  std::mt19937_64 rng(seed ^ 0xa1fa5ULL);
  std::uniform_int_distribution<int> pick(0, 4);
  std::vector<double> a(n_interfaces);
  for (double& v : a) v = choices[pick(rng)];
  return a;
}

inline std::vector<int> make_random_dims(int depth, int max_width, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xd135ULL);
  std::uniform_int_distribution<int> width(2, max_width);
  std::vector<int> dims(depth + 1);
  for (int& d : dims) d = width(rng);
  return dims;
}

// Balanced calibrated network pushed out of balance by a diagonal-only group
// element with spread-out scales.  The range/regularizer programs should be
// able to (at least) undo the imbalance, so optimizing the returned network
// must not end up worse than the balanced original.
inline PolyNetwork make_unbalanced_network(const std::vector<int>& dims,
                                           const std::vector<double>& alphas, std::uint64_t seed,
                                           double spread = 5.0) {
  const PolyNetwork base = make_random_network(dims, alphas, seed);
  std::mt19937_64 rng(seed ^ 0x0ddba11ULL);
  std::uniform_real_distribution<double> logd(-std::log(spread), std::log(spread));
  InvarianceElement g = InvarianceElement::identity(dims);
  for (InterfaceTransform& t : g.interfaces)
    for (double& d : t.diag) d = std::exp(logd(rng));
  return apply(base, g);
}

// The two-layer quadratic demo: dims (3, 2, 1), alpha = 2, every output is
// (w.x + b)^2 + (w.x + b).  With unit weights and zero biases f(1,0,0) = 72.
inline PolyNetwork make_quadratic_demo() {
  PolyNetwork net;
  net.dims = {3, 2, 1};
  auto terms_for = [](const Vector& w) {
    std::vector<AffineTerm> ts(2);
    ts[0].w = w;
    ts[0].degree = 2;
    ts[1].w = w;
    ts[1].degree = 1;
    return ts;
  };
  PolyLayer p1;
  p1.input_dim = 3;
  p1.output_dim = 2;
  p1.outputs = {terms_for({1.0, 1.0, 1.0}), terms_for({1.0, 1.0, 1.0})};
  PolyLayer p2;
  p2.input_dim = 2;
  p2.output_dim = 1;
  p2.outputs = {terms_for({1.0, 1.0})};
  net.poly_layers = {p1, p2};
  MonomialLayer m;
  m.dim = 2;
  m.alpha = 2.0;
  m.polarity = {1, 1};
  net.monomial_layers = {m};
  validate(net);
  return net;
}

// Gaussian blobs around per-class centers; linearly separable for margin >= 2.
inline Dataset make_blob_dataset(int n, int input_dim, int n_classes, std::uint64_t seed,
                                 double margin = 3.0) {
  std::mt19937_64 rng(seed ^ 0xb10b5ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, n_classes - 1);
  std::vector<Vector> centers(n_classes, Vector(input_dim, 0.0));
  for (int c = 0; c < n_classes; ++c)
    for (double& v : centers[c]) v = margin * gauss(rng);
  Dataset d;
  d.task = TaskKind::Classification;
  for (int s = 0; s < n; ++s) {
    const int c = pick(rng);
    Vector x(input_dim);
    for (int i = 0; i < input_dim; ++i) x[i] = centers[c][i] + 0.5 * gauss(rng);
    d.inputs.push_back(std::move(x));
    d.class_targets.push_back(c);
  }
  return d;
}

// Targets from a fixed random linear map plus small noise.
inline Dataset make_regression_dataset(int n, int input_dim, int output_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x4e91e55ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vector> map(output_dim, Vector(input_dim));
  for (auto& row : map)
    for (double& v : row) v = gauss(rng);
  Dataset d;
  d.task = TaskKind::Regression;
  for (int s = 0; s < n; ++s) {
    Vector x(input_dim);
    for (double& v : x) v = gauss(rng);
    Vector y(output_dim, 0.0);
    for (int o = 0; o < output_dim; ++o) {
      for (int i = 0; i < input_dim; ++i) y[o] += map[o][i] * x[i];
      y[o] += 0.01 * gauss(rng);
    }
    d.inputs.push_back(std::move(x));
    d.vector_targets.push_back(std::move(y));
  }
  return d;
}

}  // namespace polyinv::testing
