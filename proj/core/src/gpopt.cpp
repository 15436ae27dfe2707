#include "polyinv/gpopt.hpp"

#include <algorithm>
#include <cmath>

namespace polyinv {

namespace {

GpVariable diag_var(int layer, int index) { return {GpVariable::Kind::Diag, layer, index}; }

// Shared scaffolding: validates the net for the GP builders and declares one
// diagonal variable per interface coordinate, then anchors/bounds them.
struct BuilderBase {
  const PolyNetwork& net;
  GpProblem p;
  int depth;

  BuilderBase(const PolyNetwork& n, const char* what) : net(n), depth(n.depth()) {
    validate(net);
    if (depth < 2) fail_invalid(what, ": network has no interface (depth < 2)");
    for (int l = 0; l < depth; ++l)
      for (const auto& output : net.poly_layers[l].outputs)
        for (const AffineTerm& t : output)
          if (t.degree < 1)
            fail_invalid(what, ": degree-0 term in poly layer ", l + 1,
                         " (constant outputs cannot be rescaled)");
    for (int l = 1; l < depth; ++l)
      for (int i = 0; i < net.dims[l]; ++i) p.add_variable(diag_var(l, i));
  }

  double alpha(int interface) const { return net.monomial_layers[interface - 1].alpha; }

  void add_anchors_and_bounds(bool anchors, const std::optional<std::pair<double, double>>& bounds) {
    for (int l = 1; l < depth; ++l) {
      if (anchors) {
        MonomialTerm anchor;
        for (int i = 0; i < net.dims[l]; ++i) anchor.exps.emplace_back(p.find_variable(diag_var(l, i)), 1.0);
        p.eq.push_back(std::move(anchor));
      }
      if (bounds)
        for (int i = 0; i < net.dims[l]; ++i)
          p.set_bounds(p.find_variable(diag_var(l, i)), bounds->first, bounds->second);
    }
  }
};

GpProblem build_norm_gp(const PolyNetwork& net, double mu, const RegGpOptions& options,
                        bool frobenius) {
  if (!(mu >= 0.0)) fail_invalid("regularizer gp: mu must be nonnegative");
  BuilderBase b(net, frobenius ? "frobenius gp" : "l1 gp");
  const int depth = b.depth;
  auto wcost = [&](double w) { return frobenius ? w * w : std::fabs(w); };
  const double up_exp = frobenius ? -2.0 : -1.0;  // downstream compensation w/d
  const double gamma_num = frobenius ? 2.0 : 1.0;

  // First layer: one monomial per term, all mass on d_{1,j}.
  for (int j = 0; j < net.dims[1]; ++j)
    for (const AffineTerm& t : net.poly_layers[0].outputs[j]) {
      double c = mu * wcost(t.b);
      for (double w : t.w) c += wcost(w);
      MonomialTerm m;
      m.coeff = c;
      m.exps = {{b.p.find_variable(diag_var(1, j)), gamma_num / (b.alpha(1) * t.degree)}};
      b.p.objective.add_term(std::move(m));
    }

  // Interior layers: upstream compensation plus output absorption.
  for (int l = 2; l <= depth - 1; ++l)
    for (int i = 0; i < net.dims[l]; ++i)
      for (const AffineTerm& t : net.poly_layers[l - 1].outputs[i]) {
        const double gamma = gamma_num / (b.alpha(l) * t.degree);
        const int vout = b.p.find_variable(diag_var(l, i));
        for (int q = 0; q < net.dims[l - 1]; ++q) {
          MonomialTerm m;
          m.coeff = wcost(t.w[q]);
          m.exps = {{b.p.find_variable(diag_var(l - 1, q)), up_exp}, {vout, gamma}};
          b.p.objective.add_term(std::move(m));
        }
        MonomialTerm mb;
        mb.coeff = mu * wcost(t.b);
        mb.exps = {{vout, gamma}};
        b.p.objective.add_term(std::move(mb));
      }

  // Last layer: aggregate over outputs and terms per input coordinate; biases
  // are untouched by any diagonal and become a constant offset.
  {
    const int l = depth;
    Vector c(net.dims[l - 1], 0.0);
    for (const auto& output : net.poly_layers[l - 1].outputs)
      for (const AffineTerm& t : output) {
        for (int q = 0; q < net.dims[l - 1]; ++q) c[q] += wcost(t.w[q]);
        b.p.constant_offset += mu * wcost(t.b);
      }
    for (int q = 0; q < net.dims[l - 1]; ++q) {
      MonomialTerm m;
      m.coeff = c[q];
      m.exps = {{b.p.find_variable(diag_var(l - 1, q)), up_exp}};
      b.p.objective.add_term(std::move(m));
    }
  }

  b.add_anchors_and_bounds(options.anchors, options.bounds);
  b.p.validate();
  return b.p;
}

}  // namespace

GpProblem build_frobenius_gp(const PolyNetwork& net, double mu, const RegGpOptions& options) {
  return build_norm_gp(net, mu, options, true);
}

GpProblem build_l1_gp(const PolyNetwork& net, double mu, const RegGpOptions& options) {
  return build_norm_gp(net, mu, options, false);
}

GpProblem build_range_gp(const PolyNetwork& net, const RangeGpOptions& options) {
  BuilderBase b(net, "range gp");
  const int depth = b.depth;
  const double tol = options.zero_tolerance;

  // Scale factor of each stored parameter as a sparse exponent list over the
  // diagonal variables; empty for last-layer biases (diagonal-independent).
  auto weight_exps = [&](int layer, int out, int degree, int in) {
    std::vector<std::pair<int, double>> e;
    if (layer > 1) e.emplace_back(b.p.find_variable(diag_var(layer - 1, in)), -1.0);
    if (layer < depth)
      e.emplace_back(b.p.find_variable(diag_var(layer, out)), 1.0 / (b.alpha(layer) * degree));
    return e;
  };
  auto bias_exps = [&](int layer, int out, int degree) {
    std::vector<std::pair<int, double>> e;
    if (layer < depth)
      e.emplace_back(b.p.find_variable(diag_var(layer, out)), 1.0 / (b.alpha(layer) * degree));
    return e;
  };

  // Sign sets per layer decide which span variables exist.
  std::vector<int> sp_var(depth + 1, -1), sn_var(depth + 1, -1);
  for (int l = 1; l <= depth; ++l) {
    bool any_pos = false, any_neg = false;
    for (const auto& output : net.poly_layers[l - 1].outputs)
      for (const AffineTerm& t : output) {
        for (double w : t.w) {
          any_pos |= w > tol;
          any_neg |= w < -tol;
        }
        any_pos |= t.b > tol;
        any_neg |= t.b < -tol;
      }
    if (any_pos) sp_var[l] = b.p.add_variable({GpVariable::Kind::SpanPos, l, 0});
    if (any_neg) sn_var[l] = b.p.add_variable({GpVariable::Kind::SpanNeg, l, 0});
  }
  const int t_var = b.p.add_variable({GpVariable::Kind::Epigraph, 0, 0});

  // One constraint per retained parameter: |a| * Phi / s <= 1.
  auto add_span_constraint = [&](double value, std::vector<std::pair<int, double>> exps, int layer) {
    if (std::fabs(value) <= tol) return;
    MonomialTerm m;
    m.coeff = std::fabs(value);
    m.exps = std::move(exps);
    m.exps.emplace_back(value > 0.0 ? sp_var[layer] : sn_var[layer], -1.0);
    Posynomial g;
    g.add_term(std::move(m));
    b.p.ineq.push_back(std::move(g));
  };
  for (int l = 1; l <= depth; ++l)
    for (int j = 0; j < net.dims[l]; ++j)
      for (const AffineTerm& t : net.poly_layers[l - 1].outputs[j]) {
        for (int q = 0; q < net.dims[l - 1]; ++q)
          add_span_constraint(t.w[q], weight_exps(l, j, t.degree, q), l);
        add_span_constraint(t.b, bias_exps(l, j, t.degree), l);
      }

  // Couple the spans to t.
  if (options.coupling == SpanCoupling::Total) {
    Posynomial g;
    for (int l = 1; l <= depth; ++l)
      for (int v : {sp_var[l], sn_var[l]}) {
        if (v < 0) continue;
        MonomialTerm m;
        m.exps = {{v, 1.0}, {t_var, -1.0}};
        g.add_term(std::move(m));
      }
    if (!g.empty()) b.p.ineq.push_back(std::move(g));
  } else {
    for (int l = 1; l <= depth; ++l) {
      Posynomial g;
      for (int v : {sp_var[l], sn_var[l]}) {
        if (v < 0) continue;
        MonomialTerm m;
        m.exps = {{v, 1.0}, {t_var, -1.0}};
        g.add_term(std::move(m));
      }
      if (!g.empty()) b.p.ineq.push_back(std::move(g));
    }
  }

  MonomialTerm obj;
  obj.exps = {{t_var, 1.0}};
  b.p.objective.add_term(std::move(obj));
  b.add_anchors_and_bounds(options.anchors, options.bounds);
  b.p.validate();
  return b.p;
}

InvarianceElement element_from_solution(const PolyNetwork& net, const GpSolution& sol) {
  InvarianceElement g = InvarianceElement::identity(net.dims);
  for (int l = 1; l < net.depth(); ++l)
    for (int i = 0; i < net.dims[l]; ++i)
      g.interfaces[l - 1].diag[i] = sol.value_of(diag_var(l, i));
  return g;
}

PolyNetwork apply_gp_solution(const PolyNetwork& net, const GpSolution& sol) {
  return apply(net, element_from_solution(net, sol));
}

double measure_regularizer(const PolyNetwork& net, RegKind kind, double mu) {
  double total = 0.0;
  for (const PolyLayer& layer : net.poly_layers)
    for (const auto& output : layer.outputs)
      for (const AffineTerm& t : output) {
        if (kind == RegKind::Frobenius) {
          for (double w : t.w) total += w * w;
          total += mu * t.b * t.b;
        } else {
          for (double w : t.w) total += std::fabs(w);
          total += mu * std::fabs(t.b);
        }
      }
  return total;
}

std::vector<LayerSpan> measure_layer_spans(const PolyNetwork& net, double zero_tolerance) {
  std::vector<LayerSpan> spans(net.poly_layers.size());
  for (size_t l = 0; l < net.poly_layers.size(); ++l) {
    auto consider = [&](double v) {
      if (v > zero_tolerance) spans[l].pos = std::max(spans[l].pos, v);
      if (v < -zero_tolerance) spans[l].neg = std::max(spans[l].neg, -v);
    };
    for (const auto& output : net.poly_layers[l].outputs)
      for (const AffineTerm& t : output) {
        for (double w : t.w) consider(w);
        consider(t.b);
      }
  }
  return spans;
}

std::pair<PolyNetwork, QuantizationReport> quantize_uniform(const PolyNetwork& net, int bits,
                                                            bool per_layer) {
  if (bits < 2 || bits > 16) fail_invalid("quantize_uniform: bits must lie in [2,16], got ", bits);
  validate(net);
  const int n_layers = static_cast<int>(net.poly_layers.size());
  Vector scale(n_layers, 0.0);
  for (int l = 0; l < n_layers; ++l)
    for (const auto& output : net.poly_layers[l].outputs)
      for (const AffineTerm& t : output) {
        for (double w : t.w) scale[l] = std::max(scale[l], std::fabs(w));
        scale[l] = std::max(scale[l], std::fabs(t.b));
      }
  if (!per_layer) {
    const double m = *std::max_element(scale.begin(), scale.end());
    scale.assign(n_layers, m);
  }

  const double levels = std::pow(2.0, bits) - 1.0;
  PolyNetwork out = net;
  QuantizationReport report;
  report.steps.assign(n_layers, 0.0);
  for (int l = 0; l < n_layers; ++l) {
    if (scale[l] <= 0.0) continue;  // all-zero scope stays untouched
    const double m = scale[l];
    const double step = 2.0 * m / levels;
    report.steps[l] = step;
    auto q = [&](double x) {
      double v = -m + std::round((x + m) / step) * step;
      v = std::clamp(v, -m, m);
      report.max_error = std::max(report.max_error, std::fabs(x - v));
      return v;
    };
    for (auto& output : out.poly_layers[l].outputs)
      for (AffineTerm& t : output) {
        for (double& w : t.w) w = q(w);
        t.b = q(t.b);
      }
  }
  return {std::move(out), std::move(report)};
}

}  // namespace polyinv
