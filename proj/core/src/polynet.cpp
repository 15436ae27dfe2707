#include "polyinv/polynet.hpp"

namespace polyinv {

void validate(const PolyNetwork& net) {
  const int L = net.depth();
  if (L == 0) fail_invalid("network: no polynomial layers");
  if (static_cast<int>(net.dims.size()) != L + 1)
    fail_invalid("network: dims has ", net.dims.size(), " entries, expected ", L + 1);
  if (static_cast<int>(net.monomial_layers.size()) != L - 1)
    fail_invalid("network: ", net.monomial_layers.size(), " monomial layers, expected ", L - 1);
  for (int d : net.dims)
    if (d <= 0) fail_invalid("network: non-positive width in dims");

  for (int l = 0; l < L; ++l) {
    const PolyLayer& p = net.poly_layers[l];
    if (p.input_dim != net.dims[l] || p.output_dim != net.dims[l + 1])
      fail_invalid("poly layer ", l + 1, ": dims ", p.input_dim, "->", p.output_dim,
                   ", expected ", net.dims[l], "->", net.dims[l + 1]);
    if (static_cast<int>(p.outputs.size()) != p.output_dim)
      fail_invalid("poly layer ", l + 1, ": ", p.outputs.size(), " output term lists, expected ",
                   p.output_dim);
    for (int j = 0; j < p.output_dim; ++j) {
      if (p.outputs[j].empty())
        fail_invalid("poly layer ", l + 1, " output ", j, ": empty term list");
      for (size_t k = 0; k < p.outputs[j].size(); ++k) {
        const AffineTerm& t = p.outputs[j][k];
        if (static_cast<int>(t.w.size()) != p.input_dim)
          fail_invalid("poly layer ", l + 1, " output ", j, " term ", k, ": weight length ",
                       t.w.size(), ", expected ", p.input_dim);
        if (t.degree < 0)
          fail_invalid("poly layer ", l + 1, " output ", j, " term ", k, ": negative degree");
        if (t.sign != 1 && t.sign != -1)
          fail_invalid("poly layer ", l + 1, " output ", j, " term ", k, ": sign must be +-1");
        if (!is_finite(t.b)) fail_invalid("poly layer ", l + 1, " output ", j, " term ", k, ": non-finite bias");
        for (double w : t.w)
          if (!is_finite(w))
            fail_invalid("poly layer ", l + 1, " output ", j, " term ", k, ": non-finite weight");
      }
    }
  }
  for (int l = 0; l + 1 < L; ++l) {
    const MonomialLayer& m = net.monomial_layers[l];
    if (m.dim != net.dims[l + 1])
      fail_invalid("monomial layer ", l + 1, ": dim ", m.dim, ", expected ", net.dims[l + 1]);
    if (!(m.alpha > 0.0) || !is_finite(m.alpha))
      fail_invalid("monomial layer ", l + 1, ": alpha must be positive and finite");
    if (static_cast<int>(m.polarity.size()) != m.dim)
      fail_invalid("monomial layer ", l + 1, ": polarity length ", m.polarity.size(), ", expected ", m.dim);
    for (int s : m.polarity)
      if (s != 1 && s != -1) fail_invalid("monomial layer ", l + 1, ": polarity entries must be +-1");
  }
}

namespace {

Vector eval_poly_layer(const PolyLayer& p, const Vector& z, int layer_index) {
  if (static_cast<int>(z.size()) != p.input_dim)
    fail_invalid("poly layer ", layer_index, ": expected input dim ", p.input_dim, ", got ", z.size());
  Vector out(p.output_dim, 0.0);
  for (int j = 0; j < p.output_dim; ++j) {
    double acc = 0.0;
    for (const AffineTerm& t : p.outputs[j]) {
      double u = t.b;
      for (int i = 0; i < p.input_dim; ++i) u += t.w[i] * z[i];
      acc += t.sign * int_pow(u, t.degree);
    }
    out[j] = acc;
  }
  return out;
}

Vector eval_monomial_layer(const MonomialLayer& m, const Vector& z) {
  Vector out(m.dim);
  for (int i = 0; i < m.dim; ++i) out[i] = rectified_pow(m.polarity[i] * z[i], m.alpha);
  return out;
}

}  // namespace

Vector evaluate(const PolyNetwork& net, const Vector& x, EvalTrace* trace) {
  if (static_cast<int>(x.size()) != net.input_dim())
    fail_invalid("evaluate: expected input dim ", net.input_dim(), ", got ", x.size());
  Vector z = x;
  const int L = net.depth();
  for (int l = 0; l < L; ++l) {
    z = eval_poly_layer(net.poly_layers[l], z, l + 1);
    if (trace) trace->pre_activation.push_back(z);
    if (l + 1 < L) {
      z = eval_monomial_layer(net.monomial_layers[l], z);
      if (trace) trace->post_activation.push_back(z);
    }
  }
  return z;
}

PolyNetwork make_linear_identity(int dim) {
  PolyNetwork net;
  net.dims = {dim, dim};
  PolyLayer p;
  p.input_dim = dim;
  p.output_dim = dim;
  p.outputs.resize(dim);
  for (int j = 0; j < dim; ++j) {
    AffineTerm t;
    t.w.assign(dim, 0.0);
    t.w[j] = 1.0;
    t.degree = 1;
    p.outputs[j].push_back(t);
  }
  net.poly_layers.push_back(std::move(p));
  return net;
}

}  // namespace polyinv
