#include "polyinv/invariance.hpp"

#include <algorithm>
#include <cmath>

namespace polyinv {

InterfaceTransform InterfaceTransform::identity(int n) {
  InterfaceTransform t;
  t.perm.resize(n);
  for (int i = 0; i < n; ++i) t.perm[i] = i;
  t.diag.assign(n, 1.0);
  t.polarity.assign(n, 1);
  return t;
}

void InterfaceTransform::validate() const {
  if (diag.size() != perm.size() || polarity.size() != perm.size())
    fail_invalid("interface transform: perm/diag/polarity lengths differ");
  if (!is_permutation(perm)) fail_invalid("interface transform: perm is not a permutation");
  for (double d : diag)
    if (!(d > 0.0) || !is_finite(d)) fail_invalid("interface transform: diag entries must be positive and finite");
  for (int s : polarity)
    if (s != 1 && s != -1) fail_invalid("interface transform: polarity entries must be +-1");
}

InputTransform InputTransform::identity(int n) {
  InputTransform t;
  t.S0 = Matrix::identity(n);
  t.A0 = Matrix::identity(n);
  return t;
}

InputTransform InputTransform::from_matrix(const Matrix& s0) {
  if (s0.rows != s0.cols) fail_invalid("input transform: S0 must be square");
  LuFactor f = lu_factor(s0);  // throws on singular
  Matrix a0 = lu_inverse(f);
  const double cond = norm_inf(s0) * norm_inf(a0);
  if (!(cond <= 1e8))
    fail_numeric("input transform: condition number ", cond, " exceeds 1e8");
  Matrix residual = matmul(s0, a0) - Matrix::identity(s0.rows);
  const double res = max_abs(residual);
  if (!(res <= 1e-8))
    fail_numeric("input transform: inverse residual ", res, " exceeds 1e-8");
  InputTransform t;
  t.S0 = s0;
  t.A0 = std::move(a0);
  return t;
}

bool InputTransform::is_identity() const {
  if (S0.rows != S0.cols) return false;
  for (int i = 0; i < S0.rows; ++i)
    for (int j = 0; j < S0.cols; ++j)
      if (S0(i, j) != (i == j ? 1.0 : 0.0)) return false;
  return true;
}

InvarianceElement InvarianceElement::identity(const std::vector<int>& dims) {
  if (dims.size() < 2) fail_invalid("identity element: dims must list d_0..d_L");
  InvarianceElement g;
  g.input = InputTransform::identity(dims.front());
  for (size_t l = 1; l + 1 < dims.size(); ++l)
    g.interfaces.push_back(InterfaceTransform::identity(dims[l]));
  return g;
}

namespace {

void check_compatible(const PolyNetwork& net, const InvarianceElement& g) {
  validate(net);
  if (g.input.dim() != net.input_dim())
    fail_invalid("apply: input transform dim ", g.input.dim(), ", network expects ", net.input_dim());
  const int n_interfaces = net.depth() - 1;
  if (static_cast<int>(g.interfaces.size()) != n_interfaces)
    fail_invalid("apply: element has ", g.interfaces.size(), " interface transforms, network has ",
                 n_interfaces);
  for (int t = 0; t < n_interfaces; ++t) {
    g.interfaces[t].validate();
    if (g.interfaces[t].size() != net.dims[t + 1])
      fail_invalid("apply: interface ", t + 1, " size ", g.interfaces[t].size(), ", expected ",
                   net.dims[t + 1]);
  }
}

// Scales term parameters by s^(1/degree) where s = diag^(1/alpha), and flips
// the sign slot.  Degree-0 terms reject any non-identity scale: a scaled
// constant is not representable.
void absorb_output_transform(AffineTerm& term, double diag, int flip, double alpha,
                             int layer_index, int output_index) {
  if (diag != 1.0) {
    if (term.degree == 0)
      fail_invalid("apply: poly layer ", layer_index, " output ", output_index,
                   ": degree-0 term cannot absorb an output scaling");
    const double scale = std::pow(diag, 1.0 / (alpha * term.degree));
    if (!is_finite(scale) || !(scale > 0.0))
      fail_numeric("apply: poly layer ", layer_index, " output ", output_index,
                   ": non-finite absorption scale");
    for (double& w : term.w) w *= scale;
    term.b *= scale;
  }
  term.sign *= flip;
}

}  // namespace

PolyNetwork apply(const PolyNetwork& net, const InvarianceElement& g) {
  check_compatible(net, g);
  PolyNetwork out = net;

  // Input side: P_1 becomes P_1 . S0^-1, i.e. every first-layer weight vector
  // picks up A0^T (biases unchanged).
  if (!g.input.is_identity()) {
    const Matrix& a0 = g.input.A0;
    for (auto& terms : out.poly_layers[0].outputs) {
      for (AffineTerm& t : terms) {
        Vector w(t.w.size(), 0.0);
        for (size_t i = 0; i < w.size(); ++i) {
          double s = 0.0;
          for (size_t j = 0; j < w.size(); ++j) s += a0(static_cast<int>(j), static_cast<int>(i)) * t.w[j];
          w[i] = s;
        }
        t.w = std::move(w);
      }
    }
  }

  const int n_interfaces = net.depth() - 1;
  for (int t = 0; t < n_interfaces; ++t) {
    const InterfaceTransform& tr = g.interfaces[t];
    const double alpha = out.monomial_layers[t].alpha;
    const int n = tr.size();

    // Outputs of P_{t+1}: new list i comes from source perm[i], scaled and
    // sign-flipped by the source-aligned diag/polarity.
    {
      std::vector<std::vector<AffineTerm>> new_outputs(n);
      for (int i = 0; i < n; ++i) {
        const int src = tr.perm[i];
        new_outputs[i] = out.poly_layers[t].outputs[src];
        for (AffineTerm& term : new_outputs[i])
          absorb_output_transform(term, tr.diag[src], tr.polarity[src], alpha, t + 1, i);
      }
      out.poly_layers[t].outputs = std::move(new_outputs);
    }

    // Monomial mask: permuted, and it swallows the inserted sign so the
    // rectified value is a positive multiple of the original.
    {
      std::vector<int> new_pol(n);
      for (int i = 0; i < n; ++i) {
        const int src = tr.perm[i];
        new_pol[i] = tr.polarity[src] * out.monomial_layers[t].polarity[src];
      }
      out.monomial_layers[t].polarity = std::move(new_pol);
    }

    // Downstream compensation: post-activation coordinate i now carries
    // diag[src] * (old value at src), so P_{t+2}'s incoming weights divide by
    // the source diag and follow the permutation.  No sign appears here.
    for (auto& terms : out.poly_layers[t + 1].outputs) {
      for (AffineTerm& term : terms) {
        Vector w(n);
        for (int i = 0; i < n; ++i) {
          const int src = tr.perm[i];
          w[i] = term.w[src] / tr.diag[src];
        }
        term.w = std::move(w);
      }
    }
  }
  return out;
}

InvarianceElement compose(const InvarianceElement& g1, const InvarianceElement& g2) {
  if (g1.interfaces.size() != g2.interfaces.size())
    fail_invalid("compose: elements have different interface counts");
  if (g1.input.dim() != g2.input.dim()) fail_invalid("compose: input dims differ");

  InvarianceElement g;
  // Input maps stack as x -> S0_2 (S0_1 x).
  Matrix s0 = matmul(g2.input.S0, g1.input.S0);
  Matrix a0 = matmul(g1.input.A0, g2.input.A0);
  const double res = max_abs(matmul(s0, a0) - Matrix::identity(s0.rows));
  if (!(res <= 1e-8)) fail_numeric("compose: composed inverse residual ", res, " exceeds 1e-8");
  g.input.S0 = std::move(s0);
  g.input.A0 = std::move(a0);

  for (size_t t = 0; t < g1.interfaces.size(); ++t) {
    const InterfaceTransform& a = g1.interfaces[t];
    const InterfaceTransform& b = g2.interfaces[t];
    if (a.size() != b.size()) fail_invalid("compose: interface ", t + 1, " sizes differ");
    a.validate();
    b.validate();
    const int n = a.size();
    InterfaceTransform c;
    c.perm.resize(n);
    c.diag.resize(n);
    c.polarity.resize(n);
    const std::vector<int> inv_a = inverse_permutation(a.perm);
    for (int i = 0; i < n; ++i) c.perm[i] = a.perm[b.perm[i]];
    // Source-aligned data: coordinate p is first scaled by a at p, then by b
    // at p's position after a's reordering, which is inv_a[p].
    for (int p = 0; p < n; ++p) {
      c.diag[p] = a.diag[p] * b.diag[inv_a[p]];
      c.polarity[p] = a.polarity[p] * b.polarity[inv_a[p]];
    }
    g.interfaces.push_back(std::move(c));
  }
  return g;
}

InvarianceElement inverse(const InvarianceElement& g) {
  InvarianceElement inv;
  inv.input.S0 = g.input.A0;
  inv.input.A0 = g.input.S0;
  for (const InterfaceTransform& tr : g.interfaces) {
    tr.validate();
    const int n = tr.size();
    InterfaceTransform it;
    it.perm = inverse_permutation(tr.perm);
    it.diag.resize(n);
    it.polarity.resize(n);
    for (int q = 0; q < n; ++q) {
      it.diag[q] = 1.0 / tr.diag[tr.perm[q]];
      it.polarity[q] = tr.polarity[tr.perm[q]];
    }
    inv.interfaces.push_back(std::move(it));
  }
  return inv;
}

namespace {

EquivalenceReport run_equivalence(const PolyNetwork& net_a, const PolyNetwork& net_b,
                                  const Matrix* s0, int n_samples, const Box& box, double tol,
                                  std::uint64_t seed) {
  if (net_a.input_dim() != net_b.input_dim() || net_a.output_dim() != net_b.output_dim())
    fail_invalid("verify_equivalence: networks disagree on input/output dims");
  if (n_samples <= 0) fail_invalid("verify_equivalence: n_samples must be positive");
  if (!(box.lo < box.hi)) fail_invalid("verify_equivalence: empty sample box");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(box.lo, box.hi);
  EquivalenceReport rep;
  rep.n_samples = n_samples;
  Vector x(net_a.input_dim());
  for (int s = 0; s < n_samples; ++s) {
    for (double& v : x) v = dist(rng);
    const Vector ya = evaluate(net_a, x);
    const Vector yb = s0 ? evaluate(net_b, matvec(*s0, x)) : evaluate(net_b, x);
    for (size_t j = 0; j < ya.size(); ++j) {
      rep.max_abs_err = std::max(rep.max_abs_err, std::fabs(ya[j] - yb[j]));
      rep.max_rel_err = std::max(rep.max_rel_err, rel_diff(ya[j], yb[j]));
    }
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

}  // namespace

EquivalenceReport verify_equivalence(const PolyNetwork& net_a, const PolyNetwork& net_b,
                                     int n_samples, const Box& box, double tol,
                                     std::uint64_t seed) {
  return run_equivalence(net_a, net_b, nullptr, n_samples, box, tol, seed);
}

EquivalenceReport verify_equivalence_mapped(const PolyNetwork& net_a, const PolyNetwork& net_b,
                                            const Matrix& s0, int n_samples, const Box& box,
                                            double tol, std::uint64_t seed) {
  return run_equivalence(net_a, net_b, &s0, n_samples, box, tol, seed);
}

InvarianceElement random_element(const std::vector<int>& dims, const std::vector<double>& alphas,
                                 std::uint64_t seed, const RandomElementOptions& options) {
  if (dims.size() < 2) fail_invalid("random_element: dims must list d_0..d_L");
  if (alphas.size() + 2 != dims.size())
    fail_invalid("random_element: expected ", dims.size() - 2, " alphas, got ", alphas.size());
  for (double a : alphas)
    if (!(a > 0.0)) fail_invalid("random_element: alphas must be positive");
  if (!(options.diag_range.first > 0.0) || !(options.diag_range.second >= options.diag_range.first))
    fail_invalid("random_element: invalid diag_range");

  std::mt19937_64 rng(seed);
  InvarianceElement g;

  if (options.general_linear_input) {
    const int d0 = dims.front();
    for (int attempt = 0;; ++attempt) {
      Matrix s0 = random_gaussian(d0, d0, rng);
      double cond = 0.0;
      try {
        cond = cond_inf(s0);
      } catch (const std::runtime_error&) {
        continue;  // singular draw, resample
      }
      if (cond <= 1e3) {
        g.input = InputTransform::from_matrix(s0);
        break;
      }
      if (attempt > 256) fail_numeric("random_element: could not draw a well-conditioned S0");
    }
  } else {
    g.input = InputTransform::identity(dims.front());
  }

  std::uniform_real_distribution<double> log_diag(std::log(options.diag_range.first),
                                                  std::log(options.diag_range.second));
  std::uniform_int_distribution<int> coin(0, 1);
  for (size_t l = 1; l + 1 < dims.size(); ++l) {
    InterfaceTransform tr = InterfaceTransform::identity(dims[l]);
    if (options.allow_permutation) std::shuffle(tr.perm.begin(), tr.perm.end(), rng);
    for (double& d : tr.diag) d = std::exp(log_diag(rng));
    if (options.allow_polarity)
      for (int& s : tr.polarity) s = coin(rng) ? 1 : -1;
    g.interfaces.push_back(std::move(tr));
  }
  return g;
}

}  // namespace polyinv
