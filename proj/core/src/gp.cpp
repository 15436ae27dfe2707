#include "polyinv/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "polyinv/linalg.hpp"

namespace polyinv {

std::string GpVariable::name() const {
  switch (kind) {
    case Kind::Diag:
      return concat("d[", layer, "][", index, "]");
    case Kind::SpanPos:
      return concat("sp[", layer, "]");
    case Kind::SpanNeg:
      return concat("sn[", layer, "]");
    case Kind::Epigraph:
      return "t";
  }
  return "?";
}

void MonomialTerm::normalize() {
  std::sort(exps.begin(), exps.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<int, double>> merged;
  for (const auto& [var, e] : exps) {
    if (!merged.empty() && merged.back().first == var)
      merged.back().second += e;
    else
      merged.emplace_back(var, e);
  }
  std::erase_if(merged, [](const auto& p) { return p.second == 0.0; });
  exps = std::move(merged);
}

MonomialTerm& MonomialTerm::mul(const MonomialTerm& o) {
  coeff *= o.coeff;
  exps.insert(exps.end(), o.exps.begin(), o.exps.end());
  normalize();
  return *this;
}

MonomialTerm MonomialTerm::pow(double e) const {
  MonomialTerm r;
  r.coeff = std::pow(coeff, e);
  r.exps = exps;
  for (auto& [var, ex] : r.exps) ex *= e;
  return r;
}

void Posynomial::add_term(MonomialTerm t) {
  if (t.coeff < 0.0) fail_invalid("posynomial: negative coefficient ", t.coeff);
  if (!is_finite(t.coeff)) fail_invalid("posynomial: non-finite coefficient");
  if (t.coeff == 0.0) return;
  t.normalize();
  terms.push_back(std::move(t));
}

Posynomial& Posynomial::operator+=(const Posynomial& o) {
  for (const MonomialTerm& t : o.terms) add_term(t);
  return *this;
}

Posynomial operator*(const Posynomial& a, const Posynomial& b) {
  Posynomial r;
  for (const MonomialTerm& ta : a.terms)
    for (const MonomialTerm& tb : b.terms) {
      MonomialTerm t = ta;
      t.mul(tb);
      r.add_term(std::move(t));
    }
  return r;
}

Posynomial operator*(const Posynomial& a, const MonomialTerm& m) {
  Posynomial r;
  for (const MonomialTerm& ta : a.terms) {
    MonomialTerm t = ta;
    t.mul(m);
    r.add_term(std::move(t));
  }
  return r;
}

double eval_monomial(const MonomialTerm& m, const Vector& v) {
  double r = m.coeff;
  for (const auto& [var, e] : m.exps) r *= std::pow(v[var], e);
  return r;
}

double eval_posynomial(const Posynomial& p, const Vector& v) {
  double s = 0.0;
  for (const MonomialTerm& t : p.terms) s += eval_monomial(t, v);
  return s;
}

double eval_posynomial_log(const Posynomial& p, const Vector& u) {
  double s = 0.0;
  for (const MonomialTerm& t : p.terms) {
    double e = std::log(t.coeff);
    for (const auto& [var, ex] : t.exps) e += ex * u[var];
    s += std::exp(e);
  }
  return s;
}

int GpProblem::add_variable(const GpVariable& v) {
  const int existing = find_variable(v);
  if (existing >= 0) return existing;
  vars.push_back(v);
  bounds.emplace_back();
  return static_cast<int>(vars.size()) - 1;
}

int GpProblem::find_variable(const GpVariable& v) const {
  for (size_t i = 0; i < vars.size(); ++i)
    if (vars[i] == v) return static_cast<int>(i);
  return -1;
}

void GpProblem::set_bounds(int var, double lo, double hi) {
  if (var < 0 || var >= static_cast<int>(vars.size())) fail_invalid("set_bounds: bad variable id");
  if (!(lo > 0.0) || !(hi >= lo)) fail_invalid("set_bounds: need 0 < lo <= hi");
  bounds[var] = std::make_pair(lo, hi);
}

namespace {

void check_term_vars(const MonomialTerm& t, int n, const char* where) {
  for (const auto& [var, e] : t.exps) {
    if (var < 0 || var >= n) fail_invalid(where, ": term references unknown variable ", var);
    if (!std::isfinite(e)) fail_invalid(where, ": non-finite exponent");
  }
}

}  // namespace

void GpProblem::validate() const {
  const int n = static_cast<int>(vars.size());
  if (bounds.size() != vars.size()) fail_invalid("gp problem: bounds not aligned with vars");
  for (const MonomialTerm& t : objective.terms) {
    if (!(t.coeff > 0.0)) fail_invalid("gp objective: non-positive coefficient");
    check_term_vars(t, n, "gp objective");
  }
  for (const Posynomial& p : ineq) {
    if (p.empty()) fail_invalid("gp inequality: empty posynomial");
    for (const MonomialTerm& t : p.terms) {
      if (!(t.coeff > 0.0)) fail_invalid("gp inequality: non-positive coefficient");
      check_term_vars(t, n, "gp inequality");
    }
  }
  for (const MonomialTerm& t : eq) {
    if (!(t.coeff > 0.0)) fail_invalid("gp equality: non-positive coefficient");
    check_term_vars(t, n, "gp equality");
  }
  for (const auto& b : bounds)
    if (b && (!(b->first > 0.0) || !(b->second >= b->first)))
      fail_invalid("gp bounds: need 0 < lo <= hi");
  if (!is_finite(constant_offset)) fail_invalid("gp problem: non-finite constant offset");
}

double GpSolution::value_of(const GpVariable& v) const {
  for (size_t i = 0; i < vars.size(); ++i)
    if (vars[i] == v) return values[i];
  fail_invalid("gp solution: variable ", v.name(), " not present");
}

namespace {

constexpr double kExpCap = 700.0;  // exp() overflow guard

// One monomial in log coordinates: value = exp(logc + a . y).
struct ExpTerm {
  double logc = 0.0;
  Vector a;
};

struct LogModel {
  int dim = 0;
  std::vector<ExpTerm> obj;
  std::vector<std::vector<ExpTerm>> cons;  // each group: sum of terms <= 1
};

double eval_group(const std::vector<ExpTerm>& terms, const Vector& y) {
  double s = 0.0;
  for (const ExpTerm& t : terms) {
    double e = t.logc;
    for (int i = 0; i < static_cast<int>(y.size()); ++i) e += t.a[i] * y[i];
    if (e > kExpCap) return std::numeric_limits<double>::infinity();
    s += std::exp(e);
  }
  return s;
}

// Accumulates value, gradient and Hessian of sum(exp(logc + a.y)).
double group_derivatives(const std::vector<ExpTerm>& terms, const Vector& y, Vector& grad,
                         Matrix& hess) {
  const int n = static_cast<int>(y.size());
  grad.assign(n, 0.0);
  hess = Matrix(n, n);
  double s = 0.0;
  for (const ExpTerm& t : terms) {
    double e = t.logc;
    for (int i = 0; i < n; ++i) e += t.a[i] * y[i];
    if (e > kExpCap) return std::numeric_limits<double>::infinity();
    const double v = std::exp(e);
    s += v;
    for (int i = 0; i < n; ++i) {
      if (t.a[i] == 0.0) continue;
      grad[i] += v * t.a[i];
      for (int j = 0; j <= i; ++j) hess(i, j) += v * t.a[i] * t.a[j];
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) hess(i, j) = hess(j, i);
  return s;
}

// t * objective + barrier.  +inf when infeasible or overflowing.
// Stage objective F(y) + (1/t) * sum_i -log(-log g_i(y)).  Dividing the
// barrier by t (instead of multiplying F) keeps f at the scale of F, so line
// searches retain full double resolution even at t ~ 1e10.
double barrier_value(const LogModel& m, const Vector& y, double t) {
  double f = eval_group(m.obj, y);
  if (!std::isfinite(f)) return std::numeric_limits<double>::infinity();
  for (const auto& g : m.cons) {
    const double gv = eval_group(g, y);
    if (!std::isfinite(gv) || gv >= 1.0) return std::numeric_limits<double>::infinity();
    f -= std::log(-std::log(gv)) / t;
  }
  return f;
}

struct NewtonResult {
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
};

// Damped Newton on y |-> F(y) + (1/t) sum_i -log(-log g_i(y)).  Assumes y is
// strictly feasible on entry.  stop_below, when finite, aborts early once the
// raw objective F drops under it (used by the feasibility phase).
NewtonResult newton_minimize(const LogModel& m, Vector& y, double t, double grad_tol,
                             int iter_budget, double stop_below, std::ostream* trace) {
  const int n = m.dim;
  NewtonResult res;
  Vector grad(n), gg(n);
  Matrix hess(n, n), hg(n, n);
  int forced_steps = 0;
  double best_f = std::numeric_limits<double>::infinity();
  int stall = 0;
  // Near the floating-point floor the residual bounces; hand back the
  // best-centered iterate seen instead of whichever one the bounce ended on.
  Vector y_best;
  double gnorm_best = std::numeric_limits<double>::infinity();
  auto finish_stage = [&]() -> NewtonResult& {
    if (!y_best.empty() && gnorm_best < res.grad_norm) {
      y = y_best;
      res.grad_norm = gnorm_best;
    }
    return res;
  };

  for (res.iterations = 0; res.iterations < iter_budget; ++res.iterations) {
    const double fobj = group_derivatives(m.obj, y, gg, hg);
    if (std::isfinite(stop_below) && fobj < stop_below) {
      res.converged = true;
      return res;
    }
    double f = fobj;
    grad.assign(n, 0.0);
    hess = Matrix(n, n);
    for (int i = 0; i < n; ++i) {
      grad[i] = gg[i];
      for (int j = 0; j < n; ++j) hess(i, j) = hg(i, j);
    }
    bool bad = !std::isfinite(f);
    const double inv_t = 1.0 / t;
    for (const auto& g : m.cons) {
      if (bad) break;
      const double gv = group_derivatives(g, y, gg, hg);
      if (!std::isfinite(gv) || gv >= 1.0) {
        bad = true;
        break;
      }
      const double h = std::log(gv);  // h < 0 strictly feasible
      f -= std::log(-h) * inv_t;
      // phi = -log(-h)/t, h = log g: grad phi = -(1/(t h)) * gradg/g,
      // hess phi = (1/t) ((1/h^2) gradh gradh^T - (1/h) hess h).
      const double inv_g = 1.0 / gv;
      for (int i = 0; i < n; ++i) gg[i] *= inv_g;  // now grad h
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double hess_h = hg(i, j) * inv_g - gg[i] * gg[j];
          hess(i, j) += (gg[i] * gg[j] / (h * h) - hess_h / h) * inv_t;
        }
      for (int i = 0; i < n; ++i) grad[i] += -gg[i] / h * inv_t;
    }
    if (bad) fail_numeric("gp solver: iterate left the feasible region");

    double gnorm = 0.0;
    for (double v : grad) gnorm += v * v;
    gnorm = std::sqrt(gnorm);
    res.grad_norm = gnorm;
    if (gnorm < gnorm_best) {
      gnorm_best = gnorm;
      y_best = y;
    }
    if (trace)
      *trace << "  newton iter=" << res.iterations << " f=" << f << " |g|=" << gnorm << "\n";
    if (gnorm <= grad_tol) {
      res.converged = true;
      return res;
    }
    // Accepted steps keep f (nearly) non-increasing, so lack of decrease
    // beyond a few ulps of f over several iterations means the floating-point
    // floor was reached (uncertified polish steps included): end the stage.
    if (f < best_f - 1e-15 * std::max(1.0, std::fabs(f))) {
      best_f = f;
      stall = 0;
    } else if (++stall >= 12) {
      if (trace) *trace << "  [stage end: f stalled]\n";
      return finish_stage();
    }

    // Jacobi-scaled Newton system: with s_i = 1/sqrt(H_ii) solve
    // (S H S + ridge I) z = -S g, step = S z.  Equalizing the diagonal keeps
    // the factorization usable when barrier curvatures spread over many
    // decades (H_ii ranges from ~1 to ~t^2 near the end of the path).
    double maxdiag = 0.0;
    for (int i = 0; i < n; ++i) maxdiag = std::max(maxdiag, hess(i, i));
    Vector scale(n);
    for (int i = 0; i < n; ++i)
      scale[i] = 1.0 / std::sqrt(std::max({hess(i, i), 1e-12 * maxdiag, 1e-300}));
    double ridge = 0.0;
    Vector step;
    for (;;) {
      Matrix h2(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) h2(i, j) = hess(i, j) * scale[i] * scale[j];
      for (int i = 0; i < n; ++i) h2(i, i) += ridge;
      Matrix chol = h2;
      if (cholesky_factor(chol)) {
        Vector rhs(n);
        for (int i = 0; i < n; ++i) rhs[i] = -grad[i] * scale[i];
        step = cholesky_solve(chol, rhs);
        for (int i = 0; i < n; ++i) step[i] *= scale[i];
        break;
      }
      ridge = ridge == 0.0 ? 1e-12 : ridge * 100.0;
      if (ridge > 1e6) fail_numeric("gp solver: could not stabilize the Newton system");
    }

    double slope = 0.0;
    for (int i = 0; i < n; ++i) slope += grad[i] * step[i];
    if (slope > 0.0)
      for (int i = 0; i < n; ++i) step[i] = -grad[i];  // fall back to steepest descent

    double alpha = 1.0;
    Vector trial(n);
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (int i = 0; i < n; ++i) trial[i] = y[i] + alpha * step[i];
      const double ftrial = barrier_value(m, trial, t);
      // Strict decrease required: once improvements fall under the double
      // resolution of f, the iterate has hit the achievable accuracy and the
      // stage must end instead of spinning on zero-length steps.
      if (std::isfinite(ftrial) && ftrial < f && ftrial <= f + 1e-4 * alpha * slope) {
        y = trial;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) {
      // Certified decreases fell under the double resolution of f, but the
      // Newton step itself is still accurate: in the quadratic regime a full
      // step roughly squares the decrement.  Take a few uncertified steps as
      // long as they stay feasible and do not visibly increase f.
      for (int i = 0; i < n; ++i) trial[i] = y[i] + step[i];
      const double ffull = barrier_value(m, trial, t);
      if (forced_steps < 6 && slope <= 0.0 && std::isfinite(ffull) &&
          ffull <= f + 1e-9 * std::fabs(f)) {
        ++forced_steps;
        y = trial;
        continue;
      }
      // No progress possible at this accuracy; return at the achieved
      // gradient norm.
      if (trace) *trace << "  [stage end: no step accepted]\n";
      return finish_stage();
    }
    forced_steps = 0;
  }
  return finish_stage();
}

// Row reduction of [A|b]; returns rank and pivot columns, throws when the
// system is inconsistent.
struct Reduced {
  Matrix a;
  Vector b;
  std::vector<int> pivot_cols;
};

Reduced reduce_equalities(Matrix a, Vector b) {
  const int m = a.rows, n = a.cols;
  Reduced r;
  int row = 0;
  for (int col = 0; col < n && row < m; ++col) {
    int p = row;
    double best = std::fabs(a(row, col));
    for (int i = row + 1; i < m; ++i)
      if (std::fabs(a(i, col)) > best) {
        best = std::fabs(a(i, col));
        p = i;
      }
    if (best < 1e-12) continue;
    if (p != row) {
      for (int j = 0; j < n; ++j) std::swap(a(row, j), a(p, j));
      std::swap(b[row], b[p]);
    }
    const double pivot = a(row, col);
    for (int j = 0; j < n; ++j) a(row, j) /= pivot;
    b[row] /= pivot;
    for (int i = 0; i < m; ++i) {
      if (i == row) continue;
      const double f = a(i, col);
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) a(i, j) -= f * a(row, j);
      b[i] -= f * b[row];
    }
    r.pivot_cols.push_back(col);
    ++row;
  }
  for (int i = row; i < m; ++i)
    if (std::fabs(b[i]) > 1e-9)
      fail_numeric("gp solver: equality constraints are inconsistent");
  r.a = std::move(a);
  r.b = std::move(b);
  return r;
}

}  // namespace

GpSolution solve_gp(const GpProblem& problem, const GpSolveOptions& options) {
  problem.validate();
  const int n = static_cast<int>(problem.vars.size());
  GpSolution sol;
  sol.vars = problem.vars;
  sol.values.assign(n, 1.0);

  // --- equality elimination: u = u0 + N y ---
  const int m_eq = static_cast<int>(problem.eq.size());
  Vector u0(n, 0.0);
  Matrix null_basis;  // n x k, orthonormal columns
  int k = n;
  if (m_eq > 0) {
    Matrix a(m_eq, n);
    Vector b(m_eq);
    for (int i = 0; i < m_eq; ++i) {
      for (const auto& [var, e] : problem.eq[i].exps) a(i, var) = e;
      b[i] = -std::log(problem.eq[i].coeff);
    }
    Reduced red = reduce_equalities(std::move(a), std::move(b));
    const int rank = static_cast<int>(red.pivot_cols.size());
    std::vector<char> is_pivot(n, 0);
    for (int c : red.pivot_cols) is_pivot[c] = 1;

    // particular solution: free vars at 0
    for (int r = 0; r < rank; ++r) u0[red.pivot_cols[r]] = red.b[r];

    k = n - rank;
    null_basis = Matrix(n, k);
    int col = 0;
    for (int f = 0; f < n; ++f) {
      if (is_pivot[f]) continue;
      Vector x(n, 0.0);
      x[f] = 1.0;
      for (int r = 0; r < rank; ++r) x[red.pivot_cols[r]] = -red.a(r, f);
      // Gram-Schmidt against previous columns
      for (int c = 0; c < col; ++c) {
        double dot = 0.0;
        for (int i = 0; i < n; ++i) dot += x[i] * null_basis(i, c);
        for (int i = 0; i < n; ++i) x[i] -= dot * null_basis(i, c);
      }
      double nrm = 0.0;
      for (double v : x) nrm += v * v;
      nrm = std::sqrt(nrm);
      for (int i = 0; i < n; ++i) null_basis(i, col) = x[i] / nrm;
      ++col;
    }
  } else {
    null_basis = Matrix::identity(n);
  }

  auto to_exp_terms = [&](const Posynomial& p) {
    std::vector<ExpTerm> out;
    out.reserve(p.terms.size());
    for (const MonomialTerm& t : p.terms) {
      ExpTerm e;
      e.logc = std::log(t.coeff);
      Vector a_full(n, 0.0);
      for (const auto& [var, ex] : t.exps) a_full[var] = ex;
      for (int i = 0; i < n; ++i) e.logc += a_full[i] * u0[i];
      e.a.assign(k, 0.0);
      for (int c = 0; c < k; ++c) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += a_full[i] * null_basis(i, c);
        e.a[c] = s;
      }
      out.push_back(std::move(e));
    }
    return out;
  };

  LogModel model;
  model.dim = k;
  model.obj = to_exp_terms(problem.objective);
  for (const Posynomial& p : problem.ineq) model.cons.push_back(to_exp_terms(p));
  for (int i = 0; i < n; ++i) {
    if (!problem.bounds[i]) continue;
    const auto [lo, hi] = *problem.bounds[i];
    Posynomial ub, lb;
    MonomialTerm tu;
    tu.coeff = 1.0 / hi;
    tu.exps = {{i, 1.0}};
    ub.add_term(tu);
    MonomialTerm tl;
    tl.coeff = lo;
    tl.exps = {{i, -1.0}};
    lb.add_term(tl);
    model.cons.push_back(to_exp_terms(ub));
    model.cons.push_back(to_exp_terms(lb));
  }
  const int m_cons = static_cast<int>(model.cons.size());

  auto finish = [&](const Vector& y, double kkt, int iters, bool converged) {
    Vector u = u0;
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < k; ++c) u[i] += null_basis(i, c) * y[c];
    for (int i = 0; i < n; ++i) sol.values[i] = std::exp(u[i]);
    sol.objective_value = eval_posynomial(problem.objective, sol.values);
    sol.kkt_residual = kkt;
    sol.iterations = iters;
    sol.converged = converged;
    return sol;
  };

  Vector y(k, 0.0);

  if (model.obj.empty()) sol.constant_problem = true;

  // Strictly feasible start; run the feasibility phase when y = 0 violates
  // (or nearly violates) a constraint.
  bool need_phase1 = false;
  for (const auto& g : model.cons)
    if (!(eval_group(g, y) < 1.0 - 1e-9)) need_phase1 = true;

  int total_iters = 0;
  if (need_phase1) {
    LogModel ph;
    ph.dim = k + 1;
    ExpTerm obj_term;
    obj_term.logc = 0.0;
    obj_term.a.assign(k + 1, 0.0);
    obj_term.a[k] = 1.0;  // minimize e^s
    ph.obj.push_back(obj_term);
    for (const auto& g : model.cons) {
      std::vector<ExpTerm> aug = g;
      for (ExpTerm& t : aug) {
        t.a.push_back(-1.0);  // g(y) * e^{-s} <= 1  <=>  log g <= s
      }
      ph.cons.push_back(std::move(aug));
    }
    double smax = 0.0;
    for (const auto& g : model.cons) {
      const double gv = eval_group(g, y);
      smax = std::max(smax, std::isfinite(gv) ? std::log(gv) : kExpCap);
    }
    Vector yp(k + 1, 0.0);
    yp[k] = std::min(smax + 1.0, 599.0);  // keep e^s representable
    // A short t-schedule pushing s below 0; stop as soon as the margin is
    // comfortable (F = e^s < e^-0.5).
    for (double t = 1.0; t <= 1e8; t *= 10.0) {
      NewtonResult r = newton_minimize(ph, yp, t, 1e-9,
                                       options.max_iter - total_iters, std::exp(-0.5), options.trace);
      total_iters += r.iterations;
      if (std::exp(yp[k]) < std::exp(-0.5)) break;
      if (total_iters >= options.max_iter) break;
    }
    Vector y_try(yp.begin(), yp.begin() + k);
    bool feasible = true;
    for (const auto& g : model.cons)
      if (!(eval_group(g, y_try) < 1.0)) feasible = false;
    if (!feasible) fail_numeric("gp solver: constraints are infeasible");

    // The feasibility phase has no incentive to keep slack coordinates small
    // and can leave them far from the origin (the log barrier rewards slack).
    // The feasible region is convex, so pull the point back toward y = 0 by
    // bisection while keeping a strict margin; this gives the main phase a
    // sane warm start.
    auto margin_ok = [&](const Vector& pt) {
      for (const auto& g : model.cons)
        if (!(eval_group(g, pt) < 1.0 - 1e-6)) return false;
      return true;
    };
    if (margin_ok(y_try)) {
      double lo = 0.0, hi = 1.0;  // y = hi * y_try is strictly feasible
      Vector probe(k);
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        for (int c = 0; c < k; ++c) probe[c] = mid * y_try[c];
        (margin_ok(probe) ? hi : lo) = mid;
      }
      for (int c = 0; c < k; ++c) y_try[c] *= hi;
    }
    y = std::move(y_try);
  }

  if (model.obj.empty()) {
    // Nothing to optimize: report the anchored/feasible assignment.
    return finish(y, 0.0, total_iters, true);
  }

  if (m_cons == 0) {
    NewtonResult r = newton_minimize(model, y, 1.0, options.tol, options.max_iter - total_iters,
                                     -std::numeric_limits<double>::infinity(), options.trace);
    total_iters += r.iterations;
    return finish(y, r.grad_norm, total_iters, r.converged);
  }

  double t = 1.0;
  double kkt = std::numeric_limits<double>::infinity();
  bool gap_ok = false;
  for (int stage = 0; stage < 40; ++stage) {
    if (options.trace)
      *options.trace << "barrier stage t=" << t
                     << " budget=" << (options.max_iter - total_iters) << "\n";
    NewtonResult r = newton_minimize(model, y, t, 0.5 * options.tol,
                                     options.max_iter - total_iters,
                                     -std::numeric_limits<double>::infinity(), options.trace);
    total_iters += r.iterations;
    kkt = r.grad_norm;
    if (total_iters >= options.max_iter) break;
    // Suboptimality after centering is bounded by m/t; stages where Newton
    // bottoms out at the floating-point floor still advance t, so the gap
    // criterion governs convergence and kkt reports the centering residual.
    if (static_cast<double>(m_cons) / t <= options.tol) {
      gap_ok = true;
      break;
    }
    t *= 10.0;
  }
  // Centering at barrier parameter t cannot push the residual below the
  // floating-point floor of the barrier gradient (log g_i is evaluated at
  // g_i = 1 - O(1/t), so its relative error grows like eps * t).  The
  // problem-dependent constant has been measured between ~10 and ~120 across
  // the range/regularizer programs; accept the residual within 256x of the
  // floor, while genuine centering failures sit many orders of magnitude
  // above it (O(1) gradients vs eps * t ~ 1e-6).
  const double fp_floor = 256.0 * std::numeric_limits<double>::epsilon() * t;
  const bool converged = gap_ok && kkt <= std::max(1e3 * options.tol, fp_floor);
  return finish(y, kkt, total_iters, converged);
}

}  // namespace polyinv
