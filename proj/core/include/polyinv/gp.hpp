#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "polyinv/common.hpp"

namespace polyinv {

// Optimization variable of a geometric program.  layer/index give diag
// variables their interface coordinate; span variables use layer only.
struct GpVariable {
  enum class Kind { Diag, SpanPos, SpanNeg, Epigraph };
  Kind kind = Kind::Diag;
  int layer = 0;
  int index = 0;

  std::string name() const;
  friend bool operator==(const GpVariable&, const GpVariable&) = default;
};

// c * prod_i v_i^{e_i} with c > 0.  exps is sorted by variable id with no
// duplicates (normalize() enforces this).
struct MonomialTerm {
  double coeff = 1.0;
  std::vector<std::pair<int, double>> exps;

  void normalize();
  MonomialTerm& mul(const MonomialTerm& o);
  MonomialTerm pow(double e) const;
};

// Sum of monomial terms; zero-coefficient terms are dropped on insertion and
// negative coefficients rejected, so posynomials stay closed under + and *.
struct Posynomial {
  std::vector<MonomialTerm> terms;

  void add_term(MonomialTerm t);
  Posynomial& operator+=(const Posynomial& o);
  bool empty() const { return terms.empty(); }
};

Posynomial operator*(const Posynomial& a, const Posynomial& b);
Posynomial operator*(const Posynomial& a, const MonomialTerm& m);

double eval_monomial(const MonomialTerm& m, const Vector& v);
double eval_posynomial(const Posynomial& p, const Vector& v);
// Same objective after the change of variables v = exp(u); this is the smooth
// convex function the solver actually minimizes.
double eval_posynomial_log(const Posynomial& p, const Vector& u);

// minimize objective(v) (+ constant_offset, reported separately)
// subject to ineq_i(v) <= 1, eq_j(v) == 1, bounds, v > 0.
struct GpProblem {
  std::vector<GpVariable> vars;
  Posynomial objective;
  std::vector<Posynomial> ineq;
  std::vector<MonomialTerm> eq;
  std::vector<std::optional<std::pair<double, double>>> bounds;  // aligned with vars
  double constant_offset = 0.0;

  int add_variable(const GpVariable& v);
  int find_variable(const GpVariable& v) const;  // -1 if absent
  void set_bounds(int var, double lo, double hi);
  void validate() const;
};

struct GpSolveOptions {
  double tol = 1e-8;       // stationarity residual target
  int max_iter = 2000;     // total Newton iteration budget
  std::ostream* trace = nullptr;
};

struct GpSolution {
  std::vector<GpVariable> vars;  // snapshot, aligned with values
  Vector values;
  double objective_value = 0.0;  // posynomial part only, offset excluded
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool constant_problem = false;

  // Lookup by descriptor; throws if the variable is absent.
  double value_of(const GpVariable& v) const;
};

// Interior-point solve in log variables: equality monomials become linear
// equalities (eliminated by null-space projection), inequalities and bounds
// are handled by a log barrier along a geometric t-schedule, each stage
// minimized by damped Newton with backtracking.  Deterministic.  Throws on
// infeasible constraints; returns converged=false with the best iterate if
// the iteration budget runs out (e.g. objectives unbounded below).
GpSolution solve_gp(const GpProblem& problem, const GpSolveOptions& options = {});

}  // namespace polyinv
