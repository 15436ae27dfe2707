// Command-line front end: model evaluation, reparameterization, the two
// geometric programs, both obfuscation protocols, and the attention checks.
// Machine-readable JSON goes to stdout, human summaries to stderr; the exit
// code is 0 iff every requested check passed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "polyinv/attention.hpp"
#include "polyinv/gp.hpp"
#include "polyinv/gpopt.hpp"
#include "polyinv/invariance.hpp"
#include "polyinv/json_io.hpp"
#include "polyinv/mlp.hpp"
#include "polyinv/obfuscation.hpp"
#include "polyinv/polynet.hpp"

namespace {

using namespace polyinv;

void emit(const Json& report) { std::cout << report.dump(2) << "\n"; }

void note(const std::string& line) { std::cerr << line << "\n"; }

// ---------- eval ----------

int cmd_eval(const std::string& model_path, const std::string& input_path,
             const std::string& out_path) {
  const PolyNetwork net = polynet_from_json(load_json_file(model_path));
  const Json xj = load_json_file(input_path);
  Vector x;
  try {
    x = xj.is_array() ? xj.get<Vector>() : xj.at("x").get<Vector>();
  } catch (const Json::exception& e) {
    fail_invalid(input_path, ": expected a vector or {\"x\":[...]}: ", e.what());
  }
  const Vector y = evaluate(net, x);
  Json report{{"y", y}};
  emit(report);
  if (!out_path.empty()) save_json_file(out_path, report);
  note(concat("evaluated ", model_path, " at ", input_path, ": ", y.size(), " outputs"));
  return 0;
}

// ---------- reparam ----------

int cmd_reparam(const std::string& model_path, const std::string& element_path,
                std::optional<std::uint64_t> random_seed, bool allow_polarity, bool allow_gl,
                int n_samples, double tol, const std::string& out_path) {
  const PolyNetwork net = polynet_from_json(load_json_file(model_path));
  InvarianceElement g;
  if (!element_path.empty()) {
    g = element_from_json(load_json_file(element_path), net.input_dim());
  } else if (random_seed) {
    std::vector<double> alphas;
    for (const MonomialLayer& m : net.monomial_layers) alphas.push_back(m.alpha);
    RandomElementOptions opt;
    opt.allow_polarity = allow_polarity;
    opt.general_linear_input = allow_gl;
    g = random_element(net.dims, alphas, *random_seed, opt);
  } else {
    fail_invalid("reparam: provide --element or --seed");
  }

  const PolyNetwork out = apply(net, g);
  const EquivalenceReport rep = g.input.is_identity()
                                    ? verify_equivalence(net, out, n_samples, Box{}, tol)
                                    : verify_equivalence_mapped(net, out, g.input.S0, n_samples,
                                                                Box{}, tol);
  Json report{{"element", to_json(g)}, {"equivalence", to_json(rep)}};
  emit(report);
  if (!out_path.empty()) save_json_file(out_path, to_json(out));
  note(concat("reparameterized ", model_path, ": max_rel_err = ", rep.max_rel_err,
              rep.pass ? " (pass)" : " (FAIL)"));
  return rep.pass ? 0 : 1;
}

// ---------- minreg ----------

int cmd_minreg(const std::string& model_path, const std::string& kind_name, double mu,
               bool anchors, std::optional<std::pair<double, double>> bounds, double tol,
               int max_iter, bool verbose, const std::string& out_path) {
  const PolyNetwork net = polynet_from_json(load_json_file(model_path));
  const RegKind kind = kind_name == "l1" ? RegKind::L1 : RegKind::Frobenius;
  RegGpOptions opt;
  opt.anchors = anchors;
  opt.bounds = bounds;
  const GpProblem problem =
      kind == RegKind::Frobenius ? build_frobenius_gp(net, mu, opt) : build_l1_gp(net, mu, opt);

  GpSolveOptions sopt;
  sopt.tol = tol;
  sopt.max_iter = max_iter;
  if (verbose) sopt.trace = &std::cerr;
  const GpSolution sol = solve_gp(problem, sopt);
  const PolyNetwork out = apply_gp_solution(net, sol);

  const double before = measure_regularizer(net, kind, mu);
  const double after = measure_regularizer(out, kind, mu);
  const EquivalenceReport rep = verify_equivalence(net, out, 500, Box{}, 1e-9);

  Json report{{"kind", kind_name},
              {"mu", mu},
              {"before", before},
              {"after", after},
              {"objective", sol.objective_value},
              {"constant_offset", problem.constant_offset},
              {"converged", sol.converged},
              {"constant_problem", sol.constant_problem},
              {"kkt_residual", sol.kkt_residual},
              {"iterations", sol.iterations},
              {"equivalence", to_json(rep)}};
  emit(report);
  if (!out_path.empty()) save_json_file(out_path, to_json(out));
  const bool improved = after <= before * (1.0 + 1e-9) + 1e-12;
  note(concat("regularizer ", kind_name, ": ", before, " -> ", after,
              improved && rep.pass ? " (pass)" : " (FAIL)"));
  return improved && rep.pass && sol.converged ? 0 : 1;
}

// ---------- minrange ----------

int cmd_minrange(const std::string& model_path, int bits, bool anchors,
                 const std::string& coupling_name, double zero_tol,
                 std::optional<std::pair<double, double>> bounds, double tol, int max_iter,
                 const std::string& out_path) {
  const PolyNetwork net = polynet_from_json(load_json_file(model_path));

  const std::vector<LayerSpan> spans_before = measure_layer_spans(net, zero_tol);
  double total_before = 0.0;
  for (const LayerSpan& s : spans_before) total_before += s.span();
  if (total_before == 0.0) {
    note("all parameters are zero: nothing to minimize (no-op)");
    emit(Json{{"noop", true}, {"t_star", 0.0}});
    if (!out_path.empty()) save_json_file(out_path, to_json(net));
    return 0;
  }

  RangeGpOptions opt;
  opt.anchors = anchors;
  opt.zero_tolerance = zero_tol;
  opt.bounds = bounds;
  opt.coupling = coupling_name == "worst" ? SpanCoupling::Worst : SpanCoupling::Total;
  const GpProblem problem = build_range_gp(net, opt);
  GpSolveOptions sopt;
  sopt.tol = tol;
  sopt.max_iter = max_iter;
  const GpSolution sol = solve_gp(problem, sopt);
  const PolyNetwork out = apply_gp_solution(net, sol);

  const std::vector<LayerSpan> spans_after = measure_layer_spans(out, zero_tol);
  double total_after = 0.0;
  Json spans_b = Json::array(), spans_a = Json::array();
  for (size_t l = 0; l < spans_after.size(); ++l) {
    total_after += spans_after[l].span();
    spans_b.push_back(spans_before[l].span());
    spans_a.push_back(spans_after[l].span());
  }

  const auto [qb_net, qb] = quantize_uniform(net, bits, true);
  const auto [qa_net, qa] = quantize_uniform(out, bits, true);
  const EquivalenceReport rep = verify_equivalence(net, out, 500, Box{}, 1e-9);

  Json report{{"t_star", sol.objective_value},
              {"converged", sol.converged},
              {"kkt_residual", sol.kkt_residual},
              {"iterations", sol.iterations},
              {"spans_before", std::move(spans_b)},
              {"spans_after", std::move(spans_a)},
              {"total_span_before", total_before},
              {"total_span_after", total_after},
              {"quantization", Json{{"bits", bits},
                                    {"steps_before", qb.steps},
                                    {"steps_after", qa.steps},
                                    {"max_error_before", qb.max_error},
                                    {"max_error_after", qa.max_error}}},
              {"equivalence", to_json(rep)}};
  emit(report);
  if (!out_path.empty()) save_json_file(out_path, to_json(out));
  const bool ok = rep.pass && total_after <= total_before * (1.0 + 1e-9) + 1e-12;
  note(concat("total span ", total_before, " -> ", total_after, ", t* = ", sol.objective_value,
              ok ? " (pass)" : " (FAIL)"));
  return ok && sol.converged ? 0 : 1;
}

// ---------- protocol ----------

int cmd_protocol_infer(const std::string& model_path, const std::string& input_path,
                       std::uint64_t seed_bob, std::uint64_t seed_alice, int n_sessions,
                       double tol, const std::string& out_path) {
  const PolyNetwork net = polynet_from_json(load_json_file(model_path));
  const Json xj = load_json_file(input_path);
  Vector x;
  try {
    x = xj.is_array() ? xj.get<Vector>() : xj.at("x").get<Vector>();
  } catch (const Json::exception& e) {
    fail_invalid(input_path, ": expected a vector or {\"x\":[...]}: ", e.what());
  }
  const Vector y_direct = evaluate(net, x);

  bool all_pass = true;
  std::vector<InferenceSession> sessions;
  Json session_reports = Json::array();
  for (int s = 0; s < n_sessions; ++s) {
    auto [y, session] = session_inference(net, seed_bob + s, seed_alice + s, x);
    double max_rel = 0.0;
    for (size_t i = 0; i < y.size(); ++i) max_rel = std::max(max_rel, rel_diff(y[i], y_direct[i]));
    all_pass &= max_rel <= tol;
    session_reports.push_back(Json{{"seed_bob", seed_bob + s},
                                   {"seed_alice", seed_alice + s},
                                   {"y", y},
                                   {"max_rel_err", max_rel},
                                   {"published", to_json(session.published_alice)}});
    sessions.push_back(std::move(session));
  }

  Json linkage;
  if (sessions.size() >= 1) {
    const LinkageReport lr = linkage_probe(sessions, seed_bob ^ seed_alice);
    linkage = Json{{"pairwise_distances", lr.pairwise_distances},
                   {"min_pairwise_distance", lr.min_pairwise_distance},
                   {"second_factorization",
                    Json{{"constructed", lr.has_second_factorization},
                         {"param_gap", lr.refactor_param_gap},
                         {"input_mask_distance", lr.refactor_input_gap},
                         {"equivalence", to_json(lr.refactor_equivalence)}}}};
    if (lr.has_second_factorization) all_pass &= lr.refactor_equivalence.pass;
    if (sessions.size() >= 2) all_pass &= lr.min_pairwise_distance > 0.0;
  }

  Json report{{"y_direct", y_direct}, {"sessions", std::move(session_reports)},
              {"linkage", std::move(linkage)}};
  emit(report);
  if (!out_path.empty()) save_json_file(out_path, report);
  note(concat(n_sessions, " inference session(s): ", all_pass ? "pass" : "FAIL"));
  return all_pass ? 0 : 1;
}

int cmd_protocol_train(const std::string& model_path, const std::string& data_path,
                       const std::string& head_name, std::uint64_t seed, TrainHp hp,
                       bool general_diag, const std::string& out_path) {
  const MlpModel model = mlp_from_json(load_json_file(model_path));
  const Dataset data = dataset_from_json(load_json_file(data_path));
  data.validate(model.input_dim(), model.output_dim());
  const HeadKind head =
      head_name == "orthogonal" ? HeadKind::Orthogonal : HeadKind::ClassPermutation;

  SecretOptions sopt;
  sopt.permutation_only = !general_diag;
  const MlpObfuscationSecret secret = make_secret(model.dims(), head, seed, sopt);

  // Round trip before training.
  const MlpModel obfuscated = obfuscate_mlp(model, secret);
  const MlpModel undone = recover_mlp(obfuscated, secret);
  double roundtrip = 0.0;
  for (int l = 0; l < model.depth(); ++l) {
    roundtrip = std::max(roundtrip, max_abs_diff(model.w[l], undone.w[l]));
    roundtrip = std::max(roundtrip, max_abs_diff(model.b[l], undone.b[l]));
  }

  // Loss invariance at initialization.
  const Dataset obf_data = obfuscate_dataset(data, secret);
  const double loss_plain = dataset_loss(model, data, hp.loss);
  const double loss_obf = dataset_loss(obfuscated, obf_data, hp.loss);

  // Obfuscated pipeline through the message boundary, then recovery.
  const std::string trained_json =
      training_server(to_json(obfuscated).dump(), to_json(obf_data).dump(), to_json(hp).dump());
  const MlpModel trained_obf = mlp_from_json(parse_json(trained_json, "trained model message"));
  const MlpModel recovered = recover_mlp(trained_obf, secret);

  // Control pipeline: same seed, no obfuscation.
  const MlpModel control = train_sgd(model, data, hp);
  double control_gap = 0.0;
  for (int l = 0; l < model.depth(); ++l) {
    control_gap = std::max(control_gap, max_abs_diff(control.w[l], recovered.w[l]));
    control_gap = std::max(control_gap, max_abs_diff(control.b[l], recovered.b[l]));
  }

  const bool roundtrip_ok = roundtrip <= 1e-10;
  const bool loss_ok = std::fabs(loss_plain - loss_obf) <= 1e-10;
  const bool control_ok = general_diag || control_gap <= 1e-6;

  Json report{{"head", head_name},
              {"general_diag", general_diag},
              {"roundtrip_max_diff", roundtrip},
              {"loss_plain", loss_plain},
              {"loss_obfuscated", loss_obf},
              {"recovered_vs_control_max_diff", control_gap},
              {"control_match_asserted", !general_diag},
              {"pass", roundtrip_ok && loss_ok && control_ok}};
  emit(report);
  if (!out_path.empty()) save_json_file(out_path, to_json(recovered));
  note(concat("round trip ", roundtrip, ", control gap ", control_gap,
              roundtrip_ok && loss_ok && control_ok ? " (pass)" : " (FAIL)"));
  return roundtrip_ok && loss_ok && control_ok ? 0 : 1;
}

// ---------- attn-check ----------

int cmd_attn_check(const std::string& params_path, std::uint64_t seed, int n_tokens, double tol,
                   bool negative_control) {
  std::mt19937_64 rng(seed);
  AttentionParams p;
  if (!params_path.empty())
    p = attention_from_json(load_json_file(params_path));
  else
    p = make_random_attention(8, 6, 8, seed);
  const Matrix x = random_gaussian(n_tokens, p.d(), rng);

  const AttentionOutput base = attention_forward(p, x);

  const Matrix mix_k = random_gaussian(p.d_k(), p.d_k(), rng);
  const AttentionOutput qk = attention_forward(qk_transform(p, mix_k), x);
  const double qk_dev = std::max(max_abs_diff(qk.s, base.s), max_abs_diff(qk.a, base.a));

  const Matrix mix_v = random_gaussian(p.d_v(), p.d_v(), rng);
  const AttentionParams pv = vo_transform(p, mix_v);
  const AttentionOutput vo = attention_forward(pv, x);
  const double vo_dev = max_abs_diff(vo.y, base.y);
  const double vo_product_dev =
      max_abs_diff(matmul(pv.w_v, pv.w_o), matmul(p.w_v, p.w_o));

  // Block equivariance under feature permutation.
  const BlockParams bp = make_random_block(p.d(), 2 * p.d(), p.d_k(), FfnActivation::Relu, seed + 1);
  std::vector<int> perm(p.d());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const Matrix xb = random_gaussian(n_tokens, p.d(), rng);
  const Matrix lhs = block_forward(permute_block(bp, perm), permute_cols(xb, perm));
  const Matrix rhs = permute_cols(block_forward(bp, xb), perm);
  const double block_dev = max_abs_diff(lhs, rhs);

  const Matrix ln_lhs = layer_norm(bp.ln1, permute_cols(xb, perm));
  const Matrix ln_rhs = permute_cols(layer_norm(bp.ln1, xb), perm);
  double ln_dev = 0.0;
  {
    LayerNormParams permuted_ln;
    permuted_ln.gamma.resize(p.d());
    permuted_ln.beta.resize(p.d());
    for (int i = 0; i < p.d(); ++i) {
      permuted_ln.gamma[i] = bp.ln1.gamma[perm[i]];
      permuted_ln.beta[i] = bp.ln1.beta[perm[i]];
    }
    ln_dev = max_abs_diff(layer_norm(permuted_ln, permute_cols(xb, perm)), ln_rhs);
    (void)ln_lhs;
  }

  double negative_dev = 0.0;
  if (negative_control) {
    // Deliberately wrong: W_K is mixed by P instead of P^-T.
    AttentionParams broken = p;
    broken.w_q = matmul(p.w_q, mix_k);
    broken.w_k = matmul(p.w_k, mix_k);
    negative_dev = max_abs_diff(attention_forward(broken, x).s, base.s);
  }

  const bool pass = qk_dev <= tol && vo_dev <= tol && block_dev <= tol && ln_dev <= tol &&
                    (!negative_control || negative_dev > 1e-3);
  Json report{{"qk_score_deviation", qk_dev},
              {"vo_output_deviation", vo_dev},
              {"vo_product_deviation", vo_product_dev},
              {"block_equivariance_deviation", block_dev},
              {"layer_norm_deviation", ln_dev},
              {"negative_control_deviation", negative_control ? Json(negative_dev) : Json()},
              {"tol", tol},
              {"pass", pass}};
  emit(report);
  note(concat("qk ", qk_dev, ", vo ", vo_dev, ", block ", block_dev,
              pass ? " (pass)" : " (FAIL)"));
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polynomial/rectified-monomial networks: invariances, geometric programs, "
               "obfuscation protocols, attention checks"};
  app.require_subcommand(1);

  std::string model_path, input_path, element_path, data_path, out_path, params_path;
  std::string kind = "frobenius", coupling = "total", head = "perm";
  std::uint64_t seed = 0, seed_bob = 0, seed_alice = 0;
  std::optional<std::uint64_t> random_seed;
  double mu = 0.0, tol = 1e-9, solver_tol = 1e-8, zero_tol = 1e-12;
  double dmin = 0.0, dmax = 0.0;
  int n_samples = 1000, max_iter = 2000, bits = 8, n_sessions = 1, n_tokens = 5;
  bool no_anchors = false, allow_polarity = false, allow_gl = false;
  bool verbose = false, general_diag = false, negative_control = false;
  TrainHp hp;
  std::string loss_name = "softmax-xent";

  auto add_bounds = [&](CLI::App* cmd) {
    cmd->add_option("--dmin", dmin, "lower bound on diagonals (with --dmax)");
    cmd->add_option("--dmax", dmax, "upper bound on diagonals (with --dmin)");
  };
  auto bounds_opt = [&]() -> std::optional<std::pair<double, double>> {
    if (dmin > 0.0 && dmax > 0.0) return std::make_pair(dmin, dmax);
    return std::nullopt;
  };

  CLI::App* eval = app.add_subcommand("eval", "evaluate a model on one input vector");
  eval->add_option("--model", model_path)->required();
  eval->add_option("--input", input_path)->required();
  eval->add_option("--out", out_path);

  CLI::App* reparam = app.add_subcommand("reparam", "apply an invariance element and verify");
  reparam->add_option("--model", model_path)->required();
  reparam->add_option("--element", element_path);
  reparam->add_option("--seed", random_seed, "draw a random element from this seed");
  reparam->add_flag("--allow-polarity", allow_polarity);
  reparam->add_flag("--allow-gl", allow_gl, "also draw a general-linear input transform");
  reparam->add_option("--samples", n_samples);
  reparam->add_option("--tol", tol);
  reparam->add_option("--out", out_path);

  CLI::App* minreg = app.add_subcommand("minreg", "minimize a regularizer over the invariance group");
  minreg->add_option("--model", model_path)->required();
  minreg->add_option("--kind", kind)->check(CLI::IsMember({"frobenius", "l1"}));
  minreg->add_option("--mu", mu);
  minreg->add_flag("--no-anchors", no_anchors);
  minreg->add_option("--tol", solver_tol);
  minreg->add_option("--max-iter", max_iter);
  minreg->add_flag("--verbose", verbose, "print solver trace to stderr");
  minreg->add_option("--out", out_path);
  add_bounds(minreg);

  CLI::App* minrange = app.add_subcommand("minrange", "minimize parameter spans, then quantize");
  minrange->add_option("--model", model_path)->required();
  minrange->add_option("--bits", bits)->check(CLI::Range(2, 16));
  minrange->add_flag("--no-anchors", no_anchors);
  minrange->add_option("--coupling", coupling)->check(CLI::IsMember({"total", "worst"}));
  minrange->add_option("--zero-tol", zero_tol);
  minrange->add_option("--tol", solver_tol);
  minrange->add_option("--max-iter", max_iter);
  minrange->add_option("--out", out_path);
  add_bounds(minrange);

  CLI::App* protocol = app.add_subcommand("protocol", "obfuscation protocols");
  CLI::App* infer = protocol->add_subcommand("infer", "two-party private inference");
  infer->add_option("--model", model_path)->required();
  infer->add_option("--input", input_path)->required();
  infer->add_option("--seed-bob", seed_bob)->required();
  infer->add_option("--seed-alice", seed_alice)->required();
  infer->add_option("--sessions", n_sessions);
  infer->add_option("--tol", tol);
  infer->add_option("--out", out_path);

  CLI::App* train = protocol->add_subcommand("train", "obfuscated remote training with recovery");
  train->add_option("--model", model_path)->required();
  train->add_option("--data", data_path)->required();
  train->add_option("--head", head)->check(CLI::IsMember({"perm", "orthogonal"}));
  train->add_option("--seed", seed)->required();
  train->add_option("--lr", hp.lr);
  train->add_option("--epochs", hp.epochs);
  train->add_option("--batch", hp.batch);
  train->add_option("--train-seed", hp.seed);
  train->add_option("--loss", loss_name)->check(CLI::IsMember({"mse", "softmax-xent"}));
  train->add_flag("--general-diag", general_diag,
                  "sample diagonal scalings too (trajectory match reported, not asserted)");
  train->add_option("--out", out_path);

  CLI::App* attn = app.add_subcommand("attn-check", "verify the attention/block invariances");
  attn->add_option("--params", params_path, "attention parameters (random when omitted)");
  attn->add_option("--seed", seed)->required();
  attn->add_option("--tokens", n_tokens);
  attn->add_option("--tol", tol);
  attn->add_flag("--negative-control", negative_control,
                 "also run a deliberately wrong transform and require it to deviate");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(eval)) return cmd_eval(model_path, input_path, out_path);
    if (app.got_subcommand(reparam))
      return cmd_reparam(model_path, element_path, random_seed, allow_polarity, allow_gl,
                         n_samples, tol, out_path);
    if (app.got_subcommand(minreg))
      return cmd_minreg(model_path, kind, mu, !no_anchors, bounds_opt(), solver_tol, max_iter,
                        verbose, out_path);
    if (app.got_subcommand(minrange))
      return cmd_minrange(model_path, bits, !no_anchors, coupling, zero_tol, bounds_opt(),
                          solver_tol, max_iter, out_path);
    if (app.got_subcommand(protocol)) {
      if (protocol->got_subcommand(infer))
        return cmd_protocol_infer(model_path, input_path, seed_bob, seed_alice, n_sessions, tol,
                                  out_path);
      if (protocol->got_subcommand(train)) {
        hp.loss = loss_name == "mse" ? LossKind::Mse : LossKind::SoftmaxXent;
        return cmd_protocol_train(model_path, data_path, head, seed, hp, general_diag, out_path);
      }
      fail_invalid("protocol: choose infer or train");
    }
    if (app.got_subcommand(attn))
      return cmd_attn_check(params_path, seed, n_tokens, tol, negative_control);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << "error: no subcommand\n";
  return 2;
}
