#include "polyinv/json_io.hpp"

#include <fstream>
#include <sstream>

#include "polyinv/common.hpp"

namespace polyinv {

namespace {

const Json& require(const Json& j, const char* key, const std::string& what) {
  if (!j.is_object()) fail_invalid(what, ": expected an object with field \"", key, "\"");
  auto it = j.find(key);
  if (it == j.end()) fail_invalid(what, ": missing field \"", key, "\"");
  return *it;
}

template <typename T>
T field_as(const Json& j, const char* key, const std::string& what) {
  try {
    return require(j, key, what).get<T>();
  } catch (const Json::exception& e) {
    fail_invalid(what, ": field \"", key, "\": ", e.what());
  }
}

template <typename T>
T field_or(const Json& j, const char* key, T fallback, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return field_as<T>(j, key, what);
}

}  // namespace

Json parse_json(const std::string& text, const std::string& context) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    fail_invalid(context, ": invalid JSON: ", e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_invalid("cannot open for reading: ", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_invalid("cannot open for writing: ", path);
  out << content;
  if (!out) fail_invalid("write failed: ", path);
}

Json load_json_file(const std::string& path) { return parse_json(read_text_file(path), path); }

void save_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows; ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols; ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& context) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    fail_invalid(context, ": expected a non-empty array of rows");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j.front().size());
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols)
      fail_invalid(context, ": row ", i, " has ", j[i].size(), " entries, expected ", cols);
    for (int c = 0; c < cols; ++c) {
      try {
        m(i, c) = j[i][c].get<double>();
      } catch (const Json::exception& e) {
        fail_invalid(context, ": entry (", i, ",", c, "): ", e.what());
      }
    }
  }
  return m;
}

// ---------- PolyNetwork ----------

Json to_json(const PolyNetwork& net) {
  Json j;
  j["dims"] = net.dims;
  Json alphas = Json::array();
  bool any_negative_polarity = false;
  Json polarity = Json::array();
  for (const MonomialLayer& m : net.monomial_layers) {
    alphas.push_back(m.alpha);
    polarity.push_back(m.polarity);
    for (int q : m.polarity) any_negative_polarity |= q < 0;
  }
  j["alphas"] = std::move(alphas);
  if (any_negative_polarity) j["polarity"] = std::move(polarity);
  Json layers = Json::array();
  for (const PolyLayer& layer : net.poly_layers) {
    Json outputs = Json::array();
    for (const auto& output : layer.outputs) {
      Json terms = Json::array();
      for (const AffineTerm& t : output)
        terms.push_back(Json{{"w", t.w}, {"b", t.b}, {"r", t.degree}, {"eps", t.sign}});
      outputs.push_back(std::move(terms));
    }
    layers.push_back(std::move(outputs));
  }
  j["layers"] = std::move(layers);
  return j;
}

PolyNetwork polynet_from_json(const Json& j) {
  const std::string what = "model";
  PolyNetwork net;
  net.dims = field_as<std::vector<int>>(j, "dims", what);
  const auto alphas = field_as<std::vector<double>>(j, "alphas", what);
  const Json& layers = require(j, "layers", what);
  if (!layers.is_array()) fail_invalid(what, ": \"layers\" must be an array");
  const int depth = static_cast<int>(layers.size());
  if (static_cast<int>(net.dims.size()) != depth + 1)
    fail_invalid(what, ": dims has ", net.dims.size(), " entries for ", depth, " layers");
  if (static_cast<int>(alphas.size()) != depth - 1)
    fail_invalid(what, ": alphas has ", alphas.size(), " entries, expected ", depth - 1);

  for (int l = 0; l < depth; ++l) {
    PolyLayer layer;
    layer.input_dim = net.dims[l];
    layer.output_dim = net.dims[l + 1];
    const Json& outputs = layers[l];
    if (!outputs.is_array() || static_cast<int>(outputs.size()) != layer.output_dim)
      fail_invalid(what, ": layer ", l + 1, " must list ", layer.output_dim, " outputs");
    for (int o = 0; o < layer.output_dim; ++o) {
      std::vector<AffineTerm> terms;
      const std::string where = concat(what, " layer ", l + 1, " output ", o);
      if (!outputs[o].is_array()) fail_invalid(where, ": expected an array of terms");
      for (const Json& tj : outputs[o]) {
        AffineTerm t;
        t.w = field_as<Vector>(tj, "w", where);
        t.b = field_or<double>(tj, "b", 0.0, where);
        t.degree = field_or<int>(tj, "r", 1, where);
        t.sign = field_or<int>(tj, "eps", 1, where);
        terms.push_back(std::move(t));
      }
      layer.outputs.push_back(std::move(terms));
    }
    net.poly_layers.push_back(std::move(layer));
  }
  for (int l = 0; l + 1 < depth; ++l) {
    MonomialLayer m;
    m.dim = net.dims[l + 1];
    m.alpha = alphas[l];
    m.polarity.assign(m.dim, 1);
    net.monomial_layers.push_back(std::move(m));
  }
  if (j.contains("polarity")) {
    const Json& pol = j.at("polarity");
    if (!pol.is_array() || static_cast<int>(pol.size()) != depth - 1)
      fail_invalid(what, ": \"polarity\" must list ", depth - 1, " layers");
    for (int l = 0; l + 1 < depth; ++l) {
      try {
        net.monomial_layers[l].polarity = pol[l].get<std::vector<int>>();
      } catch (const Json::exception& e) {
        fail_invalid(what, " polarity ", l + 1, ": ", e.what());
      }
    }
  }
  validate(net);
  return net;
}

// ---------- InvarianceElement ----------

Json to_json(const InvarianceElement& g) {
  Json j;
  if (!g.input.is_identity()) j["S0"] = matrix_to_json(g.input.S0);
  Json interfaces = Json::array();
  for (const InterfaceTransform& t : g.interfaces)
    interfaces.push_back(Json{{"perm", t.perm}, {"diag", t.diag}, {"polarity", t.polarity}});
  j["interfaces"] = std::move(interfaces);
  return j;
}

InvarianceElement element_from_json(const Json& j, int input_dim) {
  const std::string what = "element";
  InvarianceElement g;
  if (j.contains("S0"))
    g.input = InputTransform::from_matrix(matrix_from_json(j.at("S0"), what + " S0"));
  else
    g.input = InputTransform::identity(input_dim);
  const Json& interfaces = require(j, "interfaces", what);
  if (!interfaces.is_array()) fail_invalid(what, ": \"interfaces\" must be an array");
  for (size_t l = 0; l < interfaces.size(); ++l) {
    const std::string where = concat(what, " interface ", l + 1);
    InterfaceTransform t;
    t.perm = field_as<std::vector<int>>(interfaces[l], "perm", where);
    t.diag = field_as<std::vector<double>>(interfaces[l], "diag", where);
    t.polarity = field_or<std::vector<int>>(interfaces[l], "polarity",
                                            std::vector<int>(t.perm.size(), 1), where);
    t.validate();
    g.interfaces.push_back(std::move(t));
  }
  return g;
}

// ---------- MlpModel ----------

Json to_json(const MlpModel& m) {
  Json w = Json::array(), b = Json::array();
  for (const Matrix& wl : m.w) w.push_back(matrix_to_json(wl));
  for (const Vector& bl : m.b) b.push_back(bl);
  return Json{{"W", std::move(w)}, {"b", std::move(b)}};
}

MlpModel mlp_from_json(const Json& j) {
  const std::string what = "mlp";
  const Json& w = require(j, "W", what);
  const Json& b = require(j, "b", what);
  if (!w.is_array() || !b.is_array() || w.size() != b.size())
    fail_invalid(what, ": \"W\" and \"b\" must be arrays of equal length");
  MlpModel m;
  for (size_t l = 0; l < w.size(); ++l) {
    m.w.push_back(matrix_from_json(w[l], concat(what, " W[", l, "]")));
    try {
      m.b.push_back(b[l].get<Vector>());
    } catch (const Json::exception& e) {
      fail_invalid(what, " b[", l, "]: ", e.what());
    }
  }
  m.validate();
  return m;
}

// ---------- Dataset ----------

Json to_json(const Dataset& d) {
  Json j;
  j["task"] = d.task == TaskKind::Classification ? "classification" : "regression";
  j["inputs"] = d.inputs;
  if (d.task == TaskKind::Classification)
    j["targets"] = d.class_targets;
  else
    j["targets"] = d.vector_targets;
  return j;
}

Dataset dataset_from_json(const Json& j) {
  const std::string what = "dataset";
  Dataset d;
  const auto task = field_as<std::string>(j, "task", what);
  if (task == "classification")
    d.task = TaskKind::Classification;
  else if (task == "regression")
    d.task = TaskKind::Regression;
  else
    fail_invalid(what, ": task must be \"classification\" or \"regression\", got \"", task, "\"");
  d.inputs = field_as<std::vector<Vector>>(j, "inputs", what);
  if (d.task == TaskKind::Classification)
    d.class_targets = field_as<std::vector<int>>(j, "targets", what);
  else
    d.vector_targets = field_as<std::vector<Vector>>(j, "targets", what);
  return d;
}

// ---------- TrainHp ----------

Json to_json(const TrainHp& hp) {
  return Json{{"lr", hp.lr},
              {"epochs", hp.epochs},
              {"batch", hp.batch},
              {"seed", hp.seed},
              {"loss", hp.loss == LossKind::Mse ? "mse" : "softmax-xent"}};
}

TrainHp train_hp_from_json(const Json& j) {
  const std::string what = "hyperparameters";
  TrainHp hp;
  hp.lr = field_as<double>(j, "lr", what);
  hp.epochs = field_as<int>(j, "epochs", what);
  hp.batch = field_as<int>(j, "batch", what);
  hp.seed = field_as<std::uint64_t>(j, "seed", what);
  const auto loss = field_as<std::string>(j, "loss", what);
  if (loss == "mse")
    hp.loss = LossKind::Mse;
  else if (loss == "softmax-xent")
    hp.loss = LossKind::SoftmaxXent;
  else
    fail_invalid(what, ": loss must be \"mse\" or \"softmax-xent\", got \"", loss, "\"");
  return hp;
}

// ---------- attention ----------

Json to_json(const AttentionParams& p) {
  return Json{{"W_Q", matrix_to_json(p.w_q)},
              {"W_K", matrix_to_json(p.w_k)},
              {"W_V", matrix_to_json(p.w_v)},
              {"W_O", matrix_to_json(p.w_o)}};
}

AttentionParams attention_from_json(const Json& j) {
  const std::string what = "attention";
  AttentionParams p;
  p.w_q = matrix_from_json(require(j, "W_Q", what), what + " W_Q");
  p.w_k = matrix_from_json(require(j, "W_K", what), what + " W_K");
  p.w_v = matrix_from_json(require(j, "W_V", what), what + " W_V");
  p.w_o = matrix_from_json(require(j, "W_O", what), what + " W_O");
  p.validate();
  return p;
}

Json to_json(const BlockParams& bp) {
  return Json{{"attn", to_json(bp.attn)},
              {"ln1", Json{{"gamma", bp.ln1.gamma}, {"beta", bp.ln1.beta}}},
              {"ln2", Json{{"gamma", bp.ln2.gamma}, {"beta", bp.ln2.beta}}},
              {"ffn", Json{{"W1", matrix_to_json(bp.ffn.w1)},
                           {"W2", matrix_to_json(bp.ffn.w2)},
                           {"activation",
                            bp.ffn.activation == FfnActivation::Relu ? "relu" : "tanh"}}}};
}

BlockParams block_from_json(const Json& j) {
  const std::string what = "block";
  BlockParams bp;
  bp.attn = attention_from_json(require(j, "attn", what));
  const Json& ln1 = require(j, "ln1", what);
  const Json& ln2 = require(j, "ln2", what);
  bp.ln1.gamma = field_as<Vector>(ln1, "gamma", what + " ln1");
  bp.ln1.beta = field_as<Vector>(ln1, "beta", what + " ln1");
  bp.ln2.gamma = field_as<Vector>(ln2, "gamma", what + " ln2");
  bp.ln2.beta = field_as<Vector>(ln2, "beta", what + " ln2");
  const Json& ffn = require(j, "ffn", what);
  bp.ffn.w1 = matrix_from_json(require(ffn, "W1", what), what + " ffn W1");
  bp.ffn.w2 = matrix_from_json(require(ffn, "W2", what), what + " ffn W2");
  const auto act = field_as<std::string>(ffn, "activation", what + " ffn");
  if (act == "relu")
    bp.ffn.activation = FfnActivation::Relu;
  else if (act == "tanh")
    bp.ffn.activation = FfnActivation::Tanh;
  else
    fail_invalid(what, ": ffn activation must be \"relu\" or \"tanh\", got \"", act, "\"");
  bp.validate();
  return bp;
}

// ---------- GpProblem / reports ----------

namespace {

Json term_to_json(const MonomialTerm& t, const GpProblem& p) {
  Json e = Json::object();
  for (const auto& [var, exp] : t.exps) e[p.vars[var].name()] = exp;
  return Json{{"c", t.coeff}, {"e", std::move(e)}};
}

Json posynomial_to_json(const Posynomial& poly, const GpProblem& p) {
  Json terms = Json::array();
  for (const MonomialTerm& t : poly.terms) terms.push_back(term_to_json(t, p));
  return terms;
}

}  // namespace

Json to_json(const GpProblem& p) {
  Json vars = Json::array();
  for (const GpVariable& v : p.vars) vars.push_back(v.name());
  Json ineq = Json::array();
  for (const Posynomial& g : p.ineq) ineq.push_back(posynomial_to_json(g, p));
  Json eq = Json::array();
  for (const MonomialTerm& t : p.eq) eq.push_back(term_to_json(t, p));
  Json bounds = Json::object();
  for (size_t i = 0; i < p.bounds.size(); ++i)
    if (p.bounds[i]) bounds[p.vars[i].name()] = {p.bounds[i]->first, p.bounds[i]->second};
  return Json{{"vars", std::move(vars)},
              {"objective", posynomial_to_json(p.objective, p)},
              {"ineq", std::move(ineq)},
              {"eq", std::move(eq)},
              {"bounds", std::move(bounds)},
              {"constant_offset", p.constant_offset}};
}

Json to_json(const EquivalenceReport& r) {
  return Json{{"max_abs_err", r.max_abs_err},
              {"max_rel_err", r.max_rel_err},
              {"n_samples", r.n_samples},
              {"pass", r.pass}};
}

}  // namespace polyinv
