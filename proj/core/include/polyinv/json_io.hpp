#pragma once

// JSON serialization for every artifact that crosses a file or message
// boundary.  Loaders validate and throw std::invalid_argument with the field
// context; writers produce deterministic output (sorted keys).

#include <string>

#include "json.hpp"
#include "polyinv/attention.hpp"
#include "polyinv/gp.hpp"
#include "polyinv/invariance.hpp"
#include "polyinv/mlp.hpp"
#include "polyinv/polynet.hpp"

namespace polyinv {

using Json = nlohmann::json;

// Parse/file helpers; all errors carry the given context or path.
Json parse_json(const std::string& text, const std::string& context);
Json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const Json& j);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, const std::string& context);

// {"dims":[...], "alphas":[...], "polarity":[[...]] (only when some entry is
// -1), "layers":[[[{"w":[...],"b":..,"r":..,"eps":..}]]]}.  b/r/eps may be
// omitted in inputs (defaults 0/1/1).
Json to_json(const PolyNetwork& net);
PolyNetwork polynet_from_json(const Json& j);

// {"S0":[[...]] (only when not identity),
//  "interfaces":[{"perm":[...],"diag":[...],"polarity":[...]}]}.
Json to_json(const InvarianceElement& g);
InvarianceElement element_from_json(const Json& j, int input_dim);

// {"W":[[[...]]], "b":[[...]]}
Json to_json(const MlpModel& m);
MlpModel mlp_from_json(const Json& j);

// {"task":"classification"|"regression", "inputs":[[...]], "targets":[...]}
Json to_json(const Dataset& d);
Dataset dataset_from_json(const Json& j);

// {"lr":..,"epochs":..,"batch":..,"seed":..,"loss":"mse"|"softmax-xent"}
Json to_json(const TrainHp& hp);
TrainHp train_hp_from_json(const Json& j);

// {"W_Q":..,"W_K":..,"W_V":..,"W_O":..}
Json to_json(const AttentionParams& p);
AttentionParams attention_from_json(const Json& j);

// {"attn":..,"ln1":{"gamma","beta"},"ln2":..,"ffn":{"W1","W2","activation"}}
Json to_json(const BlockParams& bp);
BlockParams block_from_json(const Json& j);

// Inspection only (no loader): {"vars","objective","ineq","eq","bounds",
// "constant_offset"} with terms as {"c":..,"e":{var-name:exponent}}.
Json to_json(const GpProblem& p);

Json to_json(const EquivalenceReport& r);

}  // namespace polyinv
