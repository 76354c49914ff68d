#ifndef QIM_JSON_IO_HPP_
#define QIM_JSON_IO_HPP_

#include <string>

#include <json.hpp>

#include "qim/causal.hpp"
#include "qim/compat.hpp"
#include "qim/dist.hpp"
#include "qim/hypergraph.hpp"
#include "qim/info.hpp"
#include "qim/scoring.hpp"

namespace qim {

using Json = nlohmann::ordered_json;

// Raised on schema/value violations (exit 65 at the CLI); JSON syntax errors
// propagate as nlohmann parse_error with a byte position (exit 64).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// {"variables":[{"name":..,"values":[..]},..],"probs":[..]} -- probs
// row-major with the last variable fastest; sum must be within 1e-9 of 1.
Json to_json(const JointDistribution& d);
JointDistribution distribution_from_json(const Json& j);

// {"nodes":[..],"arcs":[{"label":..,"sources":[..],"targets":[..]},..]}
Json to_json(const DirectedHypergraph& a);
DirectedHypergraph hypergraph_from_json(const Json& j);

// {"atoms":{"X":..,"X,Y":..}} with subset keys as comma-joined sorted names.
Json to_json(const InformationProfile& p);

// {"joint":<distribution>,"base_vars":[..],"arc_map":{label:uname,..}}
Json to_json(const Witness& w);
Witness witness_from_json(const Json& j);

Json to_json(const SimincResult& r);
Json to_json(const WitnessReport& r);
Json to_json(const CompatVerdict& v);

// {"variables":[..],"hypergraph":..,"noise":[{"arc":..,"values":[..],
//  "probs":[..]},..],"equations":[{"arc":..,"rows":[{"in":{..},"out":{..}}]}]}
Json to_json(const GRPSEM& m);
GRPSEM grpsem_from_json(const Json& j);

Json to_json(const Event& e, const std::string& key = "settings");

CausalFormula formula_from_json(const Json& j);
Json to_json(const CausalFormula& f);

// File helpers.  load_json throws nlohmann::json::parse_error on syntax
// errors and ValidationError when the file cannot be read.
Json load_json(const std::string& path);
void save_json(const std::string& path, const Json& j);

}  // namespace qim

#endif  // QIM_JSON_IO_HPP_
