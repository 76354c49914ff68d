#include "qim/json_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace qim {

namespace {

std::string comma_key(std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ",";
    out += names[i];
  }
  return out;
}

Variable variable_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("name") || !j.contains("values"))
    throw ValidationError("variable entries need \"name\" and \"values\"");
  Variable v;
  v.name = j.at("name").get<std::string>();
  for (const auto& s : j.at("values")) v.values.push_back(s.get<std::string>());
  return v;
}

Json variable_to_json(const Variable& v) {
  Json j;
  j["name"] = v.name;
  j["values"] = v.values;
  return j;
}

}  // namespace

Json to_json(const JointDistribution& d) {
  Json j;
  j["variables"] = Json::array();
  for (const auto& v : d.variables()) j["variables"].push_back(variable_to_json(v));
  j["probs"] = d.probs();
  return j;
}

JointDistribution distribution_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("variables") || !j.contains("probs"))
    throw ValidationError("distribution JSON needs \"variables\" and \"probs\"");
  std::vector<Variable> vars;
  for (const auto& vj : j.at("variables")) vars.push_back(variable_from_json(vj));
  std::vector<double> probs;
  for (const auto& p : j.at("probs")) {
    if (!p.is_number()) throw ValidationError("probs must be numeric");
    probs.push_back(p.get<double>());
  }
  try {
    return JointDistribution(std::move(vars), std::move(probs));
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

Json to_json(const DirectedHypergraph& a) {
  Json j;
  j["nodes"] = std::vector<std::string>(a.nodes.begin(), a.nodes.end());
  j["arcs"] = Json::array();
  for (const auto& arc : a.arcs) {
    Json aj;
    aj["label"] = arc.label;
    aj["sources"] = std::vector<std::string>(arc.sources.begin(), arc.sources.end());
    aj["targets"] = std::vector<std::string>(arc.targets.begin(), arc.targets.end());
    j["arcs"].push_back(aj);
  }
  return j;
}

DirectedHypergraph hypergraph_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("nodes") || !j.contains("arcs"))
    throw ValidationError("hypergraph JSON needs \"nodes\" and \"arcs\"");
  DirectedHypergraph a;
  for (const auto& n : j.at("nodes")) a.nodes.insert(n.get<std::string>());
  for (const auto& aj : j.at("arcs")) {
    Hyperarc arc;
    if (!aj.contains("label")) throw ValidationError("arc entries need \"label\"");
    arc.label = aj.at("label").get<std::string>();
    if (aj.contains("sources"))
      for (const auto& s : aj.at("sources")) arc.sources.insert(s.get<std::string>());
    if (aj.contains("targets"))
      for (const auto& t : aj.at("targets")) arc.targets.insert(t.get<std::string>());
    a.arcs.push_back(std::move(arc));
  }
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  return a;
}

Json to_json(const InformationProfile& p) {
  Json atoms = Json::object();
  // Emit in mask order, keys as comma-joined sorted names.
  for (std::size_t w = 1; w < p.atoms.size(); ++w) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < p.variables.size(); ++i)
      if (w & (std::size_t{1} << i)) names.push_back(p.variables[i]);
    atoms[comma_key(names)] = p.atoms[w];
  }
  Json j;
  j["atoms"] = atoms;
  return j;
}

Json to_json(const Witness& w) {
  Json j;
  j["joint"] = to_json(w.joint);
  j["base_vars"] = w.base_vars;
  j["arc_map"] = Json::object();
  for (const auto& [arc, name] : w.arc_map) j["arc_map"][arc] = name;
  return j;
}

Witness witness_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("joint") || !j.contains("base_vars") ||
      !j.contains("arc_map"))
    throw ValidationError("witness JSON needs \"joint\", \"base_vars\" and \"arc_map\"");
  Witness w;
  w.joint = distribution_from_json(j.at("joint"));
  for (const auto& b : j.at("base_vars")) w.base_vars.push_back(b.get<std::string>());
  for (const auto& [key, value] : j.at("arc_map").items())
    w.arc_map[key] = value.get<std::string>();
  return w;
}

Json to_json(const SimincResult& r) {
  Json j;
  j["value_bits"] = r.value_bits;
  j["converged"] = r.converged;
  j["restarts_used"] = r.restarts_used;
  j["seed"] = r.seed;
  j["independence_gap_bits"] = r.independence_gap_bits;
  Json arcs = Json::object();
  for (const auto& [label, bits] : r.arc_conditional_bits) arcs[label] = bits;
  j["arc_conditional_bits"] = arcs;
  Json sizes = Json::object();
  for (const auto& [label, n] : r.noise_sizes_used) sizes[label] = n;
  j["noise_sizes_used"] = sizes;
  Witness w;
  w.joint = r.witness_candidate;
  w.base_vars = r.base_vars;
  w.arc_map = r.arc_noise_names;
  j["witness_candidate"] = to_json(w);
  return j;
}

Json to_json(const WitnessReport& r) {
  Json j;
  j["ok"] = r.ok();
  j["marginal_ok"] = r.marginal_ok;
  j["marginal_deviation"] = r.marginal_deviation;
  j["independence_ok"] = r.independence_ok;
  j["independence_gap_bits"] = r.independence_gap_bits;
  j["determinism_ok"] = r.determinism_ok;
  j["failing_arcs"] = r.failing_arcs;
  j["tol"] = r.tol;
  return j;
}

Json to_json(const CompatVerdict& v) {
  Json j;
  switch (v.status) {
    case CompatStatus::Compatible: j["status"] = "compatible"; break;
    case CompatStatus::Incompatible: j["status"] = "incompatible"; break;
    case CompatStatus::Unknown: j["status"] = "unknown"; break;
  }
  if (!v.note.empty()) j["note"] = v.note;
  if (v.certificate) {
    Json c;
    c["kind"] = v.certificate->kind;
    c["idef_bits"] = v.certificate->idef_bits;
    c["detail"] = v.certificate->detail;
    j["certificate"] = c;
  }
  if (v.witness) j["witness"] = to_json(*v.witness);
  if (v.siminc) j["siminc"] = to_json(*v.siminc);
  return j;
}

Json to_json(const GRPSEM& m) {
  Json j;
  j["variables"] = Json::array();
  for (const auto& v : m.endogenous()) j["variables"].push_back(variable_to_json(v));
  j["hypergraph"] = to_json(m.structure());
  j["noise"] = Json::array();
  for (std::size_t k = 0; k < m.num_arcs(); ++k) {
    Json nj;
    nj["arc"] = m.structure().arcs[k].label;
    nj["values"] = m.noise()[k].values;
    nj["probs"] = m.noise_probs()[k];
    j["noise"].push_back(nj);
  }
  j["equations"] = Json::array();
  for (std::size_t k = 0; k < m.num_arcs(); ++k) {
    const auto& arc = m.structure().arcs[k];
    Json ej;
    ej["arc"] = arc.label;
    Json rows = Json::array();
    std::vector<std::string> src(arc.sources.begin(), arc.sources.end());
    std::vector<std::string> tgt(arc.targets.begin(), arc.targets.end());
    for (std::size_t sk = 0; sk < m.src_space(k); ++sk) {
      for (std::size_t uk = 0; uk < m.noise()[k].cardinality(); ++uk) {
        Json row;
        Json in = Json::object();
        // Decode the source setting (sorted source order, last fastest).
        std::size_t rest = sk;
        for (std::size_t i = src.size(); i-- > 0;) {
          const Variable& v = m.endogenous()[m.endo_position(src[i])];
          in[src[i]] = v.values[rest % v.cardinality()];
          rest /= v.cardinality();
        }
        in[m.noise()[k].name] = m.noise()[k].values[uk];
        Json out = Json::object();
        std::size_t t = m.eval_equation(k, sk, uk);
        for (std::size_t i = tgt.size(); i-- > 0;) {
          const Variable& v = m.endogenous()[m.endo_position(tgt[i])];
          out[tgt[i]] = v.values[t % v.cardinality()];
          t /= v.cardinality();
        }
        row["in"] = in;
        row["out"] = out;
        rows.push_back(row);
      }
    }
    ej["rows"] = rows;
    j["equations"].push_back(ej);
  }
  return j;
}

GRPSEM grpsem_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("variables") || !j.contains("hypergraph") ||
      !j.contains("noise") || !j.contains("equations"))
    throw ValidationError(
        "sem JSON needs \"variables\", \"hypergraph\", \"noise\" and \"equations\"");
  std::vector<Variable> endo;
  for (const auto& vj : j.at("variables")) endo.push_back(variable_from_json(vj));
  DirectedHypergraph a = hypergraph_from_json(j.at("hypergraph"));

  auto endo_var = [&](const std::string& name) -> const Variable& {
    for (const auto& v : endo)
      if (v.name == name) return v;
    throw ValidationError("sem JSON references unknown variable " + name);
  };

  std::vector<Variable> noise(a.arcs.size());
  std::vector<std::vector<double>> noise_probs(a.arcs.size());
  std::vector<bool> have_noise(a.arcs.size(), false);
  for (const auto& nj : j.at("noise")) {
    if (!nj.contains("arc") || !nj.contains("values") || !nj.contains("probs"))
      throw ValidationError("noise entries need \"arc\", \"values\" and \"probs\"");
    std::string label = nj.at("arc").get<std::string>();
    std::size_t k = a.arcs.size();
    for (std::size_t i = 0; i < a.arcs.size(); ++i)
      if (a.arcs[i].label == label) k = i;
    if (k == a.arcs.size()) throw ValidationError("noise entry for unknown arc " + label);
    noise[k].name = noise_node_name(label);
    for (const auto& s : nj.at("values")) noise[k].values.push_back(s.get<std::string>());
    for (const auto& p : nj.at("probs")) noise_probs[k].push_back(p.get<double>());
    have_noise[k] = true;
  }
  for (std::size_t k = 0; k < a.arcs.size(); ++k)
    if (!have_noise[k])
      throw ValidationError("missing noise entry for arc " + a.arcs[k].label);

  // Equations: rows give in/out maps; fill the per-arc total table.
  std::vector<std::vector<std::size_t>> equations(a.arcs.size());
  std::vector<std::vector<bool>> filled(a.arcs.size());
  for (std::size_t k = 0; k < a.arcs.size(); ++k) {
    std::size_t s_space = 1;
    for (const auto& s : a.arcs[k].sources) s_space *= endo_var(s).cardinality();
    equations[k].assign(s_space * noise[k].cardinality(), 0);
    filled[k].assign(s_space * noise[k].cardinality(), false);
  }
  for (const auto& ej : j.at("equations")) {
    if (!ej.contains("arc") || !ej.contains("rows"))
      throw ValidationError("equation entries need \"arc\" and \"rows\"");
    std::string label = ej.at("arc").get<std::string>();
    std::size_t k = a.arcs.size();
    for (std::size_t i = 0; i < a.arcs.size(); ++i)
      if (a.arcs[i].label == label) k = i;
    if (k == a.arcs.size()) throw ValidationError("equation entry for unknown arc " + label);
    std::vector<std::string> src(a.arcs[k].sources.begin(), a.arcs[k].sources.end());
    std::vector<std::string> tgt(a.arcs[k].targets.begin(), a.arcs[k].targets.end());
    for (const auto& row : ej.at("rows")) {
      if (!row.contains("in") || !row.contains("out"))
        throw ValidationError("equation rows need \"in\" and \"out\"");
      std::size_t sk = 0;
      for (const auto& s : src) {
        const Variable& v = endo_var(s);
        if (!row.at("in").contains(s))
          throw ValidationError("equation row lacks input " + s);
        sk = sk * v.cardinality() + v.value_index(row.at("in").at(s).get<std::string>());
      }
      if (!row.at("in").contains(noise[k].name))
        throw ValidationError("equation row lacks noise input " + noise[k].name);
      std::size_t uk;
      try {
        uk = noise[k].value_index(row.at("in").at(noise[k].name).get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
      }
      std::size_t tk = 0;
      for (const auto& t : tgt) {
        const Variable& v = endo_var(t);
        if (!row.at("out").contains(t))
          throw ValidationError("equation row lacks output " + t);
        tk = tk * v.cardinality() + v.value_index(row.at("out").at(t).get<std::string>());
      }
      equations[k][sk * noise[k].cardinality() + uk] = tk;
      filled[k][sk * noise[k].cardinality() + uk] = true;
    }
  }
  for (std::size_t k = 0; k < a.arcs.size(); ++k)
    for (bool f : filled[k])
      if (!f)
        throw ValidationError("equation table for arc " + a.arcs[k].label + " is not total");

  try {
    return GRPSEM(std::move(a), std::move(endo), std::move(noise), std::move(noise_probs),
                  std::move(equations));
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

Json to_json(const Event& e, const std::string& key) {
  Json j;
  j["variables"] = Json::array();
  for (const auto& v : e.variables) j["variables"].push_back(variable_to_json(v));
  j[key] = Json::array();
  for (auto s : e.settings) j[key].push_back(s);
  return j;
}

CausalFormula formula_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("op"))
    throw ValidationError("formula JSON needs \"op\"");
  std::string op = j.at("op").get<std::string>();
  if (op == "atom") {
    if (!j.contains("var") || !j.contains("value"))
      throw ValidationError("formula atoms need \"var\" and \"value\"");
    return CausalFormula::atom(j.at("var").get<std::string>(),
                               j.at("value").get<std::string>());
  }
  if (op == "and") {
    std::vector<CausalFormula> parts;
    for (const auto& c : j.at("args")) parts.push_back(formula_from_json(c));
    if (parts.empty()) throw ValidationError("\"and\" needs at least one argument");
    return CausalFormula::conj(std::move(parts));
  }
  if (op == "not") return CausalFormula::neg(formula_from_json(j.at("arg")));
  if (op == "box" || op == "diamond") {
    std::map<std::string, std::string> asg;
    if (j.contains("set"))
      for (const auto& [key, value] : j.at("set").items())
        asg[key] = value.get<std::string>();
    CausalFormula inner = formula_from_json(j.at("arg"));
    return op == "box" ? CausalFormula::box(std::move(asg), std::move(inner))
                       : CausalFormula::diamond(std::move(asg), std::move(inner));
  }
  throw ValidationError("unknown formula op: " + op);
}

Json to_json(const CausalFormula& f) {
  Json j;
  switch (f.kind) {
    case CausalFormula::Kind::Atom:
      j["op"] = "atom";
      j["var"] = f.var;
      j["value"] = f.value;
      break;
    case CausalFormula::Kind::And: {
      j["op"] = "and";
      Json args = Json::array();
      for (const auto& c : f.children) args.push_back(to_json(c));
      j["args"] = args;
      break;
    }
    case CausalFormula::Kind::Not:
      j["op"] = "not";
      j["arg"] = to_json(f.children[0]);
      break;
    case CausalFormula::Kind::Box:
    case CausalFormula::Kind::Diamond: {
      j["op"] = f.kind == CausalFormula::Kind::Box ? "box" : "diamond";
      Json set = Json::object();
      for (const auto& [var, value] : f.assignment) set[var] = value;
      j["set"] = set;
      j["arg"] = to_json(f.children[0]);
      break;
    }
  }
  return j;
}

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  return Json::parse(in);  // throws parse_error with a byte position
}

void save_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace qim
