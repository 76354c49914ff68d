#include "qim/hypergraph.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace qim {

void DirectedHypergraph::validate() const {
  std::unordered_set<std::string> labels;
  for (const auto& a : arcs) {
    if (a.label.empty()) throw std::invalid_argument("arc with empty label");
    if (!labels.insert(a.label).second)
      throw std::invalid_argument("duplicate arc label: " + a.label);
    for (const auto& s : a.sources)
      if (!nodes.count(s))
        throw std::invalid_argument("arc " + a.label + " has unknown source node " + s);
    for (const auto& t : a.targets)
      if (!nodes.count(t))
        throw std::invalid_argument("arc " + a.label + " has unknown target node " + t);
  }
}

const Hyperarc& DirectedHypergraph::arc(const std::string& label) const {
  for (const auto& a : arcs)
    if (a.label == label) return a;
  throw std::invalid_argument("unknown arc label: " + label);
}

bool DirectedHypergraph::has_arc(const std::string& label) const {
  for (const auto& a : arcs)
    if (a.label == label) return true;
  return false;
}

bool Graph::is_dag() const {
  if (!undirected_edges.empty()) return false;
  std::unordered_map<std::string, std::vector<std::string>> out;
  std::unordered_map<std::string, int> indeg;
  for (const auto& v : vertices) indeg[v] = 0;
  for (const auto& [u, v] : directed_edges) {
    if (!indeg.count(u) || !indeg.count(v)) return false;
    out[u].push_back(v);
    ++indeg[v];
  }
  // Kahn's algorithm.
  std::vector<std::string> ready;
  for (const auto& v : vertices)
    if (indeg[v] == 0) ready.push_back(v);
  std::size_t seen = 0;
  while (!ready.empty()) {
    std::string u = ready.back();
    ready.pop_back();
    ++seen;
    for (const auto& v : out[u])
      if (--indeg[v] == 0) ready.push_back(v);
  }
  return seen == vertices.size();
}

DirectedHypergraph from_graph(const Graph& g) {
  std::unordered_set<std::string> verts(g.vertices.begin(), g.vertices.end());
  if (verts.size() != g.vertices.size())
    throw std::invalid_argument("from_graph: duplicate vertex");
  auto check = [&](const std::string& v) {
    if (!verts.count(v)) throw std::invalid_argument("from_graph: unknown endpoint " + v);
  };
  std::map<std::string, std::set<std::string>> influences;
  for (const auto& v : g.vertices) influences[v];
  for (const auto& [u, v] : g.directed_edges) {
    check(u);
    check(v);
    influences[v].insert(u);
  }
  for (const auto& [u, v] : g.undirected_edges) {
    check(u);
    check(v);
    influences[v].insert(u);
    influences[u].insert(v);
  }
  DirectedHypergraph h;
  h.nodes.insert(g.vertices.begin(), g.vertices.end());
  for (const auto& v : g.vertices)
    h.arcs.push_back(Hyperarc{v, influences[v], {v}});
  h.validate();
  return h;
}

std::string noise_node_name(const std::string& arc_label) {
  return "U__" + arc_label;
}

DirectedHypergraph dagger(const DirectedHypergraph& a) {
  a.validate();
  DirectedHypergraph out;
  out.nodes = a.nodes;
  std::set<std::string> noise_nodes;
  for (const auto& arc : a.arcs) {
    std::string u = noise_node_name(arc.label);
    if (out.nodes.count(u))
      throw std::invalid_argument("dagger: noise node name collides with node " + u);
    if (noise_nodes.count(u))
      throw std::invalid_argument("dagger: duplicate noise node " + u);
    noise_nodes.insert(u);
  }
  out.nodes.insert(noise_nodes.begin(), noise_nodes.end());
  for (const auto& arc : a.arcs) {
    std::string u = noise_node_name(arc.label);
    std::set<std::string> mech_src = arc.sources;
    mech_src.insert(u);
    out.arcs.push_back(Hyperarc{arc.label + "__u", {}, {u}});
    out.arcs.push_back(Hyperarc{arc.label, mech_src, arc.targets});
  }
  out.arcs.push_back(Hyperarc{"__ctx__", noise_nodes, a.nodes});
  out.validate();
  return out;
}

DirectedHypergraph add_parallel_arcs(const DirectedHypergraph& a,
                                     const std::set<std::string>& x,
                                     const std::set<std::string>& y, std::size_t n) {
  for (const auto& v : x)
    if (!a.nodes.count(v)) throw std::invalid_argument("add_parallel_arcs: unknown node " + v);
  for (const auto& v : y)
    if (!a.nodes.count(v)) throw std::invalid_argument("add_parallel_arcs: unknown node " + v);
  DirectedHypergraph out = a;
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::string label;
    do {
      label = "p" + std::to_string(k++);
    } while (out.has_arc(label));
    out.arcs.push_back(Hyperarc{label, x, y});
  }
  out.validate();
  return out;
}

std::optional<std::map<std::string, std::string>> is_weakening(
    const DirectedHypergraph& stronger, const DirectedHypergraph& weaker) {
  stronger.validate();
  weaker.validate();
  // Admissible ι(a') = a requires Tgt a' <= Tgt a and Src a' >= Src a.
  std::vector<const Hyperarc*> left, right;
  for (const auto& a : weaker.arcs) left.push_back(&a);
  for (const auto& a : stronger.arcs) right.push_back(&a);
  auto by_label = [](const Hyperarc* p, const Hyperarc* q) { return p->label < q->label; };
  std::sort(left.begin(), left.end(), by_label);
  std::sort(right.begin(), right.end(), by_label);
  if (left.size() > right.size()) return std::nullopt;

  std::vector<std::vector<std::size_t>> adm(left.size());
  for (std::size_t i = 0; i < left.size(); ++i) {
    for (std::size_t j = 0; j < right.size(); ++j) {
      const auto& ap = *left[i];
      const auto& aa = *right[j];
      bool tgt_ok = std::includes(aa.targets.begin(), aa.targets.end(),
                                  ap.targets.begin(), ap.targets.end());
      bool src_ok = std::includes(ap.sources.begin(), ap.sources.end(),
                                  aa.sources.begin(), aa.sources.end());
      if (tgt_ok && src_ok) adm[i].push_back(j);
    }
    if (adm[i].empty()) return std::nullopt;
  }

  // Kuhn's augmenting-path matching; deterministic over label-sorted arcs.
  std::vector<int> match_right(right.size(), -1);
  std::function<bool(std::size_t, std::vector<char>&)> try_match =
      [&](std::size_t i, std::vector<char>& used) -> bool {
    for (std::size_t j : adm[i]) {
      if (used[j]) continue;
      used[j] = 1;
      if (match_right[j] < 0 || try_match(static_cast<std::size_t>(match_right[j]), used)) {
        match_right[j] = static_cast<int>(i);
        return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < left.size(); ++i) {
    std::vector<char> used(right.size(), 0);
    if (!try_match(i, used)) return std::nullopt;
  }
  std::map<std::string, std::string> iota;
  for (std::size_t j = 0; j < right.size(); ++j)
    if (match_right[j] >= 0)
      iota[left[static_cast<std::size_t>(match_right[j])]->label] = right[j]->label;
  return iota;
}

CoefficientVector coefficient_vector(const DirectedHypergraph& a,
                                     const std::vector<std::string>& variables) {
  a.validate();
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < variables.size(); ++i) pos[variables[i]] = i;
  if (pos.size() != variables.size())
    throw std::invalid_argument("coefficient_vector: repeated variable");
  if (variables.size() > 20)
    throw std::invalid_argument("coefficient_vector: too many variables");
  std::vector<std::size_t> src_mask(a.arcs.size(), 0), tgt_mask(a.arcs.size(), 0);
  for (std::size_t k = 0; k < a.arcs.size(); ++k) {
    for (const auto& s : a.arcs[k].sources) {
      auto it = pos.find(s);
      if (it == pos.end())
        throw std::invalid_argument("coefficient_vector: arc references unknown variable " + s);
      src_mask[k] |= std::size_t{1} << it->second;
    }
    for (const auto& t : a.arcs[k].targets) {
      auto it = pos.find(t);
      if (it == pos.end())
        throw std::invalid_argument("coefficient_vector: arc references unknown variable " + t);
      tgt_mask[k] |= std::size_t{1} << it->second;
    }
  }
  CoefficientVector cv;
  cv.variables = variables;
  cv.coeffs.assign(std::size_t{1} << variables.size(), 0);
  for (std::size_t w = 1; w < cv.coeffs.size(); ++w) {
    int c = -1;
    for (std::size_t k = 0; k < a.arcs.size(); ++k)
      if ((w & tgt_mask[k]) != 0 && (w & src_mask[k]) == 0) ++c;
    cv.coeffs[w] = c;
  }
  return cv;
}

}  // namespace qim
