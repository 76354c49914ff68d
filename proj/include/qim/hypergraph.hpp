#ifndef QIM_HYPERGRAPH_HPP_
#define QIM_HYPERGRAPH_HPP_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace qim {

// One mechanism: a directed hyperedge with a source set and a target set.
// Either side may be empty.  Labels distinguish parallel arcs.
struct Hyperarc {
  std::string label;
  std::set<std::string> sources;
  std::set<std::string> targets;
};

// Directed hypergraph: the qualitative structure of a PDG.  Node set must
// cover every arc endpoint; arc labels must be unique.
struct DirectedHypergraph {
  std::set<std::string> nodes;
  std::vector<Hyperarc> arcs;

  // Throws std::invalid_argument when an invariant is broken.
  void validate() const;
  const Hyperarc& arc(const std::string& label) const;
  bool has_arc(const std::string& label) const;
};

// A plain graph used as input to from_graph / decide_bn.  Undirected edges
// are identified with the pair of opposite directed edges.
struct Graph {
  std::vector<std::string> vertices;
  std::vector<std::pair<std::string, std::string>> directed_edges;
  std::vector<std::pair<std::string, std::string>> undirected_edges;

  bool is_dag() const;  // no undirected edges and the directed part is acyclic
};

// The hypergraph of a graph: one arc per vertex u, labeled u, with sources
// the in-neighbours of u and target {u}.
DirectedHypergraph from_graph(const Graph& g);

// Noise node name used throughout for the arc with the given label.
std::string noise_node_name(const std::string& arc_label);

// The dagger transform: for each arc a, a new node U_a with arcs 0 -> {U_a}
// and (Src a u {U_a}) -> Tgt a, plus one arc {all U_a} -> (all original
// nodes); the original arcs are removed.  Throws when a fresh node or arc
// label collides with an existing one.
DirectedHypergraph dagger(const DirectedHypergraph& a);

// Appends n fresh-labeled arcs from X to Y.
DirectedHypergraph add_parallel_arcs(const DirectedHypergraph& a,
                                     const std::set<std::string>& x,
                                     const std::set<std::string>& y,
                                     std::size_t n);

// Weakening test: an injective map iota from arcs of `weaker` to arcs of
// `stronger` with Tgt a' <= Tgt iota(a') and Src a' >= Src iota(a').
// Returns the map (weaker label -> stronger label) found by deterministic
// augmenting-path matching over arcs sorted by label, or nullopt.
std::optional<std::map<std::string, std::string>> is_weakening(
    const DirectedHypergraph& stronger, const DirectedHypergraph& weaker);

// Integer coefficients c(W) = -1 + |{a : W n Tgt a != 0 and W n Src a = 0}|
// over nonempty subsets W of `variables`; the dot product with an
// information profile over the same ordered variables equals IDef.
struct CoefficientVector {
  std::vector<std::string> variables;
  std::vector<int> coeffs;  // size 2^n, index by mask; coeffs[0] unused

  int coeff(std::size_t mask) const { return coeffs[mask]; }
};

CoefficientVector coefficient_vector(const DirectedHypergraph& a,
                                     const std::vector<std::string>& variables);

}  // namespace qim

#endif  // QIM_HYPERGRAPH_HPP_
