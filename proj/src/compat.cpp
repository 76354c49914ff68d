#include "qim/compat.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "qim/causal.hpp"
#include "qim/info.hpp"

namespace qim {

namespace {

std::vector<std::string> sorted_names(const std::set<std::string>& s) {
  return std::vector<std::string>(s.begin(), s.end());
}

std::vector<std::string> variable_names(const JointDistribution& d) {
  std::vector<std::string> out;
  out.reserve(d.num_variables());
  for (const auto& v : d.variables()) out.push_back(v.name);
  return out;
}

// Parents / descendants bookkeeping for a dag.
struct DagInfo {
  std::vector<std::string> vertices;
  std::map<std::string, std::set<std::string>> parents;
  std::map<std::string, std::set<std::string>> descendants;  // proper
};

DagInfo analyze_dag(const Graph& g) {
  if (!g.is_dag()) throw std::invalid_argument("graph must be a dag");
  DagInfo info;
  info.vertices = g.vertices;
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& v : g.vertices) {
    info.parents[v];
    info.descendants[v];
    out[v];
  }
  for (const auto& [u, v] : g.directed_edges) {
    info.parents[v].insert(u);
    out[u].push_back(v);
  }
  std::function<void(const std::string&, std::set<std::string>&)> dfs =
      [&](const std::string& u, std::set<std::string>& acc) {
        for (const auto& v : out[u])
          if (acc.insert(v).second) dfs(v, acc);
      };
  for (const auto& v : g.vertices) dfs(v, info.descendants[v]);
  return info;
}

std::vector<std::string> topological_order(const Graph& g) {
  DagInfo info = analyze_dag(g);
  std::vector<std::string> order;
  std::set<std::string> placed;
  while (order.size() < g.vertices.size()) {
    for (const auto& v : g.vertices) {
      if (placed.count(v)) continue;
      bool ready = true;
      for (const auto& p : info.parents[v])
        if (!placed.count(p)) {
          ready = false;
          break;
        }
      if (ready) {
        order.push_back(v);
        placed.insert(v);
      }
    }
  }
  return order;
}

// First violated ordered-Markov independence, as text; nullopt when none.
std::optional<std::string> bn_violation(const Graph& g, const JointDistribution& mu,
                                        double tol) {
  DagInfo info = analyze_dag(g);
  for (const auto& v : g.vertices)
    if (!mu.has_variable(v))
      throw std::invalid_argument("decide_bn: vertex " + v + " is not a variable");
  for (const auto& v : g.vertices) {
    std::set<std::string> nd;
    for (const auto& u : g.vertices)
      if (u != v && !info.descendants[v].count(u)) nd.insert(u);
    for (const auto& p : info.parents[v]) nd.erase(p);
    if (nd.empty()) continue;
    std::vector<std::string> pa = sorted_names(info.parents[v]);
    double mi = conditional_mutual_information(mu, {v}, sorted_names(nd), pa);
    if (mi > tol) {
      std::ostringstream os;
      os << "I(" << v << "; nondescendants | parents) = " << mi << " bits";
      return os.str();
    }
  }
  return std::nullopt;
}

// Structural match against the hypergraph of a graph: every node the target
// of exactly one arc, all targets singletons.  Returns the induced graph
// (possibly cyclic) and the arc label per vertex.
struct GraphLike {
  Graph graph;
  std::map<std::string, std::string> arc_of_vertex;
};

std::optional<GraphLike> as_graph_like(const DirectedHypergraph& h) {
  std::map<std::string, const Hyperarc*> arc_of;
  for (const auto& a : h.arcs) {
    if (a.targets.size() != 1) return std::nullopt;
    const std::string& t = *a.targets.begin();
    if (!arc_of.emplace(t, &a).second) return std::nullopt;
  }
  if (arc_of.size() != h.nodes.size()) return std::nullopt;
  GraphLike gl;
  gl.graph.vertices = sorted_names(h.nodes);
  for (const auto& [t, arc] : arc_of) {
    gl.arc_of_vertex[t] = arc->label;
    for (const auto& s : arc->sources) gl.graph.directed_edges.emplace_back(s, t);
  }
  return gl;
}

JointDistribution unit_noise(const std::string& arc_label) {
  Variable v;
  v.name = noise_node_name(arc_label);
  v.values = {"*"};
  return JointDistribution({v}, {1.0});
}

// Extends a witness with single-valued noise variables for extra arcs whose
// targets the witness already determines (constant or functional targets).
Witness add_unit_noises(Witness w, const std::vector<std::string>& arc_labels) {
  for (const auto& label : arc_labels) {
    JointDistribution u = unit_noise(label);
    w.arc_map[label] = u.variables()[0].name;
    w.joint = product(w.joint, u);
  }
  return w;
}

// Lifts a witness over a variable subset to the full distribution by gluing
// with the conditional independence  noise _||_ extra-variables | subset.
Witness glue_witness(const Witness& w, const JointDistribution& mu) {
  std::vector<std::string> base = w.base_vars;
  std::vector<std::string> noise;
  for (const auto& v : w.joint.variables())
    if (std::find(base.begin(), base.end(), v.name) == base.end())
      noise.push_back(v.name);
  bool covers_all = true;
  for (const auto& v : mu.variables())
    if (std::find(base.begin(), base.end(), v.name) == base.end()) covers_all = false;
  if (covers_all && base.size() == mu.num_variables()) {
    Witness out = w;
    out.base_vars = variable_names(mu);
    return out;
  }

  JointDistribution wx = marginal(w.joint, base);
  // Conditional nu(noise | base) from the witness.
  std::vector<std::string> order = base;
  order.insert(order.end(), noise.begin(), noise.end());
  JointDistribution wj = marginal(w.joint, order);  // reorder to base-then-noise
  std::size_t noise_space = 1;
  for (const auto& n : noise) noise_space *= wj.variable(n).cardinality();

  std::vector<Variable> vars = mu.variables();
  for (const auto& n : noise) vars.push_back(wj.variable(n));
  std::vector<std::size_t> base_pos;
  for (const auto& b : base) base_pos.push_back(mu.variable_position(b));

  std::vector<double> probs(mu.num_outcomes() * noise_space, 0.0);
  for (std::size_t y = 0; y < mu.num_outcomes(); ++y) {
    double py = mu.prob(y);
    if (py == 0.0) continue;
    // Index of the base projection inside wx / wj.
    std::size_t xk = 0;
    for (std::size_t i = 0; i < base.size(); ++i)
      xk = xk * mu.variables()[base_pos[i]].cardinality() + mu.digit(y, base_pos[i]);
    double px = wx.prob(xk);
    if (px <= 0.0)
      throw std::logic_error("glue_witness: base setting with zero witness mass");
    for (std::size_t u = 0; u < noise_space; ++u) {
      double pw = wj.prob(xk * noise_space + u);
      if (pw == 0.0) continue;
      probs[y * noise_space + u] += py * pw / px;
    }
  }
  Witness out;
  out.joint = JointDistribution(std::move(vars), std::move(probs));
  out.arc_map = w.arc_map;
  out.base_vars = variable_names(mu);
  return out;
}

bool is_point_mass(const JointDistribution& d, const std::vector<std::string>& vars,
                   double tol) {
  JointDistribution m = marginal(d, vars);
  std::size_t visible = 0;
  for (std::size_t i = 0; i < m.num_outcomes(); ++i)
    if (m.prob(i) > tol) ++visible;
  return visible == 1;
}

}  // namespace

WitnessReport verify_witness(const JointDistribution& mu, const DirectedHypergraph& a,
                             const Witness& w, double tol) {
  a.validate();
  WitnessReport report;
  report.tol = tol;

  std::set<std::string> base(w.base_vars.begin(), w.base_vars.end());
  if (base.size() != w.base_vars.size())
    throw std::invalid_argument("verify_witness: duplicate base variable");
  for (const auto& b : w.base_vars)
    if (!w.joint.has_variable(b))
      throw std::invalid_argument("verify_witness: base variable " + b + " missing from joint");
  for (const auto& v : mu.variables())
    if (!base.count(v.name))
      throw std::invalid_argument("verify_witness: witness base lacks variable " + v.name);

  std::set<std::string> noise_seen;
  std::vector<std::string> noise_in_arc_order;
  for (const auto& arc : a.arcs) {
    auto it = w.arc_map.find(arc.label);
    if (it == w.arc_map.end())
      throw std::invalid_argument("verify_witness: arc_map lacks arc " + arc.label);
    if (!w.joint.has_variable(it->second))
      throw std::invalid_argument("verify_witness: noise variable " + it->second +
                                  " missing from joint");
    if (base.count(it->second))
      throw std::invalid_argument("verify_witness: noise variable " + it->second +
                                  " clashes with a base variable");
    if (!noise_seen.insert(it->second).second)
      throw std::invalid_argument("verify_witness: noise variable " + it->second + " reused");
    noise_in_arc_order.push_back(it->second);
  }
  if (w.arc_map.size() != a.arcs.size())
    throw std::invalid_argument("verify_witness: arc_map does not match the hypergraph");
  if (base.size() + noise_seen.size() != w.joint.num_variables())
    throw std::invalid_argument("verify_witness: joint has variables outside base + noise");

  // (a) marginal match.
  JointDistribution back = marginal(w.joint, variable_names(mu));
  double dev = 0.0;
  for (std::size_t i = 0; i < mu.num_outcomes(); ++i)
    dev = std::max(dev, std::abs(back.prob(i) - mu.prob(i)));
  report.marginal_deviation = dev;
  report.marginal_ok = dev <= tol;

  // (b) mutual independence of the noises: D(w(U) || prod_a w(U_a)).
  if (noise_in_arc_order.empty()) {
    report.independence_gap_bits = 0.0;
    report.independence_ok = true;
  } else {
    JointDistribution joint_noise = marginal(w.joint, noise_in_arc_order);
    JointDistribution prod = marginal(w.joint, {noise_in_arc_order[0]});
    for (std::size_t i = 1; i < noise_in_arc_order.size(); ++i)
      prod = product(prod, marginal(w.joint, {noise_in_arc_order[i]}));
    double gap = kl_divergence(joint_noise, prod);
    report.independence_gap_bits = gap;
    report.independence_ok = gap <= tol;
  }

  // (c) per-arc determination.
  report.determinism_ok = true;
  for (const auto& arc : a.arcs) {
    std::vector<std::string> src = sorted_names(arc.sources);
    src.push_back(w.arc_map.at(arc.label));
    if (!check_determines(w.joint, src, sorted_names(arc.targets), tol)) {
      report.determinism_ok = false;
      report.failing_arcs.push_back(arc.label);
    }
  }
  return report;
}

bool decide_bn(const Graph& g, const JointDistribution& mu, double tol) {
  return !bn_violation(g, mu, tol).has_value();
}

Witness bn_witness(const Graph& g, const JointDistribution& mu, double tol) {
  if (!decide_bn(g, mu, tol))
    throw std::invalid_argument("bn_witness: distribution fails the BN independencies");
  std::set<std::string> verts(g.vertices.begin(), g.vertices.end());
  if (verts.size() != mu.num_variables())
    throw std::invalid_argument("bn_witness: graph vertices must equal the variables");
  for (const auto& v : g.vertices)
    if (!mu.has_variable(v))
      throw std::invalid_argument("bn_witness: vertex " + v + " is not a variable");

  DagInfo info = analyze_dag(g);
  std::vector<std::string> topo = topological_order(g);

  // Response-variable noise per vertex via the cpd derandomization.
  struct VertexNoise {
    std::vector<std::string> parents;       // sorted
    std::vector<std::size_t> parent_pos;    // positions in mu
    std::size_t parent_space = 1;
    JointDistribution dist;                 // single function-valued variable
  };
  std::map<std::string, VertexNoise> noise;
  for (const auto& v : g.vertices) {
    VertexNoise vn;
    vn.parents = sorted_names(info.parents[v]);
    for (const auto& p : vn.parents) vn.parent_pos.push_back(mu.variable_position(p));
    for (const auto& p : vn.parents) vn.parent_space *= mu.variable(p).cardinality();

    const Variable& out_var = mu.variable(v);
    std::vector<std::string> pa_and_v = vn.parents;
    pa_and_v.push_back(v);
    JointDistribution pav = marginal(mu, pa_and_v);
    std::vector<std::vector<double>> rows(vn.parent_space,
                                          std::vector<double>(out_var.cardinality(), 0.0));
    std::vector<double> mass(vn.parent_space, 0.0);
    for (std::size_t i = 0; i < pav.num_outcomes(); ++i) {
      std::size_t pk = i / out_var.cardinality();
      std::size_t vk = i % out_var.cardinality();
      rows[pk][vk] += pav.prob(i);
      mass[pk] += pav.prob(i);
    }
    for (std::size_t pk = 0; pk < vn.parent_space; ++pk) {
      if (mass[pk] > 0.0)
        for (double& r : rows[pk]) r /= mass[pk];
      else
        for (double& r : rows[pk]) r = 1.0 / static_cast<double>(out_var.cardinality());
    }
    std::vector<Variable> inputs;
    for (const auto& p : vn.parents) inputs.push_back(mu.variable(p));
    vn.dist = derandomize_cpd(inputs, out_var, rows, noise_node_name(v));
    noise.emplace(v, std::move(vn));
  }

  // Joint over noise, in graph-vertex order; then push forward through the
  // topological evaluation.
  std::vector<std::string> noise_order;
  JointDistribution noise_joint;
  bool first = true;
  for (const auto& v : g.vertices) {
    noise_order.push_back(v);
    noise_joint = first ? noise[v].dist : product(noise_joint, noise[v].dist);
    first = false;
  }

  std::vector<Variable> vars = mu.variables();
  for (const auto& nv : noise_joint.variables()) vars.push_back(nv);
  std::size_t x_space = mu.num_outcomes();
  std::vector<double> probs(x_space * noise_joint.num_outcomes(), 0.0);

  std::vector<std::size_t> vpos(g.vertices.size());
  std::map<std::string, std::size_t> noise_pos;
  for (std::size_t i = 0; i < noise_order.size(); ++i) noise_pos[noise_order[i]] = i;

  std::vector<std::size_t> x_digits(mu.num_variables(), 0);
  for (std::size_t u = 0; u < noise_joint.num_outcomes(); ++u) {
    double pu = noise_joint.prob(u);
    if (pu == 0.0) continue;
    std::vector<std::size_t> u_digits = noise_joint.decode(u);
    // Evaluate each vertex in topological order.
    std::fill(x_digits.begin(), x_digits.end(), 0);
    for (const auto& v : topo) {
      const VertexNoise& vn = noise.at(v);
      std::size_t pk = 0;
      for (std::size_t i = 0; i < vn.parents.size(); ++i)
        pk = pk * mu.variable(vn.parents[i]).cardinality() + x_digits[vn.parent_pos[i]];
      // Response function component: parent setting pk, last setting fastest.
      std::size_t g_raw = u_digits[noise_pos.at(v)];
      std::size_t card = mu.variable(v).cardinality();
      std::size_t div = 1;
      for (std::size_t i = vn.parent_space; i-- > pk + 1;) div *= card;
      x_digits[mu.variable_position(v)] = (g_raw / div) % card;
    }
    std::size_t x_idx = mu.index_of(x_digits);
    probs[x_idx * noise_joint.num_outcomes() + u] += pu;
  }

  Witness w;
  w.joint = JointDistribution(std::move(vars), std::move(probs));
  w.base_vars = variable_names(mu);
  for (const auto& v : g.vertices) w.arc_map[v] = noise_node_name(v);
  return w;
}

Witness transport_witness(const DirectedHypergraph& a, const DirectedHypergraph& a_weaker,
                          const std::map<std::string, std::string>& iota, const Witness& w) {
  a.validate();
  a_weaker.validate();
  std::set<std::string> used;
  for (const auto& arc : a_weaker.arcs) {
    auto it = iota.find(arc.label);
    if (it == iota.end())
      throw std::invalid_argument("transport_witness: map lacks arc " + arc.label);
    const Hyperarc& img = a.arc(it->second);
    if (!used.insert(it->second).second)
      throw std::invalid_argument("transport_witness: map is not injective");
    if (!std::includes(img.targets.begin(), img.targets.end(), arc.targets.begin(),
                       arc.targets.end()) ||
        !std::includes(arc.sources.begin(), arc.sources.end(), img.sources.begin(),
                       img.sources.end()))
      throw std::invalid_argument("transport_witness: map violates the weakening relation");
    if (!w.arc_map.count(it->second))
      throw std::invalid_argument("transport_witness: witness lacks noise for arc " + it->second);
  }

  // Keep base variables plus the noises of image arcs, in weaker-arc order.
  std::vector<std::string> keep = w.base_vars;
  for (const auto& arc : a_weaker.arcs) keep.push_back(w.arc_map.at(iota.at(arc.label)));
  JointDistribution reduced = marginal(w.joint, keep);

  // Rename the kept noises positionally to the weaker arcs' conventions.
  std::vector<Variable> vars = reduced.variables();
  Witness out;
  for (std::size_t i = 0; i < a_weaker.arcs.size(); ++i) {
    std::string fresh = noise_node_name(a_weaker.arcs[i].label);
    vars[w.base_vars.size() + i].name = fresh;
    out.arc_map[a_weaker.arcs[i].label] = fresh;
  }
  out.joint = JointDistribution(std::move(vars), std::vector<double>(reduced.probs()));
  out.base_vars = w.base_vars;
  return out;
}

ParallelFuncReport decide_parallel_func(const DirectedHypergraph& a,
                                        const std::set<std::string>& x,
                                        const std::set<std::string>& y, std::size_t n,
                                        const JointDistribution& mu,
                                        ParallelFuncClause clause,
                                        const DecideOptions& options) {
  a.validate();
  ParallelFuncReport report;
  bool determines = check_determines(mu, std::vector<std::string>(x.begin(), x.end()),
                                     std::vector<std::string>(y.begin(), y.end()),
                                     options.tol);
  if (clause == ParallelFuncClause::B) {
    auto gl = as_graph_like(a);
    if (!gl || !gl->graph.is_dag())
      throw std::invalid_argument("decide_parallel_func: clause (b) needs a dag hypergraph");
    if (n < 1)
      throw std::invalid_argument("decide_parallel_func: clause (b) needs n >= 1");
    report.lhs = determines && decide_bn(gl->graph, mu, options.tol);
    report.verdict = report.lhs;
  } else {
    if (n < 2)
      throw std::invalid_argument("decide_parallel_func: clause (c) needs n >= 2");
    if (!x.empty()) {
      bool side = false;
      for (const auto& arc : a.arcs)
        if (arc.sources.empty() &&
            std::includes(arc.targets.begin(), arc.targets.end(), x.begin(), x.end()))
          side = true;
      if (!side)
        throw std::invalid_argument(
            "decide_parallel_func: clause (c) needs an unconditional mechanism covering X");
    }
    CompatVerdict base = decide_general(a, mu, options);
    if (base.status == CompatStatus::Unknown && determines)
      throw std::runtime_error("decide_parallel_func: base compatibility undecided");
    report.lhs = determines && base.status == CompatStatus::Compatible;
    report.verdict = report.lhs;
  }

  // Cross-check against the general decision on the augmented graph.
  DirectedHypergraph augmented = add_parallel_arcs(a, x, y, n);
  DecideOptions sub = options;
  sub.enable_siminc = false;  // keep the cross-check cheap and exact-only
  CompatVerdict rhs = decide_general(augmented, mu, sub);
  if (rhs.status != CompatStatus::Unknown) {
    report.rhs = rhs.status == CompatStatus::Compatible;
    report.sides_agree = (*report.rhs == report.verdict);
  }
  return report;
}

CompatVerdict decide_general(const DirectedHypergraph& a, const JointDistribution& mu,
                             const DecideOptions& options) {
  a.validate();
  for (const auto& arc : a.arcs) {
    for (const auto& s : arc.sources)
      if (!mu.has_variable(s))
        throw std::invalid_argument("decide_general: arc references unknown variable " + s);
    for (const auto& t : arc.targets)
      if (!mu.has_variable(t))
        throw std::invalid_argument("decide_general: arc references unknown variable " + t);
  }

  CompatVerdict verdict;
  double idef_bits = idef(a, mu);

  // --- Two-parallel-unconditional-arcs reduction (the two-coin determinism
  // pattern): a pair of arcs 0 -> T forces T to be constant, and once it is,
  // both arcs carry unit noise.
  DirectedHypergraph work = a;
  std::vector<std::string> pair_arcs;  // re-added later with unit noise
  bool reduced = true;
  while (reduced) {
    reduced = false;
    for (std::size_t i = 0; i < work.arcs.size() && !reduced; ++i) {
      if (!work.arcs[i].sources.empty() || work.arcs[i].targets.empty()) continue;
      for (std::size_t j = i + 1; j < work.arcs.size() && !reduced; ++j) {
        if (!work.arcs[j].sources.empty()) continue;
        if (work.arcs[j].targets != work.arcs[i].targets) continue;
        std::vector<std::string> t = sorted_names(work.arcs[i].targets);
        if (!is_point_mass(mu, t, options.tol)) {
          Certificate cert;
          cert.kind = "example-3";
          cert.idef_bits = idef_bits;
          cert.detail = "two independent unconditional mechanisms target a non-constant set";
          verdict.status = CompatStatus::Incompatible;
          verdict.certificate = cert;
          return verdict;
        }
        pair_arcs.push_back(work.arcs[i].label);
        pair_arcs.push_back(work.arcs[j].label);
        work.arcs.erase(work.arcs.begin() + j);
        work.arcs.erase(work.arcs.begin() + i);
        reduced = true;
      }
    }
  }

  auto finish_compatible = [&](Witness w, const std::vector<std::string>& unit_arcs,
                               const std::string& note) {
    w = add_unit_noises(std::move(w), unit_arcs);
    WitnessReport check = verify_witness(mu, a, w, options.verify_tol);
    if (!check.ok())
      throw std::logic_error("decide_general: constructed witness failed verification");
    verdict.status = CompatStatus::Compatible;
    verdict.witness = std::move(w);
    verdict.note = note;
    return verdict;
  };

  if (work.arcs.empty()) {
    Witness w;
    w.joint = mu;
    w.base_vars = variable_names(mu);
    return finish_compatible(std::move(w), pair_arcs, "no mechanisms remain after reduction");
  }

  // --- Exact dag case (Theorem 1), with parallel arcs over the dag folded
  // into functional-dependence requirements (Theorem 2(b)).  Deduplication
  // is sound only here: over cyclic bases parallel arcs do not imply
  // determination, so they are kept verbatim everywhere else.
  {
    DirectedHypergraph dedup = work;
    std::vector<std::string> dropped;
    std::vector<std::pair<std::set<std::string>, std::set<std::string>>> dup_groups;
    std::map<std::pair<std::vector<std::string>, std::vector<std::string>>,
             std::vector<std::size_t>>
        groups;
    for (std::size_t i = 0; i < work.arcs.size(); ++i)
      groups[{sorted_names(work.arcs[i].sources), sorted_names(work.arcs[i].targets)}]
          .push_back(i);
    std::vector<std::size_t> drop;
    for (const auto& [key, idxs] : groups)
      if (idxs.size() >= 2) {
        dup_groups.emplace_back(work.arcs[idxs[0]].sources, work.arcs[idxs[0]].targets);
        for (std::size_t k = 1; k < idxs.size(); ++k) drop.push_back(idxs[k]);
      }
    std::sort(drop.begin(), drop.end(), std::greater<>());
    for (std::size_t i : drop) {
      dropped.push_back(dedup.arcs[i].label);
      dedup.arcs.erase(dedup.arcs.begin() + i);
    }

    auto gl = as_graph_like(dedup);
    if (gl && gl->graph.is_dag()) {
      for (const auto& [src, tgt] : dup_groups) {
        if (!check_determines(mu, sorted_names(src), sorted_names(tgt), options.tol)) {
          Certificate cert;
          cert.kind = "theorem-2b";
          cert.idef_bits = idef_bits;
          cert.detail = "parallel mechanisms require a functional dependence that fails";
          verdict.status = CompatStatus::Incompatible;
          verdict.certificate = cert;
          return verdict;
        }
      }
      std::vector<std::string> verts = gl->graph.vertices;
      JointDistribution mu_v = marginal(mu, verts);
      if (auto violation = bn_violation(gl->graph, mu_v, options.tol)) {
        Certificate cert;
        cert.kind = "theorem-1";
        cert.idef_bits = idef_bits;
        cert.detail = *violation;
        verdict.status = CompatStatus::Incompatible;
        verdict.certificate = cert;
        return verdict;
      }
      Witness w = bn_witness(gl->graph, mu_v, options.tol);
      // Arc labels of the hypergraph may differ from vertex names.
      std::vector<Variable> vars = w.joint.variables();
      Witness relabeled;
      relabeled.base_vars = w.base_vars;
      for (const auto& [vertex, arc_label] : gl->arc_of_vertex) {
        std::string old_name = w.arc_map.at(vertex);
        std::string fresh = noise_node_name(arc_label);
        for (auto& var : vars)
          if (var.name == old_name) var.name = fresh;
        relabeled.arc_map[arc_label] = fresh;
      }
      relabeled.joint = JointDistribution(std::move(vars), std::vector<double>(w.joint.probs()));
      std::vector<std::string> units = pair_arcs;
      units.insert(units.end(), dropped.begin(), dropped.end());
      return finish_compatible(glue_witness(relabeled, mu), units, "exact dag case");
    }
  }

  // --- IDef certificate.
  if (idef_bits > options.tol) {
    Certificate cert;
    cert.kind = "idef";
    cert.idef_bits = idef_bits;
    cert.detail = "information deficiency exceeds zero";
    verdict.status = CompatStatus::Incompatible;
    verdict.certificate = cert;
    return verdict;
  }

  // --- Weakening probe: `work` weakens every source-pruned dag, so a BN
  // witness for any pruned vertex order transports to it.
  if (options.enable_dag_probe && work.nodes.size() <= 7) {
    bool singleton_targets = true;
    std::map<std::string, const Hyperarc*> arc_of_target;
    for (const auto& arc : work.arcs) {
      if (arc.targets.size() != 1 ||
          !arc_of_target.emplace(*arc.targets.begin(), &arc).second) {
        singleton_targets = false;
        break;
      }
    }
    if (singleton_targets) {
      std::vector<std::string> verts = sorted_names(work.nodes);
      JointDistribution mu_v = marginal(mu, verts);
      std::vector<std::string> order = verts;
      do {
        std::map<std::string, std::size_t> rank;
        for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
        Graph pruned;
        pruned.vertices = verts;
        for (const auto& v : verts) {
          auto it = arc_of_target.find(v);
          if (it != arc_of_target.end()) {
            for (const auto& s : it->second->sources)
              if (rank[s] < rank[v]) pruned.directed_edges.emplace_back(s, v);
          } else {
            // Untargeted node: unconstrained, so give it all predecessors.
            for (const auto& s : verts)
              if (rank[s] < rank[v]) pruned.directed_edges.emplace_back(s, v);
          }
        }
        if (decide_bn(pruned, mu_v, options.tol)) {
          DirectedHypergraph a_pruned = from_graph(pruned);
          if (auto iota = is_weakening(a_pruned, work)) {
            Witness w0 = bn_witness(pruned, mu_v, options.tol);
            Witness wt = transport_witness(a_pruned, work, *iota, w0);
            return finish_compatible(glue_witness(wt, mu), pair_arcs,
                                     "weakening of a pruned dag");
          }
        }
      } while (std::next_permutation(order.begin(), order.end()));
    }
  }

  // --- SIMInc search.
  if (options.enable_siminc) {
    SimincResult res = siminc(work, mu, options.siminc);
    verdict.siminc = res;
    if (res.value_bits < options.compatible_below) {
      Witness w;
      w.joint = res.witness_candidate;
      w.base_vars = res.base_vars;
      w.arc_map = res.arc_noise_names;
      w = add_unit_noises(std::move(w), pair_arcs);
      WitnessReport check = verify_witness(mu, a, w, options.verify_tol);
      if (check.ok()) {
        verdict.status = CompatStatus::Compatible;
        verdict.witness = std::move(w);
        verdict.note = "optimizer witness verified";
        return verdict;
      }
      verdict.note = "SIMInc below threshold but witness verification failed";
    } else if (res.value_bits < options.unknown_below) {
      verdict.note = "SIMInc inconclusive (local optimum between thresholds)";
    } else {
      verdict.note = "SIMInc found no witness; large values are not sound certificates";
    }
  }
  verdict.status = CompatStatus::Unknown;
  return verdict;
}

}  // namespace qim
