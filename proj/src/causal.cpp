#include "qim/causal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "qim/info.hpp"

namespace qim {

namespace {

std::vector<std::string> sorted_names(const std::set<std::string>& s) {
  return std::vector<std::string>(s.begin(), s.end());
}

}  // namespace

GRPSEM::GRPSEM(DirectedHypergraph structure, std::vector<Variable> endogenous,
               std::vector<Variable> noise, std::vector<std::vector<double>> noise_probs,
               std::vector<std::vector<std::size_t>> equations)
    : structure_(std::move(structure)),
      endo_(std::move(endogenous)),
      noise_(std::move(noise)),
      noise_probs_(std::move(noise_probs)),
      equations_(std::move(equations)) {
  structure_.validate();
  std::size_t n_arcs = structure_.arcs.size();
  if (noise_.size() != n_arcs || noise_probs_.size() != n_arcs || equations_.size() != n_arcs)
    throw std::invalid_argument("GRPSEM: one noise variable, distribution and equation per arc");

  std::unordered_map<std::string, std::size_t> endo_pos;
  for (std::size_t i = 0; i < endo_.size(); ++i) {
    if (!endo_pos.emplace(endo_[i].name, i).second)
      throw std::invalid_argument("GRPSEM: duplicate endogenous variable " + endo_[i].name);
    endo_space_ *= endo_[i].cardinality();
  }
  for (const auto& n : structure_.nodes)
    if (!endo_pos.count(n))
      throw std::invalid_argument("GRPSEM: node " + n + " lacks an endogenous variable");

  src_pos_.resize(n_arcs);
  tgt_pos_.resize(n_arcs);
  src_space_.assign(n_arcs, 1);
  tgt_space_.assign(n_arcs, 1);
  for (std::size_t k = 0; k < n_arcs; ++k) {
    const auto& arc = structure_.arcs[k];
    for (const auto& s : sorted_names(arc.sources)) src_pos_[k].push_back(endo_pos.at(s));
    for (const auto& t : sorted_names(arc.targets)) tgt_pos_[k].push_back(endo_pos.at(t));
    std::sort(src_pos_[k].begin(), src_pos_[k].end());
    std::sort(tgt_pos_[k].begin(), tgt_pos_[k].end());
    for (std::size_t p : src_pos_[k]) src_space_[k] *= endo_[p].cardinality();
    for (std::size_t p : tgt_pos_[k]) tgt_space_[k] *= endo_[p].cardinality();

    if (noise_[k].values.empty())
      throw std::invalid_argument("GRPSEM: empty noise space on arc " + arc.label);
    if (noise_probs_[k].size() != noise_[k].cardinality())
      throw std::invalid_argument("GRPSEM: noise distribution shape mismatch on arc " + arc.label);
    double sum = 0.0;
    for (double p : noise_probs_[k]) {
      if (!(p >= 0.0)) throw std::invalid_argument("GRPSEM: negative noise probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("GRPSEM: noise distribution on arc " + arc.label +
                                  " sums to " + std::to_string(sum));
    for (double& p : noise_probs_[k]) p /= sum;
    noise_space_ *= noise_[k].cardinality();

    if (equations_[k].size() != src_space_[k] * noise_[k].cardinality())
      throw std::invalid_argument("GRPSEM: equation table on arc " + arc.label +
                                  " is not total");
    for (std::size_t v : equations_[k])
      if (v >= tgt_space_[k])
        throw std::invalid_argument("GRPSEM: equation output out of range on arc " + arc.label);
  }
}

std::size_t GRPSEM::endo_position(const std::string& name) const {
  for (std::size_t i = 0; i < endo_.size(); ++i)
    if (endo_[i].name == name) return i;
  throw std::invalid_argument("GRPSEM: unknown endogenous variable " + name);
}

std::size_t GRPSEM::arc_position(const std::string& label) const {
  for (std::size_t i = 0; i < structure_.arcs.size(); ++i)
    if (structure_.arcs[i].label == label) return i;
  throw std::invalid_argument("GRPSEM: unknown arc " + label);
}

std::size_t GRPSEM::src_index(std::size_t arc, const std::vector<std::size_t>& endo) const {
  std::size_t k = 0;
  for (std::size_t p : src_pos_[arc]) k = k * endo_[p].cardinality() + endo[p];
  return k;
}

std::size_t GRPSEM::tgt_index(std::size_t arc, const std::vector<std::size_t>& endo) const {
  std::size_t k = 0;
  for (std::size_t p : tgt_pos_[arc]) k = k * endo_[p].cardinality() + endo[p];
  return k;
}

std::size_t GRPSEM::eval_equation(std::size_t arc, std::size_t src_idx,
                                  std::size_t u_idx) const {
  return equations_[arc][src_idx * noise_[arc].cardinality() + u_idx];
}

double GRPSEM::noise_setting_prob(const std::vector<std::size_t>& u) const {
  double p = 1.0;
  for (std::size_t k = 0; k < noise_.size(); ++k) p *= noise_probs_[k][u[k]];
  return p;
}

JointDistribution derandomize_cpd(const std::vector<Variable>& inputs,
                                  const Variable& output,
                                  const std::vector<std::vector<double>>& rows,
                                  const std::string& function_var_name) {
  std::size_t in_space = 1;
  for (const auto& v : inputs) in_space *= v.cardinality();
  if (rows.size() != in_space)
    throw std::invalid_argument("derandomize_cpd: one row per input setting required");
  std::size_t card = output.cardinality();
  for (const auto& row : rows) {
    if (row.size() != card)
      throw std::invalid_argument("derandomize_cpd: row width mismatch");
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) throw std::invalid_argument("derandomize_cpd: negative entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("derandomize_cpd: row sums to " + std::to_string(sum));
  }

  double lg = static_cast<double>(in_space) * std::log2(static_cast<double>(card));
  if (lg > 26.0)
    throw std::invalid_argument("derandomize_cpd: function space too large to enumerate");
  std::size_t n_funcs = 1;
  for (std::size_t i = 0; i < in_space; ++i) n_funcs *= card;

  // Function g is indexed with its response to input setting 0 most
  // significant and the response to the last input setting fastest:
  //   q(g) = prod_s rows[s][g(s)].
  Variable fv;
  fv.name = function_var_name;
  fv.values.reserve(n_funcs);
  for (std::size_t g = 0; g < n_funcs; ++g) fv.values.push_back("g" + std::to_string(g));
  std::vector<double> probs(n_funcs, 1.0);
  for (std::size_t g = 0; g < n_funcs; ++g) {
    std::size_t raw = g;
    for (std::size_t s = in_space; s-- > 0;) {
      probs[g] *= rows[s][raw % card];
      raw /= card;
    }
  }
  return JointDistribution({std::move(fv)}, std::move(probs));
}

std::vector<std::vector<std::size_t>> solutions(const GRPSEM& m,
                                                const std::vector<std::size_t>& u) {
  if (u.size() != m.noise().size())
    throw std::invalid_argument("solutions: noise setting arity mismatch");
  for (std::size_t k = 0; k < u.size(); ++k)
    if (u[k] >= m.noise()[k].cardinality())
      throw std::invalid_argument("solutions: noise value out of range");

  std::vector<std::vector<std::size_t>> sols;
  std::size_t n_vars = m.endogenous().size();
  std::vector<std::size_t> x(n_vars, 0);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == n_vars) {
      for (std::size_t k = 0; k < m.num_arcs(); ++k) {
        if (m.tgt_positions(k).empty()) continue;
        if (m.eval_equation(k, m.src_index(k, x), u[k]) != m.tgt_index(k, x)) return;
      }
      sols.push_back(x);
      return;
    }
    for (std::size_t v = 0; v < m.endogenous()[i].cardinality(); ++v) {
      x[i] = v;
      rec(i + 1);
    }
  };
  rec(0);
  return sols;
}

namespace {

// Positions of the model's endogenous and noise variables inside nu.
struct NuLayout {
  std::vector<std::size_t> endo_pos, noise_pos;
};

NuLayout layout_of(const GRPSEM& m, const JointDistribution& nu) {
  NuLayout lay;
  if (nu.num_variables() != m.endogenous().size() + m.noise().size())
    throw std::invalid_argument("distribution does not cover exactly the model variables");
  for (const auto& v : m.endogenous()) {
    std::size_t p = nu.variable_position(v.name);
    if (nu.variables()[p].values != v.values)
      throw std::invalid_argument("value list mismatch for variable " + v.name);
    lay.endo_pos.push_back(p);
  }
  for (const auto& v : m.noise()) {
    std::size_t p = nu.variable_position(v.name);
    if (nu.variables()[p].values != v.values)
      throw std::invalid_argument("value list mismatch for noise variable " + v.name);
    lay.noise_pos.push_back(p);
  }
  return lay;
}

}  // namespace

bool in_solution_set(const GRPSEM& m, const JointDistribution& nu, double tol) {
  NuLayout lay = layout_of(m, nu);

  // Equation support: mass on non-solution points must be within tol.
  double bad_mass = 0.0;
  std::vector<std::size_t> x(m.endogenous().size()), u(m.noise().size());
  for (std::size_t idx = 0; idx < nu.num_outcomes(); ++idx) {
    double p = nu.prob(idx);
    if (p == 0.0) continue;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = nu.digit(idx, lay.endo_pos[i]);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = nu.digit(idx, lay.noise_pos[k]);
    for (std::size_t k = 0; k < m.num_arcs(); ++k) {
      if (m.tgt_positions(k).empty()) continue;
      if (m.eval_equation(k, m.src_index(k, x), u[k]) != m.tgt_index(k, x)) {
        bad_mass += p;
        break;
      }
    }
  }
  if (bad_mass > tol) return false;

  // Noise marginal must match the independent product.
  std::vector<std::string> noise_names;
  for (const auto& v : m.noise()) noise_names.push_back(v.name);
  JointDistribution nmarg = marginal(nu, noise_names);
  for (std::size_t idx = 0; idx < nmarg.num_outcomes(); ++idx) {
    std::vector<std::size_t> uu = nmarg.decode(idx);
    if (std::abs(nmarg.prob(idx) - m.noise_setting_prob(uu)) > tol) return false;
  }
  return true;
}

JointDistribution arising_distribution(const GRPSEM& m) {
  std::vector<Variable> vars = m.endogenous();
  for (const auto& v : m.noise()) vars.push_back(v);
  std::size_t noise_space = m.noise_space_size();
  std::vector<double> probs(m.endo_space_size() * noise_space, 0.0);

  std::vector<std::size_t> u(m.noise().size(), 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t k, std::size_t u_idx) {
    if (k == u.size()) {
      auto sols = solutions(m, u);
      if (sols.size() != 1) {
        std::ostringstream os;
        os << "arising_distribution: context has " << sols.size() << " solutions";
        throw std::domain_error(os.str());
      }
      double pu = m.noise_setting_prob(u);
      std::size_t x_idx = 0;
      for (std::size_t i = 0; i < m.endogenous().size(); ++i)
        x_idx = x_idx * m.endogenous()[i].cardinality() + sols[0][i];
      probs[x_idx * noise_space + u_idx] += pu;
      return;
    }
    for (std::size_t v = 0; v < m.noise()[k].cardinality(); ++v) {
      u[k] = v;
      rec(k + 1, u_idx * m.noise()[k].cardinality() + v);
    }
  };
  rec(0, 0);
  return JointDistribution(std::move(vars), std::move(probs));
}

std::pair<GRPSEM, bool> witness_to_psem(const Witness& w, const DirectedHypergraph& a) {
  a.validate();
  // Construction requires pairwise-disjoint targets.
  std::set<std::string> seen_targets;
  for (const auto& arc : a.arcs)
    for (const auto& t : arc.targets)
      if (!seen_targets.insert(t).second)
        throw std::invalid_argument(
            "witness_to_psem: arcs share target " + t +
            "; no single-equation-per-variable model exists - keep the generalized form");

  // Endogenous variables: the hypergraph nodes, ordered as in the witness.
  std::vector<Variable> endo;
  for (const auto& v : w.joint.variables())
    if (a.nodes.count(v.name)) endo.push_back(v);
  if (endo.size() != a.nodes.size())
    throw std::invalid_argument("witness_to_psem: witness lacks some hypergraph node");

  std::vector<Variable> noise;
  std::vector<std::vector<double>> noise_probs;
  std::vector<std::vector<std::size_t>> equations;
  bool unique = true;

  for (const auto& arc : a.arcs) {
    auto it = w.arc_map.find(arc.label);
    if (it == w.arc_map.end())
      throw std::invalid_argument("witness_to_psem: witness lacks noise for arc " + arc.label);
    Variable uvar = w.joint.variable(it->second);
    // Rename to the model convention so models and witnesses compose.
    std::string fresh = noise_node_name(arc.label);
    JointDistribution umarg = marginal(w.joint, {uvar.name});

    std::vector<std::string> src = sorted_names(arc.sources);
    std::vector<std::string> tgt = sorted_names(arc.targets);
    std::vector<std::string> all = src;
    all.push_back(uvar.name);
    for (const auto& t : tgt) all.push_back(t);
    JointDistribution sut = marginal(w.joint, all);

    std::size_t s_space = 1, t_space = 1, u_card = uvar.cardinality();
    for (const auto& s : src) s_space *= w.joint.variable(s).cardinality();
    for (const auto& t : tgt) t_space *= w.joint.variable(t).cardinality();

    std::vector<std::size_t> table(s_space * u_card, 0);
    for (std::size_t sk = 0; sk < s_space; ++sk) {
      for (std::size_t uk = 0; uk < u_card; ++uk) {
        // Row of sut: index = ((sk * u_card) + uk) * t_space + tk.
        std::size_t best = 0;
        double best_p = -1.0;
        double row_mass = 0.0;
        for (std::size_t tk = 0; tk < t_space; ++tk) {
          double p = sut.prob((sk * u_card + uk) * t_space + tk);
          row_mass += p;
          if (p > best_p) {
            best_p = p;
            best = tk;
          }
        }
        if (row_mass <= 0.0) {
          unique = false;
          best = 0;  // lexicographically smallest target value
        }
        table[sk * u_card + uk] = best;
      }
    }
    uvar.name = fresh;
    noise.push_back(uvar);
    noise_probs.push_back(umarg.probs());
    equations.push_back(std::move(table));
  }

  GRPSEM m(a, std::move(endo), std::move(noise), std::move(noise_probs), std::move(equations));
  return {std::move(m), unique};
}

namespace {

// Arc targeting each intervened variable; throws unless unique.
std::map<std::string, std::size_t> intervened_arcs(const GRPSEM& m,
                                                   const std::map<std::string, std::string>& asg) {
  std::map<std::string, std::size_t> arc_of;
  for (const auto& [var, value] : asg) {
    (void)value;
    std::optional<std::size_t> found;
    for (std::size_t k = 0; k < m.num_arcs(); ++k) {
      if (m.structure().arcs[k].targets.count(var)) {
        if (found)
          throw std::invalid_argument("multiple arcs target intervened variable " + var);
        found = k;
      }
    }
    if (!found)
      throw std::invalid_argument("intervened variable " + var + " is not a target of any arc");
    arc_of[var] = *found;
  }
  return arc_of;
}

}  // namespace

GRPSEM intervene(const GRPSEM& m, const std::map<std::string, std::string>& assignment) {
  std::map<std::string, std::size_t> arc_of = intervened_arcs(m, assignment);
  std::vector<std::vector<std::size_t>> equations = m.equations();
  for (const auto& [var, value] : assignment) {
    std::size_t k = arc_of.at(var);
    std::size_t vi = m.endogenous()[m.endo_position(var)].value_index(value);
    // Overwrite the var's component of every equation row with the constant.
    const auto& tpos = m.tgt_positions(k);
    std::size_t t_space_after = 1;
    std::size_t comp_card = 0, comp_pos = 0;
    for (std::size_t i = 0; i < tpos.size(); ++i)
      if (m.endogenous()[tpos[i]].name == var) comp_pos = i;
    comp_card = m.endogenous()[tpos[comp_pos]].cardinality();
    for (std::size_t i = comp_pos + 1; i < tpos.size(); ++i)
      t_space_after *= m.endogenous()[tpos[i]].cardinality();
    for (auto& out : equations[k]) {
      std::size_t rest_low = out % t_space_after;
      std::size_t rest_high = out / (t_space_after * comp_card);
      out = (rest_high * comp_card + vi) * t_space_after + rest_low;
    }
  }
  return GRPSEM(m.structure(), m.endogenous(), m.noise(), m.noise_probs(),
                std::move(equations));
}

Event do_event(const GRPSEM& m, const std::map<std::string, std::string>& assignment) {
  std::map<std::string, std::size_t> arc_of = intervened_arcs(m, assignment);

  // Per intervened variable: admissible noise values of its arc.
  std::vector<std::set<std::size_t>> admissible(m.num_arcs());
  for (std::size_t k = 0; k < m.num_arcs(); ++k)
    for (std::size_t v = 0; v < m.noise()[k].cardinality(); ++v) admissible[k].insert(v);

  for (const auto& [var, value] : assignment) {
    std::size_t k = arc_of.at(var);
    std::size_t vi = m.endogenous()[m.endo_position(var)].value_index(value);
    const auto& tpos = m.tgt_positions(k);
    std::size_t comp_pos = 0;
    for (std::size_t i = 0; i < tpos.size(); ++i)
      if (m.endogenous()[tpos[i]].name == var) comp_pos = i;
    std::size_t t_space_after = 1;
    for (std::size_t i = comp_pos + 1; i < tpos.size(); ++i)
      t_space_after *= m.endogenous()[tpos[i]].cardinality();
    std::size_t comp_card = m.endogenous()[tpos[comp_pos]].cardinality();

    std::set<std::size_t> ok;
    for (std::size_t u = 0; u < m.noise()[k].cardinality(); ++u) {
      bool forces = true;
      for (std::size_t sk = 0; sk < m.src_space(k) && forces; ++sk) {
        std::size_t out = m.eval_equation(k, sk, u);
        if ((out / t_space_after) % comp_card != vi) forces = false;
      }
      if (forces) ok.insert(u);
    }
    std::set<std::size_t> inter;
    for (std::size_t u : admissible[k])
      if (ok.count(u)) inter.insert(u);
    admissible[k] = std::move(inter);
  }

  Event e;
  e.variables = m.noise();
  // Joint settings whose per-arc components are admissible.
  std::vector<std::size_t> u(m.num_arcs(), 0);
  std::function<void(std::size_t, std::uint64_t)> rec = [&](std::size_t k, std::uint64_t idx) {
    if (k == m.num_arcs()) {
      e.settings.insert(idx);
      return;
    }
    for (std::size_t v : admissible[k])
      rec(k + 1, idx * m.noise()[k].cardinality() + v);
  };
  rec(0, 0);
  return e;
}

CausalFormula CausalFormula::atom(std::string var, std::string value) {
  CausalFormula f;
  f.kind = Kind::Atom;
  f.var = std::move(var);
  f.value = std::move(value);
  return f;
}

CausalFormula CausalFormula::conj(std::vector<CausalFormula> parts) {
  CausalFormula f;
  f.kind = Kind::And;
  f.children = std::move(parts);
  return f;
}

CausalFormula CausalFormula::neg(CausalFormula part) {
  CausalFormula f;
  f.kind = Kind::Not;
  f.children.push_back(std::move(part));
  return f;
}

CausalFormula CausalFormula::box(std::map<std::string, std::string> assignment,
                                 CausalFormula part) {
  CausalFormula f;
  f.kind = Kind::Box;
  f.assignment = std::move(assignment);
  f.children.push_back(std::move(part));
  return f;
}

CausalFormula CausalFormula::diamond(std::map<std::string, std::string> assignment,
                                     CausalFormula part) {
  CausalFormula f;
  f.kind = Kind::Diamond;
  f.assignment = std::move(assignment);
  f.children.push_back(std::move(part));
  return f;
}

namespace {

bool contains_modality(const CausalFormula& f) {
  if (f.kind == CausalFormula::Kind::Box || f.kind == CausalFormula::Kind::Diamond)
    return true;
  for (const auto& c : f.children)
    if (contains_modality(c)) return true;
  return false;
}

bool eval_formula_rec(const GRPSEM& m, const std::vector<std::size_t>& u,
                      const CausalFormula& phi);

// Boolean expression at one solution; nested modalities fall back to the
// formula semantics at the (already intervened) model.
bool eval_expr(const GRPSEM& m, const std::vector<std::size_t>& u,
               const CausalFormula& f, const std::vector<std::size_t>& x) {
  switch (f.kind) {
    case CausalFormula::Kind::Atom: {
      std::size_t p = m.endo_position(f.var);
      return m.endogenous()[p].value_index(f.value) == x[p];
    }
    case CausalFormula::Kind::And:
      for (const auto& c : f.children)
        if (!eval_expr(m, u, c, x)) return false;
      return true;
    case CausalFormula::Kind::Not:
      return !eval_expr(m, u, f.children[0], x);
    case CausalFormula::Kind::Box:
    case CausalFormula::Kind::Diamond:
      return eval_formula_rec(m, u, f);
  }
  return false;
}

// A maximal modality-free subtree is one Boolean expression: true iff it
// holds at every solution of the model in context u.
bool eval_universally(const GRPSEM& m, const std::vector<std::size_t>& u,
                      const CausalFormula& expr) {
  auto sols = solutions(m, u);
  for (const auto& x : sols)
    if (!eval_expr(m, u, expr, x)) return false;
  return true;
}

bool eval_formula_rec(const GRPSEM& m, const std::vector<std::size_t>& u,
                      const CausalFormula& phi) {
  switch (phi.kind) {
    case CausalFormula::Kind::Box: {
      GRPSEM mi = phi.assignment.empty() ? m : intervene(m, phi.assignment);
      if (!contains_modality(phi.children[0])) return eval_universally(mi, u, phi.children[0]);
      return eval_formula_rec(mi, u, phi.children[0]);
    }
    case CausalFormula::Kind::Diamond: {
      CausalFormula boxed = CausalFormula::box(
          phi.assignment, CausalFormula::neg(phi.children[0]));
      return !eval_formula_rec(m, u, boxed);
    }
    case CausalFormula::Kind::And:
      if (!contains_modality(phi)) return eval_universally(m, u, phi);
      for (const auto& c : phi.children)
        if (!eval_formula_rec(m, u, c)) return false;
      return true;
    case CausalFormula::Kind::Not:
      if (!contains_modality(phi)) return eval_universally(m, u, phi);
      return !eval_formula_rec(m, u, phi.children[0]);
    case CausalFormula::Kind::Atom:
      return eval_universally(m, u, phi);
  }
  return false;
}

}  // namespace

bool eval_formula(const GRPSEM& m, const std::vector<std::size_t>& u,
                  const CausalFormula& phi) {
  return eval_formula_rec(m, u, phi);
}

double formula_probability(const GRPSEM& m, const CausalFormula& phi) {
  double total = 0.0;
  std::vector<std::size_t> u(m.num_arcs(), 0);
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == u.size()) {
      double pu = m.noise_setting_prob(u);
      if (pu > 0.0 && eval_formula(m, u, phi)) total += pu;
      return;
    }
    for (std::size_t v = 0; v < m.noise()[k].cardinality(); ++v) {
      u[k] = v;
      rec(k + 1);
    }
  };
  rec(0);
  return total;
}

namespace {

// Event membership for a joint endogenous setting.
struct EventTester {
  std::vector<std::size_t> pos;       // positions into the model's endogenous list
  std::vector<std::uint64_t> stride;  // event-side strides
  const Event* e;

  EventTester(const GRPSEM& m, const Event& event) : e(&event) {
    for (const auto& v : event.variables) {
      std::size_t p = m.endo_position(v.name);
      if (m.endogenous()[p].values != v.values)
        throw std::invalid_argument("event variable " + v.name + " has mismatched values");
      pos.push_back(p);
    }
    stride.assign(pos.size(), 1);
    for (std::size_t i = pos.size(); i-- > 1;)
      stride[i - 1] = stride[i] * event.variables[i].cardinality();
  }

  bool contains(const std::vector<std::size_t>& x) const {
    std::uint64_t key = 0;
    for (std::size_t i = 0; i < pos.size(); ++i) key += x[pos[i]] * stride[i];
    return e->settings.count(key) > 0;
  }
};

double modal_probability(const GRPSEM& m, const std::map<std::string, std::string>& assignment,
                         const Event& phi, bool universal) {
  GRPSEM mi = assignment.empty() ? m : intervene(m, assignment);
  EventTester tester(mi, phi);
  double total = 0.0;
  std::vector<std::size_t> u(m.num_arcs(), 0);
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == u.size()) {
      double pu = m.noise_setting_prob(u);
      if (pu == 0.0) return;
      auto sols = solutions(mi, u);
      bool holds;
      if (universal) {
        holds = true;
        for (const auto& x : sols)
          if (!tester.contains(x)) {
            holds = false;
            break;
          }
      } else {
        holds = false;
        for (const auto& x : sols)
          if (tester.contains(x)) {
            holds = true;
            break;
          }
      }
      if (holds) total += pu;
      return;
    }
    for (std::size_t v = 0; v < m.noise()[k].cardinality(); ++v) {
      u[k] = v;
      rec(k + 1);
    }
  };
  rec(0);
  return total;
}

}  // namespace

double box_probability(const GRPSEM& m, const std::map<std::string, std::string>& assignment,
                       const Event& phi) {
  return modal_probability(m, assignment, phi, /*universal=*/true);
}

double diamond_probability(const GRPSEM& m,
                           const std::map<std::string, std::string>& assignment,
                           const Event& phi) {
  return modal_probability(m, assignment, phi, /*universal=*/false);
}

Theorem6Report check_theorem6(const Witness& w, const GRPSEM& m,
                              const std::map<std::string, std::string>& assignment,
                              const Event& phi, double tol) {
  Theorem6Report report;

  // Resolve the witness-side names of the model's noise variables.
  std::map<std::string, std::string> witness_noise;  // arc label -> witness var
  for (std::size_t k = 0; k < m.num_arcs(); ++k) {
    const std::string& label = m.structure().arcs[k].label;
    auto it = w.arc_map.find(label);
    if (it == w.arc_map.end())
      throw std::invalid_argument("check_theorem6: witness lacks noise for arc " + label);
    witness_noise[label] = it->second;
  }

  // The do-event, translated to the witness's noise variables.
  Event devent = do_event(m, assignment);
  Event devent_w = devent;
  for (std::size_t k = 0; k < m.num_arcs(); ++k) {
    devent_w.variables[k].name = witness_noise.at(m.structure().arcs[k].label);
    if (w.joint.variable(devent_w.variables[k].name).values != devent_w.variables[k].values)
      throw std::invalid_argument("check_theorem6: witness noise values differ from the model");
  }

  double devent_mass = 0.0;
  {
    std::vector<std::string> names;
    for (const auto& v : devent_w.variables) names.push_back(v.name);
    JointDistribution noise_marg = marginal(w.joint, names);
    for (auto s : devent_w.settings) devent_mass += noise_marg.prob(s);
  }
  if (devent_mass <= 0.0) {
    report.applicable = false;
    report.note = "do-event has probability zero; not applicable";
    return report;
  }
  report.applicable = true;

  // Precondition: the intervened arcs' noises must be independent of the
  // other exogenous variables (the remaining noises and the base variables
  // that are not targets of any arc).
  {
    std::set<std::string> intervened_noise;
    for (const auto& [var, value] : assignment) {
      (void)value;
      for (std::size_t k = 0; k < m.num_arcs(); ++k)
        if (m.structure().arcs[k].targets.count(var))
          intervened_noise.insert(witness_noise.at(m.structure().arcs[k].label));
    }
    std::set<std::string> targets;
    for (const auto& arc : m.structure().arcs)
      for (const auto& t : arc.targets) targets.insert(t);
    std::vector<std::string> rest;
    for (std::size_t k = 0; k < m.num_arcs(); ++k) {
      const std::string& n = witness_noise.at(m.structure().arcs[k].label);
      if (!intervened_noise.count(n)) rest.push_back(n);
    }
    for (const auto& b : w.base_vars)
      if (!targets.count(b) && w.joint.has_variable(b)) rest.push_back(b);
    if (rest.empty() || intervened_noise.empty()) {
      report.precondition_mi_bits = 0.0;
    } else {
      report.precondition_mi_bits = conditional_mutual_information(
          w.joint, std::vector<std::string>(intervened_noise.begin(), intervened_noise.end()),
          rest, {});
    }
    report.precondition_ok = report.precondition_mi_bits <= tol;
  }

  // (a) Conditioning on the do-event arises from the intervened model:
  // re-tensor fresh intervened noise onto the conditioned distribution.
  GRPSEM mi = intervene(m, assignment);
  {
    JointDistribution conditioned = condition(w.joint, devent_w);
    // Keep endogenous variables and the non-intervened noises, then glue
    // fresh P_a for the intervened ones.
    std::set<std::string> intervened_noise;
    for (const auto& [var, value] : assignment) {
      (void)value;
      for (std::size_t k = 0; k < m.num_arcs(); ++k)
        if (m.structure().arcs[k].targets.count(var))
          intervened_noise.insert(witness_noise.at(m.structure().arcs[k].label));
    }
    std::vector<std::string> keep;
    for (const auto& v : m.endogenous()) keep.push_back(v.name);
    std::vector<std::size_t> kept_arcs, fresh_arcs;
    for (std::size_t k = 0; k < m.num_arcs(); ++k) {
      const std::string& n = witness_noise.at(m.structure().arcs[k].label);
      if (intervened_noise.count(n))
        fresh_arcs.push_back(k);
      else {
        keep.push_back(n);
        kept_arcs.push_back(k);
      }
    }
    JointDistribution reduced = marginal(conditioned, keep);
    // Rename kept noises to the model convention.
    std::vector<Variable> vars = reduced.variables();
    for (std::size_t i = 0; i < kept_arcs.size(); ++i)
      vars[m.endogenous().size() + i].name = m.noise()[kept_arcs[i]].name;
    JointDistribution renamed(vars, std::vector<double>(reduced.probs()));
    for (std::size_t k : fresh_arcs) {
      JointDistribution pa({m.noise()[k]}, std::vector<double>(m.noise_probs()[k]));
      renamed = product(renamed, pa);
    }
    report.arising_ok = in_solution_set(mi, renamed, std::max(tol, 1e-9));
  }

  // (b) The sandwich on the event probability.
  report.box_prob = box_probability(m, assignment, phi);
  report.diamond_prob = diamond_probability(m, assignment, phi);
  {
    JointDistribution conditioned = condition(w.joint, devent_w);
    EventTester tester(m, phi);
    double p = 0.0;
    std::vector<std::size_t> x(m.endogenous().size());
    std::vector<std::size_t> epos;
    for (const auto& v : m.endogenous()) epos.push_back(conditioned.variable_position(v.name));
    for (std::size_t idx = 0; idx < conditioned.num_outcomes(); ++idx) {
      double pp = conditioned.prob(idx);
      if (pp == 0.0) continue;
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = conditioned.digit(idx, epos[i]);
      if (tester.contains(x)) p += pp;
    }
    report.cond_prob = p;
  }
  double slack = 1e-9;
  report.sandwich_ok = report.box_prob <= report.cond_prob + slack &&
                       report.cond_prob <= report.diamond_prob + slack;

  // Equality when every context of the intervened model has a unique solution.
  bool unique = true;
  {
    std::vector<std::size_t> u(m.num_arcs(), 0);
    std::function<void(std::size_t)> rec = [&](std::size_t k) {
      if (!unique) return;
      if (k == u.size()) {
        if (solutions(mi, u).size() != 1) unique = false;
        return;
      }
      for (std::size_t v = 0; v < m.noise()[k].cardinality(); ++v) {
        u[k] = v;
        rec(k + 1);
      }
    };
    rec(0);
  }
  report.equality_expected = unique;
  report.equality_ok = !unique || (std::abs(report.box_prob - report.cond_prob) <= slack &&
                                   std::abs(report.diamond_prob - report.cond_prob) <= slack);
  return report;
}

}  // namespace qim
