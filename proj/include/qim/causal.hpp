#ifndef QIM_CAUSAL_HPP_
#define QIM_CAUSAL_HPP_

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qim/compat.hpp"
#include "qim/dist.hpp"
#include "qim/hypergraph.hpp"

namespace qim {

// Generalized randomized PSEM: one total equation table and one independent
// noise source per hyperarc.  Equations are explicit lookup tables, never
// code.  Arcs may share targets; variables that are not targeted by any arc
// have no equation and act as exogenous.
class GRPSEM {
 public:
  GRPSEM(DirectedHypergraph structure, std::vector<Variable> endogenous,
         std::vector<Variable> noise, std::vector<std::vector<double>> noise_probs,
         std::vector<std::vector<std::size_t>> equations);

  const DirectedHypergraph& structure() const { return structure_; }
  const std::vector<Variable>& endogenous() const { return endo_; }
  const std::vector<Variable>& noise() const { return noise_; }
  const std::vector<std::vector<double>>& noise_probs() const { return noise_probs_; }
  const std::vector<std::vector<std::size_t>>& equations() const { return equations_; }

  std::size_t num_arcs() const { return structure_.arcs.size(); }
  std::size_t endo_position(const std::string& name) const;
  std::size_t arc_position(const std::string& label) const;

  // Sizes of the joint endogenous / noise spaces (last variable fastest).
  std::size_t endo_space_size() const { return endo_space_; }
  std::size_t noise_space_size() const { return noise_space_; }

  // Per-arc source-setting index of a joint endogenous setting, and the
  // equation lookup f_a(src_setting, u_a) -> target-setting index.
  std::size_t src_index(std::size_t arc, const std::vector<std::size_t>& endo) const;
  std::size_t tgt_index(std::size_t arc, const std::vector<std::size_t>& endo) const;
  std::size_t eval_equation(std::size_t arc, std::size_t src_idx, std::size_t u_idx) const;

  std::size_t src_space(std::size_t arc) const { return src_space_[arc]; }
  std::size_t tgt_space(std::size_t arc) const { return tgt_space_[arc]; }

  // Ordered positions (into endogenous()) of an arc's sources / targets.
  const std::vector<std::size_t>& src_positions(std::size_t arc) const { return src_pos_[arc]; }
  const std::vector<std::size_t>& tgt_positions(std::size_t arc) const { return tgt_pos_[arc]; }

  double noise_setting_prob(const std::vector<std::size_t>& u) const;

 private:
  DirectedHypergraph structure_;
  std::vector<Variable> endo_;
  std::vector<Variable> noise_;
  std::vector<std::vector<double>> noise_probs_;
  std::vector<std::vector<std::size_t>> equations_;  // [arc][src*nu + u] -> tgt
  std::vector<std::vector<std::size_t>> src_pos_, tgt_pos_;
  std::vector<std::size_t> src_space_, tgt_space_;
  std::size_t endo_space_ = 1, noise_space_ = 1;
};

// Distribution over the |V(Y)|^|V(X)| functions V(X) -> V(Y) that makes the
// per-input responses independent:  q(Y^X = g) = prod_x p(Y=g(x) | X=x).
// `rows` is indexed by the joint setting of `inputs` (last fastest); each row
// must sum to 1 within 1e-9.  Function values are labeled "g<k>", k the
// row-major index of the response tuple.
JointDistribution derandomize_cpd(const std::vector<Variable>& inputs,
                                  const Variable& output,
                                  const std::vector<std::vector<double>>& rows,
                                  const std::string& function_var_name);

// All endogenous settings consistent with the equations in context u
// (a joint noise setting), found by enumeration.
std::vector<std::vector<std::size_t>> solutions(const GRPSEM& m,
                                                const std::vector<std::size_t>& u);

// Membership in SD(M): the equations hold with probability 1 (mass off the
// solution set <= tol) and the noise marginal matches prod P_a within tol.
// `nu` must be a joint over the endogenous and noise variables (any order).
bool in_solution_set(const GRPSEM& m, const JointDistribution& nu, double tol = kZeroTol);

// The unique element of SD(M) when every context has exactly one solution:
// the pushforward of prod P_a.  The result is the joint over endogenous then
// noise variables.  Throws when some context has 0 or >= 2 solutions.
JointDistribution arising_distribution(const GRPSEM& m);

// Construction of a causal model from a witness (disjoint-target arcs only):
// equations are read off positive-support rows; rows with no support are
// filled with the lexicographically smallest target value.  `unique` is true
// iff every (source, noise) row had positive probability.  Throws when arcs
// share targets (no single-equation-per-variable model exists then; keep the
// generalized form instead).
std::pair<GRPSEM, bool> witness_to_psem(const Witness& w, const DirectedHypergraph& a);

// Replaces the equations of the intervened variables by constants; per
// variable, the unique arc targeting it must exist.  A variable may be
// assigned at most once.
GRPSEM intervene(const GRPSEM& m, const std::map<std::string, std::string>& assignment);

// The do-event (over the joint noise space): the noise settings that force
// the assignment regardless of source values.  One arc per intervened
// variable required.  The returned event's variables are the noise variables
// in arc order.
Event do_event(const GRPSEM& m, const std::map<std::string, std::string>& assignment);

// Causal formulas: equality atoms over endogenous variables, conjunction and
// negation, and the intervention modalities [Y<-y] (box) and <Y<-y> (diamond,
// defined as not-box-not).  A maximal modality-free subtree is one Boolean
// expression, true in a context iff it holds at every solution.
struct CausalFormula {
  enum class Kind { Atom, And, Not, Box, Diamond };
  Kind kind = Kind::Atom;
  std::string var, value;                      // Atom
  std::map<std::string, std::string> assignment;  // Box / Diamond
  std::vector<CausalFormula> children;

  static CausalFormula atom(std::string var, std::string value);
  static CausalFormula conj(std::vector<CausalFormula> parts);
  static CausalFormula neg(CausalFormula part);
  static CausalFormula box(std::map<std::string, std::string> assignment, CausalFormula part);
  static CausalFormula diamond(std::map<std::string, std::string> assignment, CausalFormula part);
};

bool eval_formula(const GRPSEM& m, const std::vector<std::size_t>& u,
                  const CausalFormula& phi);

// P_M(phi) = sum of prod P_a over the contexts where phi holds.
double formula_probability(const GRPSEM& m, const CausalFormula& phi);

// Event-based box/diamond probabilities used by the Theorem-6 check:
// box  = P{u : all solutions of the intervened model lie in the event},
// diam = P{u : some solution lies in the event}.
double box_probability(const GRPSEM& m, const std::map<std::string, std::string>& assignment,
                       const Event& phi);
double diamond_probability(const GRPSEM& m, const std::map<std::string, std::string>& assignment,
                           const Event& phi);

// Verification of the conditioning-equals-intervention correspondence for a
// witness w and a model constructed from it: (a) conditioning w on the
// do-event yields an endogenous distribution arising from the intervened
// model (checked by re-tensoring fresh intervened noise), and (b) the
// box / conditional / diamond sandwich, with equality when every context of
// the intervened... original model has a unique solution.
struct Theorem6Report {
  bool applicable = false;  // false when the do-event has zero probability
  bool precondition_ok = false;  // intervened noises independent of the rest
  double precondition_mi_bits = 0.0;
  bool arising_ok = false;      // part (a)
  bool sandwich_ok = false;     // part (b)
  bool equality_expected = false;
  bool equality_ok = false;
  double box_prob = 0.0, cond_prob = 0.0, diamond_prob = 0.0;
  std::string note;
};

Theorem6Report check_theorem6(const Witness& w, const GRPSEM& m,
                              const std::map<std::string, std::string>& assignment,
                              const Event& phi, double tol = kZeroTol);

}  // namespace qim

#endif  // QIM_CAUSAL_HPP_
