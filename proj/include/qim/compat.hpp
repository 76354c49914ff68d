#ifndef QIM_COMPAT_HPP_
#define QIM_COMPAT_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qim/dist.hpp"
#include "qim/hypergraph.hpp"
#include "qim/scoring.hpp"

namespace qim {

// An extended joint distribution certifying QIM-compatibility: the base
// variables plus one noise variable per arc, with the arc <-> noise map.
struct Witness {
  JointDistribution joint;
  std::map<std::string, std::string> arc_map;  // arc label -> noise var name
  std::vector<std::string> base_vars;
};

// Outcome of the three witness checks of the compatibility definition:
// (a) marginal match, (b) mutual independence of the noises, (c) per-arc
// determination of targets by sources plus noise.
struct WitnessReport {
  bool marginal_ok = false;
  bool independence_ok = false;
  bool determinism_ok = false;
  double marginal_deviation = 0.0;       // max abs entry difference
  double independence_gap_bits = 0.0;    // D(w(U) || prod w(U_a))
  std::vector<std::string> failing_arcs; // arcs violating determination
  double tol = 0.0;

  bool ok() const { return marginal_ok && independence_ok && determinism_ok; }
};

// Runs the three checks at the given tolerance.  Throws when arc_map is
// inconsistent with the hypergraph or the witness variables.
WitnessReport verify_witness(const JointDistribution& mu,
                             const DirectedHypergraph& a, const Witness& w,
                             double tol = kZeroTol);

// Exact decision for hypergraphs of dags (Bayesian-network case): true iff
// every vertex is conditionally independent of its nondescendants given its
// parents.  Throws on cyclic graphs.
bool decide_bn(const Graph& g, const JointDistribution& mu,
               double tol = kZeroTol);

// Constructive witness for the dag case: response-variable noise per vertex
// with q(U_v = g) = prod_s mu(v = g(s) | Pa = s), pushed through topological
// evaluation.  Requires decide_bn(g, mu); rows with zero-probability parent
// settings are filled uniformly before derandomizing.
Witness bn_witness(const Graph& g, const JointDistribution& mu,
                   double tol = kZeroTol);

enum class ParallelFuncClause { B, C };

// Evaluation of one Theorem-2 clause for the graph a augmented with n
// parallel arcs X -> Y.  Checks the clause's structural side condition,
// evaluates the functional side (determination plus base compatibility) and,
// when the augmented-graph side is decidable, reports agreement.
struct ParallelFuncReport {
  bool verdict = false;          // compatibility with the augmented graph
  bool lhs = false;              // determination and base compatibility
  std::optional<bool> rhs;       // decide_general on the augmented graph
  bool sides_agree = true;       // false only on a genuine mismatch
};

struct DecideOptions {
  double tol = kZeroTol;          // CI / determinism / certificate tolerance
  double verify_tol = 1e-6;       // tolerance for optimizer-found witnesses
  double compatible_below = 1e-6; // SIMInc threshold for Compatible
  double unknown_below = 1e-3;    // between the two: reported Unknown
  SimincOptions siminc;
  bool enable_siminc = true;
  bool enable_dag_probe = true;   // weakening probe over pruned dag orders
};

ParallelFuncReport decide_parallel_func(const DirectedHypergraph& a,
                                        const std::set<std::string>& x,
                                        const std::set<std::string>& y,
                                        std::size_t n,
                                        const JointDistribution& mu,
                                        ParallelFuncClause clause,
                                        const DecideOptions& options = {});

// Witness transport along a weakening map iota (as returned by
// is_weakening(a, a_weaker)): each weaker arc reuses the noise variable of
// its image; noises of arcs outside the image are marginalized away.
Witness transport_witness(const DirectedHypergraph& a,
                          const DirectedHypergraph& a_weaker,
                          const std::map<std::string, std::string>& iota,
                          const Witness& w);

enum class CompatStatus { Compatible, Incompatible, Unknown };

struct Certificate {
  std::string kind;    // "idef", "theorem-1", "theorem-2b", "example-3", ...
  double idef_bits = 0.0;
  std::string detail;
};

struct CompatVerdict {
  CompatStatus status = CompatStatus::Unknown;
  std::optional<Witness> witness;        // present iff Compatible
  std::optional<Certificate> certificate;  // present iff Incompatible
  std::optional<SimincResult> siminc;    // best search result when run
  std::string note;
};

// Three-valued decision pipeline: exact structural cases (Theorems 1-2 and
// the two-arc determinism pattern), the IDef certificate, a weakening probe
// over pruned dag orders, then the SIMInc search.  Compatible verdicts are
// always re-verified by verify_witness before being returned.
CompatVerdict decide_general(const DirectedHypergraph& a,
                             const JointDistribution& mu,
                             const DecideOptions& options = {});

}  // namespace qim

#endif  // QIM_COMPAT_HPP_
