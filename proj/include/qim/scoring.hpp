#ifndef QIM_SCORING_HPP_
#define QIM_SCORING_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qim/dist.hpp"
#include "qim/hypergraph.hpp"

namespace qim {

// Information deficiency IDef_A(d) = -H(all of d's variables)
// + sum_a H(Tgt a | Src a), in bits.  Arcs must reference d's variables.
double idef(const DirectedHypergraph& a, const JointDistribution& d);

// Sound incompatibility certificate: true iff idef(a, d) > tol.  A true
// result proves d is not QIM-compatible with a; false is inconclusive.
bool certify_incompatible(const DirectedHypergraph& a,
                          const JointDistribution& d, double tol = kZeroTol);

struct SimincOptions {
  // Per-arc noise-space sizes (label -> size >= 1).  Arcs not listed default
  // to the response-variable size |V(Tgt)|^|V(Src)|.
  std::map<std::string, std::size_t> noise_sizes;
  int restarts = 16;
  int max_iters = 2000;
  std::uint64_t seed = 0;
  // Converged when the best objective improves by less than conv_tol bits
  // over conv_window consecutive iterations.
  double conv_tol = 1e-9;
  int conv_window = 50;
  double step_init = 0.5;
  // Tractability bounds.  When the joint noise space exceeds max_joint_dense
  // the optimizer first tries a sparse response-support parametrization; if
  // that also exceeds max_sparse_support, per-arc sizes are reduced (largest
  // first) until the joint space fits, and the effective sizes are reported.
  std::size_t max_joint_dense = 4096;
  std::size_t max_sparse_support = 200000;
  int threads = 0;  // 0 = hardware concurrency
};

struct SimincResult {
  double value_bits = 0.0;
  // Best extension found, trimmed of noise values carrying no mass; its
  // marginal on the base variables equals the input distribution.
  JointDistribution witness_candidate;
  std::vector<std::string> base_vars;
  std::map<std::string, std::string> arc_noise_names;  // arc label -> U name
  int restarts_used = 0;
  bool converged = false;
  // Breakdown: value = independence_gap + sum of per-arc conditional bits.
  double independence_gap_bits = 0.0;
  std::vector<std::pair<std::string, double>> arc_conditional_bits;
  std::map<std::string, std::size_t> noise_sizes_used;
  std::uint64_t seed = 0;
};

// Local minimization of the witness-quality objective
//   [sum_a H(U_a) - H(U)] + sum_a H(Tgt a | Src a, U_a)
// over extensions nu with nu(X) = d, parametrized by the conditional table
// nu(U|X) on a product of simplices (mirror-descent / exponentiated-gradient
// steps, multi-restart, seeded).  The returned value is an upper bound on
// SIMInc_A(d) and never falls below idef(a, d) - 1e-6.
SimincResult siminc(const DirectedHypergraph& a, const JointDistribution& d,
                    const SimincOptions& options = {});

// IDef of the dagger graph at an explicit extension nu of d (one noise
// variable per arc, named noise_node_name(label)).  Checks that nu's
// marginal on d's variables matches d within 1e-9 and that the result is
// >= idef(a, d) - 1e-9 (the Theorem-9 chain).
double siminc_upper_bound(const DirectedHypergraph& a,
                          const JointDistribution& d,
                          const JointDistribution& nu);

// Objective and analytic gradient of the SIMInc objective at an explicit
// interior conditional table q[x][u] (joint-noise indexing, row per outcome
// of d with positive mass in x-order).  Exposed for finite-difference
// verification.  `sizes` maps each arc (in a.arcs order) to its noise size.
struct SimincObjectiveEval {
  double value_bits;
  std::vector<std::vector<double>> grad;  // same shape as q
};
SimincObjectiveEval siminc_objective(const DirectedHypergraph& a,
                                     const JointDistribution& d,
                                     const std::vector<std::size_t>& sizes,
                                     const std::vector<std::vector<double>>& q);

}  // namespace qim

#endif  // QIM_SCORING_HPP_
