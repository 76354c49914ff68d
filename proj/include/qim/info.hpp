#ifndef QIM_INFO_HPP_
#define QIM_INFO_HPP_

#include <string>
#include <vector>

#include "qim/dist.hpp"

namespace qim {

// All quantities are in bits (base-2 logarithms), with 0*log 0 := 0 and
// x*log(x/0) := +inf for x > 0.

// Shannon entropy of the marginal on S.  S may be empty (H = 0).
double entropy(const JointDistribution& d, const std::vector<std::string>& s_vars);

// H(T | S) = H(S u T) - H(S).
double conditional_entropy(const JointDistribution& d,
                           const std::vector<std::string>& t_vars,
                           const std::vector<std::string>& s_vars);

// Conditional mutual information I(X;Y|Z) computed by the direct sum over
// outcomes (exact zeros on deterministic inputs).  X and Y may overlap.
double conditional_mutual_information(const JointDistribution& d,
                                      const std::vector<std::string>& x_vars,
                                      const std::vector<std::string>& y_vars,
                                      const std::vector<std::string>& z_vars);

// Co-information of a family of variable sets given `cond`:
//   -sum_{nonempty T subseteq family} (-1)^{|T|} H(union T | cond).
// For a two-set family this is the conditional mutual information; for three
// sets the interaction information, which can be negative.
double co_information(const JointDistribution& d,
                      const std::vector<std::vector<std::string>>& family,
                      const std::vector<std::string>& cond_vars);

// Relative entropy D(p || q) in bits; +inf when support(p) !<= support(q).
// Requires identical ordered variable lists.
double kl_divergence(const JointDistribution& p, const JointDistribution& q);

// The 2^n - 1 signed information atoms of a distribution.  atom(W) is the
// co-information of the singletons of W conditioned on the variables outside
// W; every H(T|S) is recovered as the sum of atoms meeting T and avoiding S.
// Atoms are indexed by nonempty bitmask over `variables` (bit i = variable i).
struct InformationProfile {
  std::vector<std::string> variables;
  std::vector<double> atoms;  // size 2^n, index by mask; atoms[0] unused (0)

  double atom(std::size_t mask) const { return atoms[mask]; }
  std::size_t num_variables() const { return variables.size(); }

  // Sum of atoms {W : W n T != 0, W n S = 0} -- the reconstruction of H(T|S).
  double reconstruct_conditional_entropy(std::size_t t_mask, std::size_t s_mask) const;
};

// Computes the full profile by inclusion-exclusion over the 2^n subset
// entropies.  Intended for desk-scale n; throws for n > 14.
InformationProfile information_profile(const JointDistribution& d);

}  // namespace qim

#endif  // QIM_INFO_HPP_
