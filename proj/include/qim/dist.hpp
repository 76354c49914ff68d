#ifndef QIM_DIST_HPP_
#define QIM_DIST_HPP_

#include <cstddef>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace qim {

// Default cutoff for "exactly zero" probability tests.  The underlying math
// is about exact measure-zero statements; with doubles every such test takes
// an explicit tolerance.
inline constexpr double kZeroTol = 1e-9;

// A named finite-valued variable.  Value labels are opaque strings and must
// be distinct within one variable.
struct Variable {
  std::string name;
  std::vector<std::string> values;

  std::size_t cardinality() const { return values.size(); }
  std::size_t value_index(const std::string& label) const;
};

// Exact joint distribution over an ordered list of finite variables, stored
// as a dense flat array with the last variable varying fastest.  The empty
// variable list is the legal "unit" distribution with a single outcome of
// probability one.  Immutable after construction.
class JointDistribution {
 public:
  // Unit distribution: no variables, one outcome with probability 1.
  JointDistribution();

  // Validates shape, non-negativity and total mass (|sum - 1| <= 1e-9), then
  // renormalizes exactly so the stored entries sum to 1.
  JointDistribution(std::vector<Variable> variables, std::vector<double> probs);

  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t num_outcomes() const { return probs_.size(); }
  std::size_t num_variables() const { return vars_.size(); }

  bool has_variable(const std::string& name) const;
  // Position of a variable in the ordered list; throws std::invalid_argument
  // for unknown names.
  std::size_t variable_position(const std::string& name) const;
  const Variable& variable(const std::string& name) const;

  // Mixed-radix index helpers (last variable fastest).
  std::size_t stride(std::size_t var_pos) const { return strides_[var_pos]; }
  std::size_t index_of(const std::vector<std::size_t>& value_indices) const;
  std::vector<std::size_t> decode(std::size_t outcome_index) const;
  std::size_t digit(std::size_t outcome_index, std::size_t var_pos) const {
    return (outcome_index / strides_[var_pos]) % vars_[var_pos].cardinality();
  }

  double prob(std::size_t outcome_index) const { return probs_[outcome_index]; }

 private:
  std::vector<Variable> vars_;
  std::vector<double> probs_;
  std::vector<std::size_t> strides_;
};

// An event: a set of joint-setting indices over a stated variable list.  The
// variable list must be a subset of the distribution the event is applied to.
struct Event {
  std::vector<Variable> variables;
  std::set<std::uint64_t> settings;  // indices over `variables`, last fastest
};

// Marginal onto `subset` (order preserved as given).  Throws on unknown or
// repeated names.
JointDistribution marginal(const JointDistribution& d,
                           const std::vector<std::string>& subset);

// Renormalized restriction of d to the event (same variable list).  Throws
// std::domain_error when the event has probability zero.
JointDistribution condition(const JointDistribution& d, const Event& e);

// Independent product; variable order is d1 then d2.  Throws on shared names.
JointDistribution product(const JointDistribution& d1,
                          const JointDistribution& d2);

// True iff for every setting s of S with P(s) > tol there is exactly one
// setting t of T with P(s, t) > tol.  S may be empty; T empty is vacuously
// determined.
bool check_determines(const JointDistribution& d,
                      const std::vector<std::string>& s_vars,
                      const std::vector<std::string>& t_vars,
                      double tol = kZeroTol);

// True iff the conditional mutual information I(X;Y|Z) <= tol bits.  X and Y
// may overlap (I(Y;Y|X) = H(Y|X)); Z must be disjoint from both.  Computed
// with the direct sum so that exactly-deterministic inputs give an exact 0.
bool check_ci(const JointDistribution& d,
              const std::vector<std::string>& x_vars,
              const std::vector<std::string>& y_vars,
              const std::vector<std::string>& z_vars,
              double tol = kZeroTol);

}  // namespace qim

#endif  // QIM_DIST_HPP_
