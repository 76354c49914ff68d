#include "qim/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "qim/info.hpp"

namespace qim {

namespace {

void check_unique_names(const std::vector<Variable>& vars) {
  std::unordered_set<std::string> seen;
  for (const auto& v : vars) {
    if (v.name.empty()) throw std::invalid_argument("variable name must be nonempty");
    if (!seen.insert(v.name).second)
      throw std::invalid_argument("duplicate variable name: " + v.name);
    if (v.values.empty())
      throw std::invalid_argument("variable " + v.name + " has no values");
    std::unordered_set<std::string> vals;
    for (const auto& s : v.values)
      if (!vals.insert(s).second)
        throw std::invalid_argument("duplicate value label '" + s + "' in variable " + v.name);
  }
}

// Positions and mixed-radix strides (last fastest) for a projection.
struct Projection {
  std::vector<std::size_t> pos;
  std::vector<std::uint64_t> stride;

  Projection(const JointDistribution& d, const std::vector<std::string>& names) {
    pos.reserve(names.size());
    for (const auto& n : names) pos.push_back(d.variable_position(n));
    stride.assign(pos.size(), 1);
    for (std::size_t i = pos.size(); i-- > 1;)
      stride[i - 1] = stride[i] * d.variables()[pos[i]].cardinality();
  }

  std::uint64_t key(const JointDistribution& d, std::size_t idx) const {
    std::uint64_t k = 0;
    for (std::size_t i = 0; i < pos.size(); ++i)
      k += static_cast<std::uint64_t>(d.digit(idx, pos[i])) * stride[i];
    return k;
  }
};

}  // namespace

std::size_t Variable::value_index(const std::string& label) const {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] == label) return i;
  throw std::invalid_argument("unknown value '" + label + "' for variable " + name);
}

JointDistribution::JointDistribution() : probs_{1.0} {}

JointDistribution::JointDistribution(std::vector<Variable> variables,
                                     std::vector<double> probs)
    : vars_(std::move(variables)), probs_(std::move(probs)) {
  check_unique_names(vars_);
  std::size_t n = 1;
  for (const auto& v : vars_) {
    if (v.cardinality() > std::numeric_limits<std::size_t>::max() / n)
      throw std::invalid_argument("joint outcome space overflows");
    n *= v.cardinality();
  }
  if (probs_.size() != n)
    throw std::invalid_argument("probs length " + std::to_string(probs_.size()) +
                                " does not match outcome count " + std::to_string(n));
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) throw std::invalid_argument("negative or NaN probability entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("probabilities sum to " + std::to_string(sum) +
                                ", expected 1 within 1e-9");
  for (double& p : probs_) p /= sum;

  strides_.assign(vars_.size(), 1);
  for (std::size_t i = vars_.size(); i-- > 1;)
    strides_[i - 1] = strides_[i] * vars_[i].cardinality();
}

bool JointDistribution::has_variable(const std::string& name) const {
  for (const auto& v : vars_)
    if (v.name == name) return true;
  return false;
}

std::size_t JointDistribution::variable_position(const std::string& name) const {
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].name == name) return i;
  throw std::invalid_argument("unknown variable: " + name);
}

const Variable& JointDistribution::variable(const std::string& name) const {
  return vars_[variable_position(name)];
}

std::size_t JointDistribution::index_of(const std::vector<std::size_t>& value_indices) const {
  if (value_indices.size() != vars_.size())
    throw std::invalid_argument("setting arity mismatch");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (value_indices[i] >= vars_[i].cardinality())
      throw std::invalid_argument("value index out of range for " + vars_[i].name);
    idx += value_indices[i] * strides_[i];
  }
  return idx;
}

std::vector<std::size_t> JointDistribution::decode(std::size_t outcome_index) const {
  std::vector<std::size_t> out(vars_.size());
  for (std::size_t i = 0; i < vars_.size(); ++i) out[i] = digit(outcome_index, i);
  return out;
}

JointDistribution marginal(const JointDistribution& d,
                           const std::vector<std::string>& subset) {
  std::unordered_set<std::string> seen;
  for (const auto& name : subset)
    if (!seen.insert(name).second)
      throw std::invalid_argument("repeated variable in marginal: " + name);
  Projection proj(d, subset);
  std::vector<Variable> vars;
  vars.reserve(subset.size());
  std::size_t out_size = 1;
  for (std::size_t p : proj.pos) {
    vars.push_back(d.variables()[p]);
    out_size *= vars.back().cardinality();
  }
  std::vector<double> acc(out_size, 0.0);
  for (std::size_t idx = 0; idx < d.num_outcomes(); ++idx) {
    double p = d.prob(idx);
    if (p == 0.0) continue;
    acc[proj.key(d, idx)] += p;
  }
  return JointDistribution(std::move(vars), std::move(acc));
}

JointDistribution condition(const JointDistribution& d, const Event& e) {
  std::vector<std::string> names;
  names.reserve(e.variables.size());
  for (const auto& v : e.variables) {
    std::size_t p = d.variable_position(v.name);
    if (d.variables()[p].values != v.values)
      throw std::invalid_argument("event variable " + v.name + " has mismatched value list");
    names.push_back(v.name);
  }
  Projection proj(d, names);
  std::uint64_t e_size = 1;
  for (const auto& v : e.variables) e_size *= v.cardinality();
  for (auto s : e.settings)
    if (s >= e_size) throw std::invalid_argument("event setting index out of range");

  std::vector<double> restricted(d.num_outcomes(), 0.0);
  double mass = 0.0;
  for (std::size_t idx = 0; idx < d.num_outcomes(); ++idx) {
    double p = d.prob(idx);
    if (p == 0.0) continue;
    if (e.settings.count(proj.key(d, idx))) {
      restricted[idx] = p;
      mass += p;
    }
  }
  if (mass <= 0.0)
    throw std::domain_error("conditioning on a zero-probability event");
  for (double& p : restricted) p /= mass;
  return JointDistribution(d.variables(), std::move(restricted));
}

JointDistribution product(const JointDistribution& d1, const JointDistribution& d2) {
  for (const auto& v : d2.variables())
    if (d1.has_variable(v.name))
      throw std::invalid_argument("product factors share variable " + v.name);
  std::vector<Variable> vars = d1.variables();
  vars.insert(vars.end(), d2.variables().begin(), d2.variables().end());
  std::vector<double> probs(d1.num_outcomes() * d2.num_outcomes());
  std::size_t k = 0;
  for (std::size_t i = 0; i < d1.num_outcomes(); ++i)
    for (std::size_t j = 0; j < d2.num_outcomes(); ++j)
      probs[k++] = d1.prob(i) * d2.prob(j);
  return JointDistribution(std::move(vars), std::move(probs));
}

bool check_determines(const JointDistribution& d,
                      const std::vector<std::string>& s_vars,
                      const std::vector<std::string>& t_vars, double tol) {
  if (t_vars.empty()) return true;
  Projection sp(d, s_vars), tp(d, t_vars);

  // Pair masses P(s, t); then per visible s-setting count the visible t's.
  std::unordered_map<std::uint64_t, double> s_mass;
  std::unordered_map<std::uint64_t, std::unordered_map<std::uint64_t, double>> st_mass;
  for (std::size_t idx = 0; idx < d.num_outcomes(); ++idx) {
    double p = d.prob(idx);
    if (p == 0.0) continue;
    std::uint64_t sk = sp.key(d, idx), tk = tp.key(d, idx);
    s_mass[sk] += p;
    st_mass[sk][tk] += p;
  }
  for (const auto& [sk, ps] : s_mass) {
    if (!(ps > tol)) continue;
    std::size_t visible = 0;
    for (const auto& [tk, pst] : st_mass[sk])
      if (pst > tol) ++visible;
    if (visible != 1) return false;
  }
  return true;
}

bool check_ci(const JointDistribution& d, const std::vector<std::string>& x_vars,
              const std::vector<std::string>& y_vars,
              const std::vector<std::string>& z_vars, double tol) {
  return conditional_mutual_information(d, x_vars, y_vars, z_vars) <= tol;
}

}  // namespace qim
