#include "qim/info.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace qim {

namespace {

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

double entropy_of(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs) h -= xlog2x(p);
  return std::max(h, 0.0);
}

// Accumulates the marginal over the variables of `mask` into a dense buffer.
double subset_entropy(const JointDistribution& d, std::size_t mask) {
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < d.num_variables(); ++i)
    if (mask & (std::size_t{1} << i)) pos.push_back(i);
  std::size_t size = 1;
  for (std::size_t p : pos) size *= d.variables()[p].cardinality();
  std::vector<std::size_t> stride(pos.size(), 1);
  for (std::size_t i = pos.size(); i-- > 1;)
    stride[i - 1] = stride[i] * d.variables()[pos[i]].cardinality();
  std::vector<double> acc(size, 0.0);
  for (std::size_t idx = 0; idx < d.num_outcomes(); ++idx) {
    double p = d.prob(idx);
    if (p == 0.0) continue;
    std::size_t k = 0;
    for (std::size_t i = 0; i < pos.size(); ++i) k += d.digit(idx, pos[i]) * stride[i];
    acc[k] += p;
  }
  return entropy_of(acc);
}

std::size_t mask_of(const JointDistribution& d, const std::vector<std::string>& names) {
  std::size_t mask = 0;
  for (const auto& n : names) mask |= std::size_t{1} << d.variable_position(n);
  return mask;
}

// Projection key helper shared by the direct CMI sum.
struct Proj {
  std::vector<std::size_t> pos;
  std::vector<std::uint64_t> stride;
  std::uint64_t size = 1;
  Proj(const JointDistribution& d, const std::vector<std::string>& names) {
    for (const auto& n : names) pos.push_back(d.variable_position(n));
    stride.assign(pos.size(), 1);
    for (std::size_t i = pos.size(); i-- > 1;)
      stride[i - 1] = stride[i] * d.variables()[pos[i]].cardinality();
    for (std::size_t p : pos) size *= d.variables()[p].cardinality();
  }
  std::uint64_t key(const JointDistribution& d, std::size_t idx) const {
    std::uint64_t k = 0;
    for (std::size_t i = 0; i < pos.size(); ++i)
      k += static_cast<std::uint64_t>(d.digit(idx, pos[i])) * stride[i];
    return k;
  }
};

}  // namespace

double entropy(const JointDistribution& d, const std::vector<std::string>& s_vars) {
  return subset_entropy(d, mask_of(d, s_vars));
}

double conditional_entropy(const JointDistribution& d,
                           const std::vector<std::string>& t_vars,
                           const std::vector<std::string>& s_vars) {
  std::size_t s_mask = mask_of(d, s_vars);
  std::size_t st_mask = s_mask | mask_of(d, t_vars);
  return subset_entropy(d, st_mask) - subset_entropy(d, s_mask);
}

double conditional_mutual_information(const JointDistribution& d,
                                      const std::vector<std::string>& x_vars,
                                      const std::vector<std::string>& y_vars,
                                      const std::vector<std::string>& z_vars) {
  // Direct sum  sum p(x,y,z) log2[ p(x,y,z) p(z) / (p(x,z) p(y,z)) ].
  // Each log argument is exactly 1 on deterministic inputs, so determination
  // yields an exact 0 rather than a difference of large entropies.
  Proj xp(d, x_vars), yp(d, y_vars), zp(d, z_vars);
  if (xp.size > (std::uint64_t{1} << 20) || yp.size > (std::uint64_t{1} << 20) ||
      zp.size > (std::uint64_t{1} << 20))
    throw std::invalid_argument("conditional_mutual_information: projection too large");
  auto xyz = [&](std::uint64_t xk, std::uint64_t yk, std::uint64_t zk) {
    return (xk * yp.size + yk) * zp.size + zk;
  };
  auto two = [&](std::uint64_t a, std::uint64_t bk, std::uint64_t bsize) {
    return a * bsize + bk;
  };
  std::unordered_map<std::uint64_t, double> pz, pxz, pyz, pxyz;
  for (std::size_t idx = 0; idx < d.num_outcomes(); ++idx) {
    double p = d.prob(idx);
    if (p == 0.0) continue;
    std::uint64_t xk = xp.key(d, idx), yk = yp.key(d, idx), zk = zp.key(d, idx);
    pz[zk] += p;
    pxz[two(xk, zk, zp.size)] += p;
    pyz[two(yk, zk, zp.size)] += p;
    pxyz[xyz(xk, yk, zk)] += p;
  }
  double mi = 0.0;
  for (const auto& [key, joint] : pxyz) {
    std::uint64_t zk = key % zp.size;
    std::uint64_t yk = (key / zp.size) % yp.size;
    std::uint64_t xk = key / (zp.size * yp.size);
    double ratio = joint * pz[zk] / (pxz[two(xk, zk, zp.size)] * pyz[two(yk, zk, zp.size)]);
    mi += joint * std::log2(ratio);
  }
  return mi;
}

double co_information(const JointDistribution& d,
                      const std::vector<std::vector<std::string>>& family,
                      const std::vector<std::string>& cond_vars) {
  if (family.empty()) throw std::invalid_argument("co_information: empty family");
  std::size_t cond_mask = mask_of(d, cond_vars);
  std::vector<std::size_t> member_mask;
  member_mask.reserve(family.size());
  for (const auto& s : family) member_mask.push_back(mask_of(d, s));

  std::unordered_map<std::size_t, double> cache;
  auto h = [&](std::size_t mask) {
    auto it = cache.find(mask);
    if (it != cache.end()) return it->second;
    double v = subset_entropy(d, mask);
    cache.emplace(mask, v);
    return v;
  };

  double total = 0.0;
  std::size_t m = family.size();
  for (std::size_t t = 1; t < (std::size_t{1} << m); ++t) {
    std::size_t u = cond_mask;
    for (std::size_t i = 0; i < m; ++i)
      if (t & (std::size_t{1} << i)) u |= member_mask[i];
    double hc = h(u) - h(cond_mask);
    int bits = __builtin_popcountll(t);
    total += (bits % 2 == 0 ? 1.0 : -1.0) * hc;
  }
  return -total;
}

double kl_divergence(const JointDistribution& p, const JointDistribution& q) {
  if (p.num_variables() != q.num_variables())
    throw std::invalid_argument("kl_divergence: variable lists differ");
  for (std::size_t i = 0; i < p.num_variables(); ++i) {
    if (p.variables()[i].name != q.variables()[i].name ||
        p.variables()[i].values != q.variables()[i].values)
      throw std::invalid_argument("kl_divergence: variable lists differ");
  }
  double kl = 0.0;
  for (std::size_t idx = 0; idx < p.num_outcomes(); ++idx) {
    double pp = p.prob(idx), qq = q.prob(idx);
    if (pp == 0.0) continue;
    if (qq == 0.0) return std::numeric_limits<double>::infinity();
    kl += pp * std::log2(pp / qq);
  }
  return std::max(kl, 0.0);
}

double InformationProfile::reconstruct_conditional_entropy(std::size_t t_mask,
                                                           std::size_t s_mask) const {
  double sum = 0.0;
  for (std::size_t w = 1; w < atoms.size(); ++w)
    if ((w & t_mask) != 0 && (w & s_mask) == 0) sum += atoms[w];
  return sum;
}

InformationProfile information_profile(const JointDistribution& d) {
  std::size_t n = d.num_variables();
  if (n > 14)
    throw std::invalid_argument("information_profile: too many variables (max 14)");
  std::size_t full = std::size_t{1} << n;

  // All 2^n subset entropies, then atoms by inclusion-exclusion:
  //   atom(W) = -sum_{0 != T <= W} (-1)^{|T|} [H(T u W^c) - H(W^c)].
  std::vector<double> h(full, 0.0);
  for (std::size_t mask = 1; mask < full; ++mask) h[mask] = subset_entropy(d, mask);

  InformationProfile profile;
  profile.variables.reserve(n);
  for (const auto& v : d.variables()) profile.variables.push_back(v.name);
  profile.atoms.assign(full, 0.0);
  for (std::size_t w = 1; w < full; ++w) {
    std::size_t wc = (full - 1) & ~w;
    double total = 0.0;
    // Iterate over nonempty subsets t of w.
    for (std::size_t t = w; t != 0; t = (t - 1) & w) {
      int bits = __builtin_popcountll(t);
      total += (bits % 2 == 0 ? 1.0 : -1.0) * (h[t | wc] - h[wc]);
    }
    profile.atoms[w] = -total;
  }
  return profile;
}

}  // namespace qim
