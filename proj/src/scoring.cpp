#include "qim/scoring.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <thread>
#include <unordered_map>

#include "qim/info.hpp"

namespace qim {

namespace {

constexpr double kLog2E = 1.4426950408889634;  // 1/ln 2

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

double entropy_of(const std::vector<double>& v) {
  double h = 0.0;
  for (double p : v) h -= xlog2x(p);
  return h;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Ordered positions of a node set inside the distribution's variable list.
std::vector<std::size_t> positions_of(const JointDistribution& d,
                                      const std::set<std::string>& names) {
  std::vector<std::size_t> pos;
  pos.reserve(names.size());
  for (const auto& n : names) pos.push_back(d.variable_position(n));
  std::sort(pos.begin(), pos.end());
  return pos;
}

std::size_t setting_key(const JointDistribution& d, std::size_t idx,
                        const std::vector<std::size_t>& pos) {
  std::size_t k = 0;
  for (std::size_t p : pos) k = k * d.variables()[p].cardinality() + d.digit(idx, p);
  return k;
}

std::size_t space_of(const JointDistribution& d, const std::vector<std::size_t>& pos) {
  std::size_t n = 1;
  for (std::size_t p : pos) n *= d.variables()[p].cardinality();
  return n;
}

// ---------------------------------------------------------------------------
// Problem instance: supports, index maps and marginal buffers for the
// witness-quality objective.
// ---------------------------------------------------------------------------

struct Instance {
  const JointDistribution* d = nullptr;
  const DirectedHypergraph* a = nullptr;

  std::vector<std::size_t> xs;   // outcome indices of d with positive mass
  std::vector<double> mux;

  std::size_t n_arcs = 0;
  std::vector<std::size_t> raw_sizes;  // effective per-arc noise sizes
  bool response_semantics = false;     // raw values are response functions

  // Per arc: source/target projections of each supported x.
  std::vector<std::vector<std::uint32_t>> s_of_x, ts_of_x;  // [a][xi]
  std::vector<std::size_t> n_s, n_ts;

  // Joint-noise support.  gu = compact id of a joint noise setting.
  std::vector<std::vector<std::uint32_t>> supp;    // [xi] -> gu list
  std::vector<std::vector<std::uint32_t>> gu_ua;   // [a][gu] -> compact ua
  std::vector<std::vector<std::uint64_t>> ua_raw;  // [a][compact ua] -> raw value
  std::vector<std::size_t> na;                     // per-arc compact counts
  std::size_t n_gu = 0;

  std::size_t total_slots() const {
    std::size_t n = 0;
    for (const auto& s : supp) n += s.size();
    return n;
  }
};

struct Marginals {
  std::vector<double> m_g;                 // joint noise
  std::vector<std::vector<double>> m_a;    // per-arc noise
  std::vector<std::vector<double>> m_tsu;  // per-arc (tgt,src,ua)
  std::vector<std::vector<double>> m_su;   // per-arc (src,ua)

  void resize(const Instance& inst) {
    m_g.assign(inst.n_gu, 0.0);
    m_a.resize(inst.n_arcs);
    m_tsu.resize(inst.n_arcs);
    m_su.resize(inst.n_arcs);
    for (std::size_t a = 0; a < inst.n_arcs; ++a) {
      m_a[a].assign(inst.na[a], 0.0);
      m_tsu[a].assign(inst.n_ts[a] * inst.na[a], 0.0);
      m_su[a].assign(inst.n_s[a] * inst.na[a], 0.0);
    }
  }
  void clear() {
    std::fill(m_g.begin(), m_g.end(), 0.0);
    for (auto& v : m_a) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : m_tsu) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : m_su) std::fill(v.begin(), v.end(), 0.0);
  }
};

using Table = std::vector<std::vector<double>>;  // q[xi][slot]

void accumulate(const Instance& inst, const Table& q, Marginals& m) {
  m.clear();
  for (std::size_t xi = 0; xi < inst.xs.size(); ++xi) {
    double mu = inst.mux[xi];
    const auto& slots = inst.supp[xi];
    for (std::size_t s = 0; s < slots.size(); ++s) {
      double w = mu * q[xi][s];
      if (w == 0.0) continue;
      std::uint32_t gu = slots[s];
      m.m_g[gu] += w;
      for (std::size_t a = 0; a < inst.n_arcs; ++a) {
        std::uint32_t ua = inst.gu_ua[a][gu];
        m.m_a[a][ua] += w;
        m.m_tsu[a][inst.ts_of_x[a][xi] * inst.na[a] + ua] += w;
        m.m_su[a][inst.s_of_x[a][xi] * inst.na[a] + ua] += w;
      }
    }
  }
}

double objective_from(const Instance& inst, const Marginals& m) {
  double f = -entropy_of(m.m_g);
  for (std::size_t a = 0; a < inst.n_arcs; ++a)
    f += entropy_of(m.m_a[a]) + entropy_of(m.m_tsu[a]) - entropy_of(m.m_su[a]);
  return f;
}

double evaluate(const Instance& inst, const Table& q, Marginals& m) {
  accumulate(inst, q, m);
  return objective_from(inst, m);
}

double safe_log2(double v) { return std::log2(std::max(v, 1e-300)); }

// dF/dq[xi][slot], divided by mu(x) when per_x_scaled.
void gradient(const Instance& inst, const Marginals& m, bool per_x_scaled,
              Table& grad) {
  double shift = -(static_cast<double>(inst.n_arcs) - 1.0) * kLog2E;
  for (std::size_t xi = 0; xi < inst.xs.size(); ++xi) {
    const auto& slots = inst.supp[xi];
    grad[xi].resize(slots.size());
    double mu = inst.mux[xi];
    for (std::size_t s = 0; s < slots.size(); ++s) {
      std::uint32_t gu = slots[s];
      double g = safe_log2(m.m_g[gu]) + shift;
      for (std::size_t a = 0; a < inst.n_arcs; ++a) {
        std::uint32_t ua = inst.gu_ua[a][gu];
        g -= safe_log2(m.m_a[a][ua]);
        g -= safe_log2(m.m_tsu[a][inst.ts_of_x[a][xi] * inst.na[a] + ua]);
        g += safe_log2(m.m_su[a][inst.s_of_x[a][xi] * inst.na[a] + ua]);
      }
      grad[xi][s] = per_x_scaled ? g : g * mu;
    }
  }
}

// ---------------------------------------------------------------------------
// Noise sizing.
// ---------------------------------------------------------------------------

// Response-variable size |V(Tgt)|^|V(Src)| with a saturation guard.
std::size_t response_size(const JointDistribution& d, const Hyperarc& arc,
                          std::size_t huge) {
  std::size_t t_space = 1, s_space = 1;
  for (const auto& n : arc.targets) t_space *= d.variable(n).cardinality();
  for (const auto& n : arc.sources) s_space *= d.variable(n).cardinality();
  if (t_space <= 1) return 1;
  double log2_size = static_cast<double>(s_space) * std::log2(static_cast<double>(t_space));
  if (log2_size > 62.0) return huge;
  std::size_t size = 1;
  for (std::size_t i = 0; i < s_space; ++i) {
    if (size > huge / t_space + 1) return huge;
    size *= t_space;
    if (size >= huge) return huge;
  }
  return size;
}

std::vector<std::size_t> effective_sizes(const DirectedHypergraph& a,
                                         const JointDistribution& d,
                                         const SimincOptions& opts,
                                         bool* response_exact) {
  const std::size_t huge = std::numeric_limits<std::size_t>::max() / 2;
  std::vector<std::size_t> sizes(a.arcs.size());
  *response_exact = true;
  for (std::size_t k = 0; k < a.arcs.size(); ++k) {
    auto it = opts.noise_sizes.find(a.arcs[k].label);
    if (it != opts.noise_sizes.end()) {
      if (it->second < 1)
        throw std::invalid_argument("siminc: noise-space size < 1 for arc " + a.arcs[k].label);
      sizes[k] = it->second;
      if (sizes[k] != response_size(d, a.arcs[k], huge)) *response_exact = false;
    } else {
      sizes[k] = response_size(d, a.arcs[k], huge);
    }
  }
  return sizes;
}

// Reduce sizes (largest first, by halving) until the joint space fits.
bool fit_to_joint(std::vector<std::size_t>& sizes, std::size_t max_joint) {
  auto joint = [&]() {
    double lg = 0.0;
    for (std::size_t s : sizes) lg += std::log2(static_cast<double>(s));
    return lg;
  };
  double target = std::log2(static_cast<double>(max_joint));
  bool reduced = false;
  while (joint() > target + 1e-12) {
    auto it = std::max_element(sizes.begin(), sizes.end());
    if (*it <= 1) break;
    *it = std::max<std::size_t>(1, *it / 2);
    reduced = true;
  }
  return reduced;
}

// ---------------------------------------------------------------------------
// Response-variable conditional tables (for warm starts and sparse supports).
// ---------------------------------------------------------------------------

struct ResponseArc {
  std::vector<std::size_t> s_pos, t_pos;  // positions in d
  std::size_t s_space = 1, t_space = 1;
  // cpd[s][t] = mu(Tgt = t | Src = s), uniform on zero-mass source rows.
  std::vector<std::vector<double>> cpd;
  // per source setting: target values with positive conditional probability
  std::vector<std::vector<std::uint32_t>> supp_t;
};

ResponseArc build_response_arc(const JointDistribution& d, const Hyperarc& arc) {
  ResponseArc r;
  r.s_pos = positions_of(d, arc.sources);
  r.t_pos = positions_of(d, arc.targets);
  r.s_space = space_of(d, r.s_pos);
  r.t_space = space_of(d, r.t_pos);
  r.cpd.assign(r.s_space, std::vector<double>(r.t_space, 0.0));
  std::vector<double> s_mass(r.s_space, 0.0);
  for (std::size_t idx = 0; idx < d.num_outcomes(); ++idx) {
    double p = d.prob(idx);
    if (p == 0.0) continue;
    std::size_t sk = setting_key(d, idx, r.s_pos);
    std::size_t tk = setting_key(d, idx, r.t_pos);
    r.cpd[sk][tk] += p;
    s_mass[sk] += p;
  }
  for (std::size_t sk = 0; sk < r.s_space; ++sk) {
    if (s_mass[sk] > 0.0) {
      for (double& v : r.cpd[sk]) v /= s_mass[sk];
    } else {
      for (double& v : r.cpd[sk]) v = 1.0 / static_cast<double>(r.t_space);
    }
  }
  r.supp_t.assign(r.s_space, {});
  for (std::size_t sk = 0; sk < r.s_space; ++sk)
    for (std::size_t tk = 0; tk < r.t_space; ++tk)
      if (r.cpd[sk][tk] > 0.0) r.supp_t[sk].push_back(static_cast<std::uint32_t>(tk));
  return r;
}

// Weight of a response function g (raw index digit-decodes to one target
// setting per source setting, last source setting fastest).
double response_weight(const ResponseArc& r, std::uint64_t raw) {
  double w = 1.0;
  for (std::size_t sk = r.s_space; sk-- > 0;) {
    std::size_t tk = raw % r.t_space;
    raw /= r.t_space;
    w *= r.cpd[sk][tk];
  }
  return w;
}

std::uint64_t response_component(const ResponseArc& r, std::uint64_t raw, std::size_t sk) {
  // Component g(sk): source settings indexed with the last one fastest.
  std::uint64_t div = 1;
  for (std::size_t i = r.s_space; i-- > sk + 1;) div *= r.t_space;
  return (raw / div) % r.t_space;
}

// ---------------------------------------------------------------------------
// Instance construction.
// ---------------------------------------------------------------------------

void fill_x_side(Instance& inst) {
  const auto& d = *inst.d;
  const auto& a = *inst.a;
  inst.n_arcs = a.arcs.size();
  for (std::size_t idx = 0; idx < d.num_outcomes(); ++idx) {
    if (d.prob(idx) > 0.0) {
      inst.xs.push_back(idx);
      inst.mux.push_back(d.prob(idx));
    }
  }
  inst.s_of_x.resize(inst.n_arcs);
  inst.ts_of_x.resize(inst.n_arcs);
  inst.n_s.resize(inst.n_arcs);
  inst.n_ts.resize(inst.n_arcs);
  for (std::size_t k = 0; k < inst.n_arcs; ++k) {
    auto s_pos = positions_of(d, a.arcs[k].sources);
    auto t_pos = positions_of(d, a.arcs[k].targets);
    std::size_t s_space = space_of(d, s_pos), t_space = space_of(d, t_pos);
    inst.n_s[k] = s_space;
    inst.n_ts[k] = s_space * t_space;
    inst.s_of_x[k].resize(inst.xs.size());
    inst.ts_of_x[k].resize(inst.xs.size());
    for (std::size_t xi = 0; xi < inst.xs.size(); ++xi) {
      std::size_t sk = setting_key(d, inst.xs[xi], s_pos);
      std::size_t tk = setting_key(d, inst.xs[xi], t_pos);
      inst.s_of_x[k][xi] = static_cast<std::uint32_t>(sk);
      inst.ts_of_x[k][xi] = static_cast<std::uint32_t>(tk * s_space + sk);
    }
  }
}

// Dense joint support: every joint noise setting at every supported x.
void build_dense_support(Instance& inst) {
  std::size_t nu = 1;
  for (std::size_t s : inst.raw_sizes) nu *= s;
  inst.n_gu = nu;
  inst.na.assign(inst.n_arcs, 1);
  inst.gu_ua.assign(inst.n_arcs, {});
  inst.ua_raw.assign(inst.n_arcs, {});
  for (std::size_t a = 0; a < inst.n_arcs; ++a) {
    inst.na[a] = inst.raw_sizes[a];
    inst.ua_raw[a].resize(inst.raw_sizes[a]);
    for (std::size_t v = 0; v < inst.raw_sizes[a]; ++v) inst.ua_raw[a][v] = v;
    inst.gu_ua[a].resize(nu);
  }
  // Mixed radix, last arc fastest.
  std::vector<std::size_t> suffix(inst.n_arcs, 1);
  for (std::size_t a = inst.n_arcs; a-- > 1;)
    suffix[a - 1] = suffix[a] * inst.raw_sizes[a];
  for (std::size_t gu = 0; gu < nu; ++gu)
    for (std::size_t a = 0; a < inst.n_arcs; ++a)
      inst.gu_ua[a][gu] = static_cast<std::uint32_t>((gu / suffix[a]) % inst.raw_sizes[a]);
  std::vector<std::uint32_t> all(nu);
  for (std::size_t gu = 0; gu < nu; ++gu) all[gu] = static_cast<std::uint32_t>(gu);
  inst.supp.assign(inst.xs.size(), all);
}

// Sparse response support: at each x, the response functions consistent with
// the observed (source, target) pair and supported by the per-row cpds.
// Returns false when the support would exceed the budget.
bool build_sparse_response_support(Instance& inst,
                                   const std::vector<ResponseArc>& arcs,
                                   std::size_t max_slots, Table* warm) {
  const auto& d = *inst.d;
  std::size_t n_arcs = inst.n_arcs;
  // Enumerate per-arc consistent response functions for each x.
  std::vector<std::vector<std::vector<std::uint64_t>>> per_arc_g(n_arcs);
  std::vector<std::vector<std::vector<double>>> per_arc_w(n_arcs);
  double total_slots = 0.0;
  std::vector<double> slots_per_x(inst.xs.size(), 1.0);
  for (std::size_t k = 0; k < n_arcs; ++k) {
    per_arc_g[k].resize(inst.xs.size());
    per_arc_w[k].resize(inst.xs.size());
  }
  for (std::size_t xi = 0; xi < inst.xs.size(); ++xi) {
    for (std::size_t k = 0; k < n_arcs; ++k) {
      const auto& r = arcs[k];
      std::size_t sk = setting_key(d, inst.xs[xi], r.s_pos);
      std::size_t tk = setting_key(d, inst.xs[xi], r.t_pos);
      // Count consistent functions: fixed component at sk, free elsewhere.
      double count = 1.0;
      for (std::size_t s2 = 0; s2 < r.s_space; ++s2)
        if (s2 != sk) count *= static_cast<double>(r.supp_t[s2].size());
      slots_per_x[xi] *= count;
      // Enumerate lazily below only if the budget check passes.
      (void)tk;
    }
    total_slots += slots_per_x[xi];
    if (total_slots > static_cast<double>(max_slots)) return false;
  }

  // Budget ok: enumerate.
  inst.supp.assign(inst.xs.size(), {});
  std::vector<std::vector<std::uint64_t>> gu_raw_per_arc(n_arcs);
  if (warm) warm->assign(inst.xs.size(), {});

  struct TupleHash {
    std::size_t operator()(const std::vector<std::uint64_t>& v) const {
      std::size_t h = 1469598103934665603ull;
      for (auto x : v) {
        h ^= std::hash<std::uint64_t>{}(x);
        h *= 1099511628211ull;
      }
      return h;
    }
  };
  std::unordered_map<std::vector<std::uint64_t>, std::uint32_t, TupleHash> gu_map;

  std::vector<std::uint64_t> current(n_arcs, 0);
  std::vector<double> current_w(n_arcs, 1.0);
  for (std::size_t xi = 0; xi < inst.xs.size(); ++xi) {
    // Per-arc consistent (g, weight) lists at this x.
    std::vector<std::vector<std::pair<std::uint64_t, double>>> lists(n_arcs);
    for (std::size_t k = 0; k < n_arcs; ++k) {
      const auto& r = arcs[k];
      std::size_t sk = setting_key(d, inst.xs[xi], r.s_pos);
      std::size_t tk = setting_key(d, inst.xs[xi], r.t_pos);
      // Free components iterate over supp_t; component sk fixed to tk.
      std::vector<std::pair<std::uint64_t, double>> acc{{0, 1.0}};
      for (std::size_t s2 = 0; s2 < r.s_space; ++s2) {
        std::vector<std::pair<std::uint64_t, double>> next;
        const bool fixed = (s2 == sk);
        const auto& choices = r.supp_t[s2];
        next.reserve(acc.size() * (fixed ? 1 : choices.size()));
        for (const auto& [raw, w] : acc) {
          if (fixed) {
            next.emplace_back(raw * r.t_space + tk, w * r.cpd[s2][tk]);
          } else {
            for (std::uint32_t t2 : choices)
              next.emplace_back(raw * r.t_space + t2, w * r.cpd[s2][t2]);
          }
        }
        acc = std::move(next);
      }
      lists[k] = std::move(acc);
    }
    // Cartesian product across arcs.
    std::function<void(std::size_t, double)> rec = [&](std::size_t k, double w) {
      if (k == n_arcs) {
        auto it = gu_map.find(current);
        std::uint32_t gu;
        if (it == gu_map.end()) {
          gu = static_cast<std::uint32_t>(gu_map.size());
          gu_map.emplace(current, gu);
          for (std::size_t kk = 0; kk < n_arcs; ++kk)
            gu_raw_per_arc[kk].push_back(current[kk]);
        } else {
          gu = it->second;
        }
        inst.supp[xi].push_back(gu);
        if (warm) (*warm)[xi].push_back(w);
        return;
      }
      for (const auto& [raw, lw] : lists[k]) {
        current[k] = raw;
        rec(k + 1, w * lw);
      }
    };
    rec(0, 1.0);
    if (warm) {
      double z = 0.0;
      for (double w : (*warm)[xi]) z += w;
      if (z <= 0.0) return false;
      for (double& w : (*warm)[xi]) w /= z;
    }
  }

  inst.n_gu = gu_map.size();
  // Compact per-arc value ids.
  inst.na.assign(n_arcs, 0);
  inst.gu_ua.assign(n_arcs, {});
  inst.ua_raw.assign(n_arcs, {});
  for (std::size_t k = 0; k < n_arcs; ++k) {
    std::unordered_map<std::uint64_t, std::uint32_t> compact;
    inst.gu_ua[k].resize(inst.n_gu);
    for (std::size_t gu = 0; gu < inst.n_gu; ++gu) {
      std::uint64_t raw = gu_raw_per_arc[k][gu];
      auto it = compact.find(raw);
      std::uint32_t ua;
      if (it == compact.end()) {
        ua = static_cast<std::uint32_t>(compact.size());
        compact.emplace(raw, ua);
        inst.ua_raw[k].push_back(raw);
      } else {
        ua = it->second;
      }
      inst.gu_ua[k][gu] = ua;
    }
    inst.na[k] = compact.size();
  }
  return true;
}

// Dense warm start from the response posterior, mixed with a little uniform
// mass to keep the iterate interior.
bool dense_response_warm(const Instance& inst, const std::vector<ResponseArc>& arcs,
                         Table& q) {
  const auto& d = *inst.d;
  std::size_t nu = inst.n_gu;
  q.assign(inst.xs.size(), std::vector<double>(nu, 0.0));
  for (std::size_t xi = 0; xi < inst.xs.size(); ++xi) {
    double z = 0.0;
    for (std::size_t gu = 0; gu < nu; ++gu) {
      double w = 1.0;
      for (std::size_t k = 0; k < inst.n_arcs && w > 0.0; ++k) {
        const auto& r = arcs[k];
        std::uint64_t raw = inst.ua_raw[k][inst.gu_ua[k][gu]];
        std::size_t sk = setting_key(d, inst.xs[xi], r.s_pos);
        std::size_t tk = setting_key(d, inst.xs[xi], r.t_pos);
        if (response_component(r, raw, sk) != tk) {
          w = 0.0;
          break;
        }
        w *= response_weight(r, raw);
      }
      q[xi][gu] = w;
      z += w;
    }
    if (z <= 0.0) return false;
    for (std::size_t gu = 0; gu < nu; ++gu)
      q[xi][gu] = 0.98 * q[xi][gu] / z + 0.02 / static_cast<double>(nu);
  }
  return true;
}

// ---------------------------------------------------------------------------
// Mirror descent with backtracking on each per-x simplex.
// ---------------------------------------------------------------------------

struct RestartOutcome {
  double value = std::numeric_limits<double>::infinity();
  Table q;
  bool converged = false;
};

void snap_to_vertex(const Instance& inst, const Table& q, Table& out) {
  out.resize(q.size());
  for (std::size_t xi = 0; xi < q.size(); ++xi) {
    out[xi].assign(q[xi].size(), 0.0);
    std::size_t best = 0;
    for (std::size_t s = 1; s < q[xi].size(); ++s)
      if (q[xi][s] > q[xi][best]) best = s;
    out[xi][best] = 1.0;
  }
}

RestartOutcome run_restart(const Instance& inst, Table q, const SimincOptions& opts) {
  Marginals m;
  m.resize(inst);
  RestartOutcome out;
  double f = evaluate(inst, q, m);
  double best_f = f;
  Table best_q = q;

  Table dir(q.size()), trial(q.size());
  double eta = opts.step_init;
  double window_mark = f;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    gradient(inst, m, /*per_x_scaled=*/true, dir);
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving) {
      for (std::size_t xi = 0; xi < q.size(); ++xi) {
        const auto& dx = dir[xi];
        auto& tx = trial[xi];
        tx.resize(dx.size());
        double lo = dx[0];
        for (double v : dx) lo = std::min(lo, v);
        double z = 0.0;
        for (std::size_t s = 0; s < dx.size(); ++s) {
          double e = -eta * (dx[s] - lo);
          tx[s] = q[xi][s] * std::exp(std::max(e, -700.0));
          z += tx[s];
        }
        if (z <= 0.0) {
          tx = q[xi];
          continue;
        }
        for (double& v : tx) v /= z;
      }
      double f_new = evaluate(inst, trial, m);
      if (f_new <= f + 1e-15) {
        q.swap(trial);
        f = f_new;
        accepted = true;
        eta = std::min(eta * 1.2, 8.0);
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) {
      // Line search exhausted: no descent at machine precision.
      f = evaluate(inst, q, m);
      out.converged = true;
      break;
    }
    if (f < best_f) {
      best_f = f;
      best_q = q;
    }
    // Converged when a whole window passes with less than conv_tol progress.
    if ((iter + 1) % opts.conv_window == 0) {
      if (window_mark - f < opts.conv_tol) {
        out.converged = true;
        break;
      }
      window_mark = f;
    }
  }

  // Vertex snap: deterministic rounding of the best iterate; often lands
  // exactly on a witness when one is nearby.
  Table snapped;
  snap_to_vertex(inst, best_q, snapped);
  double f_snap = evaluate(inst, snapped, m);
  if (f_snap < best_f) {
    best_f = f_snap;
    best_q = snapped;
  }

  out.value = best_f;
  out.q = std::move(best_q);
  return out;
}

Table random_table(const Instance& inst, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> exp1(1.0);
  Table q(inst.xs.size());
  for (std::size_t xi = 0; xi < inst.xs.size(); ++xi) {
    q[xi].resize(inst.supp[xi].size());
    double z = 0.0;
    for (auto& v : q[xi]) {
      v = exp1(rng) + 1e-9;
      z += v;
    }
    for (auto& v : q[xi]) v /= z;
  }
  return q;
}

Table uniform_table(const Instance& inst) {
  Table q(inst.xs.size());
  for (std::size_t xi = 0; xi < inst.xs.size(); ++xi)
    q[xi].assign(inst.supp[xi].size(),
                 1.0 / static_cast<double>(inst.supp[xi].size()));
  return q;
}

// ---------------------------------------------------------------------------
// Witness materialization.
// ---------------------------------------------------------------------------

JointDistribution materialize_witness(const Instance& inst, const Table& q,
                                      std::vector<std::string>* noise_names) {
  const auto& d = *inst.d;
  const auto& a = *inst.a;
  // Trim each noise variable to the values that carry mass somewhere.
  std::vector<std::vector<std::uint32_t>> used(inst.n_arcs);
  std::vector<std::unordered_map<std::uint32_t, std::size_t>> trim(inst.n_arcs);
  for (std::size_t k = 0; k < inst.n_arcs; ++k) {
    std::vector<char> seen(inst.na[k], 0);
    for (std::size_t xi = 0; xi < inst.xs.size(); ++xi)
      for (std::size_t s = 0; s < inst.supp[xi].size(); ++s)
        if (q[xi][s] > 0.0) seen[inst.gu_ua[k][inst.supp[xi][s]]] = 1;
    for (std::uint32_t ua = 0; ua < inst.na[k]; ++ua)
      if (seen[ua]) {
        trim[k][ua] = used[k].size();
        used[k].push_back(ua);
      }
    if (used[k].empty()) {
      trim[k][0] = 0;
      used[k].push_back(0);
    }
  }

  std::vector<Variable> vars = d.variables();
  noise_names->clear();
  for (std::size_t k = 0; k < inst.n_arcs; ++k) {
    Variable v;
    v.name = noise_node_name(a.arcs[k].label);
    for (std::uint32_t ua : used[k]) {
      std::uint64_t raw = inst.ua_raw[k][ua];
      v.values.push_back((inst.response_semantics ? "g" : "u") + std::to_string(raw));
    }
    noise_names->push_back(v.name);
    vars.push_back(std::move(v));
  }

  std::size_t noise_space = 1;
  for (std::size_t k = 0; k < inst.n_arcs; ++k) noise_space *= used[k].size();
  std::vector<double> probs(d.num_outcomes() * noise_space, 0.0);
  std::vector<std::size_t> suffix(inst.n_arcs, 1);
  for (std::size_t k = inst.n_arcs; k-- > 1;) suffix[k - 1] = suffix[k] * used[k].size();
  for (std::size_t xi = 0; xi < inst.xs.size(); ++xi) {
    for (std::size_t s = 0; s < inst.supp[xi].size(); ++s) {
      double w = inst.mux[xi] * q[xi][s];
      if (w == 0.0) continue;
      std::uint32_t gu = inst.supp[xi][s];
      std::size_t noise_idx = 0;
      for (std::size_t k = 0; k < inst.n_arcs; ++k)
        noise_idx += trim[k].at(inst.gu_ua[k][gu]) * suffix[k];
      probs[inst.xs[xi] * noise_space + noise_idx] += w;
    }
  }
  return JointDistribution(std::move(vars), std::move(probs));
}

void breakdown_terms(const Instance& inst, const Table& q, SimincResult& result) {
  Marginals m;
  m.resize(inst);
  accumulate(inst, q, m);
  double gap = -entropy_of(m.m_g);
  for (std::size_t k = 0; k < inst.n_arcs; ++k) gap += entropy_of(m.m_a[k]);
  result.independence_gap_bits = std::max(gap, 0.0);
  result.arc_conditional_bits.clear();
  for (std::size_t k = 0; k < inst.n_arcs; ++k) {
    double h = entropy_of(m.m_tsu[k]) - entropy_of(m.m_su[k]);
    result.arc_conditional_bits.emplace_back(inst.a->arcs[k].label, std::max(h, 0.0));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Public surface.
// ---------------------------------------------------------------------------

double idef(const DirectedHypergraph& a, const JointDistribution& d) {
  a.validate();
  std::vector<std::string> all;
  all.reserve(d.num_variables());
  for (const auto& v : d.variables()) all.push_back(v.name);
  double value = -entropy(d, all);
  for (const auto& arc : a.arcs) {
    std::vector<std::string> src(arc.sources.begin(), arc.sources.end());
    std::vector<std::string> tgt(arc.targets.begin(), arc.targets.end());
    value += conditional_entropy(d, tgt, src);
  }
  return value;
}

bool certify_incompatible(const DirectedHypergraph& a, const JointDistribution& d,
                          double tol) {
  return idef(a, d) > tol;
}

SimincObjectiveEval siminc_objective(const DirectedHypergraph& a,
                                     const JointDistribution& d,
                                     const std::vector<std::size_t>& sizes,
                                     const std::vector<std::vector<double>>& q) {
  a.validate();
  if (sizes.size() != a.arcs.size())
    throw std::invalid_argument("siminc_objective: one size per arc required");
  Instance inst;
  inst.d = &d;
  inst.a = &a;
  inst.raw_sizes = sizes;
  fill_x_side(inst);
  build_dense_support(inst);
  if (q.size() != inst.xs.size())
    throw std::invalid_argument("siminc_objective: one row per positive-mass outcome");
  for (std::size_t xi = 0; xi < q.size(); ++xi)
    if (q[xi].size() != inst.n_gu)
      throw std::invalid_argument("siminc_objective: row length must match joint noise space");
  Marginals m;
  m.resize(inst);
  SimincObjectiveEval eval;
  eval.value_bits = evaluate(inst, q, m);
  Table grad(q.size());
  gradient(inst, m, /*per_x_scaled=*/false, grad);
  eval.grad = std::move(grad);
  return eval;
}

SimincResult siminc(const DirectedHypergraph& a, const JointDistribution& d,
                    const SimincOptions& options) {
  a.validate();
  SimincResult result;
  result.seed = options.seed;
  result.base_vars.clear();
  for (const auto& v : d.variables()) result.base_vars.push_back(v.name);
  if (options.restarts < 1) throw std::invalid_argument("siminc: restarts must be >= 1");

  double idef_lower = idef(a, d);

  if (a.arcs.empty()) {
    result.value_bits = 0.0;
    result.witness_candidate = d;
    result.restarts_used = 0;
    result.converged = true;
    return result;
  }

  bool response_exact = false;
  std::vector<std::size_t> sizes = effective_sizes(a, d, options, &response_exact);

  Instance inst;
  inst.d = &d;
  inst.a = &a;
  fill_x_side(inst);

  std::vector<ResponseArc> rarcs;
  auto ensure_rarcs = [&]() {
    if (rarcs.empty())
      for (const auto& arc : a.arcs) rarcs.push_back(build_response_arc(d, arc));
  };

  double joint_lg = 0.0;
  for (std::size_t s : sizes) joint_lg += std::log2(static_cast<double>(s));
  bool dense_fits = joint_lg <= std::log2(static_cast<double>(options.max_joint_dense)) + 1e-12;

  Table warm;
  bool have_warm = false;
  if (dense_fits) {
    inst.raw_sizes = sizes;
    inst.response_semantics = response_exact;
    build_dense_support(inst);
    if (response_exact) {
      ensure_rarcs();
      have_warm = dense_response_warm(inst, rarcs, warm);
    }
  } else if (response_exact) {
    // Sparse response-support parametrization keeps the full response spaces
    // while only carrying jointly-consistent noise settings.
    ensure_rarcs();
    inst.raw_sizes = sizes;
    inst.response_semantics = true;
    have_warm = build_sparse_response_support(inst, rarcs, options.max_sparse_support, &warm);
    if (!have_warm) {
      inst = Instance{};
      inst.d = &d;
      inst.a = &a;
      fill_x_side(inst);
    }
  }
  if (inst.supp.empty()) {
    // Reduced dense fallback.
    fit_to_joint(sizes, options.max_joint_dense);
    inst.raw_sizes = sizes;
    inst.response_semantics = false;
    build_dense_support(inst);
    have_warm = false;
    warm.clear();
  }

  for (std::size_t k = 0; k < a.arcs.size(); ++k)
    result.noise_sizes_used[a.arcs[k].label] = inst.raw_sizes[k];

  // Restart schedule: 0 = warm start (when available, else uniform), the
  // rest random.  Early exit if a restart reaches an exact witness.
  int n_restarts = options.restarts;
  std::vector<Table> inits;
  inits.reserve(n_restarts);
  if (have_warm) {
    // Keep the warm start interior on sparse supports as well.
    for (auto& row : warm) {
      double n = static_cast<double>(row.size());
      for (auto& v : row) v = 0.98 * v + 0.02 / n;
    }
    inits.push_back(std::move(warm));
  } else {
    inits.push_back(uniform_table(inst));
  }
  for (int r = 1; r < n_restarts; ++r)
    inits.push_back(random_table(inst, mix_seed(options.seed, static_cast<std::uint64_t>(r))));

  std::vector<RestartOutcome> outcomes(inits.size());
  outcomes[0] = run_restart(inst, inits[0], options);
  std::size_t first_parallel = 1;
  if (outcomes[0].value < 1e-12) {
    result.restarts_used = 1;
  } else {
    unsigned hw = options.threads > 0 ? static_cast<unsigned>(options.threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
    std::size_t n = inits.size();
    std::atomic<std::size_t> next{first_parallel};
    auto worker = [&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        outcomes[i] = run_restart(inst, inits[i], options);
      }
    };
    std::vector<std::thread> pool;
    unsigned n_threads = std::min<unsigned>(hw, static_cast<unsigned>(n - first_parallel) + 1);
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    result.restarts_used = static_cast<int>(n);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < static_cast<std::size_t>(result.restarts_used); ++i)
    if (outcomes[i].value < outcomes[best].value) best = i;

  result.value_bits = std::max(outcomes[best].value, 0.0);
  result.converged = outcomes[best].converged;
  breakdown_terms(inst, outcomes[best].q, result);
  std::vector<std::string> noise_names;
  result.witness_candidate = materialize_witness(inst, outcomes[best].q, &noise_names);
  for (std::size_t k = 0; k < a.arcs.size(); ++k)
    result.arc_noise_names[a.arcs[k].label] = noise_names[k];

  if (result.value_bits < idef_lower - 1e-6)
    throw std::logic_error("siminc: objective fell below the IDef lower bound");
  return result;
}

double siminc_upper_bound(const DirectedHypergraph& a, const JointDistribution& d,
                          const JointDistribution& nu) {
  a.validate();
  std::vector<std::string> base;
  for (const auto& v : d.variables()) base.push_back(v.name);
  JointDistribution back = marginal(nu, base);
  double dev = 0.0;
  for (std::size_t i = 0; i < back.num_outcomes(); ++i)
    dev = std::max(dev, std::abs(back.prob(i) - d.prob(i)));
  if (dev > 1e-9)
    throw std::invalid_argument("siminc_upper_bound: extension marginal deviates from d by " +
                                std::to_string(dev));
  double bound = idef(dagger(a), nu);
  if (bound < idef(a, d) - 1e-9)
    throw std::logic_error("siminc_upper_bound: bound fell below idef(a, d)");
  return bound;
}

}  // namespace qim
