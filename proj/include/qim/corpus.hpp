#ifndef QIM_CORPUS_HPP_
#define QIM_CORPUS_HPP_

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qim/compat.hpp"
#include "qim/dist.hpp"
#include "qim/hypergraph.hpp"

namespace qim {

// Named distributions built by exhaustive enumeration of the underlying fair
// coins:
//   "xor"          mu_xor(X,Y,Z): X,Y independent fair bits, Z = X xor Y
//   "p"            P(A,B,C):  A=(X1,X2), B=(X2,X3), C=(X3,X1)
//   "q"            Q(A,B,C):  A=(X1,X2), B=(X1,X3), C=(X1, X2 xor X3)
//   "copy-pair"    mu(X,Y,Z) = Unif(X,Z) with Y = X
//   "parallel3"    mu(X,Y) of the three-parallel-arc construction (n = 3)
std::map<std::string, JointDistribution> build_corpus_distributions();

// Known witnesses for corpus entries (Q and P against the 3-cycle, the
// parallel3 construction against its graph).
Witness corpus_witness(const std::string& name);

// One golden corpus entry: inputs, the expected verdict and scores, and
// where the expectation comes from.
struct CorpusEntry {
  std::string name;
  std::string distribution;  // key into build_corpus_distributions(), or ""
  JointDistribution mu;
  DirectedHypergraph hypergraph;
  std::optional<CompatStatus> expected_status;
  std::optional<double> expected_idef_bits;
  std::optional<Witness> witness;  // expected to verify when present
  std::string provenance;
};

std::vector<CorpusEntry> golden_corpus();

struct CorpusRunResult {
  std::string name;
  bool passed = false;
  std::string message;
};

// Runs every corpus entry through the pipeline; deterministic under `seed`.
std::vector<CorpusRunResult> run_corpus(std::uint64_t seed = 0);

}  // namespace qim

#endif  // QIM_CORPUS_HPP_
