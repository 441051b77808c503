#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hge/graph.hpp"

namespace hge {

struct WalkConfig {
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 80;
  double return_param = 1.0;  // p
  double inout_param = 1.0;   // q
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void validate() const;
};

// Walk sequences over node indices; `tokens[i]` names node i.
struct WalkCorpus {
  std::vector<std::string> tokens;
  std::vector<std::vector<NodeIndex>> walks;

  std::size_t token_count() const;
};

// Second-order biased walks. From v with previous vertex t the next vertex x
// is drawn with unnormalized probability w(v,x) * {1/p if x == t, 1 if x ~ t,
// 1/q otherwise}; the first step is weight-proportional. Walks start from
// every non-isolated vertex, `walks_per_node` rounds in vertex order. Each
// walk has its own generator seeded from (seed, round, start), so the corpus
// does not depend on `threads`.
WalkCorpus generate_walks(const WeightedGraph& g, const WalkConfig& cfg);

}  // namespace hge
