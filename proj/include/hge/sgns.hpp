#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hge/embedding.hpp"
#include "hge/linalg.hpp"
#include "hge/service_graph.hpp"
#include "hge/walks.hpp"

namespace hge {

struct SgnsConfig {
  std::size_t dim = 128;
  std::size_t window = 10;     // context radius along a walk
  std::size_t negatives = 10;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  double min_learning_rate = 1e-4;
  std::uint64_t seed = 1;
  // 1 = deterministic single-threaded; >1 = lock-free updates over walk shards.
  unsigned threads = 1;
  std::size_t probe_pairs = 512;

  void validate() const;
};

// Probe-batch loss before training (index 0) and after each epoch.
struct SgnsTrace {
  std::vector<double> probe_loss;
};

// Loss of one (center, context) pair with fixed negatives:
//   -log s(u_ctx . v) - sum_n log s(-u_n . v)
double sgns_pair_loss(std::span<const double> center, std::span<const double> context,
                      const Matrix& negatives);

struct SgnsPairGradient {
  std::vector<double> center;
  std::vector<double> context;
  Matrix negatives;
};

SgnsPairGradient sgns_pair_gradient(std::span<const double> center, std::span<const double> context,
                                    const Matrix& negatives);

// Skip-gram with negative sampling over the walk corpus. Vocabulary is the
// set of tokens occurring in walks, in order of first occurrence. Negatives
// follow unigram counts raised to 3/4. Returns the center (input) vectors.
EmbeddingTable train_sgns(const WalkCorpus& corpus, const SgnsConfig& cfg,
                          EntityType type = EntityType::service, SgnsTrace* trace = nullptr);

// generate_walks followed by train_sgns. Throws on a graph without edges.
EmbeddingTable embed_services(const ServiceGraph& g, const WalkConfig& walk_cfg, const SgnsConfig& sgns_cfg,
                              SgnsTrace* trace = nullptr);

}  // namespace hge
