#include "hge/walks.hpp"

#include <algorithm>
#include <future>

#include "hge/error.hpp"
#include "hge/random.hpp"

namespace hge {

void WalkConfig::validate() const {
  if (walks_per_node < 1) throw InvalidArgument("walks_per_node must be >= 1");
  if (walk_length < 2) throw InvalidArgument("walk_length must be >= 2");
  if (!(return_param > 0.0)) throw InvalidArgument("return parameter p must be > 0");
  if (!(inout_param > 0.0)) throw InvalidArgument("in-out parameter q must be > 0");
}

std::size_t WalkCorpus::token_count() const {
  std::size_t n = 0;
  for (const auto& w : walks) n += w.size();
  return n;
}

namespace {

class Walker {
 public:
  Walker(const WeightedGraph& g, const WalkConfig& cfg) : g_(g), cfg_(cfg) {
    first_order_ = cfg.return_param == 1.0 && cfg.inout_param == 1.0;
    tables_.resize(g.size());
    for (NodeIndex v = 0; v < g.size(); ++v) {
      const auto nbrs = g.neighbors(v);
      if (nbrs.empty()) continue;
      std::vector<double> w;
      w.reserve(nbrs.size());
      for (const auto& n : nbrs) w.push_back(static_cast<double>(n.weight));
      tables_[v] = AliasTable(w);
    }
  }

  std::vector<NodeIndex> walk(NodeIndex start, Rng& rng) const {
    std::vector<NodeIndex> path;
    path.reserve(cfg_.walk_length);
    path.push_back(start);
    while (path.size() < cfg_.walk_length) {
      const NodeIndex v = path.back();
      const auto nbrs = g_.neighbors(v);
      if (nbrs.empty()) break;
      if (path.size() == 1 || first_order_) {
        path.push_back(nbrs[tables_[v].sample(rng)].node);
      } else {
        path.push_back(biased_step(path[path.size() - 2], v, rng));
      }
    }
    return path;
  }

 private:
  NodeIndex biased_step(NodeIndex prev, NodeIndex v, Rng& rng) const {
    const auto nbrs = g_.neighbors(v);
    const auto prev_nbrs = g_.neighbors(prev);
    scratch_.resize(nbrs.size());
    double total = 0.0;
    std::size_t k = 0;  // merge cursor into prev's sorted adjacency
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      const NodeIndex x = nbrs[i].node;
      while (k < prev_nbrs.size() && prev_nbrs[k].node < x) ++k;
      double bias;
      if (x == prev) {
        bias = 1.0 / cfg_.return_param;
      } else if (k < prev_nbrs.size() && prev_nbrs[k].node == x) {
        bias = 1.0;
      } else {
        bias = 1.0 / cfg_.inout_param;
      }
      total += static_cast<double>(nbrs[i].weight) * bias;
      scratch_[i] = total;
    }
    const double u = rng.uniform() * total;
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      if (u < scratch_[i]) return nbrs[i].node;
    }
    return nbrs.back().node;
  }

  const WeightedGraph& g_;
  const WalkConfig& cfg_;
  bool first_order_ = true;
  std::vector<AliasTable> tables_;
  mutable std::vector<double> scratch_;
};

}  // namespace

WalkCorpus generate_walks(const WeightedGraph& g, const WalkConfig& cfg) {
  cfg.validate();
  WalkCorpus corpus;
  corpus.tokens = g.ids();
  std::vector<NodeIndex> starts;
  for (NodeIndex v = 0; v < g.size(); ++v) {
    if (!g.neighbors(v).empty()) starts.push_back(v);
  }
  const std::size_t total = starts.size() * cfg.walks_per_node;
  corpus.walks.resize(total);
  const std::size_t workers = std::clamp<std::size_t>(cfg.threads, 1, std::max<std::size_t>(total, 1));
  auto work = [&](std::size_t w) {
    Walker walker(g, cfg);
    for (std::size_t slot = w; slot < total; slot += workers) {
      const std::size_t round = slot / starts.size();
      const NodeIndex start = starts[slot % starts.size()];
      Rng rng(mix_seed(cfg.seed, round, start));
      corpus.walks[slot] = walker.walk(start, rng);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::future<void>> tasks;
    for (std::size_t w = 0; w < workers; ++w) tasks.push_back(std::async(std::launch::async, work, w));
    for (auto& t : tasks) t.get();
  }
  return corpus;
}

}  // namespace hge
