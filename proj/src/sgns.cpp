#include "hge/sgns.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <unordered_map>

#include "hge/error.hpp"
#include "hge/random.hpp"

namespace hge {

void SgnsConfig::validate() const {
  if (dim < 1) throw InvalidArgument("sgns: dim must be >= 1");
  if (window < 1) throw InvalidArgument("sgns: window must be >= 1");
  if (negatives < 1) throw InvalidArgument("sgns: negatives must be >= 1");
  if (epochs < 1) throw InvalidArgument("sgns: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("sgns: learning_rate must be > 0");
  if (!(min_learning_rate >= 0.0) || min_learning_rate > learning_rate) {
    throw InvalidArgument("sgns: min_learning_rate must be in [0, learning_rate]");
  }
}

double sgns_pair_loss(std::span<const double> center, std::span<const double> context, const Matrix& negatives) {
  double loss = -log_sigmoid(dot(context, center));
  for (std::size_t n = 0; n < negatives.rows(); ++n) loss -= log_sigmoid(-dot(negatives.row(n), center));
  return loss;
}

SgnsPairGradient sgns_pair_gradient(std::span<const double> center, std::span<const double> context,
                                    const Matrix& negatives) {
  const std::size_t dim = center.size();
  SgnsPairGradient g{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0),
                     Matrix(negatives.rows(), dim)};
  // d/dx [-log s(x)] = s(x) - 1 ; d/dx [-log s(-x)] = s(x)
  const double pos = sigmoid(dot(context, center)) - 1.0;
  axpy(pos, context, g.center);
  axpy(pos, center, g.context);
  for (std::size_t n = 0; n < negatives.rows(); ++n) {
    const double neg = sigmoid(dot(negatives.row(n), center));
    axpy(neg, negatives.row(n), g.center);
    axpy(neg, center, g.negatives.row(n));
  }
  return g;
}

namespace {

struct Vocabulary {
  std::vector<std::string> ids;
  std::vector<std::vector<std::uint32_t>> walks;  // remapped to vocabulary indices
  std::vector<double> counts;
};

Vocabulary build_vocabulary(const WalkCorpus& corpus) {
  Vocabulary vocab;
  std::unordered_map<NodeIndex, std::uint32_t> remap;
  vocab.walks.reserve(corpus.walks.size());
  for (const auto& walk : corpus.walks) {
    auto& out = vocab.walks.emplace_back();
    out.reserve(walk.size());
    for (NodeIndex token : walk) {
      if (token >= corpus.tokens.size()) throw InvalidArgument("sgns: walk token out of range");
      auto [it, inserted] = remap.emplace(token, static_cast<std::uint32_t>(vocab.ids.size()));
      if (inserted) {
        vocab.ids.push_back(corpus.tokens[token]);
        vocab.counts.push_back(0.0);
      }
      vocab.counts[it->second] += 1.0;
      out.push_back(it->second);
    }
  }
  return vocab;
}

struct ProbePair {
  std::uint32_t center;
  std::uint32_t context;
  std::vector<std::uint32_t> negatives;
};

class Trainer {
 public:
  Trainer(const Vocabulary& vocab, const SgnsConfig& cfg)
      : vocab_(vocab), cfg_(cfg), input_(vocab.ids.size(), cfg.dim), output_(vocab.ids.size(), cfg.dim) {
    Rng init(mix_seed(cfg.seed, 0x1417));
    const double bound = 0.5 / static_cast<double>(cfg.dim);
    for (double& x : input_.data()) x = init.uniform(-bound, bound);
    std::vector<double> weights(vocab.counts.size());
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = std::pow(vocab.counts[i], 0.75);
    noise_ = AliasTable(weights);
    for (const auto& w : vocab.walks) total_tokens_ += w.size();
    build_probe();
  }

  void train(SgnsTrace* trace) {
    if (trace) trace->probe_loss.push_back(probe_loss());
    const std::size_t workers = std::max<unsigned>(cfg_.threads, 1);
    for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
      if (workers == 1) {
        Rng rng(mix_seed(cfg_.seed, 0x5eed, epoch));
        run_shard(0, 1, rng);
      } else {
        std::vector<std::future<void>> tasks;
        for (std::size_t w = 0; w < workers; ++w) {
          tasks.push_back(std::async(std::launch::async, [this, epoch, w, workers] {
            Rng rng(mix_seed(cfg_.seed, 0x5eed + w, epoch));
            run_shard(w, workers, rng);
          }));
        }
        for (auto& t : tasks) t.get();
      }
      if (trace) trace->probe_loss.push_back(probe_loss());
    }
  }

  Matrix take_input() { return std::move(input_); }

 private:
  double learning_rate(std::size_t processed) const {
    const double progress =
        static_cast<double>(processed) / static_cast<double>(cfg_.epochs * std::max<std::size_t>(total_tokens_, 1));
    return cfg_.learning_rate - (cfg_.learning_rate - cfg_.min_learning_rate) * std::min(progress, 1.0);
  }

  // Walks w, w+stride, ... of one epoch.
  void run_shard(std::size_t first, std::size_t stride, Rng& rng) {
    std::vector<double> center_grad(cfg_.dim);
    const bool can_sample = vocab_.ids.size() > 1;
    for (std::size_t wi = first; wi < vocab_.walks.size(); wi += stride) {
      const auto& walk = vocab_.walks[wi];
      const std::size_t done = processed_.fetch_add(walk.size(), std::memory_order_relaxed);
      const double lr = learning_rate(done);
      for (std::size_t pos = 0; pos < walk.size(); ++pos) {
        const std::uint32_t center = walk[pos];
        const std::size_t lo = pos > cfg_.window ? pos - cfg_.window : 0;
        const std::size_t hi = std::min(walk.size() - 1, pos + cfg_.window);
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          const std::uint32_t context = walk[c];
          auto v = input_.row(center);
          std::fill(center_grad.begin(), center_grad.end(), 0.0);
          update_output(v, output_.row(context), 1.0, lr, center_grad);
          if (can_sample) {
            for (std::size_t n = 0; n < cfg_.negatives; ++n) {
              const auto neg = static_cast<std::uint32_t>(noise_.sample(rng));
              if (neg == context) continue;
              update_output(v, output_.row(neg), 0.0, lr, center_grad);
            }
          }
          axpy(1.0, center_grad, v);
        }
      }
    }
  }

  // Gradient ascent on log s(u.v) (label 1) or log s(-u.v) (label 0);
  // accumulates the center step into `center_step`, applies the output step.
  static void update_output(std::span<const double> v, std::span<double> u, double label, double lr,
                            std::span<double> center_step) {
    const double g = lr * (label - sigmoid(dot(u, v)));
    axpy(g, u, center_step);
    axpy(g, v, u);
  }

  void build_probe() {
    Rng rng(mix_seed(cfg_.seed, 0x9b0be));
    if (vocab_.walks.empty() || cfg_.probe_pairs == 0) return;
    for (std::size_t k = 0; k < cfg_.probe_pairs * 4 && probe_.size() < cfg_.probe_pairs; ++k) {
      const auto& walk = vocab_.walks[rng.below(vocab_.walks.size())];
      if (walk.size() < 2) continue;
      const std::size_t pos = rng.below(walk.size());
      const std::size_t lo = pos > cfg_.window ? pos - cfg_.window : 0;
      const std::size_t hi = std::min(walk.size() - 1, pos + cfg_.window);
      std::size_t c = lo + rng.below(hi - lo + 1);
      if (c == pos) c = (c == hi) ? lo : c + 1;
      if (c == pos) continue;
      ProbePair p{walk[pos], walk[c], {}};
      if (vocab_.ids.size() > 1) {
        while (p.negatives.size() < cfg_.negatives) {
          const auto neg = static_cast<std::uint32_t>(noise_.sample(rng));
          if (neg != p.context) p.negatives.push_back(neg);
        }
      }
      probe_.push_back(std::move(p));
    }
  }

  double probe_loss() const {
    double total = 0.0;
    for (const auto& p : probe_) {
      Matrix negs(p.negatives.size(), cfg_.dim);
      for (std::size_t n = 0; n < p.negatives.size(); ++n) {
        const auto src = output_.row(p.negatives[n]);
        std::copy(src.begin(), src.end(), negs.row(n).begin());
      }
      total += sgns_pair_loss(input_.row(p.center), output_.row(p.context), negs);
    }
    return probe_.empty() ? 0.0 : total / static_cast<double>(probe_.size());
  }

  const Vocabulary& vocab_;
  const SgnsConfig& cfg_;
  Matrix input_;
  Matrix output_;
  AliasTable noise_;
  std::size_t total_tokens_ = 0;
  std::atomic<std::size_t> processed_{0};
  std::vector<ProbePair> probe_;
};

}  // namespace

EmbeddingTable train_sgns(const WalkCorpus& corpus, const SgnsConfig& cfg, EntityType type, SgnsTrace* trace) {
  cfg.validate();
  Vocabulary vocab = build_vocabulary(corpus);
  if (vocab.ids.empty()) throw InvalidArgument("sgns: empty vocabulary");
  Trainer trainer(vocab, cfg);
  trainer.train(trace);
  return EmbeddingTable(type, std::move(vocab.ids), trainer.take_input());
}

EmbeddingTable embed_services(const ServiceGraph& g, const WalkConfig& walk_cfg, const SgnsConfig& sgns_cfg,
                              SgnsTrace* trace) {
  if (g.edge_count() == 0) throw InvalidArgument("service graph has no edges");
  return train_sgns(generate_walks(g, walk_cfg), sgns_cfg, EntityType::service, trace);
}

}  // namespace hge
