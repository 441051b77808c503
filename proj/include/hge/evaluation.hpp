#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hge/embedding.hpp"
#include "hge/events.hpp"
#include "hge/graph.hpp"
#include "hge/linalg.hpp"
#include "hge/patient_multigraph.hpp"
#include "hge/sgns.hpp"
#include "hge/walks.hpp"

namespace hge {

struct LogRegConfig {
  double l2_lambda = 1.0;
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;  // on the gradient norm
};

struct LogRegModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> loss_history;  // objective at every iterate

  double probability(std::span<const double> x) const;
  int predict(std::span<const double> x) const { return probability(x) >= 0.5 ? 1 : 0; }
};

// mean_i log(1 + exp(-y_i (w.x_i + b))) + l2_lambda |w|^2, y in {0,1}
// mapped to {-1,+1}. The bias is not regularized.
double logreg_objective(const Matrix& x, std::span<const int> y, std::span<const double> w, double b,
                        double l2_lambda);
// Gradient of logreg_objective; `grad` has size dim + 1 with the bias last.
void logreg_gradient(const Matrix& x, std::span<const int> y, std::span<const double> w, double b, double l2_lambda,
                     std::span<double> grad);

// Damped Newton iterations with Armijo backtracking, so the objective never
// increases between iterates. Stops at gradient norm < tolerance or the
// iteration cap.
LogRegModel train_logreg(const Matrix& x, std::span<const int> y, const LogRegConfig& cfg);

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
};

// Binary labels. Micro-F1 pools counts over both classes (equal to
// accuracy); macro-F1 averages per-class F1, where a class with a zero
// denominator scores 0.
F1Scores f1_scores(std::span<const int> y_true, std::span<const int> y_pred);

enum class BipartiteMode { patient_service, patient_doctor };

// Patient x service (or doctor) graph; weight = number of events for the
// pair, collapsing the third entity.
BipartiteGraph build_bipartite(std::span<const JourneyEvent> events, BipartiteMode mode);

enum class BaselineMethod { node2vec, line2 };

struct BaselineConfig {
  WalkConfig walk;
  SgnsConfig sgns;
  PatientTrainConfig line;
};

// node2vec: biased walks + skip-gram on the bipartite graph viewed as a
// homogeneous graph. line2: second-order trainer with free context vectors.
// Returns patient (left-vertex) rows only.
EmbeddingTable run_baseline(const BipartiteGraph& g, BaselineMethod method, const BaselineConfig& cfg);

struct EvalConfig {
  std::vector<double> train_ratios{0.2, 0.4, 0.6, 0.8};
  std::size_t repeats = 10;
  double l2_lambda = 1.0;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void validate() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per-class shuffle; round(ratio * n_class) members of each class go to
// train. Throws if a class would be empty on either side.
Split stratified_split(std::span<const int> labels, double ratio, std::uint64_t seed);

struct EvalRecord {
  std::string method;
  double ratio = 0.0;
  std::size_t repeat = 0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};

struct EvalSummary {
  std::string method;
  double ratio = 0.0;
  double micro_mean = 0.0;
  double micro_std = 0.0;
  double macro_mean = 0.0;
  double macro_std = 0.0;
};

struct F1Report {
  std::vector<EvalRecord> records;
  std::vector<EvalSummary> summary;

  const EvalSummary* find(std::string_view method, double ratio) const;
};

using NamedEmbedding = std::pair<std::string, EmbeddingTable>;

// Standardizes with train statistics, fits train_logreg, scores the test
// rows. Every method sees the same split for a (ratio, repeat) cell.
F1Report evaluate_all(std::span<const NamedEmbedding> methods, std::span<const PatientLabel> labels,
                      const EvalConfig& cfg);

// `method,ratio,repeat,micro_f1,macro_f1`
void save_report_csv(const std::filesystem::path& path, const F1Report& report);
// Methods as rows, Micro-F1 and Macro-F1 per training ratio as columns.
std::string format_report_table(const F1Report& report);

}  // namespace hge
