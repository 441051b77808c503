#pragma once

#include <compare>
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

namespace hge {

// One patient-service edge tagged with the treating doctor; `weight` counts
// events with exactly this (patient, doctor, service) triple.
struct MultigraphEdge {
  std::string patient_id;
  std::string service_id;
  std::string doctor_id;
  std::uint64_t weight = 0;

  bool operator==(const MultigraphEdge&) const = default;
};

struct PatientMultigraph {
  std::vector<MultigraphEdge> edges;  // sorted by (patient, service, doctor)

  std::uint64_t total_weight() const;
};

PatientMultigraph build_multigraph(std::span<const JourneyEvent> events);

// Keeps edges whose service and doctor both have embeddings; returns the
// number of dropped edges through `dropped`.
PatientMultigraph restrict_to_embedded(const PatientMultigraph& mg, const EmbeddingTable& services,
                                       const EmbeddingTable& doctors, std::size_t* dropped = nullptr);

struct HybridNode {
  std::string service_id;
  std::string doctor_id;

  auto operator<=>(const HybridNode&) const = default;
  std::string label() const { return service_id + "|" + doctor_id; }
};

// Simple patient x hybrid-node graph. Right vertex h of `graph` is
// hybrids[h]; right ids are `service|doctor` labels.
struct HybridBipartiteGraph {
  std::vector<HybridNode> hybrids;  // sorted, unique
  BipartiteGraph graph;
};

// Splits every service node into one hybrid node per distinct doctor
// attribute on its edges and drops the attribute from the edges.
HybridBipartiteGraph duplicate_and_annotate(const PatientMultigraph& mg);

// `patient<TAB>service|doctor<TAB>weight` per edge.
void save_hybrid_graph(const std::filesystem::path& path, const HybridBipartiteGraph& g);

// Affine annotation map h = W [s || d] + b.
struct AnnotationParams {
  Matrix weight;  // out_dim x (service_dim + doctor_dim)
  std::vector<double> bias;

  std::size_t out_dim() const { return weight.rows(); }
  std::size_t in_dim() const { return weight.cols(); }

  // Uniform entries in +-1/sqrt(fan_in), zero bias.
  static AnnotationParams random(std::size_t out_dim, std::size_t in_dim, std::uint64_t seed);
};

void save_annotation_params(const std::filesystem::path& path, const AnnotationParams& params);

// [s || d] for one hybrid node.
std::vector<double> hybrid_input(const HybridNode& node, const EmbeddingTable& services,
                                 const EmbeddingTable& doctors);
// Rows of [s || d] for every hybrid node of the graph.
Matrix hybrid_inputs(const HybridBipartiteGraph& g, const EmbeddingTable& services, const EmbeddingTable& doctors);

std::vector<double> hybrid_embedding(const HybridNode& node, const EmbeddingTable& services,
                                     const EmbeddingTable& doctors, const AnnotationParams& params);
// Annotated vectors for all rows of `inputs`.
Matrix annotate(const Matrix& inputs, const AnnotationParams& params);

// Full softmax probability of context `target` given a patient vector.
double context_probability(std::span<const double> patient, const Matrix& contexts, std::size_t target);

// Edge-weight distribution over the patient's hybrid neighbors, as
// (hybrid index, probability) pairs ordered by hybrid index.
std::vector<std::pair<std::size_t, double>> empirical_distribution(const HybridBipartiteGraph& g,
                                                                   std::size_t patient);

// Sum over edges of -(w / W_patient) log p(h | patient) with full softmax.
// Patient vectors are looked up by id.
double kl_loss(const HybridBipartiteGraph& g, const EmbeddingTable& patients, const EmbeddingTable& services,
               const EmbeddingTable& doctors, const AnnotationParams& params);

// Same objective over an arbitrary context matrix (one row per right vertex).
double second_order_loss(const BipartiteGraph& g, const Matrix& patients, const Matrix& contexts);

// -log s(c_0 . p) - sum_{j>0} log s(-c_j . p). Writes d(loss)/d(c_j . p)
// into `coeff`.
double negative_sampling_term(std::span<const double> patient, std::span<const std::span<const double>> contexts,
                              std::span<double> coeff);

struct PatientSample {
  std::size_t patient = 0;
  std::size_t positive = 0;
  std::vector<std::size_t> negatives;
};

struct AnnotationGradients {
  Matrix patients;
  Matrix weight;
  std::vector<double> bias;
};

// Summed negative-sampling loss of `samples` through the annotation map;
// fills analytic gradients when `grads` is non-null.
double annotated_sample_loss(const Matrix& patients, const Matrix& inputs, const AnnotationParams& params,
                             std::span<const PatientSample> samples, AnnotationGradients* grads);

// One trainer update on a single sample: contexts[0] is the positive hybrid,
// the rest are negatives. Plain SGD on annotated_sample_loss.
void annotated_sgd_step(std::span<double> patient, const Matrix& inputs, AnnotationParams& params,
                        std::span<const std::size_t> contexts, double lr);

struct PatientTrainConfig {
  std::size_t dim = 128;
  std::size_t negatives = 10;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  double min_learning_rate = 1e-4;
  std::uint64_t seed = 1;
  unsigned threads = 1;   // 1 = deterministic
  bool trace_kl = false;  // exact loss after every epoch (toy scale only)

  void validate() const;
};

struct PatientTrainTrace {
  std::vector<double> kl;  // before training, then after each epoch
};

struct PatientTrainResult {
  EmbeddingTable patients;
  AnnotationParams params;
};

// Second-order embedding of patients against annotated hybrid contexts.
// Each epoch visits every unit of edge weight once in a seeded random order
// and draws negatives from hybrid weighted-degree^(3/4). Trainable: patient
// vectors, W_a, b_a.
PatientTrainResult train_patient_embeddings(const HybridBipartiteGraph& g, const EmbeddingTable& services,
                                            const EmbeddingTable& doctors, const PatientTrainConfig& cfg,
                                            PatientTrainTrace* trace = nullptr);

// Same trainer with free context vectors (initialized to zero) instead of
// the annotation map: second-order LINE on a plain bipartite graph. Returns
// left-vertex embeddings.
EmbeddingTable train_second_order(const BipartiteGraph& g, const PatientTrainConfig& cfg,
                                  PatientTrainTrace* trace = nullptr);

}  // namespace hge
