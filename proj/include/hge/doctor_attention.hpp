#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hge/embedding.hpp"
#include "hge/events.hpp"
#include "hge/linalg.hpp"

namespace hge {

// Services conducted by one doctor with per-service conduct counts, sorted
// by service id.
struct DoctorServiceProfile {
  std::string doctor_id;
  std::vector<std::pair<std::string, std::uint64_t>> neighbors;
};

std::vector<DoctorServiceProfile> build_doctor_profiles(std::span<const JourneyEvent> events);

enum class Activation { elu, identity };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

// K attention heads over p-dimensional inputs, each projecting to p'
// dimensions, plus a linear specialty classifier over the K*p' output.
struct AttentionParams {
  std::size_t input_dim = 0;
  std::size_t head_dim = 0;
  double leaky_slope = 0.2;
  Activation activation = Activation::elu;
  std::vector<Matrix> weights;               // per head: head_dim x input_dim
  std::vector<std::vector<double>> attention;  // per head: 2 * head_dim
  Matrix classifier;                         // classes x (heads * head_dim)
  std::vector<double> classifier_bias;
  std::vector<std::string> classes;

  std::size_t heads() const { return weights.size(); }
  std::size_t output_dim() const { return heads() * head_dim; }

  // Xavier-uniform weights, zero classifier bias.
  static AttentionParams random(std::size_t input_dim, std::size_t heads, std::size_t head_dim,
                                std::vector<std::string> classes, std::uint64_t seed);
};

// `name RxC v1 v2 ...` per parameter block, one per line.
void save_attention_params(const std::filesystem::path& path, const AttentionParams& params);
AttentionParams load_attention_params(const std::filesystem::path& path);

// Count-weighted mean of the doctor's service vectors.
std::vector<double> init_doctor_embedding(const DoctorServiceProfile& profile, const EmbeddingTable& services);

double leaky_relu(double x, double slope);
double activate(double x, Activation a);

// Pre-softmax scores LeakyReLU(a . [W d || W s_i]) for one head.
std::vector<double> attention_logits(std::span<const double> doctor, const Matrix& neighbors,
                                     const AttentionParams& params, std::size_t head);

// Max-shifted softmax; output sums to 1.
std::vector<double> softmax(std::span<const double> logits);

// Normalized attention coefficients over the neighbor rows for one head.
std::vector<double> attention_coefficients(std::span<const double> doctor, const Matrix& neighbors,
                                           const AttentionParams& params, std::size_t head);

// Concatenation over heads of act(sum_i alpha_i W s_i).
std::vector<double> aggregate_multihead(std::span<const double> doctor, const Matrix& neighbors,
                                        const AttentionParams& params);

// One supervised doctor: row into the doctor-input matrix, frozen neighbor
// service vectors, class index into params.classes.
struct DoctorExample {
  std::size_t doctor_row = 0;
  Matrix neighbors;
  std::size_t label = 0;
};

struct AttentionGradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> attention;
  Matrix classifier;
  std::vector<double> classifier_bias;
  Matrix doctor_inputs;
};

// Mean softmax cross-entropy of the specialty classifier over `examples`.
double doctor_loss(const AttentionParams& params, const Matrix& doctor_inputs,
                   std::span<const DoctorExample> examples);

// Loss plus analytic gradients w.r.t. every trainable parameter.
double doctor_loss_and_gradients(const AttentionParams& params, const Matrix& doctor_inputs,
                                 std::span<const DoctorExample> examples, AttentionGradients& grads);

std::size_t predict_specialty(const AttentionParams& params, std::span<const double> doctor,
                              const Matrix& neighbors);

struct DoctorTrainConfig {
  std::size_t heads = 4;
  std::size_t output_dim = 128;  // must equal heads * head_dim
  double learning_rate = 0.01;
  std::size_t epochs = 200;
  double leaky_slope = 0.2;
  Activation activation = Activation::elu;
  double holdout_fraction = 0.2;  // per specialty, for the reported accuracy
  std::uint64_t seed = 1;

  void validate() const;
};

struct DoctorTrainReport {
  std::size_t train_doctors = 0;
  std::size_t heldout_doctors = 0;
  double train_accuracy = 0.0;
  double heldout_accuracy = 0.0;  // NaN without a held-out split
  std::vector<double> loss_history;  // full-batch loss before each step, then final
  std::vector<std::string> warnings;
};

struct DoctorTrainResult {
  EmbeddingTable doctors;
  AttentionParams params;
  DoctorTrainReport report;
};

// Full-batch gradient descent on specialty cross-entropy. Trainable: doctor
// inputs (initialized by init_doctor_embedding), W, a and the classifier;
// service vectors stay fixed. Returned embeddings are the multi-head outputs.
DoctorTrainResult train_doctor_embeddings(std::span<const DoctorServiceProfile> profiles,
                                          std::span<const DoctorSpecialty> specialties,
                                          const EmbeddingTable& services, const DoctorTrainConfig& cfg);

}  // namespace hge
