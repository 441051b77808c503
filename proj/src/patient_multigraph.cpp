#include "hge/patient_multigraph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <tuple>

#include "hge/doctor_attention.hpp"
#include "hge/error.hpp"
#include "hge/random.hpp"

namespace hge {

std::uint64_t PatientMultigraph::total_weight() const {
  std::uint64_t total = 0;
  for (const auto& e : edges) total += e.weight;
  return total;
}

PatientMultigraph build_multigraph(std::span<const JourneyEvent> events) {
  std::map<std::tuple<std::string, std::string, std::string>, std::uint64_t> counts;
  for (const auto& e : events) ++counts[{e.patient_id, e.service_id, e.doctor_id}];
  PatientMultigraph mg;
  mg.edges.reserve(counts.size());
  for (const auto& [key, w] : counts) {
    mg.edges.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), w});
  }
  return mg;
}

PatientMultigraph restrict_to_embedded(const PatientMultigraph& mg, const EmbeddingTable& services,
                                       const EmbeddingTable& doctors, std::size_t* dropped) {
  PatientMultigraph out;
  std::size_t n = 0;
  for (const auto& e : mg.edges) {
    if (services.contains(e.service_id) && doctors.contains(e.doctor_id)) {
      out.edges.push_back(e);
    } else {
      ++n;
    }
  }
  if (dropped) *dropped = n;
  return out;
}

HybridBipartiteGraph duplicate_and_annotate(const PatientMultigraph& mg) {
  std::vector<std::string> patients;
  std::vector<HybridNode> hybrids;
  for (const auto& e : mg.edges) {
    patients.push_back(e.patient_id);
    hybrids.push_back({e.service_id, e.doctor_id});
  }
  std::sort(patients.begin(), patients.end());
  patients.erase(std::unique(patients.begin(), patients.end()), patients.end());
  std::sort(hybrids.begin(), hybrids.end());
  hybrids.erase(std::unique(hybrids.begin(), hybrids.end()), hybrids.end());

  std::vector<BipartiteEdge> edges;
  edges.reserve(mg.edges.size());
  for (const auto& e : mg.edges) {
    const auto p = std::lower_bound(patients.begin(), patients.end(), e.patient_id) - patients.begin();
    const auto h = std::lower_bound(hybrids.begin(), hybrids.end(), HybridNode{e.service_id, e.doctor_id}) -
                   hybrids.begin();
    edges.push_back({static_cast<std::size_t>(p), static_cast<std::size_t>(h), e.weight});
  }
  std::vector<std::string> labels;
  labels.reserve(hybrids.size());
  for (const auto& h : hybrids) labels.push_back(h.label());
  HybridBipartiteGraph g;
  g.graph = BipartiteGraph(std::move(patients), std::move(labels), edges);
  g.hybrids = std::move(hybrids);
  return g;
}

void save_hybrid_graph(const std::filesystem::path& path, const HybridBipartiteGraph& g) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : g.graph.edges()) {
    out << g.graph.left_ids()[e.left] << '\t' << g.hybrids[e.right].label() << '\t' << e.weight << '\n';
  }
  if (!out) throw IoError("write failure on " + path.string());
}

AnnotationParams AnnotationParams::random(std::size_t out_dim, std::size_t in_dim, std::uint64_t seed) {
  AnnotationParams p{Matrix(out_dim, in_dim), std::vector<double>(out_dim, 0.0)};
  Rng rng(mix_seed(seed, 0xa22));
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (double& x : p.weight.data()) x = rng.uniform(-bound, bound);
  return p;
}

void save_annotation_params(const std::filesystem::path& path, const AnnotationParams& params) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "W_a " << params.weight.rows() << 'x' << params.weight.cols();
  for (double v : params.weight.data()) out << ' ' << format_double(v);
  out << "\nb_a " << params.bias.size() << "x1";
  for (double v : params.bias) out << ' ' << format_double(v);
  out << '\n';
  if (!out) throw IoError("write failure on " + path.string());
}

std::vector<double> hybrid_input(const HybridNode& node, const EmbeddingTable& services,
                                 const EmbeddingTable& doctors) {
  const auto s = services.at(node.service_id);
  const auto d = doctors.at(node.doctor_id);
  std::vector<double> x(s.begin(), s.end());
  x.insert(x.end(), d.begin(), d.end());
  return x;
}

Matrix hybrid_inputs(const HybridBipartiteGraph& g, const EmbeddingTable& services, const EmbeddingTable& doctors) {
  Matrix inputs(g.hybrids.size(), services.dim() + doctors.dim());
  for (std::size_t h = 0; h < g.hybrids.size(); ++h) {
    const auto x = hybrid_input(g.hybrids[h], services, doctors);
    std::copy(x.begin(), x.end(), inputs.row(h).begin());
  }
  return inputs;
}

std::vector<double> hybrid_embedding(const HybridNode& node, const EmbeddingTable& services,
                                     const EmbeddingTable& doctors, const AnnotationParams& params) {
  const auto x = hybrid_input(node, services, doctors);
  if (x.size() != params.in_dim()) {
    throw InvalidArgument("annotation: input dimension " + std::to_string(x.size()) + " != " +
                          std::to_string(params.in_dim()));
  }
  std::vector<double> h(params.out_dim());
  matvec(params.weight, x, h);
  axpy(1.0, params.bias, h);
  return h;
}

Matrix annotate(const Matrix& inputs, const AnnotationParams& params) {
  if (inputs.cols() != params.in_dim()) throw InvalidArgument("annotation: input dimension mismatch");
  Matrix out(inputs.rows(), params.out_dim());
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    matvec(params.weight, inputs.row(r), out.row(r));
    axpy(1.0, params.bias, out.row(r));
  }
  return out;
}

double context_probability(std::span<const double> patient, const Matrix& contexts, std::size_t target) {
  if (contexts.rows() == 0) throw InvalidArgument("context probability: empty context set");
  if (target >= contexts.rows()) throw InvalidArgument("context probability: target out of range");
  std::vector<double> scores(contexts.rows());
  for (std::size_t l = 0; l < contexts.rows(); ++l) scores[l] = dot(contexts.row(l), patient);
  return softmax(scores)[target];
}

std::vector<std::pair<std::size_t, double>> empirical_distribution(const HybridBipartiteGraph& g,
                                                                   std::size_t patient) {
  if (patient >= g.graph.left_size()) throw InvalidArgument("empirical distribution: patient out of range");
  const auto edges = g.graph.left_edges(patient);
  if (edges.empty()) throw InvalidArgument("patient " + g.graph.left_ids()[patient] + " has no edges");
  const double total = static_cast<double>(g.graph.left_total(patient));
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(edges.size());
  for (const auto& e : edges) out.emplace_back(e.right, static_cast<double>(e.weight) / total);
  return out;
}

namespace {

// -sum_h (w/W) log softmax(C p)[h] over one patient's edges.
double patient_cross_entropy(std::span<const BipartiteEdge> edges, double total, std::span<const double> p,
                             const Matrix& contexts) {
  std::vector<double> scores(contexts.rows());
  for (std::size_t l = 0; l < contexts.rows(); ++l) scores[l] = dot(contexts.row(l), p);
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - m);
  const double log_z = m + std::log(z);
  double loss = 0.0;
  for (const auto& e : edges) loss -= static_cast<double>(e.weight) / total * (scores[e.right] - log_z);
  return loss;
}

}  // namespace

double second_order_loss(const BipartiteGraph& g, const Matrix& patients, const Matrix& contexts) {
  if (contexts.rows() != g.right_size()) throw InvalidArgument("second-order loss: context count mismatch");
  if (patients.rows() != g.left_size()) throw InvalidArgument("second-order loss: patient count mismatch");
  if (patients.cols() != contexts.cols()) throw InvalidArgument("second-order loss: dimension mismatch");
  double loss = 0.0;
  for (std::size_t p = 0; p < g.left_size(); ++p) {
    const auto edges = g.left_edges(p);
    if (edges.empty()) continue;
    loss += patient_cross_entropy(edges, static_cast<double>(g.left_total(p)), patients.row(p), contexts);
  }
  return loss;
}

double kl_loss(const HybridBipartiteGraph& g, const EmbeddingTable& patients, const EmbeddingTable& services,
               const EmbeddingTable& doctors, const AnnotationParams& params) {
  const Matrix contexts = annotate(hybrid_inputs(g, services, doctors), params);
  if (patients.dim() != contexts.cols()) {
    throw InvalidArgument("kl loss: patient dimension " + std::to_string(patients.dim()) +
                          " != hybrid dimension " + std::to_string(contexts.cols()));
  }
  Matrix rows(g.graph.left_size(), patients.dim());
  for (std::size_t p = 0; p < g.graph.left_size(); ++p) {
    const auto v = patients.at(g.graph.left_ids()[p]);
    std::copy(v.begin(), v.end(), rows.row(p).begin());
  }
  return second_order_loss(g.graph, rows, contexts);
}

double negative_sampling_term(std::span<const double> patient, std::span<const std::span<const double>> contexts,
                              std::span<double> coeff) {
  double loss = 0.0;
  for (std::size_t j = 0; j < contexts.size(); ++j) {
    const double x = dot(contexts[j], patient);
    if (j == 0) {
      loss -= log_sigmoid(x);
      coeff[j] = sigmoid(x) - 1.0;
    } else {
      loss -= log_sigmoid(-x);
      coeff[j] = sigmoid(x);
    }
  }
  return loss;
}

double annotated_sample_loss(const Matrix& patients, const Matrix& inputs, const AnnotationParams& params,
                             std::span<const PatientSample> samples, AnnotationGradients* grads) {
  const Matrix contexts = annotate(inputs, params);
  if (grads) {
    grads->patients = Matrix(patients.rows(), patients.cols());
    grads->weight = Matrix(params.weight.rows(), params.weight.cols());
    grads->bias.assign(params.bias.size(), 0.0);
  }
  double loss = 0.0;
  std::vector<std::span<const double>> ctx;
  std::vector<std::size_t> ids;
  std::vector<double> coeff;
  for (const auto& s : samples) {
    ctx.clear();
    ids.clear();
    ids.push_back(s.positive);
    ids.insert(ids.end(), s.negatives.begin(), s.negatives.end());
    for (std::size_t id : ids) ctx.push_back(contexts.row(id));
    coeff.assign(ids.size(), 0.0);
    const auto p = patients.row(s.patient);
    loss += negative_sampling_term(p, ctx, coeff);
    if (!grads) continue;
    for (std::size_t j = 0; j < ids.size(); ++j) {
      axpy(coeff[j], ctx[j], grads->patients.row(s.patient));
      // dL/dh = coeff p ; h = W x + b
      add_outer(coeff[j], p, inputs.row(ids[j]), grads->weight);
      axpy(coeff[j], p, grads->bias);
    }
  }
  return loss;
}

void PatientTrainConfig::validate() const {
  if (dim < 1) throw InvalidArgument("patient: dim must be >= 1");
  if (negatives < 1) throw InvalidArgument("patient: negatives must be >= 1");
  if (epochs < 1) throw InvalidArgument("patient: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("patient: learning_rate must be > 0");
  if (!(min_learning_rate >= 0.0) || min_learning_rate > learning_rate) {
    throw InvalidArgument("patient: min_learning_rate must be in [0, learning_rate]");
  }
}

namespace {

// Contexts h_j = W x_j + b. Scores use q = W^T p, so one sample costs two
// matrix-vector products and one rank-1 update regardless of the number of
// negatives.
class AnnotatedContexts {
 public:
  AnnotatedContexts(const Matrix& inputs, AnnotationParams& params)
      : inputs_(inputs), params_(params), q_(params.in_dim()), mix_(params.in_dim()) {}

  std::size_t dim() const { return params_.out_dim(); }

  void step(std::span<double> p, std::span<const std::size_t> ids, double lr, std::span<double> coeff) {
    matvec_transposed(params_.weight, p, q_);
    const double bp = dot(params_.bias, p);
    double coeff_sum = 0.0;
    std::fill(mix_.begin(), mix_.end(), 0.0);
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const double x = dot(inputs_.row(ids[j]), q_) + bp;
      coeff[j] = j == 0 ? sigmoid(x) - 1.0 : sigmoid(x);
      coeff_sum += coeff[j];
      axpy(coeff[j], inputs_.row(ids[j]), mix_);
    }
    // grad_p = sum_j coeff_j h_j = W mix + coeff_sum b
    std::vector<double>& grad_p = grad_p_;
    grad_p.resize(p.size());
    matvec(params_.weight, mix_, grad_p);
    axpy(coeff_sum, params_.bias, grad_p);
    // grad_W = p mix^T, grad_b = coeff_sum p
    add_outer(-lr, p, mix_, params_.weight);
    axpy(-lr * coeff_sum, p, params_.bias);
    axpy(-lr, grad_p, p);
  }

 private:
  const Matrix& inputs_;
  AnnotationParams& params_;
  std::vector<double> q_, mix_, grad_p_;
};

class FreeContexts {
 public:
  explicit FreeContexts(Matrix& contexts) : contexts_(contexts), grad_p_(contexts.cols()) {}

  std::size_t dim() const { return contexts_.cols(); }

  void step(std::span<double> p, std::span<const std::size_t> ids, double lr, std::span<double> coeff) {
    std::fill(grad_p_.begin(), grad_p_.end(), 0.0);
    for (std::size_t j = 0; j < ids.size(); ++j) {
      auto c = contexts_.row(ids[j]);
      const double x = dot(c, p);
      coeff[j] = j == 0 ? sigmoid(x) - 1.0 : sigmoid(x);
      axpy(coeff[j], c, grad_p_);
      axpy(-lr * coeff[j], p, c);
    }
    axpy(-lr, grad_p_, p);
  }

 private:
  Matrix& contexts_;
  std::vector<double> grad_p_;
};

struct Occurrence {
  std::uint32_t patient;
  std::uint32_t context;
};

template <class Contexts, class TraceFn>
void run_second_order(const BipartiteGraph& g, Matrix& patients, Contexts& model_prototype,
                      const PatientTrainConfig& cfg, TraceFn&& trace) {
  std::vector<Occurrence> occurrences;
  occurrences.reserve(g.total_weight());
  for (const auto& e : g.edges()) {
    for (std::uint64_t k = 0; k < e.weight; ++k) {
      occurrences.push_back({static_cast<std::uint32_t>(e.left), static_cast<std::uint32_t>(e.right)});
    }
  }
  std::vector<double> degrees(g.right_size());
  for (std::size_t r = 0; r < g.right_size(); ++r) degrees[r] = std::pow(static_cast<double>(g.right_degree(r)), 0.75);
  const AliasTable noise(degrees);
  const bool can_sample = g.right_size() > 1;
  const std::size_t total_steps = cfg.epochs * occurrences.size();
  std::atomic<std::size_t> processed{0};

  trace();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng order_rng(mix_seed(cfg.seed, 0x0bde7, epoch));
    order_rng.shuffle(occurrences);
    const std::size_t workers = std::max<unsigned>(cfg.threads, 1);
    auto shard = [&](std::size_t w, Contexts& model) {
      Rng rng(mix_seed(cfg.seed, 0x4e9 + w, epoch));
      std::vector<std::size_t> ids(cfg.negatives + 1);
      std::vector<double> coeff(cfg.negatives + 1);
      for (std::size_t i = w; i < occurrences.size(); i += workers) {
        const auto& occ = occurrences[i];
        std::size_t n = 0;
        ids[n++] = occ.context;
        if (can_sample) {
          while (n < ids.size()) {
            const std::size_t neg = noise.sample(rng);
            if (neg != occ.context) ids[n++] = neg;
          }
        }
        const std::size_t done = processed.fetch_add(1, std::memory_order_relaxed);
        const double progress = static_cast<double>(done) / static_cast<double>(std::max<std::size_t>(total_steps, 1));
        const double lr = cfg.learning_rate - (cfg.learning_rate - cfg.min_learning_rate) * progress;
        model.step(patients.row(occ.patient), std::span<const std::size_t>(ids.data(), n), lr,
                   std::span<double>(coeff.data(), n));
      }
    };
    if (workers == 1) {
      shard(0, model_prototype);
    } else {
      std::vector<Contexts> models(workers, model_prototype);
      std::vector<std::future<void>> tasks;
      for (std::size_t w = 0; w < workers; ++w) {
        tasks.push_back(std::async(std::launch::async, [&, w] { shard(w, models[w]); }));
      }
      for (auto& t : tasks) t.get();
    }
    trace();
  }
}

Matrix init_patients(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  Matrix m(rows, dim);
  Rng rng(mix_seed(seed, 0x9a7));
  const double bound = 0.5 / static_cast<double>(dim);
  for (double& x : m.data()) x = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

void annotated_sgd_step(std::span<double> patient, const Matrix& inputs, AnnotationParams& params,
                        std::span<const std::size_t> contexts, double lr) {
  AnnotatedContexts model(inputs, params);
  std::vector<double> coeff(contexts.size());
  model.step(patient, contexts, lr, coeff);
}

PatientTrainResult train_patient_embeddings(const HybridBipartiteGraph& g, const EmbeddingTable& services,
                                            const EmbeddingTable& doctors, const PatientTrainConfig& cfg,
                                            PatientTrainTrace* trace) {
  cfg.validate();
  if (g.hybrids.empty() || g.graph.total_weight() == 0) throw InvalidArgument("patient: empty hybrid graph");
  const Matrix inputs = hybrid_inputs(g, services, doctors);
  AnnotationParams params = AnnotationParams::random(cfg.dim, inputs.cols(), cfg.seed);
  Matrix patients = init_patients(g.graph.left_size(), cfg.dim, cfg.seed);
  AnnotatedContexts model(inputs, params);
  run_second_order(g.graph, patients, model, cfg, [&] {
    if (trace && cfg.trace_kl) trace->kl.push_back(second_order_loss(g.graph, patients, annotate(inputs, params)));
  });
  return {EmbeddingTable(EntityType::patient, g.graph.left_ids(), std::move(patients)), std::move(params)};
}

EmbeddingTable train_second_order(const BipartiteGraph& g, const PatientTrainConfig& cfg, PatientTrainTrace* trace) {
  cfg.validate();
  if (g.right_size() == 0 || g.total_weight() == 0) throw InvalidArgument("second-order: empty graph");
  Matrix patients = init_patients(g.left_size(), cfg.dim, cfg.seed);
  Matrix contexts(g.right_size(), cfg.dim, 0.0);
  FreeContexts model(contexts);
  run_second_order(g, patients, model, cfg, [&] {
    if (trace && cfg.trace_kl) trace->kl.push_back(second_order_loss(g, patients, contexts));
  });
  return EmbeddingTable(EntityType::patient, g.left_ids(), std::move(patients));
}

}  // namespace hge
