#include "hge/doctor_attention.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "hge/error.hpp"
#include "hge/random.hpp"

namespace hge {

std::vector<DoctorServiceProfile> build_doctor_profiles(std::span<const JourneyEvent> events) {
  std::map<std::string, std::map<std::string, std::uint64_t>> counts;
  for (const auto& e : events) ++counts[e.doctor_id][e.service_id];
  std::vector<DoctorServiceProfile> profiles;
  profiles.reserve(counts.size());
  for (auto& [doctor, services] : counts) {
    profiles.push_back({doctor, {services.begin(), services.end()}});
  }
  return profiles;
}

Activation parse_activation(std::string_view name) {
  if (name == "elu") return Activation::elu;
  if (name == "identity") return Activation::identity;
  throw InvalidArgument("unknown activation: " + std::string(name));
}

std::string_view to_string(Activation a) { return a == Activation::elu ? "elu" : "identity"; }

AttentionParams AttentionParams::random(std::size_t input_dim, std::size_t heads, std::size_t head_dim,
                                        std::vector<std::string> classes, std::uint64_t seed) {
  AttentionParams p;
  p.input_dim = input_dim;
  p.head_dim = head_dim;
  p.classes = std::move(classes);
  Rng rng(mix_seed(seed, 0xa77e));
  const double w_bound = std::sqrt(6.0 / static_cast<double>(input_dim + head_dim));
  const double a_bound = std::sqrt(6.0 / static_cast<double>(2 * head_dim + 1));
  for (std::size_t k = 0; k < heads; ++k) {
    Matrix w(head_dim, input_dim);
    for (double& x : w.data()) x = rng.uniform(-w_bound, w_bound);
    p.weights.push_back(std::move(w));
    std::vector<double> a(2 * head_dim);
    for (double& x : a) x = rng.uniform(-a_bound, a_bound);
    p.attention.push_back(std::move(a));
  }
  const std::size_t out = heads * head_dim;
  const double c_bound = std::sqrt(6.0 / static_cast<double>(out + p.classes.size()));
  p.classifier = Matrix(p.classes.size(), out);
  for (double& x : p.classifier.data()) x = rng.uniform(-c_bound, c_bound);
  p.classifier_bias.assign(p.classes.size(), 0.0);
  return p;
}

namespace {

void write_block(std::ostream& out, const std::string& name, std::size_t rows, std::size_t cols,
                 std::span<const double> values) {
  out << name << ' ' << rows << 'x' << cols;
  for (double v : values) out << ' ' << format_double(v);
  out << '\n';
}

}  // namespace

void save_attention_params(const std::filesystem::path& path, const AttentionParams& p) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "heads " << p.heads() << '\n';
  out << "input_dim " << p.input_dim << '\n';
  out << "head_dim " << p.head_dim << '\n';
  out << "leaky_slope " << format_double(p.leaky_slope) << '\n';
  out << "activation " << to_string(p.activation) << '\n';
  out << "classes";
  for (const auto& c : p.classes) out << ' ' << c;
  out << '\n';
  for (std::size_t k = 0; k < p.heads(); ++k) {
    write_block(out, "W." + std::to_string(k), p.head_dim, p.input_dim, p.weights[k].data());
    write_block(out, "a." + std::to_string(k), 2 * p.head_dim, 1, p.attention[k]);
  }
  write_block(out, "classifier", p.classifier.rows(), p.classifier.cols(), p.classifier.data());
  write_block(out, "classifier_bias", p.classifier_bias.size(), 1, p.classifier_bias);
  if (!out) throw IoError("write failure on " + path.string());
}

AttentionParams load_attention_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string source = path.string();
  AttentionParams p;
  std::size_t heads = 0;
  std::map<std::string, Matrix> blocks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string name;
    if (!(ss >> name)) continue;
    if (name == "heads") {
      ss >> heads;
    } else if (name == "input_dim") {
      ss >> p.input_dim;
    } else if (name == "head_dim") {
      ss >> p.head_dim;
    } else if (name == "leaky_slope") {
      std::string v;
      ss >> v;
      p.leaky_slope = std::stod(v);
    } else if (name == "activation") {
      std::string v;
      ss >> v;
      p.activation = parse_activation(v);
    } else if (name == "classes") {
      std::string c;
      while (ss >> c) p.classes.push_back(c);
    } else {
      std::string shape;
      ss >> shape;
      const auto x = shape.find('x');
      if (x == std::string::npos) throw ParseError(source, line_no, "bad shape " + shape);
      const std::size_t rows = std::stoul(shape.substr(0, x));
      const std::size_t cols = std::stoul(shape.substr(x + 1));
      Matrix m(rows, cols);
      for (double& v : m.data()) {
        std::string tok;
        if (!(ss >> tok)) throw ParseError(source, line_no, "too few values for " + name);
        v = std::stod(tok);
      }
      blocks[name] = std::move(m);
    }
    if (ss.fail() && !ss.eof()) throw ParseError(source, line_no, "malformed line");
  }
  auto take = [&](const std::string& name) {
    const auto it = blocks.find(name);
    if (it == blocks.end()) throw ParseError(source, line_no, "missing block " + name);
    return it->second;
  };
  for (std::size_t k = 0; k < heads; ++k) {
    p.weights.push_back(take("W." + std::to_string(k)));
    const Matrix a = take("a." + std::to_string(k));
    p.attention.emplace_back(a.data().begin(), a.data().end());
  }
  p.classifier = take("classifier");
  const Matrix bias = take("classifier_bias");
  p.classifier_bias.assign(bias.data().begin(), bias.data().end());
  return p;
}

std::vector<double> init_doctor_embedding(const DoctorServiceProfile& profile, const EmbeddingTable& services) {
  if (profile.neighbors.empty()) throw InvalidArgument("doctor " + profile.doctor_id + " has no services");
  std::vector<double> d(services.dim(), 0.0);
  double total = 0.0;
  for (const auto& [service, count] : profile.neighbors) {
    const auto s = services.at(service);
    axpy(static_cast<double>(count), s, d);
    total += static_cast<double>(count);
  }
  for (double& x : d) x /= total;
  return d;
}

double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }

double activate(double x, Activation a) {
  if (a == Activation::identity) return x;
  return x > 0.0 ? x : std::expm1(x);
}

namespace {

double activate_derivative(double x, Activation a) {
  if (a == Activation::identity) return 1.0;
  return x > 0.0 ? 1.0 : std::exp(x);
}

void check_shapes(std::span<const double> doctor, const Matrix& neighbors, const AttentionParams& params) {
  if (neighbors.rows() == 0) throw InvalidArgument("attention: empty neighborhood");
  if (doctor.size() != params.input_dim || neighbors.cols() != params.input_dim) {
    throw InvalidArgument("attention: input dimension mismatch");
  }
}

// Per-head forward intermediates.
struct HeadForward {
  std::vector<double> zd;   // W d
  Matrix zn;                // rows W s_i
  std::vector<double> pre;  // a . [zd || z_i]
  std::vector<double> alpha;
  std::vector<double> mixed;  // sum_i alpha_i z_i
};

HeadForward forward_head(std::span<const double> doctor, const Matrix& neighbors, const AttentionParams& params,
                         std::size_t head) {
  const Matrix& w = params.weights[head];
  const auto& a = params.attention[head];
  const std::size_t hd = params.head_dim;
  const std::span<const double> a_self(a.data(), hd), a_nbr(a.data() + hd, hd);
  HeadForward f;
  f.zd.resize(hd);
  matvec(w, doctor, f.zd);
  f.zn = Matrix(neighbors.rows(), hd);
  f.pre.resize(neighbors.rows());
  std::vector<double> logits(neighbors.rows());
  const double self_score = dot(a_self, f.zd);
  for (std::size_t i = 0; i < neighbors.rows(); ++i) {
    matvec(w, neighbors.row(i), f.zn.row(i));
    f.pre[i] = self_score + dot(a_nbr, f.zn.row(i));
    logits[i] = leaky_relu(f.pre[i], params.leaky_slope);
  }
  f.alpha = softmax(logits);
  f.mixed.assign(hd, 0.0);
  for (std::size_t i = 0; i < neighbors.rows(); ++i) axpy(f.alpha[i], f.zn.row(i), f.mixed);
  return f;
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) total += out[i] = std::exp(logits[i] - m);
  for (double& x : out) x /= total;
  return out;
}

std::vector<double> attention_logits(std::span<const double> doctor, const Matrix& neighbors,
                                     const AttentionParams& params, std::size_t head) {
  check_shapes(doctor, neighbors, params);
  const HeadForward f = forward_head(doctor, neighbors, params, head);
  std::vector<double> logits(f.pre.size());
  for (std::size_t i = 0; i < f.pre.size(); ++i) logits[i] = leaky_relu(f.pre[i], params.leaky_slope);
  return logits;
}

std::vector<double> attention_coefficients(std::span<const double> doctor, const Matrix& neighbors,
                                           const AttentionParams& params, std::size_t head) {
  check_shapes(doctor, neighbors, params);
  return softmax(attention_logits(doctor, neighbors, params, head));
}

std::vector<double> aggregate_multihead(std::span<const double> doctor, const Matrix& neighbors,
                                        const AttentionParams& params) {
  check_shapes(doctor, neighbors, params);
  std::vector<double> out;
  out.reserve(params.output_dim());
  for (std::size_t k = 0; k < params.heads(); ++k) {
    const HeadForward f = forward_head(doctor, neighbors, params, k);
    for (double m : f.mixed) out.push_back(activate(m, params.activation));
  }
  return out;
}

std::size_t predict_specialty(const AttentionParams& params, std::span<const double> doctor,
                              const Matrix& neighbors) {
  const auto h = aggregate_multihead(doctor, neighbors, params);
  std::vector<double> logits(params.classes.size());
  matvec(params.classifier, h, logits);
  for (std::size_t c = 0; c < logits.size(); ++c) logits[c] += params.classifier_bias[c];
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

namespace {

double example_loss(const AttentionParams& params, std::span<const double> doctor, const DoctorExample& ex,
                    AttentionGradients* grads, double scale) {
  const std::size_t heads = params.heads();
  const std::size_t hd = params.head_dim;
  std::vector<HeadForward> fwd;
  fwd.reserve(heads);
  std::vector<double> out(params.output_dim());
  for (std::size_t k = 0; k < heads; ++k) {
    fwd.push_back(forward_head(doctor, ex.neighbors, params, k));
    for (std::size_t c = 0; c < hd; ++c) out[k * hd + c] = activate(fwd[k].mixed[c], params.activation);
  }
  std::vector<double> logits(params.classes.size());
  matvec(params.classifier, out, logits);
  for (std::size_t c = 0; c < logits.size(); ++c) logits[c] += params.classifier_bias[c];
  const auto probs = softmax(logits);
  const double loss = -std::log(std::max(probs[ex.label], std::numeric_limits<double>::min()));
  if (!grads) return loss;

  // Backward pass, every gradient scaled by `scale` (1 / batch size).
  std::vector<double> dlogits(probs);
  dlogits[ex.label] -= 1.0;
  for (double& x : dlogits) x *= scale;
  add_outer(1.0, dlogits, out, grads->classifier);
  axpy(1.0, dlogits, grads->classifier_bias);
  std::vector<double> dout(out.size());
  matvec_transposed(params.classifier, dlogits, dout);

  auto dd = grads->doctor_inputs.row(ex.doctor_row);
  std::vector<double> dmixed(hd), dzd(hd), dz(hd), ddoc(params.input_dim);
  const std::size_t n = ex.neighbors.rows();
  std::vector<double> dalpha(n), dpre(n);
  for (std::size_t k = 0; k < heads; ++k) {
    const HeadForward& f = fwd[k];
    const auto& a = params.attention[k];
    const std::span<const double> a_self(a.data(), hd), a_nbr(a.data() + hd, hd);
    for (std::size_t c = 0; c < hd; ++c) {
      dmixed[c] = dout[k * hd + c] * activate_derivative(f.mixed[c], params.activation);
    }
    double weighted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dalpha[i] = dot(dmixed, f.zn.row(i));
      weighted += f.alpha[i] * dalpha[i];
    }
    std::fill(dzd.begin(), dzd.end(), 0.0);
    auto& ga = grads->attention[k];
    const std::span<double> ga_self(ga.data(), hd), ga_nbr(ga.data() + hd, hd);
    Matrix& gw = grads->weights[k];
    double dself = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double de = f.alpha[i] * (dalpha[i] - weighted);
      dpre[i] = de * (f.pre[i] > 0.0 ? 1.0 : params.leaky_slope);
      dself += dpre[i];
      // dz_i = alpha_i dmixed + dpre_i a_nbr
      for (std::size_t c = 0; c < hd; ++c) dz[c] = f.alpha[i] * dmixed[c] + dpre[i] * a_nbr[c];
      axpy(dpre[i], f.zn.row(i), ga_nbr);
      add_outer(1.0, dz, ex.neighbors.row(i), gw);
    }
    axpy(dself, f.zd, ga_self);
    for (std::size_t c = 0; c < hd; ++c) dzd[c] = dself * a_self[c];
    add_outer(1.0, dzd, doctor, gw);
    matvec_transposed(params.weights[k], dzd, ddoc);
    axpy(1.0, ddoc, dd);
  }
  return loss;
}

AttentionGradients zero_gradients(const AttentionParams& params, const Matrix& doctor_inputs) {
  AttentionGradients g;
  for (std::size_t k = 0; k < params.heads(); ++k) {
    g.weights.emplace_back(params.head_dim, params.input_dim);
    g.attention.emplace_back(2 * params.head_dim, 0.0);
  }
  g.classifier = Matrix(params.classifier.rows(), params.classifier.cols());
  g.classifier_bias.assign(params.classifier_bias.size(), 0.0);
  g.doctor_inputs = Matrix(doctor_inputs.rows(), doctor_inputs.cols());
  return g;
}

}  // namespace

double doctor_loss(const AttentionParams& params, const Matrix& doctor_inputs,
                   std::span<const DoctorExample> examples) {
  double total = 0.0;
  for (const auto& ex : examples) {
    total += example_loss(params, doctor_inputs.row(ex.doctor_row), ex, nullptr, 0.0);
  }
  return examples.empty() ? 0.0 : total / static_cast<double>(examples.size());
}

double doctor_loss_and_gradients(const AttentionParams& params, const Matrix& doctor_inputs,
                                 std::span<const DoctorExample> examples, AttentionGradients& grads) {
  grads = zero_gradients(params, doctor_inputs);
  if (examples.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(examples.size());
  double total = 0.0;
  for (const auto& ex : examples) {
    total += example_loss(params, doctor_inputs.row(ex.doctor_row), ex, &grads, scale);
  }
  return total * scale;
}

void DoctorTrainConfig::validate() const {
  if (heads < 1) throw InvalidArgument("doctor: heads must be >= 1");
  if (output_dim % heads != 0) {
    throw InvalidArgument("doctor: output_dim " + std::to_string(output_dim) + " is not divisible by heads " +
                          std::to_string(heads));
  }
  if (!(learning_rate > 0.0)) throw InvalidArgument("doctor: learning_rate must be > 0");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw InvalidArgument("doctor: holdout_fraction must be in [0, 1)");
  }
}

DoctorTrainResult train_doctor_embeddings(std::span<const DoctorServiceProfile> profiles,
                                          std::span<const DoctorSpecialty> specialties,
                                          const EmbeddingTable& services, const DoctorTrainConfig& cfg) {
  cfg.validate();
  DoctorTrainReport report;
  std::map<std::string, std::string> specialty_of;
  for (const auto& s : specialties) specialty_of[s.doctor_id] = s.specialty;

  // Resolve profiles against the service table.
  std::vector<DoctorServiceProfile> usable;
  for (const auto& profile : profiles) {
    if (!specialty_of.count(profile.doctor_id)) {
      throw InvalidArgument("doctor " + profile.doctor_id + " has no specialty");
    }
    DoctorServiceProfile kept{profile.doctor_id, {}};
    std::size_t missing = 0;
    for (const auto& nb : profile.neighbors) {
      if (services.contains(nb.first)) {
        kept.neighbors.push_back(nb);
      } else {
        ++missing;
      }
    }
    if (kept.neighbors.empty()) {
      report.warnings.push_back("dropping doctor " + profile.doctor_id + ": no service has an embedding");
      continue;
    }
    if (missing) {
      report.warnings.push_back("doctor " + profile.doctor_id + ": ignoring " + std::to_string(missing) +
                                " service(s) without an embedding");
    }
    usable.push_back(std::move(kept));
  }
  if (usable.empty()) throw InvalidArgument("doctor: no trainable doctors");

  std::vector<std::string> classes;
  for (const auto& p : usable) classes.push_back(specialty_of[p.doctor_id]);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  const std::size_t p_dim = services.dim();
  Matrix inputs(usable.size(), p_dim);
  std::vector<DoctorExample> all;
  all.reserve(usable.size());
  for (std::size_t j = 0; j < usable.size(); ++j) {
    const auto d = init_doctor_embedding(usable[j], services);
    std::copy(d.begin(), d.end(), inputs.row(j).begin());
    DoctorExample ex;
    ex.doctor_row = j;
    ex.neighbors = Matrix(usable[j].neighbors.size(), p_dim);
    for (std::size_t i = 0; i < usable[j].neighbors.size(); ++i) {
      const auto s = services.at(usable[j].neighbors[i].first);
      std::copy(s.begin(), s.end(), ex.neighbors.row(i).begin());
    }
    const auto& spec = specialty_of[usable[j].doctor_id];
    ex.label = static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), spec) - classes.begin());
    all.push_back(std::move(ex));
  }

  // Stratified hold-out split.
  std::vector<DoctorExample> train, heldout;
  {
    Rng rng(mix_seed(cfg.seed, 0xd0c));
    std::vector<std::vector<std::size_t>> by_class(classes.size());
    for (std::size_t j = 0; j < all.size(); ++j) by_class[all[j].label].push_back(j);
    std::vector<bool> is_heldout(all.size(), false);
    for (auto& members : by_class) {
      rng.shuffle(members);
      std::size_t k = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(members.size())));
      if (k >= members.size()) k = members.size() - 1;
      for (std::size_t i = 0; i < k; ++i) is_heldout[members[i]] = true;
    }
    for (std::size_t j = 0; j < all.size(); ++j) (is_heldout[j] ? heldout : train).push_back(all[j]);
  }

  AttentionParams params =
      AttentionParams::random(p_dim, cfg.heads, cfg.output_dim / cfg.heads, classes, cfg.seed);
  params.leaky_slope = cfg.leaky_slope;
  params.activation = cfg.activation;

  AttentionGradients grads;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    report.loss_history.push_back(doctor_loss_and_gradients(params, inputs, train, grads));
    const double lr = cfg.learning_rate;
    for (std::size_t k = 0; k < params.heads(); ++k) {
      axpy(-lr, grads.weights[k].data(), params.weights[k].data());
      axpy(-lr, grads.attention[k], params.attention[k]);
    }
    axpy(-lr, grads.classifier.data(), params.classifier.data());
    axpy(-lr, grads.classifier_bias, params.classifier_bias);
    axpy(-lr, grads.doctor_inputs.data(), inputs.data());
  }
  report.loss_history.push_back(doctor_loss(params, inputs, train));

  auto accuracy = [&](const std::vector<DoctorExample>& set) {
    if (set.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::size_t correct = 0;
    for (const auto& ex : set) {
      if (predict_specialty(params, inputs.row(ex.doctor_row), ex.neighbors) == ex.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(set.size());
  };
  report.train_doctors = train.size();
  report.heldout_doctors = heldout.size();
  report.train_accuracy = accuracy(train);
  report.heldout_accuracy = accuracy(heldout);

  std::vector<std::string> ids;
  Matrix out(usable.size(), params.output_dim());
  for (std::size_t j = 0; j < usable.size(); ++j) {
    ids.push_back(usable[j].doctor_id);
    const auto h = aggregate_multihead(inputs.row(j), all[j].neighbors, params);
    std::copy(h.begin(), h.end(), out.row(j).begin());
  }
  return {EmbeddingTable(EntityType::doctor, std::move(ids), std::move(out)), std::move(params), std::move(report)};
}

}  // namespace hge
