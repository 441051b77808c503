#include "hge/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <sstream>

#include "hge/error.hpp"
#include "hge/random.hpp"

namespace hge {

double LogRegModel::probability(std::span<const double> x) const { return sigmoid(dot(weights, x) + bias); }

namespace {

double sign_of(int label) { return label == 1 ? 1.0 : -1.0; }

void check_inputs(const Matrix& x, std::span<const int> y) {
  if (x.rows() != y.size()) throw InvalidArgument("logreg: row/label count mismatch");
  if (x.rows() == 0) throw InvalidArgument("logreg: no rows");
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v != 0 && v != 1) throw InvalidArgument("logreg: labels must be 0 or 1");
    (v == 1 ? has1 : has0) = true;
  }
  if (!has0 || !has1) throw InvalidArgument("logreg: both classes must be present");
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw InvalidArgument("logreg: non-finite feature");
  }
}

}  // namespace

double logreg_objective(const Matrix& x, std::span<const int> y, std::span<const double> w, double b,
                        double l2_lambda) {
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) loss -= log_sigmoid(sign_of(y[i]) * (dot(w, x.row(i)) + b));
  return loss / static_cast<double>(x.rows()) + l2_lambda * dot(w, w);
}

void logreg_gradient(const Matrix& x, std::span<const int> y, std::span<const double> w, double b, double l2_lambda,
                     std::span<double> grad) {
  const std::size_t d = x.cols();
  std::fill(grad.begin(), grad.end(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double s = sign_of(y[i]);
    // d/dz -log s(s z) = -s * (1 - s(s z))
    const double g = -s * sigmoid(-s * (dot(w, x.row(i)) + b)) * inv_n;
    axpy(g, x.row(i), grad.first(d));
    grad[d] += g;
  }
  axpy(2.0 * l2_lambda, w, grad.first(d));
}

LogRegModel train_logreg(const Matrix& x, std::span<const int> y, const LogRegConfig& cfg) {
  check_inputs(x, y);
  if (!(cfg.l2_lambda >= 0.0)) throw InvalidArgument("logreg: l2_lambda must be >= 0");
  const std::size_t n = x.rows(), d = x.cols();
  LogRegModel model;
  model.weights.assign(d, 0.0);
  // Start from the intercept-only solution.
  std::size_t positives = 0;
  for (int v : y) positives += static_cast<std::size_t>(v);
  const double rate = static_cast<double>(positives) / static_cast<double>(n);
  model.bias = std::log(rate / (1.0 - rate));

  std::vector<double> grad(d + 1), trial_w(d);
  double loss = logreg_objective(x, y, model.weights, model.bias, cfg.l2_lambda);
  model.loss_history.push_back(loss);
  for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
    logreg_gradient(x, y, model.weights, model.bias, cfg.l2_lambda, grad);
    model.gradient_norm = norm(grad);
    if (model.gradient_norm < cfg.tolerance) break;

    Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d + 1), static_cast<Eigen::Index>(d + 1));
    Eigen::VectorXd row(static_cast<Eigen::Index>(d + 1));
    for (std::size_t i = 0; i < n; ++i) {
      const auto xi = x.row(i);
      for (std::size_t c = 0; c < d; ++c) row[static_cast<Eigen::Index>(c)] = xi[c];
      row[static_cast<Eigen::Index>(d)] = 1.0;
      const double p = sigmoid(dot(model.weights, xi) + model.bias);
      hessian.selfadjointView<Eigen::Lower>().rankUpdate(row, p * (1.0 - p) / static_cast<double>(n));
    }
    hessian = hessian.selfadjointView<Eigen::Lower>();
    for (std::size_t c = 0; c < d; ++c) hessian(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) += 2.0 * cfg.l2_lambda;
    hessian.diagonal().array() += 1e-10;
    const Eigen::Map<const Eigen::VectorXd> g(grad.data(), static_cast<Eigen::Index>(d + 1));
    Eigen::VectorXd step = hessian.ldlt().solve(-g);
    double slope = g.dot(step);
    if (!(slope < 0.0) || !step.allFinite()) {
      step = -g;  // fall back to steepest descent
      slope = -g.squaredNorm();
    }
    // Armijo backtracking.
    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      for (std::size_t c = 0; c < d; ++c) trial_w[c] = model.weights[c] + t * step[static_cast<Eigen::Index>(c)];
      const double trial_b = model.bias + t * step[static_cast<Eigen::Index>(d)];
      const double trial = logreg_objective(x, y, trial_w, trial_b, cfg.l2_lambda);
      if (trial <= loss + 1e-4 * t * slope) {
        model.weights = trial_w;
        model.bias = trial_b;
        loss = trial;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    model.iterations = iter + 1;
    if (!accepted) break;
    model.loss_history.push_back(loss);
  }
  logreg_gradient(x, y, model.weights, model.bias, cfg.l2_lambda, grad);
  model.gradient_norm = norm(grad);
  return model;
}

F1Scores f1_scores(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.empty()) throw InvalidArgument("f1: empty input");
  if (y_true.size() != y_pred.size()) throw InvalidArgument("f1: length mismatch");
  std::size_t counts[2][2] = {{0, 0}, {0, 0}};  // [true][pred]
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if ((y_true[i] != 0 && y_true[i] != 1) || (y_pred[i] != 0 && y_pred[i] != 1)) {
      throw InvalidArgument("f1: labels must be 0 or 1");
    }
    ++counts[y_true[i]][y_pred[i]];
  }
  double macro = 0.0;
  std::size_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
  for (int c = 0; c < 2; ++c) {
    const std::size_t tp = counts[c][c];
    const std::size_t fp = counts[1 - c][c];
    const std::size_t fn = counts[c][1 - c];
    const std::size_t denom = 2 * tp + fp + fn;
    macro += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    tp_sum += tp;
    fp_sum += fp;
    fn_sum += fn;
  }
  F1Scores s;
  s.micro = 2.0 * static_cast<double>(tp_sum) / static_cast<double>(2 * tp_sum + fp_sum + fn_sum);
  s.macro = macro / 2.0;
  return s;
}

BipartiteGraph build_bipartite(std::span<const JourneyEvent> events, BipartiteMode mode) {
  std::map<std::pair<std::string, std::string>, std::uint64_t> counts;
  std::vector<std::string> left, right;
  for (const auto& e : events) {
    const std::string& other = mode == BipartiteMode::patient_service ? e.service_id : e.doctor_id;
    ++counts[{e.patient_id, other}];
    left.push_back(e.patient_id);
    right.push_back(other);
  }
  auto uniq = [](std::vector<std::string>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(left);
  uniq(right);
  std::vector<BipartiteEdge> edges;
  edges.reserve(counts.size());
  for (const auto& [key, w] : counts) {
    const auto l = std::lower_bound(left.begin(), left.end(), key.first) - left.begin();
    const auto r = std::lower_bound(right.begin(), right.end(), key.second) - right.begin();
    edges.push_back({static_cast<std::size_t>(l), static_cast<std::size_t>(r), w});
  }
  return BipartiteGraph(std::move(left), std::move(right), edges);
}

EmbeddingTable run_baseline(const BipartiteGraph& g, BaselineMethod method, const BaselineConfig& cfg) {
  if (g.edges().empty()) throw InvalidArgument("baseline: empty bipartite graph");
  if (method == BaselineMethod::line2) return train_second_order(g, cfg.line);

  static constexpr std::string_view kLeft = "L:", kRight = "R:";
  const WeightedGraph homogeneous = g.to_weighted_graph(kLeft, kRight);
  const EmbeddingTable all = train_sgns(generate_walks(homogeneous, cfg.walk), cfg.sgns, EntityType::patient);
  Matrix rows(g.left_size(), all.dim());
  for (std::size_t i = 0; i < g.left_size(); ++i) {
    const auto v = all.at(std::string(kLeft) + g.left_ids()[i]);
    std::copy(v.begin(), v.end(), rows.row(i).begin());
  }
  return EmbeddingTable(EntityType::patient, g.left_ids(), std::move(rows));
}

void EvalConfig::validate() const {
  if (train_ratios.empty()) throw InvalidArgument("eval: no training ratios");
  for (double r : train_ratios) {
    if (!(r > 0.0 && r < 1.0)) throw InvalidArgument("eval: training ratios must lie in (0, 1)");
  }
  if (repeats < 1) throw InvalidArgument("eval: repeats must be >= 1");
  if (!(l2_lambda >= 0.0)) throw InvalidArgument("eval: l2_lambda must be >= 0");
}

Split stratified_split(std::span<const int> labels, double ratio, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] == 1 ? 1 : 0].push_back(i);
  Split split;
  for (auto& members : by_class) {
    const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(members.size())));
    if (k == 0 || k >= members.size()) {
      throw InvalidArgument("eval: ratio " + std::to_string(ratio) + " leaves a class empty in train or test");
    }
    rng.shuffle(members);
    split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(k));
    split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(k), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

namespace {

F1Scores score_cell(const Matrix& features, std::span<const int> labels, const Split& split, double l2_lambda) {
  const std::size_t d = features.cols();
  std::vector<double> mean(d, 0.0), scale(d, 0.0);
  for (std::size_t i : split.train) axpy(1.0, features.row(i), mean);
  for (double& m : mean) m /= static_cast<double>(split.train.size());
  for (std::size_t i : split.train) {
    const auto r = features.row(i);
    for (std::size_t c = 0; c < d; ++c) scale[c] += (r[c] - mean[c]) * (r[c] - mean[c]);
  }
  for (double& s : scale) {
    s = std::sqrt(s / static_cast<double>(split.train.size()));
    if (!(s > 1e-12)) s = 1.0;
  }
  auto standardize = [&](const std::vector<std::size_t>& idx, std::vector<int>& y) {
    Matrix m(idx.size(), d);
    y.clear();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto r = features.row(idx[k]);
      for (std::size_t c = 0; c < d; ++c) m(k, c) = (r[c] - mean[c]) / scale[c];
      y.push_back(labels[idx[k]]);
    }
    return m;
  };
  std::vector<int> y_train, y_test;
  const Matrix x_train = standardize(split.train, y_train);
  const Matrix x_test = standardize(split.test, y_test);
  LogRegConfig lr_cfg;
  lr_cfg.l2_lambda = l2_lambda;
  const LogRegModel model = train_logreg(x_train, y_train, lr_cfg);
  std::vector<int> pred(split.test.size());
  for (std::size_t k = 0; k < split.test.size(); ++k) pred[k] = model.predict(x_test.row(k));
  return f1_scores(y_test, pred);
}

}  // namespace

const EvalSummary* F1Report::find(std::string_view method, double ratio) const {
  for (const auto& s : summary) {
    if (s.method == method && std::abs(s.ratio - ratio) < 1e-12) return &s;
  }
  return nullptr;
}

F1Report evaluate_all(std::span<const NamedEmbedding> methods, std::span<const PatientLabel> labels,
                      const EvalConfig& cfg) {
  cfg.validate();
  if (labels.empty()) throw InvalidArgument("eval: no labels");
  std::vector<int> y;
  y.reserve(labels.size());
  for (const auto& l : labels) y.push_back(l.label);

  std::vector<Matrix> features;
  for (const auto& [name, table] : methods) {
    Matrix m(labels.size(), table.dim());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto idx = table.find(labels[i].patient_id);
      if (!idx) throw InvalidArgument("eval: method " + name + " has no embedding for patient " + labels[i].patient_id);
      const auto v = table.row(*idx);
      std::copy(v.begin(), v.end(), m.row(i).begin());
    }
    features.push_back(std::move(m));
  }

  struct Cell {
    std::size_t ratio_index, repeat, method;
  };
  std::vector<Split> splits;
  std::vector<Cell> cells;
  for (std::size_t r = 0; r < cfg.train_ratios.size(); ++r) {
    for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
      splits.push_back(stratified_split(y, cfg.train_ratios[r], mix_seed(cfg.seed, r, rep)));
      for (std::size_t m = 0; m < methods.size(); ++m) cells.push_back({r, rep, m});
    }
  }
  std::vector<F1Scores> scores(cells.size());
  auto run = [&](std::size_t first, std::size_t stride) {
    for (std::size_t c = first; c < cells.size(); c += stride) {
      const Cell& cell = cells[c];
      scores[c] = score_cell(features[cell.method], y, splits[cell.ratio_index * cfg.repeats + cell.repeat],
                             cfg.l2_lambda);
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(cfg.threads, 1, std::max<std::size_t>(cells.size(), 1));
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::future<void>> tasks;
    for (std::size_t w = 0; w < workers; ++w) tasks.push_back(std::async(std::launch::async, run, w, workers));
    for (auto& t : tasks) t.get();
  }

  F1Report report;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    report.records.push_back({methods[cells[c].method].first, cfg.train_ratios[cells[c].ratio_index], cells[c].repeat,
                              scores[c].micro, scores[c].macro});
  }
  std::sort(report.records.begin(), report.records.end(), [&](const EvalRecord& a, const EvalRecord& b) {
    return std::tie(a.ratio, a.repeat) < std::tie(b.ratio, b.repeat);
  });
  for (const auto& [name, table] : methods) {
    for (double ratio : cfg.train_ratios) {
      EvalSummary s{name, ratio};
      std::vector<double> micro, macro;
      for (const auto& rec : report.records) {
        if (rec.method == name && rec.ratio == ratio) {
          micro.push_back(rec.micro_f1);
          macro.push_back(rec.macro_f1);
        }
      }
      auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
        mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        sd = 0.0;
        for (double x : v) sd += (x - mean) * (x - mean);
        sd = std::sqrt(sd / static_cast<double>(v.size()));
      };
      stats(micro, s.micro_mean, s.micro_std);
      stats(macro, s.macro_mean, s.macro_std);
      report.summary.push_back(s);
    }
  }
  return report;
}

void save_report_csv(const std::filesystem::path& path, const F1Report& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "method,ratio,repeat,micro_f1,macro_f1\n";
  for (const auto& r : report.records) {
    out << r.method << ',' << format_double(r.ratio) << ',' << r.repeat << ',' << format_double(r.micro_f1) << ','
        << format_double(r.macro_f1) << '\n';
  }
  if (!out) throw IoError("write failure on " + path.string());
}

std::string format_report_table(const F1Report& report) {
  std::vector<std::string> methods;
  std::vector<double> ratios;
  for (const auto& s : report.summary) {
    if (std::find(methods.begin(), methods.end(), s.method) == methods.end()) methods.push_back(s.method);
    if (std::find(ratios.begin(), ratios.end(), s.ratio) == ratios.end()) ratios.push_back(s.ratio);
  }
  std::size_t width = 10;
  for (const auto& m : methods) width = std::max(width, m.size() + 2);
  std::ostringstream out;
  char buf[64];
  out << std::string(width, ' ');
  for (const char* metric : {"Micro-F1", "Macro-F1"}) {
    for (double r : ratios) {
      std::snprintf(buf, sizeof buf, " %s@%02.0f%%", metric, r * 100.0);
      out << buf;
    }
  }
  out << '\n';
  for (const auto& m : methods) {
    out << m << std::string(width - m.size(), ' ');
    for (int metric = 0; metric < 2; ++metric) {
      for (double r : ratios) {
        const EvalSummary* s = report.find(m, r);
        std::snprintf(buf, sizeof buf, " %12.3f", metric == 0 ? s->micro_mean : s->macro_mean);
        out << buf;
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace hge
