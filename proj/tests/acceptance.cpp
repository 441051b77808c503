// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "hge/doctor_attention.hpp"
#include "hge/evaluation.hpp"
#include "hge/patient_multigraph.hpp"
#include "hge/pipeline.hpp"
#include "hge/service_graph.hpp"
#include "hge/sgns.hpp"
#include "hge/synthetic.hpp"
#include "support.hpp"

using namespace hge;
using namespace hge::test;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

EmbeddingTable random_table(Rng& rng, EntityType type, const std::string& prefix, std::size_t n, std::size_t dim) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  return EmbeddingTable(type, std::move(ids), random_matrix(rng, n, dim));
}

std::vector<std::vector<double>> to_rows(const Matrix& m) {
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < m.rows(); ++r) out.emplace_back(m.row(r).begin(), m.row(r).end());
  return out;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_dataset(const std::filesystem::path& dir, const SyntheticData& data) {
  std::filesystem::create_directories(dir);
  save_events(dir / "events.csv", data.events, EventFormat::csv);
  save_specialties(dir / "specialties.csv", data.specialties);
  save_labels(dir / "labels.csv", data.labels);
}

Outcome gradient_correctness() {
  const auto start = Clock::now();
  Rng rng(101);
  double worst_sgns = 0.0, worst_doctor = 0.0, worst_patient = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    auto center = random_vector(rng, 6), context = random_vector(rng, 6);
    Matrix negatives = random_matrix(rng, 4, 6);
    const auto g = sgns_pair_gradient(center, context, negatives);
    auto loss = [&] { return sgns_pair_loss(center, context, negatives); };
    worst_sgns = std::max({worst_sgns, fd_check(center, g.center, loss), fd_check(context, g.context, loss),
                           fd_check(negatives.data(), g.negatives.data(), loss)});
  }
  for (int trial = 0; trial < 10; ++trial) {
    auto params = AttentionParams::random(3, 2, 2, {"a", "b", "c"}, rng.next());
    Matrix inputs = random_matrix(rng, 3, 3);
    std::vector<DoctorExample> examples;
    for (std::size_t j = 0; j < 3; ++j) examples.push_back({j, random_matrix(rng, 2 + j, 3), j});
    AttentionGradients g;
    doctor_loss_and_gradients(params, inputs, examples, g);
    auto loss = [&] { return doctor_loss(params, inputs, examples); };
    for (std::size_t k = 0; k < params.heads(); ++k) {
      worst_doctor = std::max({worst_doctor, fd_check(params.weights[k].data(), g.weights[k].data(), loss),
                               fd_check(params.attention[k], g.attention[k], loss)});
    }
    worst_doctor = std::max({worst_doctor, fd_check(inputs.data(), g.doctor_inputs.data(), loss),
                             fd_check(params.classifier.data(), g.classifier.data(), loss),
                             fd_check(params.classifier_bias, g.classifier_bias, loss)});
  }
  for (int trial = 0; trial < 10; ++trial) {
    Matrix patients = random_matrix(rng, 3, 4);
    const Matrix inputs = random_matrix(rng, 4, 6);
    AnnotationParams params{random_matrix(rng, 4, 6), random_vector(rng, 4)};
    std::vector<PatientSample> samples;
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t pos = 0; pos < 4; ++pos) {
        PatientSample s{p, pos, {}};
        for (int k = 0; k < 3; ++k) s.negatives.push_back((pos + 1 + rng.below(3)) % 4);
        samples.push_back(s);
      }
    }
    AnnotationGradients g;
    annotated_sample_loss(patients, inputs, params, samples, &g);
    auto loss = [&] { return annotated_sample_loss(patients, inputs, params, samples, nullptr); };
    worst_patient = std::max({worst_patient, fd_check(patients.data(), g.patients.data(), loss),
                              fd_check(params.weight.data(), g.weight.data(), loss),
                              fd_check(params.bias, g.bias, loss)});
  }
  const double elapsed = seconds_since(start);
  const double worst = std::max({worst_sgns, worst_doctor, worst_patient});
  return {worst < 1e-4 && elapsed < 10.0, "max rel err sgns " + fmt("%.2e", worst_sgns) + ", doctor " +
                                              fmt("%.2e", worst_doctor) + ", patient " + fmt("%.2e", worst_patient) +
                                              " (< 1e-4), " + fmt("%.2f", elapsed) + " s (< 10 s)"};
}

Outcome formula_oracles() {
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    // Attention coefficients.
    {
      const std::size_t in = 1 + rng.below(4), out = 1 + rng.below(4), n = 1 + rng.below(6);
      const auto params = AttentionParams::random(in, 1, out, {"x", "y"}, rng.next());
      const auto d = random_vector(rng, in, 2.0);
      const auto nb = random_matrix(rng, n, in, 2.0);
      const auto alpha = attention_coefficients(d, nb, params, 0);
      const auto oracle = scalar_attention(d, to_rows(nb), params.weights[0], params.attention[0], 0.2);
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(alpha[i] - oracle[i]));
    }
    // A random hybrid graph with at most 6 nodes on each side.
    const auto events = random_events(rng, 3, 3, 2, 5, 4);
    const auto g = duplicate_and_annotate(build_multigraph(events));
    const std::size_t ps = 1 + rng.below(3), pd = 1 + rng.below(3), out = 1 + rng.below(3);
    const auto services = random_table(rng, EntityType::service, "s", 3, ps);
    const auto doctors = random_table(rng, EntityType::doctor, "d", 2, pd);
    const AnnotationParams params{random_matrix(rng, out, ps + pd), random_vector(rng, out)};
    const EmbeddingTable patients(EntityType::patient, g.graph.left_ids(),
                                  random_matrix(rng, g.graph.left_size(), out));

    // Hybrid embedding.
    std::vector<std::vector<double>> h;
    for (const auto& node : g.hybrids) {
      const auto s = services.at(node.service_id), dv = doctors.at(node.doctor_id);
      std::vector<double> expect(out);
      for (std::size_t r = 0; r < out; ++r) {
        double v = params.bias[r];
        for (std::size_t c = 0; c < ps; ++c) v += params.weight(r, c) * s[c];
        for (std::size_t c = 0; c < pd; ++c) v += params.weight(r, ps + c) * dv[c];
        expect[r] = v;
      }
      const auto got = hybrid_embedding(node, services, doctors, params);
      for (std::size_t r = 0; r < out; ++r) worst = std::max(worst, std::abs(got[r] - expect[r]));
      h.push_back(expect);
    }
    Matrix contexts(h.size(), out);
    for (std::size_t i = 0; i < h.size(); ++i) std::copy(h[i].begin(), h[i].end(), contexts.row(i).begin());

    double kl = 0.0;
    for (std::size_t p = 0; p < g.graph.left_size(); ++p) {
      const auto pv = patients.at(g.graph.left_ids()[p]);
      double z = 0.0;
      for (const auto& hv : h) z += std::exp(dot(hv, pv));
      // Context probability.
      for (std::size_t t = 0; t < h.size(); ++t) {
        worst = std::max(worst, std::abs(context_probability(pv, contexts, t) - std::exp(dot(h[t], pv)) / z));
      }
      // Empirical distribution and the weighted loss.
      double total = 0.0;
      for (const auto& e : events) total += e.patient_id == g.graph.left_ids()[p];
      for (const auto& [idx, q] : empirical_distribution(g, p)) {
        double w = 0.0;
        for (const auto& e : events) {
          w += e.patient_id == g.graph.left_ids()[p] && e.service_id == g.hybrids[idx].service_id &&
               e.doctor_id == g.hybrids[idx].doctor_id;
        }
        worst = std::max(worst, std::abs(q - w / total));
        kl -= w / total * std::log(std::exp(dot(h[idx], pv)) / z);
      }
    }
    worst = std::max(worst, std::abs(kl_loss(g, patients, services, doctors, params) - kl));
  }
  return {worst <= 1e-10, "max abs err " + fmt("%.2e", worst) + " over 1000 trials (<= 1e-10)"};
}

Outcome graph_oracles() {
  Rng rng(303);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto events = random_events(rng, 20, 15, 6, 60, 12);
    const std::int64_t T = 1 + static_cast<std::int64_t>(rng.below(10));
    const auto g = build_cooccurrence(sort_journeys(events), T);
    std::map<std::pair<std::string, std::string>, std::uint64_t> got;
    for (const auto& e : g.edges()) {
      auto a = g.id(e.a), b = g.id(e.b);
      if (b < a) std::swap(a, b);
      got[{a, b}] = e.weight;
    }
    std::set<std::string> vertices;
    for (const auto& e : events) vertices.insert(e.service_id);
    if (got != brute_cooccurrence(events, T) || std::set<std::string>(g.ids().begin(), g.ids().end()) != vertices) {
      ++mismatches;
    }
    const auto mg = build_multigraph(events);
    std::map<std::tuple<std::string, std::string, std::string>, std::uint64_t> triples;
    for (const auto& e : mg.edges) triples[{e.patient_id, e.service_id, e.doctor_id}] = e.weight;
    if (triples != brute_triples(events) || triples.size() != mg.edges.size()) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatching journey sets of 100"};
}

Outcome conservation() {
  Rng rng(404);
  int failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto mg = build_multigraph(random_events(rng, 20, 15, 6, 60, 15));
    const auto g = duplicate_and_annotate(mg);
    std::map<std::string, std::uint64_t> per_patient;
    std::set<std::pair<std::string, std::string>> pairs;
    std::uint64_t total = 0;
    for (const auto& e : mg.edges) {
      per_patient[e.patient_id] += e.weight;
      pairs.insert({e.service_id, e.doctor_id});
      total += e.weight;
    }
    bool ok = g.graph.total_weight() == total && g.hybrids.size() == pairs.size() &&
              g.graph.left_size() == per_patient.size();
    for (std::size_t p = 0; ok && p < g.graph.left_size(); ++p) {
      ok = g.graph.left_total(p) == per_patient.at(g.graph.left_ids()[p]);
    }
    failures += !ok;
  }
  return {failures == 0, std::to_string(failures) + " violating multigraphs of 100"};
}

Outcome doctor_separation() {
  const auto start = Clock::now();
  double min_acc = 1.0, sum_acc = 0.0;
  bool cosine_ok = true;
  std::string cosines;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticSpec spec;
    spec.n_specialties = 5;
    spec.noise_rate = 0.05;
    spec.n_doctors = 40;
    spec.seed = seed;
    const auto data = generate_synthetic(spec);
    const PipelineConfig defaults;
    auto wcfg = defaults.walk;
    auto scfg = defaults.sgns;
    wcfg.seed = mix_seed(seed, 1);
    scfg.seed = mix_seed(seed, 2);
    const auto services = embed_services(build_cooccurrence(sort_journeys(data.events), 8), wcfg, scfg);
    auto dcfg = defaults.doctor;
    dcfg.seed = mix_seed(seed, 3);
    const auto r = train_doctor_embeddings(build_doctor_profiles(data.events), data.specialties, services, dcfg);
    min_acc = std::min(min_acc, r.report.heldout_accuracy);
    sum_acc += r.report.heldout_accuracy;

    std::map<std::string, std::string> spec_of;
    for (const auto& s : data.specialties) spec_of[s.doctor_id] = s.specialty;
    double intra = 0.0, inter = 0.0;
    int n_intra = 0, n_inter = 0;
    const auto& ids = r.doctors.ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        const double c = cosine(r.doctors.row(i), r.doctors.row(j));
        if (spec_of[ids[i]] == spec_of[ids[j]]) {
          intra += c;
          ++n_intra;
        } else {
          inter += c;
          ++n_inter;
        }
      }
    }
    intra /= n_intra;
    inter /= n_inter;
    cosine_ok = cosine_ok && intra > inter;
    cosines += (seed > 1 ? ", " : "") + fmt("%.3f", intra) + "/" + fmt("%.3f", inter);
  }
  const double elapsed = seconds_since(start);
  return {min_acc >= 0.95 && cosine_ok && elapsed < 120.0,
          "held-out accuracy min " + fmt("%.3f", min_acc) + " mean " + fmt("%.3f", sum_acc / 5) +
              " (>= 0.95); intra/inter cosine " + cosines + "; " + fmt("%.1f", elapsed) + " s (< 120 s)"};
}

Outcome fusion_advantage(const std::filesystem::path& work) {
  const auto start = Clock::now();
  SyntheticSpec spec;
  spec.n_patients = 500;
  spec.label_rule = LabelRule::doctor_service_pair;
  write_dataset(work / "data", generate_synthetic(spec));
  PipelineConfig cfg;
  cfg.events = work / "data" / "events.csv";
  cfg.specialties = work / "data" / "specialties.csv";
  cfg.labels = work / "data" / "labels.csv";
  cfg.output_dir = work / "out";
  cfg.set("patient.epochs", "40");
  cfg.set("baseline.line_epochs", "40");
  cfg.set("eval.baselines", "node2vec_ps, line2_pd");
  run_pipeline(cfg, {true, {}});
  std::ifstream in(cfg.output_dir / "evaluation.csv");
  std::string line;
  std::getline(in, line);
  std::map<std::string, std::pair<double, int>> macro80;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string method, ratio, repeat, micro, macro;
    std::getline(ss, method, ',');
    std::getline(ss, ratio, ',');
    std::getline(ss, repeat, ',');
    std::getline(ss, micro, ',');
    std::getline(ss, macro, ',');
    if (std::stod(ratio) != 0.8) continue;
    macro80[method].first += std::stod(macro);
    macro80[method].second += 1;
  }
  auto mean = [&](const std::string& m) {
    const auto it = macro80.find(m);
    return it == macro80.end() || it->second.second == 0 ? 0.0 : it->second.first / it->second.second;
  };
  const double me = mean("me2vec"), n2v = mean("node2vec_ps"), l2 = mean("line2_pd");
  const bool repeats_ok = macro80["me2vec"].second == 10 && macro80["node2vec_ps"].second == 10 &&
                          macro80["line2_pd"].second == 10;
  const double elapsed = seconds_since(start);
  return {repeats_ok && me - n2v >= 0.05 && me - l2 >= 0.05 && elapsed < 600.0,
          "macro-F1@80% me2vec " + fmt("%.3f", me) + ", node2vec_ps " + fmt("%.3f", n2v) + ", line2_pd " +
              fmt("%.3f", l2) + " (margin >= 0.05), " + fmt("%.0f", elapsed) + " s (< 600 s)"};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + HGE_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism(const std::filesystem::path& work) {
  SyntheticSpec spec;
  spec.n_patients = 150;
  spec.label_rule = LabelRule::doctor_service_pair;
  write_dataset(work / "data", generate_synthetic(spec));
  const std::vector<std::string> files{"service_graph.tsv",     "service_embeddings.txt", "doctor_embeddings.txt",
                                       "attention_params.txt",  "patient_embeddings.txt", "annotation_params.txt",
                                       "evaluation.csv",        "baseline_node2vec_ps.txt", "baseline_line2_pd.txt"};
  for (const char* run : {"a", "b"}) {
    std::ofstream conf(work / (std::string(run) + ".conf"));
    conf << "events = data/events.csv\nspecialties = data/specialties.csv\nlabels = data/labels.csv\n"
         << "output_dir = out_" << run << "\nseed = 5\nthreads = deterministic\n"
         << "walk.walks_per_node = 4\nwalk.walk_length = 40\nsgns.dim = 32\ndoctor.dim = 32\ndoctor.epochs = 50\n"
         << "patient.dim = 32\npatient.epochs = 5\neval.repeats = 3\neval.baselines = node2vec_ps, line2_pd\n"
         << "baseline.dim = 32\nbaseline.walks_per_node = 4\nbaseline.walk_length = 40\n";
  }
  for (const char* run : {"a", "b"}) {
    if (run_cli("run --force --config \"" + (work / (std::string(run) + ".conf")).string() + "\"") != 0) {
      return {false, std::string("run ") + run + " exited nonzero"};
    }
  }
  std::vector<std::string> differing;
  for (const auto& f : files) {
    const auto a = slurp(work / "out_a" / f), b = slurp(work / "out_b" / f);
    if (a.empty() || a != b) differing.push_back(f);
  }
  std::string detail = std::to_string(files.size() - differing.size()) + "/" + std::to_string(files.size()) +
                       " artifacts bit-identical";
  for (const auto& f : differing) detail += "; differs: " + f;
  return {differing.empty(), detail};
}

Outcome metric_correctness() {
  Rng rng(808);
  int mismatches = 0, accuracy_mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    std::vector<int> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.below(2));
      pred[i] = static_cast<int>(rng.below(2));
    }
    const auto s = f1_scores(truth, pred);
    const auto [micro, macro] = brute_f1(truth, pred);
    mismatches += s.micro != micro || s.macro != macro;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += truth[i] == pred[i];
    accuracy_mismatches += s.micro != static_cast<double>(correct) / static_cast<double>(n);
  }
  return {mismatches == 0 && accuracy_mismatches == 0,
          std::to_string(mismatches) + " oracle mismatches, " + std::to_string(accuracy_mismatches) +
              " micro != accuracy, of 1000"};
}

}  // namespace

int main() {
  TempDir work("acceptance");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"exact-formula oracles", formula_oracles},
      {"graph-construction oracle", graph_oracles},
      {"duplication and annotation conservation", conservation},
      {"synthetic doctor separation", doctor_separation},
      {"fusion advantage", [&] { return fusion_advantage(work / "fusion"); }},
      {"determinism", [&] { return determinism(work / "determinism"); }},
      {"metric correctness", metric_correctness},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
