#include "hge/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>
#include <type_traits>

#include "hge/pca.hpp"
#include "hge/random.hpp"
#include "hge/service_graph.hpp"

namespace hge {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw InvalidArgument("config: bad value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

std::size_t parse_count(std::string_view key, std::string_view value) { return parse_number<std::size_t>(key, value); }
double parse_real(std::string_view key, std::string_view value) { return parse_number<double>(key, value); }

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  while (!value.empty()) {
    const auto comma = value.find(',');
    const auto item = trim(value.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

void PipelineConfig::set_threads(std::string_view value) {
  if (value == "deterministic") {
    thread_mode = ThreadMode::deterministic;
    return;
  }
  const std::size_t n = value == "fast" ? std::max(1u, std::thread::hardware_concurrency()) : parse_count("threads", value);
  if (n == 0) throw InvalidArgument("config: threads must be positive or 'deterministic'");
  thread_mode = ThreadMode::fast;
  threads = static_cast<unsigned>(n);
}

void PipelineConfig::set(std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (key == "events") events = std::string(value);
  else if (key == "specialties") specialties = std::string(value);
  else if (key == "labels") labels = std::string(value);
  else if (key == "output_dir") output_dir = std::string(value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "threads") set_threads(value);
  else if (key == "window_days") window_days = parse_number<std::int64_t>(key, value);
  else if (key == "walk.walks_per_node") walk.walks_per_node = parse_count(key, value);
  else if (key == "walk.walk_length") walk.walk_length = parse_count(key, value);
  else if (key == "walk.p") walk.return_param = parse_real(key, value);
  else if (key == "walk.q") walk.inout_param = parse_real(key, value);
  else if (key == "sgns.dim") sgns.dim = parse_count(key, value);
  else if (key == "sgns.window") sgns.window = parse_count(key, value);
  else if (key == "sgns.negatives") sgns.negatives = parse_count(key, value);
  else if (key == "sgns.epochs") sgns.epochs = parse_count(key, value);
  else if (key == "sgns.learning_rate") sgns.learning_rate = parse_real(key, value);
  else if (key == "doctor.heads") doctor.heads = parse_count(key, value);
  else if (key == "doctor.dim") doctor.output_dim = parse_count(key, value);
  else if (key == "doctor.learning_rate") doctor.learning_rate = parse_real(key, value);
  else if (key == "doctor.epochs") doctor.epochs = parse_count(key, value);
  else if (key == "doctor.leaky_slope") doctor.leaky_slope = parse_real(key, value);
  else if (key == "doctor.activation") doctor.activation = parse_activation(value);
  else if (key == "doctor.holdout_fraction") doctor.holdout_fraction = parse_real(key, value);
  else if (key == "patient.dim") patient.dim = parse_count(key, value);
  else if (key == "patient.negatives") patient.negatives = parse_count(key, value);
  else if (key == "patient.epochs") patient.epochs = parse_count(key, value);
  else if (key == "patient.learning_rate") patient.learning_rate = parse_real(key, value);
  else if (key == "eval.train_ratios") {
    eval.train_ratios.clear();
    for (const auto& r : split_list(value)) eval.train_ratios.push_back(parse_real(key, r));
  } else if (key == "eval.repeats") eval.repeats = parse_count(key, value);
  else if (key == "eval.l2_lambda") eval.l2_lambda = parse_real(key, value);
  else if (key == "eval.baselines") baselines = split_list(value);
  else if (key == "baseline.walks_per_node") baseline.walk.walks_per_node = parse_count(key, value);
  else if (key == "baseline.walk_length") baseline.walk.walk_length = parse_count(key, value);
  else if (key == "baseline.p") baseline.walk.return_param = parse_real(key, value);
  else if (key == "baseline.q") baseline.walk.inout_param = parse_real(key, value);
  else if (key == "baseline.dim") baseline.sgns.dim = baseline.line.dim = parse_count(key, value);
  else if (key == "baseline.negatives") baseline.sgns.negatives = baseline.line.negatives = parse_count(key, value);
  else if (key == "baseline.sgns_epochs") baseline.sgns.epochs = parse_count(key, value);
  else if (key == "baseline.line_epochs") baseline.line.epochs = parse_count(key, value);
  else if (key == "baseline.window") baseline.sgns.window = parse_count(key, value);
  else throw InvalidArgument("config: unknown key '" + std::string(key) + "'");
}

std::string PipelineConfig::canonical() const {
  std::ostringstream out;
  auto list = [](const auto& items) {
    std::string s;
    for (const auto& x : items) {
      if (!s.empty()) s += ',';
      if constexpr (std::is_same_v<std::decay_t<decltype(x)>, double>) s += format_double(x);
      else s += x;
    }
    return s;
  };
  out << "events = " << events.generic_string() << '\n'
      << "specialties = " << specialties.generic_string() << '\n'
      << "labels = " << labels.generic_string() << '\n'
      << "seed = " << seed << '\n'
      << "threads = " << (thread_mode == ThreadMode::deterministic ? std::string("deterministic") : std::to_string(threads)) << '\n'
      << "window_days = " << window_days << '\n'
      << "walk.walks_per_node = " << walk.walks_per_node << '\n'
      << "walk.walk_length = " << walk.walk_length << '\n'
      << "walk.p = " << format_double(walk.return_param) << '\n'
      << "walk.q = " << format_double(walk.inout_param) << '\n'
      << "sgns.dim = " << sgns.dim << '\n'
      << "sgns.window = " << sgns.window << '\n'
      << "sgns.negatives = " << sgns.negatives << '\n'
      << "sgns.epochs = " << sgns.epochs << '\n'
      << "sgns.learning_rate = " << format_double(sgns.learning_rate) << '\n'
      << "doctor.heads = " << doctor.heads << '\n'
      << "doctor.dim = " << doctor.output_dim << '\n'
      << "doctor.learning_rate = " << format_double(doctor.learning_rate) << '\n'
      << "doctor.epochs = " << doctor.epochs << '\n'
      << "doctor.leaky_slope = " << format_double(doctor.leaky_slope) << '\n'
      << "doctor.activation = " << to_string(doctor.activation) << '\n'
      << "doctor.holdout_fraction = " << format_double(doctor.holdout_fraction) << '\n'
      << "patient.dim = " << patient.dim << '\n'
      << "patient.negatives = " << patient.negatives << '\n'
      << "patient.epochs = " << patient.epochs << '\n'
      << "patient.learning_rate = " << format_double(patient.learning_rate) << '\n'
      << "eval.train_ratios = " << list(eval.train_ratios) << '\n'
      << "eval.repeats = " << eval.repeats << '\n'
      << "eval.l2_lambda = " << format_double(eval.l2_lambda) << '\n'
      << "eval.baselines = " << list(baselines) << '\n'
      << "baseline.walks_per_node = " << baseline.walk.walks_per_node << '\n'
      << "baseline.walk_length = " << baseline.walk.walk_length << '\n'
      << "baseline.p = " << format_double(baseline.walk.return_param) << '\n'
      << "baseline.q = " << format_double(baseline.walk.inout_param) << '\n'
      << "baseline.dim = " << baseline.sgns.dim << '\n'
      << "baseline.negatives = " << baseline.sgns.negatives << '\n'
      << "baseline.sgns_epochs = " << baseline.sgns.epochs << '\n'
      << "baseline.line_epochs = " << baseline.line.epochs << '\n'
      << "baseline.window = " << baseline.sgns.window << '\n';
  return out.str();
}

void PipelineConfig::validate() const {
  if (events.empty()) throw InvalidArgument("config: 'events' is required");
  if (output_dir.empty()) throw InvalidArgument("config: 'output_dir' is required");
  if (window_days < 1) throw InvalidArgument("config: window_days must be >= 1");
  walk.validate();
  sgns.validate();
  doctor.validate();
  patient.validate();
  eval.validate();
  baseline.walk.validate();
  baseline.sgns.validate();
  baseline.line.validate();
  static constexpr std::array<std::string_view, 5> known{"node2vec_ps", "node2vec_pd", "line2_ps", "line2_pd",
                                                         "concat_sd"};
  for (const auto& b : baselines) {
    if (std::find(known.begin(), known.end(), b) == known.end()) {
      throw InvalidArgument("config: unknown baseline '" + b + "'");
    }
  }
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  PipelineConfig cfg;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw ParseError(path.string(), row, "expected key = value");
    try {
      cfg.set(view.substr(0, eq), view.substr(eq + 1));
    } catch (const InvalidArgument& e) {
      throw ParseError(path.string(), row, e.what());
    }
  }
  const auto base = path.parent_path();
  for (auto* p : {&cfg.events, &cfg.specialties, &cfg.labels, &cfg.output_dir}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  return cfg;
}

void apply_environment(PipelineConfig& cfg) {
  if (const char* s = std::getenv("HGE_SEED"); s && *s) cfg.seed = parse_number<std::uint64_t>("HGE_SEED", s);
  if (const char* t = std::getenv("HGE_THREADS"); t && *t) cfg.set_threads(t);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a64(buf.str());
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::build_graph: return "build-graph";
    case Stage::train_services: return "train-services";
    case Stage::train_doctors: return "train-doctors";
    case Stage::train_patients: return "train-patients";
    case Stage::evaluate: return "evaluate";
    case Stage::project: return "project";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : kStages) {
    if (stage_name(s) == name) return s;
  }
  throw InvalidArgument("unknown stage '" + std::string(name) + "'");
}

std::vector<std::string> stage_artifacts(Stage stage) {
  switch (stage) {
    case Stage::build_graph: return {"service_graph.tsv"};
    case Stage::train_services: return {"service_embeddings.txt"};
    case Stage::train_doctors: return {"doctor_embeddings.txt", "attention_params.txt", "doctor_report.txt"};
    case Stage::train_patients: return {"patient_embeddings.txt", "annotation_params.txt", "hybrid_graph.tsv"};
    case Stage::evaluate: return {"evaluation.csv", "evaluation_summary.txt"};
    case Stage::project:
      return {"service_projection.csv", "service_projection.svg", "doctor_projection.csv", "doctor_projection.svg"};
  }
  return {};
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::vector<ManifestEntry> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream fields(line);
    ManifestEntry e;
    std::string seed;
    if (!std::getline(fields, e.stage, '\t') || !std::getline(fields, e.artifact, '\t') ||
        !std::getline(fields, e.config_hash, '\t') || !std::getline(fields, seed, '\t') ||
        !std::getline(fields, e.artifact_hash)) {
      throw ParseError(path.string(), row, "expected 5 tab-separated fields");
    }
    e.seed = parse_number<std::uint64_t>("seed", seed);
    out.push_back(std::move(e));
  }
  return out;
}

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    for (const auto& e : entries) {
      out << e.stage << '\t' << e.artifact << '\t' << e.config_hash << '\t' << e.seed << '\t' << e.artifact_hash
          << '\n';
    }
    if (!out) throw IoError("write failure on " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::string> verify_manifest(const std::filesystem::path& output_dir) {
  std::vector<std::string> bad;
  for (const auto& e : load_manifest(output_dir / "manifest.txt")) {
    const auto file = output_dir / e.artifact;
    if (!std::filesystem::exists(file) || hex64(hash_file(file)) != e.artifact_hash) bad.push_back(e.artifact);
  }
  return bad;
}

namespace {

void say(const Logger& log, Stage stage, const std::string& message) {
  if (log) log("[" + std::string(stage_name(stage)) + "] " + message);
}

std::vector<JourneyEvent> read_events(const PipelineConfig& cfg) { return normalize_days(load_events(cfg.events)); }

std::map<std::string, std::string> specialty_map(const PipelineConfig& cfg) {
  std::map<std::string, std::string> out;
  if (cfg.specialties.empty() || !std::filesystem::exists(cfg.specialties)) return out;
  for (const auto& row : load_specialties(cfg.specialties)) out.emplace(row.doctor_id, row.specialty);
  return out;
}

// Patient rows: mean service vector of its events joined with the mean
// doctor vector.
EmbeddingTable concat_baseline(std::span<const JourneyEvent> events, const EmbeddingTable& services,
                               const EmbeddingTable& doctors) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> sums;
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& e : events) {
    auto& [s, d] = sums[e.patient_id];
    auto& [ns, nd] = counts[e.patient_id];
    if (s.empty()) {
      s.assign(services.dim(), 0.0);
      d.assign(doctors.dim(), 0.0);
    }
    if (services.contains(e.service_id)) {
      axpy(1.0, services.at(e.service_id), s);
      ++ns;
    }
    if (doctors.contains(e.doctor_id)) {
      axpy(1.0, doctors.at(e.doctor_id), d);
      ++nd;
    }
  }
  std::vector<std::string> ids;
  Matrix rows(sums.size(), services.dim() + doctors.dim());
  std::size_t r = 0;
  for (auto& [id, pair] : sums) {
    const auto [ns, nd] = counts[id];
    auto out = rows.row(r++);
    for (std::size_t k = 0; k < pair.first.size(); ++k) out[k] = ns ? pair.first[k] / static_cast<double>(ns) : 0.0;
    for (std::size_t k = 0; k < pair.second.size(); ++k) {
      out[services.dim() + k] = nd ? pair.second[k] / static_cast<double>(nd) : 0.0;
    }
    ids.push_back(id);
  }
  return EmbeddingTable(EntityType::patient, std::move(ids), std::move(rows));
}

void stage_build_graph(const PipelineConfig& cfg, const Logger& log) {
  const auto events = read_events(cfg);
  const ServiceGraph g = build_cooccurrence(sort_journeys(events), cfg.window_days, cfg.effective_threads());
  say(log, Stage::build_graph,
      std::to_string(events.size()) + " events, " + std::to_string(g.size()) + " services, " +
          std::to_string(g.edge_count()) + " edges");
  const std::size_t isolated = static_cast<std::size_t>(
      std::count_if(g.ids().begin(), g.ids().end(), [&](const std::string& id) { return g.neighbors(*g.find(id)).empty(); }));
  if (isolated > 0) say(log, Stage::build_graph, "warning: " + std::to_string(isolated) + " services co-occur with nothing");
  save_edge_list(cfg.output_dir / "service_graph.tsv", g);
}

void stage_train_services(const PipelineConfig& cfg, const Logger& log) {
  const ServiceGraph g = load_edge_list(cfg.output_dir / "service_graph.tsv");
  WalkConfig walk = cfg.walk;
  walk.seed = mix_seed(cfg.seed, 1);
  walk.threads = cfg.effective_threads();
  SgnsConfig sgns = cfg.sgns;
  sgns.seed = mix_seed(cfg.seed, 2);
  sgns.threads = cfg.effective_threads();
  SgnsTrace trace;
  const EmbeddingTable services = embed_services(g, walk, sgns, &trace);
  say(log, Stage::train_services,
      std::to_string(services.size()) + " services, probe loss " + format_double(trace.probe_loss.front()) + " -> " +
          format_double(trace.probe_loss.back()));
  save_embeddings(cfg.output_dir / "service_embeddings.txt", services);
}

void stage_train_doctors(const PipelineConfig& cfg, const Logger& log) {
  if (cfg.specialties.empty()) throw InvalidArgument("config: 'specialties' is required for doctor training");
  const auto events = read_events(cfg);
  const EmbeddingTable services = load_embeddings(cfg.output_dir / "service_embeddings.txt", EntityType::service);
  DoctorTrainConfig dc = cfg.doctor;
  dc.seed = mix_seed(cfg.seed, 3);
  const auto result = train_doctor_embeddings(build_doctor_profiles(events), load_specialties(cfg.specialties),
                                              services, dc);
  for (const auto& w : result.report.warnings) say(log, Stage::train_doctors, "warning: " + w);
  say(log, Stage::train_doctors,
      std::to_string(result.doctors.size()) + " doctors, train accuracy " +
          format_double(result.report.train_accuracy) + ", held-out accuracy " +
          format_double(result.report.heldout_accuracy));
  save_embeddings(cfg.output_dir / "doctor_embeddings.txt", result.doctors);
  save_attention_params(cfg.output_dir / "attention_params.txt", result.params);
  std::ofstream report(cfg.output_dir / "doctor_report.txt", std::ios::trunc);
  report << "train_doctors " << result.report.train_doctors << '\n'
         << "heldout_doctors " << result.report.heldout_doctors << '\n'
         << "train_accuracy " << format_double(result.report.train_accuracy) << '\n'
         << "heldout_accuracy " << format_double(result.report.heldout_accuracy) << '\n'
         << "initial_loss " << format_double(result.report.loss_history.front()) << '\n'
         << "final_loss " << format_double(result.report.loss_history.back()) << '\n';
  for (const auto& w : result.report.warnings) report << "warning " << w << '\n';
  if (!report) throw IoError("write failure on doctor_report.txt");
}

void stage_train_patients(const PipelineConfig& cfg, const Logger& log) {
  const auto events = read_events(cfg);
  const EmbeddingTable services = load_embeddings(cfg.output_dir / "service_embeddings.txt", EntityType::service);
  const EmbeddingTable doctors = load_embeddings(cfg.output_dir / "doctor_embeddings.txt", EntityType::doctor);
  std::size_t dropped = 0;
  const PatientMultigraph mg = restrict_to_embedded(build_multigraph(events), services, doctors, &dropped);
  if (dropped > 0) {
    say(log, Stage::train_patients,
        "warning: dropped " + std::to_string(dropped) + " multigraph edges without service or doctor embedding");
  }
  const HybridBipartiteGraph hg = duplicate_and_annotate(mg);
  PatientTrainConfig pc = cfg.patient;
  pc.seed = mix_seed(cfg.seed, 4);
  pc.threads = cfg.effective_threads();
  const auto result = train_patient_embeddings(hg, services, doctors, pc);
  say(log, Stage::train_patients,
      std::to_string(result.patients.size()) + " patients, " + std::to_string(hg.hybrids.size()) + " hybrid nodes");
  save_embeddings(cfg.output_dir / "patient_embeddings.txt", result.patients);
  save_annotation_params(cfg.output_dir / "annotation_params.txt", result.params);
  save_hybrid_graph(cfg.output_dir / "hybrid_graph.tsv", hg);
}

void stage_evaluate(const PipelineConfig& cfg, const Logger& log) {
  if (cfg.labels.empty()) throw InvalidArgument("config: 'labels' is required for evaluation");
  const auto labels = load_labels(cfg.labels);
  std::vector<NamedEmbedding> methods;
  methods.emplace_back("me2vec", load_embeddings(cfg.output_dir / "patient_embeddings.txt", EntityType::patient));

  const bool need_events = !cfg.baselines.empty();
  const auto events = need_events ? read_events(cfg) : std::vector<JourneyEvent>{};
  std::uint64_t stream = 10;
  for (const auto& name : cfg.baselines) {
    BaselineConfig bc = cfg.baseline;
    bc.walk.seed = mix_seed(cfg.seed, stream, 1);
    bc.sgns.seed = mix_seed(cfg.seed, stream, 2);
    bc.line.seed = mix_seed(cfg.seed, stream, 3);
    ++stream;
    bc.walk.threads = bc.sgns.threads = bc.line.threads = cfg.effective_threads();
    EmbeddingTable table;
    if (name == "concat_sd") {
      table = concat_baseline(events,
                              load_embeddings(cfg.output_dir / "service_embeddings.txt", EntityType::service),
                              load_embeddings(cfg.output_dir / "doctor_embeddings.txt", EntityType::doctor));
    } else {
      const auto mode = name.ends_with("_ps") ? BipartiteMode::patient_service : BipartiteMode::patient_doctor;
      const auto method = name.starts_with("node2vec") ? BaselineMethod::node2vec : BaselineMethod::line2;
      table = run_baseline(build_bipartite(events, mode), method, bc);
    }
    say(log, Stage::evaluate, "baseline " + name + ": " + std::to_string(table.size()) + " patients");
    save_embeddings(cfg.output_dir / ("baseline_" + name + ".txt"), table);
    methods.emplace_back(name, std::move(table));
  }

  EvalConfig ec = cfg.eval;
  ec.seed = mix_seed(cfg.seed, 5);
  ec.threads = cfg.effective_threads();
  const F1Report report = evaluate_all(methods, labels, ec);
  save_report_csv(cfg.output_dir / "evaluation.csv", report);
  const std::string table = format_report_table(report);
  std::ofstream summary(cfg.output_dir / "evaluation_summary.txt", std::ios::trunc);
  summary << table;
  if (!summary) throw IoError("write failure on evaluation_summary.txt");
  say(log, Stage::evaluate, "\n" + table);
}

void stage_project(const PipelineConfig& cfg, const Logger& log) {
  const EmbeddingTable services = load_embeddings(cfg.output_dir / "service_embeddings.txt", EntityType::service);
  const EmbeddingTable doctors = load_embeddings(cfg.output_dir / "doctor_embeddings.txt", EntityType::doctor);
  const Projection ps = project_pca(services);
  save_projection_csv(cfg.output_dir / "service_projection.csv", ps);
  save_projection_svg(cfg.output_dir / "service_projection.svg", ps, {}, "Service embeddings (PCA)");
  const Projection pd = project_pca(doctors);
  save_projection_csv(cfg.output_dir / "doctor_projection.csv", pd);
  save_projection_svg(cfg.output_dir / "doctor_projection.svg", pd, specialty_map(cfg), "Doctor embeddings (PCA)");
  say(log, Stage::project, "wrote service and doctor projections");
}

void record(const PipelineConfig& cfg, Stage stage) {
  const auto manifest_path = cfg.output_dir / "manifest.txt";
  auto entries = load_manifest(manifest_path);
  const std::string name(stage_name(stage));
  std::erase_if(entries, [&](const ManifestEntry& e) { return e.stage == name; });
  const std::string config_hash = hex64(fnv1a64(cfg.canonical()));
  auto artifacts = stage_artifacts(stage);
  if (stage == Stage::evaluate) {
    for (const auto& b : cfg.baselines) artifacts.push_back("baseline_" + b + ".txt");
  }
  for (const auto& a : artifacts) {
    entries.push_back({name, a, config_hash, cfg.seed, hex64(hash_file(cfg.output_dir / a))});
  }
  auto order = [](const std::string& stage_id) {
    return static_cast<int>(parse_stage(stage_id));
  };
  std::stable_sort(entries.begin(), entries.end(),
                   [&](const ManifestEntry& a, const ManifestEntry& b) { return order(a.stage) < order(b.stage); });
  save_manifest(manifest_path, entries);
}

}  // namespace

void run_stage(const PipelineConfig& cfg, Stage stage, const Logger& log) {
  try {
    cfg.validate();
    std::filesystem::create_directories(cfg.output_dir);
    switch (stage) {
      case Stage::build_graph: stage_build_graph(cfg, log); break;
      case Stage::train_services: stage_train_services(cfg, log); break;
      case Stage::train_doctors: stage_train_doctors(cfg, log); break;
      case Stage::train_patients: stage_train_patients(cfg, log); break;
      case Stage::evaluate: stage_evaluate(cfg, log); break;
      case Stage::project: stage_project(cfg, log); break;
    }
    record(cfg, stage);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

RunSummary run_pipeline(const PipelineConfig& cfg, const RunOptions& options) {
  RunSummary summary;
  for (Stage stage : kStages) {
    const auto first = cfg.output_dir / stage_artifacts(stage).front();
    if (!options.force && std::filesystem::exists(first)) {
      say(options.log, stage, "skipped, " + first.filename().string() + " exists");
      summary.skipped.push_back(stage);
      continue;
    }
    run_stage(cfg, stage, options.log);
    summary.executed.push_back(stage);
  }
  return summary;
}

}  // namespace hge
