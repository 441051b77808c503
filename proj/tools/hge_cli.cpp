#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "hge/embedding.hpp"
#include "hge/events.hpp"
#include "hge/pca.hpp"
#include "hge/pipeline.hpp"
#include "hge/synthetic.hpp"

namespace {

struct PipelineFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string threads;
  bool force = false;

  void attach(CLI::App* cmd, bool with_force) {
    cmd->add_option("--config", config, "Pipeline configuration file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Global seed (overrides config and HGE_SEED)");
    cmd->add_option("--threads", threads, "Thread count or 'deterministic'");
    if (with_force) cmd->add_flag("--force", force, "Rerun stages whose artifacts exist");
  }

  hge::PipelineConfig resolve() const {
    hge::PipelineConfig cfg = hge::load_pipeline_config(config);
    hge::apply_environment(cfg);
    if (seed) cfg.seed = *seed;
    if (!threads.empty()) cfg.set_threads(threads);
    return cfg;
  }
};

void log_line(std::string_view message) { std::cerr << message << '\n'; }

std::map<std::string, std::string> read_groups(const std::string& path) {
  std::map<std::string, std::string> groups;
  if (path.empty()) return groups;
  for (const auto& row : hge::load_specialties(path)) groups.emplace(row.doctor_id, row.specialty);
  return groups;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical graph embeddings for services, doctors and patients"};
  app.require_subcommand(1);

  hge::SyntheticSpec spec;
  std::string label_rule = "service_only";
  std::string synth_out = ".";
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic events/specialties/labels dataset");
  gen->add_option("--patients", spec.n_patients)->check(CLI::PositiveNumber);
  gen->add_option("--doctors", spec.n_doctors)->check(CLI::PositiveNumber);
  gen->add_option("--services", spec.n_services)->check(CLI::PositiveNumber);
  gen->add_option("--specialties", spec.n_specialties)->check(CLI::PositiveNumber);
  gen->add_option("--days", spec.journey_days)->check(CLI::PositiveNumber);
  gen->add_option("--noise", spec.noise_rate)->check(CLI::Range(0.0, 1.0));
  gen->add_option("--label-rule", label_rule)->check(CLI::IsMember({"service_only", "doctor_service_pair"}));
  gen->add_option("--seed", spec.seed);
  gen->add_option("--out", synth_out, "Output directory");

  PipelineFlags stage_flags;
  std::map<CLI::App*, hge::Stage> stage_commands;
  for (hge::Stage stage : {hge::Stage::build_graph, hge::Stage::train_services, hge::Stage::train_doctors,
                           hge::Stage::train_patients, hge::Stage::evaluate}) {
    auto* cmd = app.add_subcommand(std::string(hge::stage_name(stage)), "Run the " +
                                                                            std::string(hge::stage_name(stage)) +
                                                                            " stage");
    stage_flags.attach(cmd, false);
    stage_commands.emplace(cmd, stage);
  }

  std::string project_config, embeddings, project_out, groups_file, method = "pca";
  auto* project = app.add_subcommand("project", "2-D PCA projection to CSV and SVG");
  project->add_option("--config", project_config, "Project the service and doctor embeddings of a pipeline")
      ->check(CLI::ExistingFile);
  project->add_option("--embeddings", embeddings, "Embedding file")->check(CLI::ExistingFile);
  project->add_option("--out", project_out, "Output prefix; writes PREFIX.csv and PREFIX.svg");
  project->add_option("--specialties", groups_file, "Color points by the id,group CSV")->check(CLI::ExistingFile);
  project->add_option("--method", method)->check(CLI::IsMember({"pca"}));
  std::optional<std::uint64_t> project_seed;
  std::string project_threads;
  project->add_option("--seed", project_seed);
  project->add_option("--threads", project_threads);

  PipelineFlags run_flags;
  auto* run = app.add_subcommand("run", "Run every stage, skipping those already done");
  run_flags.attach(run, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      spec.label_rule = hge::parse_label_rule(label_rule);
      const auto data = hge::generate_synthetic(spec);
      const std::filesystem::path dir = synth_out;
      std::filesystem::create_directories(dir);
      hge::save_events(dir / "events.csv", data.events, hge::EventFormat::csv);
      hge::save_specialties(dir / "specialties.csv", data.specialties);
      hge::save_labels(dir / "labels.csv", data.labels);
      std::size_t positives = 0;
      for (const auto& l : data.labels) positives += static_cast<std::size_t>(l.label);
      std::cerr << "wrote " << data.events.size() << " events, " << data.specialties.size() << " doctors, "
                << data.labels.size() << " labels (" << positives << " positive) to " << dir.string() << '\n';
      return 0;
    }
    for (const auto& [cmd, stage] : stage_commands) {
      if (cmd->parsed()) {
        hge::run_stage(stage_flags.resolve(), stage, log_line);
        return 0;
      }
    }
    if (project->parsed()) {
      if (!project_config.empty()) {
        PipelineFlags flags{project_config, project_seed, project_threads, false};
        hge::run_stage(flags.resolve(), hge::Stage::project, log_line);
        return 0;
      }
      if (embeddings.empty() || project_out.empty()) {
        std::cerr << "error: project needs --config, or --embeddings with --out\n";
        return 2;
      }
      const auto table = hge::load_embeddings(embeddings, hge::EntityType::service);
      const auto projection = hge::project_pca(table);
      hge::save_projection_csv(project_out + ".csv", projection);
      hge::save_projection_svg(project_out + ".svg", projection, read_groups(groups_file),
                               std::filesystem::path(embeddings).filename().string() + " (PCA)");
      std::cerr << "explained variance " << projection.eigenvalues[0] << ", " << projection.eigenvalues[1] << '\n';
      return 0;
    }
    if (run->parsed()) {
      const auto cfg = run_flags.resolve();
      const auto summary = hge::run_pipeline(cfg, {run_flags.force, log_line});
      std::cerr << "done: " << summary.executed.size() << " stages run, " << summary.skipped.size() << " skipped\n";
      return 0;
    }
  } catch (const hge::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
