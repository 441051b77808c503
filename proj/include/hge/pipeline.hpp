#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hge/doctor_attention.hpp"
#include "hge/error.hpp"
#include "hge/evaluation.hpp"
#include "hge/patient_multigraph.hpp"
#include "hge/sgns.hpp"
#include "hge/walks.hpp"

namespace hge {

enum class ThreadMode { deterministic, fast };

struct PipelineConfig {
  std::filesystem::path events;
  std::filesystem::path specialties;
  std::filesystem::path labels;
  std::filesystem::path output_dir = "hge_out";

  std::int64_t window_days = 8;
  WalkConfig walk;
  SgnsConfig sgns;
  DoctorTrainConfig doctor;
  PatientTrainConfig patient;
  EvalConfig eval;
  // Baseline patient embeddings for the evaluation stage. Recognized names:
  // node2vec_ps, node2vec_pd, line2_ps, line2_pd (ps = patient-service,
  // pd = patient-doctor graph) and concat_sd (mean service vector joined with
  // mean doctor vector per patient).
  std::vector<std::string> baselines{"node2vec_ps", "node2vec_pd", "line2_ps", "line2_pd"};
  BaselineConfig baseline;

  std::uint64_t seed = 1;
  ThreadMode thread_mode = ThreadMode::deterministic;
  unsigned threads = 1;  // used in fast mode

  // Thread count handed to the stages.
  unsigned effective_threads() const { return thread_mode == ThreadMode::deterministic ? 1 : threads; }

  // Applies one `key = value` setting. Unknown keys and bad values throw.
  void set(std::string_view key, std::string_view value);
  // Parses `value` as `deterministic` or a positive thread count.
  void set_threads(std::string_view value);
  // Canonical `key = value` listing of every setting except output_dir.
  std::string canonical() const;
  void validate() const;
};

// Reads `key = value` lines; `#` starts a comment. Relative paths resolve
// against the directory of the file.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
// Applies HGE_SEED and HGE_THREADS when set.
void apply_environment(PipelineConfig& cfg);

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t hash_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

enum class Stage { build_graph, train_services, train_doctors, train_patients, evaluate, project };

inline constexpr std::array<Stage, 6> kStages{Stage::build_graph,    Stage::train_services, Stage::train_doctors,
                                              Stage::train_patients, Stage::evaluate,       Stage::project};

std::string_view stage_name(Stage stage);
Stage parse_stage(std::string_view name);
// Files written by the stage, relative to output_dir. The first one decides
// whether `run` skips the stage.
std::vector<std::string> stage_artifacts(Stage stage);

class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& cause)
      : Error("stage " + std::string(stage_name(stage)) + " failed: " + cause), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

struct ManifestEntry {
  std::string stage;
  std::string artifact;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string artifact_hash;

  bool operator==(const ManifestEntry&) const = default;
};

// `stage<TAB>artifact<TAB>config_hash<TAB>seed<TAB>artifact_hash` per line.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
// Artifacts whose recorded hash differs from the file on disk (or are missing).
std::vector<std::string> verify_manifest(const std::filesystem::path& output_dir);

using Logger = std::function<void(std::string_view)>;

struct RunOptions {
  bool force = false;
  Logger log;
};

struct RunSummary {
  std::vector<Stage> executed;
  std::vector<Stage> skipped;
};

// Runs one stage with inputs read from earlier artifacts in output_dir, then
// records its artifacts in the manifest. Errors are rethrown as StageError.
void run_stage(const PipelineConfig& cfg, Stage stage, const Logger& log = {});
// All stages in order; with force unset a stage is skipped when its first
// artifact exists.
RunSummary run_pipeline(const PipelineConfig& cfg, const RunOptions& options = {});

}  // namespace hge
