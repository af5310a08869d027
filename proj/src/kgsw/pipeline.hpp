#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "kgsw/config.hpp"
#include "kgsw/dataset.hpp"
#include "kgsw/graphsw.hpp"
#include "kgsw/kg_store.hpp"

namespace kgsw {

inline constexpr const char* kDatasetSchema = "kgsw.dataset/1";
inline constexpr const char* kStatsSchema = "kgsw.stats/1";
inline constexpr const char* kStageReportSchema = "kgsw.stage_report/1";
inline constexpr const char* kMetricsSchema = "kgsw.metrics/1";
inline constexpr const char* kEvaluationSchema = "kgsw.evaluation/1";
inline constexpr const char* kAblationSchema = "kgsw.ablation/1";

struct PreparedData {
  KnowledgeGraph kg;
  ImplicitDataset dataset;
  DatasetStats stats;
  std::string name;
};

nlohmann::json to_json(const DatasetStats& s);

// Canonical dataset directory:
//   meta.json, kg.tsv, train.tsv / eval.tsv / test.tsv (user, item, label),
//   item_entity.tsv, users.tsv, items.tsv (dense id, raw id),
//   stats.json, stats.tsv
void write_dataset_dir(const std::filesystem::path& dir, const IngestResult& ingest,
                       const KnowledgeGraph& kg, const std::string& rule,
                       std::uint64_t seed);
PreparedData load_dataset_dir(const std::filesystem::path& dir);

struct IngestRequest {
  std::filesystem::path ratings;
  std::filesystem::path kg;
  std::filesystem::path item_entity;
  std::string rule;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir;
};

// Returns the stats document written to stats.json.
nlohmann::json ingest_to_dir(const IngestRequest& request);
nlohmann::json synth_to_dir(const SynthConfig& config, std::uint64_t seed,
                            const std::filesystem::path& out_dir);

// Loads or generates the dataset named by the config.
PreparedData prepare_data(const RunConfig& config);

// Runs the stage-wise protocol and writes run_config.json,
// stage_report.json, stages.tsv, metrics.tsv and checkpoints/ under the
// resolved output directory. Returns the stage report.
nlohmann::json train_run(RunConfig config);

// Re-scores a finished run (directory) or a single checkpoint file on the
// test split; writes evaluation.json next to it when given a directory.
nlohmann::json evaluate_run(const std::filesystem::path& run_or_checkpoint);

// Writes ablation.tsv (wide table) and cells.tsv (one row per cell).
// Returns a summary with the number of failed cells.
nlohmann::json ablate_run(RunConfig config, const AblationGrid& grid, std::size_t jobs);

// Drops fields that legitimately differ between identical runs (timings).
nlohmann::json report_metrics_only(const nlohmann::json& report);

}  // namespace kgsw
