#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgsw/dataset.hpp"
#include "kgsw/kg_store.hpp"
#include "kgsw/kgcn.hpp"
#include "kgsw/nn.hpp"
#include "kgsw/ripple_set.hpp"
#include "kgsw/ripplenet.hpp"

namespace kgsw {

enum class ModelKind { kgcn, ripplenet };
enum class TransferMode { kg_repr_only, whole_parameters };

std::string_view to_string(ModelKind k);
ModelKind model_kind_from_string(std::string_view s);
std::string_view to_string(TransferMode m);
TransferMode transfer_mode_from_string(std::string_view s);

struct ModelConfig {
  ModelKind kind = ModelKind::kgcn;
  KgcnConfig kgcn;
  RippleConfig ripple;

  // K for KGCN, M for RippleNet.
  std::size_t sample_size() const;
  std::size_t hops() const;
  void set_sample_size(std::size_t n);
  void set_hops(std::size_t h);
};

// A model bound to one graph and dataset. resample() draws the per-stage
// sampled view (stage graph for KGCN, ripple sets for RippleNet).
class Recommender {
 public:
  virtual ~Recommender() = default;

  virtual const ModelConfig& config() const = 0;
  virtual double learning_rate() const = 0;
  virtual ModelState init_state(std::uint64_t seed) const = 0;
  virtual void resample(std::uint64_t seed) = 0;
  virtual std::uint64_t sample_seed() const = 0;
  virtual double predict(const ModelState& state, UserId user, ItemId item) const = 0;
  // Objective over the batch; gradients are left in `state`.
  virtual double backward(ModelState& state, std::span<const Example> batch) const = 0;
  // Sorted distinct KG triple indices present in the current sample.
  virtual std::vector<std::uint32_t> sampled_triples() const = 0;
};

std::unique_ptr<Recommender> make_recommender(const ModelConfig& config,
                                              const KnowledgeGraph& kg,
                                              const ImplicitDataset& dataset);

struct StagePlan {
  std::size_t stages = 8;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  std::size_t batch_size = 64;
  TransferMode transfer = TransferMode::kg_repr_only;
  std::uint64_t seed = 1;

  void validate() const;
};

struct StageSeeds {
  std::uint64_t stage = 0;
  std::uint64_t sample = 0;
  std::uint64_t init = 0;
  std::uint64_t shuffle = 0;
};

// Seeds for stage s (1-based) under a plan's base seed.
StageSeeds stage_seeds(std::uint64_t base_seed, std::size_t stage);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double eval_auc = 0.0;
  double eval_acc = 0.0;
};

struct StageRecord {
  std::size_t stage = 0;
  std::uint64_t seed = 0;
  std::uint64_t sample_seed = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_eval_auc = 0.0;
  double best_eval_acc = 0.0;
  bool diverged = false;
  std::string divergence;
  std::string checkpoint_id;
  std::string parent_checkpoint;
  std::size_t sampled_triples = 0;
  std::size_t covered_triples = 0;  // union over stages so far
  double wall_seconds = 0.0;
  std::vector<EpochRecord> history;
};

struct Metrics {
  double auc = 0.0;
  double acc = 0.0;
  std::map<std::size_t, double> recall;  // k -> Recall@k
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);
void to_json(nlohmann::json& j, const StageRecord& r);
void from_json(const nlohmann::json& j, StageRecord& r);
void to_json(nlohmann::json& j, const Metrics& m);
void from_json(const nlohmann::json& j, Metrics& m);

std::string_view display_name(ModelKind k);

// Scores every example of `examples` with the model's current sample.
// Returns nullopt if any score is non-finite.
std::optional<Metrics> evaluate_ctr(const Recommender& model, const ModelState& state,
                                    const std::vector<Example>& examples);

Metrics evaluate_test(const Recommender& model, const ModelState& state,
                      const ImplicitDataset& dataset, std::span<const std::size_t> topk);

// Trains one stage with Adam and per-stage early stopping on eval AUC.
// Epoch 0 is the initial state; the best-AUC snapshot is kept.
class StageTrainer {
 public:
  StageTrainer(Recommender& model, const ImplicitDataset& dataset, ModelState init,
               const StagePlan& plan, const StageSeeds& seeds);

  bool done() const noexcept { return done_; }
  void run_epoch();
  void run();

  const ModelState& current() const noexcept { return state_; }
  const AdamState& adam() const noexcept { return adam_; }
  const StageRecord& record() const noexcept { return record_; }
  ModelState best() const { return best_; }

  // Full resumable state (parameters, Adam moments, RNG, early-stop
  // bookkeeping) as a JSON document.
  std::string save() const;
  static StageTrainer restore(Recommender& model, const ImplicitDataset& dataset,
                              const StagePlan& plan, const std::string& saved);

 private:
  StageTrainer(Recommender& model, const ImplicitDataset& dataset, const StagePlan& plan);
  void evaluate_epoch(std::size_t epoch, double train_loss);
  void mark_diverged(const std::string& why);

  Recommender* model_;
  const ImplicitDataset* dataset_;
  StagePlan plan_;
  ModelState state_;
  AdamState adam_;
  Rng rng_;
  ModelState best_;
  std::size_t bad_epochs_ = 0;
  bool done_ = false;
  StageRecord record_;
};

struct StageResult {
  ModelState params;
  StageRecord record;
};

StageResult run_stage(Recommender& model, const ImplicitDataset& dataset,
                      ModelState init, const StagePlan& plan, const StageSeeds& seeds);

// kg_repr_only copies the KG-representation tensors of `trained` into
// `fresh` (aggregator tensors keep their fresh initialization);
// whole_parameters copies every tensor. Shapes and partitions must agree.
ModelState transfer(const ModelState& trained, TransferMode mode, ModelState fresh);

struct ProtocolOptions {
  std::optional<std::filesystem::path> checkpoint_dir;
  nlohmann::json checkpoint_meta = nlohmann::json::object();
  std::vector<std::size_t> topk = {25, 50};
};

struct ProtocolResult {
  std::vector<StageRecord> stages;
  Metrics test;
  ModelState final_state;
  std::uint64_t final_sample_seed = 0;
};

// GraphSW: for s = 1..S resample, initialize (random at s = 1, transferred
// afterwards), train, checkpoint. Test metrics use the last stage's sample.
ProtocolResult run_protocol(Recommender& model, const ImplicitDataset& dataset,
                            const StagePlan& plan, const ProtocolOptions& options = {});

// Plain single-run trainer: sample once, random init, train, evaluate.
ProtocolResult train_baseline(Recommender& model, const ImplicitDataset& dataset,
                              const StagePlan& plan, const ProtocolOptions& options = {});

struct AblationGrid {
  std::vector<std::size_t> sample_sizes;  // K (KGCN) or M (RippleNet)
  std::vector<std::size_t> hops;
  std::vector<TransferMode> modes;
};

struct AblationCell {
  std::size_t sample_size = 0;
  std::size_t hops = 0;
  std::optional<TransferMode> mode;  // nullopt: S = 1 baseline
  Metrics test;
  std::size_t diverged_stages = 0;
  std::string error;  // non-empty when the cell could not run
};

// One S = 1 baseline plus one GraphSW run per transfer mode for every
// (sample size, hops) pair. Cells run on up to `jobs` threads.
std::vector<AblationCell> ablate(const ModelConfig& base, const KnowledgeGraph& kg,
                                 const ImplicitDataset& dataset, const StagePlan& plan,
                                 const AblationGrid& grid, std::size_t jobs = 1,
                                 const std::vector<std::size_t>& topk = {25, 50});

// Rows "<name>" (base), "<name>*" (kg_repr_only), "<name>*whole"
// (whole_parameters); one AUC column per grid cell.
std::string ablation_table_tsv(const std::string& dataset_name, ModelKind kind,
                               const AblationGrid& grid,
                               std::span<const AblationCell> cells);

}  // namespace kgsw
