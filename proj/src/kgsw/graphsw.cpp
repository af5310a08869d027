#include "kgsw/graphsw.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "kgsw/checkpoint.hpp"
#include "kgsw/error.hpp"
#include "kgsw/eval.hpp"
#include "kgsw/log.hpp"

namespace kgsw {

using nlohmann::json;

std::string_view to_string(ModelKind k) {
  return k == ModelKind::kgcn ? "kgcn" : "ripplenet";
}

ModelKind model_kind_from_string(std::string_view s) {
  if (s == "kgcn") return ModelKind::kgcn;
  if (s == "ripplenet") return ModelKind::ripplenet;
  throw Error(ErrorKind::config,
              "unknown model '" + std::string(s) + "' (expected kgcn or ripplenet)");
}

std::string_view display_name(ModelKind k) {
  return k == ModelKind::kgcn ? "KGCN" : "RippleNet";
}

std::string_view to_string(TransferMode m) {
  return m == TransferMode::kg_repr_only ? "kg_repr_only" : "whole_parameters";
}

TransferMode transfer_mode_from_string(std::string_view s) {
  if (s == "kg_repr_only") return TransferMode::kg_repr_only;
  if (s == "whole_parameters") return TransferMode::whole_parameters;
  throw Error(ErrorKind::config, "unknown transfer mode '" + std::string(s) +
                                     "' (expected kg_repr_only or whole_parameters)");
}

std::size_t ModelConfig::sample_size() const {
  return kind == ModelKind::kgcn ? kgcn.neighbors : ripple.memory;
}

std::size_t ModelConfig::hops() const {
  return kind == ModelKind::kgcn ? kgcn.hops : ripple.hops;
}

void ModelConfig::set_sample_size(std::size_t n) {
  (kind == ModelKind::kgcn ? kgcn.neighbors : ripple.memory) = n;
}

void ModelConfig::set_hops(std::size_t h) {
  (kind == ModelKind::kgcn ? kgcn.hops : ripple.hops) = h;
}

namespace {

class KgcnRecommender final : public Recommender {
 public:
  KgcnRecommender(const ModelConfig& config, const KnowledgeGraph& kg,
                  const ImplicitDataset& dataset)
      : config_(config), kg_(&kg), dataset_(&dataset) {
    config_.kgcn.validate();
  }

  const ModelConfig& config() const override { return config_; }
  double learning_rate() const override { return config_.kgcn.lr; }

  ModelState init_state(std::uint64_t seed) const override {
    return kgcn_init(config_.kgcn, dataset_->num_users, kg_->num_entities(),
                     kg_->num_relations(), seed);
  }

  void resample(std::uint64_t seed) override {
    graph_.emplace(sample_stage_graph(*kg_, config_.kgcn.neighbors, seed));
  }

  std::uint64_t sample_seed() const override { return graph().seed(); }

  double predict(const ModelState& state, UserId user, ItemId item) const override {
    return kgcn_forward(state, config_.kgcn, graph(), user, dataset_->entity_of(item));
  }

  double backward(ModelState& state, std::span<const Example> batch) const override {
    return kgcn_backward(state, config_.kgcn, graph(), batch, *dataset_);
  }

  std::vector<std::uint32_t> sampled_triples() const override {
    return graph().sampled_triple_indices();
  }

 private:
  const StageGraph& graph() const {
    if (!graph_) throw Error(ErrorKind::config, "no stage graph sampled; call resample first");
    return *graph_;
  }

  ModelConfig config_;
  const KnowledgeGraph* kg_;
  const ImplicitDataset* dataset_;
  std::optional<StageGraph> graph_;
};

class RippleRecommender final : public Recommender {
 public:
  RippleRecommender(const ModelConfig& config, const KnowledgeGraph& kg,
                    const ImplicitDataset& dataset)
      : config_(config), kg_(&kg), dataset_(&dataset) {
    config_.ripple.validate();
    const auto triples = kg.triples();
    for (std::uint32_t i = 0; i < triples.size(); ++i) index_.emplace(triples[i], i);
  }

  const ModelConfig& config() const override { return config_; }
  double learning_rate() const override { return config_.ripple.lr; }

  ModelState init_state(std::uint64_t seed) const override {
    return ripple_init(config_.ripple, kg_->num_entities(), kg_->num_relations(), seed);
  }

  void resample(std::uint64_t seed) override {
    ripples_ = build_ripple_sets(*kg_, *dataset_, config_.ripple.hops,
                                 config_.ripple.memory, seed);
    seed_ = seed;
    sampled_ = true;
  }

  std::uint64_t sample_seed() const override {
    check();
    return seed_;
  }

  double predict(const ModelState& state, UserId user, ItemId item) const override {
    check();
    return ripple_forward(state, config_.ripple, ripples_, user, dataset_->entity_of(item));
  }

  double backward(ModelState& state, std::span<const Example> batch) const override {
    check();
    return ripple_backward(state, config_.ripple, ripples_, batch, *dataset_);
  }

  std::vector<std::uint32_t> sampled_triples() const override {
    check();
    std::vector<std::uint32_t> out;
    for (const auto& set : ripples_) {
      for (const auto& hop : set.hops) {
        for (const auto& t : hop) {
          const auto it = index_.find(t);
          if (it != index_.end()) out.push_back(it->second);
        }
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  void check() const {
    if (!sampled_) throw Error(ErrorKind::config, "no ripple sets built; call resample first");
  }

  ModelConfig config_;
  const KnowledgeGraph* kg_;
  const ImplicitDataset* dataset_;
  std::map<Triple, std::uint32_t> index_;
  RippleSets ripples_;
  std::uint64_t seed_ = 0;
  bool sampled_ = false;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double number_or_nan(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

std::unique_ptr<Recommender> make_recommender(const ModelConfig& config,
                                              const KnowledgeGraph& kg,
                                              const ImplicitDataset& dataset) {
  if (dataset.item_to_entity.size() != dataset.num_items) {
    throw Error(ErrorKind::config, "dataset item/entity map does not cover every item");
  }
  for (const EntityId e : dataset.item_to_entity) {
    if (e >= kg.num_entities()) {
      throw Error(ErrorKind::lookup, "item entity " + std::to_string(e) + " is not in the graph");
    }
  }
  if (config.kind == ModelKind::kgcn) {
    return std::make_unique<KgcnRecommender>(config, kg, dataset);
  }
  return std::make_unique<RippleRecommender>(config, kg, dataset);
}

void StagePlan::validate() const {
  if (stages == 0) throw Error(ErrorKind::config, "stages must be >= 1");
  if (max_epochs == 0) throw Error(ErrorKind::config, "max_epochs must be >= 1");
  if (patience == 0) throw Error(ErrorKind::config, "patience must be >= 1");
  if (batch_size == 0) throw Error(ErrorKind::config, "batch_size must be >= 1");
}

StageSeeds stage_seeds(std::uint64_t base_seed, std::size_t stage) {
  StageSeeds s;
  s.stage = mix_seed(base_seed, stage);
  s.sample = mix_seed(s.stage, 0);
  s.init = mix_seed(s.stage, 1);
  s.shuffle = mix_seed(s.stage, 2);
  return s;
}

void to_json(json& j, const EpochRecord& r) {
  j = {{"epoch", r.epoch},
       {"train_loss", finite_or_null(r.train_loss)},
       {"eval_auc", r.eval_auc},
       {"eval_acc", r.eval_acc}};
}

void from_json(const json& j, EpochRecord& r) {
  r.epoch = j.at("epoch").get<std::size_t>();
  r.train_loss = number_or_nan(j.at("train_loss"));
  r.eval_auc = j.at("eval_auc").get<double>();
  r.eval_acc = j.at("eval_acc").get<double>();
}

void to_json(json& j, const StageRecord& r) {
  j = {{"stage", r.stage},
       {"seed", r.seed},
       {"sample_seed", r.sample_seed},
       {"epochs_run", r.epochs_run},
       {"best_epoch", r.best_epoch},
       {"best_eval_auc", r.best_eval_auc},
       {"best_eval_acc", r.best_eval_acc},
       {"diverged", r.diverged},
       {"divergence", r.divergence},
       {"checkpoint_id", r.checkpoint_id},
       {"parent_checkpoint", r.parent_checkpoint},
       {"sampled_triples", r.sampled_triples},
       {"covered_triples", r.covered_triples},
       {"wall_seconds", r.wall_seconds},
       {"history", r.history}};
}

void from_json(const json& j, StageRecord& r) {
  r.stage = j.at("stage").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.sample_seed = j.at("sample_seed").get<std::uint64_t>();
  r.epochs_run = j.at("epochs_run").get<std::size_t>();
  r.best_epoch = j.at("best_epoch").get<std::size_t>();
  r.best_eval_auc = j.at("best_eval_auc").get<double>();
  r.best_eval_acc = j.at("best_eval_acc").get<double>();
  r.diverged = j.at("diverged").get<bool>();
  r.divergence = j.value("divergence", "");
  r.checkpoint_id = j.value("checkpoint_id", "");
  r.parent_checkpoint = j.value("parent_checkpoint", "");
  r.sampled_triples = j.value("sampled_triples", std::size_t{0});
  r.covered_triples = j.value("covered_triples", std::size_t{0});
  r.wall_seconds = j.value("wall_seconds", 0.0);
  r.history = j.at("history").get<std::vector<EpochRecord>>();
}

void to_json(json& j, const Metrics& m) {
  json recall = json::object();
  for (const auto& [k, v] : m.recall) recall[std::to_string(k)] = v;
  j = {{"auc", m.auc}, {"acc", m.acc}, {"recall", recall}};
}

void from_json(const json& j, Metrics& m) {
  m.auc = j.at("auc").get<double>();
  m.acc = j.at("acc").get<double>();
  m.recall.clear();
  for (const auto& [k, v] : j.at("recall").items()) {
    m.recall[std::stoul(k)] = v.get<double>();
  }
}

std::optional<Metrics> evaluate_ctr(const Recommender& model, const ModelState& state,
                                    const std::vector<Example>& examples) {
  std::vector<ScoredExample> scored;
  scored.reserve(examples.size());
  for (const auto& ex : examples) {
    double p = 0.0;
    try {
      p = model.predict(state, ex.user, ex.item);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::numeric) return std::nullopt;
      throw;
    }
    if (!std::isfinite(p)) return std::nullopt;
    scored.push_back({ex.user, ex.item, ex.label, p});
  }
  Metrics m;
  m.auc = auc(scored);
  m.acc = acc(scored);
  return m;
}

Metrics evaluate_test(const Recommender& model, const ModelState& state,
                      const ImplicitDataset& dataset, std::span<const std::size_t> topk) {
  auto ctr = evaluate_ctr(model, state, dataset.split.test);
  if (!ctr) throw Error(ErrorKind::numeric, "non-finite score on the test split");
  Metrics m = *ctr;
  if (topk.empty()) return m;

  const auto train_pos = positives_by_user(dataset.split.train, dataset.num_users);
  const auto eval_pos = positives_by_user(dataset.split.eval, dataset.num_users);
  const auto test_pos = positives_by_user(dataset.split.test, dataset.num_users);
  std::vector<UserRanking> rankings;
  for (UserId u = 0; u < dataset.num_users; ++u) {
    if (test_pos[u].empty()) continue;
    UserRanking r;
    r.item_scores.resize(dataset.num_items);
    for (ItemId i = 0; i < dataset.num_items; ++i) {
      r.item_scores[i] = model.predict(state, u, i);
    }
    r.excluded = train_pos[u];
    r.excluded.insert(r.excluded.end(), eval_pos[u].begin(), eval_pos[u].end());
    r.test_positives = test_pos[u];
    rankings.push_back(std::move(r));
  }
  for (const std::size_t k : topk) m.recall[k] = recall_at_k(rankings, k);
  return m;
}

StageTrainer::StageTrainer(Recommender& model, const ImplicitDataset& dataset,
                           const StagePlan& plan)
    : model_(&model), dataset_(&dataset), plan_(plan) {
  plan_.validate();
}

StageTrainer::StageTrainer(Recommender& model, const ImplicitDataset& dataset,
                           ModelState init, const StagePlan& plan, const StageSeeds& seeds)
    : StageTrainer(model, dataset, plan) {
  state_ = std::move(init);
  adam_ = AdamState::fresh(state_, model.learning_rate());
  rng_.seed(seeds.shuffle);
  best_ = state_;
  record_.seed = seeds.stage;
  record_.sample_seed = model.sample_seed();
  evaluate_epoch(0, std::numeric_limits<double>::quiet_NaN());
}

void StageTrainer::mark_diverged(const std::string& why) {
  record_.diverged = true;
  record_.divergence = why;
  done_ = true;
  warn("stage diverged: " + why);
}

void StageTrainer::evaluate_epoch(std::size_t epoch, double train_loss) {
  record_.epochs_run = epoch;
  const auto m = evaluate_ctr(*model_, state_, dataset_->split.eval);
  if (!m) {
    mark_diverged("non-finite eval score at epoch " + std::to_string(epoch));
    return;
  }
  record_.history.push_back({epoch, train_loss, m->auc, m->acc});
  if (epoch == 0 || m->auc > record_.best_eval_auc) {
    best_ = state_;
    record_.best_epoch = epoch;
    record_.best_eval_auc = m->auc;
    record_.best_eval_acc = m->acc;
    bad_epochs_ = 0;
  } else {
    ++bad_epochs_;
  }
  if (bad_epochs_ >= plan_.patience || epoch >= plan_.max_epochs) done_ = true;
}

void StageTrainer::run_epoch() {
  if (done_) return;
  const auto& train = dataset_->split.train;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng_);

  const std::size_t epoch = record_.epochs_run + 1;
  double loss_sum = 0.0;
  std::size_t batches = 0;
  std::vector<Example> batch;
  try {
    for (std::size_t start = 0; start < order.size(); start += plan_.batch_size) {
      const std::size_t end = std::min(order.size(), start + plan_.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);
      loss_sum += model_->backward(state_, batch);
      adam_step(state_, adam_);
      ++batches;
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::numeric) throw;
    record_.epochs_run = epoch;
    mark_diverged(std::string(e.what()) + " at epoch " + std::to_string(epoch));
    return;
  }
  const double loss = batches ? loss_sum / double(batches) : 0.0;
  if (!std::isfinite(loss)) {
    record_.epochs_run = epoch;
    mark_diverged("non-finite training loss at epoch " + std::to_string(epoch));
    return;
  }
  evaluate_epoch(epoch, loss);
}

void StageTrainer::run() {
  while (!done_) run_epoch();
}

std::string StageTrainer::save() const {
  json j = {{"format", "kgsw.stage_trainer"},
            {"version", 1},
            {"state", state_to_json(state_)},
            {"adam", adam_to_json(adam_, state_)},
            {"rng", serialize_rng(rng_)},
            {"best", state_to_json(best_)},
            {"bad_epochs", bad_epochs_},
            {"done", done_},
            {"record", record_}};
  return j.dump();
}

StageTrainer StageTrainer::restore(Recommender& model, const ImplicitDataset& dataset,
                                   const StagePlan& plan, const std::string& saved) {
  StageTrainer t(model, dataset, plan);
  try {
    const json j = json::parse(saved);
    if (j.at("format").get<std::string>() != "kgsw.stage_trainer") {
      throw Error(ErrorKind::parse, "not a saved stage trainer");
    }
    t.state_ = state_from_json(j.at("state"));
    t.adam_ = adam_from_json(j.at("adam"), t.state_);
    t.rng_ = deserialize_rng(j.at("rng").get<std::string>());
    t.best_ = state_from_json(j.at("best"));
    t.bad_epochs_ = j.at("bad_epochs").get<std::size_t>();
    t.done_ = j.at("done").get<bool>();
    t.record_ = j.at("record").get<StageRecord>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("malformed stage trainer state: ") + e.what());
  }
  if (t.record_.sample_seed != model.sample_seed()) {
    throw Error(ErrorKind::config, "saved trainer was built on a different sample (seed " +
                                       std::to_string(t.record_.sample_seed) + ")");
  }
  return t;
}

StageResult run_stage(Recommender& model, const ImplicitDataset& dataset, ModelState init,
                      const StagePlan& plan, const StageSeeds& seeds) {
  StageTrainer trainer(model, dataset, std::move(init), plan, seeds);
  trainer.run();
  return {trainer.best(), trainer.record()};
}

ModelState transfer(const ModelState& trained, TransferMode mode, ModelState fresh) {
  auto wanted = [&](const Parameter& p) {
    return mode == TransferMode::whole_parameters || p.partition() == Partition::kg_repr;
  };
  for (const auto& src : trained.params()) {
    if (wanted(src) && !fresh.find(src.name())) {
      throw Error(ErrorKind::partition_mismatch,
                  "fresh state has no tensor '" + src.name() + "'");
    }
  }
  for (auto& dst : fresh.params()) {
    if (!wanted(dst)) continue;
    const Parameter* src = trained.find(dst.name());
    if (!src) {
      throw Error(ErrorKind::partition_mismatch,
                  "trained state has no tensor '" + dst.name() + "'");
    }
    if (src->partition() != dst.partition() || src->rows() != dst.rows() ||
        src->cols() != dst.cols()) {
      throw Error(ErrorKind::partition_mismatch,
                  "tensor '" + dst.name() + "' differs in partition or shape (" +
                      std::to_string(src->rows()) + "x" + std::to_string(src->cols()) +
                      " vs " + std::to_string(dst.rows()) + "x" +
                      std::to_string(dst.cols()) + ")");
    }
    std::copy(src->values().begin(), src->values().end(), dst.values().begin());
  }
  return fresh;
}

namespace {

void save_stage_checkpoint(const ProtocolOptions& options, const StageRecord& record,
                           const ModelState& params, const Recommender& model) {
  if (!options.checkpoint_dir) return;
  Checkpoint ckpt;
  ckpt.id = record.checkpoint_id;
  ckpt.parent = record.parent_checkpoint;
  ckpt.meta = options.checkpoint_meta;
  ckpt.meta["model"] = std::string(to_string(model.config().kind));
  ckpt.meta["stage"] = record.stage;
  ckpt.meta["stage_seed"] = record.seed;
  ckpt.meta["sample_seed"] = record.sample_seed;
  ckpt.state = params;
  save_checkpoint(*options.checkpoint_dir / (record.checkpoint_id + ".json"), ckpt);
}

}  // namespace

ProtocolResult run_protocol(Recommender& model, const ImplicitDataset& dataset,
                            const StagePlan& plan, const ProtocolOptions& options) {
  plan.validate();
  ProtocolResult out;
  ModelState previous;
  std::string parent;
  std::vector<std::uint32_t> covered;
  for (std::size_t s = 1; s <= plan.stages; ++s) {
    const auto t0 = std::chrono::steady_clock::now();
    const StageSeeds seeds = stage_seeds(plan.seed, s);
    model.resample(seeds.sample);
    ModelState init = model.init_state(seeds.init);
    if (s > 1) init = transfer(previous, plan.transfer, std::move(init));
    StageResult result = run_stage(model, dataset, std::move(init), plan, seeds);

    auto& record = result.record;
    record.stage = s;
    record.checkpoint_id = "stage-" + std::to_string(s);
    record.parent_checkpoint = parent;
    const auto sampled = model.sampled_triples();
    record.sampled_triples = sampled.size();
    std::vector<std::uint32_t> merged;
    std::set_union(covered.begin(), covered.end(), sampled.begin(), sampled.end(),
                   std::back_inserter(merged));
    covered = std::move(merged);
    record.covered_triples = covered.size();
    record.wall_seconds = seconds_since(t0);
    save_stage_checkpoint(options, record, result.params, model);

    previous = std::move(result.params);
    parent = record.checkpoint_id;
    out.stages.push_back(std::move(record));
  }
  out.final_sample_seed = model.sample_seed();
  out.test = evaluate_test(model, previous, dataset, options.topk);
  out.final_state = std::move(previous);
  return out;
}

ProtocolResult train_baseline(Recommender& model, const ImplicitDataset& dataset,
                              const StagePlan& plan, const ProtocolOptions& options) {
  plan.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const StageSeeds seeds = stage_seeds(plan.seed, 1);
  model.resample(seeds.sample);
  ModelState state = model.init_state(seeds.init);
  AdamState adam = AdamState::fresh(state, model.learning_rate());
  Rng rng(seeds.shuffle);

  StageRecord record;
  record.stage = 1;
  record.seed = seeds.stage;
  record.sample_seed = model.sample_seed();
  record.checkpoint_id = "stage-1";

  const auto& train = dataset.split.train;
  ModelState best = state;
  double best_auc = -1.0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch <= plan.max_epochs; ++epoch) {
    double mean_loss = std::numeric_limits<double>::quiet_NaN();
    if (epoch > 0) {
      std::vector<std::size_t> order(train.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      double total = 0.0;
      std::size_t steps = 0;
      for (std::size_t start = 0; start < order.size(); start += plan.batch_size) {
        std::vector<Example> batch;
        for (std::size_t i = start; i < std::min(order.size(), start + plan.batch_size); ++i) {
          batch.push_back(train[order[i]]);
        }
        total += model.backward(state, batch);
        adam_step(state, adam);
        ++steps;
      }
      mean_loss = steps ? total / double(steps) : 0.0;
    }
    record.epochs_run = epoch;
    const auto m = evaluate_ctr(model, state, dataset.split.eval);
    if (!m) throw Error(ErrorKind::numeric, "non-finite eval score at epoch " + std::to_string(epoch));
    record.history.push_back({epoch, mean_loss, m->auc, m->acc});
    if (m->auc > best_auc) {
      best = state;
      best_auc = m->auc;
      record.best_epoch = epoch;
      record.best_eval_auc = m->auc;
      record.best_eval_acc = m->acc;
      since_best = 0;
    } else if (++since_best >= plan.patience) {
      break;
    }
  }
  const auto sampled = model.sampled_triples();
  record.sampled_triples = record.covered_triples = sampled.size();
  record.wall_seconds = seconds_since(t0);
  save_stage_checkpoint(options, record, best, model);

  ProtocolResult out;
  out.stages.push_back(std::move(record));
  out.final_sample_seed = model.sample_seed();
  out.test = evaluate_test(model, best, dataset, options.topk);
  out.final_state = std::move(best);
  return out;
}

std::vector<AblationCell> ablate(const ModelConfig& base, const KnowledgeGraph& kg,
                                 const ImplicitDataset& dataset, const StagePlan& plan,
                                 const AblationGrid& grid, std::size_t jobs,
                                 const std::vector<std::size_t>& topk) {
  plan.validate();
  if (grid.sample_sizes.empty() || grid.hops.empty()) {
    throw Error(ErrorKind::config, "ablation grid needs at least one sample size and one hop count");
  }
  std::vector<AblationCell> cells;
  for (const std::size_t n : grid.sample_sizes) {
    for (const std::size_t h : grid.hops) {
      cells.push_back({n, h, std::nullopt, {}, 0, {}});
      for (const TransferMode m : grid.modes) cells.push_back({n, h, m, {}, 0, {}});
    }
  }

  auto run_cell = [&](AblationCell& cell) {
    try {
      ModelConfig config = base;
      config.set_sample_size(cell.sample_size);
      config.set_hops(cell.hops);
      auto model = make_recommender(config, kg, dataset);
      StagePlan cell_plan = plan;
      if (cell.mode) {
        cell_plan.transfer = *cell.mode;
      } else {
        cell_plan.stages = 1;
      }
      ProtocolOptions options;
      options.topk = topk;
      const auto result = run_protocol(*model, dataset, cell_plan, options);
      cell.test = result.test;
      for (const auto& s : result.stages) cell.diverged_stages += s.diverged ? 1 : 0;
    } catch (const std::exception& e) {
      cell.error = e.what();
      warn("ablation cell failed: " + cell.error);
    }
  };

  jobs = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  if (jobs == 1) {
    for (auto& c : cells) run_cell(c);
    return cells;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i]);
    });
  }
  for (auto& t : workers) t.join();
  return cells;
}

std::string ablation_table_tsv(const std::string& dataset_name, ModelKind kind,
                               const AblationGrid& grid,
                               std::span<const AblationCell> cells) {
  const char size_name = kind == ModelKind::kgcn ? 'K' : 'M';
  std::ostringstream os;
  os << "dataset\tmodel";
  for (const std::size_t n : grid.sample_sizes) {
    for (const std::size_t h : grid.hops) os << '\t' << size_name << n << "_H" << h;
  }
  os << '\n';

  auto row = [&](const std::string& label, std::optional<TransferMode> mode) {
    os << dataset_name << '\t' << label;
    for (const std::size_t n : grid.sample_sizes) {
      for (const std::size_t h : grid.hops) {
        const auto it = std::find_if(cells.begin(), cells.end(), [&](const AblationCell& c) {
          return c.sample_size == n && c.hops == h && c.mode == mode;
        });
        os << '\t';
        if (it == cells.end() || !it->error.empty()) {
          os << "NA";
        } else {
          os << std::fixed << std::setprecision(4) << it->test.auc;
        }
      }
    }
    os << '\n';
  };
  const std::string name(display_name(kind));
  row(name, std::nullopt);
  for (const TransferMode m : grid.modes) {
    row(m == TransferMode::kg_repr_only ? name + "*" : name + "*whole", m);
  }
  return os.str();
}

}  // namespace kgsw
