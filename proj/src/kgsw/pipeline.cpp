#include "kgsw/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "kgsw/checkpoint.hpp"
#include "kgsw/error.hpp"
#include "kgsw/log.hpp"
#include "kgsw/tsv.hpp"

namespace kgsw {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

void write_examples(const fs::path& path, const std::vector<Example>& examples) {
  auto out = open_out(path);
  for (const auto& e : examples) out << e.user << '\t' << e.item << '\t' << int(e.label) << '\n';
}

std::vector<Example> read_examples(const fs::path& path, const ImplicitDataset& ds) {
  std::vector<Example> out;
  if (!fs::exists(path)) throw Error(ErrorKind::io, "missing file " + path.string());
  for_each_tsv_row(path, 3, [&](std::span<const std::string_view> f, std::size_t line) {
    const Example e{parse_id(f[0], path, line), parse_id(f[1], path, line),
                    static_cast<std::uint8_t>(parse_id(f[2], path, line))};
    if (e.user >= ds.num_users || e.item >= ds.num_items || e.label > 1) {
      throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(line) +
                                        ": id or label out of range");
    }
    out.push_back(e);
  });
  return out;
}

void write_names(const fs::path& path, const std::vector<std::string>& names) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < names.size(); ++i) out << i << '\t' << names[i] << '\n';
}

std::string recall_header(const std::vector<std::size_t>& topk) {
  std::string h;
  for (const auto k : topk) h += "\trecall@" + std::to_string(k);
  return h;
}

void write_metrics_tsv(const fs::path& path, const Metrics& m,
                       const std::vector<std::size_t>& topk) {
  auto out = open_out(path);
  out << "#schema=" << kMetricsSchema << '\n';
  out << "split\tauc\tacc" << recall_header(topk) << '\n';
  out << "test\t" << m.auc << '\t' << m.acc;
  for (const auto k : topk) out << '\t' << m.recall.at(k);
  out << '\n';
}

std::string run_name(const RunConfig& c, const char* command) {
  return std::string(command) + "-" + std::string(to_string(c.model.kind)) + "-seed" +
         std::to_string(c.seed);
}

}  // namespace

json to_json(const DatasetStats& s) {
  return {{"schema", kStatsSchema},
          {"users", s.users},
          {"items", s.items},
          {"interactions", s.interactions},
          {"avg_clicks_per_user", s.avg_clicks_per_user},
          {"avg_clicks_per_item", s.avg_clicks_per_item},
          {"entities", s.entities},
          {"relations", s.relations},
          {"triples", s.triples}};
}

void write_dataset_dir(const fs::path& dir, const IngestResult& ingest,
                       const KnowledgeGraph& kg, const std::string& rule,
                       std::uint64_t seed) {
  fs::create_directories(dir);
  const auto& ds = ingest.dataset;
  save_kg(kg, dir / "kg.tsv");
  write_examples(dir / "train.tsv", ds.split.train);
  write_examples(dir / "eval.tsv", ds.split.eval);
  write_examples(dir / "test.tsv", ds.split.test);
  {
    auto out = open_out(dir / "item_entity.tsv");
    for (std::size_t i = 0; i < ds.item_to_entity.size(); ++i) {
      out << i << '\t' << ds.item_to_entity[i] << '\n';
    }
  }
  write_names(dir / "users.tsv", ingest.user_names);
  write_names(dir / "items.tsv", ingest.item_names);

  const json stats = to_json(ingest.stats);
  write_json_file(dir / "stats.json", stats);
  {
    auto out = open_out(dir / "stats.tsv");
    out << "#schema=" << kStatsSchema << '\n' << "field\tvalue\n";
    for (const auto& [k, v] : stats.items()) {
      if (k != "schema") out << k << '\t' << v.dump() << '\n';
    }
  }
  write_json_file(dir / "meta.json", {{"schema", kDatasetSchema},
                                      {"rule", rule},
                                      {"seed", seed},
                                      {"num_users", ds.num_users},
                                      {"num_items", ds.num_items},
                                      {"num_entities", kg.num_entities()},
                                      {"num_relations", kg.num_relations()},
                                      {"dropped_items", ingest.dropped_items}});
}

PreparedData load_dataset_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::io, "not a dataset directory: " + dir.string());
  const json meta = read_json_file(dir / "meta.json");
  if (meta.value("schema", "") != kDatasetSchema) {
    throw Error(ErrorKind::parse, (dir / "meta.json").string() + ": unsupported dataset schema");
  }
  const KnowledgeGraph loaded = load_kg(dir / "kg.tsv");
  KnowledgeGraph kg(std::vector<Triple>(loaded.triples().begin(), loaded.triples().end()),
                    meta.at("num_entities").get<std::size_t>(),
                    meta.at("num_relations").get<std::size_t>());
  ImplicitDataset ds;
  ds.num_users = meta.at("num_users").get<std::size_t>();
  ds.num_items = meta.at("num_items").get<std::size_t>();
  ds.item_to_entity.assign(ds.num_items, 0);
  std::vector<char> seen(ds.num_items, 0);
  const fs::path map_path = dir / "item_entity.tsv";
  for_each_tsv_row(map_path, 2, [&](std::span<const std::string_view> f, std::size_t line) {
    const auto item = parse_id(f[0], map_path, line);
    if (item >= ds.num_items) {
      throw Error(ErrorKind::parse, map_path.string() + ":" + std::to_string(line) +
                                        ": item id out of range");
    }
    ds.item_to_entity[item] = parse_id(f[1], map_path, line);
    seen[item] = 1;
  });
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw Error(ErrorKind::parse, map_path.string() + ": no entity for item " + std::to_string(i));
  }
  ds.split.train = read_examples(dir / "train.tsv", ds);
  ds.split.eval = read_examples(dir / "eval.tsv", ds);
  ds.split.test = read_examples(dir / "test.tsv", ds);

  const json st = read_json_file(dir / "stats.json");
  DatasetStats stats;
  stats.users = st.at("users").get<std::size_t>();
  stats.items = st.at("items").get<std::size_t>();
  stats.interactions = st.at("interactions").get<std::size_t>();
  stats.avg_clicks_per_user = st.at("avg_clicks_per_user").get<double>();
  stats.avg_clicks_per_item = st.at("avg_clicks_per_item").get<double>();
  stats.entities = st.at("entities").get<std::size_t>();
  stats.relations = st.at("relations").get<std::size_t>();
  stats.triples = st.at("triples").get<std::size_t>();
  return {std::move(kg), std::move(ds), stats, meta.at("rule").get<std::string>()};
}

json ingest_to_dir(const IngestRequest& r) {
  const DatasetRule& rule = find_dataset_rule(r.rule);
  for (const auto& p : {r.ratings, r.kg, r.item_entity}) {
    if (!fs::exists(p)) throw Error(ErrorKind::io, "no such file: " + p.string());
  }
  const KnowledgeGraph kg = load_kg(r.kg);
  const InteractionLog log = load_interaction_log(r.ratings);
  const auto item_map = load_item_entity_map(r.item_entity);
  const IngestResult ingest = build_implicit_dataset(log, rule, item_map, kg, r.seed);
  write_dataset_dir(r.out_dir, ingest, kg, rule.name, r.seed);
  return to_json(ingest.stats);
}

json synth_to_dir(const SynthConfig& config, std::uint64_t seed, const fs::path& out_dir) {
  const SynthData synth = synth_generate(config);
  const IngestResult ingest = build_implicit_dataset(
      synth.log, find_dataset_rule("synth"), synth.item_to_entity, synth.kg, seed);
  write_dataset_dir(out_dir, ingest, synth.kg, "synth", seed);
  write_json_file(out_dir / "synth_config.json", to_json(config));
  return to_json(ingest.stats);
}

PreparedData prepare_data(const RunConfig& config) {
  config.validate();
  if (config.data.path) return load_dataset_dir(*config.data.path);
  SynthData synth = synth_generate(*config.data.synth);
  IngestResult ingest = build_implicit_dataset(synth.log, find_dataset_rule("synth"),
                                               synth.item_to_entity, synth.kg, config.seed);
  return {std::move(synth.kg), std::move(ingest.dataset), ingest.stats, "synth"};
}

json train_run(RunConfig config) {
  config.validate();
  config.plan.seed = config.seed;
  const PreparedData data = prepare_data(config);
  const fs::path dir = resolve_output_dir(config.output_dir, run_name(config, "train"));
  config.output_dir = dir;
  fs::create_directories(dir / "checkpoints");
  const json config_json = to_json(config);
  write_json_file(dir / "run_config.json", config_json);

  auto model = make_recommender(config.model, data.kg, data.dataset);
  ProtocolOptions options;
  options.checkpoint_dir = dir / "checkpoints";
  options.checkpoint_meta = {{"run_config", config_json}};
  options.topk = config.topk;
  const ProtocolResult result = run_protocol(*model, data.dataset, config.plan, options);

  std::size_t diverged = 0;
  for (const auto& s : result.stages) diverged += s.diverged ? 1 : 0;
  const json report = {{"schema", kStageReportSchema},
                       {"model", std::string(to_string(config.model.kind))},
                       {"dataset", data.name},
                       {"seed", config.seed},
                       {"stages", result.stages},
                       {"diverged_stages", diverged},
                       {"final_checkpoint", result.stages.back().checkpoint_id},
                       {"final_sample_seed", result.final_sample_seed},
                       {"test", result.test}};
  write_json_file(dir / "stage_report.json", report);
  {
    auto out = open_out(dir / "stages.tsv");
    out << "#schema=" << kStageReportSchema << '\n'
        << "stage\tepochs\tbest_epoch\teval_auc\teval_acc\tdiverged\tsampled_triples\tcovered_triples\n";
    for (const auto& s : result.stages) {
      out << s.stage << '\t' << s.epochs_run << '\t' << s.best_epoch << '\t' << s.best_eval_auc
          << '\t' << s.best_eval_acc << '\t' << (s.diverged ? 1 : 0) << '\t'
          << s.sampled_triples << '\t' << s.covered_triples << '\n';
    }
  }
  write_metrics_tsv(dir / "metrics.tsv", result.test, config.topk);
  return report;
}

json evaluate_run(const fs::path& target) {
  fs::path ckpt_path = target;
  const bool is_dir = fs::is_directory(target);
  if (is_dir) {
    const json report = read_json_file(target / "stage_report.json");
    ckpt_path = target / "checkpoints" / (report.at("final_checkpoint").get<std::string>() + ".json");
  }
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (!ckpt.meta.contains("run_config")) {
    throw Error(ErrorKind::parse, ckpt_path.string() + ": checkpoint carries no run config");
  }
  const RunConfig config = run_config_from_json(ckpt.meta.at("run_config"));
  const PreparedData data = prepare_data(config);
  auto model = make_recommender(config.model, data.kg, data.dataset);
  model->resample(ckpt.meta.at("sample_seed").get<std::uint64_t>());
  const Metrics m = evaluate_test(*model, ckpt.state, data.dataset, config.topk);
  const json out = {{"schema", kEvaluationSchema},
                    {"checkpoint", ckpt_path.string()},
                    {"checkpoint_id", ckpt.id},
                    {"test", m}};
  if (is_dir) write_json_file(target / "evaluation.json", out);
  return out;
}

json ablate_run(RunConfig config, const AblationGrid& grid, std::size_t jobs) {
  config.validate();
  config.plan.seed = config.seed;
  const PreparedData data = prepare_data(config);
  const fs::path dir = resolve_output_dir(config.output_dir, run_name(config, "ablate"));
  config.output_dir = dir;
  fs::create_directories(dir);
  json config_json = to_json(config);
  json grid_json = {{"sample_sizes", grid.sample_sizes}, {"hops", grid.hops}, {"modes", json::array()}};
  for (const auto m : grid.modes) grid_json["modes"].push_back(std::string(to_string(m)));
  config_json["grid"] = grid_json;
  write_json_file(dir / "run_config.json", config_json);

  const auto cells = ablate(config.model, data.kg, data.dataset, config.plan, grid, jobs, config.topk);
  {
    auto out = open_out(dir / "ablation.tsv");
    out << "#schema=" << kAblationSchema << '\n'
        << ablation_table_tsv(data.name, config.model.kind, grid, cells);
  }
  std::size_t failed = 0;
  json cells_json = json::array();
  {
    auto out = open_out(dir / "cells.tsv");
    out << "#schema=" << kAblationSchema << '\n'
        << "sample_size\thops\tmode\tauc\tacc" << recall_header(config.topk)
        << "\tdiverged_stages\terror\n";
    for (const auto& c : cells) {
      const std::string mode = c.mode ? std::string(to_string(*c.mode)) : "base";
      out << c.sample_size << '\t' << c.hops << '\t' << mode << '\t';
      if (c.error.empty()) {
        out << c.test.auc << '\t' << c.test.acc;
        for (const auto k : config.topk) out << '\t' << c.test.recall.at(k);
      } else {
        ++failed;
        out << "NA\tNA";
        for (std::size_t i = 0; i < config.topk.size(); ++i) out << "\tNA";
      }
      out << '\t' << c.diverged_stages << '\t' << c.error << '\n';
      json cj = {{"sample_size", c.sample_size}, {"hops", c.hops}, {"mode", mode},
                 {"diverged_stages", c.diverged_stages}, {"error", c.error}};
      if (c.error.empty()) cj["test"] = c.test;
      cells_json.push_back(cj);
    }
  }
  return {{"schema", kAblationSchema},
          {"dataset", data.name},
          {"output_dir", dir.string()},
          {"cells", cells_json},
          {"failed_cells", failed}};
}

json report_metrics_only(const json& report) {
  json out = report;
  if (out.contains("stages")) {
    for (auto& s : out["stages"]) s.erase("wall_seconds");
  }
  return out;
}

}  // namespace kgsw
