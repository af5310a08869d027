// kgsw command-line front end. Talks to the library only through kgsw.h.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgsw/kgsw.h"

using nlohmann::json;

namespace {

struct CallFailed {
  int code;
};

// Runs a document-style C call, returning the parsed result or throwing
// CallFailed after printing the library error.
json call(kgsw_status (*fn)(const char*, char**), const std::string& request) {
  char* out = nullptr;
  const kgsw_status s = fn(request.c_str(), &out);
  if (s != KGSW_OK) {
    std::cerr << "error (" << kgsw_status_string(s) << "): " << kgsw_last_error() << '\n';
    throw CallFailed{1};
  }
  json result = json::parse(out);
  kgsw_free_string(out);
  return result;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open " << path << '\n';
    throw CallFailed{1};
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    std::cerr << "error: " << path << ": " << e.what() << '\n';
    throw CallFailed{1};
  }
}

// Flags shared by train and ablate. Unset options leave the config alone.
struct RunFlags {
  std::string config_file;
  std::string model;
  std::string data;
  bool synth = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> dim, hops, sample, stages, max_epochs, patience, batch_size;
  std::optional<double> lr, l2, kge_weight;
  std::string aggregator, transfer, out;
  std::vector<std::size_t> topk;
  std::optional<std::size_t> synth_users, synth_items, synth_entities, synth_relations;
  std::optional<double> synth_density;
  std::optional<std::uint64_t> synth_seed;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "run config JSON (flags override it)")
        ->check(CLI::ExistingFile);
    app->add_option("--model", model, "kgcn or ripplenet");
    app->add_option("--data", data, "canonical dataset directory");
    app->add_flag("--synth", synth, "generate a synthetic dataset in memory");
    app->add_option("--synth-users", synth_users);
    app->add_option("--synth-items", synth_items);
    app->add_option("--synth-entities", synth_entities);
    app->add_option("--synth-relations", synth_relations);
    app->add_option("--synth-density", synth_density);
    app->add_option("--synth-seed", synth_seed);
    app->add_option("--seed", seed, "global seed");
    app->add_option("--dim", dim);
    app->add_option("--hops,-H", hops);
    app->add_option("--sample-size,-K,-M", sample, "neighbors (KGCN) or ripple memory (RippleNet)");
    app->add_option("--aggregator", aggregator, "sum, concat or neighbor");
    app->add_option("--lr", lr);
    app->add_option("--l2", l2);
    app->add_option("--kge-weight", kge_weight);
    app->add_option("--stages,-S", stages);
    app->add_option("--max-epochs", max_epochs);
    app->add_option("--patience", patience);
    app->add_option("--batch-size", batch_size);
    app->add_option("--transfer", transfer, "kg_repr_only or whole_parameters");
    app->add_option("--topk", topk, "Recall@k cutoffs")->delimiter(',');
    app->add_option("--out,-o", out, "output directory");
  }

  json overrides() const {
    json j = config_file.empty() ? json::object() : read_json(config_file);
    if (!model.empty()) j["model"] = model;
    const std::string section = j.value("model", std::string("kgcn")) == "ripplenet" ? "ripplenet" : "kgcn";
    if (!data.empty()) j["data"] = {{"path", data}};
    const bool any_synth = synth || synth_users || synth_items || synth_entities ||
                           synth_relations || synth_density || synth_seed;
    if (any_synth) {
      json s = j.contains("data") && j["data"].contains("synth") ? j["data"]["synth"] : json::object();
      if (synth_users) s["num_users"] = *synth_users;
      if (synth_items) s["num_items"] = *synth_items;
      if (synth_entities) s["num_entities"] = *synth_entities;
      if (synth_relations) s["num_relations"] = *synth_relations;
      if (synth_density) s["density"] = *synth_density;
      if (synth_seed) s["seed"] = *synth_seed;
      j["data"] = {{"synth", s}};
    }
    if (seed) j["seed"] = *seed;
    if (dim) j[section]["dim"] = *dim;
    if (hops) j[section]["hops"] = *hops;
    if (sample) j[section][section == "kgcn" ? "neighbors" : "memory"] = *sample;
    if (!aggregator.empty()) j["kgcn"]["aggregator"] = aggregator;
    if (lr) j[section]["lr"] = *lr;
    if (l2) j[section]["l2"] = *l2;
    if (kge_weight) j["ripplenet"]["kge_weight"] = *kge_weight;
    if (stages) j["plan"]["stages"] = *stages;
    if (max_epochs) j["plan"]["max_epochs"] = *max_epochs;
    if (patience) j["plan"]["patience"] = *patience;
    if (batch_size) j["plan"]["batch_size"] = *batch_size;
    if (!transfer.empty()) j["plan"]["transfer"] = transfer;
    if (!topk.empty()) j["topk"] = topk;
    if (!out.empty()) j["output_dir"] = out;
    return j;
  }
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

void print_metrics(const json& m) {
  std::cout << "test auc " << fmt(m.at("auc").get<double>()) << "  acc "
            << fmt(m.at("acc").get<double>());
  for (const auto& [k, v] : m.at("recall").items()) {
    std::cout << "  recall@" << k << ' ' << fmt(v.get<double>());
  }
  std::cout << '\n';
}

void print_stats(const json& s) {
  for (const char* key : {"users", "items", "interactions", "avg_clicks_per_user",
                          "avg_clicks_per_item", "entities", "relations", "triples"}) {
    std::cout << key << '\t' << s.at(key).dump() << '\n';
  }
  std::cout << "written to " << s.at("out_dir").get<std::string>() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stage-wise training for knowledge-graph recommenders"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kgsw_version());

  auto* ingest = app.add_subcommand("ingest", "convert raw logs into a canonical dataset");
  std::string ratings, kg, item_entity, rule, ingest_out;
  std::uint64_t ingest_seed = 1;
  ingest->add_option("--ratings", ratings, "user<TAB>item[<TAB>rating] file")->required();
  ingest->add_option("--kg", kg, "head<TAB>relation<TAB>tail file")->required();
  ingest->add_option("--item-entity", item_entity, "item<TAB>entity file")->required();
  ingest->add_option("--rule", rule, "dataset rule name (see `kgsw rules`)")->required();
  ingest->add_option("--seed", ingest_seed);
  ingest->add_option("--out,-o", ingest_out);

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
  std::optional<std::size_t> s_users, s_items, s_entities, s_relations, s_latent;
  std::optional<double> s_density;
  std::uint64_t s_gen_seed = 1, s_seed = 1;
  std::string synth_out;
  synth->add_option("--users", s_users);
  synth->add_option("--items", s_items);
  synth->add_option("--entities", s_entities);
  synth->add_option("--relations", s_relations);
  synth->add_option("--latent-dim", s_latent);
  synth->add_option("--density", s_density);
  synth->add_option("--synth-seed", s_gen_seed, "generator seed");
  synth->add_option("--seed", s_seed, "negative sampling / split seed");
  synth->add_option("--out,-o", synth_out);

  auto* train = app.add_subcommand("train", "run stage-wise training");
  RunFlags train_flags;
  train_flags.attach(train);
  bool print_config = false;
  train->add_flag("--print-config", print_config, "print the resolved run config and exit");

  auto* evaluate = app.add_subcommand("evaluate", "score a run directory or checkpoint on the test split");
  std::string eval_path;
  evaluate->add_option("path", eval_path)->required();

  auto* ablate = app.add_subcommand("ablate", "sweep sample size x hops x transfer mode");
  RunFlags ablate_flags;
  ablate_flags.attach(ablate);
  std::vector<std::size_t> grid_sizes, grid_hops;
  std::vector<std::string> grid_modes = {"kg_repr_only", "whole_parameters"};
  std::size_t jobs = 1;
  ablate->add_option("--grid-sizes", grid_sizes, "K (or M) values")->delimiter(',')->required();
  ablate->add_option("--grid-hops", grid_hops, "H values")->delimiter(',')->required();
  ablate->add_option("--grid-modes", grid_modes)->delimiter(',');
  ablate->add_option("--jobs,-j", jobs, "cells run in parallel");

  app.add_subcommand("rules", "list the built-in dataset rules");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      const json req = {{"ratings", ratings}, {"kg", kg},     {"item_entity", item_entity},
                        {"rule", rule},       {"seed", ingest_seed}, {"out_dir", ingest_out}};
      print_stats(call(kgsw_ingest, req.dump()));
    } else if (*synth) {
      json s = json::object();
      if (s_users) s["num_users"] = *s_users;
      if (s_items) s["num_items"] = *s_items;
      if (s_entities) s["num_entities"] = *s_entities;
      if (s_relations) s["num_relations"] = *s_relations;
      if (s_latent) s["latent_dim"] = *s_latent;
      if (s_density) s["density"] = *s_density;
      s["seed"] = s_gen_seed;
      const json req = {{"synth", s}, {"seed", s_seed}, {"out_dir", synth_out}};
      print_stats(call(kgsw_synth, req.dump()));
    } else if (*train) {
      const json config = call(kgsw_run_config, train_flags.overrides().dump());
      if (print_config) {
        std::cout << config.dump(2) << '\n';
        return 0;
      }
      const json report = call(kgsw_train, config.dump());
      for (const auto& s : report.at("stages")) {
        std::cout << "stage " << s.at("stage").get<std::size_t>() << "  epochs "
                  << s.at("epochs_run").get<std::size_t>() << "  eval auc "
                  << fmt(s.at("best_eval_auc").get<double>()) << "  acc "
                  << fmt(s.at("best_eval_acc").get<double>());
        if (s.at("diverged").get<bool>()) {
          std::cout << "  DIVERGED (" << s.at("divergence").get<std::string>() << ")";
        }
        std::cout << '\n';
      }
      print_metrics(report.at("test"));
      std::cout << "run written to " << config.at("output_dir").get<std::string>() << '\n';
    } else if (*evaluate) {
      char* out = nullptr;
      const kgsw_status s = kgsw_evaluate(eval_path.c_str(), &out);
      if (s != KGSW_OK) {
        std::cerr << "error (" << kgsw_status_string(s) << "): " << kgsw_last_error() << '\n';
        return 1;
      }
      const json result = json::parse(out);
      kgsw_free_string(out);
      print_metrics(result.at("test"));
    } else if (*ablate) {
      const json req = {{"config", ablate_flags.overrides()},
                        {"grid", {{"sample_sizes", grid_sizes}, {"hops", grid_hops}, {"modes", grid_modes}}},
                        {"jobs", jobs}};
      const json summary = call(kgsw_ablate, req.dump());
      const std::string dir = summary.at("output_dir").get<std::string>();
      std::ifstream table(dir + "/ablation.tsv");
      std::cout << table.rdbuf();
      const auto failed = summary.at("failed_cells").get<std::size_t>();
      std::cout << "results in " << dir << '\n';
      if (failed > 0) {
        std::cerr << failed << " cell(s) failed; see cells.tsv\n";
        return 3;
      }
    } else {
      char* out = nullptr;
      if (kgsw_dataset_rules(&out) != KGSW_OK) {
        std::cerr << "error: " << kgsw_last_error() << '\n';
        return 1;
      }
      for (const auto& r : json::parse(out)) {
        std::cout << r.at("name").get<std::string>() << "\tthreshold="
                  << (r.at("threshold").is_null() ? "none" : r.at("threshold").dump())
                  << "\tcore=" << r.at("core").get<std::size_t>() << '\n';
      }
      kgsw_free_string(out);
    }
  } catch (const CallFailed& f) {
    return f.code;
  }
  return 0;
}
