#include "kgsw/config.hpp"

#include <cstdlib>
#include <set>

#include "kgsw/error.hpp"

namespace kgsw {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const char* what) {
  if (!j.is_object()) throw Error(ErrorKind::config, std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw Error(ErrorKind::config, std::string("unknown key '") + key + "' in " + what);
    }
  }
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::config, std::string("bad value for '") + key + "'");
  }
}

}  // namespace

void RunConfig::validate() const {
  if (data.path.has_value() == data.synth.has_value()) {
    throw Error(ErrorKind::config, "exactly one of data.path and data.synth must be given");
  }
  if (data.path && !std::filesystem::exists(*data.path)) {
    throw Error(ErrorKind::io, "dataset path does not exist: " + data.path->string());
  }
  if (model.kind == ModelKind::kgcn) {
    model.kgcn.validate();
  } else {
    model.ripple.validate();
  }
  plan.validate();
  for (const auto k : topk) {
    if (k == 0) throw Error(ErrorKind::config, "topk values must be >= 1");
  }
}

json to_json(const KgcnConfig& c) {
  return {{"dim", c.dim},
          {"hops", c.hops},
          {"neighbors", c.neighbors},
          {"aggregator", std::string(to_string(c.aggregator))},
          {"lr", c.lr},
          {"l2", c.l2}};
}

json to_json(const RippleConfig& c) {
  return {{"dim", c.dim},         {"hops", c.hops}, {"memory", c.memory},
          {"kge_weight", c.kge_weight}, {"lr", c.lr},    {"l2", c.l2},
          {"output_transform", c.output_transform}};
}

json to_json(const SynthConfig& c) {
  return {{"num_users", c.num_users},
          {"num_items", c.num_items},
          {"num_entities", c.num_entities},
          {"num_relations", c.num_relations},
          {"latent_dim", c.latent_dim},
          {"item_links", c.item_links},
          {"feature_pool", c.feature_pool},
          {"attribute_links", c.attribute_links},
          {"density", c.density},
          {"signal", c.signal},
          {"seed", c.seed}};
}

json to_json(const StagePlan& p) {
  return {{"stages", p.stages},
          {"max_epochs", p.max_epochs},
          {"patience", p.patience},
          {"batch_size", p.batch_size},
          {"transfer", std::string(to_string(p.transfer))}};
}

json to_json(const RunConfig& c) {
  json data = json::object();
  if (c.data.path) data["path"] = c.data.path->string();
  if (c.data.synth) data["synth"] = to_json(*c.data.synth);
  return {{"schema", kRunConfigSchema},
          {"model", std::string(to_string(c.model.kind))},
          {"data", data},
          {"seed", c.seed},
          {"kgcn", to_json(c.model.kgcn)},
          {"ripplenet", to_json(c.model.ripple)},
          {"plan", to_json(c.plan)},
          {"topk", c.topk},
          {"output_dir", c.output_dir.string()}};
}

void merge_json(const json& j, KgcnConfig& out) {
  check_keys(j, {"dim", "hops", "neighbors", "aggregator", "lr", "l2"}, "kgcn");
  take(j, "dim", out.dim);
  take(j, "hops", out.hops);
  take(j, "neighbors", out.neighbors);
  if (j.contains("aggregator")) {
    out.aggregator = aggregator_from_string(j.at("aggregator").get<std::string>());
  }
  take(j, "lr", out.lr);
  take(j, "l2", out.l2);
}

void merge_json(const json& j, RippleConfig& out) {
  check_keys(j, {"dim", "hops", "memory", "kge_weight", "lr", "l2", "output_transform"},
             "ripplenet");
  take(j, "dim", out.dim);
  take(j, "hops", out.hops);
  take(j, "memory", out.memory);
  take(j, "kge_weight", out.kge_weight);
  take(j, "lr", out.lr);
  take(j, "l2", out.l2);
  take(j, "output_transform", out.output_transform);
}

void merge_json(const json& j, SynthConfig& out) {
  check_keys(j,
             {"num_users", "num_items", "num_entities", "num_relations", "latent_dim",
              "item_links", "feature_pool", "attribute_links", "density", "signal", "seed"},
             "synth");
  take(j, "num_users", out.num_users);
  take(j, "num_items", out.num_items);
  take(j, "num_entities", out.num_entities);
  take(j, "num_relations", out.num_relations);
  take(j, "latent_dim", out.latent_dim);
  take(j, "item_links", out.item_links);
  take(j, "feature_pool", out.feature_pool);
  take(j, "attribute_links", out.attribute_links);
  take(j, "density", out.density);
  take(j, "signal", out.signal);
  take(j, "seed", out.seed);
}

void merge_json(const json& j, StagePlan& out) {
  check_keys(j, {"stages", "max_epochs", "patience", "batch_size", "transfer"}, "plan");
  take(j, "stages", out.stages);
  take(j, "max_epochs", out.max_epochs);
  take(j, "patience", out.patience);
  take(j, "batch_size", out.batch_size);
  if (j.contains("transfer")) {
    out.transfer = transfer_mode_from_string(j.at("transfer").get<std::string>());
  }
}

void merge_json(const json& j, RunConfig& out) {
  check_keys(j,
             {"schema", "model", "data", "seed", "kgcn", "ripplenet", "plan", "topk",
              "output_dir"},
             "run config");
  if (j.contains("schema") && j.at("schema") != kRunConfigSchema) {
    throw Error(ErrorKind::config, "unsupported run config schema " + j.at("schema").dump());
  }
  if (j.contains("model")) out.model.kind = model_kind_from_string(j.at("model").get<std::string>());
  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, {"path", "synth"}, "data");
    if (d.contains("path")) {
      out.data.path = d.at("path").get<std::string>();
      out.data.synth.reset();
    }
    if (d.contains("synth")) {
      SynthConfig s = out.data.synth.value_or(SynthConfig{});
      merge_json(d.at("synth"), s);
      out.data.synth = s;
      if (!d.contains("path")) out.data.path.reset();
    }
  }
  take(j, "seed", out.seed);
  if (j.contains("kgcn")) merge_json(j.at("kgcn"), out.model.kgcn);
  if (j.contains("ripplenet")) merge_json(j.at("ripplenet"), out.model.ripple);
  if (j.contains("plan")) merge_json(j.at("plan"), out.plan);
  take(j, "topk", out.topk);
  if (j.contains("output_dir")) out.output_dir = j.at("output_dir").get<std::string>();
  out.plan.seed = out.seed;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  merge_json(j, c);
  return c;
}

std::filesystem::path output_root() {
  const char* env = std::getenv("KGSW_OUTPUT_ROOT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("kgsw-runs");
}

std::filesystem::path resolve_output_dir(const std::filesystem::path& dir,
                                         const std::string& fallback_name) {
  if (dir.empty()) return output_root() / fallback_name;
  const char* env = std::getenv("KGSW_OUTPUT_ROOT");
  if (dir.is_absolute() || !(env && *env)) return dir;
  return std::filesystem::path(env) / dir;
}

}  // namespace kgsw
