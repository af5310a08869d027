#include "kgsw/kgsw.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgsw/config.hpp"
#include "kgsw/error.hpp"
#include "kgsw/eval.hpp"
#include "kgsw/kg_store.hpp"
#include "kgsw/log.hpp"
#include "kgsw/pipeline.hpp"

struct kgsw_kg {
  kgsw::KnowledgeGraph graph;
};

struct kgsw_stage_graph {
  kgsw::StageGraph graph;
};

namespace {

using nlohmann::json;

thread_local std::string last_error;

kgsw_status status_of(kgsw::ErrorKind kind) {
  switch (kind) {
    case kgsw::ErrorKind::io: return KGSW_ERR_IO;
    case kgsw::ErrorKind::parse: return KGSW_ERR_PARSE;
    case kgsw::ErrorKind::config: return KGSW_ERR_CONFIG;
    case kgsw::ErrorKind::lookup: return KGSW_ERR_LOOKUP;
    case kgsw::ErrorKind::numeric: return KGSW_ERR_NUMERIC;
    case kgsw::ErrorKind::undefined_metric: return KGSW_ERR_UNDEFINED_METRIC;
    case kgsw::ErrorKind::partition_mismatch: return KGSW_ERR_PARTITION_MISMATCH;
  }
  return KGSW_ERR_INTERNAL;
}

kgsw_status fail(kgsw_status s, std::string message) {
  last_error = std::move(message);
  return s;
}

template <class F>
kgsw_status guarded(F&& f) {
  try {
    last_error.clear();
    f();
    return KGSW_OK;
  } catch (const kgsw::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const json::exception& e) {
    return fail(KGSW_ERR_PARSE, std::string("invalid JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(KGSW_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(KGSW_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_request(const char* text) {
  if (!text) throw kgsw::Error(kgsw::ErrorKind::config, "request is NULL");
  return json::parse(text);
}

kgsw_status json_call(const char* request, char** out,
                      json (*fn)(const json&)) {
  if (!out) return fail(KGSW_ERR_INVALID_ARGUMENT, "output pointer is NULL");
  *out = nullptr;
  return guarded([&] { *out = dup_string(fn(parse_request(request)).dump(1)); });
}

std::string str_field(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw kgsw::Error(kgsw::ErrorKind::config, std::string("request needs string field '") + key + "'");
  }
  return j.at(key).get<std::string>();
}

json do_ingest(const json& j) {
  kgsw::IngestRequest r;
  r.ratings = str_field(j, "ratings");
  r.kg = str_field(j, "kg");
  r.item_entity = str_field(j, "item_entity");
  r.rule = str_field(j, "rule");
  r.seed = j.value("seed", std::uint64_t{1});
  r.out_dir = kgsw::resolve_output_dir(j.value("out_dir", std::string()), "dataset-" + r.rule);
  json stats = kgsw::ingest_to_dir(r);
  stats["out_dir"] = r.out_dir.string();
  return stats;
}

json do_synth(const json& j) {
  kgsw::SynthConfig config;
  if (j.contains("synth")) kgsw::merge_json(j.at("synth"), config);
  const auto seed = j.value("seed", std::uint64_t{1});
  const auto dir = kgsw::resolve_output_dir(j.value("out_dir", std::string()),
                                            "dataset-synth-seed" + std::to_string(config.seed));
  json stats = kgsw::synth_to_dir(config, seed, dir);
  stats["out_dir"] = dir.string();
  return stats;
}

json do_ablate(const json& j) {
  const kgsw::RunConfig config = kgsw::run_config_from_json(j.value("config", json::object()));
  const json& g = j.at("grid");
  kgsw::AblationGrid grid;
  grid.sample_sizes = g.at("sample_sizes").get<std::vector<std::size_t>>();
  grid.hops = g.at("hops").get<std::vector<std::size_t>>();
  for (const auto& m : g.value("modes", json::array({"kg_repr_only", "whole_parameters"}))) {
    grid.modes.push_back(kgsw::transfer_mode_from_string(m.get<std::string>()));
  }
  return kgsw::ablate_run(config, grid, j.value("jobs", std::size_t{1}));
}

}  // namespace

extern "C" {

const char* kgsw_version(void) { return "0.1.0"; }

const char* kgsw_status_string(kgsw_status status) {
  switch (status) {
    case KGSW_OK: return "ok";
    case KGSW_ERR_IO: return "io error";
    case KGSW_ERR_PARSE: return "parse error";
    case KGSW_ERR_CONFIG: return "configuration error";
    case KGSW_ERR_LOOKUP: return "lookup error";
    case KGSW_ERR_NUMERIC: return "numeric error";
    case KGSW_ERR_UNDEFINED_METRIC: return "undefined metric";
    case KGSW_ERR_PARTITION_MISMATCH: return "partition mismatch";
    case KGSW_ERR_INVALID_ARGUMENT: return "invalid argument";
    case KGSW_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* kgsw_last_error(void) { return last_error.c_str(); }

void kgsw_free_string(char* s) { std::free(s); }

void kgsw_set_warning_handler(kgsw_warning_fn fn, void* user_data) {
  if (!fn) {
    kgsw::set_warning_handler(kgsw::default_warning_handler());
    return;
  }
  kgsw::set_warning_handler([fn, user_data](const std::string& msg) { fn(msg.c_str(), user_data); });
}

kgsw_status kgsw_kg_load(const char* triple_file, kgsw_kg** out) {
  if (!triple_file || !out) return fail(KGSW_ERR_INVALID_ARGUMENT, "NULL argument");
  *out = nullptr;
  return guarded([&] { *out = new kgsw_kg{kgsw::load_kg(triple_file)}; });
}

kgsw_status kgsw_kg_from_triples(const uint32_t* heads, const uint32_t* relations,
                                 const uint32_t* tails, size_t count, kgsw_kg** out) {
  if (!out || (count > 0 && (!heads || !relations || !tails))) {
    return fail(KGSW_ERR_INVALID_ARGUMENT, "NULL argument");
  }
  *out = nullptr;
  return guarded([&] {
    std::vector<kgsw::Triple> triples(count);
    for (size_t i = 0; i < count; ++i) triples[i] = {heads[i], relations[i], tails[i]};
    *out = new kgsw_kg{kgsw::KnowledgeGraph(std::move(triples))};
  });
}

void kgsw_kg_free(kgsw_kg* kg) { delete kg; }

size_t kgsw_kg_num_entities(const kgsw_kg* kg) { return kg ? kg->graph.num_entities() : 0; }
size_t kgsw_kg_num_relations(const kgsw_kg* kg) { return kg ? kg->graph.num_relations() : 0; }
size_t kgsw_kg_num_triples(const kgsw_kg* kg) { return kg ? kg->graph.triples().size() : 0; }

kgsw_status kgsw_kg_degree(const kgsw_kg* kg, uint32_t entity, size_t* out) {
  if (!kg || !out) return fail(KGSW_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    if (entity >= kg->graph.num_entities()) {
      throw kgsw::Error(kgsw::ErrorKind::lookup, "unknown entity " + std::to_string(entity));
    }
    *out = kg->graph.degree(entity);
  });
}

kgsw_status kgsw_stage_graph_sample(const kgsw_kg* kg, size_t k, uint64_t seed,
                                    kgsw_stage_graph** out) {
  if (!kg || !out) return fail(KGSW_ERR_INVALID_ARGUMENT, "NULL argument");
  *out = nullptr;
  return guarded([&] { *out = new kgsw_stage_graph{kgsw::sample_stage_graph(kg->graph, k, seed)}; });
}

void kgsw_stage_graph_free(kgsw_stage_graph* graph) { delete graph; }

size_t kgsw_stage_graph_k(const kgsw_stage_graph* graph) { return graph ? graph->graph.k() : 0; }

kgsw_status kgsw_stage_graph_neighbors(const kgsw_stage_graph* graph, uint32_t entity,
                                       uint32_t* relations, uint32_t* tails, size_t capacity) {
  if (!graph || !relations || !tails) return fail(KGSW_ERR_INVALID_ARGUMENT, "NULL argument");
  if (capacity < graph->graph.k()) {
    return fail(KGSW_ERR_INVALID_ARGUMENT, "capacity is smaller than K");
  }
  return guarded([&] {
    const auto slots = graph->graph.neighbors(entity);
    for (size_t i = 0; i < slots.size(); ++i) {
      relations[i] = slots[i].relation;
      tails[i] = slots[i].tail;
    }
  });
}

kgsw_status kgsw_auc(const double* scores, const uint8_t* labels, size_t n, double* out) {
  if (!out || (n > 0 && (!scores || !labels))) return fail(KGSW_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    std::vector<kgsw::ScoredExample> scored(n);
    for (size_t i = 0; i < n; ++i) {
      scored[i].label = labels[i] ? 1 : 0;
      scored[i].score = scores[i];
    }
    *out = kgsw::auc(scored);
  });
}

kgsw_status kgsw_ingest(const char* request_json, char** result_json) {
  return json_call(request_json, result_json, do_ingest);
}

kgsw_status kgsw_synth(const char* request_json, char** result_json) {
  return json_call(request_json, result_json, do_synth);
}

kgsw_status kgsw_run_config(const char* overrides_json, char** config_json) {
  return json_call(overrides_json ? overrides_json : "{}", config_json, [](const json& j) {
    return kgsw::to_json(kgsw::run_config_from_json(j));
  });
}

kgsw_status kgsw_train(const char* config_json, char** report_json) {
  return json_call(config_json, report_json, [](const json& j) {
    return kgsw::train_run(kgsw::run_config_from_json(j));
  });
}

kgsw_status kgsw_evaluate(const char* path, char** result_json) {
  if (!path || !result_json) return fail(KGSW_ERR_INVALID_ARGUMENT, "NULL argument");
  *result_json = nullptr;
  return guarded([&] { *result_json = dup_string(kgsw::evaluate_run(path).dump(1)); });
}

kgsw_status kgsw_ablate(const char* request_json, char** result_json) {
  return json_call(request_json, result_json, do_ablate);
}

kgsw_status kgsw_dataset_rules(char** result_json) {
  return json_call("{}", result_json, [](const json&) {
    json rules = json::array();
    for (const auto& r : kgsw::dataset_rules()) {
      rules.push_back({{"name", r.name},
                       {"threshold", r.threshold ? json(*r.threshold) : json(nullptr)},
                       {"core", r.core}});
    }
    return rules;
  });
}

}  // extern "C"
