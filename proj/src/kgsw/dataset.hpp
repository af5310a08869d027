#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgsw/kg_store.hpp"

namespace kgsw {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;

// Interns raw string ids into dense integers in first-seen order.
class Vocabulary {
 public:
  std::uint32_t intern(std::string_view raw);
  std::optional<std::uint32_t> find(std::string_view raw) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const noexcept { return names_.size(); }

 private:
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<std::string> names_;
};

struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  double rating = 1.0;
};

// Raw interaction records with interned ids. Duplicates are allowed here.
struct InteractionLog {
  Vocabulary users;
  Vocabulary items;
  std::vector<Interaction> records;

  void add(std::string_view user, std::string_view item, double rating = 1.0);
};

// `user\titem\trating` (explicit) or `user\titem` (implicit, unit weight).
InteractionLog load_interaction_log(const std::filesystem::path& path);

struct UserItem {
  UserId user = 0;
  ItemId item = 0;
  friend auto operator<=>(const UserItem&, const UserItem&) = default;
};

// Sorted, duplicate-free positive pairs.
using PositivePairs = std::vector<UserItem>;

PositivePairs implicitize(const InteractionLog& log,
                          std::optional<double> threshold);

// Unique maximal sub-multiset in which every user and item keeps >= n
// interactions. Warns (does not throw) when everything is peeled away.
PositivePairs n_core_filter(const PositivePairs& pairs, std::size_t n);

struct Example {
  UserId user = 0;
  ItemId item = 0;
  std::uint8_t label = 0;
  friend auto operator<=>(const Example&, const Example&) = default;
};

// Positives (label 1) followed, per user, by an equal number of label-0
// items drawn without replacement from that user's unobserved items.
std::vector<Example> negative_sample(const PositivePairs& pairs,
                                     std::size_t num_items, std::uint64_t seed);

struct DatasetSplit {
  std::vector<Example> train;
  std::vector<Example> eval;
  std::vector<Example> test;
};

// Per-user stratified 6:2:2 split with cumulative rounding, so each user is
// within one example of the exact ratio and the global ratio is within one
// example overall.
DatasetSplit split_622(const std::vector<Example>& examples, std::uint64_t seed);

struct ImplicitDataset {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  DatasetSplit split;
  std::vector<EntityId> item_to_entity;

  EntityId entity_of(ItemId item) const;
};

// user -> list of positive items in the given examples (label 1 only).
std::vector<std::vector<ItemId>> positives_by_user(
    const std::vector<Example>& examples, std::size_t num_users);

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  double avg_clicks_per_user = 0.0;
  double avg_clicks_per_item = 0.0;
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t triples = 0;
};

// Preprocessing rule for one named dataset family.
struct DatasetRule {
  std::string name;
  std::optional<double> threshold;
  std::size_t core = 1;
};

const std::vector<DatasetRule>& dataset_rules();
const DatasetRule& find_dataset_rule(std::string_view name);

struct IngestResult {
  ImplicitDataset dataset;
  std::vector<std::string> user_names;  // dense user id -> raw id
  std::vector<std::string> item_names;  // dense item id -> raw id
  DatasetStats stats;
  std::size_t dropped_items = 0;
};

// implicitize -> drop items without an entity anchor -> n-core -> compact ids
// -> negative sampling -> 6:2:2 split.
IngestResult build_implicit_dataset(
    const InteractionLog& log, const DatasetRule& rule,
    const std::unordered_map<std::string, EntityId>& item_to_entity,
    const KnowledgeGraph& kg, std::uint64_t seed);

// `raw_item\tentity_id`
std::unordered_map<std::string, EntityId> load_item_entity_map(
    const std::filesystem::path& path);

struct SynthConfig {
  std::size_t num_users = 50;
  std::size_t num_items = 80;
  std::size_t num_entities = 300;
  std::size_t num_relations = 4;
  std::size_t latent_dim = 4;        // dimension of the planted factors
  std::size_t item_links = 4;        // item -> attribute triples per item
  std::size_t feature_pool = 20;     // attributes items may link to; 0 = all
  std::size_t attribute_links = 2;   // attribute -> attribute triples per attribute
  double density = 0.2;              // target fraction of observed pairs
  double signal = 4.0;               // logit scale of the planted score
  std::uint64_t seed = 1;
};

struct PlantedTruth {
  std::size_t latent_dim = 0;
  std::vector<double> user_factors;    // num_users x latent_dim
  std::vector<double> entity_factors;  // num_entities x latent_dim
  std::vector<double> item_factors;    // num_items x latent_dim
  double score_mean = 0.0;
  double score_std = 1.0;
  double bias = 0.0;

  double logit(UserId user, ItemId item, double signal) const;
};

struct SynthData {
  KnowledgeGraph kg;
  InteractionLog log;
  std::unordered_map<std::string, EntityId> item_to_entity;
  PlantedTruth truth;
};

// Items are entities [0, num_items); the rest are attributes. Attribute e has
// relation type e mod num_relations; items inherit the mean factor of the
// attributes they link to, and interactions are Bernoulli draws of
// sigmoid(signal * standardized(user . item) + bias).
SynthData synth_generate(const SynthConfig& config);

}  // namespace kgsw
