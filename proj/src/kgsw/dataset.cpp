#include "kgsw/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "kgsw/error.hpp"
#include "kgsw/log.hpp"
#include "kgsw/rng.hpp"
#include "kgsw/tsv.hpp"

namespace kgsw {

std::uint32_t Vocabulary::intern(std::string_view raw) {
  auto [it, inserted] =
      ids_.try_emplace(std::string(raw), static_cast<std::uint32_t>(names_.size()));
  if (inserted) names_.emplace_back(raw);
  return it->second;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view raw) const {
  const auto it = ids_.find(std::string(raw));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

void InteractionLog::add(std::string_view user, std::string_view item,
                         double rating) {
  records.push_back(Interaction{users.intern(user), items.intern(item), rating});
}

InteractionLog load_interaction_log(const std::filesystem::path& path) {
  InteractionLog log;
  for_each_tsv_row(path, 2, 3, [&](std::span<const std::string_view> f,
                                   std::size_t line) {
    const double rating = f.size() == 3 ? parse_real(f[2], path, line) : 1.0;
    log.add(f[0], f[1], rating);
  });
  return log;
}

PositivePairs implicitize(const InteractionLog& log,
                          std::optional<double> threshold) {
  PositivePairs pairs;
  pairs.reserve(log.records.size());
  for (const auto& r : log.records) {
    if (!threshold || r.rating >= *threshold) pairs.push_back({r.user, r.item});
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

PositivePairs n_core_filter(const PositivePairs& pairs, std::size_t n) {
  if (n == 0) throw Error(ErrorKind::config, "n-core requires n >= 1");
  std::unordered_map<UserId, std::size_t> user_deg;
  std::unordered_map<ItemId, std::size_t> item_deg;
  for (const auto& p : pairs) {
    ++user_deg[p.user];
    ++item_deg[p.item];
  }
  std::vector<char> alive(pairs.size(), 1);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (!alive[i]) continue;
      const auto& p = pairs[i];
      if (user_deg[p.user] < n || item_deg[p.item] < n) {
        alive[i] = 0;
        --user_deg[p.user];
        --item_deg[p.item];
        changed = true;
      }
    }
  }
  PositivePairs kept;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (alive[i]) kept.push_back(pairs[i]);
  }
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  if (kept.empty() && !pairs.empty()) {
    warn(std::to_string(n) + "-core filtering removed every interaction");
  }
  return kept;
}

std::vector<Example> negative_sample(const PositivePairs& pairs,
                                     std::size_t num_items, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Example> out;
  out.reserve(pairs.size() * 2);
  std::size_t begin = 0;
  while (begin < pairs.size()) {
    const UserId user = pairs[begin].user;
    std::size_t end = begin;
    while (end < pairs.size() && pairs[end].user == user) ++end;

    std::unordered_set<ItemId> seen;
    for (std::size_t i = begin; i < end; ++i) {
      out.push_back({user, pairs[i].item, 1});
      seen.insert(pairs[i].item);
    }
    const std::size_t need = end - begin;
    std::vector<ItemId> complement;
    for (ItemId item = 0; item < num_items; ++item) {
      if (!seen.contains(item)) complement.push_back(item);
    }
    if (complement.size() >= need) {
      for (std::size_t i = 0; i < need; ++i) {
        std::swap(complement[i],
                  complement[i + uniform_index(rng, complement.size() - i)]);
        out.push_back({user, complement[i], 0});
      }
    } else {
      warn("user " + std::to_string(user) + " has " + std::to_string(need) +
           " positives but only " + std::to_string(complement.size()) +
           " unobserved items; sampling negatives with replacement");
      const bool degenerate = complement.empty();
      for (std::size_t i = 0; i < need; ++i) {
        const ItemId item = degenerate
                                ? static_cast<ItemId>(uniform_index(rng, num_items))
                                : complement[uniform_index(rng, complement.size())];
        out.push_back({user, item, 0});
      }
    }
    begin = end;
  }
  return out;
}

DatasetSplit split_622(const std::vector<Example>& examples, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return examples[a].user < examples[b].user;
  });

  DatasetSplit split;
  std::size_t cumulative = 0, assigned_train = 0, assigned_train_eval = 0;
  std::size_t begin = 0;
  while (begin < order.size()) {
    std::size_t end = begin;
    while (end < order.size() &&
           examples[order[end]].user == examples[order[begin]].user) {
      ++end;
    }
    const std::size_t n = end - begin;
    std::shuffle(order.begin() + static_cast<std::ptrdiff_t>(begin),
                 order.begin() + static_cast<std::ptrdiff_t>(end), rng);

    cumulative += n;
    // Cumulative targets round(0.6 C) and round(0.8 C) keep the global ratio;
    // each user's counts stay within one example of 6:2:2. Work in tenths.
    const auto tenths = static_cast<std::ptrdiff_t>(n);
    auto ceil10 = [](std::ptrdiff_t x) { return x <= 0 ? 0 : (x + 9) / 10; };
    auto floor10 = [](std::ptrdiff_t x) { return x / 10; };
    const auto target_train = static_cast<std::ptrdiff_t>((6 * cumulative + 5) / 10) -
                              static_cast<std::ptrdiff_t>(assigned_train);
    const auto target_train_eval = static_cast<std::ptrdiff_t>((8 * cumulative + 5) / 10) -
                                   static_cast<std::ptrdiff_t>(assigned_train_eval);
    const std::ptrdiff_t train = std::clamp(target_train, ceil10(6 * tenths - 10),
                                            std::min(tenths, floor10(6 * tenths + 10)));
    const std::ptrdiff_t lo = std::max(train + ceil10(2 * tenths - 10), ceil10(8 * tenths - 10));
    const std::ptrdiff_t hi = std::min({train + floor10(2 * tenths + 10),
                                        floor10(8 * tenths + 10), tenths});
    const auto n_train = static_cast<std::size_t>(train);
    const auto n_train_eval = static_cast<std::size_t>(std::clamp(target_train_eval, lo, hi));
    assigned_train += n_train;
    assigned_train_eval += n_train_eval;

    for (std::size_t i = 0; i < n; ++i) {
      const auto& ex = examples[order[begin + i]];
      if (i < n_train) {
        split.train.push_back(ex);
      } else if (i < n_train_eval) {
        split.eval.push_back(ex);
      } else {
        split.test.push_back(ex);
      }
    }
    begin = end;
  }
  return split;
}

EntityId ImplicitDataset::entity_of(ItemId item) const {
  if (item >= item_to_entity.size()) {
    throw Error(ErrorKind::lookup, "unknown item id " + std::to_string(item));
  }
  return item_to_entity[item];
}

std::vector<std::vector<ItemId>> positives_by_user(
    const std::vector<Example>& examples, std::size_t num_users) {
  std::vector<std::vector<ItemId>> out(num_users);
  for (const auto& ex : examples) {
    if (ex.label == 1 && ex.user < num_users) out[ex.user].push_back(ex.item);
  }
  return out;
}

const std::vector<DatasetRule>& dataset_rules() {
  static const std::vector<DatasetRule> rules = {
      {"movielens-1m", 4.0, 1},  {"book-crossing", std::nullopt, 1},
      {"lastfm-2011", std::nullopt, 1}, {"lfm1b-2015", std::nullopt, 50},
      {"amazon-book", std::nullopt, 20}, {"yelp2018", std::nullopt, 20},
      {"synth", std::nullopt, 1},
  };
  return rules;
}

const DatasetRule& find_dataset_rule(std::string_view name) {
  for (const auto& r : dataset_rules()) {
    if (r.name == name) return r;
  }
  std::string known;
  for (const auto& r : dataset_rules()) known += (known.empty() ? "" : ", ") + r.name;
  throw Error(ErrorKind::config,
              "unknown dataset rule '" + std::string(name) + "' (known: " + known + ")");
}

std::unordered_map<std::string, EntityId> load_item_entity_map(
    const std::filesystem::path& path) {
  std::unordered_map<std::string, EntityId> map;
  for_each_tsv_row(path, 2, [&](std::span<const std::string_view> f,
                                std::size_t line) {
    map[std::string(f[0])] = parse_id(f[1], path, line);
  });
  return map;
}

IngestResult build_implicit_dataset(
    const InteractionLog& log, const DatasetRule& rule,
    const std::unordered_map<std::string, EntityId>& item_to_entity,
    const KnowledgeGraph& kg, std::uint64_t seed) {
  PositivePairs positives = implicitize(log, rule.threshold);

  // Items need an entity anchor in the graph.
  std::vector<std::optional<EntityId>> anchor(log.items.size());
  std::size_t dropped = 0;
  for (ItemId i = 0; i < log.items.size(); ++i) {
    const auto it = item_to_entity.find(log.items.name(i));
    if (it != item_to_entity.end() && it->second < kg.num_entities()) {
      anchor[i] = it->second;
    } else {
      ++dropped;
    }
  }
  if (dropped > 0) {
    warn("dropped " + std::to_string(dropped) +
         " items without a knowledge-graph entity");
  }
  std::erase_if(positives, [&](const UserItem& p) { return !anchor[p.item]; });

  positives = n_core_filter(positives, rule.core);

  std::vector<UserId> user_ids;
  std::vector<ItemId> item_ids;
  for (const auto& p : positives) {
    user_ids.push_back(p.user);
    item_ids.push_back(p.item);
  }
  std::sort(user_ids.begin(), user_ids.end());
  user_ids.erase(std::unique(user_ids.begin(), user_ids.end()), user_ids.end());
  std::sort(item_ids.begin(), item_ids.end());
  item_ids.erase(std::unique(item_ids.begin(), item_ids.end()), item_ids.end());
  const auto dense = [](const std::vector<std::uint32_t>& ids, std::uint32_t old) {
    return static_cast<std::uint32_t>(
        std::lower_bound(ids.begin(), ids.end(), old) - ids.begin());
  };

  IngestResult result;
  result.dropped_items = dropped;
  auto& ds = result.dataset;
  ds.num_users = user_ids.size();
  ds.num_items = item_ids.size();
  std::unordered_set<EntityId> used_entities;
  for (const ItemId old : item_ids) {
    const EntityId e = *anchor[old];
    if (!used_entities.insert(e).second) {
      throw Error(ErrorKind::config, "items map to the same entity " +
                                         std::to_string(e) +
                                         "; item_to_entity must be injective");
    }
    ds.item_to_entity.push_back(e);
    result.item_names.push_back(log.items.name(old));
  }
  for (const UserId old : user_ids) result.user_names.push_back(log.users.name(old));

  PositivePairs compact;
  compact.reserve(positives.size());
  for (const auto& p : positives) {
    compact.push_back({dense(user_ids, p.user), dense(item_ids, p.item)});
  }
  std::sort(compact.begin(), compact.end());

  ds.split = split_622(negative_sample(compact, ds.num_items, mix_seed(seed, 1)),
                       mix_seed(seed, 2));

  auto& st = result.stats;
  st.users = ds.num_users;
  st.items = ds.num_items;
  st.interactions = compact.size();
  st.avg_clicks_per_user = st.users ? double(st.interactions) / double(st.users) : 0.0;
  st.avg_clicks_per_item = st.items ? double(st.interactions) / double(st.items) : 0.0;
  st.entities = kg.num_entities();
  st.relations = kg.num_relations();
  st.triples = kg.triples().size();
  return result;
}

double PlantedTruth::logit(UserId user, ItemId item, double signal) const {
  double dot = 0.0;
  for (std::size_t k = 0; k < latent_dim; ++k) {
    dot += user_factors[user * latent_dim + k] * item_factors[item * latent_dim + k];
  }
  return signal * (dot - score_mean) / score_std + bias;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<std::size_t> distinct_draws(Rng& rng, std::size_t population,
                                        std::size_t count, std::size_t exclude) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < population; ++i) {
    if (i != exclude) pool.push_back(i);
  }
  count = std::min(count, pool.size());
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace

SynthData synth_generate(const SynthConfig& c) {
  if (c.num_users == 0 || c.num_items == 0 || c.num_entities == 0 ||
      c.num_relations == 0 || c.latent_dim == 0) {
    throw Error(ErrorKind::config, "synthetic sizes must be >= 1");
  }
  if (c.num_entities < c.num_items) {
    throw Error(ErrorKind::config, "num_entities must be >= num_items");
  }
  if (!(c.density > 0.0 && c.density < 1.0)) {
    throw Error(ErrorKind::config, "density must lie in (0, 1)");
  }
  Rng rng(c.seed);
  const std::size_t d = c.latent_dim;
  const std::size_t attributes = c.num_entities - c.num_items;
  const auto attr_entity = [&](std::size_t a) { return c.num_items + a; };
  const auto type_of = [&](std::size_t e) {
    return static_cast<RelationId>(e % c.num_relations);
  };

  PlantedTruth truth;
  truth.latent_dim = d;
  truth.entity_factors.assign(c.num_entities * d, 0.0);
  for (std::size_t a = 0; a < attributes; ++a) {
    for (std::size_t k = 0; k < d; ++k) {
      truth.entity_factors[attr_entity(a) * d + k] = standard_normal(rng);
    }
  }

  const std::size_t features =
      c.feature_pool == 0 ? attributes : std::min(c.feature_pool, attributes);
  std::vector<Triple> triples;
  truth.item_factors.assign(c.num_items * d, 0.0);
  for (std::size_t i = 0; i < c.num_items; ++i) {
    const auto links = distinct_draws(rng, features, c.item_links, features);
    for (const auto a : links) {
      const auto e = attr_entity(a);
      triples.push_back({static_cast<EntityId>(i), type_of(e), static_cast<EntityId>(e)});
      for (std::size_t k = 0; k < d; ++k) {
        truth.item_factors[i * d + k] += truth.entity_factors[e * d + k] / double(links.size());
      }
    }
    if (links.empty()) {
      for (std::size_t k = 0; k < d; ++k) truth.item_factors[i * d + k] = standard_normal(rng);
    }
    for (std::size_t k = 0; k < d; ++k) {
      truth.entity_factors[i * d + k] = truth.item_factors[i * d + k];
    }
  }
  for (std::size_t a = 0; a < attributes; ++a) {
    for (const auto b : distinct_draws(rng, attributes, c.attribute_links, a)) {
      const auto e = attr_entity(b);
      triples.push_back({static_cast<EntityId>(attr_entity(a)), type_of(e),
                         static_cast<EntityId>(e)});
    }
  }

  truth.user_factors.resize(c.num_users * d);
  for (auto& v : truth.user_factors) v = standard_normal(rng);

  std::vector<double> raw(c.num_users * c.num_items);
  for (std::size_t u = 0; u < c.num_users; ++u) {
    for (std::size_t i = 0; i < c.num_items; ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        dot += truth.user_factors[u * d + k] * truth.item_factors[i * d + k];
      }
      raw[u * c.num_items + i] = dot;
    }
  }
  const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / double(raw.size());
  double var = 0.0;
  for (const double r : raw) var += (r - mean) * (r - mean);
  var /= double(raw.size());
  truth.score_mean = mean;
  truth.score_std = var > 0.0 ? std::sqrt(var) : 1.0;

  // Bisect the bias so the expected density matches the target.
  double lo = -50.0, hi = 50.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double expected = 0.0;
    for (const double r : raw) {
      expected += sigmoid(c.signal * (r - mean) / truth.score_std + mid);
    }
    (expected / double(raw.size()) < c.density ? lo : hi) = mid;
  }
  truth.bias = 0.5 * (lo + hi);

  SynthData out{KnowledgeGraph(std::move(triples), c.num_entities, c.num_relations),
                InteractionLog{}, {}, std::move(truth)};
  for (std::size_t u = 0; u < c.num_users; ++u) {
    for (std::size_t i = 0; i < c.num_items; ++i) {
      const double p = sigmoid(out.truth.logit(static_cast<UserId>(u),
                                               static_cast<ItemId>(i), c.signal));
      if (uniform_real(rng, 0.0, 1.0) < p) {
        out.log.add(std::to_string(u), std::to_string(i));
      }
    }
  }
  for (std::size_t i = 0; i < c.num_items; ++i) {
    out.item_to_entity[std::to_string(i)] = static_cast<EntityId>(i);
  }
  return out;
}

}  // namespace kgsw
