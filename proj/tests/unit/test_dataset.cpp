#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>

#include "kgsw/dataset.hpp"
#include "kgsw/error.hpp"
#include "kgsw/eval.hpp"
#include "test_support.hpp"

using namespace kgsw;
using kgsw::test::TempDir;
using kgsw::test::WarningCapture;
using kgsw::test::write_text;

namespace {

PositivePairs random_pairs(std::size_t users, std::size_t items, double density,
                           std::uint64_t seed) {
  Rng rng(seed);
  PositivePairs out;
  for (UserId u = 0; u < users; ++u) {
    for (ItemId i = 0; i < items; ++i) {
      if (uniform_real(rng, 0.0, 1.0) < density) out.push_back({u, i});
    }
  }
  return out;
}

std::map<UserId, std::size_t> user_counts(const PositivePairs& p) {
  std::map<UserId, std::size_t> c;
  for (const auto& x : p) ++c[x.user];
  return c;
}

std::map<ItemId, std::size_t> item_counts(const PositivePairs& p) {
  std::map<ItemId, std::size_t> c;
  for (const auto& x : p) ++c[x.item];
  return c;
}

// Independent peeling oracle: remove one violating pair at a time.
PositivePairs naive_core(PositivePairs pairs, std::size_t n) {
  bool changed = true;
  while (changed) {
    changed = false;
    const auto uc = user_counts(pairs);
    const auto ic = item_counts(pairs);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (uc.at(pairs[i].user) < n || ic.at(pairs[i].item) < n) {
        pairs.erase(pairs.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

std::vector<Example> user_examples(UserId user, std::size_t n) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({user, static_cast<ItemId>(i), static_cast<std::uint8_t>(i % 2)});
  }
  return out;
}

}  // namespace

TEST(Implicitize, ThresholdCut) {
  InteractionLog log;
  log.add("u", "v", 5);
  log.add("u", "w", 2);
  const auto p = implicitize(log, 4.0);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(log.users.name(p[0].user), "u");
  EXPECT_EQ(log.items.name(p[0].item), "v");
}

TEST(Implicitize, ThresholdIsInclusive) {
  InteractionLog log;
  log.add("u", "v", 4);
  EXPECT_EQ(implicitize(log, 4.0).size(), 1u);
}

TEST(Implicitize, DuplicatesCollapse) {
  InteractionLog log;
  log.add("u", "v");
  log.add("u", "v");
  EXPECT_EQ(implicitize(log, std::nullopt).size(), 1u);
}

TEST(InteractionLogFile, ExplicitAndImplicitRows) {
  TempDir dir;
  write_text(dir / "r.tsv", "a\tx\t5\nb\ty\n");
  const auto log = load_interaction_log(dir / "r.tsv");
  ASSERT_EQ(log.records.size(), 2u);
  EXPECT_DOUBLE_EQ(log.records[0].rating, 5.0);
  EXPECT_DOUBLE_EQ(log.records[1].rating, 1.0);
  write_text(dir / "bad.tsv", "a\tx\t5\textra\n");
  EXPECT_THROW(load_interaction_log(dir / "bad.tsv"), Error);
}

TEST(NCore, StarGraphPeelsToEmpty) {
  PositivePairs star;
  for (ItemId i = 0; i < 5; ++i) star.push_back({0, i});
  WarningCapture warnings;
  EXPECT_TRUE(n_core_filter(star, 2).empty());
  EXPECT_FALSE(warnings.messages.empty());
}

TEST(NCore, OneCoreIsIdentity) {
  const auto p = random_pairs(20, 30, 0.1, 3);
  EXPECT_EQ(n_core_filter(p, 1), p);
}

TEST(NCore, FixedPointInputUnchanged) {
  PositivePairs full;
  for (UserId u = 0; u < 3; ++u) {
    for (ItemId i = 0; i < 3; ++i) full.push_back({u, i});
  }
  EXPECT_EQ(n_core_filter(full, 3), full);
}

TEST(NCore, MatchesPeelingOracleAndIsFixedPoint) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const auto p = random_pairs(25, 25, 0.15, seed);
    for (std::size_t n : {2, 3, 4}) {
      const auto core = n_core_filter(p, n);
      EXPECT_EQ(core, naive_core(p, n)) << "seed " << seed << " n " << n;
      for (const auto& [u, c] : user_counts(core)) EXPECT_GE(c, n);
      for (const auto& [i, c] : item_counts(core)) EXPECT_GE(c, n);
      EXPECT_EQ(n_core_filter(core, n), core);
    }
  }
}

TEST(NCore, PermutationInvariant) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto p = random_pairs(30, 30, 0.12, 100 + seed);
    const auto reference = n_core_filter(p, 3);
    Rng rng(seed);
    std::shuffle(p.begin(), p.end(), rng);
    EXPECT_EQ(n_core_filter(p, 3), reference);
  }
}

TEST(NegativeSample, DisjointBalancedDeterministic) {
  PositivePairs p = {{0, 1}, {0, 4}, {0, 7}};
  const auto ex = negative_sample(p, 10, 5);
  std::set<ItemId> negatives;
  std::size_t pos = 0;
  for (const auto& e : ex) {
    if (e.label) {
      ++pos;
    } else {
      negatives.insert(e.item);
    }
  }
  EXPECT_EQ(pos, 3u);
  EXPECT_EQ(negatives.size(), 3u);
  for (const ItemId i : {1u, 4u, 7u}) EXPECT_FALSE(negatives.count(i));
  EXPECT_EQ(negative_sample(p, 10, 5), ex);
}

TEST(NegativeSample, BalancedPerUserProperty) {
  const auto p = random_pairs(30, 40, 0.2, 8);
  const auto ex = negative_sample(p, 40, 1);
  const std::set<UserItem> positive(p.begin(), p.end());
  std::map<UserId, int> balance;
  for (const auto& e : ex) {
    balance[e.user] += e.label ? 1 : -1;
    if (!e.label) {
      EXPECT_FALSE(positive.count({e.user, e.item}));
    }
  }
  for (const auto& [u, b] : balance) EXPECT_EQ(b, 0) << "user " << u;
}

TEST(NegativeSample, AllItemsObservedWarnsAndStillBalances) {
  PositivePairs p = {{0, 0}, {0, 1}, {0, 2}};
  WarningCapture warnings;
  const auto ex = negative_sample(p, 3, 2);
  EXPECT_EQ(warnings.messages.size(), 1u);
  EXPECT_EQ(std::count_if(ex.begin(), ex.end(), [](const Example& e) { return e.label == 0; }), 3);
}

TEST(Split622, TenGivesSixTwoTwo) {
  const auto s = split_622(user_examples(0, 10), 1);
  EXPECT_EQ(s.train.size(), 6u);
  EXPECT_EQ(s.eval.size(), 2u);
  EXPECT_EQ(s.test.size(), 2u);
}

TEST(Split622, FiveGivesThreeOneOne) {
  const auto s = split_622(user_examples(0, 5), 1);
  EXPECT_EQ(s.train.size(), 3u);
  EXPECT_EQ(s.eval.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
}

TEST(Split622, GlobalRatioPartitionAndPerUserRounding) {
  const auto p = random_pairs(60, 50, 0.15, 12);
  const auto ex = negative_sample(p, 50, 3);
  const auto s = split_622(ex, 4);
  const double total = double(ex.size());
  EXPECT_GE(s.train.size() / total, 0.58);
  EXPECT_LE(s.train.size() / total, 0.62);
  EXPECT_GE(s.eval.size() / total, 0.18);
  EXPECT_LE(s.eval.size() / total, 0.22);

  std::multiset<Example> all(ex.begin(), ex.end());
  std::multiset<Example> parts;
  for (const auto* part : {&s.train, &s.eval, &s.test}) parts.insert(part->begin(), part->end());
  EXPECT_EQ(all, parts);

  std::map<UserId, std::array<double, 4>> per_user;
  for (const auto& e : s.train) per_user[e.user][0] += 1;
  for (const auto& e : s.eval) per_user[e.user][1] += 1;
  for (const auto& e : s.test) per_user[e.user][2] += 1;
  for (auto& [u, c] : per_user) {
    const double n = c[0] + c[1] + c[2];
    EXPECT_LE(std::abs(c[0] - 0.6 * n), 1.0) << "user " << u;
    EXPECT_LE(std::abs(c[1] - 0.2 * n), 1.0) << "user " << u;
    EXPECT_LE(std::abs(c[2] - 0.2 * n), 1.0) << "user " << u;
    if (n >= 5) {
      EXPECT_GT(c[0], 0.0);
    }
  }
}

TEST(Rules, KnownRulesAndUnknownName) {
  EXPECT_EQ(find_dataset_rule("movielens-1m").threshold, 4.0);
  EXPECT_EQ(find_dataset_rule("amazon-book").core, 20u);
  EXPECT_EQ(find_dataset_rule("yelp2018").core, 20u);
  EXPECT_EQ(find_dataset_rule("lfm1b-2015").core, 50u);
  try {
    find_dataset_rule("nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_NE(std::string(e.what()).find("movielens-1m"), std::string::npos);
  }
}

TEST(BuildDataset, DropsUnanchoredItemsAndRejectsSharedEntities) {
  InteractionLog log;
  log.add("a", "x");
  log.add("a", "y");
  log.add("b", "x");
  log.add("b", "z");
  const KnowledgeGraph kg({{0, 0, 1}, {1, 0, 2}});
  WarningCapture warnings;
  const auto r = build_implicit_dataset(log, find_dataset_rule("lastfm-2011"),
                                        {{"x", 0}, {"y", 1}}, kg, 1);
  EXPECT_EQ(r.dropped_items, 1u);
  EXPECT_EQ(r.dataset.num_items, 2u);
  EXPECT_EQ(r.stats.interactions, 3u);
  EXPECT_THROW(build_implicit_dataset(log, find_dataset_rule("lastfm-2011"),
                                      {{"x", 0}, {"y", 0}}, kg, 1),
               Error);
}

TEST(Synth, DeterministicAndShaped) {
  SynthConfig c;
  const auto a = synth_generate(c);
  const auto b = synth_generate(c);
  ASSERT_EQ(a.kg.triples().size(), b.kg.triples().size());
  EXPECT_TRUE(std::equal(a.kg.triples().begin(), a.kg.triples().end(), b.kg.triples().begin()));
  ASSERT_EQ(a.log.records.size(), b.log.records.size());
  for (std::size_t i = 0; i < a.log.records.size(); ++i) {
    EXPECT_EQ(a.log.records[i].user, b.log.records[i].user);
    EXPECT_EQ(a.log.records[i].item, b.log.records[i].item);
  }
  EXPECT_EQ(a.truth.user_factors, b.truth.user_factors);
  EXPECT_EQ(a.kg.num_entities(), 300u);
  EXPECT_EQ(a.kg.num_relations(), 4u);
  const double density = double(a.log.records.size()) / double(c.num_users * c.num_items);
  EXPECT_NEAR(density, c.density, 0.05);
}

TEST(Synth, SingleRelation) {
  SynthConfig c;
  c.num_relations = 1;
  const auto s = synth_generate(c);
  for (const auto& t : s.kg.triples()) EXPECT_EQ(t.relation, 0u);
}

TEST(Synth, PlantedOracleSeparatesAndRandomScorerDoesNot) {
  SynthConfig c;
  const auto s = synth_generate(c);
  const auto r = build_implicit_dataset(s.log, find_dataset_rule("synth"), s.item_to_entity,
                                        s.kg, 1);
  const auto& test = r.dataset.split.test;
  std::vector<ScoredExample> planted;
  for (const auto& e : test) {
    const UserId raw_user = static_cast<UserId>(std::stoul(r.user_names[e.user]));
    const ItemId raw_item = static_cast<ItemId>(std::stoul(r.item_names[e.item]));
    planted.push_back({e.user, e.item, e.label, s.truth.logit(raw_user, raw_item, c.signal)});
  }
  EXPECT_GT(auc(planted), 0.75);

  // random scorers: mean AUC within 0.5 +- 0.05
  double total = 0.0;
  const int draws = 200;
  Rng rng(9);
  for (int d = 0; d < draws; ++d) {
    for (auto& p : planted) p.score = uniform_real(rng, 0.0, 1.0);
    total += auc(planted);
  }
  EXPECT_NEAR(total / draws, 0.5, 0.05);
}

TEST(Synth, ItemToEntityInjective) {
  const auto s = synth_generate(SynthConfig{});
  std::set<EntityId> seen;
  for (const auto& [item, e] : s.item_to_entity) {
    EXPECT_TRUE(seen.insert(e).second) << item;
    EXPECT_LT(e, s.kg.num_entities());
  }
}

TEST(Synth, RejectsBadSizes) {
  SynthConfig c;
  c.num_entities = 10;  // fewer than items
  EXPECT_THROW(synth_generate(c), Error);
  c = SynthConfig{};
  c.density = 1.5;
  EXPECT_THROW(synth_generate(c), Error);
}
