#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgsw/kgsw.h"

using nlohmann::json;

namespace {

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { kgsw_free_string(p); }
  json parse() const { return json::parse(p); }
};

std::filesystem::path temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("kgsw-capi-" + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

void collect(const char* message, void* user_data) {
  static_cast<std::vector<std::string>*>(user_data)->push_back(message);
}

}  // namespace

TEST(CApi, VersionAndStatusStrings) {
  EXPECT_GT(std::strlen(kgsw_version()), 0u);
  EXPECT_STREQ(kgsw_status_string(KGSW_OK), "ok");
  EXPECT_GT(std::strlen(kgsw_status_string(KGSW_ERR_PARTITION_MISMATCH)), 0u);
}

TEST(CApi, KnowledgeGraphHandles) {
  const uint32_t h[] = {0, 0, 1, 3};
  const uint32_t r[] = {0, 1, 0, 2};
  const uint32_t t[] = {1, 2, 2, 3};
  kgsw_kg* kg = nullptr;
  ASSERT_EQ(kgsw_kg_from_triples(h, r, t, 4, &kg), KGSW_OK);
  EXPECT_EQ(kgsw_kg_num_entities(kg), 4u);
  EXPECT_EQ(kgsw_kg_num_relations(kg), 3u);
  EXPECT_EQ(kgsw_kg_num_triples(kg), 4u);
  size_t d = 0;
  ASSERT_EQ(kgsw_kg_degree(kg, 0, &d), KGSW_OK);
  EXPECT_EQ(d, 2u);
  ASSERT_EQ(kgsw_kg_degree(kg, 3, &d), KGSW_OK);
  EXPECT_EQ(d, 1u);  // self-loop counted once
  EXPECT_EQ(kgsw_kg_degree(kg, 99, &d), KGSW_ERR_LOOKUP);
  EXPECT_GT(std::strlen(kgsw_last_error()), 0u);

  kgsw_stage_graph* g = nullptr;
  ASSERT_EQ(kgsw_stage_graph_sample(kg, 3, 11, &g), KGSW_OK);
  EXPECT_STREQ(kgsw_last_error(), "");
  EXPECT_EQ(kgsw_stage_graph_k(g), 3u);
  uint32_t rel[3], tail[3];
  ASSERT_EQ(kgsw_stage_graph_neighbors(g, 0, rel, tail, 3), KGSW_OK);
  for (int i = 0; i < 3; ++i) {
    EXPECT_TRUE((rel[i] == 0 && tail[i] == 1) || (rel[i] == 1 && tail[i] == 2));
  }
  EXPECT_EQ(kgsw_stage_graph_neighbors(g, 0, rel, tail, 2), KGSW_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(kgsw_stage_graph_sample(kg, 0, 1, &g), KGSW_ERR_CONFIG);
  EXPECT_EQ(g, nullptr);
  kgsw_stage_graph_free(g);
  kgsw_kg_free(kg);
}

TEST(CApi, KgLoadErrors) {
  kgsw_kg* kg = nullptr;
  EXPECT_EQ(kgsw_kg_load("/nonexistent/kg.tsv", &kg), KGSW_ERR_IO);
  EXPECT_EQ(kg, nullptr);
  EXPECT_EQ(kgsw_kg_load(nullptr, &kg), KGSW_ERR_INVALID_ARGUMENT);
  const auto dir = temp_dir("load");
  std::ofstream(dir / "bad.tsv") << "0\t0\t1\nx\t1\t2\n";
  EXPECT_EQ(kgsw_kg_load((dir / "bad.tsv").c_str(), &kg), KGSW_ERR_PARSE);
  EXPECT_NE(std::string(kgsw_last_error()).find(":2:"), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(CApi, Auc) {
  const double s[] = {0.9, 0.1, 0.4, 0.4};
  const uint8_t y[] = {1, 0, 1, 0};
  double out = 0;
  ASSERT_EQ(kgsw_auc(s, y, 4, &out), KGSW_OK);
  EXPECT_DOUBLE_EQ(out, 0.875);
  const uint8_t one[] = {1, 1, 1, 1};
  EXPECT_EQ(kgsw_auc(s, one, 4, &out), KGSW_ERR_UNDEFINED_METRIC);
}

TEST(CApi, RunConfigDefaultsAndErrors) {
  OwnedString cfg;
  ASSERT_EQ(kgsw_run_config(nullptr, &cfg.p), KGSW_OK);
  const auto j = cfg.parse();
  EXPECT_EQ(j.at("plan").at("stages"), 8);
  EXPECT_EQ(j.at("model"), "kgcn");

  OwnedString bad;
  EXPECT_EQ(kgsw_run_config(R"({"stages": 3})", &bad.p), KGSW_ERR_CONFIG);
  EXPECT_EQ(bad.p, nullptr);
  EXPECT_EQ(kgsw_run_config("{not json", &bad.p), KGSW_ERR_PARSE);
  EXPECT_EQ(kgsw_run_config("{}", nullptr), KGSW_ERR_INVALID_ARGUMENT);
}

TEST(CApi, DatasetRules) {
  OwnedString rules;
  ASSERT_EQ(kgsw_dataset_rules(&rules.p), KGSW_OK);
  const auto j = rules.parse();
  ASSERT_TRUE(j.is_array());
  EXPECT_GE(j.size(), 4u);
}

TEST(CApi, SynthTrainEvaluate) {
  const auto dir = temp_dir("train");
  const json synth = {{"num_users", 20}, {"num_items", 30}, {"num_entities", 90}};
  OwnedString stats;
  ASSERT_EQ(kgsw_synth(json({{"synth", synth}, {"seed", 2}, {"out_dir", (dir / "data").string()}})
                           .dump()
                           .c_str(),
                       &stats.p),
            KGSW_OK)
      << kgsw_last_error();
  EXPECT_GT(stats.parse().at("interactions").get<int>(), 0);

  const json config = {{"data", {{"path", (dir / "data").string()}}},
                       {"kgcn", {{"dim", 4}, {"neighbors", 2}}},
                       {"plan", {{"stages", 2}, {"max_epochs", 2}}},
                       {"output_dir", (dir / "run").string()}};
  OwnedString report;
  ASSERT_EQ(kgsw_train(config.dump().c_str(), &report.p), KGSW_OK) << kgsw_last_error();
  const auto r = report.parse();
  EXPECT_EQ(r.at("stages").size(), 2u);

  OwnedString ev;
  ASSERT_EQ(kgsw_evaluate((dir / "run").c_str(), &ev.p), KGSW_OK) << kgsw_last_error();
  EXPECT_EQ(ev.parse().at("test"), r.at("test"));
  OwnedString missing;
  EXPECT_EQ(kgsw_evaluate((dir / "nothing").c_str(), &missing.p), KGSW_ERR_IO);
  std::filesystem::remove_all(dir);
}

TEST(CApi, WarningHandlerReceivesDiagnostics) {
  std::vector<std::string> seen;
  kgsw_set_warning_handler(collect, &seen);
  const auto dir = temp_dir("warn");
  // a 20-core rule on a tiny log filters everything and warns
  std::ofstream(dir / "ratings.tsv") << "u1\ti1\t5\nu2\ti2\t5\n";
  std::ofstream(dir / "kg.tsv") << "0\t0\t1\n";
  std::ofstream(dir / "map.tsv") << "i1\t0\ni2\t1\n";
  OwnedString out;
  const json req = {{"ratings", (dir / "ratings.tsv").string()},
                    {"kg", (dir / "kg.tsv").string()},
                    {"item_entity", (dir / "map.tsv").string()},
                    {"rule", "amazon-book"},
                    {"out_dir", (dir / "out").string()}};
  kgsw_ingest(req.dump().c_str(), &out.p);
  kgsw_set_warning_handler(nullptr, nullptr);
  EXPECT_FALSE(seen.empty());
  std::filesystem::remove_all(dir);
}
