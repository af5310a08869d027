#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kgsw/dataset.hpp"

namespace kgsw {

struct ScoredExample {
  UserId user = 0;
  ItemId item = 0;
  std::uint8_t label = 0;
  double score = 0.0;
};

// Mann-Whitney AUC via mid-rank sums; ties count one half. Throws
// ErrorKind::undefined_metric unless both classes are present.
double auc(std::span<const ScoredExample> scored);

// O(P * N) pairwise reference for auc().
double auc_pairwise(std::span<const ScoredExample> scored);

double acc(std::span<const ScoredExample> scored, double threshold = 0.5);

// Dense score matrix over all items for one user plus the items excluded
// from that user's candidate set (train/eval positives) and the test
// positives to recover.
struct UserRanking {
  std::vector<double> item_scores;
  std::vector<ItemId> excluded;
  std::vector<ItemId> test_positives;
};

// Mean over users with >= 1 test positive of |top-k ∩ test| / |test|.
// Ranking is by score descending, ties by ascending item id.
double recall_at_k(std::span<const UserRanking> users, std::size_t k);

}  // namespace kgsw
