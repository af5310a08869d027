#include "kgsw/eval.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "kgsw/error.hpp"

namespace kgsw {

namespace {

void count_classes(std::span<const ScoredExample> scored, std::size_t& pos,
                   std::size_t& neg) {
  pos = neg = 0;
  for (const auto& s : scored) (s.label ? pos : neg)++;
  if (pos == 0 || neg == 0) {
    throw Error(ErrorKind::undefined_metric,
                "AUC needs at least one positive and one negative example");
  }
}

}  // namespace

double auc(std::span<const ScoredExample> scored) {
  std::size_t pos = 0, neg = 0;
  count_classes(scored, pos, neg);
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scored[a].score < scored[b].score;
  });
  // Twice the positive rank sum, so mid-ranks of tie groups stay integral.
  std::uint64_t twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scored[order[j]].score == scored[order[i]].score) ++j;
    // 1-based ranks i+1..j; their mean doubled is i + j + 1.
    const std::uint64_t twice_mid = i + j + 1;
    for (std::size_t m = i; m < j; ++m) {
      if (scored[order[m]].label) twice_rank_sum += twice_mid;
    }
    i = j;
  }
  const std::uint64_t twice_u = twice_rank_sum - std::uint64_t(pos) * (pos + 1);
  return double(twice_u) / (2.0 * double(pos) * double(neg));
}

double auc_pairwise(std::span<const ScoredExample> scored) {
  std::size_t pos = 0, neg = 0;
  count_classes(scored, pos, neg);
  std::uint64_t twice_wins = 0;
  for (const auto& p : scored) {
    if (!p.label) continue;
    for (const auto& n : scored) {
      if (n.label) continue;
      if (p.score > n.score) {
        twice_wins += 2;
      } else if (p.score == n.score) {
        twice_wins += 1;
      }
    }
  }
  return double(twice_wins) / (2.0 * double(pos) * double(neg));
}

double acc(std::span<const ScoredExample> scored, double threshold) {
  if (scored.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : scored) {
    if ((s.score >= threshold) == (s.label == 1)) ++hits;
  }
  return double(hits) / double(scored.size());
}

double recall_at_k(std::span<const UserRanking> users, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::config, "recall@k needs k >= 1");
  double total = 0.0;
  std::size_t evaluated = 0;
  std::vector<ItemId> candidates;
  for (const auto& u : users) {
    if (u.test_positives.empty()) continue;
    const std::unordered_set<ItemId> excluded(u.excluded.begin(), u.excluded.end());
    candidates.clear();
    for (ItemId i = 0; i < u.item_scores.size(); ++i) {
      if (!excluded.contains(i)) candidates.push_back(i);
    }
    const std::size_t top = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(top),
                      candidates.end(), [&](ItemId a, ItemId b) {
                        if (u.item_scores[a] != u.item_scores[b]) {
                          return u.item_scores[a] > u.item_scores[b];
                        }
                        return a < b;
                      });
    const std::unordered_set<ItemId> wanted(u.test_positives.begin(),
                                            u.test_positives.end());
    std::size_t hits = 0;
    for (std::size_t r = 0; r < top; ++r) hits += wanted.contains(candidates[r]);
    total += double(hits) / double(wanted.size());
    ++evaluated;
  }
  return evaluated ? total / double(evaluated) : 0.0;
}

}  // namespace kgsw
