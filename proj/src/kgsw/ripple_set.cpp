#include "kgsw/ripple_set.hpp"

#include <algorithm>

#include "kgsw/error.hpp"
#include "kgsw/rng.hpp"

namespace kgsw {

Triple ripple_sentinel(const KnowledgeGraph& kg) {
  return {kg.padding_entity(), kg.self_relation(), kg.padding_entity()};
}

RippleSets build_ripple_sets(const KnowledgeGraph& kg,
                             const ImplicitDataset& dataset, std::size_t hops,
                             std::size_t memory, std::uint64_t seed) {
  if (hops == 0) throw Error(ErrorKind::config, "ripple hop count must be >= 1");
  if (memory == 0) throw Error(ErrorKind::config, "ripple memory size must be >= 1");

  const auto clicked = positives_by_user(dataset.split.train, dataset.num_users);
  const Triple sentinel = ripple_sentinel(kg);
  RippleSets sets(dataset.num_users);
  std::vector<Triple> candidates;
  for (UserId u = 0; u < dataset.num_users; ++u) {
    Rng rng(mix_seed(seed, u));
    std::vector<EntityId> frontier;
    for (const ItemId item : clicked[u]) frontier.push_back(dataset.entity_of(item));

    auto& set = sets[u];
    set.hops.resize(hops);
    for (std::size_t h = 0; h < hops; ++h) {
      std::sort(frontier.begin(), frontier.end());
      frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
      candidates.clear();
      for (const EntityId head : frontier) {
        for (const auto& e : kg.outgoing(head)) {
          candidates.push_back({head, e.relation, e.tail});
        }
      }
      auto& memories = set.hops[h];
      memories.reserve(memory);
      if (candidates.empty()) {
        memories.assign(memory, sentinel);
      } else {
        sample_exact_k(std::span<const Triple>(candidates), memory, rng, memories);
      }
      frontier.clear();
      for (const auto& t : memories) {
        if (t != sentinel) frontier.push_back(t.tail);
      }
    }
  }
  return sets;
}

}  // namespace kgsw
