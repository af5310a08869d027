#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "kgsw/dataset.hpp"
#include "kgsw/kg_store.hpp"

namespace kgsw {

// Per-user propagation memories: hops[h] holds exactly M triples.
struct RippleSet {
  std::vector<std::vector<Triple>> hops;

  friend bool operator==(const RippleSet&, const RippleSet&) = default;
};

using RippleSets = std::vector<RippleSet>;  // indexed by user id

// Hop-1 heads are the entities of each user's positive training items;
// hop-(h+1) heads are the tails sampled at hop h. Expansion follows
// head-to-tail edges. An empty candidate set yields M copies of the sentinel
// (padding, SELF, padding).
RippleSets build_ripple_sets(const KnowledgeGraph& kg,
                             const ImplicitDataset& dataset, std::size_t hops,
                             std::size_t memory, std::uint64_t seed);

Triple ripple_sentinel(const KnowledgeGraph& kg);

}  // namespace kgsw
