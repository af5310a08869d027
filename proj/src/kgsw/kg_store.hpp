#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "kgsw/rng.hpp"

namespace kgsw {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

inline constexpr std::uint32_t kNoTriple = 0xffffffffu;

// One traversable incidence of an entity. triple_index points back into
// KnowledgeGraph::triples(); sentinels carry kNoTriple.
struct Edge {
  RelationId relation = 0;
  EntityId tail = 0;
  std::uint32_t triple_index = kNoTriple;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Immutable triple store. Entity ids run over [0, num_entities); one extra
// padding entity (id num_entities) and one extra SELF relation (id
// num_relations) are reserved for sentinels, so embedding tables built on
// top of a graph have num_entities + 1 and num_relations + 1 rows.
class KnowledgeGraph {
 public:
  // Sizes default to 1 + the largest id present; larger explicit sizes are
  // allowed (isolated entities, unused relations).
  explicit KnowledgeGraph(std::vector<Triple> triples,
                          std::size_t num_entities = 0,
                          std::size_t num_relations = 0);

  std::size_t num_entities() const noexcept { return num_entities_; }
  std::size_t num_relations() const noexcept { return num_relations_; }
  std::span<const Triple> triples() const noexcept { return triples_; }

  EntityId padding_entity() const noexcept {
    return static_cast<EntityId>(num_entities_);
  }
  RelationId self_relation() const noexcept {
    return static_cast<RelationId>(num_relations_);
  }

  // Every incident triple, traversable in both directions. A self-loop
  // triple contributes one entry.
  std::span<const Edge> adjacency(EntityId e) const;
  // Head-to-tail edges only.
  std::span<const Edge> outgoing(EntityId e) const;
  std::size_t degree(EntityId e) const { return adjacency(e).size(); }

 private:
  std::size_t num_entities_ = 0;
  std::size_t num_relations_ = 0;
  std::vector<Triple> triples_;
  std::vector<std::size_t> adj_offsets_;
  std::vector<Edge> adj_edges_;
  std::vector<std::size_t> out_offsets_;
  std::vector<Edge> out_edges_;
};

KnowledgeGraph load_kg(const std::filesystem::path& triple_file);
void save_kg(const KnowledgeGraph& kg, const std::filesystem::path& triple_file);

// Exactly K (relation, tail) slots for every entity, including the padding
// entity. Entities with degree 0 hold K self-loop sentinels.
class StageGraph {
 public:
  StageGraph(std::size_t k, std::uint64_t seed, std::size_t num_entities,
             std::vector<Edge> slots);

  std::size_t k() const noexcept { return k_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t num_entities() const noexcept { return num_entities_; }
  std::span<const Edge> neighbors(EntityId e) const;
  std::span<const Edge> slots() const noexcept { return slots_; }

  // Sorted distinct triple indices covered by the slots; sentinels excluded.
  std::vector<std::uint32_t> sampled_triple_indices() const;

  friend bool operator==(const StageGraph&, const StageGraph&) = default;

 private:
  std::size_t k_;
  std::uint64_t seed_;
  std::size_t num_entities_;
  std::vector<Edge> slots_;
};

// Appends exactly k draws from a non-empty candidate list: min(d, k) distinct
// picks first, then uniform draws with replacement for the remaining k - d.
template <class T>
void sample_exact_k(std::span<const T> candidates, std::size_t k, Rng& rng,
                    std::vector<T>& out) {
  const std::size_t d = candidates.size();
  std::vector<std::size_t> order(d);
  for (std::size_t i = 0; i < d; ++i) order[i] = i;
  const std::size_t distinct = d < k ? d : k;
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < distinct; ++i) {
    std::swap(order[i], order[i + uniform_index(rng, d - i)]);
  }
  for (std::size_t i = 0; i < distinct; ++i) out.push_back(candidates[order[i]]);
  for (std::size_t i = distinct; i < k; ++i) {
    out.push_back(candidates[uniform_index(rng, d)]);
  }
}

StageGraph sample_stage_graph(const KnowledgeGraph& kg, std::size_t k,
                              std::uint64_t seed);

}  // namespace kgsw
