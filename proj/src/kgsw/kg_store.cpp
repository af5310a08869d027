#include "kgsw/kg_store.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <string>

#include "kgsw/error.hpp"
#include "kgsw/rng.hpp"
#include "kgsw/tsv.hpp"

namespace kgsw {

namespace {

void build_csr(std::size_t num_entities,
               const std::vector<std::pair<EntityId, Edge>>& incidences,
               std::vector<std::size_t>& offsets, std::vector<Edge>& edges) {
  offsets.assign(num_entities + 1, 0);
  for (const auto& [e, edge] : incidences) ++offsets[e + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  edges.resize(incidences.size());
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (const auto& [e, edge] : incidences) edges[cursor[e]++] = edge;
}

}  // namespace

KnowledgeGraph::KnowledgeGraph(std::vector<Triple> triples,
                               std::size_t num_entities,
                               std::size_t num_relations)
    : triples_(std::move(triples)) {
  std::size_t max_entity = 0, max_relation = 0;
  for (const auto& t : triples_) {
    max_entity = std::max<std::size_t>({max_entity, t.head + 1ull, t.tail + 1ull});
    max_relation = std::max<std::size_t>(max_relation, t.relation + 1ull);
  }
  if (num_entities != 0 && num_entities < max_entity) {
    throw Error(ErrorKind::config, "entity id out of range: num_entities=" +
                                       std::to_string(num_entities) +
                                       " but triples reference id " +
                                       std::to_string(max_entity - 1));
  }
  if (num_relations != 0 && num_relations < max_relation) {
    throw Error(ErrorKind::config, "relation id out of range: num_relations=" +
                                       std::to_string(num_relations) +
                                       " but triples reference id " +
                                       std::to_string(max_relation - 1));
  }
  num_entities_ = std::max(num_entities, max_entity);
  num_relations_ = std::max(num_relations, max_relation);
  if (triples_.size() >= kNoTriple) {
    throw Error(ErrorKind::config, "too many triples");
  }

  std::vector<std::pair<EntityId, Edge>> both, out;
  both.reserve(triples_.size() * 2);
  out.reserve(triples_.size());
  for (std::size_t i = 0; i < triples_.size(); ++i) {
    const auto& t = triples_[i];
    const auto idx = static_cast<std::uint32_t>(i);
    both.push_back({t.head, Edge{t.relation, t.tail, idx}});
    if (t.head != t.tail) both.push_back({t.tail, Edge{t.relation, t.head, idx}});
    out.push_back({t.head, Edge{t.relation, t.tail, idx}});
  }
  build_csr(num_entities_, both, adj_offsets_, adj_edges_);
  build_csr(num_entities_, out, out_offsets_, out_edges_);
}

std::span<const Edge> KnowledgeGraph::adjacency(EntityId e) const {
  if (e >= num_entities_) return {};
  return std::span<const Edge>(adj_edges_).subspan(
      adj_offsets_[e], adj_offsets_[e + 1] - adj_offsets_[e]);
}

std::span<const Edge> KnowledgeGraph::outgoing(EntityId e) const {
  if (e >= num_entities_) return {};
  return std::span<const Edge>(out_edges_).subspan(
      out_offsets_[e], out_offsets_[e + 1] - out_offsets_[e]);
}

KnowledgeGraph load_kg(const std::filesystem::path& triple_file) {
  std::vector<Triple> triples;
  for_each_tsv_row(triple_file, 3, [&](std::span<const std::string_view> f,
                                       std::size_t line) {
    triples.push_back(Triple{parse_id(f[0], triple_file, line),
                             parse_id(f[1], triple_file, line),
                             parse_id(f[2], triple_file, line)});
  });
  if (triples.empty()) {
    throw Error(ErrorKind::parse,
                "triple file contains no triples: " + triple_file.string());
  }
  return KnowledgeGraph(std::move(triples));
}

void save_kg(const KnowledgeGraph& kg, const std::filesystem::path& triple_file) {
  std::ofstream out(triple_file);
  if (!out) throw Error(ErrorKind::io, "cannot write " + triple_file.string());
  for (const auto& t : kg.triples()) {
    out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
  }
}

StageGraph::StageGraph(std::size_t k, std::uint64_t seed,
                       std::size_t num_entities, std::vector<Edge> slots)
    : k_(k), seed_(seed), num_entities_(num_entities), slots_(std::move(slots)) {
  if (slots_.size() != (num_entities_ + 1) * k_) {
    throw Error(ErrorKind::config, "stage graph slot count does not match K");
  }
}

std::span<const Edge> StageGraph::neighbors(EntityId e) const {
  if (e > num_entities_) {
    throw Error(ErrorKind::lookup, "entity " + std::to_string(e) +
                                       " outside stage graph");
  }
  return std::span<const Edge>(slots_).subspan(std::size_t{e} * k_, k_);
}

std::vector<std::uint32_t> StageGraph::sampled_triple_indices() const {
  std::vector<std::uint32_t> ids;
  for (const auto& s : slots_) {
    if (s.triple_index != kNoTriple) ids.push_back(s.triple_index);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

StageGraph sample_stage_graph(const KnowledgeGraph& kg, std::size_t k,
                              std::uint64_t seed) {
  if (k == 0) throw Error(ErrorKind::config, "neighbor sampling size K must be >= 1");
  Rng rng(seed);
  const std::size_t n = kg.num_entities();
  std::vector<Edge> slots;
  slots.reserve((n + 1) * k);
  for (std::size_t e = 0; e <= n; ++e) {
    const auto id = static_cast<EntityId>(e);
    const auto adj = kg.adjacency(id);
    if (adj.empty()) {
      slots.insert(slots.end(), k, Edge{kg.self_relation(), id, kNoTriple});
    } else {
      sample_exact_k(adj, k, rng, slots);
    }
  }
  return StageGraph(k, seed, n, std::move(slots));
}

}  // namespace kgsw
