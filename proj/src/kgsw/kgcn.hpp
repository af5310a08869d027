#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "kgsw/dataset.hpp"
#include "kgsw/kg_store.hpp"
#include "kgsw/nn.hpp"

namespace kgsw {

enum class AggregatorKind { sum, concat, neighbor };

std::string_view to_string(AggregatorKind k);
AggregatorKind aggregator_from_string(std::string_view s);

struct KgcnConfig {
  std::size_t dim = 16;
  std::size_t hops = 1;
  std::size_t neighbors = 8;
  AggregatorKind aggregator = AggregatorKind::sum;
  double lr = 0.005;
  double l2 = 1e-4;

  void validate() const;
};

// Tensors: "entity" (|E|+1 x dim) and "relation" (|R|+1 x dim) form the KG
// representation; "user" (|U| x dim) and per-hop "agg.W<h>" / "agg.b<h>"
// belong to the aggregator.
ModelState kgcn_init(const KgcnConfig& config, std::size_t num_users,
                     std::size_t num_entities, std::size_t num_relations,
                     std::uint64_t seed);

// Number of node slots in the receptive tree of one item: sum_{h=0..H} K^h.
std::size_t kgcn_receptive_tree_size(std::size_t hops, std::size_t k);

double user_relation_score(std::span<const double> user,
                           std::span<const double> relation);

// Softmax over the given scores.
std::vector<double> attention_weights(std::span<const double> scores);

// One neighbor aggregation for a single entity:
//   n = sum_k softmax(u . r_k) t_k
//   sum:      act(W (self + n) + b)
//   concat:   act(W [self; n] + b)
//   neighbor: act(W n + b)
// with act = tanh unless `final_hop`, where it is the identity. W is stored
// row-major as in_dim x dim and applied as x^T W.
std::vector<double> aggregate_hop(AggregatorKind kind,
                                  std::span<const double> self,
                                  std::span<const double> neighbor_reprs,
                                  std::span<const double> relation_reprs,
                                  std::span<const double> user,
                                  std::span<const double> weight,
                                  std::span<const double> bias, bool final_hop);

// Everything kgcn_backward needs from one forward pass.
struct KgcnTrace {
  std::uint32_t user = 0;
  double logit = 0.0;
  std::vector<std::vector<EntityId>> entities;    // per level, K^i ids
  std::vector<std::vector<RelationId>> relations;  // per level (level 0 empty)
  std::vector<std::vector<double>> attention;      // per level < H, K^i * K
  // reprs[it][i]: level-i representations entering iteration it (K^i x dim).
  std::vector<std::vector<std::vector<double>>> reprs;
  // Per iteration/level: combined input x (K^i x in_dim) and aggregated
  // neighbor summary n (K^i x dim).
  std::vector<std::vector<std::vector<double>>> inputs;
  std::vector<std::vector<std::vector<double>>> summaries;
};

// Click probability sigmoid(u . item_repr_H(v)).
double kgcn_forward(const ModelState& state, const KgcnConfig& config,
                    const StageGraph& graph, UserId user, EntityId item_entity,
                    KgcnTrace* trace = nullptr);

// Accumulates d(objective)/d(params) for one traced example given
// d(objective)/d(logit).
void kgcn_accumulate_example(ModelState& state, const KgcnConfig& config,
                             const KgcnTrace& trace, double dlogit);

// Mean BCE over the batch plus L2 on touched rows; fills gradients (after
// clearing them) and returns the objective.
double kgcn_backward(ModelState& state, const KgcnConfig& config,
                     const StageGraph& graph, std::span<const Example> batch,
                     const ImplicitDataset& dataset);

// Same objective without touching gradients.
double kgcn_objective(const ModelState& state, const KgcnConfig& config,
                      const StageGraph& graph, std::span<const Example> batch,
                      const ImplicitDataset& dataset);

}  // namespace kgsw
