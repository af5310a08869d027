#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kgsw/dataset.hpp"
#include "kgsw/nn.hpp"
#include "kgsw/ripple_set.hpp"

namespace kgsw {

struct RippleConfig {
  std::size_t dim = 8;
  std::size_t hops = 2;
  std::size_t memory = 16;
  double kge_weight = 0.01;
  double lr = 0.02;
  double l2 = 1e-5;
  // When false the output transform is a fixed identity and is not stored.
  bool output_transform = true;

  void validate() const;
};

// Tensors: "entity" (|E|+1 x dim) and "relation" (|R|+1 x dim*dim, one
// row-major matrix per relation) form the KG representation; "output"
// (dim x dim, initialized to the identity) is the aggregator.
ModelState ripple_init(const RippleConfig& config, std::size_t num_entities,
                       std::size_t num_relations, std::uint64_t seed);

struct RippleTrace {
  double logit = 0.0;
  std::vector<std::vector<double>> attention;  // per hop, M weights
  std::vector<double> response_sum;            // sum_h o_h
  std::vector<double> preference;              // response_sum^T T
};

// p_i = softmax_i(v^T R_i h_i), o_h = sum_i p_i t_i,
// y = sigmoid(v . ((sum_h o_h)^T T)).
double ripple_forward(const ModelState& state, const RippleConfig& config,
                      const RippleSet& ripple, EntityId item_entity,
                      RippleTrace* trace = nullptr);

// Looks up the user's ripple set first; a missing set is a lookup error.
double ripple_forward(const ModelState& state, const RippleConfig& config,
                      const RippleSets& ripples, UserId user, EntityId item_entity,
                      RippleTrace* trace = nullptr);

// weight * sum over triples of (sigmoid(h^T R t) - 1)^2. Gradients are
// accumulated into `state` only when `accumulate` is set.
double kge_regularizer(ModelState& state, std::span<const Triple> triples,
                       double weight, bool accumulate = true);

// Mean BCE + kge_weight * (KGE over the batch's memories) / batch size + L2
// on touched rows. Clears and fills gradients; returns the objective.
double ripple_backward(ModelState& state, const RippleConfig& config,
                       const RippleSets& ripples, std::span<const Example> batch,
                       const ImplicitDataset& dataset);

double ripple_objective(const ModelState& state, const RippleConfig& config,
                        const RippleSets& ripples, std::span<const Example> batch,
                        const ImplicitDataset& dataset);

}  // namespace kgsw
