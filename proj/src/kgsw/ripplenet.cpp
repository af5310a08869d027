#include "kgsw/ripplenet.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "kgsw/error.hpp"
#include "kgsw/kgcn.hpp"

namespace kgsw {

void RippleConfig::validate() const {
  if (dim == 0) throw Error(ErrorKind::config, "ripplenet dim must be >= 1");
  if (hops == 0) throw Error(ErrorKind::config, "ripplenet hops must be >= 1");
  if (memory == 0) throw Error(ErrorKind::config, "ripplenet memory (M) must be >= 1");
  if (kge_weight < 0.0) throw Error(ErrorKind::config, "kge_weight must be >= 0");
  if (!(lr > 0.0)) throw Error(ErrorKind::config, "ripplenet lr must be > 0");
  if (l2 < 0.0) throw Error(ErrorKind::config, "ripplenet l2 must be >= 0");
}

ModelState ripple_init(const RippleConfig& config, std::size_t num_entities,
                       std::size_t num_relations, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t d = config.dim;
  ModelState state;
  state.add(Parameter("entity", Partition::kg_repr, num_entities + 1, d)).xavier_uniform(rng);
  state.add(Parameter("relation", Partition::kg_repr, num_relations + 1, d * d))
      .xavier_uniform(rng, d, d);
  if (config.output_transform) {
    auto& out = state.add(Parameter("output", Partition::aggregator, d, d));
    for (std::size_t k = 0; k < d; ++k) out.row(k)[k] = 1.0;
  }
  return state;
}

namespace {

// out[a] = sum_b R[a][b] x[b]
void mat_vec(std::span<const double> r, std::span<const double> x,
             std::span<double> out) {
  const std::size_t d = x.size();
  for (std::size_t a = 0; a < d; ++a) {
    double acc = 0.0;
    for (std::size_t b = 0; b < d; ++b) acc += r[a * d + b] * x[b];
    out[a] = acc;
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

const RippleSet& ripple_of(const RippleSets& ripples, UserId user) {
  if (user >= ripples.size()) {
    throw Error(ErrorKind::lookup, "no ripple set for user " + std::to_string(user) +
                                       "; build them with build_ripple_sets first");
  }
  return ripples[user];
}

void check_shape(const RippleSet& ripple, const RippleConfig& config) {
  if (ripple.hops.size() != config.hops) {
    throw Error(ErrorKind::config, "ripple set has " + std::to_string(ripple.hops.size()) +
                                       " hops, config expects " + std::to_string(config.hops));
  }
  for (const auto& hop : ripple.hops) {
    if (hop.size() != config.memory) {
      throw Error(ErrorKind::config, "ripple hop has " + std::to_string(hop.size()) +
                                         " memories, config expects " +
                                         std::to_string(config.memory));
    }
  }
}

void accumulate_example(ModelState& state, const RippleConfig& config,
                        const RippleSet& ripple, EntityId item,
                        const RippleTrace& t, double dlogit) {
  const std::size_t d = config.dim;
  auto& entity = state.get("entity");
  auto& relation = state.get("relation");
  const auto v = std::as_const(entity).row(item);

  std::vector<double> dv(d, 0.0), dpref(d), dsum(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    dv[c] += dlogit * t.preference[c];
    dpref[c] = dlogit * v[c];
  }
  if (config.output_transform) {
    auto& out = state.get("output");
    for (std::size_t k = 0; k < d; ++k) {
      const auto trow = std::as_const(out).row(k);
      auto grow = out.grad_row(k);
      for (std::size_t c = 0; c < d; ++c) {
        grow[c] += t.response_sum[k] * dpref[c];
        dsum[k] += trow[c] * dpref[c];
      }
    }
  } else {
    dsum = dpref;
  }

  std::vector<double> rh(d), dp;
  for (std::size_t h = 0; h < config.hops; ++h) {
    const auto& memories = ripple.hops[h];
    const auto& p = t.attention[h];
    dp.assign(memories.size(), 0.0);
    double weighted = 0.0;
    for (std::size_t i = 0; i < memories.size(); ++i) {
      const auto tail = std::as_const(entity).row(memories[i].tail);
      dp[i] = dot(dsum, tail);
      weighted += p[i] * dp[i];
      auto tg = entity.grad_row(memories[i].tail);
      for (std::size_t c = 0; c < d; ++c) tg[c] += p[i] * dsum[c];
    }
    for (std::size_t i = 0; i < memories.size(); ++i) {
      const double ds = p[i] * (dp[i] - weighted);
      const auto& m = memories[i];
      const auto r = std::as_const(relation).row(m.relation);
      const auto head = std::as_const(entity).row(m.head);
      mat_vec(r, head, rh);
      for (std::size_t a = 0; a < d; ++a) dv[a] += ds * rh[a];
      auto hg = entity.grad_row(m.head);
      auto rg = relation.grad_row(m.relation);
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) {
          hg[b] += ds * v[a] * r[a * d + b];
          rg[a * d + b] += ds * v[a] * head[b];
        }
      }
    }
  }
  auto vg = entity.grad_row(item);
  for (std::size_t c = 0; c < d; ++c) vg[c] += dv[c];
}

}  // namespace

double ripple_forward(const ModelState& state, const RippleConfig& config,
                      const RippleSet& ripple, EntityId item_entity,
                      RippleTrace* trace) {
  check_shape(ripple, config);
  const auto& entity = state.get("entity");
  const auto& relation = state.get("relation");
  if (item_entity >= entity.rows()) {
    throw Error(ErrorKind::lookup, "unknown item entity " + std::to_string(item_entity));
  }
  const std::size_t d = config.dim;
  const auto v = entity.row(item_entity);

  RippleTrace local;
  RippleTrace& t = trace ? *trace : local;
  t.attention.assign(config.hops, {});
  t.response_sum.assign(d, 0.0);
  std::vector<double> rh(d), scores;
  for (std::size_t h = 0; h < config.hops; ++h) {
    const auto& memories = ripple.hops[h];
    scores.resize(memories.size());
    for (std::size_t i = 0; i < memories.size(); ++i) {
      mat_vec(relation.row(memories[i].relation), entity.row(memories[i].head), rh);
      scores[i] = dot(v, rh);
    }
    t.attention[h] = attention_weights(scores);
    for (std::size_t i = 0; i < memories.size(); ++i) {
      const auto tail = entity.row(memories[i].tail);
      for (std::size_t c = 0; c < d; ++c) t.response_sum[c] += t.attention[h][i] * tail[c];
    }
    for (const double x : t.response_sum) {
      if (!std::isfinite(x)) {
        throw Error(ErrorKind::numeric, "non-finite response at hop " + std::to_string(h + 1));
      }
    }
  }
  if (config.output_transform) {
    const auto& out = state.get("output");
    t.preference.assign(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      const auto trow = out.row(k);
      for (std::size_t c = 0; c < d; ++c) t.preference[c] += t.response_sum[k] * trow[c];
    }
  } else {
    t.preference = t.response_sum;
  }
  t.logit = dot(v, t.preference);
  if (!std::isfinite(t.logit)) {
    throw Error(ErrorKind::numeric,
                "non-finite logit at hop " + std::to_string(config.hops));
  }
  return sigmoid(t.logit);
}

double ripple_forward(const ModelState& state, const RippleConfig& config,
                      const RippleSets& ripples, UserId user, EntityId item_entity,
                      RippleTrace* trace) {
  return ripple_forward(state, config, ripple_of(ripples, user), item_entity, trace);
}

double kge_regularizer(ModelState& state, std::span<const Triple> triples,
                       double weight, bool accumulate) {
  if (weight < 0.0) throw Error(ErrorKind::config, "kge_weight must be >= 0");
  if (weight == 0.0 || triples.empty()) return 0.0;
  auto& entity = state.get("entity");
  auto& relation = state.get("relation");
  const std::size_t d = entity.cols();
  std::vector<double> rt(d);
  double loss = 0.0;
  for (const auto& tr : triples) {
    const auto h = std::as_const(entity).row(tr.head);
    const auto t = std::as_const(entity).row(tr.tail);
    const auto r = std::as_const(relation).row(tr.relation);
    mat_vec(r, t, rt);
    const double z = dot(h, rt);
    const double s = sigmoid(z);
    loss += weight * (s - 1.0) * (s - 1.0);
    if (!accumulate) continue;
    const double g = weight * 2.0 * (s - 1.0) * s * (1.0 - s);
    {
      auto hg = entity.grad_row(tr.head);
      for (std::size_t a = 0; a < d; ++a) hg[a] += g * rt[a];
    }
    auto tg = entity.grad_row(tr.tail);
    auto rg = relation.grad_row(tr.relation);
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        tg[b] += g * h[a] * r[a * d + b];
        rg[a * d + b] += g * h[a] * t[b];
      }
    }
  }
  return loss;
}

double ripple_backward(ModelState& state, const RippleConfig& config,
                       const RippleSets& ripples, std::span<const Example> batch,
                       const ImplicitDataset& dataset) {
  state.clear_grads();
  if (batch.empty()) return 0.0;
  const double scale = 1.0 / double(batch.size());
  const RelationId self_relation =
      static_cast<RelationId>(state.get("relation").rows() - 1);
  double loss = 0.0;
  RippleTrace trace;
  std::vector<Triple> kg_triples;
  for (const auto& ex : batch) {
    const auto& ripple = ripple_of(ripples, ex.user);
    const EntityId item = dataset.entity_of(ex.item);
    ripple_forward(state, config, ripple, item, &trace);
    double dlogit = 0.0;
    loss += bce_with_logit(trace.logit, ex.label, &dlogit) * scale;
    accumulate_example(state, config, ripple, item, trace, dlogit * scale);
    for (const auto& hop : ripple.hops) {
      for (const auto& m : hop) {
        if (m.relation != self_relation) kg_triples.push_back(m);
      }
    }
  }
  loss += kge_regularizer(state, kg_triples, config.kge_weight * scale);
  return loss + l2_penalty(state, config.l2);
}

double ripple_objective(const ModelState& state, const RippleConfig& config,
                        const RippleSets& ripples, std::span<const Example> batch,
                        const ImplicitDataset& dataset) {
  ModelState scratch = state;
  return ripple_backward(scratch, config, ripples, batch, dataset);
}

}  // namespace kgsw
