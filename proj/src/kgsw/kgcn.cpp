#include "kgsw/kgcn.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <string>

#include "kgsw/error.hpp"

namespace kgsw {

std::string_view to_string(AggregatorKind k) {
  switch (k) {
    case AggregatorKind::sum: return "sum";
    case AggregatorKind::concat: return "concat";
    case AggregatorKind::neighbor: return "neighbor";
  }
  return "sum";
}

AggregatorKind aggregator_from_string(std::string_view s) {
  if (s == "sum") return AggregatorKind::sum;
  if (s == "concat") return AggregatorKind::concat;
  if (s == "neighbor") return AggregatorKind::neighbor;
  throw Error(ErrorKind::config, "unknown aggregator '" + std::string(s) +
                                     "' (known: sum, concat, neighbor)");
}

void KgcnConfig::validate() const {
  if (dim == 0) throw Error(ErrorKind::config, "kgcn dim must be >= 1");
  if (hops == 0) throw Error(ErrorKind::config, "kgcn hops must be >= 1");
  if (neighbors == 0) throw Error(ErrorKind::config, "kgcn neighbors (K) must be >= 1");
  if (!(lr > 0.0)) throw Error(ErrorKind::config, "kgcn lr must be > 0");
  if (l2 < 0.0) throw Error(ErrorKind::config, "kgcn l2 must be >= 0");
}

namespace {

std::size_t input_dim(AggregatorKind kind, std::size_t dim) {
  return kind == AggregatorKind::concat ? 2 * dim : dim;
}

std::string weight_name(std::size_t hop) { return "agg.W" + std::to_string(hop); }
std::string bias_name(std::size_t hop) { return "agg.b" + std::to_string(hop); }

void combine(AggregatorKind kind, std::span<const double> self,
             std::span<const double> summary, std::span<double> x) {
  const std::size_t d = self.size();
  switch (kind) {
    case AggregatorKind::sum:
      for (std::size_t c = 0; c < d; ++c) x[c] = self[c] + summary[c];
      break;
    case AggregatorKind::concat:
      for (std::size_t c = 0; c < d; ++c) {
        x[c] = self[c];
        x[d + c] = summary[c];
      }
      break;
    case AggregatorKind::neighbor:
      for (std::size_t c = 0; c < d; ++c) x[c] = summary[c];
      break;
  }
}

// out = act(x^T W + b)
void transform(std::span<const double> x, std::span<const double> weight,
               std::span<const double> bias, bool final_hop,
               std::span<double> out) {
  const std::size_t d = out.size();
  for (std::size_t c = 0; c < d; ++c) out[c] = bias[c];
  for (std::size_t a = 0; a < x.size(); ++a) {
    const double xa = x[a];
    const double* w = weight.data() + a * d;
    for (std::size_t c = 0; c < d; ++c) out[c] += xa * w[c];
  }
  if (!final_hop) {
    for (auto& v : out) v = std::tanh(v);
  }
}

std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  while (exp-- > 0) r *= base;
  return r;
}

}  // namespace

ModelState kgcn_init(const KgcnConfig& config, std::size_t num_users,
                     std::size_t num_entities, std::size_t num_relations,
                     std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t d = config.dim;
  ModelState state;
  state.add(Parameter("entity", Partition::kg_repr, num_entities + 1, d)).xavier_uniform(rng);
  state.add(Parameter("relation", Partition::kg_repr, num_relations + 1, d)).xavier_uniform(rng);
  state.add(Parameter("user", Partition::aggregator, num_users, d)).xavier_uniform(rng);
  const std::size_t in = input_dim(config.aggregator, d);
  for (std::size_t h = 0; h < config.hops; ++h) {
    state.add(Parameter(weight_name(h), Partition::aggregator, in, d)).xavier_uniform(rng);
    state.add(Parameter(bias_name(h), Partition::aggregator, 1, d, false));
  }
  return state;
}

std::size_t kgcn_receptive_tree_size(std::size_t hops, std::size_t k) {
  std::size_t total = 0;
  for (std::size_t h = 0; h <= hops; ++h) total += ipow(k, h);
  return total;
}

double user_relation_score(std::span<const double> user,
                           std::span<const double> relation) {
  if (user.size() != relation.size()) {
    throw Error(ErrorKind::config, "user/relation dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t c = 0; c < user.size(); ++c) s += user[c] * relation[c];
  return s;
}

std::vector<double> attention_weights(std::span<const double> scores) {
  std::vector<double> w(scores.begin(), scores.end());
  double peak = -INFINITY;
  for (const double s : w) peak = std::max(peak, s);
  double total = 0.0;
  for (auto& s : w) {
    s = std::exp(s - peak);
    total += s;
  }
  for (auto& s : w) s /= total;
  return w;
}

std::vector<double> aggregate_hop(AggregatorKind kind,
                                  std::span<const double> self,
                                  std::span<const double> neighbor_reprs,
                                  std::span<const double> relation_reprs,
                                  std::span<const double> user,
                                  std::span<const double> weight,
                                  std::span<const double> bias, bool final_hop) {
  const std::size_t d = self.size();
  const std::size_t k = neighbor_reprs.size() / d;
  std::vector<double> scores(k);
  for (std::size_t j = 0; j < k; ++j) {
    scores[j] = user_relation_score(user, relation_reprs.subspan(j * d, d));
  }
  const auto att = attention_weights(scores);
  std::vector<double> summary(d, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t c = 0; c < d; ++c) summary[c] += att[j] * neighbor_reprs[j * d + c];
  }
  std::vector<double> x(input_dim(kind, d));
  combine(kind, self, summary, x);
  std::vector<double> out(d);
  transform(x, weight, bias, final_hop, out);
  return out;
}

double kgcn_forward(const ModelState& state, const KgcnConfig& config,
                    const StageGraph& graph, UserId user, EntityId item_entity,
                    KgcnTrace* trace) {
  if (graph.k() != config.neighbors) {
    throw Error(ErrorKind::config, "stage graph K=" + std::to_string(graph.k()) +
                                       " does not match config K=" +
                                       std::to_string(config.neighbors));
  }
  const auto& entity = state.get("entity");
  const auto& relation = state.get("relation");
  const auto& users = state.get("user");
  if (user >= users.rows()) {
    throw Error(ErrorKind::lookup, "unknown user id " + std::to_string(user));
  }
  if (item_entity >= entity.rows()) {
    throw Error(ErrorKind::lookup, "unknown item entity " + std::to_string(item_entity));
  }
  const std::size_t H = config.hops, K = graph.k(), d = config.dim;
  const std::size_t in = input_dim(config.aggregator, d);
  const auto u = users.row(user);

  KgcnTrace local;
  KgcnTrace& t = trace ? *trace : local;
  t = KgcnTrace{};
  t.user = user;
  t.entities.resize(H + 1);
  t.relations.resize(H + 1);
  t.entities[0] = {item_entity};
  for (std::size_t i = 1; i <= H; ++i) {
    t.entities[i].reserve(t.entities[i - 1].size() * K);
    t.relations[i].reserve(t.entities[i - 1].size() * K);
    for (const EntityId e : t.entities[i - 1]) {
      for (const auto& edge : graph.neighbors(e)) {
        t.entities[i].push_back(edge.tail);
        t.relations[i].push_back(edge.relation);
      }
    }
  }

  t.attention.resize(H);
  std::vector<double> scores(K);
  for (std::size_t i = 0; i < H; ++i) {
    const std::size_t nodes = t.entities[i].size();
    t.attention[i].resize(nodes * K);
    for (std::size_t j = 0; j < nodes; ++j) {
      for (std::size_t k = 0; k < K; ++k) {
        scores[k] = user_relation_score(u, relation.row(t.relations[i + 1][j * K + k]));
      }
      const auto w = attention_weights(scores);
      std::copy(w.begin(), w.end(), t.attention[i].begin() + static_cast<std::ptrdiff_t>(j * K));
    }
  }

  t.reprs.assign(H + 1, {});
  t.reprs[0].resize(H + 1);
  for (std::size_t i = 0; i <= H; ++i) {
    auto& level = t.reprs[0][i];
    level.resize(t.entities[i].size() * d);
    for (std::size_t j = 0; j < t.entities[i].size(); ++j) {
      const auto row = entity.row(t.entities[i][j]);
      std::copy(row.begin(), row.end(), level.begin() + static_cast<std::ptrdiff_t>(j * d));
    }
  }

  t.inputs.assign(H, {});
  t.summaries.assign(H, {});
  for (std::size_t it = 0; it < H; ++it) {
    const auto weight = state.get(weight_name(it)).values();
    const auto bias = state.get(bias_name(it)).values();
    const bool final_hop = it + 1 == H;
    const std::size_t levels = H - it;
    t.reprs[it + 1].resize(levels);
    t.inputs[it].resize(levels);
    t.summaries[it].resize(levels);
    for (std::size_t i = 0; i < levels; ++i) {
      const std::size_t nodes = t.entities[i].size();
      const auto& self_level = t.reprs[it][i];
      const auto& next_level = t.reprs[it][i + 1];
      auto& x_level = t.inputs[it][i];
      auto& n_level = t.summaries[it][i];
      auto& out_level = t.reprs[it + 1][i];
      x_level.assign(nodes * in, 0.0);
      n_level.assign(nodes * d, 0.0);
      out_level.assign(nodes * d, 0.0);
      for (std::size_t j = 0; j < nodes; ++j) {
        std::span<double> n(n_level.data() + j * d, d);
        for (std::size_t k = 0; k < K; ++k) {
          const double a = t.attention[i][j * K + k];
          const double* nb = next_level.data() + (j * K + k) * d;
          for (std::size_t c = 0; c < d; ++c) n[c] += a * nb[c];
        }
        std::span<double> x(x_level.data() + j * in, in);
        combine(config.aggregator, std::span<const double>(self_level.data() + j * d, d), n, x);
        std::span<double> out(out_level.data() + j * d, d);
        transform(x, weight, bias, final_hop, out);
        for (const double v : out) {
          if (!std::isfinite(v)) {
            throw Error(ErrorKind::numeric,
                        "non-finite activation at hop " + std::to_string(it + 1));
          }
        }
      }
    }
  }

  const auto item_repr = std::span<const double>(t.reprs[H][0]);
  t.logit = user_relation_score(u, item_repr);
  if (!std::isfinite(t.logit)) {
    throw Error(ErrorKind::numeric, "non-finite logit at hop " + std::to_string(H));
  }
  return sigmoid(t.logit);
}

void kgcn_accumulate_example(ModelState& state, const KgcnConfig& config,
                             const KgcnTrace& t, double dlogit) {
  const std::size_t H = config.hops, d = config.dim;
  const std::size_t K = config.neighbors;
  const std::size_t in = input_dim(config.aggregator, d);
  auto& entity = state.get("entity");
  auto& relation = state.get("relation");
  auto& users = state.get("user");
  const auto u = users.row(t.user);

  std::vector<double> du(d, 0.0);
  std::vector<std::vector<std::vector<double>>> dreprs(H + 1);
  for (std::size_t it = 0; it <= H; ++it) {
    dreprs[it].resize(t.reprs[it].size());
    for (std::size_t i = 0; i < t.reprs[it].size(); ++i) {
      dreprs[it][i].assign(t.reprs[it][i].size(), 0.0);
    }
  }
  const auto& item_repr = t.reprs[H][0];
  for (std::size_t c = 0; c < d; ++c) {
    du[c] += dlogit * item_repr[c];
    dreprs[H][0][c] = dlogit * u[c];
  }

  std::vector<std::vector<double>> datt(H);
  for (std::size_t i = 0; i < H; ++i) datt[i].assign(t.attention[i].size(), 0.0);

  std::vector<double> dz(d), dx(in);
  for (std::size_t it = H; it-- > 0;) {
    auto& wparam = state.get(weight_name(it));
    auto& bparam = state.get(bias_name(it));
    const auto weight = std::as_const(wparam).values();
    auto dbias = bparam.grad_row(0);
    for (std::size_t a = 0; a < in; ++a) wparam.grad_row(a);
    const bool final_hop = it + 1 == H;
    for (std::size_t i = 0; i < H - it; ++i) {
      const std::size_t nodes = t.entities[i].size();
      for (std::size_t j = 0; j < nodes; ++j) {
        const double* out = t.reprs[it + 1][i].data() + j * d;
        const double* dout = dreprs[it + 1][i].data() + j * d;
        for (std::size_t c = 0; c < d; ++c) {
          dz[c] = final_hop ? dout[c] : dout[c] * (1.0 - out[c] * out[c]);
        }
        const double* x = t.inputs[it][i].data() + j * in;
        for (std::size_t a = 0; a < in; ++a) {
          auto grow = wparam.grad_row(a);
          const double* w = weight.data() + a * d;
          double acc = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            grow[c] += x[a] * dz[c];
            acc += w[c] * dz[c];
          }
          dx[a] = acc;
        }
        for (std::size_t c = 0; c < d; ++c) dbias[c] += dz[c];

        double* dself = dreprs[it][i].data() + j * d;
        const double* dn = nullptr;
        switch (config.aggregator) {
          case AggregatorKind::sum:
            for (std::size_t c = 0; c < d; ++c) dself[c] += dx[c];
            dn = dx.data();
            break;
          case AggregatorKind::concat:
            for (std::size_t c = 0; c < d; ++c) dself[c] += dx[c];
            dn = dx.data() + d;
            break;
          case AggregatorKind::neighbor:
            dn = dx.data();
            break;
        }
        for (std::size_t k = 0; k < K; ++k) {
          const std::size_t slot = j * K + k;
          const double a = t.attention[i][slot];
          const double* nb = t.reprs[it][i + 1].data() + slot * d;
          double* dnb = dreprs[it][i + 1].data() + slot * d;
          double dot = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            dnb[c] += a * dn[c];
            dot += dn[c] * nb[c];
          }
          datt[i][slot] += dot;
        }
      }
    }
  }

  // Softmax backward into the user-relation scores.
  for (std::size_t i = 0; i < H; ++i) {
    const std::size_t nodes = t.entities[i].size();
    for (std::size_t j = 0; j < nodes; ++j) {
      double weighted = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        weighted += t.attention[i][j * K + k] * datt[i][j * K + k];
      }
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t slot = j * K + k;
        const double ds = t.attention[i][slot] * (datt[i][slot] - weighted);
        const RelationId r = t.relations[i + 1][slot];
        const auto rrow = relation.row(r);
        auto rgrad = relation.grad_row(r);
        for (std::size_t c = 0; c < d; ++c) {
          du[c] += ds * rrow[c];
          rgrad[c] += ds * u[c];
        }
      }
    }
  }

  for (std::size_t i = 0; i <= H; ++i) {
    for (std::size_t j = 0; j < t.entities[i].size(); ++j) {
      auto g = entity.grad_row(t.entities[i][j]);
      const double* src = dreprs[0][i].data() + j * d;
      for (std::size_t c = 0; c < d; ++c) g[c] += src[c];
    }
  }
  auto ug = users.grad_row(t.user);
  for (std::size_t c = 0; c < d; ++c) ug[c] += du[c];
}

double kgcn_backward(ModelState& state, const KgcnConfig& config,
                     const StageGraph& graph, std::span<const Example> batch,
                     const ImplicitDataset& dataset) {
  state.clear_grads();
  if (batch.empty()) return 0.0;
  const double scale = 1.0 / double(batch.size());
  double loss = 0.0;
  KgcnTrace trace;
  for (const auto& ex : batch) {
    kgcn_forward(state, config, graph, ex.user, dataset.entity_of(ex.item), &trace);
    double dlogit = 0.0;
    loss += bce_with_logit(trace.logit, ex.label, &dlogit) * scale;
    kgcn_accumulate_example(state, config, trace, dlogit * scale);
  }
  return loss + l2_penalty(state, config.l2);
}

double kgcn_objective(const ModelState& state, const KgcnConfig& config,
                      const StageGraph& graph, std::span<const Example> batch,
                      const ImplicitDataset& dataset) {
  ModelState scratch = state;
  return kgcn_backward(scratch, config, graph, batch, dataset);
}

}  // namespace kgsw
