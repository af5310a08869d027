#include "kgsw/nn.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "kgsw/error.hpp"

namespace kgsw {

std::string_view to_string(Partition p) {
  return p == Partition::kg_repr ? "kg_repr" : "aggregator";
}

Partition partition_from_string(std::string_view s) {
  if (s == "kg_repr") return Partition::kg_repr;
  if (s == "aggregator") return Partition::aggregator;
  throw Error(ErrorKind::parse, "unknown partition '" + std::string(s) + "'");
}

Parameter::Parameter(std::string name, Partition partition, std::size_t rows,
                     std::size_t cols, bool regularized)
    : name_(std::move(name)),
      partition_(partition),
      rows_(rows),
      cols_(cols),
      regularized_(regularized),
      values_(rows * cols, 0.0),
      grad_(rows * cols, 0.0),
      touched_flag_(rows, 0) {}

std::span<double> Parameter::row(std::size_t r) {
  return std::span<double>(values_).subspan(r * cols_, cols_);
}

std::span<const double> Parameter::row(std::size_t r) const {
  return std::span<const double>(values_).subspan(r * cols_, cols_);
}

std::span<double> Parameter::grad_row(std::size_t r) {
  if (r >= rows_) {
    throw Error(ErrorKind::lookup, name_ + ": row " + std::to_string(r) +
                                       " out of range " + std::to_string(rows_));
  }
  if (!touched_flag_[r]) {
    touched_flag_[r] = 1;
    touched_.push_back(r);
  }
  return std::span<double>(grad_).subspan(r * cols_, cols_);
}

void Parameter::clear_grad() {
  for (const auto r : touched_) {
    std::fill_n(grad_.begin() + static_cast<std::ptrdiff_t>(r * cols_), cols_, 0.0);
    touched_flag_[r] = 0;
  }
  touched_.clear();
}

void Parameter::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void Parameter::xavier_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double a = std::sqrt(6.0 / double(fan_in + fan_out));
  for (auto& v : values_) v = uniform_real(rng, -a, a);
}

Parameter& ModelState::add(Parameter p) {
  if (find(p.name())) {
    throw Error(ErrorKind::config, "duplicate parameter " + p.name());
  }
  params_.push_back(std::move(p));
  return params_.back();
}

const Parameter* ModelState::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name() == name) return &p;
  }
  return nullptr;
}

const Parameter& ModelState::get(std::string_view name) const {
  if (const auto* p = find(name)) return *p;
  throw Error(ErrorKind::lookup, "no parameter named " + std::string(name));
}

Parameter& ModelState::get(std::string_view name) {
  return const_cast<Parameter&>(std::as_const(*this).get(name));
}

std::vector<std::string> ModelState::names(Partition part) const {
  std::vector<std::string> out;
  for (const auto& p : params_) {
    if (p.partition() == part) out.push_back(p.name());
  }
  return out;
}

void ModelState::clear_grads() {
  for (auto& p : params_) p.clear_grad();
}

bool operator==(const ModelState& a, const ModelState& b) {
  if (a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    const auto& x = a.params_[i];
    const auto& y = b.params_[i];
    if (x.name() != y.name() || x.rows() != y.rows() || x.cols() != y.cols() ||
        x.partition() != y.partition() ||
        !std::equal(x.values().begin(), x.values().end(), y.values().begin())) {
      return false;
    }
  }
  return true;
}

AdamState AdamState::fresh(const ModelState& state, double lr) {
  AdamState adam;
  adam.lr = lr;
  for (const auto& p : state.params()) {
    adam.first_moment.emplace_back(p.values().size(), 0.0);
    adam.second_moment.emplace_back(p.values().size(), 0.0);
  }
  return adam;
}

void adam_step(ModelState& state, AdamState& adam) {
  auto& params = state.params();
  if (adam.first_moment.size() != params.size() ||
      adam.second_moment.size() != params.size()) {
    throw Error(ErrorKind::config, "Adam moments do not match the model state");
  }
  for (const auto& p : params) {
    for (const double g : p.grad()) {
      if (!std::isfinite(g)) {
        throw Error(ErrorKind::numeric, "non-finite gradient in " + p.name());
      }
    }
  }
  ++adam.step;
  const double t = double(adam.step);
  const double c1 = 1.0 - std::pow(adam.beta1, t);
  const double c2 = 1.0 - std::pow(adam.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].values();
    const auto grad = params[i].grad();
    auto& m = adam.first_moment[i];
    auto& v = adam.second_moment[i];
    if (m.size() != values.size() || v.size() != values.size()) {
      throw Error(ErrorKind::config, "Adam moment shape mismatch for " + params[i].name());
    }
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      m[j] = adam.beta1 * m[j] + (1.0 - adam.beta1) * g;
      v[j] = adam.beta2 * v[j] + (1.0 - adam.beta2) * g * g;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      values[j] -= adam.lr * m_hat / (std::sqrt(v_hat) + adam.eps);
    }
  }
  state.clear_grads();
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

LossAndGrad bce_loss(std::span<const double> predictions,
                     std::span<const std::uint8_t> labels) {
  if (predictions.size() != labels.size() || predictions.empty()) {
    throw Error(ErrorKind::config, "bce_loss needs matching non-empty inputs");
  }
  const double n = double(predictions.size());
  LossAndGrad out;
  out.grad.resize(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(predictions[i], kProbClamp, 1.0 - kProbClamp);
    const double y = labels[i];
    out.loss -= (y * std::log(p) + (1.0 - y) * std::log(1.0 - p)) / n;
    out.grad[i] = (-y / p + (1.0 - y) / (1.0 - p)) / n;
  }
  return out;
}

double bce_with_logit(double logit, std::uint8_t label, double* dlogit) {
  // log(1 + exp(z)) - y z, stable for both signs.
  const double softplus =
      logit > 0.0 ? logit + std::log1p(std::exp(-logit)) : std::log1p(std::exp(logit));
  if (dlogit) *dlogit = sigmoid(logit) - double(label);
  return softplus - double(label) * logit;
}

double l2_penalty(ModelState& state, double weight) {
  if (weight < 0.0) throw Error(ErrorKind::config, "l2 weight must be >= 0");
  if (weight == 0.0) return 0.0;
  double loss = 0.0;
  for (auto& p : state.params()) {
    if (!p.regularized()) continue;
    const std::vector<std::size_t> rows = p.touched_rows();
    for (const auto r : rows) {
      const auto values = p.row(r);
      auto grad = p.grad_row(r);
      for (std::size_t j = 0; j < values.size(); ++j) {
        loss += weight * values[j] * values[j];
        grad[j] += 2.0 * weight * values[j];
      }
    }
  }
  return loss;
}

}  // namespace kgsw
