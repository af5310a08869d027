#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgsw/rng.hpp"

namespace kgsw {

// Which side of the stage-transfer boundary a tensor sits on.
enum class Partition { kg_repr, aggregator };

std::string_view to_string(Partition p);
Partition partition_from_string(std::string_view s);

// A rows x cols trainable tensor with a row-sparse gradient accumulator.
// Gradient rows are materialized on first touch and cleared by clear_grad().
class Parameter {
 public:
  Parameter(std::string name, Partition partition, std::size_t rows,
            std::size_t cols, bool regularized = true);

  const std::string& name() const noexcept { return name_; }
  Partition partition() const noexcept { return partition_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool regularized() const noexcept { return regularized_; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  // Mutable gradient row; marks it touched.
  std::span<double> grad_row(std::size_t r);
  std::span<const double> grad() const noexcept { return grad_; }
  const std::vector<std::size_t>& touched_rows() const noexcept { return touched_; }
  bool is_touched(std::size_t r) const { return touched_flag_[r] != 0; }
  void clear_grad();

  void fill(double v);
  // Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
  void xavier_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out);
  void xavier_uniform(Rng& rng) { xavier_uniform(rng, rows_, cols_); }

 private:
  std::string name_;
  Partition partition_;
  std::size_t rows_;
  std::size_t cols_;
  bool regularized_;
  std::vector<double> values_;
  std::vector<double> grad_;
  std::vector<char> touched_flag_;
  std::vector<std::size_t> touched_;
};

// Ordered collection of named parameters; the model state W.
class ModelState {
 public:
  Parameter& add(Parameter p);
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  const Parameter* find(std::string_view name) const;

  std::vector<Parameter>& params() noexcept { return params_; }
  const std::vector<Parameter>& params() const noexcept { return params_; }

  std::vector<std::string> names(Partition p) const;
  void clear_grads();

  // Exact equality of names, shapes and values.
  friend bool operator==(const ModelState& a, const ModelState& b);

 private:
  std::vector<Parameter> params_;
};

struct AdamState {
  std::uint64_t step = 0;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::vector<double>> first_moment;   // parallel to params
  std::vector<std::vector<double>> second_moment;

  static AdamState fresh(const ModelState& state, double lr);
};

// One bias-corrected Adam update over every parameter, then clears all
// gradients. Throws ErrorKind::numeric naming the parameter and leaves
// everything untouched if any gradient entry is non-finite.
void adam_step(ModelState& state, AdamState& adam);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

inline constexpr double kProbClamp = 1e-7;

// Mean binary cross-entropy of clamped probabilities and d loss / d pred.
LossAndGrad bce_loss(std::span<const double> predictions,
                     std::span<const std::uint8_t> labels);

// Numerically stable BCE of one logit; returns loss and writes
// d loss / d logit.
double bce_with_logit(double logit, std::uint8_t label, double* dlogit);

// weight * sum of squared entries over the touched rows of every regularized
// parameter; adds 2 * weight * theta to those gradient rows.
double l2_penalty(ModelState& state, double weight);

double sigmoid(double x);

}  // namespace kgsw
