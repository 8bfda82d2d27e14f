#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace alphameta {

enum class WeightMethod { qp, threshold, uniform, manual };

std::string to_string(WeightMethod m);
WeightMethod weight_method_from_string(const std::string& s);

/// Per-source mixture weights on the probability simplex.
class SimplexWeights {
 public:
  static constexpr double kSumTolerance = 1e-9;

  /// Throws InvalidArgument unless every entry is >= 0 and the sum is within kSumTolerance of 1.
  SimplexWeights(std::vector<double> alpha, WeightMethod method, std::optional<double> objective_value = std::nullopt);

  const std::vector<double>& alpha() const noexcept { return alpha_; }
  std::span<const double> span() const noexcept { return alpha_; }
  std::size_t size() const noexcept { return alpha_.size(); }
  double operator[](std::size_t j) const { return alpha_.at(j); }
  WeightMethod method() const noexcept { return method_; }
  /// v_alpha^T K v_alpha when it has been evaluated against a task gram.
  std::optional<double> objective_value() const noexcept { return objective_value_; }
  SimplexWeights with_objective(double value) const;

  /// -sum alpha log alpha (0 log 0 = 0).
  double entropy() const noexcept;

 private:
  std::vector<double> alpha_;
  WeightMethod method_;
  std::optional<double> objective_value_;
};

/// Euclidean projection onto the probability simplex (sort-then-shift).
std::vector<double> project_to_simplex(std::span<const double> v);

void to_json(nlohmann::json& j, const SimplexWeights& w);
SimplexWeights simplex_weights_from_json(const nlohmann::json& j);

}  // namespace alphameta
