#include "alphameta/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "alphameta/errors.hpp"

namespace alphameta {

std::string to_string(WeightMethod m) {
  switch (m) {
    case WeightMethod::qp: return "qp";
    case WeightMethod::threshold: return "threshold";
    case WeightMethod::uniform: return "uniform";
    case WeightMethod::manual: return "manual";
  }
  return "?";
}

WeightMethod weight_method_from_string(const std::string& s) {
  if (s == "qp") return WeightMethod::qp;
  if (s == "threshold") return WeightMethod::threshold;
  if (s == "uniform") return WeightMethod::uniform;
  if (s == "manual") return WeightMethod::manual;
  throw InvalidArgument("unknown weight method '" + s + "' (expected qp, threshold, uniform or manual)");
}

SimplexWeights::SimplexWeights(std::vector<double> alpha, WeightMethod method, std::optional<double> objective_value)
    : alpha_(std::move(alpha)), method_(method), objective_value_(objective_value) {
  if (alpha_.empty()) throw InvalidArgument("simplex weights must be non-empty");
  double sum = 0.0;
  for (double a : alpha_) {
    if (!std::isfinite(a) || a < 0.0) throw InvalidArgument("simplex weights must be finite and non-negative");
    sum += a;
  }
  if (std::abs(sum - 1.0) > kSumTolerance)
    throw InvalidArgument("simplex weights sum to " + std::to_string(sum) + ", expected 1");
  if (objective_value_ && !(*objective_value_ >= 0.0)) throw InvalidArgument("objective value must be non-negative");
}

SimplexWeights SimplexWeights::with_objective(double value) const { return SimplexWeights(alpha_, method_, value); }

double SimplexWeights::entropy() const noexcept {
  double h = 0.0;
  for (double a : alpha_)
    if (a > 0.0) h -= a * std::log(a);
  return h;
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("cannot project an empty vector onto the simplex");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double shift = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumsum += u[k];
    const double candidate = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - candidate > 0.0) shift = candidate;
  }
  std::vector<double> w(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) w[k] = std::max(v[k] - shift, 0.0);
  return w;
}

void to_json(nlohmann::json& j, const SimplexWeights& w) {
  j = {{"alpha", w.alpha()},
       {"method", to_string(w.method())},
       {"objective_value", w.objective_value() ? nlohmann::json(*w.objective_value()) : nlohmann::json(nullptr)}};
}

SimplexWeights simplex_weights_from_json(const nlohmann::json& j) {
  std::optional<double> obj;
  if (j.contains("objective_value") && !j.at("objective_value").is_null()) obj = j.at("objective_value").get<double>();
  return SimplexWeights(j.at("alpha").get<std::vector<double>>(), weight_method_from_string(j.value("method", "manual")), obj);
}

}  // namespace alphameta
