#pragma once

#include <optional>
#include <span>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "alphameta/feature_maps.hpp"
#include "alphameta/simplex.hpp"
#include "alphameta/task_data.hpp"

namespace alphameta {

/// Sufficient statistics of one task under a basis: A = X^T X, b = X^T y.
struct LinearTaskStats {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::Index n = 0;
};

LinearTaskStats linear_task_stats(const Task& task, const BasisFn& basis);

enum class LinearMode { erm, maml };

std::string to_string(LinearMode m);
LinearMode linear_mode_from_string(const std::string& s);

struct LinearFitOptions {
  LinearMode mode = LinearMode::maml;
  /// MAML inner step size; ignored (treated as 0) in erm mode.
  double eta = 1e-4;
  /// Ridge added to the meta-Hessian. Unset: 1e-8 * trace / d.
  std::optional<double> ridge;
};

struct LinearMetaModel {
  Eigen::VectorXd w;
  double eta = 0.0;
  SimplexWeights alpha;
  LinearMode mode = LinearMode::erm;
  double ridge = 0.0;
  /// Reciprocal condition estimate of the solved system.
  double rcond = 0.0;
  nlohmann::json basis_meta = nlohmann::json::object();

  Eigen::VectorXd predict(const Eigen::MatrixXd& psi) const { return psi * w; }
};

/// Closed-form minimizer of the alpha-weighted MAML objective for linear
/// regression with per-task loss 1/2 |X w - y|^2 and one inner step
/// U_j(w) = w - eta (A_j w - b_j):
///   (sum_j alpha_j M_j^T A_j M_j + ridge I) w = sum_j alpha_j M_j^T b_j,  M_j = I - eta A_j.
/// With eta = 0 this is alpha-weighted ERM (weighted joint least squares).
LinearMetaModel fit_weighted_linear(std::span<const Task> sources, const BasisFn& basis, const SimplexWeights& alpha,
                                    const LinearFitOptions& options);
LinearMetaModel fit_weighted_linear(const TaskCollection& tasks, const BasisFn& basis, const SimplexWeights& alpha,
                                    const LinearFitOptions& options);

/// Least squares on a single task (ridge as in fit_weighted_linear).
LinearMetaModel fit_task_only(const Task& task, const BasisFn& basis, std::optional<double> ridge = std::nullopt);

/// `steps` full-batch gradient steps on (1/N) * 1/2 |X w - y|^2 of the target.
LinearMetaModel adapt_linear(const LinearMetaModel& model, const Task& target, const BasisFn& basis, int steps, double lr);

/// Root mean squared prediction error on `task`.
double rmse(const LinearMetaModel& model, const Task& task, const BasisFn& basis);

void to_json(nlohmann::json& j, const LinearMetaModel& m);

}  // namespace alphameta
