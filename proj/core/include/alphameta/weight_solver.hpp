#pragma once

#include <utility>

#include <nlohmann/json.hpp>

#include "alphameta/kernel_distance.hpp"
#include "alphameta/simplex.hpp"

namespace alphameta {

enum class QpAlgorithm { projected_gradient, frank_wolfe };

struct QpOptions {
  /// Stop when the relative objective decrease over an iteration falls below this.
  double tol = 1e-10;
  /// Required KKT residual (on the trace-normalized problem) for `converged`.
  double kkt_tol = 1e-8;
  int max_iters = 20000;
  QpAlgorithm algorithm = QpAlgorithm::projected_gradient;
};

struct QpReport {
  int iterations = 0;
  double kkt_residual = 0.0;
  /// Frank-Wolfe gap grad^T alpha - min_j grad_j, an upper bound on f(alpha) - f*.
  double duality_gap_proxy = 0.0;
  bool converged = false;
};

/// The simplex QP behind the weight rule, written over alpha directly:
/// f(alpha) = alpha^T Q alpha - 2 q^T alpha + c, equal to v_alpha^T K v_alpha.
struct SimplexQuadratic {
  Eigen::MatrixXd Q;
  Eigen::VectorXd q;
  double c = 0.0;

  static SimplexQuadratic from_gram(const TaskGram& gram);
  double value(const Eigen::VectorXd& alpha) const { return alpha.dot(Q * alpha) - 2.0 * q.dot(alpha) + c; }
  Eigen::VectorXd gradient(const Eigen::VectorXd& alpha) const { return 2.0 * (Q * alpha - q); }
};

/// KKT residual of alpha for min f over the simplex: the smallest r such that
/// some lambda has grad_j >= lambda - r for all j and |grad_j - lambda| <= r on
/// the support {alpha_j > 1e-10}.
double simplex_kkt_residual(const Eigen::VectorXd& alpha, const Eigen::VectorXd& grad);

/// argmin over the simplex of v_alpha^T K v_alpha.
///
/// Accelerated projected gradient with fixed step 1/L (L from row sums of Q)
/// and restart on objective increase, followed by an exact solve on the
/// identified support. Starts at uniform weights; if those already satisfy
/// KKT and every vertex has the same objective, uniform is returned as is.
/// Non-convergence is reported, not thrown.
std::pair<SimplexWeights, QpReport> solve_alpha_qp(const TaskGram& gram, const QpOptions& options = {});

/// All weight on the source closest to the target; ties go to the lowest index.
SimplexWeights solve_alpha_threshold(const TaskGram& gram);

SimplexWeights uniform_weights(std::size_t num_sources);
/// Uniform weights with the objective evaluated against `gram`.
SimplexWeights uniform_weights(const TaskGram& gram);

/// Dispatch helper for qp / threshold / uniform.
SimplexWeights solve_weights(const TaskGram& gram, WeightMethod method, const QpOptions& options = {});

void to_json(nlohmann::json& j, const QpReport& r);

}  // namespace alphameta
