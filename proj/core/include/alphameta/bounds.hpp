#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

#include "alphameta/feature_maps.hpp"
#include "alphameta/kernel_distance.hpp"
#include "alphameta/simplex.hpp"
#include "alphameta/task_data.hpp"

namespace alphameta {

struct BoundConfig {
  /// Range [loss_lo, loss_hi] of the loss-composed function class.
  double loss_lo = 0.0;
  double loss_hi = 1.0;
  /// Failure probability, in (0, 1).
  double epsilon = 0.05;
  int mc_draws = 1000;

  void validate() const;
};

struct BoundBreakdown {
  double ipm_term = 0.0;
  double rademacher_term = 0.0;
  double confidence_term = 0.0;
  double total = 0.0;
};

struct RademacherEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int draws = 0;
};

/// Monte-Carlo empirical Rademacher complexity of {x -> w^T psi(x) : |w| <= B}
/// on the target inputs. For a sign vector sigma the supremum is
/// (B/N) |sum_i sigma_i psi(x_i)|, so each draw is exact and only the
/// expectation over sigma is sampled. Points are put in a canonical order
/// before signs are drawn, which makes the estimate independent of row order.
RademacherEstimate rademacher_linear(const Task& target, const BasisFn& basis, double norm_bound, int mc_draws,
                                     std::uint64_t seed);

/// 3 sqrt((b - a)^2 log(2/eps) / (2 N)).
double confidence_term(const BoundConfig& cfg, Eigen::Index n_target);

/// ipm_term = kernel distance of the alpha-mixture to the target;
/// rademacher_term = 2 * rademacher.
BoundBreakdown evaluate_theorem2_bound(const TaskGram& gram, const SimplexWeights& alpha, double rademacher,
                                       const BoundConfig& cfg);

/// Same as the mixture bound but with ipm_term = sum_j alpha_j * distance_j.
BoundBreakdown evaluate_corollary_bound(const TaskGram& gram, const SimplexWeights& alpha, double rademacher,
                                        const BoundConfig& cfg);

void to_json(nlohmann::json& j, const BoundConfig& cfg);
BoundConfig bound_config_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const BoundBreakdown& b);
void to_json(nlohmann::json& j, const RademacherEstimate& r);

}  // namespace alphameta
