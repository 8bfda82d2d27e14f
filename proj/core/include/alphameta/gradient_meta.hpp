#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "alphameta/kernel_distance.hpp"
#include "alphameta/mlp.hpp"
#include "alphameta/simplex.hpp"
#include "alphameta/task_data.hpp"
#include "alphameta/weight_solver.hpp"

namespace alphameta {

enum class MamlOrder { first, second };

std::string to_string(MamlOrder o);
MamlOrder maml_order_from_string(const std::string& s);

struct TrainConfig {
  MlpShape shape{};
  double inner_lr = 0.01;
  double outer_lr = 0.001;
  int meta_iters = 2000;
  int batch_tasks = 100;
  int inner_steps = 1;
  MamlOrder order = MamlOrder::second;
  // Adam with the usual defaults.
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Global-norm gradient clip; <= 0 disables.
  double grad_clip = 10.0;
  std::uint64_t seed = 0;
  QpOptions qp{1e-10, 1e-8, 2000, QpAlgorithm::projected_gradient};
  int log_every = 10;

  // Direct bound optimization only.
  double gamma_weight = 1.0;
  double alpha_lr = 0.01;
  bool freeze_alpha = false;
  bool include_loss_term = true;

  /// Starting parameters; freshly initialized from `seed` when unset.
  std::optional<MlpParams> init;

  void validate() const;
  /// Defaults for train_direct_bound (mini-batch of 150 tasks).
  static TrainConfig direct_bound_defaults();
};

struct TrainLogRow {
  long iter = 0;
  double weighted_loss = 0.0;
  double gamma_k = 0.0;
  double alpha_entropy = 0.0;
};

struct TrainResult {
  MlpParams params;
  std::vector<TrainLogRow> log;
  /// Final weights (direct bound optimization only).
  std::optional<SimplexWeights> alpha;
  std::vector<std::string> warnings;
};

struct MetaGradient {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// sum_j w_j L_j(U_j(theta)) and its gradient, where L_j is the task MSE and
/// U_j takes `inner_steps` gradient steps of size inner_lr on L_j.
///
/// Second order differentiates through the inner step:
///   d/dtheta L_j(theta - a g_j(theta)) = (I - a H_j(theta)) grad L_j(theta').
/// First order drops the Hessian term. Second order is exact only for
/// inner_steps == 1; more steps fall back to first order.
MetaGradient weighted_maml_gradient(const MlpShape& shape, const Eigen::VectorXd& theta, std::span<const Task* const> tasks,
                                    std::span<const double> weights, double inner_lr, MamlOrder order, int inner_steps = 1);

/// Loss part of weighted_maml_gradient only (for checks against finite differences).
double weighted_maml_loss(const MlpShape& shape, const Eigen::VectorXd& theta, std::span<const Task* const> tasks,
                          std::span<const double> weights, double inner_lr, int inner_steps = 1);

/// Task gram of the batch plus target, each point embedded as the square-loss
/// feature map of (last hidden activations, label).
TaskGram hidden_layer_gram(const MlpParams& params, std::span<const Task* const> batch, const Task& target);

/// Iterated alpha-weighted MAML: each meta-iteration samples a task batch,
/// recomputes weights on the batch gram under the current network, and takes
/// one Adam step on the weighted MAML loss.
TrainResult train_alpha_maml(const TaskCollection& tasks, const TrainConfig& cfg, WeightMethod weight_mode);

/// Joint minimization over (theta, alpha) of the alpha-weighted MAML loss plus
/// gamma_weight * kernel distance. theta takes Adam steps on the loss term;
/// alpha takes projected gradient steps on the full objective.
TrainResult train_direct_bound(const TaskCollection& tasks, const TrainConfig& cfg);

/// Full-batch gradient descent on the target MSE.
MlpParams adapt_mlp(const MlpParams& params, const Task& target, int steps, double lr);

/// MSE on `eval` after 0, 1, ..., steps adaptation steps on `train`.
std::vector<double> adaptation_curve(const MlpParams& params, const Task& train, const Task& eval, int steps, double lr);

double mse(const MlpParams& params, const Task& eval);

/// Minimal Adam state over a flat parameter vector.
class Adam {
 public:
  Adam(Eigen::Index size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
void to_json(nlohmann::json& j, const TrainLogRow& row);

}  // namespace alphameta
