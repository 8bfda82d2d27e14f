#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "alphameta/feature_maps.hpp"
#include "alphameta/simplex.hpp"
#include "alphameta/task_data.hpp"

namespace alphameta {

/// Pairwise task kernel sums K[j, j'] = sum_{i, i'} k(z_i^(j), z_i'^(j')).
///
/// Index order is fixed: sources 0..J-1 in collection order, then the target
/// at index J. `sizes` follows the same order.
struct TaskGram {
  Eigen::MatrixXd K;
  std::vector<Eigen::Index> sizes;
  std::vector<std::string> order;
  nlohmann::json kernel_meta = nlohmann::json::object();

  std::size_t num_sources() const noexcept { return sizes.empty() ? 0 : sizes.size() - 1; }
  Eigen::Index target_size() const { return sizes.back(); }
  /// Throws unless K is square, consistent with sizes, and symmetric.
  void validate() const;
};

/// K = Phi Phi^T where row j of Phi is the summed embedding of task j (target last).
TaskGram gram_from_embedding_sums(const Eigen::MatrixXd& phi_sums, std::vector<Eigen::Index> sizes,
                                  std::vector<std::string> order);

TaskGram build_task_gram(const TaskCollection& tasks, const LossEmbedding& emb);

/// v_alpha = [alpha_1/N_1, ..., alpha_J/N_J, -1/N_T].
Eigen::VectorXd mixture_vector(const TaskGram& gram, std::span<const double> alpha);

/// v_alpha^T K v_alpha, clamped at 0 for round-off; larger negatives throw NumericalError.
double kernel_distance_squared(const TaskGram& gram, std::span<const double> alpha);

/// Empirical kernel distance between the alpha-mixture of sources and the target.
double kernel_distance(const TaskGram& gram, std::span<const double> alpha);
double kernel_distance(const TaskGram& gram, const SimplexWeights& alpha);

/// Distance of each single source to the target (alpha = e_j).
std::vector<double> per_source_distances(const TaskGram& gram);

void to_json(nlohmann::json& j, const TaskGram& gram);
TaskGram task_gram_from_json(const nlohmann::json& j);

}  // namespace alphameta
