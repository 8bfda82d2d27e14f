#pragma once

#include <cstdint>
#include <memory>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "alphameta/mlp.hpp"
#include "alphameta/task_data.hpp"

namespace alphameta {

enum class BasisKind { identity_with_bias, random_fourier, mlp_hidden };

/// A basis function psi: R^input_dim -> R^output_dim.
///
/// Random Fourier features use psi(x) = sqrt(2/D) cos(Omega x + b) with
/// Omega ~ N(0, 1/sigma^2) and b ~ U[0, 2pi), which approximates the gaussian
/// kernel exp(-|x-x'|^2 / (2 sigma^2)). The frequencies are regenerated from
/// the seed, so only (D, sigma, seed) needs to be stored.
///
/// When `normalized()` is set every output is rescaled to psi / max(1, |psi|),
/// which enforces the unit-ball constraint of the hinge-loss embedding.
class BasisFn {
 public:
  static BasisFn identity_with_bias(int input_dim);
  static BasisFn random_fourier(int input_dim, int num_features, double bandwidth, std::uint64_t seed);
  /// RFF with caller-provided frequencies (D x input_dim) and offsets (D).
  static BasisFn random_fourier(Eigen::MatrixXd frequencies, Eigen::VectorXd offsets);
  static BasisFn mlp_hidden(MlpParams params);

  BasisKind kind() const noexcept { return kind_; }
  int input_dim() const noexcept { return input_dim_; }
  int output_dim() const noexcept { return output_dim_; }
  bool normalized() const noexcept { return normalize_; }
  BasisFn with_normalization(bool on) const;

  double bandwidth() const noexcept { return bandwidth_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const Eigen::MatrixXd& frequencies() const noexcept { return frequencies_; }
  const Eigen::VectorXd& offsets() const noexcept { return offsets_; }
  /// True when the RFF frequencies were supplied rather than drawn from the seed.
  bool explicit_frequencies() const noexcept { return explicit_frequencies_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  /// Row-wise application: N x input_dim -> N x output_dim.
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& x) const;

 private:
  BasisFn() = default;

  BasisKind kind_ = BasisKind::identity_with_bias;
  int input_dim_ = 0;
  int output_dim_ = 0;
  bool normalize_ = false;
  double bandwidth_ = 0.0;
  std::uint64_t seed_ = 0;
  bool explicit_frequencies_ = false;
  Eigen::MatrixXd frequencies_;
  Eigen::VectorXd offsets_;
  std::shared_ptr<const MlpParams> mlp_;
};

/// Median pairwise Euclidean distance over the rows of `points`, using a
/// seeded subsample of at most `max_points` rows.
double median_heuristic_bandwidth(const Eigen::MatrixXd& points, std::size_t max_points = 2000, std::uint64_t seed = 0);

/// Pooled inputs of every source and the target.
Eigen::MatrixXd pooled_inputs(const TaskCollection& tasks);

enum class LossKind { square, hinge };

/// Square loss: phi(psi, y) = (vec(psi psi^T) row-major, sqrt(2) y psi, y^2), dimension d^2 + d + 1.
Eigen::VectorXd embed_square(const Eigen::VectorXd& psi, double y);
/// Hinge loss: phi(psi, y) = (y psi, 1); requires |psi| <= 1 and |y| <= 1.
Eigen::VectorXd embed_hinge(const Eigen::VectorXd& psi, double y);

/// Explicit loss embedding phi composed with a basis psi.
class LossEmbedding {
 public:
  LossEmbedding(LossKind loss, BasisFn basis);

  LossKind loss() const noexcept { return loss_; }
  const BasisFn& basis() const noexcept { return basis_; }
  int feature_dim() const noexcept;

  Eigen::VectorXd embed(const Eigen::VectorXd& x, double y) const;
  /// Sum of phi over the rows of a task; the building block of the task gram.
  Eigen::VectorXd embedding_sum(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels) const;

 private:
  LossKind loss_;
  BasisFn basis_;
};

/// Sum over rows of phi(psi_i, y_i) given precomputed basis outputs (N x d).
Eigen::VectorXd square_embedding_sum(const Eigen::MatrixXd& psi, const Eigen::VectorXd& y);
Eigen::VectorXd hinge_embedding_sum(const Eigen::MatrixXd& psi, const Eigen::VectorXd& y);

/// k(z, z2) = <phi(z), phi(z2)>.
double loss_kernel(const LossEmbedding& emb, const Eigen::VectorXd& x, double y, const Eigen::VectorXd& x2, double y2);

void to_json(nlohmann::json& j, const BasisFn& basis);
BasisFn basis_from_json(const nlohmann::json& j);
std::string to_string(LossKind loss);
LossKind loss_kind_from_string(const std::string& s);

}  // namespace alphameta
