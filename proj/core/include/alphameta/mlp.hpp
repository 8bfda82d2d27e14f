#pragma once

#include <cstdint>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace alphameta {

/// input_dim -> hidden1 -> hidden2 -> 1 with ReLU after both hidden layers.
struct MlpShape {
  int input_dim = 1;
  int hidden1 = 40;
  int hidden2 = 40;

  Eigen::Index num_params() const noexcept {
    return static_cast<Eigen::Index>(hidden1) * (input_dim + 1) + static_cast<Eigen::Index>(hidden2) * (hidden1 + 1) +
           (hidden2 + 1);
  }
  bool operator==(const MlpShape&) const = default;
};

/// Flat parameter vector for an MlpShape.
///
/// Layout: W1 (hidden1 x input_dim, column-major), b1, W2 (hidden2 x hidden1),
/// b2, W3 (1 x hidden2), b3.
struct MlpParams {
  MlpShape shape;
  Eigen::VectorXd theta;
  std::uint64_t seed = 0;

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static MlpParams initialize(const MlpShape& shape, std::uint64_t seed);

  void validate() const;
};

/// Read-only views of the individual layers inside a flat parameter vector.
struct MlpLayers {
  Eigen::Map<const Eigen::MatrixXd> w1;
  Eigen::Map<const Eigen::VectorXd> b1;
  Eigen::Map<const Eigen::MatrixXd> w2;
  Eigen::Map<const Eigen::VectorXd> b2;
  Eigen::Map<const Eigen::RowVectorXd> w3;
  double b3;

  MlpLayers(const MlpShape& shape, const Eigen::VectorXd& theta);
};

/// Network output for each row of x (N x input_dim).
Eigen::VectorXd mlp_predict(const MlpShape& shape, const Eigen::VectorXd& theta, const Eigen::MatrixXd& x);
inline Eigen::VectorXd mlp_predict(const MlpParams& p, const Eigen::MatrixXd& x) { return mlp_predict(p.shape, p.theta, x); }

/// Last hidden-layer activations (N x hidden2).
Eigen::MatrixXd mlp_hidden_features(const MlpShape& shape, const Eigen::VectorXd& theta, const Eigen::MatrixXd& x);

/// Mean squared error (1/N) sum (f(x_i) - y_i)^2; writes its gradient when `grad` is non-null.
double mse_loss(const MlpShape& shape, const Eigen::VectorXd& theta, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                Eigen::VectorXd* grad = nullptr);

/// Hessian of mse_loss at theta applied to `direction`, by forward-mode
/// differentiation of the backward pass. Exact away from ReLU kinks.
Eigen::VectorXd mse_hessian_vector(const MlpShape& shape, const Eigen::VectorXd& theta, const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, const Eigen::VectorXd& direction);

void to_json(nlohmann::json& j, const MlpParams& p);
MlpParams mlp_params_from_json(const nlohmann::json& j);

}  // namespace alphameta
