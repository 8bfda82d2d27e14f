#include "alphameta/mlp.hpp"

#include <cmath>

#include "alphameta/errors.hpp"
#include "alphameta/rng.hpp"
#include "alphameta/task_data.hpp"

namespace alphameta {
namespace {

struct Offsets {
  Eigen::Index w1, b1, w2, b2, w3, b3;
  explicit Offsets(const MlpShape& s) {
    w1 = 0;
    b1 = w1 + static_cast<Eigen::Index>(s.hidden1) * s.input_dim;
    w2 = b1 + s.hidden1;
    b2 = w2 + static_cast<Eigen::Index>(s.hidden2) * s.hidden1;
    w3 = b2 + s.hidden2;
    b3 = w3 + s.hidden2;
  }
};

struct Forward {
  Eigen::MatrixXd z1, a1, z2, a2;
  Eigen::VectorXd out;
};

Forward forward(const MlpLayers& l, const Eigen::MatrixXd& x) {
  Forward f;
  f.z1 = (x * l.w1.transpose()).rowwise() + l.b1.transpose();
  f.a1 = f.z1.cwiseMax(0.0);
  f.z2 = (f.a1 * l.w2.transpose()).rowwise() + l.b2.transpose();
  f.a2 = f.z2.cwiseMax(0.0);
  f.out = (f.a2 * l.w3.transpose()).array() + l.b3;
  return f;
}

Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& z) { return (z.array() > 0.0).cast<double>().matrix(); }

void check_inputs(const MlpShape& shape, const Eigen::VectorXd& theta, const Eigen::MatrixXd& x) {
  if (theta.size() != shape.num_params())
    throw InvalidArgument("parameter vector has " + std::to_string(theta.size()) + " entries, shape needs " +
                          std::to_string(shape.num_params()));
  if (x.cols() != shape.input_dim)
    throw InvalidArgument("input has " + std::to_string(x.cols()) + " columns, network expects " +
                          std::to_string(shape.input_dim));
}

// Writes a packed gradient from per-layer pieces.
void pack(const MlpShape& s, Eigen::VectorXd& out, const Eigen::MatrixXd& gw1, const Eigen::VectorXd& gb1,
          const Eigen::MatrixXd& gw2, const Eigen::VectorXd& gb2, const Eigen::RowVectorXd& gw3, double gb3) {
  const Offsets o(s);
  out.resize(s.num_params());
  Eigen::Map<Eigen::MatrixXd>(out.data() + o.w1, s.hidden1, s.input_dim) = gw1;
  out.segment(o.b1, s.hidden1) = gb1;
  Eigen::Map<Eigen::MatrixXd>(out.data() + o.w2, s.hidden2, s.hidden1) = gw2;
  out.segment(o.b2, s.hidden2) = gb2;
  out.segment(o.w3, s.hidden2) = gw3.transpose();
  out(o.b3) = gb3;
}

}  // namespace

MlpLayers::MlpLayers(const MlpShape& s, const Eigen::VectorXd& theta)
    : w1(theta.data() + Offsets(s).w1, s.hidden1, s.input_dim),
      b1(theta.data() + Offsets(s).b1, s.hidden1),
      w2(theta.data() + Offsets(s).w2, s.hidden2, s.hidden1),
      b2(theta.data() + Offsets(s).b2, s.hidden2),
      w3(theta.data() + Offsets(s).w3, s.hidden2),
      b3(theta(Offsets(s).b3)) {}

MlpParams MlpParams::initialize(const MlpShape& shape, std::uint64_t seed) {
  if (shape.input_dim < 1 || shape.hidden1 < 1 || shape.hidden2 < 1) throw InvalidArgument("MLP layer sizes must be positive");
  MlpParams p{shape, Eigen::VectorXd(shape.num_params()), seed};
  Rng rng(seed);
  const Offsets o(shape);
  auto fill = [&](Eigen::Index begin, Eigen::Index count, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = begin; i < begin + count; ++i) p.theta(i) = rng.uniform(-bound, bound);
  };
  fill(o.w1, o.b1 - o.w1, shape.input_dim);
  fill(o.b1, shape.hidden1, shape.input_dim);
  fill(o.w2, o.b2 - o.w2, shape.hidden1);
  fill(o.b2, shape.hidden2, shape.hidden1);
  fill(o.w3, shape.hidden2, shape.hidden2);
  fill(o.b3, 1, shape.hidden2);
  return p;
}

void MlpParams::validate() const {
  if (theta.size() != shape.num_params()) throw InvalidArgument("MLP parameter count does not match its shape");
  if (!theta.allFinite()) throw InvalidArgument("MLP parameters contain non-finite entries");
}

Eigen::VectorXd mlp_predict(const MlpShape& shape, const Eigen::VectorXd& theta, const Eigen::MatrixXd& x) {
  check_inputs(shape, theta, x);
  return forward(MlpLayers(shape, theta), x).out;
}

Eigen::MatrixXd mlp_hidden_features(const MlpShape& shape, const Eigen::VectorXd& theta, const Eigen::MatrixXd& x) {
  check_inputs(shape, theta, x);
  return forward(MlpLayers(shape, theta), x).a2;
}

double mse_loss(const MlpShape& shape, const Eigen::VectorXd& theta, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                Eigen::VectorXd* grad) {
  check_inputs(shape, theta, x);
  if (y.size() != x.rows()) throw InvalidArgument("label count does not match input rows");
  const MlpLayers l(shape, theta);
  const Forward f = forward(l, x);
  const Eigen::VectorXd resid = f.out - y;
  const double n = static_cast<double>(x.rows());
  const double loss = resid.squaredNorm() / n;
  if (grad == nullptr) return loss;

  const Eigen::VectorXd g_out = (2.0 / n) * resid;
  const Eigen::RowVectorXd gw3 = g_out.transpose() * f.a2;
  const double gb3 = g_out.sum();
  const Eigen::MatrixXd g_z2 = (g_out * l.w3).cwiseProduct(relu_mask(f.z2));
  const Eigen::MatrixXd gw2 = g_z2.transpose() * f.a1;
  const Eigen::VectorXd gb2 = g_z2.colwise().sum().transpose();
  const Eigen::MatrixXd g_z1 = (g_z2 * l.w2).cwiseProduct(relu_mask(f.z1));
  const Eigen::MatrixXd gw1 = g_z1.transpose() * x;
  const Eigen::VectorXd gb1 = g_z1.colwise().sum().transpose();
  pack(shape, *grad, gw1, gb1, gw2, gb2, gw3, gb3);
  return loss;
}

Eigen::VectorXd mse_hessian_vector(const MlpShape& shape, const Eigen::VectorXd& theta, const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, const Eigen::VectorXd& direction) {
  check_inputs(shape, theta, x);
  if (direction.size() != theta.size()) throw InvalidArgument("direction size does not match parameter count");
  if (y.size() != x.rows()) throw InvalidArgument("label count does not match input rows");
  const MlpLayers l(shape, theta);
  const MlpLayers v(shape, direction);
  const Forward f = forward(l, x);
  const Eigen::MatrixXd m1 = relu_mask(f.z1);
  const Eigen::MatrixXd m2 = relu_mask(f.z2);
  const double n = static_cast<double>(x.rows());

  // Tangents of the forward pass along `direction`.
  const Eigen::MatrixXd r_z1 = (x * v.w1.transpose()).rowwise() + v.b1.transpose();
  const Eigen::MatrixXd r_a1 = r_z1.cwiseProduct(m1);
  const Eigen::MatrixXd r_z2 = ((r_a1 * l.w2.transpose() + f.a1 * v.w2.transpose()).rowwise() + v.b2.transpose());
  const Eigen::MatrixXd r_a2 = r_z2.cwiseProduct(m2);
  const Eigen::VectorXd r_out = (r_a2 * l.w3.transpose() + f.a2 * v.w3.transpose()).array() + v.b3;

  // Backward pass and its tangent.
  const Eigen::VectorXd g_out = (2.0 / n) * (f.out - y);
  const Eigen::VectorXd r_g_out = (2.0 / n) * r_out;
  const Eigen::RowVectorXd r_gw3 = r_g_out.transpose() * f.a2 + g_out.transpose() * r_a2;
  const double r_gb3 = r_g_out.sum();

  const Eigen::MatrixXd g_z2 = (g_out * l.w3).cwiseProduct(m2);
  const Eigen::MatrixXd r_g_z2 = (r_g_out * l.w3 + g_out * v.w3).cwiseProduct(m2);
  const Eigen::MatrixXd r_gw2 = r_g_z2.transpose() * f.a1 + g_z2.transpose() * r_a1;
  const Eigen::VectorXd r_gb2 = r_g_z2.colwise().sum().transpose();

  const Eigen::MatrixXd r_g_z1 = (r_g_z2 * l.w2 + g_z2 * v.w2).cwiseProduct(m1);
  const Eigen::MatrixXd r_gw1 = r_g_z1.transpose() * x;
  const Eigen::VectorXd r_gb1 = r_g_z1.colwise().sum().transpose();

  Eigen::VectorXd out;
  pack(shape, out, r_gw1, r_gb1, r_gw2, r_gb2, r_gw3, r_gb3);
  return out;
}

void to_json(nlohmann::json& j, const MlpParams& p) {
  const MlpLayers l(p.shape, p.theta);
  j = {{"architecture", "mlp-relu-" + std::to_string(p.shape.input_dim) + "-" + std::to_string(p.shape.hidden1) + "-" +
                            std::to_string(p.shape.hidden2) + "-1"},
       {"input_dim", p.shape.input_dim},
       {"hidden1", p.shape.hidden1},
       {"hidden2", p.shape.hidden2},
       {"seed", p.seed},
       {"w1", matrix_to_json(l.w1)},
       {"b1", vector_to_json(l.b1)},
       {"w2", matrix_to_json(l.w2)},
       {"b2", vector_to_json(l.b2)},
       {"w3", matrix_to_json(l.w3)},
       {"b3", l.b3}};
}

MlpParams mlp_params_from_json(const nlohmann::json& j) {
  MlpShape s{j.at("input_dim").get<int>(), j.at("hidden1").get<int>(), j.at("hidden2").get<int>()};
  const Eigen::MatrixXd w1 = matrix_from_json(j.at("w1"));
  const Eigen::VectorXd b1 = vector_from_json(j.at("b1"));
  const Eigen::MatrixXd w2 = matrix_from_json(j.at("w2"));
  const Eigen::VectorXd b2 = vector_from_json(j.at("b2"));
  const Eigen::MatrixXd w3 = matrix_from_json(j.at("w3"));
  if (w1.rows() != s.hidden1 || w1.cols() != s.input_dim || b1.size() != s.hidden1 || w2.rows() != s.hidden2 ||
      w2.cols() != s.hidden1 || b2.size() != s.hidden2 || w3.rows() != 1 || w3.cols() != s.hidden2)
    throw ParseError("MLP parameter arrays do not match the declared architecture");
  MlpParams p{s, Eigen::VectorXd(), j.value("seed", std::uint64_t{0})};
  pack(s, p.theta, w1, b1, w2, b2, w3.row(0), j.at("b3").get<double>());
  p.validate();
  return p;
}

}  // namespace alphameta
