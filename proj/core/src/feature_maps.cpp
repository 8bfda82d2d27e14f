#include "alphameta/feature_maps.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "alphameta/errors.hpp"
#include "alphameta/rng.hpp"

namespace alphameta {
namespace {

void rescale_rows(Eigen::MatrixXd& psi) {
  for (Eigen::Index i = 0; i < psi.rows(); ++i) {
    const double norm = psi.row(i).norm();
    if (norm > 1.0) psi.row(i) /= norm;
  }
}

void check_hinge_point(double psi_norm, double y) {
  constexpr double kSlack = 1e-12;
  if (psi_norm > 1.0 + kSlack)
    throw PreconditionError("hinge embedding requires |psi(x)| <= 1, got " + std::to_string(psi_norm));
  if (std::abs(y) > 1.0 + kSlack) throw PreconditionError("hinge embedding requires |y| <= 1, got " + std::to_string(y));
}

std::string kind_name(BasisKind k) {
  switch (k) {
    case BasisKind::identity_with_bias: return "identity_with_bias";
    case BasisKind::random_fourier: return "random_fourier";
    case BasisKind::mlp_hidden: return "mlp_hidden";
  }
  return "?";
}

}  // namespace

BasisFn BasisFn::identity_with_bias(int input_dim) {
  if (input_dim < 1) throw InvalidArgument("basis input dimension must be positive");
  BasisFn b;
  b.kind_ = BasisKind::identity_with_bias;
  b.input_dim_ = input_dim;
  b.output_dim_ = input_dim + 1;
  return b;
}

BasisFn BasisFn::random_fourier(int input_dim, int num_features, double bandwidth, std::uint64_t seed) {
  if (input_dim < 1 || num_features < 1) throw InvalidArgument("RFF dimensions must be positive");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw InvalidArgument("RFF bandwidth must be positive");
  BasisFn b;
  b.kind_ = BasisKind::random_fourier;
  b.input_dim_ = input_dim;
  b.output_dim_ = num_features;
  b.bandwidth_ = bandwidth;
  b.seed_ = seed;
  Rng rng(seed);
  b.frequencies_.resize(num_features, input_dim);
  for (Eigen::Index r = 0; r < num_features; ++r)
    for (Eigen::Index c = 0; c < input_dim; ++c) b.frequencies_(r, c) = rng.normal(0.0, 1.0 / bandwidth);
  b.offsets_.resize(num_features);
  for (Eigen::Index r = 0; r < num_features; ++r) b.offsets_(r) = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return b;
}

BasisFn BasisFn::random_fourier(Eigen::MatrixXd frequencies, Eigen::VectorXd offsets) {
  if (frequencies.rows() < 1 || frequencies.cols() < 1) throw InvalidArgument("RFF frequency matrix is empty");
  if (offsets.size() != frequencies.rows()) throw InvalidArgument("RFF offsets must match the number of frequencies");
  BasisFn b;
  b.kind_ = BasisKind::random_fourier;
  b.input_dim_ = static_cast<int>(frequencies.cols());
  b.output_dim_ = static_cast<int>(frequencies.rows());
  b.explicit_frequencies_ = true;
  b.frequencies_ = std::move(frequencies);
  b.offsets_ = std::move(offsets);
  return b;
}

BasisFn BasisFn::mlp_hidden(MlpParams params) {
  params.validate();
  BasisFn b;
  b.kind_ = BasisKind::mlp_hidden;
  b.input_dim_ = params.shape.input_dim;
  b.output_dim_ = params.shape.hidden2;
  b.seed_ = params.seed;
  b.mlp_ = std::make_shared<const MlpParams>(std::move(params));
  return b;
}

BasisFn BasisFn::with_normalization(bool on) const {
  BasisFn b = *this;
  b.normalize_ = on;
  return b;
}

Eigen::MatrixXd BasisFn::apply_rows(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim_)
    throw InvalidArgument("basis expects input dimension " + std::to_string(input_dim_) + ", got " + std::to_string(x.cols()));
  Eigen::MatrixXd psi;
  switch (kind_) {
    case BasisKind::identity_with_bias:
      psi.resize(x.rows(), output_dim_);
      psi.leftCols(input_dim_) = x;
      psi.col(input_dim_).setOnes();
      break;
    case BasisKind::random_fourier: {
      const double scale = std::sqrt(2.0 / output_dim_);
      psi = ((x * frequencies_.transpose()).rowwise() + offsets_.transpose()).array().cos() * scale;
      break;
    }
    case BasisKind::mlp_hidden:
      psi = mlp_hidden_features(mlp_->shape, mlp_->theta, x);
      break;
  }
  if (normalize_) rescale_rows(psi);
  return psi;
}

Eigen::VectorXd BasisFn::apply(const Eigen::VectorXd& x) const {
  return apply_rows(x.transpose()).row(0).transpose();
}

double median_heuristic_bandwidth(const Eigen::MatrixXd& points, std::size_t max_points, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n < 2) throw InvalidArgument("median heuristic needs at least two points");
  std::vector<std::size_t> rows;
  if (n > max_points) {
    Rng rng(seed);
    rows = rng.sample_without_replacement(n, max_points);
  } else {
    rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  }
  std::vector<double> dists;
  dists.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = a + 1; b < rows.size(); ++b)
      dists.push_back((points.row(static_cast<Eigen::Index>(rows[a])) - points.row(static_cast<Eigen::Index>(rows[b]))).norm());
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  double median = *mid;
  if (dists.size() % 2 == 0) {
    const double lower = *std::max_element(dists.begin(), mid);
    median = 0.5 * (median + lower);
  }
  if (!(median > 0.0)) throw InvalidArgument("median heuristic: all sampled points coincide");
  return median;
}

Eigen::MatrixXd pooled_inputs(const TaskCollection& tasks) {
  Eigen::Index rows = tasks.target().size();
  for (const auto& s : tasks.sources()) rows += s.size();
  Eigen::MatrixXd pooled(rows, tasks.dim());
  Eigen::Index at = 0;
  for (const auto& s : tasks.sources()) {
    pooled.middleRows(at, s.size()) = s.features();
    at += s.size();
  }
  pooled.bottomRows(tasks.target().size()) = tasks.target().features();
  return pooled;
}

Eigen::VectorXd embed_square(const Eigen::VectorXd& psi, double y) {
  const Eigen::Index d = psi.size();
  Eigen::VectorXd phi(d * d + d + 1);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) phi(r * d + c) = psi(r) * psi(c);
  phi.segment(d * d, d) = std::numbers::sqrt2 * y * psi;
  phi(d * d + d) = y * y;
  return phi;
}

Eigen::VectorXd embed_hinge(const Eigen::VectorXd& psi, double y) {
  check_hinge_point(psi.norm(), y);
  const Eigen::Index d = psi.size();
  Eigen::VectorXd phi(d + 1);
  phi.head(d) = y * psi;
  phi(d) = 1.0;
  return phi;
}

Eigen::VectorXd square_embedding_sum(const Eigen::MatrixXd& psi, const Eigen::VectorXd& y) {
  if (psi.rows() != y.size()) throw InvalidArgument("embedding sum: row count mismatch");
  const Eigen::Index d = psi.cols();
  Eigen::VectorXd phi(d * d + d + 1);
  // Sum of psi psi^T is symmetric, so row-major and column-major vec agree.
  const Eigen::MatrixXd outer = psi.transpose() * psi;
  Eigen::Map<Eigen::MatrixXd>(phi.data(), d, d) = outer;
  phi.segment(d * d, d) = std::numbers::sqrt2 * (psi.transpose() * y);
  phi(d * d + d) = y.squaredNorm();
  return phi;
}

Eigen::VectorXd hinge_embedding_sum(const Eigen::MatrixXd& psi, const Eigen::VectorXd& y) {
  if (psi.rows() != y.size()) throw InvalidArgument("embedding sum: row count mismatch");
  for (Eigen::Index i = 0; i < psi.rows(); ++i) {
    try {
      check_hinge_point(psi.row(i).norm(), y(i));
    } catch (const PreconditionError& e) {
      throw PreconditionError("row " + std::to_string(i) + ": " + e.what());
    }
  }
  const Eigen::Index d = psi.cols();
  Eigen::VectorXd phi(d + 1);
  phi.head(d) = psi.transpose() * y;
  phi(d) = static_cast<double>(psi.rows());
  return phi;
}

LossEmbedding::LossEmbedding(LossKind loss, BasisFn basis) : loss_(loss), basis_(std::move(basis)) {}

int LossEmbedding::feature_dim() const noexcept {
  const int d = basis_.output_dim();
  return loss_ == LossKind::square ? d * d + d + 1 : d + 1;
}

Eigen::VectorXd LossEmbedding::embed(const Eigen::VectorXd& x, double y) const {
  const Eigen::VectorXd psi = basis_.apply(x);
  return loss_ == LossKind::square ? embed_square(psi, y) : embed_hinge(psi, y);
}

Eigen::VectorXd LossEmbedding::embedding_sum(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels) const {
  const Eigen::MatrixXd psi = basis_.apply_rows(features);
  return loss_ == LossKind::square ? square_embedding_sum(psi, labels) : hinge_embedding_sum(psi, labels);
}

double loss_kernel(const LossEmbedding& emb, const Eigen::VectorXd& x, double y, const Eigen::VectorXd& x2, double y2) {
  return emb.embed(x, y).dot(emb.embed(x2, y2));
}

void to_json(nlohmann::json& j, const BasisFn& basis) {
  j = {{"kind", kind_name(basis.kind())},
       {"input_dim", basis.input_dim()},
       {"output_dim", basis.output_dim()},
       {"normalized", basis.normalized()}};
  if (basis.kind() == BasisKind::random_fourier) {
    if (basis.explicit_frequencies()) {
      j["frequencies"] = matrix_to_json(basis.frequencies());
      j["offsets"] = vector_to_json(basis.offsets());
    } else {
      j["bandwidth"] = basis.bandwidth();
      j["seed"] = basis.seed();
    }
  }
  if (basis.kind() == BasisKind::mlp_hidden) j["seed"] = basis.seed();
}

BasisFn basis_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  BasisFn basis = [&] {
    if (kind == "identity_with_bias") return BasisFn::identity_with_bias(j.at("input_dim").get<int>());
    if (kind == "random_fourier") {
      if (j.contains("frequencies"))
        return BasisFn::random_fourier(matrix_from_json(j.at("frequencies")), vector_from_json(j.at("offsets")));
      return BasisFn::random_fourier(j.at("input_dim").get<int>(), j.at("output_dim").get<int>(),
                                     j.at("bandwidth").get<double>(), j.at("seed").get<std::uint64_t>());
    }
    if (kind == "mlp_hidden") throw ParseError("mlp_hidden bases are rebuilt from MLP parameters, not from basis JSON");
    throw ParseError("unknown basis kind '" + kind + "'");
  }();
  return basis.with_normalization(j.value("normalized", false));
}

std::string to_string(LossKind loss) { return loss == LossKind::square ? "square" : "hinge"; }

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "square") return LossKind::square;
  if (s == "hinge") return LossKind::hinge;
  throw InvalidArgument("unknown loss '" + s + "' (expected square or hinge)");
}

}  // namespace alphameta
