#include "alphameta/kernel_distance.hpp"

#include <cmath>

#include "alphameta/errors.hpp"

namespace alphameta {

void TaskGram::validate() const {
  if (sizes.size() < 2) throw InvalidArgument("task gram needs at least one source and a target");
  const auto n = static_cast<Eigen::Index>(sizes.size());
  if (K.rows() != n || K.cols() != n) throw InvalidArgument("task gram matrix shape does not match the number of tasks");
  if (!order.empty() && order.size() != sizes.size()) throw InvalidArgument("task gram order labels do not match sizes");
  for (auto s : sizes)
    if (s < 1) throw InvalidArgument("task gram sizes must be positive");
  if (!K.allFinite()) throw NumericalError("task gram contains non-finite entries");
  const double scale = K.cwiseAbs().maxCoeff();
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1e-300))
    throw NumericalError("task gram is not symmetric");
}

TaskGram gram_from_embedding_sums(const Eigen::MatrixXd& phi_sums, std::vector<Eigen::Index> sizes,
                                  std::vector<std::string> order) {
  if (phi_sums.rows() != static_cast<Eigen::Index>(sizes.size()))
    throw InvalidArgument("one embedding sum per task is required");
  TaskGram g;
  g.K = phi_sums * phi_sums.transpose();
  // Symmetrize exactly; the product is symmetric up to rounding.
  g.K = (0.5 * (g.K + g.K.transpose())).eval();
  g.sizes = std::move(sizes);
  g.order = std::move(order);
  g.validate();
  return g;
}

TaskGram build_task_gram(const TaskCollection& tasks, const LossEmbedding& emb) {
  const std::size_t j = tasks.num_sources();
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(j + 1), emb.feature_dim());
  std::vector<Eigen::Index> sizes;
  std::vector<std::string> order;
  auto add = [&](const Task& t, std::size_t row) {
    try {
      phi.row(static_cast<Eigen::Index>(row)) = emb.embedding_sum(t.features(), t.labels()).transpose();
    } catch (const PreconditionError& e) {
      throw PreconditionError("task '" + t.id() + "': " + e.what());
    }
    sizes.push_back(t.size());
    order.push_back(t.id());
  };
  for (std::size_t s = 0; s < j; ++s) add(tasks.sources()[s], s);
  add(tasks.target(), j);
  TaskGram g = gram_from_embedding_sums(phi, std::move(sizes), std::move(order));
  g.kernel_meta = {{"loss", to_string(emb.loss())}, {"basis", emb.basis()}, {"feature_dim", emb.feature_dim()}};
  return g;
}

Eigen::VectorXd mixture_vector(const TaskGram& gram, std::span<const double> alpha) {
  const std::size_t j = gram.num_sources();
  if (alpha.size() != j)
    throw InvalidArgument("alpha has length " + std::to_string(alpha.size()) + ", gram has " + std::to_string(j) + " sources");
  double sum = 0.0;
  for (double a : alpha) {
    if (a < 0.0 || !std::isfinite(a)) throw InvalidArgument("alpha entries must be finite and non-negative");
    sum += a;
  }
  if (std::abs(sum - 1.0) > SimplexWeights::kSumTolerance) throw InvalidArgument("alpha does not sum to 1");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j + 1));
  for (std::size_t s = 0; s < j; ++s) v(static_cast<Eigen::Index>(s)) = alpha[s] / static_cast<double>(gram.sizes[s]);
  v(static_cast<Eigen::Index>(j)) = -1.0 / static_cast<double>(gram.sizes[j]);
  return v;
}

double kernel_distance_squared(const TaskGram& gram, std::span<const double> alpha) {
  const Eigen::VectorXd v = mixture_vector(gram, alpha);
  const double q = v.dot(gram.K * v);
  if (q >= 0.0) return q;
  // Bound on |v^T K v| from Cauchy-Schwarz on the PSD gram.
  const double scale = (v.cwiseAbs().array() * gram.K.diagonal().cwiseMax(0.0).cwiseSqrt().array()).sum();
  if (q < -1e-8 * scale * scale)
    throw NumericalError("kernel distance quadratic form is negative beyond round-off (" + std::to_string(q) +
                         "); the task gram is not positive semi-definite");
  return 0.0;
}

double kernel_distance(const TaskGram& gram, std::span<const double> alpha) {
  return std::sqrt(kernel_distance_squared(gram, alpha));
}

double kernel_distance(const TaskGram& gram, const SimplexWeights& alpha) { return kernel_distance(gram, alpha.span()); }

std::vector<double> per_source_distances(const TaskGram& gram) {
  const std::size_t j = gram.num_sources();
  std::vector<double> out(j);
  std::vector<double> e(j, 0.0);
  for (std::size_t s = 0; s < j; ++s) {
    e[s] = 1.0;
    out[s] = kernel_distance(gram, e);
    e[s] = 0.0;
  }
  return out;
}

void to_json(nlohmann::json& j, const TaskGram& gram) {
  j = {{"K", matrix_to_json(gram.K)}, {"sizes", gram.sizes}, {"order", gram.order}, {"kernel_meta", gram.kernel_meta}};
}

TaskGram task_gram_from_json(const nlohmann::json& j) {
  TaskGram g;
  g.K = matrix_from_json(j.at("K"));
  g.sizes = j.at("sizes").get<std::vector<Eigen::Index>>();
  g.order = j.value("order", std::vector<std::string>{});
  g.kernel_meta = j.value("kernel_meta", nlohmann::json::object());
  g.validate();
  return g;
}

}  // namespace alphameta
