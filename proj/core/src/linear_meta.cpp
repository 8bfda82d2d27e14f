#include "alphameta/linear_meta.hpp"

#include <algorithm>
#include <cmath>

#include "alphameta/errors.hpp"

namespace alphameta {
namespace {

// LDLT's rcond estimate can miss an exactly zero pivot, so the pivot ratio is folded in.
constexpr double kMinRcond = 1e-13;

struct Solved {
  Eigen::VectorXd w;
  double ridge;
  double rcond;
};

Solved solve_symmetric(Eigen::MatrixXd H, const Eigen::VectorXd& rhs, std::optional<double> ridge) {
  const auto d = H.rows();
  const double r = ridge ? *ridge : 1e-8 * H.trace() / static_cast<double>(d);
  if (r < 0.0) throw InvalidArgument("ridge must be non-negative");
  H.diagonal().array() += r;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  double rcond = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
  if (rcond > 0.0) {
    const Eigen::VectorXd piv = ldlt.vectorD().cwiseAbs();
    rcond = std::min(rcond, piv.minCoeff() / piv.maxCoeff());
  }
  if (ldlt.info() != Eigen::Success || !(rcond > kMinRcond) || !ldlt.isPositive())
    throw NumericalError("meta-objective Hessian is singular or indefinite (rcond " + std::to_string(rcond) +
                         "); use a ridge > 0");
  Eigen::VectorXd w = ldlt.solve(rhs);
  if (!w.allFinite()) throw NumericalError("linear solve produced non-finite weights; use a ridge > 0");
  return {std::move(w), r, rcond};
}

}  // namespace

std::string to_string(LinearMode m) { return m == LinearMode::erm ? "erm" : "maml"; }

LinearMode linear_mode_from_string(const std::string& s) {
  if (s == "erm") return LinearMode::erm;
  if (s == "maml") return LinearMode::maml;
  throw InvalidArgument("unknown linear mode '" + s + "' (expected erm or maml)");
}

LinearTaskStats linear_task_stats(const Task& task, const BasisFn& basis) {
  const Eigen::MatrixXd psi = basis.apply_rows(task.features());
  return {psi.transpose() * psi, psi.transpose() * task.labels(), task.size()};
}

LinearMetaModel fit_weighted_linear(std::span<const Task> sources, const BasisFn& basis, const SimplexWeights& alpha,
                                    const LinearFitOptions& options) {
  if (sources.size() != alpha.size())
    throw InvalidArgument("alpha has " + std::to_string(alpha.size()) + " entries for " + std::to_string(sources.size()) +
                          " sources");
  const double eta = options.mode == LinearMode::erm ? 0.0 : options.eta;
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidArgument("eta must be finite and non-negative");
  const Eigen::Index d = basis.output_dim();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  for (std::size_t j = 0; j < sources.size(); ++j) {
    const double a = alpha[j];
    if (a == 0.0) continue;
    const LinearTaskStats s = linear_task_stats(sources[j], basis);
    if (eta == 0.0) {
      H.noalias() += a * s.A;
      rhs.noalias() += a * s.b;
    } else {
      const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) - eta * s.A;
      H.noalias() += a * (m.transpose() * s.A * m);
      // Gradient of the objective is sum_j a_j m^T (A_j U_j - b_j) with
      // U_j = m w + eta b_j, so the right-hand side carries m^T m b_j.
      rhs.noalias() += a * (m.transpose() * (m * s.b));
    }
  }
  H = (0.5 * (H + H.transpose())).eval();
  Solved solved = solve_symmetric(std::move(H), rhs, options.ridge);
  LinearMetaModel model{std::move(solved.w), eta, alpha, options.mode, solved.ridge, solved.rcond, basis};
  return model;
}

LinearMetaModel fit_weighted_linear(const TaskCollection& tasks, const BasisFn& basis, const SimplexWeights& alpha,
                                    const LinearFitOptions& options) {
  return fit_weighted_linear(std::span<const Task>(tasks.sources()), basis, alpha, options);
}

LinearMetaModel fit_task_only(const Task& task, const BasisFn& basis, std::optional<double> ridge) {
  const LinearTaskStats s = linear_task_stats(task, basis);
  Solved solved = solve_symmetric(s.A, s.b, ridge);
  return {std::move(solved.w), 0.0, SimplexWeights({1.0}, WeightMethod::manual), LinearMode::erm, solved.ridge,
          solved.rcond, basis};
}

LinearMetaModel adapt_linear(const LinearMetaModel& model, const Task& target, const BasisFn& basis, int steps, double lr) {
  if (steps < 0) throw InvalidArgument("adaptation steps must be non-negative");
  LinearMetaModel out = model;
  if (steps == 0 || lr == 0.0) return out;
  const Eigen::MatrixXd psi = basis.apply_rows(target.features());
  if (psi.cols() != out.w.size()) throw InvalidArgument("basis output dimension does not match the model");
  const double inv_n = 1.0 / static_cast<double>(target.size());
  for (int s = 0; s < steps; ++s) out.w -= lr * inv_n * (psi.transpose() * (psi * out.w - target.labels()));
  return out;
}

double rmse(const LinearMetaModel& model, const Task& task, const BasisFn& basis) {
  const Eigen::MatrixXd psi = basis.apply_rows(task.features());
  if (psi.cols() != model.w.size()) throw InvalidArgument("basis output dimension does not match the model");
  return std::sqrt((psi * model.w - task.labels()).squaredNorm() / static_cast<double>(task.size()));
}

void to_json(nlohmann::json& j, const LinearMetaModel& m) {
  j = {{"w", vector_to_json(m.w)}, {"eta", m.eta},   {"alpha", m.alpha},          {"mode", to_string(m.mode)},
       {"ridge", m.ridge},         {"rcond", m.rcond}, {"basis_meta", m.basis_meta}};
}

}  // namespace alphameta
