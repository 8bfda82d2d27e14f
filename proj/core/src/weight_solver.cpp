#include "alphameta/weight_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "alphameta/errors.hpp"

namespace alphameta {
namespace {

constexpr double kSupportThreshold = 1e-10;

Eigen::VectorXd project(const Eigen::VectorXd& v) {
  const auto p = project_to_simplex(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
  return Eigen::Map<const Eigen::VectorXd>(p.data(), v.size());
}

double fw_gap(const Eigen::VectorXd& alpha, const Eigen::VectorXd& grad) { return grad.dot(alpha) - grad.minCoeff(); }

// Exact minimizer of f restricted to the affine hull of the current support.
// Returns false when the result leaves the simplex or does not improve f.
bool polish_on_support(const SimplexQuadratic& f, Eigen::VectorXd& alpha) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index j = 0; j < alpha.size(); ++j)
    if (alpha(j) > kSupportThreshold) support.push_back(j);
  const auto s = static_cast<Eigen::Index>(support.size());
  if (s == 0) return false;
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + 1, s + 1);
  Eigen::VectorXd rhs(s + 1);
  for (Eigen::Index a = 0; a < s; ++a) {
    for (Eigen::Index b = 0; b < s; ++b) kkt(a, b) = 2.0 * f.Q(support[a], support[b]);
    kkt(a, s) = 1.0;
    kkt(s, a) = 1.0;
    rhs(a) = 2.0 * f.q(support[a]);
  }
  rhs(s) = 1.0;
  const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  Eigen::VectorXd candidate = Eigen::VectorXd::Zero(alpha.size());
  for (Eigen::Index a = 0; a < s; ++a) {
    if (!std::isfinite(sol(a)) || sol(a) < -1e-14) return false;
    candidate(support[a]) = std::max(sol(a), 0.0);
  }
  const double total = candidate.sum();
  if (!(total > 0.0)) return false;
  candidate /= total;
  if (f.value(candidate) > f.value(alpha) + 1e-15 * (1.0 + std::abs(f.value(alpha)))) return false;
  alpha = candidate;
  return true;
}

struct SolveState {
  Eigen::VectorXd alpha;
  int iterations = 0;
};

SolveState run_projected_gradient(const SimplexQuadratic& f, const QpOptions& opt, Eigen::VectorXd alpha) {
  const double lipschitz = 2.0 * f.Q.cwiseAbs().rowwise().sum().maxCoeff();
  const double step = 1.0 / lipschitz;
  Eigen::VectorXd y = alpha;
  double t = 1.0;
  double f_prev = f.value(alpha);
  int it = 0;
  for (; it < opt.max_iters; ++it) {
    Eigen::VectorXd next = project(y - step * f.gradient(y));
    const double f_next = f.value(next);
    if (f_next > f_prev) {
      // Adaptive restart: drop momentum and take a plain projected step.
      y = alpha;
      t = 1.0;
      next = project(alpha - step * f.gradient(alpha));
    }
    const double f_new = f.value(next);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - alpha);
    t = t_next;
    const double decrease = f_prev - f_new;
    alpha = std::move(next);
    f_prev = f_new;

    if ((it + 1) % 10 == 0 || decrease <= opt.tol * (1.0 + std::abs(f_new))) {
      if (simplex_kkt_residual(alpha, f.gradient(alpha)) <= opt.kkt_tol) break;
      Eigen::VectorXd polished = alpha;
      if (polish_on_support(f, polished) && simplex_kkt_residual(polished, f.gradient(polished)) <= opt.kkt_tol) {
        alpha = std::move(polished);
        break;
      }
    }
  }
  return {std::move(alpha), std::min(it + 1, opt.max_iters)};
}

SolveState run_frank_wolfe(const SimplexQuadratic& f, const QpOptions& opt, Eigen::VectorXd alpha) {
  int it = 0;
  for (; it < opt.max_iters; ++it) {
    const Eigen::VectorXd g = f.gradient(alpha);
    if (fw_gap(alpha, g) <= opt.tol) break;
    Eigen::Index best;
    g.minCoeff(&best);
    Eigen::VectorXd d = -alpha;
    d(best) += 1.0;
    const double curvature = 2.0 * d.dot(f.Q * d);
    const double slope = g.dot(d);
    const double gamma = curvature > 0.0 ? std::clamp(-slope / curvature, 0.0, 1.0) : 1.0;
    alpha += gamma * d;
  }
  Eigen::VectorXd polished = alpha;
  if (polish_on_support(f, polished)) alpha = std::move(polished);
  return {std::move(alpha), std::min(it + 1, opt.max_iters)};
}

}  // namespace

SimplexQuadratic SimplexQuadratic::from_gram(const TaskGram& gram) {
  gram.validate();
  const auto j = static_cast<Eigen::Index>(gram.num_sources());
  Eigen::VectorXd inv_n(j + 1);
  for (Eigen::Index s = 0; s <= j; ++s) inv_n(s) = 1.0 / static_cast<double>(gram.sizes[static_cast<std::size_t>(s)]);
  SimplexQuadratic f;
  f.Q = inv_n.head(j).asDiagonal() * gram.K.topLeftCorner(j, j) * inv_n.head(j).asDiagonal();
  f.q = inv_n.head(j).asDiagonal() * gram.K.col(j).head(j) * inv_n(j);
  f.c = gram.K(j, j) * inv_n(j) * inv_n(j);
  return f;
}

double simplex_kkt_residual(const Eigen::VectorXd& alpha, const Eigen::VectorXd& grad) {
  double max_support = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < alpha.size(); ++j)
    if (alpha(j) > kSupportThreshold) max_support = std::max(max_support, grad(j));
  if (!std::isfinite(max_support)) return std::numeric_limits<double>::infinity();
  // lambda = (max_S grad + min_all grad) / 2 minimizes the residual.
  return 0.5 * (max_support - grad.minCoeff());
}

std::pair<SimplexWeights, QpReport> solve_alpha_qp(const TaskGram& gram, const QpOptions& options) {
  if (!(options.tol > 0.0) || !(options.kkt_tol > 0.0) || options.max_iters < 1)
    throw InvalidArgument("QP tolerances and iteration limit must be positive");
  const SimplexQuadratic raw = SimplexQuadratic::from_gram(gram);
  const auto j = raw.Q.rows();
  QpReport report;
  auto finish = [&](Eigen::VectorXd alpha, int iterations) {
    const Eigen::VectorXd g = raw.gradient(alpha);
    std::vector<double> a(alpha.data(), alpha.data() + alpha.size());
    const double value = std::max(0.0, raw.value(alpha));
    report.iterations = iterations;
    report.duality_gap_proxy = std::max(0.0, fw_gap(alpha, g));
    return SimplexWeights(std::move(a), WeightMethod::qp, value);
  };

  if (j == 1) {
    report.converged = true;
    return {finish(Eigen::VectorXd::Ones(1), 0), report};
  }

  // Work on a rescaled copy so tolerances do not depend on the kernel's units.
  const double scale = std::max({raw.Q.diagonal().maxCoeff(), raw.c, 0.0});
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(j, 1.0 / static_cast<double>(j));
  if (!(scale > 0.0)) {
    report.converged = true;
    return {finish(uniform, 0), report};
  }
  SimplexQuadratic f{raw.Q / scale, raw.q / scale, raw.c / scale};

  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -vmin;
  for (Eigen::Index s = 0; s < j; ++s) {
    const double v = f.Q(s, s) - 2.0 * f.q(s) + f.c;
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  const double uniform_kkt = simplex_kkt_residual(uniform, f.gradient(uniform));
  if (vmax - vmin <= 1e-12 * (1.0 + std::abs(f.value(uniform))) && uniform_kkt <= options.kkt_tol) {
    report.kkt_residual = uniform_kkt;
    report.converged = true;
    return {finish(uniform, 0), report};
  }

  SolveState state = options.algorithm == QpAlgorithm::projected_gradient ? run_projected_gradient(f, options, uniform)
                                                                           : run_frank_wolfe(f, options, uniform);
  report.kkt_residual = simplex_kkt_residual(state.alpha, f.gradient(state.alpha));
  report.converged = report.kkt_residual <= options.kkt_tol;
  return {finish(std::move(state.alpha), state.iterations), report};
}

SimplexWeights solve_alpha_threshold(const TaskGram& gram) {
  const auto d = per_source_distances(gram);
  std::size_t best = 0;
  for (std::size_t s = 1; s < d.size(); ++s) {
    // Differences at the level of round-off count as ties.
    if (d[s] < d[best] - 1e-12 * (1.0 + d[best])) best = s;
  }
  std::vector<double> alpha(d.size(), 0.0);
  alpha[best] = 1.0;
  return SimplexWeights(std::move(alpha), WeightMethod::threshold, d[best] * d[best]);
}

SimplexWeights uniform_weights(std::size_t num_sources) {
  if (num_sources < 1) throw InvalidArgument("uniform weights need at least one source");
  return SimplexWeights(std::vector<double>(num_sources, 1.0 / static_cast<double>(num_sources)), WeightMethod::uniform);
}

SimplexWeights uniform_weights(const TaskGram& gram) {
  const SimplexWeights w = uniform_weights(gram.num_sources());
  return w.with_objective(kernel_distance_squared(gram, w.span()));
}

SimplexWeights solve_weights(const TaskGram& gram, WeightMethod method, const QpOptions& options) {
  switch (method) {
    case WeightMethod::qp: return solve_alpha_qp(gram, options).first;
    case WeightMethod::threshold: return solve_alpha_threshold(gram);
    case WeightMethod::uniform: return uniform_weights(gram);
    case WeightMethod::manual: break;
  }
  throw InvalidArgument("manual weights cannot be solved for");
}

void to_json(nlohmann::json& j, const QpReport& r) {
  j = {{"iterations", r.iterations},
       {"kkt_residual", r.kkt_residual},
       {"duality_gap_proxy", r.duality_gap_proxy},
       {"converged", r.converged}};
}

}  // namespace alphameta
