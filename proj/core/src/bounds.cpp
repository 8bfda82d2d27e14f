#include "alphameta/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alphameta/errors.hpp"
#include "alphameta/rng.hpp"

namespace alphameta {
namespace {

BoundBreakdown assemble(const TaskGram& gram, double ipm, double rademacher, const BoundConfig& cfg) {
  cfg.validate();
  if (!(rademacher >= 0.0) || !std::isfinite(rademacher)) throw InvalidArgument("Rademacher complexity must be non-negative");
  BoundBreakdown b;
  b.ipm_term = ipm;
  b.rademacher_term = 2.0 * rademacher;
  b.confidence_term = confidence_term(cfg, gram.target_size());
  b.total = b.ipm_term + b.rademacher_term + b.confidence_term;
  return b;
}

}  // namespace

void BoundConfig::validate() const {
  if (!(loss_lo < loss_hi)) throw InvalidArgument("loss range must satisfy a < b");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0, 1)");
  if (mc_draws < 1) throw InvalidArgument("mc_draws must be positive");
}

RademacherEstimate rademacher_linear(const Task& target, const BasisFn& basis, double norm_bound, int mc_draws,
                                     std::uint64_t seed) {
  if (!(norm_bound > 0.0)) throw InvalidArgument("norm bound must be positive");
  if (mc_draws < 1) throw InvalidArgument("mc_draws must be positive");
  const Eigen::MatrixXd psi = basis.apply_rows(target.features());
  const auto n = psi.rows();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < psi.cols(); ++c) {
      if (psi(a, c) < psi(b, c)) return true;
      if (psi(b, c) < psi(a, c)) return false;
    }
    return false;
  });
  Eigen::MatrixXd sorted(n, psi.cols());
  for (Eigen::Index i = 0; i < n; ++i) sorted.row(i) = psi.row(order[static_cast<std::size_t>(i)]);

  Rng rng(seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  Eigen::VectorXd acc(psi.cols());
  for (int m = 0; m < mc_draws; ++m) {
    acc.setZero();
    for (Eigen::Index i = 0; i < n; ++i) acc += static_cast<double>(rng.rademacher()) * sorted.row(i).transpose();
    const double s = acc.norm() / static_cast<double>(n);
    sum += s;
    sum_sq += s * s;
  }
  const double draws = static_cast<double>(mc_draws);
  const double mean = sum / draws;
  const double var = mc_draws > 1 ? std::max(0.0, (sum_sq - draws * mean * mean) / (draws - 1.0)) : 0.0;
  return {norm_bound * mean, norm_bound * std::sqrt(var / draws), mc_draws};
}

double confidence_term(const BoundConfig& cfg, Eigen::Index n_target) {
  cfg.validate();
  if (n_target < 1) throw InvalidArgument("target size must be positive");
  const double range = cfg.loss_hi - cfg.loss_lo;
  return 3.0 * std::sqrt(range * range * std::log(2.0 / cfg.epsilon) / (2.0 * static_cast<double>(n_target)));
}

BoundBreakdown evaluate_theorem2_bound(const TaskGram& gram, const SimplexWeights& alpha, double rademacher,
                                       const BoundConfig& cfg) {
  return assemble(gram, kernel_distance(gram, alpha), rademacher, cfg);
}

BoundBreakdown evaluate_corollary_bound(const TaskGram& gram, const SimplexWeights& alpha, double rademacher,
                                        const BoundConfig& cfg) {
  if (alpha.size() != gram.num_sources()) throw InvalidArgument("alpha length does not match the number of sources");
  const auto d = per_source_distances(gram);
  double ipm = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) ipm += alpha[j] * d[j];
  return assemble(gram, ipm, rademacher, cfg);
}

void to_json(nlohmann::json& j, const BoundConfig& cfg) {
  j = {{"loss_range", {cfg.loss_lo, cfg.loss_hi}}, {"epsilon", cfg.epsilon}, {"mc_draws", cfg.mc_draws}};
}

BoundConfig bound_config_from_json(const nlohmann::json& j) {
  BoundConfig cfg;
  if (j.contains("loss_range")) {
    const auto r = j.at("loss_range").get<std::vector<double>>();
    if (r.size() != 2) throw ParseError("loss_range must have two entries");
    cfg.loss_lo = r[0];
    cfg.loss_hi = r[1];
  }
  cfg.epsilon = j.value("epsilon", cfg.epsilon);
  cfg.mc_draws = j.value("mc_draws", cfg.mc_draws);
  cfg.validate();
  return cfg;
}

void to_json(nlohmann::json& j, const BoundBreakdown& b) {
  j = {{"ipm_term", b.ipm_term}, {"rademacher_term", b.rademacher_term}, {"confidence_term", b.confidence_term}, {"total", b.total}};
}

void to_json(nlohmann::json& j, const RademacherEstimate& r) {
  j = {{"value", r.value}, {"std_error", r.std_error}, {"draws", r.draws}};
}

}  // namespace alphameta
