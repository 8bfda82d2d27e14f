#include "alphameta/gradient_meta.hpp"

#include <cmath>

#include "alphameta/errors.hpp"
#include "alphameta/feature_maps.hpp"
#include "alphameta/rng.hpp"

namespace alphameta {
namespace {

constexpr std::uint64_t kBatchStream = 0xBA7C4;

struct TaskTerms {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

// L_j(U_j(theta)) and its gradient for one task.
TaskTerms maml_task_terms(const MlpShape& shape, const Eigen::VectorXd& theta, const Task& task, double inner_lr,
                          MamlOrder order, int inner_steps) {
  const Eigen::MatrixXd& x = task.features();
  const Eigen::VectorXd& y = task.labels();
  TaskTerms out;
  if (inner_lr == 0.0 || inner_steps == 0) {
    out.loss = mse_loss(shape, theta, x, y, &out.grad);
    return out;
  }
  Eigen::VectorXd adapted = theta;
  Eigen::VectorXd g;
  for (int s = 0; s < inner_steps; ++s) {
    mse_loss(shape, adapted, x, y, &g);
    adapted -= inner_lr * g;
  }
  out.loss = mse_loss(shape, adapted, x, y, &out.grad);
  if (order == MamlOrder::second && inner_steps == 1)
    out.grad -= inner_lr * mse_hessian_vector(shape, theta, x, y, out.grad);
  return out;
}

struct BatchTerms {
  double loss = 0.0;
  Eigen::VectorXd grad;
  std::vector<double> task_losses;
};

BatchTerms batch_terms(const MlpShape& shape, const Eigen::VectorXd& theta, std::span<const Task* const> tasks,
                       std::span<const double> weights, double inner_lr, MamlOrder order, int inner_steps,
                       bool all_losses) {
  if (tasks.size() != weights.size()) throw InvalidArgument("one weight per task is required");
  if (inner_steps < 0) throw InvalidArgument("inner_steps must be non-negative");
  BatchTerms out;
  out.grad = Eigen::VectorXd::Zero(theta.size());
  out.task_losses.assign(tasks.size(), 0.0);
  for (std::size_t j = 0; j < tasks.size(); ++j) {
    const double w = weights[j];
    if (w == 0.0) {
      if (all_losses) {
        Eigen::VectorXd adapted = theta;
        Eigen::VectorXd g;
        for (int s = 0; s < inner_steps && inner_lr != 0.0; ++s) {
          mse_loss(shape, adapted, tasks[j]->features(), tasks[j]->labels(), &g);
          adapted -= inner_lr * g;
        }
        out.task_losses[j] = mse_loss(shape, adapted, tasks[j]->features(), tasks[j]->labels());
      }
      continue;
    }
    const TaskTerms t = maml_task_terms(shape, theta, *tasks[j], inner_lr, order, inner_steps);
    out.task_losses[j] = t.loss;
    out.loss += w * t.loss;
    out.grad.noalias() += w * t.grad;
  }
  return out;
}

std::vector<const Task*> batch_pointers(const TaskCollection& tasks, const std::vector<std::size_t>& idx) {
  std::vector<const Task*> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(&tasks.sources()[i]);
  return out;
}

std::vector<std::size_t> draw_batch(std::size_t num_sources, int batch_tasks, Rng& rng) {
  if (static_cast<std::size_t>(batch_tasks) >= num_sources) {
    std::vector<std::size_t> all(num_sources);
    for (std::size_t i = 0; i < num_sources; ++i) all[i] = i;
    return all;
  }
  return rng.sample_without_replacement(num_sources, static_cast<std::size_t>(batch_tasks));
}

MlpParams starting_params(const TaskCollection& tasks, const TrainConfig& cfg) {
  if (cfg.init) {
    cfg.init->validate();
    if (cfg.init->shape.input_dim != tasks.dim()) throw InvalidArgument("initial parameters do not match the task input dimension");
    return *cfg.init;
  }
  MlpShape shape = cfg.shape;
  if (shape.input_dim != tasks.dim()) throw InvalidArgument("network input_dim does not match the task feature dimension");
  return MlpParams::initialize(shape, cfg.seed);
}

void clip_gradient(Eigen::VectorXd& g, double clip) {
  if (clip <= 0.0) return;
  const double norm = g.norm();
  if (norm > clip) g *= clip / norm;
}

void check_finite(long iter, double loss, const Eigen::VectorXd& grad, double last_finite) {
  if (!std::isfinite(loss) || !grad.allFinite())
    throw DivergenceError(iter, last_finite,
                          "meta-training diverged at iteration " + std::to_string(iter) + " (last finite loss " +
                              std::to_string(last_finite) + ")");
}

double entropy_of(std::span<const double> w) {
  double h = 0.0;
  for (double a : w)
    if (a > 0.0) h -= a * std::log(a);
  return h;
}

void note_order_fallback(const TrainConfig& cfg, TrainResult& result) {
  if (cfg.order == MamlOrder::second && cfg.inner_steps > 1)
    result.warnings.push_back("second-order meta-gradients support a single inner step; using first order for inner_steps=" +
                              std::to_string(cfg.inner_steps));
}

}  // namespace

std::string to_string(MamlOrder o) { return o == MamlOrder::first ? "first" : "second"; }

MamlOrder maml_order_from_string(const std::string& s) {
  if (s == "first") return MamlOrder::first;
  if (s == "second") return MamlOrder::second;
  throw InvalidArgument("unknown MAML order '" + s + "' (expected first or second)");
}

void TrainConfig::validate() const {
  if (!(inner_lr >= 0.0) || !(outer_lr > 0.0)) throw InvalidArgument("learning rates must be positive (inner may be 0)");
  if (meta_iters < 0 || batch_tasks < 1 || inner_steps < 0) throw InvalidArgument("iteration counts must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0))
    throw InvalidArgument("invalid Adam hyper-parameters");
  if (log_every < 1) throw InvalidArgument("log_every must be positive");
  if (!(gamma_weight >= 0.0) || !(alpha_lr >= 0.0)) throw InvalidArgument("direct-bound weights must be non-negative");
}

TrainConfig TrainConfig::direct_bound_defaults() {
  TrainConfig cfg;
  cfg.batch_tasks = 150;
  return cfg;
}

Adam::Adam(Eigen::Index size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void Adam::step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  theta.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

MetaGradient weighted_maml_gradient(const MlpShape& shape, const Eigen::VectorXd& theta, std::span<const Task* const> tasks,
                                    std::span<const double> weights, double inner_lr, MamlOrder order, int inner_steps) {
  BatchTerms t = batch_terms(shape, theta, tasks, weights, inner_lr, order, inner_steps, false);
  return {t.loss, std::move(t.grad)};
}

double weighted_maml_loss(const MlpShape& shape, const Eigen::VectorXd& theta, std::span<const Task* const> tasks,
                          std::span<const double> weights, double inner_lr, int inner_steps) {
  if (tasks.size() != weights.size()) throw InvalidArgument("one weight per task is required");
  double total = 0.0;
  Eigen::VectorXd g;
  for (std::size_t j = 0; j < tasks.size(); ++j) {
    Eigen::VectorXd adapted = theta;
    for (int s = 0; s < inner_steps && inner_lr != 0.0; ++s) {
      mse_loss(shape, adapted, tasks[j]->features(), tasks[j]->labels(), &g);
      adapted -= inner_lr * g;
    }
    total += weights[j] * mse_loss(shape, adapted, tasks[j]->features(), tasks[j]->labels());
  }
  return total;
}

TaskGram hidden_layer_gram(const MlpParams& params, std::span<const Task* const> batch, const Task& target) {
  const auto rows = static_cast<Eigen::Index>(batch.size() + 1);
  const Eigen::Index h = params.shape.hidden2;
  Eigen::MatrixXd phi(rows, h * h + h + 1);
  std::vector<Eigen::Index> sizes;
  std::vector<std::string> order;
  auto add = [&](const Task& t, Eigen::Index row) {
    phi.row(row) = square_embedding_sum(mlp_hidden_features(params.shape, params.theta, t.features()), t.labels()).transpose();
    sizes.push_back(t.size());
    order.push_back(t.id());
  };
  for (std::size_t j = 0; j < batch.size(); ++j) add(*batch[j], static_cast<Eigen::Index>(j));
  add(target, rows - 1);
  TaskGram g = gram_from_embedding_sums(phi, std::move(sizes), std::move(order));
  g.kernel_meta = {{"loss", "square"}, {"basis", "mlp_hidden"}, {"feature_dim", phi.cols()}};
  return g;
}

TrainResult train_alpha_maml(const TaskCollection& tasks, const TrainConfig& cfg, WeightMethod weight_mode) {
  cfg.validate();
  if (weight_mode == WeightMethod::manual) throw InvalidArgument("train_alpha_maml: weight mode must be qp, threshold or uniform");
  TrainResult result{starting_params(tasks, cfg), {}, std::nullopt, {}};
  note_order_fallback(cfg, result);
  MlpParams& params = result.params;
  Adam adam(params.theta.size(), cfg.outer_lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  Rng batch_rng = Rng(cfg.seed).split(kBatchStream);
  double last_finite = 0.0;

  for (long it = 0; it < cfg.meta_iters; ++it) {
    const auto idx = draw_batch(tasks.num_sources(), cfg.batch_tasks, batch_rng);
    const auto batch = batch_pointers(tasks, idx);
    const bool log_now = it % cfg.log_every == 0 || it + 1 == cfg.meta_iters;
    std::optional<TaskGram> gram;
    if (weight_mode != WeightMethod::uniform || log_now) gram = hidden_layer_gram(params, batch, tasks.target());

    std::vector<double> weights;
    if (weight_mode == WeightMethod::uniform) {
      weights.assign(batch.size(), 1.0 / static_cast<double>(batch.size()));
    } else if (weight_mode == WeightMethod::qp) {
      weights = solve_alpha_qp(*gram, cfg.qp).first.alpha();
    } else {
      weights = solve_alpha_threshold(*gram).alpha();
    }

    MetaGradient mg = weighted_maml_gradient(params.shape, params.theta, batch, weights, cfg.inner_lr, cfg.order, cfg.inner_steps);
    check_finite(it, mg.loss, mg.grad, last_finite);
    last_finite = mg.loss;
    if (log_now) result.log.push_back({it, mg.loss, kernel_distance(*gram, weights), entropy_of(weights)});
    clip_gradient(mg.grad, cfg.grad_clip);
    adam.step(params.theta, mg.grad);
  }
  return result;
}

TrainResult train_direct_bound(const TaskCollection& tasks, const TrainConfig& cfg) {
  cfg.validate();
  TrainResult result{starting_params(tasks, cfg), {}, std::nullopt, {}};
  note_order_fallback(cfg, result);
  MlpParams& params = result.params;
  Adam adam(params.theta.size(), cfg.outer_lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  Rng batch_rng = Rng(cfg.seed).split(kBatchStream);
  const std::size_t num_sources = tasks.num_sources();
  std::vector<double> alpha(num_sources, 1.0 / static_cast<double>(num_sources));
  double last_finite = 0.0;

  for (long it = 0; it < cfg.meta_iters; ++it) {
    const auto idx = draw_batch(num_sources, cfg.batch_tasks, batch_rng);
    const auto batch = batch_pointers(tasks, idx);
    const TaskGram gram = hidden_layer_gram(params, batch, tasks.target());

    double mass = 0.0;
    for (auto i : idx) mass += alpha[i];
    std::vector<double> local(idx.size());
    for (std::size_t b = 0; b < idx.size(); ++b)
      local[b] = mass > 0.0 ? alpha[idx[b]] / mass : 1.0 / static_cast<double>(idx.size());
    // Renormalize so the batch weights pass the simplex check exactly.
    double local_sum = 0.0;
    for (double v : local) local_sum += v;
    for (double& v : local) v /= local_sum;

    BatchTerms terms;
    if (cfg.include_loss_term) {
      terms = batch_terms(params.shape, params.theta, batch, local, cfg.inner_lr, cfg.order, cfg.inner_steps, !cfg.freeze_alpha);
    } else {
      terms.grad = Eigen::VectorXd::Zero(params.theta.size());
      terms.task_losses.assign(idx.size(), 0.0);
    }
    check_finite(it, terms.loss, terms.grad, last_finite);
    last_finite = terms.loss;

    const double gamma = kernel_distance(gram, local);
    const bool log_now = it % cfg.log_every == 0 || it + 1 == cfg.meta_iters;
    if (log_now) result.log.push_back({it, terms.loss, gamma, entropy_of(local)});

    if (!cfg.freeze_alpha && cfg.alpha_lr > 0.0) {
      const Eigen::VectorXd v = mixture_vector(gram, local);
      const Eigen::VectorXd kv = gram.K * v;
      for (std::size_t b = 0; b < idx.size(); ++b) {
        double g = terms.task_losses[b];
        if (gamma > 0.0 && cfg.gamma_weight > 0.0)
          g += cfg.gamma_weight * kv(static_cast<Eigen::Index>(b)) / (static_cast<double>(gram.sizes[b]) * gamma);
        alpha[idx[b]] -= cfg.alpha_lr * g;
      }
      alpha = project_to_simplex(alpha);
    }

    if (cfg.include_loss_term) {
      clip_gradient(terms.grad, cfg.grad_clip);
      adam.step(params.theta, terms.grad);
    }
  }
  result.alpha = SimplexWeights(alpha, WeightMethod::manual);
  return result;
}

MlpParams adapt_mlp(const MlpParams& params, const Task& target, int steps, double lr) {
  if (steps < 0) throw InvalidArgument("adaptation steps must be non-negative");
  MlpParams out = params;
  Eigen::VectorXd g;
  for (int s = 0; s < steps; ++s) {
    mse_loss(out.shape, out.theta, target.features(), target.labels(), &g);
    out.theta -= lr * g;
  }
  return out;
}

std::vector<double> adaptation_curve(const MlpParams& params, const Task& train, const Task& eval, int steps, double lr) {
  if (steps < 0) throw InvalidArgument("adaptation steps must be non-negative");
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(steps) + 1);
  MlpParams p = params;
  curve.push_back(mse(p, eval));
  Eigen::VectorXd g;
  for (int s = 0; s < steps; ++s) {
    mse_loss(p.shape, p.theta, train.features(), train.labels(), &g);
    p.theta -= lr * g;
    curve.push_back(mse(p, eval));
  }
  return curve;
}

double mse(const MlpParams& params, const Task& eval) {
  return mse_loss(params.shape, params.theta, eval.features(), eval.labels());
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"input_dim", c.shape.input_dim},
       {"hidden1", c.shape.hidden1},
       {"hidden2", c.shape.hidden2},
       {"inner_lr", c.inner_lr},
       {"outer_lr", c.outer_lr},
       {"meta_iters", c.meta_iters},
       {"batch_tasks", c.batch_tasks},
       {"inner_steps", c.inner_steps},
       {"order", to_string(c.order)},
       {"outer_optimizer", {{"name", "adam"}, {"beta1", c.adam_beta1}, {"beta2", c.adam_beta2}, {"eps", c.adam_eps}}},
       {"grad_clip", c.grad_clip},
       {"seed", c.seed},
       {"qp", {{"tol", c.qp.tol}, {"kkt_tol", c.qp.kkt_tol}, {"max_iters", c.qp.max_iters}}},
       {"log_every", c.log_every},
       {"gamma_weight", c.gamma_weight},
       {"alpha_lr", c.alpha_lr},
       {"freeze_alpha", c.freeze_alpha},
       {"include_loss_term", c.include_loss_term}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  c.shape.input_dim = j.value("input_dim", c.shape.input_dim);
  c.shape.hidden1 = j.value("hidden1", c.shape.hidden1);
  c.shape.hidden2 = j.value("hidden2", c.shape.hidden2);
  c.inner_lr = j.value("inner_lr", c.inner_lr);
  c.outer_lr = j.value("outer_lr", c.outer_lr);
  c.meta_iters = j.value("meta_iters", c.meta_iters);
  c.batch_tasks = j.value("batch_tasks", c.batch_tasks);
  c.inner_steps = j.value("inner_steps", c.inner_steps);
  if (j.contains("order")) c.order = maml_order_from_string(j.at("order").get<std::string>());
  if (j.contains("outer_optimizer")) {
    const auto& o = j.at("outer_optimizer");
    if (o.value("name", std::string("adam")) != "adam") throw InvalidArgument("only the adam outer optimizer is supported");
    c.adam_beta1 = o.value("beta1", c.adam_beta1);
    c.adam_beta2 = o.value("beta2", c.adam_beta2);
    c.adam_eps = o.value("eps", c.adam_eps);
  }
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.seed = j.value("seed", c.seed);
  if (j.contains("qp")) {
    const auto& q = j.at("qp");
    c.qp.tol = q.value("tol", c.qp.tol);
    c.qp.kkt_tol = q.value("kkt_tol", c.qp.kkt_tol);
    c.qp.max_iters = q.value("max_iters", c.qp.max_iters);
  }
  c.log_every = j.value("log_every", c.log_every);
  c.gamma_weight = j.value("gamma_weight", c.gamma_weight);
  c.alpha_lr = j.value("alpha_lr", c.alpha_lr);
  c.freeze_alpha = j.value("freeze_alpha", c.freeze_alpha);
  c.include_loss_term = j.value("include_loss_term", c.include_loss_term);
  c.validate();
  return c;
}

void to_json(nlohmann::json& j, const TrainLogRow& r) {
  j = {{"iter", r.iter}, {"weighted_loss", r.weighted_loss}, {"gamma_k", r.gamma_k}, {"alpha_entropy", r.alpha_entropy}};
}

}  // namespace alphameta
