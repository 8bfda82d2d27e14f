#include "alphameta/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>

#include "alphameta/errors.hpp"
#include "alphameta/feature_maps.hpp"
#include "alphameta/kernel_distance.hpp"
#include "alphameta/linear_meta.hpp"
#include "alphameta/rng.hpp"

namespace alphameta {
namespace {

constexpr std::pair<ExperimentName, const char*> kNames[] = {
    {ExperimentName::linear1d, "linear1d"},
    {ExperimentName::sine, "sine"},
    {ExperimentName::csv_regression, "csv_regression"},
    {ExperimentName::sales_rff, "sales_rff"},
};

constexpr std::pair<ExperimentMethod, const char*> kMethods[] = {
    {ExperimentMethod::maml, "maml"},
    {ExperimentMethod::alpha_maml, "alpha_maml"},
    {ExperimentMethod::threshold_maml, "threshold_maml"},
    {ExperimentMethod::erm, "erm"},
    {ExperimentMethod::alpha_erm, "alpha_erm"},
    {ExperimentMethod::threshold_erm, "threshold_erm"},
    {ExperimentMethod::target_only, "target_only"},
    {ExperimentMethod::direct_bound, "direct_bound"},
};

WeightMethod weighting_of(ExperimentMethod m) {
  switch (m) {
    case ExperimentMethod::alpha_maml:
    case ExperimentMethod::alpha_erm:
      return WeightMethod::qp;
    case ExperimentMethod::threshold_maml:
    case ExperimentMethod::threshold_erm:
      return WeightMethod::threshold;
    default:
      return WeightMethod::uniform;
  }
}

bool is_erm(ExperimentMethod m) {
  return m == ExperimentMethod::erm || m == ExperimentMethod::alpha_erm || m == ExperimentMethod::threshold_erm;
}

std::string qp_algorithm_name(QpAlgorithm a) { return a == QpAlgorithm::frank_wolfe ? "frank_wolfe" : "projected_gradient"; }

QpAlgorithm qp_algorithm_from_string(const std::string& s) {
  if (s == "projected_gradient") return QpAlgorithm::projected_gradient;
  if (s == "frank_wolfe") return QpAlgorithm::frank_wolfe;
  throw InvalidArgument("unknown QP algorithm '" + s + "'");
}

nlohmann::json qp_to_json(const QpOptions& o) {
  return {{"tol", o.tol}, {"kkt_tol", o.kkt_tol}, {"max_iters", o.max_iters}, {"algorithm", qp_algorithm_name(o.algorithm)}};
}

QpOptions qp_from_json(const nlohmann::json& j, QpOptions o) {
  o.tol = j.value("tol", o.tol);
  o.kkt_tol = j.value("kkt_tol", o.kkt_tol);
  o.max_iters = j.value("max_iters", o.max_iters);
  if (j.contains("algorithm")) o.algorithm = qp_algorithm_from_string(j.at("algorithm").get<std::string>());
  return o;
}

// Rethrows library errors with the run position prepended, keeping the error category.
template <class F>
auto with_context(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const DivergenceError& e) {
    throw DivergenceError(e.iteration(), e.last_finite_loss(), where + ": " + e.what());
  } catch (const PreconditionError& e) {
    throw PreconditionError(where + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(where + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(where + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(where + ": " + e.what());
  } catch (const Error& e) {
    throw Error(where + ": " + e.what());
  }
}

struct TrialSeeds {
  std::uint64_t data;
  std::uint64_t model;
  Rng misc;
};

TrialSeeds trial_seeds(std::uint64_t seed, int trial) {
  const Rng trial_rng = Rng(seed).split(static_cast<std::uint64_t>(trial));
  Rng data = trial_rng.split(1);
  Rng model = trial_rng.split(2);
  return {data.next_u64(), model.next_u64(), trial_rng.split(3)};
}

Task rows_of(const Task& t, const std::vector<std::size_t>& idx, const std::string& id) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(idx.size()), t.dim());
  Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) = t.features().row(static_cast<Eigen::Index>(idx[r]));
    y(static_cast<Eigen::Index>(r)) = t.labels()(static_cast<Eigen::Index>(idx[r]));
  }
  return Task(id, std::move(x), std::move(y));
}

// Sources, the target's training pool (the first `shots` rows are used) and evaluation rows for one trial.
struct LinearTrial {
  std::vector<Task> sources;
  Task pool;
  Task eval;
  BasisFn basis;
};

void run_linear_trial(const ExperimentSpec& spec, int trial, const LinearTrial& data, ExperimentResult& out) {
  const LossEmbedding emb(LossKind::square, data.basis);
  for (int shots : spec.shots) {
    const Task train = with_context("trial " + std::to_string(trial), [&] { return data.pool.head(shots); });
    const TaskCollection tasks(data.sources, train);
    const TaskGram gram = build_task_gram(tasks, emb);
    for (ExperimentMethod method : spec.methods) {
      const std::string where = to_string(spec.name) + " trial " + std::to_string(trial) + " method " + to_string(method) +
                                " shots " + std::to_string(shots);
      with_context(where, [&] {
        ResultRow row{trial, method, shots, 0.0, 0.0, spec.adapt_steps, {}, {}};
        LinearMetaModel model = [&] {
          if (method == ExperimentMethod::target_only) return fit_task_only(train, data.basis, spec.ridge);
          const SimplexWeights alpha = solve_weights(gram, weighting_of(method), spec.qp);
          row.alpha = alpha.alpha();
          const LinearFitOptions opts{is_erm(method) ? LinearMode::erm : LinearMode::maml, spec.eta, spec.ridge};
          return fit_weighted_linear(tasks, data.basis, alpha, opts);
        }();
        row.rmse_init = rmse(model, data.eval, data.basis);
        row.curve.push_back(row.rmse_init * row.rmse_init);
        for (int s = 0; s < spec.adapt_steps; ++s) {
          model = adapt_linear(model, train, data.basis, 1, spec.adapt_lr);
          const double r = rmse(model, data.eval, data.basis);
          row.curve.push_back(r * r);
        }
        row.rmse_adapted = rmse(model, data.eval, data.basis);
        out.rows.push_back(std::move(row));
      });
    }
  }
}

int max_shots(const ExperimentSpec& spec) { return *std::max_element(spec.shots.begin(), spec.shots.end()); }

void run_linear1d(const ExperimentSpec& spec, ExperimentResult& out) {
  for (int trial = 0; trial < spec.trials; ++trial) {
    const TrialSeeds seeds = trial_seeds(spec.seed, trial);
    SyntheticSpec synth = spec.synthetic;
    synth.family = SyntheticFamily::linear1d;
    synth.seed = seeds.data;
    synth.target_size = max_shots(spec);
    const TaskCollection tasks = generate_linear1d(synth);
    if (!tasks.target().has_held_out()) throw InvalidArgument("linear1d experiment needs synthetic.eval_size > 0");
    LinearTrial data{tasks.sources(), tasks.target(), tasks.target().held_out(), BasisFn::identity_with_bias(1)};
    run_linear_trial(spec, trial, data, out);
  }
}

void run_csv(const ExperimentSpec& spec, ExperimentResult& out) {
  const TaskCollection all = with_context("csv_regression", [&] { return load_csv_tasks(*spec.csv); });
  const auto needed = static_cast<Eigen::Index>(max_shots(spec));
  if (all.target().size() <= needed)
    throw InvalidArgument("csv_regression: target group has " + std::to_string(all.target().size()) +
                          " rows; need more than the largest shots value (" + std::to_string(needed) + ")");
  for (int trial = 0; trial < spec.trials; ++trial) {
    TrialSeeds seeds = trial_seeds(spec.seed, trial);
    const auto perm = seeds.misc.permutation(static_cast<std::size_t>(all.target().size()));
    const std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + needed);
    const std::vector<std::size_t> eval_idx(perm.begin() + needed, perm.end());
    LinearTrial data{all.sources(), rows_of(all.target(), train_idx, all.target().id()),
                     rows_of(all.target(), eval_idx, all.target().id() + "_eval"),
                     BasisFn::identity_with_bias(static_cast<int>(all.dim()))};
    run_linear_trial(spec, trial, data, out);
  }
}

void run_sales(const ExperimentSpec& spec, ExperimentResult& out) {
  const SalesSpec& sales = *spec.sales;
  const std::vector<Task> products = with_context("sales_rff", [&] { return load_sales_tasks(sales); });
  const auto weeks = products.front().size();
  if (sales.test_weeks < 1 || max_shots(spec) + sales.test_weeks > weeks)
    throw InvalidArgument("sales_rff: shots plus test_weeks exceed the " + std::to_string(weeks) + " available weeks");
  if (products.size() < 2) throw InvalidArgument("sales_rff: need at least two products");
  Eigen::MatrixXd week_index(weeks, 1);
  for (Eigen::Index w = 0; w < weeks; ++w) week_index(w, 0) = static_cast<double>(w);
  const double bandwidth = sales.bandwidth ? *sales.bandwidth : median_heuristic_bandwidth(week_index);

  for (int trial = 0; trial < spec.trials; ++trial) {
    TrialSeeds seeds = trial_seeds(spec.seed, trial);
    const auto perm = seeds.misc.permutation(products.size());
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(sales.num_sources), products.size() - 1);
    std::vector<Task> sources;
    sources.reserve(count);
    for (std::size_t i = 1; i <= count; ++i) sources.push_back(products[perm[i]]);
    const Task& target = products[perm[0]];
    std::vector<std::size_t> eval_idx;
    for (Eigen::Index w = weeks - sales.test_weeks; w < weeks; ++w) eval_idx.push_back(static_cast<std::size_t>(w));
    LinearTrial data{std::move(sources), target, rows_of(target, eval_idx, target.id() + "_eval"),
                     BasisFn::random_fourier(1, sales.rff_dim, bandwidth, seeds.model)};
    run_linear_trial(spec, trial, data, out);
  }
}

void run_sine(const ExperimentSpec& spec, ExperimentResult& out) {
  for (int trial = 0; trial < spec.trials; ++trial) {
    const TrialSeeds seeds = trial_seeds(spec.seed, trial);
    SyntheticSpec synth = spec.synthetic;
    synth.family = SyntheticFamily::sine;
    synth.seed = seeds.data;
    synth.target_size = max_shots(spec);
    const TaskCollection all = generate_sine(synth);
    if (!all.target().has_held_out()) throw InvalidArgument("sine experiment needs synthetic.eval_size > 0");
    const Task& eval = all.target().held_out();
    for (int shots : spec.shots) {
      const Task train = all.target().head(shots);
      const TaskCollection tasks = all.with_target(train);
      for (ExperimentMethod method : spec.methods) {
        const std::string where = "sine trial " + std::to_string(trial) + " method " + to_string(method) + " shots " +
                                  std::to_string(shots);
        with_context(where, [&] {
          TrainConfig cfg = spec.train;
          cfg.seed = seeds.model;
          cfg.shape.input_dim = static_cast<int>(tasks.dim());
          if (is_erm(method)) cfg.inner_lr = 0.0;
          ResultRow row{trial, method, shots, 0.0, 0.0, spec.adapt_steps, {}, {}};
          std::optional<TrainResult> trained;
          if (method == ExperimentMethod::target_only) {
            trained = TrainResult{MlpParams::initialize(cfg.shape, cfg.seed), {}, std::nullopt, {}};
          } else if (method == ExperimentMethod::direct_bound) {
            cfg.batch_tasks = spec.direct_batch_tasks;
            trained = train_direct_bound(tasks, cfg);
            row.alpha = trained->alpha->alpha();
          } else {
            trained = train_alpha_maml(tasks, cfg, weighting_of(method));
          }
          for (const auto& w : trained->warnings) out.warnings.push_back(where + ": " + w);
          for (const auto& l : trained->log) out.log.push_back({trial, method, shots, l});
          row.curve = adaptation_curve(trained->params, train, eval, spec.adapt_steps, spec.adapt_lr);
          row.rmse_init = std::sqrt(row.curve.front());
          row.rmse_adapted = std::sqrt(row.curve.back());
          out.rows.push_back(std::move(row));
        });
      }
    }
  }
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string alpha_cell(const std::vector<double>& alpha) {
  std::string s = "\"[";
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (i) s += ",";
    s += num(alpha[i]);
  }
  return s + "]\"";
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  return f;
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) && !j.at(key).is_null() ? j.at(key).get<T>() : fallback;
}

}  // namespace

std::string to_string(ExperimentName n) {
  for (const auto& [k, v] : kNames)
    if (k == n) return v;
  return "?";
}

ExperimentName experiment_name_from_string(const std::string& s) {
  for (const auto& [k, v] : kNames)
    if (s == v) return k;
  throw InvalidArgument("unknown experiment '" + s + "' (expected linear1d, sine, csv_regression or sales_rff)");
}

std::string to_string(ExperimentMethod m) {
  for (const auto& [k, v] : kMethods)
    if (k == m) return v;
  return "?";
}

ExperimentMethod experiment_method_from_string(const std::string& s) {
  for (const auto& [k, v] : kMethods)
    if (s == v) return k;
  throw InvalidArgument("unknown method '" + s + "'");
}

void ExperimentSpec::validate() const {
  if (methods.empty()) throw InvalidArgument("experiment needs at least one method");
  if (shots.empty()) throw InvalidArgument("experiment needs at least one shots value");
  for (int s : shots)
    if (s < 1) throw InvalidArgument("shots must be positive");
  if (trials < 1) throw InvalidArgument("trials must be at least 1");
  if (adapt_steps < 0) throw InvalidArgument("adapt_steps must be non-negative");
  if (!(adapt_lr >= 0.0)) throw InvalidArgument("adapt_lr must be non-negative");
  if (!(eta >= 0.0)) throw InvalidArgument("eta must be non-negative");
  if (ridge && !(*ridge >= 0.0)) throw InvalidArgument("ridge must be non-negative");
  if (direct_batch_tasks < 1) throw InvalidArgument("direct_batch_tasks must be positive");
  switch (name) {
    case ExperimentName::linear1d:
    case ExperimentName::sine: {
      SyntheticSpec s = synthetic;
      s.target_size = std::max(1, s.target_size);
      s.validate();
      if (name == ExperimentName::sine) train.validate();
      break;
    }
    case ExperimentName::csv_regression:
      if (!csv) throw InvalidArgument("csv_regression needs a \"csv\" section with the data path");
      break;
    case ExperimentName::sales_rff:
      if (!sales) throw InvalidArgument("sales_rff needs a \"sales\" section with the data path");
      if (sales->num_sources < 1 || sales->rff_dim < 1) throw InvalidArgument("sales num_sources and rff_dim must be positive");
      break;
  }
  if (name != ExperimentName::sine)
    for (auto m : methods)
      if (m == ExperimentMethod::direct_bound) throw InvalidArgument("direct_bound is only available for the sine experiment");
}

ExperimentSpec ExperimentSpec::defaults(ExperimentName name) {
  using M = ExperimentMethod;
  ExperimentSpec s;
  s.name = name;
  switch (name) {
    case ExperimentName::linear1d:
      s.methods = {M::maml, M::alpha_maml, M::threshold_maml, M::erm, M::alpha_erm, M::threshold_erm, M::target_only};
      s.shots = {20};
      s.trials = 20;
      s.synthetic.family = SyntheticFamily::linear1d;
      break;
    case ExperimentName::sine:
      s.methods = {M::maml, M::alpha_maml, M::threshold_maml};
      s.shots = {5, 10, 20};
      s.trials = 4;
      s.synthetic.family = SyntheticFamily::sine;
      s.synthetic.num_sources = 1000;
      break;
    case ExperimentName::csv_regression:
      s.methods = {M::maml, M::alpha_maml, M::erm, M::alpha_erm, M::target_only};
      s.shots = {20};
      s.trials = 1;
      // Raw covariates can be badly scaled for plain gradient steps.
      s.adapt_steps = 0;
      break;
    case ExperimentName::sales_rff:
      s.methods = {M::maml, M::alpha_maml, M::threshold_maml, M::erm, M::alpha_erm, M::threshold_erm, M::target_only};
      s.shots = {5, 10};
      s.trials = 20;
      break;
  }
  return s;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult out;
  out.config = spec;
  switch (spec.name) {
    case ExperimentName::linear1d:
      run_linear1d(spec, out);
      break;
    case ExperimentName::sine:
      run_sine(spec, out);
      break;
    case ExperimentName::csv_regression:
      run_csv(spec, out);
      break;
    case ExperimentName::sales_rff:
      run_sales(spec, out);
      break;
  }
  out.aggregates = aggregate_rows(out.rows);
  return out;
}

std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow>& rows) {
  std::vector<AggregateRow> out;
  std::vector<std::vector<const ResultRow*>> members;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const AggregateRow& a) { return a.method == r.method && a.shots == r.shots; });
    if (it == out.end()) {
      out.push_back({r.method, r.shots, 0, 0, 0, 0, 0});
      members.emplace_back();
      it = out.end() - 1;
    }
    members[static_cast<std::size_t>(it - out.begin())].push_back(&r);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    const auto& m = members[g];
    const double n = static_cast<double>(m.size());
    double si = 0.0, sa = 0.0;
    for (const auto* r : m) {
      si += r->rmse_init;
      sa += r->rmse_adapted;
    }
    const double mi = si / n, ma = sa / n;
    double vi = 0.0, va = 0.0;
    for (const auto* r : m) {
      vi += (r->rmse_init - mi) * (r->rmse_init - mi);
      va += (r->rmse_adapted - ma) * (r->rmse_adapted - ma);
    }
    out[g].count = static_cast<int>(m.size());
    out[g].rmse_init_mean = mi;
    out[g].rmse_adapted_mean = ma;
    out[g].rmse_init_std = m.size() > 1 ? std::sqrt(vi / (n - 1.0)) : 0.0;
    out[g].rmse_adapted_std = m.size() > 1 ? std::sqrt(va / (n - 1.0)) : 0.0;
  }
  return out;
}

void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
  const std::string header = "# config=" + result.config.dump() + "\n";

  nlohmann::json doc = {{"config", result.config},
                        {"rows", result.rows},
                        {"aggregates", result.aggregates},
                        {"warnings", result.warnings}};
  open_out(dir / "results.json") << doc.dump(2) << "\n";

  auto csv = open_out(dir / "results.csv");
  csv << header << "trial,method,shots,rmse_init,rmse_adapted,steps,alpha_json\n";
  for (const auto& r : result.rows)
    csv << r.trial << ',' << to_string(r.method) << ',' << r.shots << ',' << num(r.rmse_init) << ',' << num(r.rmse_adapted)
        << ',' << r.steps << ',' << alpha_cell(r.alpha) << '\n';

  auto table = open_out(dir / "table.csv");
  table << header << "method,shots,trials,rmse_init_mean,rmse_init_std,rmse_adapted_mean,rmse_adapted_std\n";
  for (const auto& a : result.aggregates)
    table << to_string(a.method) << ',' << a.shots << ',' << a.count << ',' << num(a.rmse_init_mean) << ','
          << num(a.rmse_init_std) << ',' << num(a.rmse_adapted_mean) << ',' << num(a.rmse_adapted_std) << '\n';

  auto curves = open_out(dir / "curves.csv");
  curves << header << "trial,method,shots,step,mse\n";
  for (const auto& r : result.rows)
    for (std::size_t s = 0; s < r.curve.size(); ++s)
      curves << r.trial << ',' << to_string(r.method) << ',' << r.shots << ',' << s << ',' << num(r.curve[s]) << '\n';

  auto log = open_out(dir / "log.csv");
  log << header << "trial,method,shots,iter,weighted_loss,gamma_k,alpha_entropy\n";
  for (const auto& l : result.log)
    log << l.trial << ',' << to_string(l.method) << ',' << l.shots << ',' << l.row.iter << ',' << num(l.row.weighted_loss)
        << ',' << num(l.row.gamma_k) << ',' << num(l.row.alpha_entropy) << '\n';
}

void to_json(nlohmann::json& j, const ExperimentSpec& s) {
  std::vector<std::string> methods;
  for (auto m : s.methods) methods.push_back(to_string(m));
  j = {{"name", to_string(s.name)},
       {"methods", methods},
       {"shots", s.shots},
       {"trials", s.trials},
       {"seed", s.seed},
       {"deterministic", true},
       {"adapt_steps", s.adapt_steps},
       {"adapt_lr", s.adapt_lr},
       {"eta", s.eta},
       {"ridge", s.ridge ? nlohmann::json(*s.ridge) : nlohmann::json(nullptr)},
       {"qp", qp_to_json(s.qp)}};
  if (s.name == ExperimentName::linear1d || s.name == ExperimentName::sine) j["synthetic"] = s.synthetic;
  if (s.name == ExperimentName::sine) {
    j["train"] = s.train;
    j["direct_batch_tasks"] = s.direct_batch_tasks;
  }
  if (s.csv) j["csv"] = *s.csv;
  if (s.sales) j["sales"] = *s.sales;
}

ExperimentSpec experiment_spec_from_json(const nlohmann::json& in) {
  const nlohmann::json& j = (in.contains("config") && !in.contains("name")) ? in.at("config") : in;
  if (!j.is_object()) throw InvalidArgument("experiment config must be a JSON object");
  ExperimentSpec s = ExperimentSpec::defaults(experiment_name_from_string(j.value("name", std::string("linear1d"))));
  if (j.contains("methods")) {
    s.methods.clear();
    for (const auto& m : j.at("methods")) s.methods.push_back(experiment_method_from_string(m.get<std::string>()));
  }
  if (j.contains("shots")) {
    s.shots = j.at("shots").is_array() ? j.at("shots").get<std::vector<int>>() : std::vector<int>{j.at("shots").get<int>()};
  }
  s.trials = j.value("trials", s.trials);
  s.seed = j.value("seed", s.seed);
  if (j.contains("output_dir")) s.output_dir = j.at("output_dir").get<std::string>();
  s.adapt_steps = j.value("adapt_steps", s.adapt_steps);
  s.adapt_lr = j.value("adapt_lr", s.adapt_lr);
  s.eta = j.value("eta", s.eta);
  if (j.contains("ridge")) s.ridge = j.at("ridge").is_null() ? std::nullopt : std::optional<double>(j.at("ridge").get<double>());
  if (j.contains("qp")) s.qp = qp_from_json(j.at("qp"), s.qp);
  if (j.contains("synthetic")) {
    nlohmann::json merged = s.synthetic;
    merged.merge_patch(j.at("synthetic"));
    s.synthetic = synthetic_spec_from_json(merged);
  }
  if (j.contains("train")) s.train = train_config_from_json(j.at("train"), s.train);
  s.direct_batch_tasks = j.value("direct_batch_tasks", s.direct_batch_tasks);
  if (j.contains("csv")) s.csv = csv_task_spec_from_json(j.at("csv"));
  if (j.contains("sales")) s.sales = sales_spec_from_json(j.at("sales"));
  return s;
}

void to_json(nlohmann::json& j, const CsvTaskSpec& s) {
  j = {{"path", s.path.string()},
       {"group_column", s.group_column},
       {"source_groups", s.source_groups},
       {"target_group", s.target_group},
       {"feature_columns", s.feature_columns},
       {"label_column", s.label_column}};
}

CsvTaskSpec csv_task_spec_from_json(const nlohmann::json& j) {
  CsvTaskSpec s;
  s.path = j.at("path").get<std::string>();
  s.group_column = j.at("group_column").get<std::string>();
  for (const auto& g : j.at("source_groups")) s.source_groups.push_back(group_spec_from_json(g));
  s.target_group = group_spec_from_json(j.at("target_group"));
  s.feature_columns = get_or(j, "feature_columns", std::vector<std::string>{});
  s.label_column = j.at("label_column").get<std::string>();
  return s;
}

void to_json(nlohmann::json& j, const SalesSpec& s) {
  j = {{"path", s.path.string()},
       {"id_column", s.id_column},
       {"week_prefix", s.week_prefix},
       {"num_sources", s.num_sources},
       {"rff_dim", s.rff_dim},
       {"bandwidth", s.bandwidth ? nlohmann::json(*s.bandwidth) : nlohmann::json(nullptr)},
       {"test_weeks", s.test_weeks}};
}

SalesSpec sales_spec_from_json(const nlohmann::json& j) {
  SalesSpec s;
  s.path = j.at("path").get<std::string>();
  s.id_column = j.value("id_column", s.id_column);
  s.week_prefix = j.value("week_prefix", s.week_prefix);
  s.num_sources = j.value("num_sources", s.num_sources);
  s.rff_dim = j.value("rff_dim", s.rff_dim);
  if (j.contains("bandwidth") && !j.at("bandwidth").is_null()) s.bandwidth = j.at("bandwidth").get<double>();
  s.test_weeks = j.value("test_weeks", s.test_weeks);
  return s;
}

void to_json(nlohmann::json& j, const ResultRow& r) {
  j = {{"trial", r.trial},
       {"method", to_string(r.method)},
       {"shots", r.shots},
       {"rmse_init", r.rmse_init},
       {"rmse_adapted", r.rmse_adapted},
       {"steps", r.steps},
       {"alpha", r.alpha}};
}

void to_json(nlohmann::json& j, const AggregateRow& a) {
  j = {{"method", to_string(a.method)},
       {"shots", a.shots},
       {"trials", a.count},
       {"rmse_init_mean", a.rmse_init_mean},
       {"rmse_init_std", a.rmse_init_std},
       {"rmse_adapted_mean", a.rmse_adapted_mean},
       {"rmse_adapted_std", a.rmse_adapted_std}};
}

std::vector<Task> load_sales_tasks(const SalesSpec& spec) {
  const CsvTable table = read_csv(spec.path);
  const std::size_t id_col = table.column(spec.id_column);
  const std::regex week_re(std::regex_replace(spec.week_prefix, std::regex(R"([.^$|()\[\]{}*+?\\])"), R"(\$&)") + "([0-9]+)");
  std::map<long, std::size_t> week_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    std::smatch m;
    if (std::regex_match(table.header[c], m, week_re)) week_cols.emplace(std::stol(m[1].str()), c);
  }
  if (week_cols.empty()) throw ParseError(spec.path.string() + ": no columns named " + spec.week_prefix + "<week>");
  if (table.rows.empty()) throw ParseError(spec.path.string() + ": no data rows");
  const auto weeks = static_cast<Eigen::Index>(week_cols.size());
  Eigen::MatrixXd x(weeks, 1);
  for (Eigen::Index w = 0; w < weeks; ++w) x(w, 0) = static_cast<double>(w);
  std::vector<Task> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    Eigen::VectorXd y(weeks);
    Eigen::Index w = 0;
    for (const auto& [week, col] : week_cols) y(w++) = table.number(r, col);
    out.emplace_back(table.rows[r][id_col], x, std::move(y));
  }
  return out;
}

}  // namespace alphameta
