#include "alphameta/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "alphameta/bounds.hpp"
#include "alphameta/errors.hpp"
#include "alphameta/experiment.hpp"
#include "alphameta/feature_maps.hpp"
#include "alphameta/gradient_meta.hpp"
#include "alphameta/kernel_distance.hpp"
#include "alphameta/linear_meta.hpp"
#include "alphameta/task_data.hpp"
#include "alphameta/weight_solver.hpp"

namespace alphameta {
namespace {

using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open config file '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << text;
}

std::string num(double v) { return json(v).dump(); }

// Flags shared by every subcommand.
struct Common {
  std::uint64_t seed = 0;
  std::string output;
  std::string config;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* app) {
    seed_opt = app->add_option("--seed", seed, "Random seed (overrides the config)");
    app->add_option("--output", output, "Output path");
    app->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  }

  // Config file contents with the seed flag applied.
  json base() const {
    json cfg = config.empty() ? json::object() : read_json_file(config);
    if (!cfg.is_object()) throw UsageError("config must be a JSON object");
    if (seed_opt->count()) cfg["seed"] = seed;
    if (!cfg.contains("seed")) cfg["seed"] = 0;
    return cfg;
  }
};

template <class T>
void override_from(json& cfg, const char* key, const CLI::Option* opt, const T& value) {
  if (opt->count()) cfg[key] = value;
}

// Config resolution failures are usage errors; anything later is a runtime error.
template <class F>
auto resolve(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

// Task inputs shared by the analysis subcommands.
struct TaskInput {
  std::string input;
  std::string loss = "square";
  std::string basis = "identity";
  int rff_dim = 100;
  double bandwidth = 0.0;
  bool normalize = false;
  CLI::Option *input_opt, *loss_opt, *basis_opt, *rff_opt, *bw_opt, *norm_opt;

  void attach(CLI::App* app) {
    input_opt = app->add_option("--input", input, "TaskCollection JSON, or CSV with a \"csv\" config section")
                    ->check(CLI::ExistingFile);
    loss_opt = app->add_option("--loss", loss, "Loss embedding: square or hinge");
    basis_opt = app->add_option("--basis", basis, "Basis: identity or rff");
    rff_opt = app->add_option("--rff-dim", rff_dim, "Random Fourier feature count");
    bw_opt = app->add_option("--bandwidth", bandwidth, "RFF bandwidth (median heuristic when unset)");
    norm_opt = app->add_flag("--normalize", normalize, "Rescale basis outputs into the unit ball");
  }

  void apply(json& cfg) const {
    override_from(cfg, "input", input_opt, input);
    override_from(cfg, "loss", loss_opt, loss);
    json b = cfg.value("basis", json::object());
    if (b.is_string()) b = json{{"kind", b}};
    if (basis_opt->count()) b["kind"] = basis;
    if (rff_opt->count()) b["rff_dim"] = rff_dim;
    if (bw_opt->count()) b["bandwidth"] = bandwidth;
    if (norm_opt->count()) b["normalize"] = normalize;
    cfg["basis"] = b;
    if (!cfg.contains("loss")) cfg["loss"] = "square";
    loss_kind_from_string(cfg.at("loss").get<std::string>());
    const std::string kind = b.value("kind", std::string("identity"));
    if (kind != "identity" && kind != "rff") throw UsageError("unknown basis '" + kind + "' (expected identity or rff)");
    if (!cfg.contains("input") && !cfg.contains("csv") && !cfg.contains("synthetic"))
      throw UsageError("no tasks given: pass --input or set input, csv or synthetic in --config");
  }
};

TaskCollection load_tasks(const json& cfg) {
  if (cfg.contains("input")) {
    const std::filesystem::path path = cfg.at("input").get<std::string>();
    if (path.extension() == ".csv") {
      if (!cfg.contains("csv")) throw UsageError("CSV input needs a \"csv\" section (groups, label column) in --config");
      json c = cfg.at("csv");
      c["path"] = path.string();
      return load_csv_tasks(csv_task_spec_from_json(c));
    }
    std::ifstream f(path);
    if (!f) throw Error("cannot open input '" + path.string() + "'");
    json j;
    try {
      j = json::parse(f);
    } catch (const json::exception& e) {
      throw ParseError("input '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return collection_from_json(j);
  }
  if (cfg.contains("csv")) return load_csv_tasks(csv_task_spec_from_json(cfg.at("csv")));
  json s = cfg.at("synthetic");
  if (!s.contains("seed")) s["seed"] = cfg.at("seed");
  return generate(synthetic_spec_from_json(s));
}

BasisFn make_basis(const json& cfg, const TaskCollection& tasks) {
  const json& b = cfg.at("basis");
  const auto d = static_cast<int>(tasks.dim());
  const bool hinge = loss_kind_from_string(cfg.at("loss").get<std::string>()) == LossKind::hinge;
  BasisFn basis = BasisFn::identity_with_bias(d);
  if (b.value("kind", std::string("identity")) == "rff") {
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    const double bw = b.contains("bandwidth") ? b.at("bandwidth").get<double>()
                                              : median_heuristic_bandwidth(pooled_inputs(tasks), 2000, seed);
    basis = BasisFn::random_fourier(d, b.value("rff_dim", 100), bw, seed);
  }
  return basis.with_normalization(b.value("normalize", hinge));
}

TaskGram make_gram(const json& cfg, const TaskCollection& tasks, const BasisFn& basis) {
  return build_task_gram(tasks, LossEmbedding(loss_kind_from_string(cfg.at("loss").get<std::string>()), basis));
}

QpOptions qp_options(const json& cfg) {
  QpOptions o;
  if (!cfg.contains("qp")) return o;
  const json& q = cfg.at("qp");
  o.tol = q.value("tol", o.tol);
  o.kkt_tol = q.value("kkt_tol", o.kkt_tol);
  o.max_iters = q.value("max_iters", o.max_iters);
  const std::string alg = q.value("algorithm", std::string("projected_gradient"));
  if (alg == "frank_wolfe" || alg == "fw")
    o.algorithm = QpAlgorithm::frank_wolfe;
  else if (alg != "projected_gradient" && alg != "pg")
    throw UsageError("unknown QP algorithm '" + alg + "'");
  return o;
}

std::pair<SimplexWeights, std::optional<QpReport>> weights_for(const json& cfg, const TaskGram& gram) {
  const WeightMethod m = weight_method_from_string(cfg.value("method", std::string("qp")));
  if (m == WeightMethod::qp) {
    auto [w, report] = solve_alpha_qp(gram, qp_options(cfg));
    return {w, report};
  }
  if (m == WeightMethod::manual) {
    if (!cfg.contains("alpha")) throw UsageError("method manual needs an \"alpha\" array in --config");
    return {SimplexWeights(cfg.at("alpha").get<std::vector<double>>(), WeightMethod::manual), std::nullopt};
  }
  return {solve_weights(gram, m), std::nullopt};
}

std::vector<std::string> source_ids(const TaskCollection& tasks) {
  std::vector<std::string> ids;
  for (const auto& t : tasks.sources()) ids.push_back(t.id());
  return ids;
}

// ---- subcommands ----

struct Subcommand {
  CLI::App* app = nullptr;
  Common common;
  std::function<void(std::ostream&, std::ostream&)> run;
};

void add_generate(CLI::App& root, Subcommand& sc) {
  sc.app = root.add_subcommand("generate", "Emit a synthetic TaskCollection as JSON");
  sc.common.attach(sc.app);
  auto family = std::make_shared<std::string>("linear1d");
  auto num_sources = std::make_shared<int>(9);
  auto target_size = std::make_shared<int>(20);
  auto eval_size = std::make_shared<int>(100);
  auto noise = std::make_shared<double>(1.0);
  auto* o_family = sc.app->add_option("--family", *family, "linear1d or sine");
  auto* o_j = sc.app->add_option("--num-sources", *num_sources, "Number of source tasks");
  auto* o_t = sc.app->add_option("--target-size", *target_size, "Target training samples");
  auto* o_e = sc.app->add_option("--eval-size", *eval_size, "Held-out target samples");
  auto* o_n = sc.app->add_option("--noise-std", *noise, "Label noise (linear1d)");
  sc.run = [&sc, family, num_sources, target_size, eval_size, noise, o_family, o_j, o_t, o_e, o_n](std::ostream& out,
                                                                                                   std::ostream&) {
    const SyntheticSpec spec = resolve([&] {
      json cfg = sc.common.base();
      json s = cfg.contains("synthetic") ? cfg.at("synthetic") : cfg;
      s.erase("output");
      override_from(s, "family", o_family, *family);
      override_from(s, "num_sources", o_j, *num_sources);
      override_from(s, "target_size", o_t, *target_size);
      override_from(s, "eval_size", o_e, *eval_size);
      override_from(s, "noise_std", o_n, *noise);
      s["seed"] = cfg.at("seed");
      if (!s.contains("family")) s["family"] = "linear1d";
      return synthetic_spec_from_json(s);
    });
    const json doc = generate(spec);
    if (sc.common.output.empty())
      out << doc.dump() << "\n";
    else
      write_text(sc.common.output, doc.dump(2) + "\n");
  };
}

void add_distance(CLI::App& root, Subcommand& sc) {
  sc.app = root.add_subcommand("distance", "Kernel distance of each source and of the weighted mixture to the target");
  sc.common.attach(sc.app);
  auto in = std::make_shared<TaskInput>();
  in->attach(sc.app);
  auto method = std::make_shared<std::string>("qp");
  auto* o_m = sc.app->add_option("--method", *method, "Mixture weights: qp, threshold or uniform");
  sc.run = [&sc, in, method, o_m](std::ostream& out, std::ostream&) {
    const json cfg = resolve([&] {
      json c = sc.common.base();
      in->apply(c);
      override_from(c, "method", o_m, *method);
      weight_method_from_string(c.value("method", std::string("qp")));
      return c;
    });
    const TaskCollection tasks = load_tasks(cfg);
    const BasisFn basis = make_basis(cfg, tasks);
    const TaskGram gram = make_gram(cfg, tasks, basis);
    const auto per_source = per_source_distances(gram);
    const auto [alpha, report] = weights_for(cfg, gram);
    const double mixture = kernel_distance(gram, alpha);
    json sources = json::array();
    for (std::size_t j = 0; j < per_source.size(); ++j) {
      out << tasks.sources()[j].id() << "\t" << num(per_source[j]) << "\n";
      sources.push_back({{"id", tasks.sources()[j].id()}, {"gamma", per_source[j]}});
    }
    out << "mixture(" << to_string(alpha.method()) << ")\t" << num(mixture) << "\n";
    if (!sc.common.output.empty()) {
      json doc = {{"config", cfg}, {"sources", sources}, {"mixture", {{"alpha", alpha}, {"gamma", mixture}}}, {"gram", gram}};
      write_text(sc.common.output, doc.dump(2) + "\n");
    }
  };
}

void add_weights(CLI::App& root, Subcommand& sc) {
  sc.app = root.add_subcommand("weights", "Solve for source weights on the simplex");
  sc.common.attach(sc.app);
  auto in = std::make_shared<TaskInput>();
  in->attach(sc.app);
  auto method = std::make_shared<std::string>("qp");
  auto algorithm = std::make_shared<std::string>("projected_gradient");
  auto* o_m = sc.app->add_option("--method", *method, "qp, threshold or uniform");
  auto* o_a = sc.app->add_option("--algorithm", *algorithm, "QP algorithm: projected_gradient or frank_wolfe");
  sc.run = [&sc, in, method, algorithm, o_m, o_a](std::ostream& out, std::ostream&) {
    const json cfg = resolve([&] {
      json c = sc.common.base();
      in->apply(c);
      override_from(c, "method", o_m, *method);
      if (o_a->count()) c["qp"]["algorithm"] = *algorithm;
      weight_method_from_string(c.value("method", std::string("qp")));
      qp_options(c);
      return c;
    });
    const TaskCollection tasks = load_tasks(cfg);
    const BasisFn basis = make_basis(cfg, tasks);
    const TaskGram gram = make_gram(cfg, tasks, basis);
    const auto [alpha, report] = weights_for(cfg, gram);
    out << json(alpha.alpha()).dump() << "\n";
    if (!sc.common.output.empty()) {
      json doc = {{"config", cfg},
                  {"source_ids", source_ids(tasks)},
                  {"weights", alpha},
                  {"gamma", kernel_distance(gram, alpha)}};
      if (report) doc["report"] = *report;
      write_text(sc.common.output, doc.dump(2) + "\n");
    }
  };
}

void add_fit_linear(CLI::App& root, Subcommand& sc) {
  sc.app = root.add_subcommand("fit-linear", "Closed-form weighted ERM / MAML linear initialization");
  sc.common.attach(sc.app);
  auto in = std::make_shared<TaskInput>();
  in->attach(sc.app);
  auto method = std::make_shared<std::string>("alpha_maml");
  auto eta = std::make_shared<double>(1e-4);
  auto ridge = std::make_shared<double>(0.0);
  auto steps = std::make_shared<int>(0);
  auto lr = std::make_shared<double>(0.01);
  auto* o_m = sc.app->add_option("--method", *method, "erm, alpha_erm, threshold_erm, maml, alpha_maml, threshold_maml, target_only");
  auto* o_eta = sc.app->add_option("--eta", *eta, "MAML inner step size");
  auto* o_r = sc.app->add_option("--ridge", *ridge, "Ridge term (default scales with the trace)");
  auto* o_s = sc.app->add_option("--adapt-steps", *steps, "Gradient steps on the target after fitting");
  auto* o_lr = sc.app->add_option("--adapt-lr", *lr, "Adaptation step size");
  sc.run = [&sc, in, method, eta, ridge, steps, lr, o_m, o_eta, o_r, o_s, o_lr](std::ostream& out, std::ostream&) {
    const json cfg = resolve([&] {
      json c = sc.common.base();
      in->apply(c);
      override_from(c, "method", o_m, *method);
      override_from(c, "eta", o_eta, *eta);
      override_from(c, "ridge", o_r, *ridge);
      override_from(c, "adapt_steps", o_s, *steps);
      override_from(c, "adapt_lr", o_lr, *lr);
      if (!c.contains("method")) c["method"] = "alpha_maml";
      const auto m = experiment_method_from_string(c.at("method").get<std::string>());
      if (m == ExperimentMethod::direct_bound) throw UsageError("direct_bound is not a linear method");
      if (!c.contains("eta")) c["eta"] = 1e-4;
      return c;
    });
    const auto m = experiment_method_from_string(cfg.at("method").get<std::string>());
    const TaskCollection tasks = load_tasks(cfg);
    const BasisFn basis = make_basis(cfg, tasks);
    std::optional<double> ridge_v;
    if (cfg.contains("ridge") && !cfg.at("ridge").is_null()) ridge_v = cfg.at("ridge").get<double>();
    LinearMetaModel model = [&] {
      if (m == ExperimentMethod::target_only) return fit_task_only(tasks.target(), basis, ridge_v);
      const TaskGram gram = make_gram(cfg, tasks, basis);
      json wcfg = cfg;
      wcfg["method"] = (m == ExperimentMethod::alpha_erm || m == ExperimentMethod::alpha_maml)           ? "qp"
                       : (m == ExperimentMethod::threshold_erm || m == ExperimentMethod::threshold_maml) ? "threshold"
                                                                                                         : "uniform";
      const auto alpha = weights_for(wcfg, gram).first;
      const bool erm = m == ExperimentMethod::erm || m == ExperimentMethod::alpha_erm || m == ExperimentMethod::threshold_erm;
      return fit_weighted_linear(tasks, basis, alpha,
                                 {erm ? LinearMode::erm : LinearMode::maml, cfg.at("eta").get<double>(), ridge_v});
    }();
    const int adapt_steps = cfg.value("adapt_steps", 0);
    json doc = {{"config", cfg}, {"model", model}};
    doc["rmse_target"] = rmse(model, tasks.target(), basis);
    if (tasks.target().has_held_out()) doc["rmse_held_out"] = rmse(model, tasks.target().held_out(), basis);
    if (adapt_steps > 0) {
      const auto adapted = adapt_linear(model, tasks.target(), basis, adapt_steps, cfg.value("adapt_lr", 0.01));
      doc["adapted_w"] = vector_to_json(adapted.w);
      if (tasks.target().has_held_out()) doc["rmse_held_out_adapted"] = rmse(adapted, tasks.target().held_out(), basis);
    }
    out << "w\t" << vector_to_json(model.w).dump() << "\n";
    for (const char* k : {"rmse_target", "rmse_held_out", "rmse_held_out_adapted"})
      if (doc.contains(k)) out << k << "\t" << doc.at(k).dump() << "\n";
    if (!sc.common.output.empty()) write_text(sc.common.output, doc.dump(2) + "\n");
  };
}

void add_train_maml(CLI::App& root, Subcommand& sc) {
  sc.app = root.add_subcommand("train-maml", "Meta-train the sine-regression network with weighted MAML");
  sc.common.attach(sc.app);
  auto input = std::make_shared<std::string>();
  auto weights = std::make_shared<std::string>("qp");
  auto iters = std::make_shared<int>(2000);
  auto batch = std::make_shared<int>(100);
  auto inner_lr = std::make_shared<double>(0.01);
  auto outer_lr = std::make_shared<double>(0.001);
  auto order = std::make_shared<std::string>("second");
  auto log_path = std::make_shared<std::string>();
  auto steps = std::make_shared<int>(10);
  auto* o_in = sc.app->add_option("--input", *input, "TaskCollection JSON")->check(CLI::ExistingFile);
  auto* o_w = sc.app->add_option("--weights", *weights, "qp, threshold, uniform or direct (bound optimization)");
  auto* o_it = sc.app->add_option("--meta-iters", *iters, "Meta-iterations");
  auto* o_b = sc.app->add_option("--batch-tasks", *batch, "Tasks per meta-batch");
  auto* o_il = sc.app->add_option("--inner-lr", *inner_lr, "Inner step size");
  auto* o_ol = sc.app->add_option("--outer-lr", *outer_lr, "Adam step size");
  auto* o_o = sc.app->add_option("--order", *order, "first or second");
  sc.app->add_option("--log", *log_path, "Training log CSV path");
  auto* o_s = sc.app->add_option("--adapt-steps", *steps, "Target adaptation steps for the reported MSE");
  sc.run = [=, &sc](std::ostream& out, std::ostream& err) {
    struct Resolved {
      json cfg;
      TrainConfig train;
      bool direct;
    };
    const Resolved r = resolve([&] {
      json c = sc.common.base();
      override_from(c, "input", o_in, *input);
      override_from(c, "weights", o_w, *weights);
      override_from(c, "adapt_steps", o_s, *steps);
      json t = c.value("train", json::object());
      override_from(t, "meta_iters", o_it, *iters);
      override_from(t, "batch_tasks", o_b, *batch);
      override_from(t, "inner_lr", o_il, *inner_lr);
      override_from(t, "outer_lr", o_ol, *outer_lr);
      override_from(t, "order", o_o, *order);
      const std::string w = c.value("weights", std::string("qp"));
      const bool direct = w == "direct";
      if (!direct) {
        const auto m = weight_method_from_string(w);
        if (m == WeightMethod::manual) throw UsageError("train-maml weights must be qp, threshold, uniform or direct");
      }
      t["seed"] = c.at("seed");
      c["train"] = t;
      if (!c.contains("input") && !c.contains("synthetic")) throw UsageError("no tasks given: pass --input");
      c["loss"] = "square";
      c["basis"] = json::object();
      TrainConfig base = direct ? TrainConfig::direct_bound_defaults() : TrainConfig{};
      return Resolved{c, train_config_from_json(t, base), direct};
    });
    const TaskCollection tasks = load_tasks(r.cfg);
    TrainConfig tc = r.train;
    tc.shape.input_dim = static_cast<int>(tasks.dim());
    const TrainResult result =
        r.direct ? train_direct_bound(tasks, tc)
                 : train_alpha_maml(tasks, tc, weight_method_from_string(r.cfg.value("weights", std::string("qp"))));
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";
    json doc = {{"config", r.cfg}, {"resolved_train", tc}, {"params", result.params}, {"log", result.log}};
    if (result.alpha) doc["alpha"] = *result.alpha;
    const int adapt_steps = r.cfg.value("adapt_steps", 10);
    if (tasks.target().has_held_out()) {
      const auto curve = adaptation_curve(result.params, tasks.target(), tasks.target().held_out(), adapt_steps, tc.inner_lr);
      doc["held_out_mse"] = curve;
      out << "held_out_mse_init\t" << num(curve.front()) << "\n";
      out << "held_out_mse_adapted\t" << num(curve.back()) << "\n";
    }
    if (!result.log.empty()) out << "final_weighted_loss\t" << num(result.log.back().weighted_loss) << "\n";
    if (!log_path->empty()) {
      std::ostringstream csv;
      csv << "iter,weighted_loss,gamma_k,alpha_entropy\n";
      for (const auto& l : result.log)
        csv << l.iter << ',' << num(l.weighted_loss) << ',' << num(l.gamma_k) << ',' << num(l.alpha_entropy) << '\n';
      write_text(*log_path, csv.str());
    }
    if (!sc.common.output.empty()) write_text(sc.common.output, doc.dump(2) + "\n");
  };
}

void add_bound(CLI::App& root, Subcommand& sc) {
  sc.app = root.add_subcommand("bound", "Evaluate the kernel-distance generalization bounds");
  sc.common.attach(sc.app);
  auto in = std::make_shared<TaskInput>();
  in->attach(sc.app);
  auto method = std::make_shared<std::string>("qp");
  auto eps = std::make_shared<double>(0.05);
  auto lo = std::make_shared<double>(0.0);
  auto hi = std::make_shared<double>(1.0);
  auto draws = std::make_shared<int>(1000);
  auto norm = std::make_shared<double>(1.0);
  auto* o_m = sc.app->add_option("--method", *method, "Weights: qp, threshold or uniform");
  auto* o_e = sc.app->add_option("--epsilon", *eps, "Failure probability in (0,1)");
  auto* o_lo = sc.app->add_option("--loss-lo", *lo, "Lower end of the loss range");
  auto* o_hi = sc.app->add_option("--loss-hi", *hi, "Upper end of the loss range");
  auto* o_d = sc.app->add_option("--mc-draws", *draws, "Monte-Carlo sign draws");
  auto* o_b = sc.app->add_option("--norm-bound", *norm, "Weight norm bound of the linear class");
  sc.run = [=, &sc](std::ostream& out, std::ostream&) {
    const std::pair<json, BoundConfig> r = resolve([&] {
      json c = sc.common.base();
      in->apply(c);
      override_from(c, "method", o_m, *method);
      override_from(c, "norm_bound", o_b, *norm);
      json b = c.value("bound", json::object());
      override_from(b, "epsilon", o_e, *eps);
      override_from(b, "loss_lo", o_lo, *lo);
      override_from(b, "loss_hi", o_hi, *hi);
      override_from(b, "mc_draws", o_d, *draws);
      BoundConfig bc = bound_config_from_json(b);
      c["bound"] = bc;
      if (!(c.value("norm_bound", 1.0) > 0.0)) throw UsageError("norm bound must be positive");
      weight_method_from_string(c.value("method", std::string("qp")));
      return std::pair{c, bc};
    });
    const json& cfg = r.first;
    const TaskCollection tasks = load_tasks(cfg);
    const BasisFn basis = make_basis(cfg, tasks);
    const TaskGram gram = make_gram(cfg, tasks, basis);
    const auto alpha = weights_for(cfg, gram).first;
    const RademacherEstimate rad = rademacher_linear(tasks.target(), basis, cfg.value("norm_bound", 1.0), r.second.mc_draws,
                                                     cfg.at("seed").get<std::uint64_t>());
    const BoundBreakdown thm = evaluate_theorem2_bound(gram, alpha, rad.value, r.second);
    const BoundBreakdown cor = evaluate_corollary_bound(gram, alpha, rad.value, r.second);
    for (const auto& [name, b] : {std::pair{"theorem", thm}, std::pair{"corollary", cor}})
      out << name << "\ttotal=" << num(b.total) << "\tipm=" << num(b.ipm_term) << "\trademacher=" << num(b.rademacher_term)
          << "\tconfidence=" << num(b.confidence_term) << "\n";
    if (!sc.common.output.empty()) {
      json doc = {{"config", cfg}, {"weights", alpha}, {"rademacher", rad}, {"theorem", thm}, {"corollary", cor}};
      write_text(sc.common.output, doc.dump(2) + "\n");
    }
  };
}

void add_experiment(CLI::App& root, Subcommand& sc) {
  sc.app = root.add_subcommand("experiment", "Run a full experiment and write result tables");
  sc.common.attach(sc.app);
  auto name = std::make_shared<std::string>("linear1d");
  auto trials = std::make_shared<int>(1);
  auto shots = std::make_shared<std::vector<int>>();
  auto methods = std::make_shared<std::vector<std::string>>();
  auto iters = std::make_shared<int>(2000);
  auto* o_n = sc.app->add_option("--name", *name, "linear1d, sine, csv_regression or sales_rff");
  auto* o_t = sc.app->add_option("--trials", *trials, "Number of trials");
  auto* o_s = sc.app->add_option("--shots", *shots, "Target training sizes")->delimiter(',');
  auto* o_m = sc.app->add_option("--methods", *methods, "Methods to run")->delimiter(',');
  auto* o_i = sc.app->add_option("--meta-iters", *iters, "Meta-iterations (sine)");
  sc.run = [=, &sc](std::ostream& out, std::ostream& err) {
    const ExperimentSpec spec = resolve([&] {
      json c = sc.common.base();
      if (c.contains("config") && !c.contains("name")) {
        json inner = c.at("config");
        if (sc.common.seed_opt->count()) inner["seed"] = c.at("seed");
        c = inner;
      }
      override_from(c, "name", o_n, *name);
      override_from(c, "trials", o_t, *trials);
      override_from(c, "shots", o_s, *shots);
      override_from(c, "methods", o_m, *methods);
      if (o_i->count()) c["train"]["meta_iters"] = *iters;
      ExperimentSpec s = experiment_spec_from_json(c);
      if (!sc.common.output.empty()) s.output_dir = sc.common.output;
      s.validate();
      return s;
    });
    const ExperimentResult result = run_experiment(spec);
    write_experiment_outputs(result, spec.output_dir);
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";
    out << "method\tshots\trmse_init\trmse_adapted\n";
    for (const auto& a : result.aggregates)
      out << to_string(a.method) << "\t" << a.shots << "\t" << num(a.rmse_init_mean) << " +- " << num(a.rmse_init_std) << "\t"
          << num(a.rmse_adapted_mean) << " +- " << num(a.rmse_adapted_std) << "\n";
    out << "wrote " << spec.output_dir.string() << "\n";
  };
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Task-weighted meta-learning toolkit", "alphameta"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Subcommand>> subs;
  for (auto add : {add_generate, add_distance, add_weights, add_fit_linear, add_train_maml, add_bound, add_experiment}) {
    subs.push_back(std::make_unique<Subcommand>());
    add(app, *subs.back());
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  for (const auto& sc : subs) {
    if (!sc->app->parsed()) continue;
    try {
      sc->run(out, err);
      return kExitOk;
    } catch (const UsageError& e) {
      err << "error: " << e.what() << "\n\n" << sc->app->help();
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitRuntime;
    }
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace alphameta
