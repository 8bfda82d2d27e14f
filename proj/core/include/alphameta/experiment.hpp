#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alphameta/gradient_meta.hpp"
#include "alphameta/task_data.hpp"
#include "alphameta/weight_solver.hpp"

namespace alphameta {

enum class ExperimentName { linear1d, sine, csv_regression, sales_rff };
enum class ExperimentMethod { maml, alpha_maml, threshold_maml, erm, alpha_erm, threshold_erm, target_only, direct_bound };

std::string to_string(ExperimentName n);
ExperimentName experiment_name_from_string(const std::string& s);
std::string to_string(ExperimentMethod m);
ExperimentMethod experiment_method_from_string(const std::string& s);

/// Weekly sales table: one product per row, one column per week.
struct SalesSpec {
  std::filesystem::path path;
  std::string id_column = "Product_Code";
  /// Week columns are those named <prefix><integer>, ordered by the integer.
  std::string week_prefix = "W";
  int num_sources = 300;
  int rff_dim = 100;
  /// RFF bandwidth; median heuristic over week indices when unset.
  std::optional<double> bandwidth;
  int test_weeks = 42;
};

struct ExperimentSpec {
  ExperimentName name = ExperimentName::linear1d;
  std::vector<ExperimentMethod> methods;
  /// Target training sizes; one result row per (trial, method, shots).
  std::vector<int> shots;
  int trials = 1;
  std::uint64_t seed = 0;
  /// Not part of the embedded config.
  std::filesystem::path output_dir = "results";

  int adapt_steps = 10;
  double adapt_lr = 0.01;

  // Linear families (linear1d, csv_regression, sales_rff).
  double eta = 1e-4;
  std::optional<double> ridge;
  QpOptions qp{};

  // Synthetic families; seed and target sizes are filled per trial.
  SyntheticSpec synthetic{};
  // Network training (sine).
  TrainConfig train{};
  /// Mini-batch for direct_bound (train.batch_tasks is used by the other methods).
  int direct_batch_tasks = 150;

  std::optional<CsvTaskSpec> csv;
  std::optional<SalesSpec> sales;

  void validate() const;
  /// Family defaults: method roster, shots, trials and data sizes.
  static ExperimentSpec defaults(ExperimentName name);
};

struct ResultRow {
  int trial = 0;
  ExperimentMethod method = ExperimentMethod::erm;
  int shots = 0;
  double rmse_init = 0.0;
  double rmse_adapted = 0.0;
  int steps = 0;
  /// Source weights (empty when the method has no single weight vector).
  std::vector<double> alpha;
  /// Held-out MSE after 0..steps adaptation steps.
  std::vector<double> curve;
};

struct AggregateRow {
  ExperimentMethod method = ExperimentMethod::erm;
  int shots = 0;
  int count = 0;
  double rmse_init_mean = 0.0;
  double rmse_init_std = 0.0;
  double rmse_adapted_mean = 0.0;
  double rmse_adapted_std = 0.0;
};

struct ExperimentLogRow {
  int trial = 0;
  ExperimentMethod method = ExperimentMethod::erm;
  int shots = 0;
  TrainLogRow row;
};

struct ExperimentResult {
  nlohmann::json config;
  std::vector<ResultRow> rows;
  std::vector<AggregateRow> aggregates;
  std::vector<ExperimentLogRow> log;
  std::vector<std::string> warnings;
};

/// Runs every (trial, shots, method) combination. Errors are rethrown with
/// the experiment, trial and method prepended.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Mean and sample standard deviation per (method, shots), in first-seen order.
std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow>& rows);

/// results.json, results.csv, table.csv, curves.csv and log.csv.
void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

void to_json(nlohmann::json& j, const ExperimentSpec& spec);
/// Accepts either a spec object or a results.json document (uses its "config").
/// Missing keys take the family defaults.
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const CsvTaskSpec& spec);
CsvTaskSpec csv_task_spec_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const SalesSpec& spec);
SalesSpec sales_spec_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const ResultRow& row);
void to_json(nlohmann::json& j, const AggregateRow& row);

/// Products of a weekly sales table as tasks with the week index as the only input.
std::vector<Task> load_sales_tasks(const SalesSpec& spec);

}  // namespace alphameta
