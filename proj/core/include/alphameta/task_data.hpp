#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace alphameta {

/// One dataset: N rows of d features plus N labels.
///
/// Construction validates shape and finiteness, so a Task that exists is
/// always usable. An optional held-out evaluation split travels with it.
class Task {
 public:
  Task(std::string id, Eigen::MatrixXd features, Eigen::VectorXd labels);

  const std::string& id() const noexcept { return id_; }
  const Eigen::MatrixXd& features() const noexcept { return features_; }
  const Eigen::VectorXd& labels() const noexcept { return labels_; }
  Eigen::Index size() const noexcept { return labels_.size(); }
  Eigen::Index dim() const noexcept { return features_.cols(); }

  /// First `n` rows as a new task (no held-out split attached).
  Task head(Eigen::Index n) const;

  void set_held_out(Task held_out);
  bool has_held_out() const noexcept { return held_out_ != nullptr; }
  /// Throws if no held-out split is attached.
  const Task& held_out() const;

 private:
  std::string id_;
  Eigen::MatrixXd features_;
  Eigen::VectorXd labels_;
  std::shared_ptr<const Task> held_out_;
};

/// J >= 1 source tasks and one target task sharing a feature dimension.
class TaskCollection {
 public:
  TaskCollection(std::vector<Task> sources, Task target, nlohmann::json meta = nlohmann::json::object());

  const std::vector<Task>& sources() const noexcept { return sources_; }
  const Task& target() const noexcept { return target_; }
  std::size_t num_sources() const noexcept { return sources_.size(); }
  Eigen::Index dim() const noexcept { return target_.dim(); }
  const nlohmann::json& meta() const noexcept { return meta_; }

  /// Same sources, different target (dimension re-checked).
  TaskCollection with_target(Task target) const;
  /// Subset of sources in the given order, same target.
  TaskCollection with_sources(const std::vector<std::size_t>& indices) const;

 private:
  std::vector<Task> sources_;
  Task target_;
  nlohmann::json meta_;
};

enum class SyntheticFamily { linear1d, sine };

struct SyntheticSpec {
  SyntheticFamily family = SyntheticFamily::linear1d;
  int num_sources = 9;
  // Fixed per-source size; when unset, linear1d sizes are multinomial over
  // `total_samples` (0 means 40 * num_sources) and sine uses 40.
  std::optional<int> samples_per_source;
  int total_samples = 0;
  int min_task_size = 2;
  int target_size = 20;
  int eval_size = 100;
  std::uint64_t seed = 0;

  // linear1d
  double mean_lo = -5.0;
  double mean_hi = 5.0;
  double noise_std = 1.0;
  std::optional<double> target_mean;

  // sine
  double amplitude_shape = 1.0;
  double amplitude_scale = 2.0;
  double target_amplitude = 6.0;
  std::optional<double> source_amplitude;
  double phase_lo = 0.0;
  double phase_hi = 3.14159265358979323846;
  double x_lo = -5.0;
  double x_hi = 5.0;

  void validate() const;
};

TaskCollection generate_linear1d(const SyntheticSpec& spec);
TaskCollection generate_sine(const SyntheticSpec& spec);
/// Dispatches on spec.family.
TaskCollection generate(const SyntheticSpec& spec);

/// Half-open interval [lo, hi) of the grouping column, or closed when
/// `hi_inclusive` is set.
struct GroupSpec {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  bool hi_inclusive = false;

  bool contains(double v) const noexcept { return v >= lo && (hi_inclusive ? v <= hi : v < hi); }
};

struct CsvTaskSpec {
  std::filesystem::path path;
  std::string group_column;
  std::vector<GroupSpec> source_groups;
  GroupSpec target_group;
  std::vector<std::string> feature_columns;  // empty: every column except group and label
  std::string label_column;
};

/// Reads a comma-separated file with a header row and groups rows into tasks.
/// Rows that fall in no declared group are dropped (their count is recorded in
/// meta["dropped_rows"]); a row in two groups is an error.
TaskCollection load_csv_tasks(const CsvTaskSpec& spec);

/// Header plus numeric cells of a CSV file. Non-numeric cells are kept as NaN
/// only in columns listed in `text_columns`; elsewhere they raise ParseError.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
  double number(std::size_t row, std::size_t col) const;
};
CsvTable read_csv(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const Task& task);
Task task_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const TaskCollection& tasks);
TaskCollection collection_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const GroupSpec& g);
GroupSpec group_spec_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

}  // namespace alphameta
