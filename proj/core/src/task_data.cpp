#include "alphameta/task_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "alphameta/errors.hpp"
#include "alphameta/rng.hpp"

namespace alphameta {
namespace {

constexpr std::uint64_t kTargetStream = 0;
constexpr std::uint64_t kSizeStream = 0xA11CE;
constexpr std::uint64_t kSourceStreamBase = 1;

std::string family_name(SyntheticFamily f) { return f == SyntheticFamily::linear1d ? "linear1d" : "sine"; }

SyntheticFamily family_from_name(const std::string& s) {
  if (s == "linear1d") return SyntheticFamily::linear1d;
  if (s == "sine") return SyntheticFamily::sine;
  throw InvalidArgument("unknown synthetic family '" + s + "'");
}

std::vector<int> multinomial_sizes(const SyntheticSpec& spec, Rng rng) {
  const auto j = static_cast<std::size_t>(spec.num_sources);
  const int total = spec.total_samples > 0 ? spec.total_samples : 40 * spec.num_sources;
  if (total < spec.min_task_size * spec.num_sources)
    throw InvalidArgument("total_samples too small for min_task_size on every source");
  const auto p = rng.dirichlet_uniform(j);
  const auto counts = rng.multinomial(static_cast<std::size_t>(total), p);
  std::vector<int> sizes(counts.begin(), counts.end());
  // Move samples from the largest cell until every task has the minimum.
  for (auto& s : sizes) {
    while (s < spec.min_task_size) {
      auto largest = std::max_element(sizes.begin(), sizes.end());
      --*largest;
      ++s;
    }
  }
  return sizes;
}

Task linear_task(std::string id, double mu, int n, double noise_std, Rng& rng) {
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal(mu, 1.0);
    const double eps = noise_std > 0.0 ? rng.normal(0.0, noise_std) : 0.0;
    y(i) = 2.0 * mu * x(i, 0) + eps;
  }
  return Task(std::move(id), std::move(x), std::move(y));
}

Task sine_task(std::string id, double amplitude, double phase, int n, const SyntheticSpec& spec, Rng& rng) {
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(spec.x_lo, spec.x_hi);
    y(i) = amplitude * std::sin(x(i, 0) + phase);
  }
  return Task(std::move(id), std::move(x), std::move(y));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.emplace_back(trim(cell));
  return out;
}

}  // namespace

Task::Task(std::string id, Eigen::MatrixXd features, Eigen::VectorXd labels)
    : id_(std::move(id)), features_(std::move(features)), labels_(std::move(labels)) {
  if (labels_.size() < 1) throw InvalidArgument("task '" + id_ + "': must contain at least one sample");
  if (features_.rows() != labels_.size())
    throw InvalidArgument("task '" + id_ + "': feature rows (" + std::to_string(features_.rows()) +
                          ") != label count (" + std::to_string(labels_.size()) + ")");
  if (features_.cols() < 1) throw InvalidArgument("task '" + id_ + "': feature dimension must be >= 1");
  if (!features_.allFinite() || !labels_.allFinite())
    throw InvalidArgument("task '" + id_ + "': non-finite entry");
}

Task Task::head(Eigen::Index n) const {
  if (n < 1 || n > size()) throw InvalidArgument("task '" + id_ + "': head size out of range");
  return Task(id_, features_.topRows(n), labels_.head(n));
}

void Task::set_held_out(Task held_out) {
  if (held_out.dim() != dim()) throw InvalidArgument("task '" + id_ + "': held-out dimension mismatch");
  held_out_ = std::make_shared<const Task>(std::move(held_out));
}

const Task& Task::held_out() const {
  if (!held_out_) throw InvalidArgument("task '" + id_ + "' has no held-out split");
  return *held_out_;
}

TaskCollection::TaskCollection(std::vector<Task> sources, Task target, nlohmann::json meta)
    : sources_(std::move(sources)), target_(std::move(target)), meta_(std::move(meta)) {
  if (sources_.empty()) throw InvalidArgument("task collection needs at least one source");
  for (const auto& s : sources_) {
    if (s.dim() != target_.dim())
      throw InvalidArgument("source '" + s.id() + "' has dimension " + std::to_string(s.dim()) +
                            ", target has " + std::to_string(target_.dim()));
  }
}

TaskCollection TaskCollection::with_target(Task target) const { return TaskCollection(sources_, std::move(target), meta_); }

TaskCollection TaskCollection::with_sources(const std::vector<std::size_t>& indices) const {
  std::vector<Task> picked;
  picked.reserve(indices.size());
  for (auto i : indices) picked.push_back(sources_.at(i));
  return TaskCollection(std::move(picked), target_, meta_);
}

void SyntheticSpec::validate() const {
  if (num_sources < 1) throw InvalidArgument("num_sources must be positive");
  if (samples_per_source && *samples_per_source < 1) throw InvalidArgument("samples_per_source must be positive");
  if (total_samples < 0) throw InvalidArgument("total_samples must be non-negative");
  if (min_task_size < 1) throw InvalidArgument("min_task_size must be positive");
  if (target_size < 1) throw InvalidArgument("target_size must be positive");
  if (eval_size < 0) throw InvalidArgument("eval_size must be non-negative");
  if (!(mean_lo < mean_hi)) throw InvalidArgument("mean range must satisfy lo < hi");
  if (noise_std < 0.0) throw InvalidArgument("noise_std must be non-negative");
  if (!(x_lo < x_hi)) throw InvalidArgument("x range must satisfy lo < hi");
  if (!(phase_lo <= phase_hi)) throw InvalidArgument("phase range must satisfy lo <= hi");
  if (!(amplitude_shape > 0.0) || !(amplitude_scale > 0.0)) throw InvalidArgument("amplitude gamma parameters must be positive");
}

TaskCollection generate_linear1d(const SyntheticSpec& spec) {
  if (spec.family != SyntheticFamily::linear1d) throw InvalidArgument("generate_linear1d: family must be linear1d");
  spec.validate();
  const Rng root(spec.seed);
  std::vector<int> sizes = spec.samples_per_source
                               ? std::vector<int>(static_cast<std::size_t>(spec.num_sources), *spec.samples_per_source)
                               : multinomial_sizes(spec, root.split(kSizeStream));
  std::vector<Task> sources;
  nlohmann::json source_params = nlohmann::json::array();
  for (int j = 0; j < spec.num_sources; ++j) {
    Rng rng = root.split(kSourceStreamBase + static_cast<std::uint64_t>(j));
    const double mu = rng.uniform(spec.mean_lo, spec.mean_hi);
    sources.push_back(linear_task("source_" + std::to_string(j), mu, sizes[static_cast<std::size_t>(j)], spec.noise_std, rng));
    source_params.push_back({{"mean", mu}, {"slope", 2.0 * mu}});
  }
  Rng rng = root.split(kTargetStream);
  const double mu_t = spec.target_mean ? *spec.target_mean : rng.uniform(spec.mean_lo, spec.mean_hi);
  Task target = linear_task("target", mu_t, spec.target_size, spec.noise_std, rng);
  if (spec.eval_size > 0) target.set_held_out(linear_task("target_eval", mu_t, spec.eval_size, spec.noise_std, rng));
  nlohmann::json meta = {{"seed", spec.seed}, {"spec", spec}, {"sources", source_params},
                         {"target", {{"mean", mu_t}, {"slope", 2.0 * mu_t}}}};
  return TaskCollection(std::move(sources), std::move(target), std::move(meta));
}

TaskCollection generate_sine(const SyntheticSpec& spec) {
  if (spec.family != SyntheticFamily::sine) throw InvalidArgument("generate_sine: family must be sine");
  spec.validate();
  const Rng root(spec.seed);
  const int per_source = spec.samples_per_source.value_or(40);
  std::vector<Task> sources;
  nlohmann::json source_params = nlohmann::json::array();
  for (int j = 0; j < spec.num_sources; ++j) {
    Rng rng = root.split(kSourceStreamBase + static_cast<std::uint64_t>(j));
    const double amp = spec.source_amplitude ? *spec.source_amplitude : rng.gamma(spec.amplitude_shape, spec.amplitude_scale);
    const double phase = rng.uniform(spec.phase_lo, spec.phase_hi);
    sources.push_back(sine_task("source_" + std::to_string(j), amp, phase, per_source, spec, rng));
    source_params.push_back({{"amplitude", amp}, {"phase", phase}});
  }
  Rng rng = root.split(kTargetStream);
  const double phase_t = rng.uniform(spec.phase_lo, spec.phase_hi);
  Task target = sine_task("target", spec.target_amplitude, phase_t, spec.target_size, spec, rng);
  if (spec.eval_size > 0) target.set_held_out(sine_task("target_eval", spec.target_amplitude, phase_t, spec.eval_size, spec, rng));
  nlohmann::json meta = {{"seed", spec.seed}, {"spec", spec}, {"sources", source_params},
                         {"target", {{"amplitude", spec.target_amplitude}, {"phase", phase_t}}}};
  return TaskCollection(std::move(sources), std::move(target), std::move(meta));
}

TaskCollection generate(const SyntheticSpec& spec) {
  return spec.family == SyntheticFamily::linear1d ? generate_linear1d(spec) : generate_sine(spec);
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw InvalidArgument("missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const std::string& cell = rows.at(row).at(col);
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(value))
    throw ParseError("non-numeric cell '" + cell + "' at row " + std::to_string(row + 2) + ", column '" +
                     header.at(col) + "'");
  return value;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open CSV file '" + path.string() + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("CSV file '" + path.string() + "' is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  table.header = split_csv_line(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != table.header.size())
      throw ParseError("row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

TaskCollection load_csv_tasks(const CsvTaskSpec& spec) {
  if (spec.source_groups.empty()) throw InvalidArgument("at least one source group is required");
  const CsvTable table = read_csv(spec.path);
  const std::size_t group_col = table.column(spec.group_column);
  const std::size_t label_col = table.column(spec.label_column);
  std::vector<std::size_t> feature_cols;
  if (spec.feature_columns.empty()) {
    for (std::size_t c = 0; c < table.header.size(); ++c)
      if (c != group_col && c != label_col) feature_cols.push_back(c);
  } else {
    for (const auto& name : spec.feature_columns) {
      const std::size_t c = table.column(name);
      if (c == group_col) throw InvalidArgument("group column '" + name + "' cannot be a feature");
      feature_cols.push_back(c);
    }
  }
  if (feature_cols.empty()) throw InvalidArgument("no feature columns selected");

  std::vector<GroupSpec> groups = spec.source_groups;
  groups.push_back(spec.target_group);
  std::vector<std::vector<std::size_t>> members(groups.size());
  std::size_t dropped = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double g = table.number(r, group_col);
    std::optional<std::size_t> hit;
    for (std::size_t k = 0; k < groups.size(); ++k) {
      if (!groups[k].contains(g)) continue;
      if (hit)
        throw InvalidArgument("row " + std::to_string(r + 2) + " belongs to both group '" + groups[*hit].name + "' and '" +
                              groups[k].name + "'");
      hit = k;
    }
    if (hit) {
      members[*hit].push_back(r);
    } else {
      ++dropped;
    }
  }

  auto build = [&](std::size_t k) {
    if (members[k].empty()) throw InvalidArgument("empty group '" + groups[k].name + "'");
    const auto n = static_cast<Eigen::Index>(members[k].size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(feature_cols.size()));
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t r = members[k][static_cast<std::size_t>(i)];
      for (std::size_t c = 0; c < feature_cols.size(); ++c) x(i, static_cast<Eigen::Index>(c)) = table.number(r, feature_cols[c]);
      y(i) = table.number(r, label_col);
    }
    return Task(groups[k].name, std::move(x), std::move(y));
  };

  std::vector<Task> sources;
  for (std::size_t k = 0; k + 1 < groups.size(); ++k) sources.push_back(build(k));
  Task target = build(groups.size() - 1);
  nlohmann::json feature_names = nlohmann::json::array();
  for (auto c : feature_cols) feature_names.push_back(table.header[c]);
  nlohmann::json meta = {{"path", spec.path.string()}, {"group_column", spec.group_column},
                         {"label_column", spec.label_column}, {"feature_columns", feature_names},
                         {"dropped_rows", dropped}};
  return TaskCollection(std::move(sources), std::move(target), std::move(meta));
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ParseError("matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw ParseError("ragged matrix row " + std::to_string(i));
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void to_json(nlohmann::json& j, const Task& task) {
  j = {{"id", task.id()}, {"features", matrix_to_json(task.features())}, {"labels", vector_to_json(task.labels())}};
  if (task.has_held_out()) j["held_out"] = task.held_out();
}

Task task_from_json(const nlohmann::json& j) {
  Task task(j.at("id").get<std::string>(), matrix_from_json(j.at("features")), vector_from_json(j.at("labels")));
  if (j.contains("held_out")) task.set_held_out(task_from_json(j.at("held_out")));
  return task;
}

void to_json(nlohmann::json& j, const TaskCollection& tasks) {
  nlohmann::json sources = nlohmann::json::array();
  for (const auto& s : tasks.sources()) sources.push_back(s);
  j = {{"sources", sources}, {"target", tasks.target()}, {"meta", tasks.meta()}};
}

TaskCollection collection_from_json(const nlohmann::json& j) {
  std::vector<Task> sources;
  for (const auto& s : j.at("sources")) sources.push_back(task_from_json(s));
  return TaskCollection(std::move(sources), task_from_json(j.at("target")), j.value("meta", nlohmann::json::object()));
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = {{"family", family_name(s.family)},
       {"num_sources", s.num_sources},
       {"samples_per_source", s.samples_per_source ? nlohmann::json(*s.samples_per_source) : nlohmann::json(nullptr)},
       {"total_samples", s.total_samples},
       {"min_task_size", s.min_task_size},
       {"target_size", s.target_size},
       {"eval_size", s.eval_size},
       {"seed", s.seed},
       {"mean_lo", s.mean_lo},
       {"mean_hi", s.mean_hi},
       {"noise_std", s.noise_std},
       {"target_mean", s.target_mean ? nlohmann::json(*s.target_mean) : nlohmann::json(nullptr)},
       {"amplitude_shape", s.amplitude_shape},
       {"amplitude_scale", s.amplitude_scale},
       {"target_amplitude", s.target_amplitude},
       {"source_amplitude", s.source_amplitude ? nlohmann::json(*s.source_amplitude) : nlohmann::json(nullptr)},
       {"phase_lo", s.phase_lo},
       {"phase_hi", s.phase_hi},
       {"x_lo", s.x_lo},
       {"x_hi", s.x_hi}};
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.family = family_from_name(j.value("family", std::string("linear1d")));
  if (s.family == SyntheticFamily::sine) s.target_size = 10;
  auto opt_int = [&](const char* key) -> std::optional<int> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<int>();
  };
  auto opt_double = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  s.num_sources = j.value("num_sources", s.num_sources);
  s.samples_per_source = opt_int("samples_per_source");
  s.total_samples = j.value("total_samples", s.total_samples);
  s.min_task_size = j.value("min_task_size", s.min_task_size);
  s.target_size = j.value("target_size", s.target_size);
  s.eval_size = j.value("eval_size", s.eval_size);
  s.seed = j.value("seed", s.seed);
  s.mean_lo = j.value("mean_lo", s.mean_lo);
  s.mean_hi = j.value("mean_hi", s.mean_hi);
  s.noise_std = j.value("noise_std", s.noise_std);
  s.target_mean = opt_double("target_mean");
  s.amplitude_shape = j.value("amplitude_shape", s.amplitude_shape);
  s.amplitude_scale = j.value("amplitude_scale", s.amplitude_scale);
  s.target_amplitude = j.value("target_amplitude", s.target_amplitude);
  s.source_amplitude = opt_double("source_amplitude");
  s.phase_lo = j.value("phase_lo", s.phase_lo);
  s.phase_hi = j.value("phase_hi", s.phase_hi);
  s.x_lo = j.value("x_lo", s.x_lo);
  s.x_hi = j.value("x_hi", s.x_hi);
  s.validate();
  return s;
}

void to_json(nlohmann::json& j, const GroupSpec& g) {
  j = {{"name", g.name}, {"lo", g.lo}, {"hi", g.hi}, {"hi_inclusive", g.hi_inclusive}};
}

GroupSpec group_spec_from_json(const nlohmann::json& j) {
  GroupSpec g;
  g.lo = j.at("lo").get<double>();
  g.hi = j.at("hi").get<double>();
  g.hi_inclusive = j.value("hi_inclusive", false);
  g.name = j.value("name", "[" + std::to_string(g.lo) + "," + std::to_string(g.hi) + (g.hi_inclusive ? "]" : ")"));
  if (!(g.lo <= g.hi)) throw InvalidArgument("group '" + g.name + "' has lo > hi");
  return g;
}

}  // namespace alphameta
