#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "alphameta/errors.hpp"
#include "alphameta/rng.hpp"
#include "alphameta/task_data.hpp"
#include "fixtures.hpp"

using namespace alphameta;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto dir = std::filesystem::temp_directory_path() / "alphameta_unit";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

CsvTaskSpec age_spec(const std::filesystem::path& p) {
  CsvTaskSpec s;
  s.path = p;
  s.group_column = "age";
  s.label_column = "y";
  s.source_groups = {{"young", 0, 30, false}, {"old", 60, 100, false}};
  s.target_group = {"mid", 40, 50, true};
  return s;
}

}  // namespace

TEST_SUITE("rng") {
  TEST_CASE("same seed gives the same stream and splits differ") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng s1 = Rng(42).split(1), s2 = Rng(42).split(2);
    CHECK(s1.next_u64() != s2.next_u64());
    CHECK(Rng(42).split(7).next_u64() == Rng(42).split(7).next_u64());
  }

  TEST_CASE("uniform, normal and gamma moments") {
    Rng r(5);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0, sg = 0;
    for (int i = 0; i < n; ++i) {
      const double u = r.uniform();
      CHECK((u >= 0.0 && u < 1.0));
      su += u;
      const double z = r.normal();
      sn += z;
      sn2 += z * z;
      sg += r.gamma(1.0, 2.0);
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(sg / n == doctest::Approx(2.0).epsilon(0.02));
  }

  TEST_CASE("dirichlet, multinomial and permutations") {
    Rng r(9);
    const auto p = r.dirichlet_uniform(6);
    double s = 0;
    for (double v : p) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    const auto counts = r.multinomial(360, p);
    std::size_t total = 0;
    for (auto c : counts) total += c;
    CHECK(total == 360);
    auto perm = r.permutation(50);
    std::set<std::size_t> seen(perm.begin(), perm.end());
    CHECK(seen.size() == 50);
    CHECK(*seen.rbegin() == 49);
    const auto sub = r.sample_without_replacement(100, 10);
    CHECK(std::set<std::size_t>(sub.begin(), sub.end()).size() == 10);
  }
}

TEST_SUITE("task_data") {
  TEST_CASE("task invariants") {
    CHECK_THROWS_AS(Task("a", Eigen::MatrixXd(0, 1), Eigen::VectorXd(0)), InvalidArgument);
    CHECK_THROWS_AS(Task("a", Eigen::MatrixXd::Zero(3, 1), Eigen::VectorXd::Zero(2)), InvalidArgument);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
    x(1, 0) = std::nan("");
    CHECK_THROWS_AS(Task("a", x, Eigen::VectorXd::Zero(2)), InvalidArgument);
    Task t("a", Eigen::MatrixXd::Ones(4, 2), Eigen::VectorXd::Ones(4));
    CHECK(t.head(2).size() == 2);
  }

  TEST_CASE("collection rejects mixed dimensions and empty source lists") {
    Task a("a", Eigen::MatrixXd::Ones(2, 2), Eigen::VectorXd::Ones(2));
    Task b("b", Eigen::MatrixXd::Ones(2, 3), Eigen::VectorXd::Ones(2));
    CHECK_THROWS_AS(TaskCollection({a}, b), InvalidArgument);
    CHECK_THROWS_AS(TaskCollection({}, a), InvalidArgument);
    CHECK_NOTHROW(TaskCollection({a, a}, a));
  }

  TEST_CASE("linear1d generator: sizes, noiseless slopes and determinism") {
    SyntheticSpec spec;
    spec.seed = 11;
    const TaskCollection tasks = generate_linear1d(spec);
    CHECK(tasks.num_sources() == 9);
    CHECK(tasks.target().size() == 20);
    CHECK(tasks.target().has_held_out());
    Eigen::Index total = 0;
    for (const auto& s : tasks.sources()) {
      CHECK(s.size() >= 2);
      total += s.size();
    }
    CHECK(total == 40 * 9);
    const nlohmann::json once = tasks;
    const nlohmann::json twice = generate_linear1d(spec);
    CHECK(once.dump() == twice.dump());

    spec.noise_std = 0.0;
    const TaskCollection clean = generate_linear1d(spec);
    for (const auto& s : clean.sources()) {
      // y = 2 mu x exactly; least squares through the origin recovers the slope.
      const Eigen::VectorXd x = s.features().col(0);
      const double slope = x.dot(s.labels()) / x.dot(x);
      CHECK((s.labels() - slope * x).cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + s.labels().cwiseAbs().maxCoeff()));
      CHECK(std::abs(slope) <= 10.0);
    }
  }

  TEST_CASE("sine generator: target split, zero amplitude, distinct phases") {
    SyntheticSpec spec;
    spec.family = SyntheticFamily::sine;
    spec.num_sources = 5;
    spec.target_size = 10;
    spec.seed = 1;
    const auto tasks = generate_sine(spec);
    CHECK(tasks.target().size() == 10);
    CHECK(tasks.target().held_out().size() == 100);
    for (const auto& s : tasks.sources()) CHECK(s.size() == 40);

    spec.source_amplitude = 0.0;
    spec.target_amplitude = 0.0;
    const auto flat = generate_sine(spec);
    for (const auto& s : flat.sources()) CHECK(s.labels().cwiseAbs().maxCoeff() == 0.0);
    CHECK(flat.target().labels().cwiseAbs().maxCoeff() == 0.0);

    spec = SyntheticSpec{};
    spec.family = SyntheticFamily::sine;
    spec.num_sources = 2;
    std::set<std::vector<double>> firsts;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      spec.seed = seed;
      const auto t = generate_sine(spec);
      firsts.insert({t.sources()[0].labels()(0), t.sources()[1].labels()(0)});
    }
    CHECK(firsts.size() == 100);
  }

  TEST_CASE("csv grouping") {
    const auto p = write_temp("ages.csv",
                              "age,x1,x2,y\n"
                              "25,1,2,3\n"
                              "61,2,3,4\n"
                              "45,3,4,5\n"
                              "50,4,5,6\n"
                              "20,5,6,7\n"
                              "55,0,0,0\n"
                              "70,6,7,8\n");
    const TaskCollection tasks = load_csv_tasks(age_spec(p));
    REQUIRE(tasks.num_sources() == 2);
    CHECK(tasks.sources()[0].size() == 2);
    CHECK(tasks.sources()[1].size() == 2);
    CHECK(tasks.target().size() == 2);
    CHECK(tasks.dim() == 2);
    CHECK(tasks.sources()[0].labels()(1) == 7.0);
    CHECK(tasks.meta().at("dropped_rows") == 1);

    auto spec = age_spec(p);
    spec.source_groups.push_back({"nobody", 200, 300, false});
    try {
      load_csv_tasks(spec);
      FAIL("expected empty group error");
    } catch (const InvalidArgument& e) {
      CHECK(std::string(e.what()).find("empty group") != std::string::npos);
    }
    spec = age_spec(p);
    spec.target_group = {"none", 90, 95, false};
    CHECK_THROWS_AS(load_csv_tasks(spec), InvalidArgument);
    spec = age_spec(p);
    spec.label_column = "missing";
    CHECK_THROWS_AS(load_csv_tasks(spec), Error);
    spec.path = "/nonexistent/file.csv";
    CHECK_THROWS_AS(load_csv_tasks(spec), Error);

    const auto bad = write_temp("bad.csv", "age,x1,y\n25,oops,1\n45,1,1\n61,1,1\n");
    auto bs = age_spec(bad);
    try {
      load_csv_tasks(bs);
      FAIL("expected parse error");
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("x1") != std::string::npos);
      CHECK(msg.find("row 2") != std::string::npos);
    }
  }

  TEST_CASE("two groups of five and an empty target are rejected") {
    std::string text = "g,x,y\n";
    for (int i = 0; i < 10; ++i) text += std::to_string(i < 5 ? 1 : 2) + "," + std::to_string(i) + ",0\n";
    CsvTaskSpec s;
    s.path = write_temp("ten.csv", text);
    s.group_column = "g";
    s.label_column = "y";
    s.source_groups = {{"a", 1, 1, true}, {"b", 2, 2, true}};
    s.target_group = {"t", 3, 3, true};
    CHECK_THROWS_AS(load_csv_tasks(s), InvalidArgument);
  }

  TEST_CASE("json round trip keeps held-out data") {
    SyntheticSpec spec;
    spec.seed = 3;
    const auto tasks = generate_linear1d(spec);
    const nlohmann::json j = tasks;
    const auto back = collection_from_json(j);
    CHECK(nlohmann::json(back).dump() == j.dump());
    CHECK(back.target().held_out().size() == 100);
    const nlohmann::json sj = spec;
    CHECK(nlohmann::json(synthetic_spec_from_json(sj)).dump() == sj.dump());
  }
}
