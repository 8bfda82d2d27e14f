#include <doctest.h>

#include "alphameta/errors.hpp"
#include "alphameta/feature_maps.hpp"
#include "alphameta/kernel_distance.hpp"
#include "alphameta/simplex.hpp"
#include "alphameta/weight_solver.hpp"
#include "fixtures.hpp"

using namespace alphameta;

namespace {

// Gram of scalar embeddings phi (sources then target), each task of size 1.
TaskGram scalar_gram(const std::vector<double>& phi) {
  TaskGram g;
  const auto n = static_cast<Eigen::Index>(phi.size());
  Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(phi.data(), n);
  g.K = p * p.transpose();
  g.sizes.assign(phi.size(), 1);
  for (std::size_t i = 0; i < phi.size(); ++i) g.order.push_back("t" + std::to_string(i));
  return g;
}

TaskGram random_psd_gram(oracle::TestRng& rng, int J) {
  const int rank = 1 + rng.index(J + 2);
  const Eigen::MatrixXd F = rng.matrix(J + 1, rank, -1, 1);
  TaskGram g;
  g.K = F * F.transpose();
  for (int i = 0; i <= J; ++i) {
    g.sizes.push_back(1 + rng.index(20));
    g.order.push_back("t" + std::to_string(i));
  }
  // Sizes enter through the embedding sums: rescale so K is a gram of sums.
  for (int i = 0; i <= J; ++i)
    for (int k = 0; k <= J; ++k) g.K(i, k) *= static_cast<double>(g.sizes[i] * g.sizes[k]);
  return g;
}

double f_of(const TaskGram& g, const std::vector<double>& a) { return kernel_distance_squared(g, a); }

}  // namespace

TEST_SUITE("weight_solver") {
  TEST_CASE("simplex weights validation and projection") {
    CHECK_THROWS_AS(SimplexWeights({0.5, 0.6}, WeightMethod::manual), InvalidArgument);
    CHECK_THROWS_AS(SimplexWeights({-0.1, 1.1}, WeightMethod::manual), InvalidArgument);
    CHECK_NOTHROW(SimplexWeights({0.25, 0.75}, WeightMethod::manual));
    const auto p = project_to_simplex(std::vector<double>{0.5, 0.5, 0.5});
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0));
    const auto q = project_to_simplex(std::vector<double>{2.0, 0.0});
    CHECK(q[0] == 1.0);
    CHECK(q[1] == 0.0);
    const auto inside = project_to_simplex(std::vector<double>{0.2, 0.3, 0.5});
    CHECK(inside[0] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(inside[2] == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("uniform weights") {
    CHECK(uniform_weights(4).alpha() == std::vector<double>{0.25, 0.25, 0.25, 0.25});
    CHECK(uniform_weights(1).alpha() == std::vector<double>{1.0});
    const auto w = uniform_weights(7);
    double s = 0;
    for (double v : w.alpha()) s += v;
    CHECK(std::abs(s - 1.0) <= 1e-15);
  }

  TEST_CASE("single source is the whole simplex") {
    oracle::TestRng rng(1);
    const auto [w, report] = solve_alpha_qp(random_psd_gram(rng, 1));
    CHECK(w.alpha() == std::vector<double>{1.0});
    CHECK(report.converged);
  }

  TEST_CASE("identical sources tie-break to uniform") {
    const auto [w, report] = solve_alpha_qp(scalar_gram({0.7, 0.7, 0.7, 0.2}));
    for (double v : w.alpha()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(report.converged);
    CHECK(*w.objective_value() == doctest::Approx(0.25).epsilon(1e-12));
  }

  TEST_CASE("a copy of the target takes the mass") {
    oracle::TestRng rng(2);
    for (int rep = 0; rep < 10; ++rep) {
      auto tasks = fixture::random_collection(rng, 4, 6, 1, -3, 3);
      std::vector<Task> src = tasks.sources();
      const int j = rng.index(4);
      src[static_cast<std::size_t>(j)] = Task("copy", tasks.target().features(), tasks.target().labels());
      const TaskGram g =
          build_task_gram(TaskCollection(src, tasks.target()), LossEmbedding(LossKind::square, BasisFn::identity_with_bias(1)));
      const auto [w, report] = solve_alpha_qp(g);
      CHECK(w[static_cast<std::size_t>(j)] >= 0.99);
      CHECK(f_of(g, w.alpha()) <= 1e-12 * g.K.diagonal().maxCoeff());
      CHECK(solve_alpha_threshold(g)[static_cast<std::size_t>(j)] == 1.0);
    }
  }

  TEST_CASE("threshold picks the closest source, ties go to the lowest index") {
    CHECK(solve_alpha_threshold(scalar_gram({0.5, 0.1, 0.9, 0.0})).alpha() == std::vector<double>{0, 1, 0});
    CHECK(solve_alpha_threshold(scalar_gram({0.3, 0.5, -0.3, 0.0})).alpha() == std::vector<double>{1, 0, 0});
  }

  TEST_CASE("QP is never worse than uniform or any vertex") {
    oracle::TestRng rng(3);
    for (auto alg : {QpAlgorithm::projected_gradient, QpAlgorithm::frank_wolfe}) {
      for (int rep = 0; rep < 40; ++rep) {
        const int J = 2 + rng.index(9);
        const TaskGram g = random_psd_gram(rng, J);
        QpOptions opt;
        opt.algorithm = alg;
        const auto [w, report] = solve_alpha_qp(g, opt);
        const double fq = f_of(g, w.alpha());
        double best = f_of(g, uniform_weights(static_cast<std::size_t>(J)).alpha());
        for (int j = 0; j < J; ++j) {
          std::vector<double> e(static_cast<std::size_t>(J), 0.0);
          e[static_cast<std::size_t>(j)] = 1.0;
          best = std::min(best, f_of(g, e));
        }
        CHECK(fq <= best + 1e-9);
        if (alg == QpAlgorithm::projected_gradient) {
          CHECK(report.converged);
          CHECK(report.kkt_residual <= 1e-8);
        }
        const auto t = solve_alpha_threshold(g);
        double vertex_min = std::numeric_limits<double>::infinity();
        for (int j = 0; j < J; ++j) {
          std::vector<double> e(static_cast<std::size_t>(J), 0.0);
          e[static_cast<std::size_t>(j)] = 1.0;
          vertex_min = std::min(vertex_min, f_of(g, e));
        }
        CHECK(f_of(g, t.alpha()) <= vertex_min * (1 + 1e-12) + 1e-300);
      }
    }
  }

  TEST_CASE("QP spreads mass over sources that together match the target") {
    oracle::TestRng rng(4);
    auto cluster = [&](const std::string& id, double cx, double cy, int n) {
      Eigen::MatrixXd x(n, 2);
      Eigen::VectorXd y(n);
      for (int i = 0; i < n; ++i) {
        x(i, 0) = cx + 0.3 * rng.normal();
        x(i, 1) = cy + 0.3 * rng.normal();
        y(i) = x(i, 0) - x(i, 1);
      }
      return Task(id, x, y);
    };
    const Task a = cluster("a", 0, 0, 15), b = cluster("b", 1, 1, 15);
    Eigen::MatrixXd tx(30, 2);
    tx << a.features(), b.features();
    Eigen::VectorXd ty(30);
    ty << a.labels(), b.labels();
    const TaskCollection tasks({a, b, cluster("c", 6, -4, 15), cluster("d", -5, 5, 15)}, Task("t", tx, ty));
    const TaskGram g = build_task_gram(tasks, LossEmbedding(LossKind::square, BasisFn::identity_with_bias(2)));
    const auto w = solve_alpha_qp(g).first;
    CHECK(w[0] > 0.3);
    CHECK(w[1] > 0.3);
    CHECK(w[0] + w[1] >= 0.999);
    const auto t = solve_alpha_threshold(g);
    CHECK(t[0] + t[1] == 1.0);
    CHECK(std::count(t.alpha().begin(), t.alpha().end(), 1.0) == 1);
  }

  TEST_CASE("weights json round trip") {
    const SimplexWeights w({0.25, 0.75}, WeightMethod::qp, 0.5);
    const auto back = simplex_weights_from_json(nlohmann::json(w));
    CHECK(back.alpha() == w.alpha());
    CHECK(back.method() == WeightMethod::qp);
    CHECK(*back.objective_value() == 0.5);
  }
}
