#include <doctest.h>

#include "alphameta/errors.hpp"
#include "alphameta/feature_maps.hpp"
#include "alphameta/kernel_distance.hpp"
#include "alphameta/weight_solver.hpp"
#include "fixtures.hpp"

using namespace alphameta;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

std::vector<double> unit_vector(std::size_t J, std::size_t j) {
  std::vector<double> e(J, 0.0);
  e[j] = 1.0;
  return e;
}

}  // namespace

TEST_SUITE("kernel_distance") {
  TEST_CASE("duplicate single-point tasks") {
    const LossEmbedding emb(LossKind::square, BasisFn::identity_with_bias(1));
    Task t("a", Eigen::MatrixXd::Constant(1, 1, 0.4), Eigen::VectorXd::Constant(1, -0.3));
    const TaskGram g = build_task_gram(TaskCollection({t}, t), emb);
    const double k = loss_kernel(emb, t.features().row(0).transpose(), -0.3, t.features().row(0).transpose(), -0.3);
    CHECK((g.K.array() - k).abs().maxCoeff() <= 1e-15 * k);
    CHECK(kernel_distance(g, std::vector<double>{1.0}) == 0.0);
    CHECK(per_source_distances(g)[0] == 0.0);
  }

  TEST_CASE("gram entries equal the pairwise double sums") {
    oracle::TestRng rng(21);
    const auto basis = BasisFn::identity_with_bias(2);
    for (int rep = 0; rep < 10; ++rep) {
      const auto tasks = fixture::random_collection(rng, 3, 5, 2);
      const TaskGram g = build_task_gram(tasks, LossEmbedding(LossKind::square, basis));
      std::vector<oracle::Sample> all;
      for (const auto& s : tasks.sources()) all.push_back(fixture::to_sample(s, basis));
      all.push_back(fixture::to_sample(tasks.target(), basis));
      for (std::size_t a = 0; a < all.size(); ++a)
        for (std::size_t b = 0; b < all.size(); ++b) {
          double sum = 0.0;
          for (Eigen::Index i = 0; i < all[a].psi.rows(); ++i)
            for (Eigen::Index k = 0; k < all[b].psi.rows(); ++k)
              sum += oracle::square_kernel(all[a].psi.row(i).transpose(), all[a].y(i), all[b].psi.row(k).transpose(), all[b].y(k));
          CHECK(rel_err(g.K(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), sum) <= 1e-10);
        }
    }
  }

  TEST_CASE("distance matches the naive MMD expansion") {
    oracle::TestRng rng(5);
    for (bool hinge : {false, true}) {
      const auto basis = BasisFn::identity_with_bias(2).with_normalization(true);
      for (int rep = 0; rep < 10; ++rep) {
        const auto tasks = fixture::random_collection(rng, 3, 6, 2);
        const TaskGram g = build_task_gram(tasks, LossEmbedding(hinge ? LossKind::hinge : LossKind::square, basis));
        std::vector<oracle::Sample> src;
        for (const auto& s : tasks.sources()) src.push_back(fixture::to_sample(s, basis));
        const auto tgt = fixture::to_sample(tasks.target(), basis);
        const auto alpha = fixture::random_simplex(rng, 3);
        CHECK(rel_err(kernel_distance(g, alpha), oracle::mmd_double_sum(src, tgt, alpha, hinge)) <= 1e-10);
        const auto per = per_source_distances(g);
        for (std::size_t j = 0; j < 3; ++j) {
          CHECK(rel_err(per[j], oracle::mmd_double_sum(src, tgt, unit_vector(3, j), hinge)) <= 1e-10);
          CHECK(per[j] == kernel_distance(g, unit_vector(3, j)));
        }
      }
    }
  }

  TEST_CASE("a copied target has zero distance") {
    oracle::TestRng rng(6);
    auto tasks = fixture::random_collection(rng, 3, 8, 1);
    const Task copy("copy", tasks.target().features(), tasks.target().labels());
    const TaskCollection with_copy({tasks.sources()[0], copy, tasks.sources()[2]}, tasks.target());
    const TaskGram g = build_task_gram(with_copy, LossEmbedding(LossKind::square, BasisFn::identity_with_bias(1)));
    CHECK(per_source_distances(g)[1] <= 1e-8);
    CHECK(kernel_distance(g, unit_vector(3, 1)) <= 1e-8);
  }

  TEST_CASE("point order within a task does not matter") {
    oracle::TestRng rng(7);
    const auto tasks = fixture::random_collection(rng, 2, 8, 2);
    const LossEmbedding emb(LossKind::square, BasisFn::identity_with_bias(2));
    const auto& s0 = tasks.sources()[0];
    const Eigen::Index n = s0.size();
    Eigen::MatrixXd x = s0.features().colwise().reverse();
    Eigen::VectorXd y = s0.labels().reverse();
    REQUIRE(x.rows() == n);
    const TaskCollection flipped({Task("s0", x, y), tasks.sources()[1]}, tasks.target());
    const auto a = per_source_distances(build_task_gram(tasks, emb));
    const auto b = per_source_distances(build_task_gram(flipped, emb));
    for (std::size_t j = 0; j < 2; ++j) CHECK(rel_err(a[j], b[j]) <= 1e-12);
  }

  TEST_CASE("mixture distance is below the weighted per-source sum") {
    oracle::TestRng rng(8);
    const LossEmbedding emb(LossKind::square, BasisFn::identity_with_bias(1));
    for (int rep = 0; rep < 50; ++rep) {
      const TaskGram g = build_task_gram(fixture::random_collection(rng, 4, 6, 1), emb);
      const auto alpha = fixture::random_simplex(rng, 4);
      const auto per = per_source_distances(g);
      double bound = 0.0;
      for (std::size_t j = 0; j < 4; ++j) bound += alpha[j] * per[j];
      const double d = kernel_distance(g, alpha);
      CHECK(d >= 0.0);
      CHECK(d <= bound + 1e-9);
    }
  }

  TEST_CASE("scaling the kernel scales the distance by the square root") {
    oracle::TestRng rng(9);
    const LossEmbedding emb(LossKind::square, BasisFn::identity_with_bias(1));
    TaskGram g = build_task_gram(fixture::random_collection(rng, 4, 6, 1), emb);
    const auto alpha = fixture::random_simplex(rng, 4);
    const double before = kernel_distance(g, alpha);
    const auto w_before = solve_alpha_qp(g).first.alpha();
    g.K *= 9.0;
    CHECK(kernel_distance(g, alpha) == doctest::Approx(3.0 * before).epsilon(1e-12));
    const auto w_after = solve_alpha_qp(g).first.alpha();
    for (std::size_t j = 0; j < 4; ++j) CHECK((w_before[j] > 1e-9) == (w_after[j] > 1e-9));
  }

  TEST_CASE("indefinite gram is an error, tiny roundoff is clamped") {
    TaskGram g;
    g.K = Eigen::MatrixXd::Identity(2, 2);
    g.K(0, 1) = g.K(1, 0) = 2.0;
    g.sizes = {1, 1};
    g.order = {"s", "t"};
    CHECK_THROWS_AS(kernel_distance_squared(g, std::vector<double>{1.0}), NumericalError);
    g.K = Eigen::MatrixXd::Ones(2, 2);
    g.K(0, 0) += 1e-15;
    g.K(1, 1) -= 1e-15;
    CHECK(kernel_distance(g, std::vector<double>{1.0}) >= 0.0);
  }

  TEST_CASE("gram json round trip") {
    oracle::TestRng rng(10);
    const TaskGram g =
        build_task_gram(fixture::random_collection(rng, 3, 4, 1), LossEmbedding(LossKind::square, BasisFn::identity_with_bias(1)));
    const TaskGram back = task_gram_from_json(nlohmann::json(g));
    CHECK(back.K == g.K);
    CHECK(back.sizes == g.sizes);
    CHECK(back.order == g.order);
  }
}
