#include <doctest.h>

#include <cmath>
#include <numbers>

#include "alphameta/errors.hpp"
#include "alphameta/feature_maps.hpp"
#include "fixtures.hpp"

using namespace alphameta;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::VectorXd random_ball(oracle::TestRng& rng, int d, double radius) {
  Eigen::VectorXd w(d);
  for (int i = 0; i < d; ++i) w(i) = rng.normal();
  return w * (radius * std::pow(rng.uniform(), 1.0 / d) / w.norm());
}

}  // namespace

TEST_SUITE("feature_maps") {
  TEST_CASE("identity basis appends a bias") {
    const auto b = BasisFn::identity_with_bias(1);
    CHECK(b.output_dim() == 2);
    CHECK(b.apply(vec({3})) == vec({3, 1}));
  }

  TEST_CASE("random fourier features") {
    const auto zero = BasisFn::random_fourier(Eigen::MatrixXd::Zero(2, 1), Eigen::VectorXd::Zero(2));
    const auto out = zero.apply(vec({0.7}));
    CHECK(out(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(out(1) == doctest::Approx(1.0).epsilon(1e-15));

    const double sigma = 1.3;
    const auto rff = BasisFn::random_fourier(2, 2048, sigma, 17);
    oracle::TestRng rng(4);
    double err = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd x = rng.matrix(2, 1, -2, 2).col(0), x2 = rng.matrix(2, 1, -2, 2).col(0);
      const double exact = std::exp(-(x - x2).squaredNorm() / (2 * sigma * sigma));
      err += std::abs(rff.apply(x).dot(rff.apply(x2)) - exact);
    }
    CHECK(err / 100 < 0.05);

    const nlohmann::json j = rff;
    const auto back = basis_from_json(j);
    CHECK(back.apply(vec({0.3, -0.2})) == rff.apply(vec({0.3, -0.2})));
  }

  TEST_CASE("normalization keeps outputs in the unit ball") {
    const auto b = BasisFn::identity_with_bias(2).with_normalization(true);
    CHECK(b.apply(vec({3, 4})).norm() == doctest::Approx(1.0));
    const Eigen::VectorXd small = b.apply(vec({0.1, 0.2}));
    // The bias entry alone has norm 1, so (0.1, 0.2, 1) is scaled down too.
    CHECK(small.norm() == doctest::Approx(1.0));
    CHECK(small(0) == doctest::Approx(0.1 / std::sqrt(1.05)));

  }

  TEST_CASE("median heuristic") {
    Eigen::MatrixXd pts(3, 1);
    pts << 0, 1, 2;
    CHECK(median_heuristic_bandwidth(pts) == doctest::Approx(1.0));
  }

  TEST_CASE("square embedding by hand") {
    const auto phi = embed_square(vec({1, 0}), 2.0);
    CHECK(phi == vec({1, 0, 0, 0, 2 * std::numbers::sqrt2, 0, 4}));
    CHECK(embed_square(vec({0, 0}), 0.0).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("hinge embedding and its constraints") {
    CHECK(embed_hinge(vec({0.6, 0.8}), 1.0) == vec({0.6, 0.8, 1}));
    CHECK(embed_hinge(vec({0.3, 0.1}), 0.0) == vec({0, 0, 1}));
    try {
      embed_hinge(vec({1, 1}), 1.0);
      FAIL("expected a precondition error");
    } catch (const PreconditionError& e) {
      CHECK(std::string(e.what()).find("psi") != std::string::npos);
    }
    CHECK_THROWS_AS(embed_hinge(vec({0.1, 0.1}), 1.5), PreconditionError);
  }

  TEST_CASE("loss kernel values, symmetry and PSD gram") {
    const LossEmbedding sq(LossKind::square, BasisFn::identity_with_bias(1));
    // psi = [x, 1] with x = 0 gives psi = [0, 1], i.e. the scalar feature 1.
    CHECK(loss_kernel(sq, vec({0}), 1.0, vec({0}), 1.0) == doctest::Approx(4.0));
    oracle::TestRng rng(2);
    const int n = 12;
    std::vector<Eigen::VectorXd> xs;
    std::vector<double> ys;
    for (int i = 0; i < n; ++i) {
      xs.push_back(rng.matrix(1, 1).col(0));
      ys.push_back(rng.uniform(-1, 1));
    }
    Eigen::MatrixXd G(n, n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) G(i, k) = loss_kernel(sq, xs[i], ys[i], xs[k], ys[k]);
    CHECK((G - G.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8 * G.trace());
    for (int i = 0; i < n; ++i) CHECK(G(i, i) >= 0.0);
  }

  TEST_CASE("RKHS norm of the loss representer") {
    oracle::TestRng rng(8);
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd w = random_ball(rng, 3, 1.0);
      CHECK(embed_square(-w, 1.0).squaredNorm() <= 4.0 + 1e-12);
      CHECK(embed_hinge(-w, 1.0).squaredNorm() <= 2.0 + 1e-12);
    }
  }

  TEST_CASE("embedding sums match summed embeddings") {
    oracle::TestRng rng(3);
    const Eigen::MatrixXd psi = rng.matrix(5, 3);
    const Eigen::VectorXd y = rng.matrix(5, 1).col(0);
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(13);
    for (int i = 0; i < 5; ++i) expect += embed_square(psi.row(i).transpose(), y(i));
    CHECK((square_embedding_sum(psi, y) - expect).cwiseAbs().maxCoeff() <= 1e-13);
    const Eigen::MatrixXd small = psi * 0.5;
    Eigen::VectorXd h = Eigen::VectorXd::Zero(4);
    for (int i = 0; i < 5; ++i) h += embed_hinge(small.row(i).transpose(), y(i));
    CHECK((hinge_embedding_sum(small, y) - h).cwiseAbs().maxCoeff() <= 1e-13);
  }
}
