#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "alphameta/task_data.hpp"
#include "oracles.hpp"

namespace fixture {

inline alphameta::Task random_task(oracle::TestRng& rng, const std::string& id, int n, int d, double lo = -1.0,
                                   double hi = 1.0) {
  Eigen::MatrixXd x = rng.matrix(n, d, lo, hi);
  Eigen::VectorXd y = rng.matrix(n, 1, lo, hi).col(0);
  return alphameta::Task(id, std::move(x), std::move(y));
}

// J random sources and a random target with sizes in [1, max_n].
inline alphameta::TaskCollection random_collection(oracle::TestRng& rng, int J, int max_n, int d, double lo = -1.0,
                                                   double hi = 1.0) {
  std::vector<alphameta::Task> sources;
  for (int j = 0; j < J; ++j) sources.push_back(random_task(rng, "s" + std::to_string(j), 1 + rng.index(max_n), d, lo, hi));
  return alphameta::TaskCollection(std::move(sources), random_task(rng, "t", 1 + rng.index(max_n), d, lo, hi));
}

inline std::vector<double> random_simplex(oracle::TestRng& rng, std::size_t J) {
  std::vector<double> a(J);
  double s = 0.0;
  for (auto& v : a) {
    v = -std::log(std::max(rng.uniform(), 1e-300));
    s += v;
  }
  for (auto& v : a) v /= s;
  return a;
}

// Basis outputs of a task as an oracle sample.
template <class Basis>
oracle::Sample to_sample(const alphameta::Task& t, const Basis& basis) {
  return {basis.apply_rows(t.features()), t.labels()};
}

}  // namespace fixture
