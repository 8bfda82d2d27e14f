#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace oracle {

double square_kernel(const Eigen::VectorXd& a, double ya, const Eigen::VectorXd& b, double yb) {
  double dot = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) dot += a(i) * b(i);
  return dot * dot + 2.0 * ya * yb * dot + ya * ya * yb * yb;
}

double hinge_kernel(const Eigen::VectorXd& a, double ya, const Eigen::VectorXd& b, double yb) {
  double dot = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) dot += a(i) * b(i);
  return ya * yb * dot + 1.0;
}

namespace {

double pair_sum(const Sample& s, const Sample& t, bool hinge) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.psi.rows(); ++i)
    for (Eigen::Index k = 0; k < t.psi.rows(); ++k) {
      const Eigen::VectorXd a = s.psi.row(i).transpose();
      const Eigen::VectorXd b = t.psi.row(k).transpose();
      acc += hinge ? hinge_kernel(a, s.y(i), b, t.y(k)) : square_kernel(a, s.y(i), b, t.y(k));
    }
  return acc;
}

}  // namespace

double mmd_double_sum(const std::vector<Sample>& sources, const Sample& target, const std::vector<double>& alpha,
                      bool hinge) {
  double ss = 0.0, st = 0.0;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    const double nj = static_cast<double>(sources[j].y.size());
    for (std::size_t k = 0; k < sources.size(); ++k) {
      const double nk = static_cast<double>(sources[k].y.size());
      ss += alpha[j] * alpha[k] / (nj * nk) * pair_sum(sources[j], sources[k], hinge);
    }
    st += alpha[j] / (nj * static_cast<double>(target.y.size())) * pair_sum(sources[j], target, hinge);
  }
  const double nt = static_cast<double>(target.y.size());
  const double tt = pair_sum(target, target, hinge) / (nt * nt);
  return std::sqrt(std::max(0.0, ss - 2.0 * st + tt));
}

Eigen::VectorXd maml_linear_gd(const std::vector<Eigen::MatrixXd>& A, const std::vector<Eigen::VectorXd>& b,
                               const std::vector<double>& alpha, double eta, double grad_tol, long max_iters) {
  const Eigen::Index d = A.front().rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  // Gradient of each term by the chain rule: dU/dw = (I - eta A)^T, d/dU = A U - b.
  auto grad = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
    for (std::size_t j = 0; j < A.size(); ++j) {
      const Eigen::VectorXd u = w - eta * (A[j] * w - b[j]);
      g += alpha[j] * (I - eta * A[j]).transpose() * (A[j] * u - b[j]);
    }
    return g;
  };
  // Lipschitz constant of grad F by power iteration on the (constant) Hessian.
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t j = 0; j < A.size(); ++j) {
    const Eigen::MatrixXd m = I - eta * A[j];
    H += alpha[j] * m.transpose() * A[j] * m;
  }
  Eigen::VectorXd v = Eigen::VectorXd::Ones(d);
  double lip = 1.0;
  for (int it = 0; it < 500; ++it) {
    const Eigen::VectorXd hv = H * v;
    lip = hv.norm();
    v = hv / lip;
  }
  const double step = 1.0 / (1.01 * lip);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  for (long it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd g = grad(w);
    if (g.norm() <= grad_tol) return w;
    w -= step * g;
  }
  throw std::runtime_error("gradient-descent oracle did not reach the gradient tolerance");
}

double rademacher_exhaustive(const Eigen::MatrixXd& psi, double norm_bound) {
  const auto n = static_cast<int>(psi.rows());
  if (n > 20) throw std::invalid_argument("exhaustive enumeration limited to 20 points");
  double total = 0.0;
  const std::uint64_t count = 1ULL << n;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(psi.cols());
    for (int i = 0; i < n; ++i) s += ((mask >> i) & 1ULL ? 1.0 : -1.0) * psi.row(i).transpose();
    total += s.norm();
  }
  return norm_bound / n * total / static_cast<double>(count);
}

double NaiveNet::predict(const std::vector<double>& t, const double* x) const {
  const std::size_t w1 = 0, b1 = w1 + h1 * d, w2 = b1 + h1, b2 = w2 + h2 * h1, w3 = b2 + h2, b3 = w3 + h2;
  std::vector<double> a1(h1), a2(h2);
  for (int i = 0; i < h1; ++i) {
    double z = t[b1 + i];
    for (int k = 0; k < d; ++k) z += t[w1 + i + k * h1] * x[k];
    a1[i] = z > 0 ? z : 0.0;
  }
  for (int i = 0; i < h2; ++i) {
    double z = t[b2 + i];
    for (int k = 0; k < h1; ++k) z += t[w2 + i + k * h2] * a1[k];
    a2[i] = z > 0 ? z : 0.0;
  }
  double out = t[b3];
  for (int k = 0; k < h2; ++k) out += t[w3 + k] * a2[k];
  return out;
}

double NaiveNet::mse(const std::vector<double>& t, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     std::vector<double>* grad) const {
  const std::size_t w1 = 0, b1 = w1 + h1 * d, w2 = b1 + h1, b2 = w2 + h2 * h1, w3 = b2 + h2, b3 = w3 + h2;
  const auto n = x.rows();
  if (grad) grad->assign(t.size(), 0.0);
  double loss = 0.0;
  std::vector<double> xi(d), z1(h1), a1(h1), z2(h2), a2(h2), d2(h2), d1(h1);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (int k = 0; k < d; ++k) xi[k] = x(r, k);
    for (int i = 0; i < h1; ++i) {
      z1[i] = t[b1 + i];
      for (int k = 0; k < d; ++k) z1[i] += t[w1 + i + k * h1] * xi[k];
      a1[i] = z1[i] > 0 ? z1[i] : 0.0;
    }
    for (int i = 0; i < h2; ++i) {
      z2[i] = t[b2 + i];
      for (int k = 0; k < h1; ++k) z2[i] += t[w2 + i + k * h2] * a1[k];
      a2[i] = z2[i] > 0 ? z2[i] : 0.0;
    }
    double out = t[b3];
    for (int k = 0; k < h2; ++k) out += t[w3 + k] * a2[k];
    const double e = out - y(r);
    loss += e * e;
    if (!grad) continue;
    auto& g = *grad;
    const double dout = 2.0 * e / static_cast<double>(n);
    g[b3] += dout;
    for (int k = 0; k < h2; ++k) {
      g[w3 + k] += dout * a2[k];
      d2[k] = z2[k] > 0 ? dout * t[w3 + k] : 0.0;
    }
    for (int i = 0; i < h2; ++i) {
      g[b2 + i] += d2[i];
      for (int k = 0; k < h1; ++k) g[w2 + i + k * h2] += d2[i] * a1[k];
    }
    for (int k = 0; k < h1; ++k) {
      double s = 0.0;
      for (int i = 0; i < h2; ++i) s += t[w2 + i + k * h2] * d2[i];
      d1[k] = z1[k] > 0 ? s : 0.0;
    }
    for (int i = 0; i < h1; ++i) {
      g[b1 + i] += d1[i];
      for (int k = 0; k < d; ++k) g[w1 + i + k * h1] += d1[i] * xi[k];
    }
  }
  return loss / static_cast<double>(n);
}

double NaiveNet::maml_loss(const std::vector<double>& theta, const std::vector<Sample>& tasks, const std::vector<double>& w,
                           double a) const {
  double total = 0.0;
  std::vector<double> g;
  for (std::size_t j = 0; j < tasks.size(); ++j) {
    mse(theta, tasks[j].psi, tasks[j].y, &g);
    std::vector<double> adapted = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) adapted[i] -= a * g[i];
    total += w[j] * mse(adapted, tasks[j].psi, tasks[j].y);
  }
  return total;
}

std::uint64_t TestRng::next() {
  s_ ^= s_ >> 12;
  s_ ^= s_ << 25;
  s_ ^= s_ >> 27;
  return s_ * 0x2545F4914F6CDD1DULL;
}

double TestRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(next() >> 11) * 0x1.0p-53);
}

double TestRng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * uniform());
}

Eigen::MatrixXd TestRng::matrix(Eigen::Index r, Eigen::Index c, double lo, double hi) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = uniform(lo, hi);
  return m;
}

}  // namespace oracle
