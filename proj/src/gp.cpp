#include "flowforge/gp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace flowforge {

namespace {

constexpr double kJitters[] = {0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4};

Eigen::MatrixXd covariance(const Eigen::MatrixXd& X, const GpHyper& h) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = h.signal_variance + h.noise_variance;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double k = matern52((X.row(i) - X.row(j)).norm(), h.length_scale, h.signal_variance);
      K(i, j) = K(j, i) = k;
    }
  }
  return K;
}

// Factorizes K with the smallest jitter that works; false when none does.
bool factorize(Eigen::MatrixXd K, Eigen::LLT<Eigen::MatrixXd>& llt, double& jitter) {
  for (double j : kJitters) {
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += j;
    llt.compute(Kj);
    if (llt.info() != Eigen::Success) continue;
    const auto d = llt.matrixLLT().diagonal();
    if ((d.array() > 0.0).all() && d.allFinite()) {
      jitter = j;
      return true;
    }
  }
  return false;
}

double lml_from(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& y, Eigen::VectorXd& alpha) {
  alpha = llt.solve(y);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double n = static_cast<double>(y.size());
  return -0.5 * y.dot(alpha) - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

double matern52(double r, double length_scale, double signal_variance) {
  const double a = std::sqrt(5.0) * r / length_scale;
  return signal_variance * (1.0 + a + a * a / 3.0) * std::exp(-a);
}

double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpHyper& h) {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  if (!factorize(covariance(X, h), llt, jitter)) return -std::numeric_limits<double>::infinity();
  Eigen::VectorXd alpha;
  const double v = lml_from(llt, y, alpha);
  return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
}

GpModel GpModel::condition(Eigen::MatrixXd X, Eigen::VectorXd y, const GpHyper& h) {
  if (X.rows() < 1 || X.rows() != y.size()) throw std::invalid_argument("GP needs matching non-empty X and y");
  if (!(h.length_scale > 0.0 && h.signal_variance > 0.0 && h.noise_variance >= 0.0))
    throw std::invalid_argument("GP hyperparameters must be positive");
  GpModel m;
  m.X_ = std::move(X);
  m.y_ = std::move(y);
  m.hyper_ = h;
  if (!factorize(covariance(m.X_, h), m.chol_, m.jitter_))
    throw std::runtime_error("GP covariance is singular even after jitter escalation");
  m.lml_ = lml_from(m.chol_, m.y_, m.alpha_);
  m.fitted_ = true;
  return m;
}

GpModel GpModel::fit(Eigen::MatrixXd X, Eigen::VectorXd y, std::uint64_t seed, const GpFitBounds& b) {
  if (X.rows() < 2 || X.rows() != y.size()) throw std::invalid_argument("GP fit needs at least two observations");
  using P = std::array<double, 3>;  // log ell, log sf2, log sn2
  const P lo{std::log(b.length_scale_min), std::log(b.signal_variance_min), std::log(b.noise_variance_min)};
  const P hi{std::log(b.length_scale_max), std::log(b.signal_variance_max), std::log(b.noise_variance_max)};
  auto objective = [&](const P& p) {
    return log_marginal_likelihood(X, y, GpHyper{std::exp(p[0]), std::exp(p[1]), std::exp(p[2])});
  };

  // Coarse log-spaced grid, then the best few plus random starts are refined.
  std::vector<std::pair<double, P>> starts;
  constexpr int kGrid[3] = {7, 4, 5};
  for (int i = 0; i < kGrid[0]; ++i)
    for (int j = 0; j < kGrid[1]; ++j)
      for (int k = 0; k < kGrid[2]; ++k) {
        P p{lo[0] + (hi[0] - lo[0]) * i / (kGrid[0] - 1), lo[1] + (hi[1] - lo[1]) * j / (kGrid[1] - 1),
            lo[2] + (hi[2] - lo[2]) * k / (kGrid[2] - 1)};
        starts.emplace_back(objective(p), p);
      }
  std::stable_sort(starts.begin(), starts.end(), [](const auto& a, const auto& c) { return a.first > c.first; });
  starts.resize(3);
  std::mt19937_64 rng(mix(seed));
  for (int s = 0; s < 2; ++s) {
    P p;
    for (int d = 0; d < 3; ++d) p[d] = lo[d] + (hi[d] - lo[d]) * unit(rng);
    starts.emplace_back(objective(p), p);
  }

  P best = starts.front().second;
  double best_val = -std::numeric_limits<double>::infinity();
  for (auto [val, p] : starts) {
    for (double step = 0.5; step > 0.01; step *= 0.5) {
      bool improved = true;
      while (improved) {
        improved = false;
        for (int d = 0; d < 3; ++d)
          for (double dir : {1.0, -1.0}) {
            P q = p;
            q[d] = std::clamp(q[d] + dir * step, lo[d], hi[d]);
            if (q[d] == p[d]) continue;
            const double v = objective(q);
            if (v > val) {
              val = v;
              p = q;
              improved = true;
            }
          }
      }
    }
    if (val > best_val) {
      best_val = val;
      best = p;
    }
  }
  if (!std::isfinite(best_val)) throw std::runtime_error("GP hyperparameter search found no factorizable covariance");
  return condition(std::move(X), std::move(y), GpHyper{std::exp(best[0]), std::exp(best[1]), std::exp(best[2])});
}

std::pair<double, double> GpModel::predict(const Eigen::VectorXd& x) const {
  if (!fitted_) throw std::logic_error("GP model has not been fitted");
  if (x.size() != X_.cols()) throw std::invalid_argument("GP query has the wrong dimension");
  Eigen::VectorXd k(X_.rows());
  for (Eigen::Index i = 0; i < X_.rows(); ++i)
    k(i) = matern52((X_.row(i).transpose() - x).norm(), hyper_.length_scale, hyper_.signal_variance);
  const double mean = k.dot(alpha_);
  const Eigen::VectorXd v = chol_.matrixL().solve(k);
  const double var = hyper_.signal_variance - v.squaredNorm();
  return {mean, std::max(0.0, var)};
}

double expected_improvement(double mean, double sigma, double best, double xi) {
  if (sigma < 0.0) throw std::invalid_argument("expected improvement needs sigma >= 0");
  const double d = mean - best - xi;
  if (sigma == 0.0) return std::max(0.0, d);
  const double z = d / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return std::max(0.0, d * cdf + sigma * pdf);
}

}  // namespace flowforge
