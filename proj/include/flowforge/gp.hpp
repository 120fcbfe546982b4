#pragma once

#include <cstdint>
#include <utility>

#include <Eigen/Dense>

namespace flowforge {

/// Matérn covariance with smoothness 5/2 at distance r.
double matern52(double r, double length_scale, double signal_variance);

struct GpHyper {
  double length_scale = 0.5;
  double signal_variance = 1.0;
  double noise_variance = 1e-4;
};

struct GpFitBounds {
  double length_scale_min = 0.05, length_scale_max = 2.0;
  double signal_variance_min = 0.1, signal_variance_max = 10.0;
  double noise_variance_min = 1e-6, noise_variance_max = 1e-1;
};

/// Log marginal likelihood of a zero-mean GP; -infinity when the covariance
/// cannot be factorized.
double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpHyper& h);

/// Zero-mean GP regression with an isotropic Matérn-5/2 kernel. Rows of X
/// are inputs in the unit cube.
class GpModel {
 public:
  GpModel() = default;

  /// Fixed hyperparameters. Throws std::runtime_error when the covariance
  /// stays singular after jitter escalation.
  static GpModel condition(Eigen::MatrixXd X, Eigen::VectorXd y, const GpHyper& h);

  /// Maximizes the log marginal likelihood by multi-start coordinate search
  /// in log space. Needs at least two rows.
  static GpModel fit(Eigen::MatrixXd X, Eigen::VectorXd y, std::uint64_t seed, const GpFitBounds& bounds = {});

  /// Posterior mean and variance (clamped at 0). Throws std::logic_error on
  /// an unfitted model.
  std::pair<double, double> predict(const Eigen::VectorXd& x) const;

  bool fitted() const { return fitted_; }
  const GpHyper& hyper() const { return hyper_; }
  double log_likelihood() const { return lml_; }
  double jitter() const { return jitter_; }
  const Eigen::MatrixXd& inputs() const { return X_; }
  const Eigen::VectorXd& targets() const { return y_; }

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  GpHyper hyper_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
  double lml_ = 0.0;
  double jitter_ = 0.0;
  bool fitted_ = false;
};

/// Expected improvement for maximization.
double expected_improvement(double mean, double sigma, double best, double xi);

}  // namespace flowforge
