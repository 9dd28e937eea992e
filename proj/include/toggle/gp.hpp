#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace toggle {

struct GpError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Squared-exponential GP with per-dimension length scales. Targets are
// standardized internally; predictions can be queried on either scale.
class GpSurrogate {
public:
  struct Posterior {
    double mean = 0.0;
    double var = 0.0;  // >= variance floor
  };

  // Hyperparameters picked by maximizing the log marginal likelihood over a
  // fixed multi-start grid. Jitter starts at 1e-6 and escalates x10 up to
  // 1e-2 if the kernel factorization fails.
  static GpSurrogate fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

  Posterior predict_standardized(const Eigen::VectorXd& x) const;
  Posterior predict(const Eigen::VectorXd& x) const;  // on the original scale

  double standardize(double v) const { return (v - y_mean_) / y_sd_; }
  double destandardize(double v) const { return v * y_sd_ + y_mean_; }

  double jitter() const { return jitter_; }
  const Eigen::VectorXd& length_scales() const { return length_scales_; }
  double signal_variance() const { return signal_var_; }
  long n_observations() const { return X_.rows(); }

private:
  double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

  Eigen::MatrixXd X_;
  Eigen::VectorXd y_std_;
  double y_mean_ = 0.0, y_sd_ = 1.0;
  Eigen::VectorXd length_scales_;
  double signal_var_ = 1.0;
  double jitter_ = 1e-6;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
};

// Standard normal pdf/cdf used by the acquisition function.
double normal_pdf(double z);
double normal_cdf(double z);

// Expected improvement for minimization below `best`, for a Gaussian
// posterior N(mean, var).
double expected_improvement(double mean, double var, double best);

}  // namespace toggle
