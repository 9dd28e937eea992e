#include "toggle/gp.hpp"

#include <cmath>
#include <limits>

namespace toggle {

namespace {

constexpr double kVarFloor = 1e-12;
constexpr double kJitterStart = 1e-6;
constexpr double kJitterCap = 1e-2;

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, double lengthscale, double signal_var) {
  const long n = X.rows();
  Eigen::MatrixXd K(n, n);
  const double inv2l2 = 1.0 / (2.0 * lengthscale * lengthscale);
  for (long i = 0; i < n; ++i) {
    K(i, i) = signal_var;
    for (long j = i + 1; j < n; ++j) {
      double d2 = (X.row(i) - X.row(j)).squaredNorm();
      double v = signal_var * std::exp(-d2 * inv2l2);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

}  // namespace

GpSurrogate GpSurrogate::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() < 2) throw GpError("GP fit requires at least 2 observations");
  if (X.rows() != y.size()) throw GpError("GP fit: X/y size mismatch");

  GpSurrogate gp;
  gp.X_ = X;
  gp.y_mean_ = y.mean();
  double sd = std::sqrt((y.array() - gp.y_mean_).square().mean());
  gp.y_sd_ = sd > 1e-12 ? sd : 1.0;
  gp.y_std_ = ((y.array() - gp.y_mean_) / gp.y_sd_).matrix();

  static const double kLengthscales[] = {0.1, 0.2, 0.5, 1.0, 2.0};
  static const double kSignalVars[] = {0.25, 1.0, 4.0};

  const long n = X.rows();
  double best_lml = -std::numeric_limits<double>::infinity();
  double best_ls = 1.0, best_sv = 1.0, best_jitter = kJitterStart;
  Eigen::LLT<Eigen::MatrixXd> best_llt;
  bool found = false;

  for (double ls : kLengthscales) {
    for (double sv : kSignalVars) {
      Eigen::MatrixXd K = kernel_matrix(X, ls, sv);
      double jitter = kJitterStart;
      Eigen::LLT<Eigen::MatrixXd> llt;
      while (jitter <= kJitterCap) {
        Eigen::MatrixXd Kj = K + jitter * Eigen::MatrixXd::Identity(n, n);
        llt.compute(Kj);
        if (llt.info() == Eigen::Success) break;
        jitter *= 10.0;
      }
      if (llt.info() != Eigen::Success) continue;

      Eigen::VectorXd alpha = llt.solve(gp.y_std_);
      double log_det = 0.0;
      const Eigen::MatrixXd& lower = llt.matrixLLT();
      for (long i = 0; i < n; ++i) log_det += std::log(lower(i, i));
      log_det *= 2.0;
      double lml = -0.5 * gp.y_std_.dot(alpha) - 0.5 * log_det -
                   0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
      if (lml > best_lml) {
        best_lml = lml;
        best_ls = ls;
        best_sv = sv;
        best_jitter = jitter;
        best_llt = llt;
        found = true;
      }
    }
  }
  if (!found) throw GpError("kernel matrix not positive definite for any jitter up to cap");

  gp.length_scales_ = Eigen::VectorXd::Constant(X.cols(), best_ls);
  gp.signal_var_ = best_sv;
  gp.jitter_ = best_jitter;
  gp.llt_ = best_llt;
  gp.alpha_ = gp.llt_.solve(gp.y_std_);
  return gp;
}

double GpSurrogate::kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  double d2 = 0.0;
  for (long i = 0; i < a.size(); ++i) {
    double diff = (a[i] - b[i]) / length_scales_[i];
    d2 += diff * diff;
  }
  return signal_var_ * std::exp(-0.5 * d2);
}

GpSurrogate::Posterior GpSurrogate::predict_standardized(const Eigen::VectorXd& x) const {
  const long n = X_.rows();
  Eigen::VectorXd k_star(n);
  for (long i = 0; i < n; ++i) k_star[i] = kernel(x, X_.row(i));
  Eigen::VectorXd v = llt_.matrixL().solve(k_star);
  Posterior p;
  p.mean = k_star.dot(alpha_);
  p.var = std::max(kVarFloor, signal_var_ + jitter_ - v.squaredNorm());
  return p;
}

GpSurrogate::Posterior GpSurrogate::predict(const Eigen::VectorXd& x) const {
  Posterior p = predict_standardized(x);
  p.mean = destandardize(p.mean);
  p.var = std::max(kVarFloor, p.var * y_sd_ * y_sd_);
  return p;
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double expected_improvement(double mean, double var, double best) {
  double sigma = std::sqrt(std::max(var, kVarFloor));
  double delta = best - mean;
  double z = delta / sigma;
  return delta * normal_cdf(z) + sigma * normal_pdf(z);
}

}  // namespace toggle
