#include <doctest.h>

#include <cmath>

#include "toggle/gp.hpp"

using namespace toggle;

TEST_CASE("constant data fits a constant posterior") {
  Eigen::MatrixXd X(2, 1);
  X << 0.0, 1.0;
  Eigen::VectorXd y(2);
  y << 3.0, 3.0;
  GpSurrogate gp = GpSurrogate::fit(X, y);
  Eigen::VectorXd mid(1);
  mid << 0.5;
  CHECK(gp.predict(mid).mean == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("posterior nearly interpolates observations") {
  Eigen::MatrixXd X(4, 2);
  X << 0, 0, 0, 1, 1, 0, 1, 1;
  Eigen::VectorXd y(4);
  y << 1.0, 2.0, -1.0, 0.5;
  GpSurrogate gp = GpSurrogate::fit(X, y);
  for (int i = 0; i < 4; ++i) {
    auto post = gp.predict(X.row(i).transpose());
    // interpolation up to the jitter scale
    CHECK(std::abs(post.mean - y[i]) <= 3.0 * std::sqrt(gp.jitter()) + 1e-6);
  }
}

TEST_CASE("variance grows away from the data") {
  Eigen::MatrixXd X(3, 1);
  X << 0.0, 0.5, 1.0;
  Eigen::VectorXd y(3);
  y << 0.0, 1.0, 0.0;
  GpSurrogate gp = GpSurrogate::fit(X, y);
  Eigen::VectorXd at(1), far(1);
  at << 0.5;
  far << 10.0;
  CHECK(gp.predict_standardized(at).var <= gp.predict_standardized(far).var);
}

TEST_CASE("conflicting duplicates average through jitter") {
  Eigen::MatrixXd X(2, 1);
  X << 0.3, 0.3;
  Eigen::VectorXd y(2);
  y << 1.0, 2.0;
  GpSurrogate gp = GpSurrogate::fit(X, y);
  Eigen::VectorXd at(1);
  at << 0.3;
  // closed-form two-point posterior with identical inputs pulls the mean to
  // the average of the conflicting targets
  CHECK(gp.predict(at).mean == doctest::Approx(1.5).epsilon(0.05));
}

TEST_CASE("standardization round trips") {
  Eigen::MatrixXd X(3, 1);
  X << 0.0, 0.5, 1.0;
  Eigen::VectorXd y(3);
  y << 10.0, 20.0, 40.0;
  GpSurrogate gp = GpSurrogate::fit(X, y);
  CHECK(gp.destandardize(gp.standardize(17.0)) == doctest::Approx(17.0));
}

TEST_CASE("normal pdf and cdf reference values") {
  CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-9));
  CHECK(normal_cdf(-8.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("expected improvement closed form") {
  // EI = (best - mean) * Phi(z) + sd * phi(z), z = (best - mean) / sd
  double mean = 1.0, var = 4.0, best = 2.0;
  double sd = 2.0, z = (best - mean) / sd;
  double expected = (best - mean) * normal_cdf(z) + sd * normal_pdf(z);
  CHECK(expected_improvement(mean, var, best) == doctest::Approx(expected).epsilon(1e-12));
  // degenerate variance: improvement is the positive part
  CHECK(expected_improvement(1.0, 0.0, 2.0) == doctest::Approx(1.0));
  CHECK(expected_improvement(3.0, 0.0, 2.0) == doctest::Approx(0.0));
}
