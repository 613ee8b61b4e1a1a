#include <doctest.h>

#include "ipbo/core.hpp"
#include "ipbo/rng.hpp"
#include "test_util.hpp"

using namespace ipbo;

TEST_CASE("standardize centers and scales") {
  Matrix x(3, 1), y(3, 1);
  x << 1, 2, 3;
  y << 4, 5, 6;
  const Dataset ds = standardize(x, y);
  CHECK(ds.standardized);
  CHECK(ds.x.col(0).mean() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ds.x.col(0).squaredNorm() / 2.0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ds.y(0, 0) == doctest::Approx(-1.0));
  CHECK(ds.y(1, 0) == doctest::Approx(0.0));
  CHECK(ds.y(2, 0) == doctest::Approx(1.0));
  CHECK(ds.x_means(0) == doctest::Approx(2.0));
  CHECK(ds.x_scales(0) == doctest::Approx(1.0));
  CHECK(ds.y_means(0) == doctest::Approx(5.0));
}

TEST_CASE("standardize is idempotent on its own output") {
  Rng rng(7);
  const Dataset ds = testing::random_dataset(rng, 40, 6, 3);
  const Dataset again = standardize(ds.x, ds.y);
  CHECK((again.x - ds.x).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((again.y - ds.y).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("standardize rejects constant columns and shape mismatches") {
  Matrix x(3, 1), y(3, 1), y_short(2, 1);
  x << 5, 5, 5;
  y << 1, 2, 3;
  CHECK_THROWS_AS(standardize(x, y), ZeroVarianceColumn);
  x << 1, 2, 3;
  y_short << 1, 2;
  CHECK_THROWS_AS(standardize(x, y_short), ShapeMismatch);
}

TEST_CASE("soft threshold examples") {
  CHECK(soft_threshold(3.0, 1.0) == doctest::Approx(2.0));
  CHECK(soft_threshold(-0.5, 1.0) == 0.0);
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const double z = 10.0 * (rng.uniform() - 0.5);
    CHECK(soft_threshold(z, 0.0) == z);
  }
}

TEST_CASE("soft threshold is odd, nonexpansive and monotone") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double z = 20.0 * (rng.uniform() - 0.5);
    const double zp = 20.0 * (rng.uniform() - 0.5);
    const double lam = 5.0 * rng.uniform();
    CHECK(soft_threshold(-z, lam) == doctest::Approx(-soft_threshold(z, lam)).epsilon(1e-12));
    CHECK(std::abs(soft_threshold(z, lam) - soft_threshold(zp, lam)) <= std::abs(z - zp) + 1e-12);
    if (z <= zp) CHECK(soft_threshold(z, lam) <= soft_threshold(zp, lam) + 1e-12);
  }
}

TEST_CASE("unstandardize with identity scaling keeps coefficients") {
  Dataset ds;
  ds.x = Matrix::Zero(2, 2);
  ds.y = Matrix::Zero(2, 1);
  ds.x_means = Vector::Zero(2);
  ds.x_scales = Vector::Ones(2);
  ds.y_means = Vector::Zero(1);
  ds.standardized = true;
  CoefficientFit fit;
  fit.b_hat = Matrix(2, 1);
  fit.b_hat << 1.5, -2.0;
  const RawCoefficients raw = unstandardize_coefficients(fit, ds);
  CHECK((raw.b - fit.b_hat).cwiseAbs().maxCoeff() == 0.0);
  CHECK(raw.intercept(0) == 0.0);
}

TEST_CASE("unstandardize of the null model returns the response means") {
  Rng rng(5);
  const Dataset ds = testing::random_dataset(rng, 30, 4, 2);
  CoefficientFit fit;
  fit.b_hat = Matrix::Zero(4, 2);
  const RawCoefficients raw = unstandardize_coefficients(fit, ds);
  CHECK((raw.b.array() == 0.0).all());
  CHECK((raw.intercept - ds.y_means).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("unstandardize divides by the predictor scale") {
  Dataset ds;
  ds.x = Matrix::Zero(2, 1);
  ds.y = Matrix::Zero(2, 1);
  ds.x_means = Vector::Zero(1);
  ds.x_scales = Vector::Constant(1, 2.0);
  ds.y_means = Vector::Zero(1);
  ds.standardized = true;
  CoefficientFit fit;
  fit.b_hat = Matrix::Constant(1, 1, 1.0);
  const RawCoefficients raw = unstandardize_coefficients(fit, ds);
  CHECK(raw.b(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("raw and standardized predictions agree") {
  Rng rng(17);
  const Matrix x_raw = 3.0 * rng.normal_matrix(25, 5) +
                       Matrix::Constant(25, 5, 1.0) * 7.0;
  const Matrix y_raw = rng.normal_matrix(25, 3);
  const Dataset ds = standardize(x_raw, y_raw);
  CoefficientFit fit;
  fit.b_hat = rng.normal_matrix(5, 3);
  const RawCoefficients raw = unstandardize_coefficients(fit, ds);
  const Matrix pred_raw = (x_raw * raw.b).rowwise() + raw.intercept.transpose();
  const Matrix pred_std = (ds.x * fit.b_hat).rowwise() + ds.y_means.transpose();
  CHECK((pred_raw - pred_std).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("support helpers match the nonzero pattern") {
  CoefficientFit fit;
  fit.b_hat = Matrix::Zero(3, 2);
  fit.b_hat(0, 0) = 1.0;
  fit.b_hat(2, 1) = -2.0;
  const auto support = fit.support();
  REQUIRE(support.size() == 2);
  CHECK(support[0] == std::pair<Index, Index>{0, 0});
  CHECK(support[1] == std::pair<Index, Index>{2, 1});
  const auto per_resp = fit.per_response_support();
  CHECK(per_resp[0] == std::vector<Index>{0});
  CHECK(per_resp[1] == std::vector<Index>{2});
  CHECK(fit.support_size() == 2);
  CHECK(fit.row_support() == std::vector<Index>{0, 2});
}
