#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "viewrank/stats.hpp"

using namespace viewrank;

TEST_CASE("percentile follows the linear rule") {
  // Reference values computed by hand with position (n - 1) * q.
  CHECK(percentile({1, 2, 3, 4}, 0.8) == doctest::Approx(3.4).epsilon(1e-14));
  CHECK(percentile({15, 20, 35, 40, 50}, 0.4) == doctest::Approx(29.0).epsilon(1e-14));
  CHECK(percentile({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}, 0.8) == doctest::Approx(0.82).epsilon(1e-14));
  CHECK(percentile({0.2, 0.8}, 0.5) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(percentile({3, 1, 2}, 0.0) == 1.0);
  CHECK(percentile({3, 1, 2}, 1.0) == 3.0);
  CHECK(percentile({7}, 0.3) == 7.0);
}

TEST_CASE("percentile rejects bad input") {
  CHECK_THROWS_AS(percentile({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(percentile({1, 2}, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(percentile({1, 2}, -0.1), std::invalid_argument);
}

TEST_CASE("mean and population std") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  const MeanStd ms = mean_std(v);
  CHECK(ms.mean == doctest::Approx(5.0));
  CHECK(ms.std == doctest::Approx(2.0));
  const MeanStd empty = mean_std(std::vector<double>{});
  CHECK(empty.mean == 0.0);
  CHECK(empty.std == 0.0);
}

TEST_CASE("least squares slope") {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  CHECK(least_squares_slope(x, y) == doctest::Approx(2.0));
  const std::vector<double> y2{4, 4, 4, 4};
  CHECK(least_squares_slope(x, y2) == doctest::Approx(0.0));
}
