#pragma once

#include <span>
#include <vector>

namespace viewrank {

// Percentile with linear interpolation between closest ranks (the
// "linear" rule: position (n - 1) * level in the sorted sample).
// `level` is in [0, 1]. Throws std::invalid_argument on empty input.
double percentile(std::vector<double> values, double level);

// Same as percentile() but assumes `sorted` is already ascending.
double percentile_sorted(std::span<const double> sorted, double level);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

MeanStd mean_std(std::span<const double> values);

// Ordinary least-squares slope of y against x.
double least_squares_slope(std::span<const double> x, std::span<const double> y);

}  // namespace viewrank
