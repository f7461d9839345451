#pragma once

#include <optional>

#include "viewrank/config.hpp"
#include "viewrank/data.hpp"
#include "viewrank/sampling.hpp"
#include "viewrank/training.hpp"

namespace viewrank {

struct FitOutput {
  TrainResult result;
  GroupScheme scheme;               // carries tau when the method samples by group
  std::optional<LabelingConfig> labeling;
  std::optional<double> ips_cap;    // resolved cap for the capped IPS variants
  std::optional<double> caus_e_lambda;
};

bool uses_length_groups(Method m);

// Labeling settings with tau computed on `train` at the configured positive
// fraction (tau = percentile at level 1 - positive_fraction).
LabelingConfig labeling_for(const RunConfig& cfg, const Dataset& train);

// Initializes the networks for cfg.method and trains them on `train`, with
// early stopping on `validation` (scored against `validation_truth` when set).
FitOutput fit(const RunConfig& cfg, const Dataset& train, const Dataset& validation,
              const TruthFn& validation_truth = {});

}  // namespace viewrank
