#pragma once

#include <optional>
#include <string>
#include <vector>

#include "viewrank/data.hpp"
#include "viewrank/evaluation.hpp"
#include "viewrank/grouping.hpp"
#include "viewrank/scoring.hpp"
#include "viewrank/synthgen.hpp"
#include "viewrank/training.hpp"

namespace viewrank {

struct DatasetConfig {
  std::optional<std::string> interactions, videos, train, validation, test, ground_truth;
  PreprocessConfig preprocess;
  std::string group_preset = "kuaishou";
  std::vector<double> group_boundaries;  // overrides the preset when non-empty
  double positive_fraction = 0.2;        // share of each group above tau
  SplitSpec split;

  GroupScheme scheme() const;
};

struct MethodConfig {
  Method kind = Method::kVldrec;
  std::optional<double> ips_cap;        // capped IPS; defaults to the 95th percentile of 1/length
  std::optional<double> caus_e_lambda;  // CausE; defaults to kDefaultCausELambda
};

inline constexpr double kDefaultCausELambda = 0.01;

struct ModelConfig {
  std::size_t embedding_dim = 8;
  HeadConfig head;
  InferenceHead inference = InferenceHead::kBlend;
};

struct EvaluationConfig {
  EvalConfig metrics;
  std::optional<std::string> category_file;
};

// Axes of the sequential grid search. An empty axis keeps the base value.
struct GridConfig {
  std::vector<double> learning_rate, dropout, alpha, beta;
};

struct RunConfig {
  DatasetConfig dataset;
  MethodConfig method;
  ModelConfig model;
  TrainConfig train;
  EvaluationConfig evaluation;
  GridConfig grid;
  SynthConfig synth;

  // Cross-field checks; throws UsageError naming the field.
  void validate() const;
};

// Parses a JSON document. Unknown keys and type mismatches are UsageErrors
// naming the dotted field path. Missing keys keep their defaults.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Fully resolved configuration as JSON text, used in manifests.
std::string config_json(const RunConfig& cfg);

// Default search values for one axis name (learning_rate, dropout, alpha, beta).
std::vector<double> grid_preset(const std::string& axis);

}  // namespace viewrank
