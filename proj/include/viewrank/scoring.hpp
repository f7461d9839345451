#pragma once

#include <optional>
#include <string>
#include <vector>

#include "viewrank/model.hpp"

namespace viewrank {

enum class Method {
  kVldrec,
  kTReg,
  kRReg,
  kTRank,
  kRRank,
  kIps,
  kIpsC,
  kIpsCn,
  kIpsCnsr,
  kCausE,
};

const char* method_name(Method m);
std::optional<Method> parse_method(const std::string& name);

// Which head(s) produce ranking scores for the multi-task model.
enum class InferenceHead { kF, kFUn, kBlend };

const char* inference_head_name(InferenceHead h);
std::optional<InferenceHead> parse_inference_head(const std::string& name);

// Trained networks plus the rule that turns them into ranking scores.
// CausE keeps two networks (main, auxiliary); every other method keeps one.
struct TrainedModel {
  Method method = Method::kVldrec;
  InferenceHead inference = InferenceHead::kBlend;
  double blend_alpha = 0.5;  // weight of head f under kBlend
  std::vector<ModelParams> nets;
};

// Ranking score used for evaluation. Regression on progress is turned into
// predicted view time by multiplying with the video length.
double rank_score(const TrainedModel& model, const Catalog& catalog, UserIndex user, VideoIndex video);

}  // namespace viewrank
