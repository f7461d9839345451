#include "viewrank/scoring.hpp"

#include <stdexcept>

#include "viewrank/baselines.hpp"

namespace viewrank {

namespace {

constexpr std::pair<Method, const char*> kMethodNames[] = {
    {Method::kVldrec, "vldrec"}, {Method::kTReg, "t_reg"},       {Method::kRReg, "r_reg"},
    {Method::kTRank, "t_rank"},  {Method::kRRank, "r_rank"},     {Method::kIps, "ips"},
    {Method::kIpsC, "ips_c"},    {Method::kIpsCn, "ips_cn"},     {Method::kIpsCnsr, "ips_cnsr"},
    {Method::kCausE, "caus_e"},
};

}  // namespace

const char* method_name(Method m) {
  for (const auto& [k, name] : kMethodNames)
    if (k == m) return name;
  return "?";
}

std::optional<Method> parse_method(const std::string& name) {
  for (const auto& [k, n] : kMethodNames)
    if (name == n) return k;
  return std::nullopt;
}

const char* inference_head_name(InferenceHead h) {
  switch (h) {
    case InferenceHead::kF: return "f";
    case InferenceHead::kFUn: return "f_un";
    case InferenceHead::kBlend: return "blend";
  }
  return "?";
}

std::optional<InferenceHead> parse_inference_head(const std::string& name) {
  if (name == "f") return InferenceHead::kF;
  if (name == "f_un") return InferenceHead::kFUn;
  if (name == "blend") return InferenceHead::kBlend;
  return std::nullopt;
}

double rank_score(const TrainedModel& model, const Catalog& catalog, UserIndex user, VideoIndex video) {
  if (model.nets.empty()) throw std::logic_error("rank_score: model has no networks");
  const ModelParams& net = model.nets.front();
  switch (model.method) {
    case Method::kTReg:
    case Method::kRReg:
      return regression_rank_score(model.method, score(net, HeadId::kF, user, video),
                                   catalog.video(video).length);
    case Method::kVldrec:
      switch (model.inference) {
        case InferenceHead::kF: return score(net, HeadId::kF, user, video);
        case InferenceHead::kFUn: return score(net, HeadId::kFUn, user, video);
        case InferenceHead::kBlend:
          return model.blend_alpha * score(net, HeadId::kF, user, video) +
                 (1.0 - model.blend_alpha) * score(net, HeadId::kFUn, user, video);
      }
      break;
    default:
      break;
  }
  return score(net, HeadId::kF, user, video);
}

}  // namespace viewrank
