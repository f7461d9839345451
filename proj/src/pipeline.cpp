#include "viewrank/pipeline.hpp"

#include <memory>

#include "viewrank/baselines.hpp"
#include "viewrank/error.hpp"

namespace viewrank {

bool uses_length_groups(Method m) { return m == Method::kVldrec || m == Method::kCausE; }

LabelingConfig labeling_for(const RunConfig& cfg, const Dataset& train) {
  LabelingConfig l = cfg.train.labeling;
  l.scheme = compute_tau(train, cfg.dataset.scheme(), 1.0 - cfg.dataset.positive_fraction);
  l.validate();
  return l;
}

FitOutput fit(const RunConfig& cfg, const Dataset& train, const Dataset& validation,
              const TruthFn& validation_truth) {
  cfg.validate();
  if (train.empty()) throw DataError("training set is empty");
  if (&train.catalog() != &validation.catalog() && !validation.empty())
    throw DataError("training and validation sets must share one catalog");

  FitOutput out;
  out.scheme = cfg.dataset.scheme();
  const Method kind = cfg.method.kind;
  TrainConfig tc = cfg.train;
  if (uses_length_groups(kind)) {
    out.labeling = labeling_for(cfg, train);
    out.scheme = out.labeling->scheme;
    tc.labeling = *out.labeling;
  }

  std::unique_ptr<Objective> objective;
  switch (kind) {
    case Method::kVldrec:
      objective = std::make_unique<MultiTaskObjective>(train, *out.labeling, cfg.train.alpha);
      break;
    case Method::kTReg:
    case Method::kRReg:
      objective = std::make_unique<RegressionObjective>(train, kind);
      break;
    case Method::kTRank:
      objective = std::make_unique<RankingObjective>(train, RankTarget::kTime, kind, std::nullopt);
      break;
    case Method::kRRank:
      objective = std::make_unique<RankingObjective>(train, RankTarget::kProgress, kind, std::nullopt);
      break;
    case Method::kIps:
    case Method::kIpsC:
    case Method::kIpsCn:
    case Method::kIpsCnsr:
      if (is_capped_ips(kind)) out.ips_cap = cfg.method.ips_cap ? *cfg.method.ips_cap : default_ips_cap(train);
      objective = std::make_unique<RankingObjective>(train, RankTarget::kTime, kind, out.ips_cap);
      break;
    case Method::kCausE:
      out.caus_e_lambda = cfg.method.caus_e_lambda.value_or(kDefaultCausELambda);
      objective = std::make_unique<CausEObjective>(train, *out.labeling, *out.caus_e_lambda);
      break;
  }

  const Catalog& catalog = train.catalog();
  FeatureSpec spec;
  spec.user_vocab = catalog.user_count();
  spec.video_vocab = catalog.video_count();
  spec.length_buckets = out.scheme.group_count();
  spec.embedding_dim = cfg.model.embedding_dim;
  const auto buckets = video_groups(catalog, out.scheme);

  TrainedModel initial;
  initial.method = kind;
  initial.inference = cfg.model.inference;
  initial.blend_alpha = cfg.train.alpha.alpha;
  for (std::size_t m = 0; m < objective->model_count(); ++m)
    initial.nets.push_back(init_params(spec, cfg.model.head, buckets, derive_seed(cfg.train.seed, 0x696e6974 + m)));

  out.result = viewrank::train(*objective, std::move(initial), train, validation, tc, validation_truth);
  return out;
}

}  // namespace viewrank
