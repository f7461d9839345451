#pragma once

#include <optional>
#include <span>
#include <vector>

#include "viewrank/data.hpp"
#include "viewrank/model.hpp"
#include "viewrank/sampling.hpp"
#include "viewrank/scoring.hpp"
#include "viewrank/training.hpp"

namespace viewrank {

// Resolved baseline settings. ips_cap is set exactly for the capped IPS
// variants; caus_e_lambda exactly for CausE.
struct BaselineSpec {
  Method kind = Method::kTReg;
  std::optional<double> ips_cap;
  std::optional<double> caus_e_lambda;

  void validate() const;
};

bool is_regression(Method m);
bool is_ips(Method m);
bool is_capped_ips(Method m);

// ---- regression (TReg / RReg) ----

// Squared error against view time (TReg) or play progress (RReg).
double regression_loss(Method kind, double predicted, const Dataset& d, const Interaction& x);

// Predicted view time used for ranking: identity for TReg, predicted
// progress times length for RReg.
double regression_rank_score(Method kind, double predicted, double length);

// ---- ranking (TRank / RRank and the IPS family) ----

enum class RankTarget { kTime, kProgress };

// Draws another interaction of the anchor's user uniformly and orients the
// pair by the larger target value. Returns nullopt on a tie. Throws
// std::invalid_argument when the user has fewer than two interactions.
std::optional<OrientedPair> rank_negative_sampler(const Dataset& d, std::span<const std::size_t> history,
                                                  std::size_t anchor, RankTarget target, Rng& rng);

// Raw inverse-propensity weight 1/length, capped for the capped variants.
double ips_weight(Method kind, double length, std::optional<double> cap);

// Weights for a batch of positive-instance lengths: plain (ips), capped
// (ips_c), capped then divided by the batch mean (ips_cn), or square-root
// smoothed capped weights divided by their batch mean (ips_cnsr). Methods
// outside the IPS family get unit weights.
std::vector<double> ips_weights(Method kind, std::span<const double> lengths, std::optional<double> cap);

// Default cap: 95th percentile of raw weights over the training interactions.
double default_ips_cap(const Dataset& train);

// Weighted mean BPR loss of head f over oriented pairs:
// sum_i w_i * bpr(f(pos_i), f(neg_i)) / n. Reported as L = L1, L2 = 0.
BatchLoss ranking_batch_loss(const ModelParams& params, const Dataset& train, std::span<const OrientedPair> pairs,
                             std::span<const double> weights, Rng& rng, bool training = true,
                             Gradients* grads = nullptr);

// ---- CausE ----

// lambda * sum of squared differences between corresponding embedding rows.
double caus_e_penalty(const EmbeddingTables& main, const EmbeddingTables& aux, double lambda);

// Adds the penalty gradient to both models' embedding gradients (all rows).
void caus_e_penalty_grad(const EmbeddingTables& main, const EmbeddingTables& aux, double lambda, Gradients& main_grads,
                         Gradients& aux_grads);

// ---- objectives ----

class RegressionObjective final : public Objective {
 public:
  RegressionObjective(const Dataset& train, Method kind);
  std::size_t prepare_epoch(std::uint64_t seed) override;
  BatchLoss batch(std::span<const ModelParams> models, std::size_t begin, std::size_t end, Rng& rng,
                  std::span<Gradients> grads) override;

 private:
  const Dataset& train_;
  Method kind_;
  std::vector<std::size_t> order_;
};

// TRank / RRank, optionally IPS-weighted by the positive's video length.
class RankingObjective final : public Objective {
 public:
  RankingObjective(const Dataset& train, RankTarget target, Method weighting, std::optional<double> cap);
  std::size_t prepare_epoch(std::uint64_t seed) override;
  BatchLoss batch(std::span<const ModelParams> models, std::size_t begin, std::size_t end, Rng& rng,
                  std::span<Gradients> grads) override;

  const std::vector<OrientedPair>& pairs() const { return pairs_; }

 private:
  const Dataset& train_;
  RankTarget target_;
  Method weighting_;
  std::optional<double> cap_;
  std::vector<OrientedPair> pairs_;
};

// One ranking pass over shuffled anchors with rank_negative_sampler.
std::vector<OrientedPair> ranking_pairs(const Dataset& train, RankTarget target, std::uint64_t seed);

// Main network trained on general pairs, auxiliary network on within-group
// pairs (both through head f), tied by the embedding penalty.
class CausEObjective final : public Objective {
 public:
  CausEObjective(const Dataset& train, LabelingConfig labeling, double lambda);
  std::size_t model_count() const override { return 2; }
  std::size_t prepare_epoch(std::uint64_t seed) override;
  BatchLoss batch(std::span<const ModelParams> models, std::size_t begin, std::size_t end, Rng& rng,
                  std::span<Gradients> grads) override;

 private:
  const Dataset& train_;
  SampleIndex index_;
  LabelingConfig labeling_;
  double lambda_;
  EpochStream stream_;
};

}  // namespace viewrank
