#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "viewrank/data.hpp"
#include "viewrank/evaluation.hpp"
#include "viewrank/model.hpp"
#include "viewrank/sampling.hpp"
#include "viewrank/scoring.hpp"

namespace viewrank {

// -ln(sigmoid(pos - neg)), evaluated as softplus(neg - pos). Throws
// NumericError on non-finite input.
double bpr_loss(double score_pos, double score_neg);

// d bpr_loss / d (pos - neg) = -sigmoid(neg - pos).
double bpr_loss_slope(double diff);

struct LossWeights {
  double alpha = 0.5;  // weight of the general-pair loss L1

  void validate() const;
};

struct BatchLoss {
  double total = 0.0;    // L
  double general = 0.0;  // L1
  double grouped = 0.0;  // L2
};

// Multi-task loss over a batch of triples: L1 is the mean BPR loss of head f
// on general pairs, L2 the mean BPR loss of head f_un on grouped pairs (masked
// pairs are excluded from both numerator and denominator), and
// L = alpha * L1 + (1 - alpha) * L2. When `grads` is non-null the gradient of
// L is accumulated into it.
BatchLoss batch_loss(const ModelParams& params, const Dataset& train, std::span<const TrainingTriple> triples,
                     const LossWeights& weights, Rng& rng, bool training = true, Gradients* grads = nullptr);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam update of a flat parameter array from step `step` (1-based),
// with bias correction.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 long step, double learning_rate, const AdamConfig& cfg = {});

struct AdamState {
  explicit AdamState(const ModelParams& like) : m(like), v(like) {}
  Gradients m;
  Gradients v;
  long step = 0;
};

// Dense update of head parameters; lazy update of the embedding rows touched
// in `grads` (untouched rows keep their stale moments). Throws NumericError
// naming the first parameter array with a non-finite gradient.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, double learning_rate,
               const AdamConfig& cfg = {});

// A training method: produces the work items of an epoch and the loss and
// gradient of a contiguous batch of them.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t model_count() const { return 1; }
  // Prepares the epoch's items; returns their count.
  virtual std::size_t prepare_epoch(std::uint64_t seed) = 0;
  virtual BatchLoss batch(std::span<const ModelParams> models, std::size_t begin, std::size_t end, Rng& rng,
                          std::span<Gradients> grads) = 0;
};

// Length-conditioned multi-task objective over epoch_stream() triples.
class MultiTaskObjective final : public Objective {
 public:
  MultiTaskObjective(const Dataset& train, LabelingConfig labeling, LossWeights weights);

  std::size_t prepare_epoch(std::uint64_t seed) override;
  BatchLoss batch(std::span<const ModelParams> models, std::size_t begin, std::size_t end, Rng& rng,
                  std::span<Gradients> grads) override;

  const EpochStream& stream() const { return stream_; }

 private:
  const Dataset& train_;
  SampleIndex index_;
  LabelingConfig labeling_;
  LossWeights weights_;
  EpochStream stream_;
};

struct TrainConfig {
  double learning_rate = 0.005;
  std::size_t batch_size = 1024;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  LossWeights alpha;
  LabelingConfig labeling;
  std::uint64_t seed = 1;
  double validation_t = 120.0;  // View_Time@T used for early stopping

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double general = 0.0;
  double grouped = 0.0;
  double valid_view_time_at_t = 0.0;
};

struct TrainResult {
  TrainedModel model;  // best-validation parameters
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
};

// Generic epoch loop: Adam over the objective's batches, validation
// View_Time@T after each epoch, early stopping after `patience`
// non-improving epochs. `initial.nets.size()` must equal
// objective.model_count(). `validation_truth` replaces the logged view time
// of validation interactions when set.
TrainResult train(Objective& objective, TrainedModel initial, const Dataset& train, const Dataset& validation,
                  const TrainConfig& cfg, const TruthFn& validation_truth = {});

// Macro-averaged View_Time@T of `model` on `data` (per-user lists built from
// that split's interactions). Returns 0 for an empty split.
double mean_view_time_at_t(const TrainedModel& model, const Dataset& data, double t, const TruthFn& truth = {});

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history);

}  // namespace viewrank
