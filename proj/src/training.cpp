#include "viewrank/training.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "viewrank/error.hpp"
#include "viewrank/evaluation.hpp"

namespace viewrank {

double bpr_loss(double score_pos, double score_neg) {
  if (!std::isfinite(score_pos) || !std::isfinite(score_neg)) throw NumericError("bpr_loss: non-finite score");
  const double x = score_neg - score_pos;
  // softplus(x) = max(x, 0) + log1p(exp(-|x|))
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double bpr_loss_slope(double diff) {
  // -sigmoid(-diff), computed without overflow
  if (diff >= 0.0) {
    const double e = std::exp(-diff);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(diff));
}

void LossWeights::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("train.alpha must be in [0, 1]");
}

BatchLoss batch_loss(const ModelParams& params, const Dataset& train, std::span<const TrainingTriple> triples,
                     const LossWeights& weights, Rng& rng, bool training, Gradients* grads) {
  std::size_t n1 = 0, n2 = 0;
  for (const auto& t : triples) {
    n1 += t.general.has_value();
    n2 += t.grouped.has_value();
  }
  const double alpha = weights.alpha;
  BatchLoss out;
  ForwardTrace tp, tn;
  auto pair_term = [&](HeadId head, const OrientedPair& pair, double scale) {
    const Interaction& pos = train.interaction(pair.positive);
    const Interaction& neg = train.interaction(pair.negative);
    const bool trace = grads != nullptr && scale != 0.0;
    const double sp = score(params, head, pos.user, pos.video, training, &rng, trace ? &tp : nullptr);
    const double sn = score(params, head, neg.user, neg.video, training, &rng, trace ? &tn : nullptr);
    if (trace) {
      const double g = scale * bpr_loss_slope(sp - sn);
      backward(params, head, tp, g, *grads);
      backward(params, head, tn, -g, *grads);
    }
    return bpr_loss(sp, sn);
  };
  const double s1 = n1 ? alpha / static_cast<double>(n1) : 0.0;
  const double s2 = n2 ? (1.0 - alpha) / static_cast<double>(n2) : 0.0;
  for (const auto& t : triples) {
    if (t.general) out.general += pair_term(HeadId::kF, *t.general, s1);
    if (t.grouped) out.grouped += pair_term(HeadId::kFUn, *t.grouped, s2);
  }
  if (n1) out.general /= static_cast<double>(n1);
  if (n2) out.grouped /= static_cast<double>(n2);
  out.total = alpha * out.general + (1.0 - alpha) * out.grouped;
  return out;
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 long step, double learning_rate, const AdamConfig& cfg) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    param[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

namespace {

void require_finite(std::span<const double> g, const std::string& name) {
  for (double x : g)
    if (!std::isfinite(x)) throw NumericError("non-finite gradient in parameter '" + name + "'");
}

void lazy_rows(RowMatrix& p, const RowMatrix& g, RowMatrix& m, RowMatrix& v, std::span<const std::uint32_t> rows,
               long step, double lr, const AdamConfig& cfg) {
  const auto cols = static_cast<std::size_t>(p.cols());
  for (auto r : rows) {
    auto row = [&](auto& mat) { return std::span<double>(mat.row(r).data(), cols); };
    adam_update(row(p), std::span<const double>(g.row(r).data(), cols), row(m), row(v), step, lr, cfg);
  }
}

void check_rows(const RowMatrix& g, std::span<const std::uint32_t> rows, const char* name) {
  const auto cols = static_cast<std::size_t>(g.cols());
  for (auto r : rows)
    require_finite(std::span<const double>(g.row(r).data(), cols), std::string(name) + "[" + std::to_string(r) + "]");
}

}  // namespace

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, double learning_rate,
               const AdamConfig& cfg) {
  // Validate everything before mutating anything.
  auto& g = const_cast<Gradients&>(grads);
  for_each_array(g, [&](const std::string& name, std::span<double> values) {
    if (name.rfind("emb.", 0) != 0) require_finite(values, name);
  });
  check_rows(grads.emb.user, grads.touched_users, "emb.user");
  check_rows(grads.emb.video, grads.touched_videos, "emb.video");
  check_rows(grads.emb.length, grads.touched_lengths, "emb.length");
  ++state.step;
  lazy_rows(params.emb.user, grads.emb.user, state.m.emb.user, state.v.emb.user, grads.touched_users,
            state.step, learning_rate, cfg);
  lazy_rows(params.emb.video, grads.emb.video, state.m.emb.video, state.v.emb.video, grads.touched_videos,
            state.step, learning_rate, cfg);
  lazy_rows(params.emb.length, grads.emb.length, state.m.emb.length, state.v.emb.length, grads.touched_lengths,
            state.step, learning_rate, cfg);
  for (HeadId id : {HeadId::kF, HeadId::kFUn}) {
    auto& p = params.head(id).layers;
    const auto& gl = grads.head(id).layers;
    auto& ml = state.m.head(id).layers;
    auto& vl = state.v.head(id).layers;
    for (std::size_t l = 0; l < p.size(); ++l) {
      auto flat = [](auto& x) { return std::span<double>(x.data(), static_cast<std::size_t>(x.size())); };
      auto cflat = [](const auto& x) {
        return std::span<const double>(x.data(), static_cast<std::size_t>(x.size()));
      };
      adam_update(flat(p[l].weight), cflat(gl[l].weight), flat(ml[l].weight), flat(vl[l].weight), state.step,
                  learning_rate, cfg);
      adam_update(flat(p[l].bias), cflat(gl[l].bias), flat(ml[l].bias), flat(vl[l].bias), state.step,
                  learning_rate, cfg);
    }
  }
}

MultiTaskObjective::MultiTaskObjective(const Dataset& train, LabelingConfig labeling, LossWeights weights)
    : train_(train), index_(train, labeling.scheme), labeling_(std::move(labeling)), weights_(weights) {
  labeling_.validate();
  weights_.validate();
}

std::size_t MultiTaskObjective::prepare_epoch(std::uint64_t seed) {
  stream_ = epoch_stream(index_, labeling_, seed);
  return stream_.triples.size();
}

BatchLoss MultiTaskObjective::batch(std::span<const ModelParams> models, std::size_t begin, std::size_t end,
                                    Rng& rng, std::span<Gradients> grads) {
  std::span<const TrainingTriple> triples(stream_.triples.data() + begin, end - begin);
  return batch_loss(models[0], train_, triples, weights_, rng, true, grads.empty() ? nullptr : &grads[0]);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("train.learning_rate must be positive");
  if (batch_size < 1) throw UsageError("train.batch_size must be >= 1");
  if (!(validation_t > 0.0)) throw UsageError("evaluation.validation_t must be positive");
  alpha.validate();
}

double mean_view_time_at_t(const TrainedModel& model, const Dataset& data, double t, const TruthFn& truth) {
  const Catalog& c = data.catalog();
  const auto lists =
      build_ranked_lists(data, [&](UserIndex u, VideoIndex v) { return rank_score(model, c, u, v); }, truth);
  if (lists.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& l : lists) sum += view_time_at_t(l, t);
  return sum / static_cast<double>(lists.size());
}

TrainResult train(Objective& objective, TrainedModel initial, const Dataset& train, const Dataset& validation,
                  const TrainConfig& cfg, const TruthFn& validation_truth) {
  cfg.validate();
  if (train.empty()) throw DataError("training set is empty");
  if (initial.nets.size() != objective.model_count())
    throw UsageError("objective expects " + std::to_string(objective.model_count()) + " networks");

  TrainResult result;
  result.model = initial;
  TrainedModel current = std::move(initial);
  std::vector<AdamState> adam;
  std::vector<Gradients> grads;
  for (const auto& net : current.nets) {
    adam.emplace_back(net);
    grads.emplace_back(net);
  }
  Rng dropout_rng(derive_seed(cfg.seed, 0x64726f70));
  double best = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const std::size_t n = objective.prepare_epoch(derive_seed(cfg.seed, epoch));
    if (n == 0) throw DataError("no training pairs could be generated (every anchor was skipped)");
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      for (auto& g : grads) g.clear();
      const BatchLoss loss = objective.batch(current.nets, begin, end, dropout_rng, grads);
      if (!std::isfinite(loss.total)) throw NumericError("loss became non-finite in epoch " + std::to_string(epoch));
      for (std::size_t m = 0; m < current.nets.size(); ++m)
        adam_step(current.nets[m], grads[m], adam[m], cfg.learning_rate);
      rec.loss += loss.total;
      rec.general += loss.general;
      rec.grouped += loss.grouped;
      ++batches;
    }
    rec.loss /= static_cast<double>(batches);
    rec.general /= static_cast<double>(batches);
    rec.grouped /= static_cast<double>(batches);
    rec.valid_view_time_at_t = mean_view_time_at_t(current, validation, cfg.validation_t, validation_truth);
    result.history.push_back(rec);

    if (validation.empty() || rec.valid_view_time_at_t > best) {
      best = rec.valid_view_time_at_t;
      since_best = 0;
      result.model = current;
      result.best_epoch = epoch;
    } else if (++since_best > cfg.patience) {
      break;
    }
  }
  return result;
}

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history) {
  out << "epoch,L,L1,L2,valid_view_time_at_T\n";
  for (const auto& r : history)
    out << r.epoch << ',' << format_number(r.loss) << ',' << format_number(r.general) << ','
        << format_number(r.grouped) << ',' << format_number(r.valid_view_time_at_t) << '\n';
}

}  // namespace viewrank
