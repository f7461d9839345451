#include "viewrank/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "viewrank/error.hpp"
#include "viewrank/stats.hpp"

namespace viewrank {

bool is_regression(Method m) { return m == Method::kTReg || m == Method::kRReg; }

bool is_ips(Method m) {
  return m == Method::kIps || m == Method::kIpsC || m == Method::kIpsCn || m == Method::kIpsCnsr;
}

bool is_capped_ips(Method m) { return m == Method::kIpsC || m == Method::kIpsCn || m == Method::kIpsCnsr; }

void BaselineSpec::validate() const {
  if (kind == Method::kVldrec) throw UsageError("method: vldrec is not a baseline");
  if (is_capped_ips(kind) != ips_cap.has_value())
    throw UsageError("method.ips_cap must be set exactly for ips_c, ips_cn and ips_cnsr");
  if (ips_cap && !(*ips_cap > 0.0)) throw UsageError("method.ips_cap must be positive");
  if ((kind == Method::kCausE) != caus_e_lambda.has_value())
    throw UsageError("method.caus_e_lambda must be set exactly for caus_e");
  if (caus_e_lambda && !(*caus_e_lambda >= 0.0)) throw UsageError("method.caus_e_lambda must be non-negative");
}

double regression_loss(Method kind, double predicted, const Dataset& d, const Interaction& x) {
  const double target = kind == Method::kTReg ? x.view_time : d.progress(x);
  const double e = predicted - target;
  return e * e;
}

double regression_rank_score(Method kind, double predicted, double length) {
  if (!(length > 0.0)) throw std::invalid_argument("regression_rank_score: length must be positive");
  return kind == Method::kRReg ? predicted * length : predicted;
}

std::optional<OrientedPair> rank_negative_sampler(const Dataset& d, std::span<const std::size_t> history,
                                                  std::size_t anchor, RankTarget target, Rng& rng) {
  if (history.size() < 2) throw std::invalid_argument("rank_negative_sampler: user has no other interaction");
  const auto at = std::find(history.begin(), history.end(), anchor);
  if (at == history.end()) throw std::invalid_argument("rank_negative_sampler: anchor not in the user's history");
  const auto skip = static_cast<std::size_t>(at - history.begin());
  std::uniform_int_distribution<std::size_t> pick(0, history.size() - 2);
  std::size_t j = pick(rng);
  if (j >= skip) ++j;
  const std::size_t other = history[j];
  auto value = [&](std::size_t i) {
    return target == RankTarget::kTime ? d.interaction(i).view_time : d.progress(i);
  };
  const double va = value(anchor), vo = value(other);
  if (va == vo) return std::nullopt;
  return va > vo ? OrientedPair{anchor, other} : OrientedPair{other, anchor};
}

double ips_weight(Method kind, double length, std::optional<double> cap) {
  if (!(length > 0.0)) throw std::invalid_argument("ips_weight: length must be positive");
  const double w = 1.0 / length;
  if (is_capped_ips(kind)) {
    if (!cap) throw std::invalid_argument("ips_weight: capped variant without a cap");
    return std::min(w, *cap);
  }
  return w;
}

std::vector<double> ips_weights(Method kind, std::span<const double> lengths, std::optional<double> cap) {
  std::vector<double> w(lengths.size(), 1.0);
  if (!is_ips(kind)) return w;
  for (std::size_t i = 0; i < lengths.size(); ++i) w[i] = ips_weight(kind, lengths[i], cap);
  if (kind == Method::kIpsCnsr)
    for (double& x : w) x = std::sqrt(x);
  if ((kind == Method::kIpsCn || kind == Method::kIpsCnsr) && !w.empty()) {
    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
    for (double& x : w) x /= mean;
  }
  return w;
}

double default_ips_cap(const Dataset& train) {
  if (train.empty()) throw DataError("cannot derive an IPS cap from an empty training set");
  std::vector<double> raw;
  raw.reserve(train.size());
  for (const auto& x : train.interactions()) raw.push_back(1.0 / train.length_of(x));
  return percentile(std::move(raw), 0.95);
}

BatchLoss ranking_batch_loss(const ModelParams& params, const Dataset& train, std::span<const OrientedPair> pairs,
                             std::span<const double> weights, Rng& rng, bool training, Gradients* grads) {
  if (weights.size() != pairs.size()) throw std::invalid_argument("ranking_batch_loss: one weight per pair");
  BatchLoss out;
  if (pairs.empty()) return out;
  const double n = static_cast<double>(pairs.size());
  ForwardTrace tp, tn;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Interaction& pos = train.interaction(pairs[i].positive);
    const Interaction& neg = train.interaction(pairs[i].negative);
    const bool trace = grads != nullptr;
    const double sp = score(params, HeadId::kF, pos.user, pos.video, training, &rng, trace ? &tp : nullptr);
    const double sn = score(params, HeadId::kF, neg.user, neg.video, training, &rng, trace ? &tn : nullptr);
    out.general += weights[i] * bpr_loss(sp, sn);
    if (trace) {
      const double g = weights[i] / n * bpr_loss_slope(sp - sn);
      backward(params, HeadId::kF, tp, g, *grads);
      backward(params, HeadId::kF, tn, -g, *grads);
    }
  }
  out.general /= n;
  out.total = out.general;
  return out;
}

double caus_e_penalty(const EmbeddingTables& main, const EmbeddingTables& aux, double lambda) {
  auto same = [](const RowMatrix& a, const RowMatrix& b) { return a.rows() == b.rows() && a.cols() == b.cols(); };
  if (!same(main.user, aux.user) || !same(main.video, aux.video) || !same(main.length, aux.length))
    throw std::invalid_argument("caus_e_penalty: embedding shapes differ");
  return lambda * ((main.user - aux.user).squaredNorm() + (main.video - aux.video).squaredNorm() +
                   (main.length - aux.length).squaredNorm());
}

void caus_e_penalty_grad(const EmbeddingTables& main, const EmbeddingTables& aux, double lambda, Gradients& main_grads,
                         Gradients& aux_grads) {
  auto apply = [&](const RowMatrix& a, const RowMatrix& b, RowMatrix& ga, RowMatrix& gb) {
    const RowMatrix diff = 2.0 * lambda * (a - b);
    ga += diff;
    gb -= diff;
  };
  apply(main.user, aux.user, main_grads.emb.user, aux_grads.emb.user);
  apply(main.video, aux.video, main_grads.emb.video, aux_grads.emb.video);
  apply(main.length, aux.length, main_grads.emb.length, aux_grads.emb.length);
  for (Gradients* g : {&main_grads, &aux_grads}) {
    for (Eigen::Index r = 0; r < main.user.rows(); ++r) g->touch_user(static_cast<UserIndex>(r));
    for (Eigen::Index r = 0; r < main.video.rows(); ++r) g->touch_video(static_cast<VideoIndex>(r));
    for (Eigen::Index r = 0; r < main.length.rows(); ++r) g->touch_length(static_cast<std::uint32_t>(r));
  }
}

RegressionObjective::RegressionObjective(const Dataset& train, Method kind) : train_(train), kind_(kind) {
  if (!is_regression(kind)) throw UsageError("regression objective needs t_reg or r_reg");
}

std::size_t RegressionObjective::prepare_epoch(std::uint64_t seed) {
  order_.resize(train_.size());
  std::iota(order_.begin(), order_.end(), 0);
  Rng rng(seed);
  std::shuffle(order_.begin(), order_.end(), rng);
  return order_.size();
}

BatchLoss RegressionObjective::batch(std::span<const ModelParams> models, std::size_t begin, std::size_t end,
                                     Rng& rng, std::span<Gradients> grads) {
  const ModelParams& net = models[0];
  Gradients* g = grads.empty() ? nullptr : &grads[0];
  const double n = static_cast<double>(end - begin);
  BatchLoss out;
  ForwardTrace trace;
  for (std::size_t i = begin; i < end; ++i) {
    const Interaction& x = train_.interaction(order_[i]);
    const double pred = score(net, HeadId::kF, x.user, x.video, true, &rng, g ? &trace : nullptr);
    const double target = kind_ == Method::kTReg ? x.view_time : train_.progress(x);
    out.general += regression_loss(kind_, pred, train_, x);
    if (g) backward(net, HeadId::kF, trace, 2.0 * (pred - target) / n, *g);
  }
  out.general /= n;
  out.total = out.general;
  return out;
}

std::vector<OrientedPair> ranking_pairs(const Dataset& train, RankTarget target, std::uint64_t seed) {
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<OrientedPair> pairs;
  pairs.reserve(order.size());
  for (std::size_t anchor : order) {
    const auto history = train.user_interactions(train.interaction(anchor).user);
    if (history.size() < 2) continue;
    if (auto p = rank_negative_sampler(train, history, anchor, target, rng)) pairs.push_back(*p);
  }
  return pairs;
}

RankingObjective::RankingObjective(const Dataset& train, RankTarget target, Method weighting,
                                   std::optional<double> cap)
    : train_(train), target_(target), weighting_(weighting), cap_(cap) {}

std::size_t RankingObjective::prepare_epoch(std::uint64_t seed) {
  pairs_ = ranking_pairs(train_, target_, seed);
  return pairs_.size();
}

BatchLoss RankingObjective::batch(std::span<const ModelParams> models, std::size_t begin, std::size_t end, Rng& rng,
                                  std::span<Gradients> grads) {
  std::span<const OrientedPair> pairs(pairs_.data() + begin, end - begin);
  std::vector<double> lengths;
  lengths.reserve(pairs.size());
  for (const auto& p : pairs) lengths.push_back(train_.length_of(train_.interaction(p.positive)));
  const auto w = ips_weights(weighting_, lengths, cap_);
  return ranking_batch_loss(models[0], train_, pairs, w, rng, true, grads.empty() ? nullptr : &grads[0]);
}

CausEObjective::CausEObjective(const Dataset& train, LabelingConfig labeling, double lambda)
    : train_(train), index_(train, labeling.scheme), labeling_(std::move(labeling)), lambda_(lambda) {
  labeling_.validate();
  if (!(lambda_ >= 0.0)) throw UsageError("method.caus_e_lambda must be non-negative");
}

std::size_t CausEObjective::prepare_epoch(std::uint64_t seed) {
  stream_ = epoch_stream(index_, labeling_, seed);
  return stream_.triples.size();
}

BatchLoss CausEObjective::batch(std::span<const ModelParams> models, std::size_t begin, std::size_t end, Rng& rng,
                                std::span<Gradients> grads) {
  std::vector<OrientedPair> general, grouped;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& t = stream_.triples[i];
    if (t.general) general.push_back(*t.general);
    if (t.grouped) grouped.push_back(*t.grouped);
  }
  const bool with_grads = !grads.empty();
  const std::vector<double> w1(general.size(), 1.0), w2(grouped.size(), 1.0);
  BatchLoss out;
  out.general = ranking_batch_loss(models[0], train_, general, w1, rng, true, with_grads ? &grads[0] : nullptr).total;
  out.grouped = ranking_batch_loss(models[1], train_, grouped, w2, rng, true, with_grads ? &grads[1] : nullptr).total;
  const double penalty = caus_e_penalty(models[0].emb, models[1].emb, lambda_);
  if (with_grads && lambda_ > 0.0) caus_e_penalty_grad(models[0].emb, models[1].emb, lambda_, grads[0], grads[1]);
  out.total = out.general + out.grouped + penalty;
  return out;
}

}  // namespace viewrank
