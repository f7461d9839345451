#include "viewrank/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "viewrank/error.hpp"

namespace viewrank {

void LabelingConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw UsageError("labeling.beta must be in [0, 1]");
  if (!(epsilon >= 0.0)) throw UsageError("labeling.epsilon must be non-negative");
  if (max_resample_attempts < 1) throw UsageError("labeling.max_resample_attempts must be positive");
  if (!scheme.has_tau()) throw UsageError("labeling.scheme has no tau; run compute_tau on the training split");
}

const char* branch_name(Branch b) {
  switch (b) {
    case Branch::kPointwise: return "pointwise";
    case Branch::kPairwise: return "pairwise";
    case Branch::kSupplied: return "supplied";
  }
  return "?";
}

SampleIndex::SampleIndex(const Dataset& train, const GroupScheme& scheme)
    : data_(&train), groups_(scheme.group_count()) {
  const auto vg = video_groups(train.catalog(), scheme);
  progress_.resize(train.size());
  group_.resize(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    progress_[i] = train.progress(i);
    group_[i] = vg[train.interaction(i).video];
  }
  const std::size_t users = train.catalog().user_count();
  ug_offsets_.assign(users * groups_ + 1, 0);
  for (std::size_t i = 0; i < train.size(); ++i)
    ++ug_offsets_[train.interaction(i).user * groups_ + group_[i] + 1];
  std::partial_sum(ug_offsets_.begin(), ug_offsets_.end(), ug_offsets_.begin());
  ug_items_.resize(train.size());
  std::vector<std::size_t> cursor(ug_offsets_.begin(), ug_offsets_.end() - 1);
  // Walk users' histories so each (user, group) list keeps history order.
  for (std::size_t u = 0; u < users; ++u)
    for (std::size_t i : train.user_interactions(static_cast<UserIndex>(u)))
      ug_items_[cursor[u * groups_ + group_[i]]++] = i;
}

std::span<const std::size_t> SampleIndex::history(UserIndex u, std::uint32_t g) const {
  const std::size_t key = static_cast<std::size_t>(u) * groups_ + g;
  return std::span<const std::size_t>(ug_items_).subspan(ug_offsets_[key], ug_offsets_[key + 1] - ug_offsets_[key]);
}

namespace {

template <typename Pred>
std::optional<std::size_t> draw_admissible(std::span<const std::size_t> pool, Pred admissible,
                                           const LabelingConfig& cfg, Rng& rng) {
  if (pool.empty()) return std::nullopt;
  if (pool.size() <= cfg.exhaustive_limit) {
    std::vector<std::size_t> ok;
    for (std::size_t k : pool)
      if (admissible(k)) ok.push_back(k);
    if (ok.empty()) return std::nullopt;
    return uniform_sampler<std::size_t>(ok, rng);
  }
  for (int attempt = 0; attempt < cfg.max_resample_attempts; ++attempt) {
    const std::size_t k = uniform_sampler(pool, rng);
    if (admissible(k)) return k;
  }
  return std::nullopt;
}

}  // namespace

std::optional<TrainingTriple> generate_triple(const SampleIndex& index, std::size_t anchor,
                                              const LabelingConfig& cfg, Rng& rng) {
  const Dataset& d = index.data();
  if (anchor >= d.size()) throw std::out_of_range("generate_triple: anchor is not a training interaction");
  const UserIndex user = d.interaction(anchor).user;
  const std::uint32_t g = index.group(anchor);
  const double pa = index.progress(anchor);
  const GroupScheme& s = cfg.scheme;

  TrainingTriple t;
  t.user = user;
  t.anchor = anchor;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool pointwise = unit(rng) < cfg.beta;
  t.branch = pointwise ? Branch::kPointwise : Branch::kPairwise;

  if (pointwise) {
    const bool anchor_above = pa > s.tau(g);
    auto general_ok = [&](std::size_t k) { return (index.progress(k) > s.tau(index.group(k))) != anchor_above; };
    // Same group, so tau(g) applies to both sides.
    auto grouped_ok = [&](std::size_t k) { return (index.progress(k) > s.tau(g)) != anchor_above; };
    auto orient = [&](std::size_t k) {
      return anchor_above ? OrientedPair{anchor, k} : OrientedPair{k, anchor};
    };
    if (auto k = draw_admissible(index.history(user), general_ok, cfg, rng)) t.general = orient(*k);
    if (auto k = draw_admissible(index.history(user, g), grouped_ok, cfg, rng)) t.grouped = orient(*k);
  } else {
    auto ok = [&](std::size_t k) { return std::abs(pa - index.progress(k)) > cfg.epsilon; };
    auto orient = [&](std::size_t k) {
      return pa > index.progress(k) ? OrientedPair{anchor, k} : OrientedPair{k, anchor};
    };
    if (auto k = draw_admissible(index.history(user), ok, cfg, rng)) t.general = orient(*k);
    if (auto k = draw_admissible(index.history(user, g), ok, cfg, rng)) t.grouped = orient(*k);
  }
  if (!t.general && !t.grouped) return std::nullopt;
  return t;
}

EpochStream epoch_stream(const SampleIndex& index, const LabelingConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  std::vector<std::size_t> order(index.data().size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  EpochStream out;
  out.triples.reserve(order.size());
  for (std::size_t anchor : order) {
    auto t = generate_triple(index, anchor, cfg, rng);
    if (!t) {
      ++out.skipped;
      continue;
    }
    if (!t->general) ++out.general_masked;
    if (!t->grouped) ++out.grouped_masked;
    if (t->branch == Branch::kPointwise) ++out.pointwise;
    out.triples.push_back(*t);
  }
  return out;
}

void write_triples_csv(std::ostream& out, const Dataset& d, std::span<const TrainingTriple> triples) {
  const Catalog& c = d.catalog();
  auto vid = [&](std::size_t i) -> const std::string& { return c.video(d.interaction(i).video).id; };
  out << "user,pos_video,neg_video,grouped_neg_video,branch,grouped_pos_video\n";
  for (const auto& t : triples) {
    const std::size_t pos = t.general ? t.general->positive : t.grouped->positive;
    out << c.user_id(t.user) << ',' << vid(pos) << ',';
    if (t.general) out << vid(t.general->negative);
    out << ',';
    if (t.grouped) out << vid(t.grouped->negative);
    out << ',' << branch_name(t.branch) << ',';
    if (t.grouped) out << vid(t.grouped->positive);
    out << '\n';
  }
}

}  // namespace viewrank
