#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "viewrank/data.hpp"
#include "viewrank/grouping.hpp"

namespace viewrank {

// Labeling and negative-sampling settings for length-conditioned triples.
struct LabelingConfig {
  double beta = 0.5;     // probability of the pointwise (tau) branch
  double epsilon = 0.1;  // pairwise progress margin
  GroupScheme scheme;    // must carry tau
  int max_resample_attempts = 20;
  // Histories up to this size are enumerated instead of rejection-sampled.
  std::size_t exhaustive_limit = 64;

  void validate() const;
};

enum class Branch : std::uint8_t {
  kPointwise,
  kPairwise,
  kSupplied,  // pair produced by an external sampler (ranking baselines)
};

const char* branch_name(Branch b);

// Interaction indices into the training dataset, oriented so that
// `positive` is the preferred instance.
struct OrientedPair {
  std::size_t positive = 0;
  std::size_t negative = 0;
};

// Anchor plus up to two oriented pairs: the general pair feeds head f, the
// grouped pair (both videos in the anchor's length group) feeds head f_un.
// An absent pair masks that loss term.
struct TrainingTriple {
  UserIndex user = 0;
  std::size_t anchor = 0;
  std::optional<OrientedPair> general;
  std::optional<OrientedPair> grouped;
  Branch branch = Branch::kPointwise;
};

// Per-interaction progress/group lookups and per (user, group) histories.
class SampleIndex {
 public:
  SampleIndex(const Dataset& train, const GroupScheme& scheme);

  const Dataset& data() const { return *data_; }
  double progress(std::size_t i) const { return progress_[i]; }
  std::uint32_t group(std::size_t i) const { return group_[i]; }
  std::span<const std::size_t> history(UserIndex u) const { return data_->user_interactions(u); }
  std::span<const std::size_t> history(UserIndex u, std::uint32_t g) const;

 private:
  const Dataset* data_;
  std::size_t groups_;
  std::vector<double> progress_;
  std::vector<std::uint32_t> group_;
  std::vector<std::size_t> ug_offsets_, ug_items_;
};

// Uniform draw from a non-empty candidate list.
template <typename T>
const T& uniform_sampler(std::span<const T> candidates, Rng& rng) {
  if (candidates.empty()) throw std::invalid_argument("uniform_sampler: empty candidate list");
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  return candidates[pick(rng)];
}

// Draws the labeling branch, then a general and a same-group negative for
// `anchor`. Returns nullopt when neither slot admits a candidate.
std::optional<TrainingTriple> generate_triple(const SampleIndex& index, std::size_t anchor,
                                              const LabelingConfig& cfg, Rng& rng);

struct EpochStream {
  std::vector<TrainingTriple> triples;
  std::size_t skipped = 0;
  std::size_t general_masked = 0;
  std::size_t grouped_masked = 0;
  std::size_t pointwise = 0;
};

// One shuffled pass over all training interactions, each used once as anchor.
EpochStream epoch_stream(const SampleIndex& index, const LabelingConfig& cfg, std::uint64_t seed);

// Audit CSV: user,pos_video,neg_video,grouped_neg_video,branch,grouped_pos_video
void write_triples_csv(std::ostream& out, const Dataset& d, std::span<const TrainingTriple> triples);

}  // namespace viewrank
