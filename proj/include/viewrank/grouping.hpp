#pragma once

#include <optional>
#include <string>
#include <vector>

#include "viewrank/data.hpp"

namespace viewrank {

// Contiguous video-length groups (lower, upper] over (0, max_length], with
// an optional per-group play-progress threshold tau.
class GroupScheme {
 public:
  GroupScheme() = default;
  // `upper_edges` must be strictly ascending and positive.
  explicit GroupScheme(std::vector<double> upper_edges, std::vector<double> tau = {});

  // 5 groups up to 60s: (0,8], (8,18], (18,30], (30,40], (40,60].
  static GroupScheme kuaishou();
  // 7 groups up to 120s: (0,13], (13,20], (20,30], (30,41], (41,59], (59,92], (92,120].
  static GroupScheme wechat();
  // Single group covering (0, max_length].
  static GroupScheme single(double max_length);
  // Looks up "kuaishou" or "wechat".
  static std::optional<GroupScheme> preset(const std::string& name);

  std::size_t group_count() const { return upper_.size(); }
  const std::vector<double>& upper_edges() const { return upper_; }
  double lower(std::size_t g) const { return g == 0 ? 0.0 : upper_.at(g - 1); }
  double upper(std::size_t g) const { return upper_.at(g); }
  double max_length() const { return upper_.empty() ? 0.0 : upper_.back(); }

  // Zero-based index of the group containing `length`. Throws DataError
  // when length is outside (0, max_length].
  std::size_t assign(double length) const;

  bool has_tau() const { return !tau_.empty(); }
  double tau(std::size_t g) const { return tau_.at(g); }
  const std::vector<double>& taus() const { return tau_; }
  GroupScheme with_tau(std::vector<double> tau) const { return GroupScheme(upper_, std::move(tau)); }

  std::string label(std::size_t g) const;

 private:
  std::vector<double> upper_;
  std::vector<double> tau_;
};

// Fraction of a video's interactions with progress >= 1. Absent when the
// video has no interactions.
std::optional<double> completion_rate(const Dataset& d, VideoIndex v);

struct CompletionBucket {
  long length = 0;  // integer seconds, ceil of the video length
  double p50 = 0.0;
  double p75 = 0.0;
  std::size_t count = 0;  // videos in the bucket
};

// Per integer-length bucket, p50 and p75 of the per-video completion rates.
// Buckets without any watched video are omitted. Sorted by length.
std::vector<CompletionBucket> completion_curves(const Dataset& d);

// Fills tau(g) with the given percentile of play progress over the
// interactions of each group. Throws DataError naming an empty group.
GroupScheme compute_tau(const Dataset& d, const GroupScheme& scheme, double percentile_level = 0.8);

// Group index of every video in the catalog.
std::vector<std::uint32_t> video_groups(const Catalog& c, const GroupScheme& scheme);

}  // namespace viewrank
