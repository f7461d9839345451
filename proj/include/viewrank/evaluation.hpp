#pragma once

#include <algorithm>
#include <functional>
#include <iosfwd>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "viewrank/data.hpp"
#include "viewrank/grouping.hpp"

namespace viewrank {

struct RankedEntry {
  VideoIndex video = 0;
  double length = 0.0;
  double view_time = 0.0;  // ground truth used by the metrics
  double score = 0.0;
};

// A user's candidates sorted by descending score; ties by ascending video id.
struct RankedList {
  UserIndex user = 0;
  std::vector<RankedEntry> entries;
};

using Scorer = std::function<double(UserIndex, VideoIndex)>;
// Ground-truth view time for an interaction; defaults to the logged value.
using TruthFn = std::function<double(const Interaction&)>;

// Sorts `entries` into ranking order in place.
void sort_ranked(std::vector<RankedEntry>& entries, const Catalog& catalog);

// One list per active user of `data` (ascending user index), built from that
// user's interactions. `keep` optionally filters interactions.
std::vector<RankedList> build_ranked_lists(const Dataset& data, const Scorer& scorer, const TruthFn& truth = {},
                                           const std::function<bool(const Interaction&)>& keep = {});

// Sum of true view time over the first min(k, |list|) entries.
double view_time_at_k(const RankedList& list, std::size_t k);

// True view time of the ranked prefix whose lengths sum to T; the entry that
// crosses T has its length and view time scaled by (remaining budget / length).
double view_time_at_t(const RankedList& list, double t);

// Per group: macro average of View_Time@K over users with at least one
// candidate in the group, ranking only that group's videos. Absent for groups
// with no such user.
std::vector<std::optional<double>> per_group_view_time_at_k(const Dataset& data, const Scorer& scorer,
                                                            const GroupScheme& scheme, std::size_t k,
                                                            const TruthFn& truth = {});

template <typename T>
std::size_t size_of_intersection(std::span<const T> a, std::span<const T> b) {
  std::vector<T> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  x.erase(std::unique(x.begin(), x.end()), x.end());
  std::sort(y.begin(), y.end());
  y.erase(std::unique(y.begin(), y.end()), y.end());
  std::vector<T> both;
  std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(both));
  return both.size();
}

// Shannon entropy in bits; 0 log 0 = 0.
double entropy_bits(std::span<const double> p);

// Jensen-Shannon divergence with base-2 logarithms, in [0, 1]. Inputs must
// have equal size; each must be a non-negative vector summing to 1 within 1e-9.
double jsd(std::span<const double> p, std::span<const double> q);

// JSD between two count histograms over the union of their keys.
double jsd_counts(const std::map<std::string, double>& p, const std::map<std::string, double>& q);

struct GroupScoreStats {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
};

struct ScoreDistribution {
  bool degenerate = false;  // all scores equal; min-max normalization undefined
  std::vector<GroupScoreStats> groups;
  // max - min of the per-group means over non-empty groups
  double mean_spread() const;
};

// Min-max normalizes every test score to [0, 1], then reports per-group mean
// and population standard deviation.
ScoreDistribution score_distribution_stats(const Dataset& data, const Scorer& scorer, const GroupScheme& scheme);

struct EvalConfig {
  std::vector<std::size_t> k_values{3, 5};
  std::vector<double> t_values{120.0, 240.0};
  std::size_t group_k = 3;         // per-group View_Time@K
  std::size_t intersection_k = 5;  // size of intersection / JSD top-k
};

struct MetricReport {
  std::size_t users = 0;
  std::map<std::string, double> aggregate;  // macro averages and pooled JSD
  // per-user rows: (user id, metric, value), users in ascending index order
  std::vector<std::tuple<std::string, std::string, double>> per_user;
  // per-group rows: (group label, metric, value)
  std::vector<std::tuple<std::string, std::string, double>> per_group;
  ScoreDistribution scores;
};

std::string view_time_at_t_key(double t);
std::string view_time_at_k_key(std::size_t k);

// Full report. Intersection and JSD compare each user's top-k recommended
// videos with the top-k by true view time, on categories when `categories`
// is given (video id -> category) and on video ids otherwise.
MetricReport evaluate(const Dataset& data, const Scorer& scorer, const GroupScheme& scheme, const EvalConfig& cfg,
                      const TruthFn& truth = {}, const std::map<std::string, std::string>* categories = nullptr);

// Aggregate metrics as a JSON object text (stable key order, round-trip numbers).
std::string report_json(const MetricReport& report);
void write_user_csv(std::ostream& out, const MetricReport& report);
void write_group_csv(std::ostream& out, const MetricReport& report);

// (ours - baseline) / baseline
double relative_improvement(double ours, double baseline);

}  // namespace viewrank
