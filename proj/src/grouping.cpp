#include "viewrank/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "viewrank/error.hpp"
#include "viewrank/stats.hpp"

namespace viewrank {

GroupScheme::GroupScheme(std::vector<double> upper_edges, std::vector<double> tau)
    : upper_(std::move(upper_edges)), tau_(std::move(tau)) {
  if (upper_.empty()) throw UsageError("group scheme needs at least one boundary");
  for (std::size_t i = 0; i < upper_.size(); ++i) {
    if (!(upper_[i] > 0.0) || !std::isfinite(upper_[i]))
      throw UsageError("group boundaries must be positive");
    if (i > 0 && !(upper_[i] > upper_[i - 1]))
      throw UsageError("group boundaries must be strictly ascending");
  }
  if (!tau_.empty() && tau_.size() != upper_.size())
    throw UsageError("tau must have one value per group");
}

GroupScheme GroupScheme::kuaishou() { return GroupScheme({8, 18, 30, 40, 60}); }

GroupScheme GroupScheme::wechat() { return GroupScheme({13, 20, 30, 41, 59, 92, 120}); }

GroupScheme GroupScheme::single(double max_length) { return GroupScheme({max_length}); }

std::optional<GroupScheme> GroupScheme::preset(const std::string& name) {
  if (name == "kuaishou") return kuaishou();
  if (name == "wechat") return wechat();
  return std::nullopt;
}

std::size_t GroupScheme::assign(double length) const {
  if (!(length > 0.0) || length > max_length())
    throw DataError("video length " + format_number(length) + " is outside (0, " + format_number(max_length()) + "]");
  return static_cast<std::size_t>(std::lower_bound(upper_.begin(), upper_.end(), length) - upper_.begin());
}

std::string GroupScheme::label(std::size_t g) const {
  return "(" + format_number(lower(g)) + "," + format_number(upper(g)) + "]";
}

std::optional<double> completion_rate(const Dataset& d, VideoIndex v) {
  const auto items = d.video_interactions(v);
  if (items.empty()) return std::nullopt;
  std::size_t completed = 0;
  for (std::size_t i : items)
    if (d.progress(i) >= 1.0) ++completed;
  return static_cast<double>(completed) / static_cast<double>(items.size());
}

std::vector<CompletionBucket> completion_curves(const Dataset& d) {
  std::map<long, std::vector<double>> buckets;
  const Catalog& c = d.catalog();
  for (std::size_t v = 0; v < c.video_count(); ++v) {
    const auto rate = completion_rate(d, static_cast<VideoIndex>(v));
    if (!rate) continue;
    buckets[static_cast<long>(std::ceil(c.video(static_cast<VideoIndex>(v)).length))].push_back(*rate);
  }
  std::vector<CompletionBucket> out;
  out.reserve(buckets.size());
  for (auto& [len, rates] : buckets) {
    std::sort(rates.begin(), rates.end());
    out.push_back({len, percentile_sorted(rates, 0.5), percentile_sorted(rates, 0.75), rates.size()});
  }
  return out;
}

std::vector<std::uint32_t> video_groups(const Catalog& c, const GroupScheme& scheme) {
  std::vector<std::uint32_t> out(c.video_count());
  for (std::size_t v = 0; v < c.video_count(); ++v)
    out[v] = static_cast<std::uint32_t>(scheme.assign(c.video(static_cast<VideoIndex>(v)).length));
  return out;
}

GroupScheme compute_tau(const Dataset& d, const GroupScheme& scheme, double percentile_level) {
  if (!(percentile_level >= 0.0 && percentile_level <= 1.0))
    throw UsageError("tau percentile level must be in [0, 1]");
  const auto groups = video_groups(d.catalog(), scheme);
  std::vector<std::vector<double>> progress(scheme.group_count());
  for (const auto& x : d.interactions()) progress[groups[x.video]].push_back(d.progress(x));
  std::vector<double> tau(scheme.group_count());
  for (std::size_t g = 0; g < tau.size(); ++g) {
    if (progress[g].empty())
      throw DataError("length group " + std::to_string(g + 1) + " " + scheme.label(g) + " has no interactions");
    tau[g] = percentile(std::move(progress[g]), percentile_level);
  }
  return scheme.with_tau(std::move(tau));
}

}  // namespace viewrank
