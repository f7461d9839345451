#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace viewrank {

using Rng = std::mt19937_64;
using UserIndex = std::uint32_t;
using VideoIndex = std::uint32_t;

// Independent, reproducible seed for a named sub-stream of `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

struct Video {
  std::string id;
  double length = 0.0;  // seconds, > 0
};

// One (user, video, view time) log record. Indices refer to the owning
// dataset's Catalog.
struct Interaction {
  UserIndex user = 0;
  VideoIndex video = 0;
  double view_time = 0.0;  // seconds, >= 0
};

// Id vocabularies shared by a dataset and all of its splits.
class Catalog {
 public:
  Catalog() = default;
  Catalog(std::vector<std::string> user_ids, std::vector<Video> videos);

  std::size_t user_count() const { return user_ids_.size(); }
  std::size_t video_count() const { return videos_.size(); }

  const std::vector<std::string>& user_ids() const { return user_ids_; }
  const std::vector<Video>& videos() const { return videos_; }
  const std::string& user_id(UserIndex u) const { return user_ids_.at(u); }
  const Video& video(VideoIndex v) const { return videos_.at(v); }

  std::optional<UserIndex> find_user(std::string_view id) const;
  std::optional<VideoIndex> find_video(std::string_view id) const;

 private:
  std::vector<std::string> user_ids_;
  std::vector<Video> videos_;
  std::unordered_map<std::string, UserIndex> user_lookup_;
  std::unordered_map<std::string, VideoIndex> video_lookup_;
};

// Immutable interaction log with per-user and per-video indices.
class Dataset {
 public:
  Dataset() : catalog_(std::make_shared<const Catalog>()) {}
  Dataset(std::shared_ptr<const Catalog> catalog, std::vector<Interaction> interactions);

  const Catalog& catalog() const { return *catalog_; }
  const std::shared_ptr<const Catalog>& shared_catalog() const { return catalog_; }

  std::span<const Interaction> interactions() const { return interactions_; }
  const Interaction& interaction(std::size_t i) const { return interactions_.at(i); }
  std::size_t size() const { return interactions_.size(); }
  bool empty() const { return interactions_.empty(); }

  // Indices into interactions() for one user (S_u) or one video.
  std::span<const std::size_t> user_interactions(UserIndex u) const;
  std::span<const std::size_t> video_interactions(VideoIndex v) const;

  double length_of(const Interaction& x) const { return catalog_->video(x.video).length; }
  // view_time / length; may exceed 1 on repeat plays.
  double progress(const Interaction& x) const { return x.view_time / length_of(x); }
  double progress(std::size_t i) const { return progress(interactions_[i]); }

  // Users that have at least one interaction, ascending.
  std::vector<UserIndex> active_users() const;

 private:
  std::shared_ptr<const Catalog> catalog_;
  std::vector<Interaction> interactions_;
  std::vector<std::size_t> user_offsets_, user_items_;
  std::vector<std::size_t> video_offsets_, video_items_;
};

// Raw interaction row as read from a log file.
struct InteractionRow {
  std::string user_id;
  std::string video_id;
  double view_time = 0.0;
  std::size_t line = 0;
};

struct IngestReport {
  std::vector<std::string> warnings;
};

// Readers for the delimited text formats. The delimiter (comma or tab) is
// detected from the header row. Errors carry `source:line`.
std::vector<InteractionRow> read_interaction_rows(std::istream& in, const std::string& source = "interactions");
std::vector<Video> read_video_rows(std::istream& in, const std::string& source = "videos");

// Builds a catalog whose users are the distinct ids of `row_sets`, in
// first-appearance order.
std::shared_ptr<const Catalog> build_catalog(std::vector<Video> videos,
                                             std::span<const std::vector<InteractionRow>> row_sets);

// Resolves rows against a catalog. Unknown videos are a DataError; unknown
// users are a DataError unless `skip_unknown` is set, in which case such rows
// are dropped and counted in the report.
Dataset make_dataset(std::shared_ptr<const Catalog> catalog, const std::vector<InteractionRow>& rows,
                     IngestReport* report = nullptr, bool skip_unknown = false);

Dataset ingest(std::istream& interactions, std::istream& videos, IngestReport* report = nullptr);

struct PreprocessConfig {
  double max_progress = 3.0;
  double max_length = 60.0;
};

struct PreprocessResult {
  Dataset data;
  std::size_t removed_by_progress = 0;
  std::size_t removed_videos = 0;
  std::size_t removed_by_length = 0;  // interactions on removed videos
};

// Drops interactions with progress > max_progress and videos longer than
// max_length (with their interactions). Users are kept; videos are reindexed.
PreprocessResult preprocess(const Dataset& d, const PreprocessConfig& cfg);

struct SplitSpec {
  double validation_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t seed = 7;
};

struct Splits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

// Shuffle-and-cut split with exact quotas (rounded). All splits share the
// input's catalog.
Splits split(const Dataset& d, const SplitSpec& spec);

void write_interactions(std::ostream& out, const Dataset& d);
void write_videos(std::ostream& out, const Catalog& c);

// Shortest round-trip decimal form.
std::string format_number(double v);

}  // namespace viewrank
