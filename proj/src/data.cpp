#include "viewrank/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include "viewrank/error.hpp"

namespace viewrank {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\n' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\n' || s.back() == '\t'))
    s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

double parse_number(std::string_view field, const std::string& source, std::size_t line,
                    const char* column) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw DataError(where(source, line) + ": column '" + column + "' is not a finite number: '" +
                    std::string(field) + "'");
  }
  return v;
}

// Reads the header, returns the delimiter and the column positions of
// `required` (in order). Returns false for a completely empty stream.
bool read_header(std::istream& in, const std::string& source, std::span<const char* const> required,
                 char& delim, std::vector<std::size_t>& positions, std::size_t& columns) {
  std::string header;
  if (!std::getline(in, header)) return false;
  if (header.size() >= 3 && static_cast<unsigned char>(header[0]) == 0xEF) header = header.substr(3);
  delim = header.find('\t') != std::string::npos ? '\t' : ',';
  const auto names = split_fields(header, delim);
  columns = names.size();
  positions.clear();
  for (const char* name : required) {
    auto it = std::find(names.begin(), names.end(), std::string_view(name));
    if (it == names.end()) {
      throw DataError(where(source, 1) + ": header is missing required column '" + name + "'");
    }
    positions.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  return true;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer over the combined key
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Catalog::Catalog(std::vector<std::string> user_ids, std::vector<Video> videos)
    : user_ids_(std::move(user_ids)), videos_(std::move(videos)) {
  user_lookup_.reserve(user_ids_.size());
  for (std::size_t i = 0; i < user_ids_.size(); ++i) {
    if (!user_lookup_.emplace(user_ids_[i], static_cast<UserIndex>(i)).second)
      throw DataError("duplicate user id '" + user_ids_[i] + "'");
  }
  video_lookup_.reserve(videos_.size());
  for (std::size_t i = 0; i < videos_.size(); ++i) {
    if (!(videos_[i].length > 0.0) || !std::isfinite(videos_[i].length))
      throw DataError("video '" + videos_[i].id + "' has non-positive length");
    if (!video_lookup_.emplace(videos_[i].id, static_cast<VideoIndex>(i)).second)
      throw DataError("duplicate video id '" + videos_[i].id + "'");
  }
}

std::optional<UserIndex> Catalog::find_user(std::string_view id) const {
  auto it = user_lookup_.find(std::string(id));
  if (it == user_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<VideoIndex> Catalog::find_video(std::string_view id) const {
  auto it = video_lookup_.find(std::string(id));
  if (it == video_lookup_.end()) return std::nullopt;
  return it->second;
}

namespace {

// CSR-style bucket index: offsets has keys + 1 entries.
void build_index(std::size_t keys, std::span<const Interaction> xs, bool by_user,
                 std::vector<std::size_t>& offsets, std::vector<std::size_t>& items) {
  offsets.assign(keys + 1, 0);
  for (const auto& x : xs) ++offsets[(by_user ? x.user : x.video) + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  items.assign(xs.size(), 0);
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    items[cursor[by_user ? xs[i].user : xs[i].video]++] = i;
  }
}

}  // namespace

Dataset::Dataset(std::shared_ptr<const Catalog> catalog, std::vector<Interaction> interactions)
    : catalog_(std::move(catalog)), interactions_(std::move(interactions)) {
  for (std::size_t i = 0; i < interactions_.size(); ++i) {
    const auto& x = interactions_[i];
    if (x.user >= catalog_->user_count() || x.video >= catalog_->video_count())
      throw DataError("interaction " + std::to_string(i) + " references an unknown user or video");
    if (!(x.view_time >= 0.0) || !std::isfinite(x.view_time))
      throw DataError("interaction " + std::to_string(i) + " has negative view time");
  }
  build_index(catalog_->user_count(), interactions_, true, user_offsets_, user_items_);
  build_index(catalog_->video_count(), interactions_, false, video_offsets_, video_items_);
}

std::span<const std::size_t> Dataset::user_interactions(UserIndex u) const {
  if (u >= catalog_->user_count()) return {};
  return std::span<const std::size_t>(user_items_).subspan(user_offsets_[u], user_offsets_[u + 1] - user_offsets_[u]);
}

std::span<const std::size_t> Dataset::video_interactions(VideoIndex v) const {
  if (v >= catalog_->video_count()) return {};
  return std::span<const std::size_t>(video_items_).subspan(video_offsets_[v], video_offsets_[v + 1] - video_offsets_[v]);
}

std::vector<UserIndex> Dataset::active_users() const {
  std::vector<UserIndex> out;
  for (std::size_t u = 0; u < catalog_->user_count(); ++u)
    if (user_offsets_[u + 1] > user_offsets_[u]) out.push_back(static_cast<UserIndex>(u));
  return out;
}

std::vector<InteractionRow> read_interaction_rows(std::istream& in, const std::string& source) {
  static constexpr const char* kRequired[] = {"user_id", "video_id", "view_time"};
  char delim = ',';
  std::vector<std::size_t> pos;
  std::size_t columns = 0;
  std::vector<InteractionRow> rows;
  if (!read_header(in, source, kRequired, delim, pos, columns)) return rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line, delim);
    if (f.size() != columns)
      throw DataError(where(source, line_no) + ": expected " + std::to_string(columns) + " fields, found " +
                      std::to_string(f.size()));
    InteractionRow row;
    row.user_id = std::string(f[pos[0]]);
    row.video_id = std::string(f[pos[1]]);
    if (row.user_id.empty() || row.video_id.empty())
      throw DataError(where(source, line_no) + ": empty identifier");
    row.view_time = parse_number(f[pos[2]], source, line_no, "view_time");
    if (row.view_time < 0.0)
      throw DataError(where(source, line_no) + ": view_time must be non-negative");
    row.line = line_no;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<Video> read_video_rows(std::istream& in, const std::string& source) {
  static constexpr const char* kRequired[] = {"video_id", "length"};
  char delim = ',';
  std::vector<std::size_t> pos;
  std::size_t columns = 0;
  std::vector<Video> videos;
  if (!read_header(in, source, kRequired, delim, pos, columns)) return videos;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line, delim);
    if (f.size() != columns)
      throw DataError(where(source, line_no) + ": expected " + std::to_string(columns) + " fields, found " +
                      std::to_string(f.size()));
    Video v{std::string(f[pos[0]]), parse_number(f[pos[1]], source, line_no, "length")};
    if (v.id.empty()) throw DataError(where(source, line_no) + ": empty identifier");
    if (!(v.length > 0.0)) throw DataError(where(source, line_no) + ": video length must be positive");
    if (!seen.insert(v.id).second) throw DataError(where(source, line_no) + ": duplicate video id '" + v.id + "'");
    videos.push_back(std::move(v));
  }
  return videos;
}

std::shared_ptr<const Catalog> build_catalog(std::vector<Video> videos,
                                             std::span<const std::vector<InteractionRow>> row_sets) {
  std::vector<std::string> users;
  std::unordered_set<std::string> seen;
  for (const auto& rows : row_sets)
    for (const auto& r : rows)
      if (seen.insert(r.user_id).second) users.push_back(r.user_id);
  return std::make_shared<const Catalog>(std::move(users), std::move(videos));
}

Dataset make_dataset(std::shared_ptr<const Catalog> catalog, const std::vector<InteractionRow>& rows,
                     IngestReport* report, bool skip_unknown) {
  std::vector<Interaction> xs;
  xs.reserve(rows.size());
  std::size_t dropped = 0;
  for (const auto& r : rows) {
    const auto v = catalog->find_video(r.video_id);
    if (!v) {
      if (skip_unknown) {
        ++dropped;
        continue;
      }
      throw DataError("line " + std::to_string(r.line) + ": interaction references unknown video '" + r.video_id + "'");
    }
    const auto u = catalog->find_user(r.user_id);
    if (!u) {
      if (skip_unknown) {
        ++dropped;
        continue;
      }
      throw DataError("line " + std::to_string(r.line) + ": interaction references unknown user '" + r.user_id + "'");
    }
    xs.push_back({*u, *v, r.view_time});
  }
  if (report) {
    if (dropped > 0) report->warnings.push_back("dropped " + std::to_string(dropped) + " rows with unknown ids");
    if (xs.empty()) report->warnings.push_back("interaction log is empty");
  }
  return Dataset(std::move(catalog), std::move(xs));
}

Dataset ingest(std::istream& interactions, std::istream& videos, IngestReport* report) {
  auto video_rows = read_video_rows(videos);
  std::vector<std::vector<InteractionRow>> sets;
  sets.push_back(read_interaction_rows(interactions));
  auto catalog = build_catalog(std::move(video_rows), sets);
  return make_dataset(std::move(catalog), sets.front(), report);
}

PreprocessResult preprocess(const Dataset& d, const PreprocessConfig& cfg) {
  if (!(cfg.max_progress > 0.0) || !(cfg.max_length > 0.0))
    throw UsageError("preprocess: max_progress and max_length must be positive");
  const Catalog& old = d.catalog();
  PreprocessResult out;
  std::vector<Video> kept;
  std::vector<std::int64_t> remap(old.video_count(), -1);
  for (std::size_t v = 0; v < old.video_count(); ++v) {
    if (old.video(static_cast<VideoIndex>(v)).length > cfg.max_length) {
      ++out.removed_videos;
      continue;
    }
    remap[v] = static_cast<std::int64_t>(kept.size());
    kept.push_back(old.video(static_cast<VideoIndex>(v)));
  }
  std::vector<Interaction> xs;
  xs.reserve(d.size());
  for (const auto& x : d.interactions()) {
    if (remap[x.video] < 0) {
      ++out.removed_by_length;
      continue;
    }
    if (d.progress(x) > cfg.max_progress) {
      ++out.removed_by_progress;
      continue;
    }
    xs.push_back({x.user, static_cast<VideoIndex>(remap[x.video]), x.view_time});
  }
  auto catalog = out.removed_videos == 0 ? d.shared_catalog()
                                         : std::make_shared<const Catalog>(old.user_ids(), std::move(kept));
  out.data = Dataset(std::move(catalog), std::move(xs));
  return out;
}

Splits split(const Dataset& d, const SplitSpec& spec) {
  const double vf = spec.validation_fraction, tf = spec.test_fraction;
  if (!(vf >= 0.0 && vf <= 1.0) || !(tf >= 0.0 && tf <= 1.0) || !(vf + tf < 1.0))
    throw UsageError("split: fractions must lie in [0,1] with validation_fraction + test_fraction < 1");
  if (d.empty()) throw DataError("split: dataset is empty");
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_valid = static_cast<std::size_t>(std::llround(vf * static_cast<double>(n)));
  const auto n_test = std::min(n - n_valid, static_cast<std::size_t>(std::llround(tf * static_cast<double>(n))));
  // 0 = train, 1 = validation, 2 = test
  std::vector<std::uint8_t> part(n, 0);
  for (std::size_t i = 0; i < n_valid; ++i) part[order[i]] = 1;
  for (std::size_t i = n_valid; i < n_valid + n_test; ++i) part[order[i]] = 2;
  std::vector<Interaction> buckets[3];
  for (std::size_t i = 0; i < n; ++i) buckets[part[i]].push_back(d.interaction(i));
  return Splits{Dataset(d.shared_catalog(), std::move(buckets[0])),
                Dataset(d.shared_catalog(), std::move(buckets[1])),
                Dataset(d.shared_catalog(), std::move(buckets[2]))};
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_interactions(std::ostream& out, const Dataset& d) {
  out << "user_id,video_id,view_time\n";
  const Catalog& c = d.catalog();
  for (const auto& x : d.interactions())
    out << c.user_id(x.user) << ',' << c.video(x.video).id << ',' << format_number(x.view_time) << '\n';
}

void write_videos(std::ostream& out, const Catalog& c) {
  out << "video_id,length\n";
  for (const auto& v : c.videos()) out << v.id << ',' << format_number(v.length) << '\n';
}

}  // namespace viewrank
