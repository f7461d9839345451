#include "viewrank/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "viewrank/error.hpp"

namespace viewrank {

void SynthConfig::validate() const {
  if (n_users == 0 || n_videos == 0 || n_interactions == 0 || n_topics == 0)
    throw UsageError("synthgen: n_users, n_videos, n_interactions and n_topics must be positive");
  if (n_interactions > n_users * n_videos) throw UsageError("synthgen.n_interactions exceeds n_users * n_videos");
  if (length_groups.group_count() == 0) throw UsageError("synthgen.length_groups is empty");
  if (!(affinity_concentration > 0.0)) throw UsageError("synthgen.affinity_concentration must be positive");
  if (!(bias_strength >= 0.0 && bias_strength <= 1.0)) throw UsageError("synthgen.bias_strength must be in [0, 1]");
  if (!(noise_std >= 0.0)) throw UsageError("synthgen.noise_std must be non-negative");
  if (!(base_jitter >= 0.0 && base_jitter <= 1.0)) throw UsageError("synthgen.base_jitter must be in [0, 1]");
}

std::string GroundTruth::key(const std::string& user, const std::string& video) { return user + '\x1f' + video; }

void GroundTruth::set(const std::string& user, const std::string& video, double affinity) {
  if (!(affinity >= 0.0 && affinity <= 1.0)) throw DataError("ground truth affinity outside [0, 1]");
  values_[key(user, video)] = affinity;
}

std::optional<double> GroundTruth::affinity(const std::string& user, const std::string& video) const {
  auto it = values_.find(key(user, video));
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void GroundTruth::write(std::ostream& out) const {
  std::vector<std::pair<std::string, double>> rows(values_.begin(), values_.end());
  std::sort(rows.begin(), rows.end());
  out << "user_id,video_id,affinity\n";
  for (const auto& [k, a] : rows) {
    const auto sep = k.find('\x1f');
    out << k.substr(0, sep) << ',' << k.substr(sep + 1) << ',' << format_number(a) << '\n';
  }
}

GroundTruth GroundTruth::read(std::istream& in, const std::string& source) {
  GroundTruth gt;
  std::string line;
  std::size_t n = 0;
  if (!std::getline(in, line)) return gt;
  ++n;
  if (line.rfind("user_id,video_id,affinity", 0) != 0)
    throw DataError(source + ":1: expected header user_id,video_id,affinity");
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string u, v, a;
    if (!std::getline(ss, u, ',') || !std::getline(ss, v, ',') || !std::getline(ss, a))
      throw DataError(source + ":" + std::to_string(n) + ": expected 3 fields");
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(a, &used);
      if (used != a.size()) throw std::invalid_argument(a);
    } catch (const std::exception&) {
      throw DataError(source + ":" + std::to_string(n) + ": affinity is not a number");
    }
    try {
      gt.set(u, v, value);
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return gt;
}

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const GroupScheme& groups = cfg.length_groups;
  const double max_len = groups.max_length();

  std::vector<std::string> user_ids(cfg.n_users);
  for (std::size_t u = 0; u < cfg.n_users; ++u) user_ids[u] = "u" + std::to_string(u);

  std::vector<Video> videos(cfg.n_videos);
  std::vector<std::size_t> topic(cfg.n_videos);
  std::uniform_int_distribution<std::size_t> pick_group(0, groups.group_count() - 1);
  std::uniform_int_distribution<std::size_t> pick_topic(0, cfg.n_topics - 1);
  for (std::size_t v = 0; v < cfg.n_videos; ++v) {
    const std::size_t g = pick_group(rng);
    const long lo = static_cast<long>(std::floor(groups.lower(g))) + 1;
    const long hi = static_cast<long>(std::floor(groups.upper(g)));
    std::uniform_int_distribution<long> pick_len(lo, std::max(lo, hi));
    videos[v] = {"v" + std::to_string(v), static_cast<double>(pick_len(rng))};
    topic[v] = pick_topic(rng);
  }

  // Symmetric Dirichlet through normalized gammas; only the ratio to the
  // largest component matters for the affinity.
  std::vector<std::vector<double>> theta(cfg.n_users, std::vector<double>(cfg.n_topics));
  std::gamma_distribution<double> gamma(cfg.affinity_concentration, 1.0);
  for (auto& row : theta) {
    double top = 0.0;
    for (double& x : row) {
      x = gamma(rng);
      top = std::max(top, x);
    }
    for (double& x : row) x = top > 0.0 ? x / top : 1.0;
  }

  auto catalog = std::make_shared<const Catalog>(user_ids, videos);
  std::vector<Interaction> log;
  log.reserve(cfg.n_interactions);
  std::unordered_set<std::uint64_t> seen;
  std::uniform_int_distribution<std::size_t> pick_user(0, cfg.n_users - 1), pick_video(0, cfg.n_videos - 1);
  std::uniform_real_distribution<double> jitter(1.0 - cfg.base_jitter, 1.0 + cfg.base_jitter);
  std::normal_distribution<double> noise(0.0, 1.0);
  SynthResult out;
  while (log.size() < cfg.n_interactions) {
    const auto u = static_cast<UserIndex>(pick_user(rng));
    const auto v = static_cast<VideoIndex>(pick_video(rng));
    if (!seen.insert((static_cast<std::uint64_t>(u) << 32) | v).second) continue;
    const double l = videos[v].length;
    const double a = theta[u][topic[v]];
    const double base = (l / max_len) * jitter(rng);
    const double eps = cfg.noise_std * noise(rng);
    const double t = std::clamp(l * (a * (1.0 - cfg.bias_strength) + cfg.bias_strength * base) + eps, 0.0, 3.0 * l);
    log.push_back({u, v, t});
    out.truth.set(user_ids[u], videos[v].id, a);
  }
  out.data = Dataset(catalog, std::move(log));
  return out;
}

double oracle_view_time(const GroundTruth& truth, const std::string& user, const std::string& video, double length) {
  const auto a = truth.affinity(user, video);
  if (!a) throw DataError("ground truth has no entry for user '" + user + "', video '" + video + "'");
  return length * *a;
}

TruthFn oracle_truth(const GroundTruth& truth, const Catalog& catalog) {
  return [&truth, &catalog](const Interaction& x) {
    const Video& v = catalog.video(x.video);
    return oracle_view_time(truth, catalog.user_id(x.user), v.id, v.length);
  };
}

}  // namespace viewrank
