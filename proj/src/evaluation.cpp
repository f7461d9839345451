#include "viewrank/evaluation.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "viewrank/error.hpp"
#include "viewrank/stats.hpp"

namespace viewrank {

void sort_ranked(std::vector<RankedEntry>& entries, const Catalog& catalog) {
  std::stable_sort(entries.begin(), entries.end(), [&](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return catalog.video(a.video).id < catalog.video(b.video).id;
  });
}

std::vector<RankedList> build_ranked_lists(const Dataset& data, const Scorer& scorer, const TruthFn& truth,
                                           const std::function<bool(const Interaction&)>& keep) {
  std::vector<RankedList> lists;
  for (UserIndex u : data.active_users()) {
    RankedList list;
    list.user = u;
    for (std::size_t i : data.user_interactions(u)) {
      const Interaction& x = data.interaction(i);
      if (keep && !keep(x)) continue;
      list.entries.push_back({x.video, data.length_of(x), truth ? truth(x) : x.view_time, scorer(u, x.video)});
    }
    if (list.entries.empty()) continue;
    sort_ranked(list.entries, data.catalog());
    lists.push_back(std::move(list));
  }
  return lists;
}

double view_time_at_k(const RankedList& list, std::size_t k) {
  double total = 0.0;
  const std::size_t n = std::min(k, list.entries.size());
  for (std::size_t i = 0; i < n; ++i) total += list.entries[i].view_time;
  return total;
}

double view_time_at_t(const RankedList& list, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("view_time_at_t: T must be positive");
  double remaining = t;
  double total = 0.0;
  for (const auto& e : list.entries) {
    if (e.length <= remaining) {
      total += e.view_time;
      remaining -= e.length;
      if (remaining <= 0.0) break;
    } else {
      total += e.view_time * (remaining / e.length);
      break;
    }
  }
  return total;
}

std::vector<std::optional<double>> per_group_view_time_at_k(const Dataset& data, const Scorer& scorer,
                                                            const GroupScheme& scheme, std::size_t k,
                                                            const TruthFn& truth) {
  const auto groups = video_groups(data.catalog(), scheme);
  std::vector<std::optional<double>> out(scheme.group_count());
  for (std::size_t g = 0; g < scheme.group_count(); ++g) {
    const auto lists = build_ranked_lists(data, scorer, truth,
                                          [&](const Interaction& x) { return groups[x.video] == g; });
    if (lists.empty()) continue;
    double sum = 0.0;
    for (const auto& l : lists) sum += view_time_at_k(l, k);
    out[g] = sum / static_cast<double>(lists.size());
  }
  return out;
}

double entropy_bits(std::span<const double> p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log2(x);
  return h;
}

double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("jsd: distributions have different support sizes");
  auto check = [](std::span<const double> d, const char* name) {
    double sum = 0.0;
    for (double x : d) {
      if (!(x >= 0.0)) throw std::invalid_argument(std::string("jsd: ") + name + " has a negative mass");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument(std::string("jsd: ") + name + " is not normalized");
  };
  check(p, "P");
  check(q, "Q");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  const double d = entropy_bits(m) - 0.5 * (entropy_bits(p) + entropy_bits(q));
  return std::clamp(d, 0.0, 1.0);
}

double jsd_counts(const std::map<std::string, double>& p, const std::map<std::string, double>& q) {
  std::map<std::string, std::pair<double, double>> joint;
  double sp = 0.0, sq = 0.0;
  for (const auto& [k, v] : p) {
    joint[k].first += v;
    sp += v;
  }
  for (const auto& [k, v] : q) {
    joint[k].second += v;
    sq += v;
  }
  if (!(sp > 0.0) || !(sq > 0.0)) throw std::invalid_argument("jsd_counts: empty histogram");
  std::vector<double> a, b;
  for (const auto& [k, v] : joint) {
    a.push_back(v.first / sp);
    b.push_back(v.second / sq);
  }
  return jsd(a, b);
}

double ScoreDistribution::mean_spread() const {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& g : groups) {
    if (g.count == 0) continue;
    lo = std::min(lo, g.mean);
    hi = std::max(hi, g.mean);
  }
  return hi >= lo ? hi - lo : 0.0;
}

ScoreDistribution score_distribution_stats(const Dataset& data, const Scorer& scorer, const GroupScheme& scheme) {
  if (data.size() < 2) throw DataError("score distribution needs at least 2 test samples");
  const auto groups = video_groups(data.catalog(), scheme);
  std::vector<double> scores(data.size());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Interaction& x = data.interaction(i);
    scores[i] = scorer(x.user, x.video);
    lo = std::min(lo, scores[i]);
    hi = std::max(hi, scores[i]);
  }
  ScoreDistribution out;
  out.degenerate = !(hi > lo);
  std::vector<std::vector<double>> per_group(scheme.group_count());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double z = out.degenerate ? 0.0 : (scores[i] - lo) / (hi - lo);
    per_group[groups[data.interaction(i).video]].push_back(z);
  }
  for (const auto& values : per_group) {
    const MeanStd ms = mean_std(values);
    out.groups.push_back({values.size(), ms.mean, ms.std});
  }
  return out;
}

std::string view_time_at_t_key(double t) { return "View_Time@" + format_number(t); }

std::string view_time_at_k_key(std::size_t k) { return "View_Time@K" + std::to_string(k); }

namespace {

std::vector<std::string> top_labels(std::vector<RankedEntry> entries, std::size_t k, const Catalog& catalog,
                                    const std::map<std::string, std::string>* categories) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, entries.size()); ++i) {
    const std::string& id = catalog.video(entries[i].video).id;
    if (categories) {
      auto it = categories->find(id);
      out.push_back(it == categories->end() ? std::string("<unknown>") : it->second);
    } else {
      out.push_back(id);
    }
  }
  return out;
}

}  // namespace

MetricReport evaluate(const Dataset& data, const Scorer& scorer, const GroupScheme& scheme, const EvalConfig& cfg,
                      const TruthFn& truth, const std::map<std::string, std::string>* categories) {
  MetricReport report;
  const Catalog& catalog = data.catalog();
  const auto lists = build_ranked_lists(data, scorer, truth);
  report.users = lists.size();
  std::map<std::string, double> sums;
  std::map<std::string, double> rec_hist, truth_hist;
  const std::string inter_key = "Intersection@" + std::to_string(cfg.intersection_k);
  for (const auto& list : lists) {
    const std::string& uid = catalog.user_id(list.user);
    auto add = [&](const std::string& key, double v) {
      sums[key] += v;
      report.per_user.emplace_back(uid, key, v);
    };
    for (std::size_t k : cfg.k_values) add(view_time_at_k_key(k), view_time_at_k(list, k));
    for (double t : cfg.t_values) add(view_time_at_t_key(t), view_time_at_t(list, t));

    // Truth ranking: by true view time, ties by video id.
    std::vector<RankedEntry> by_truth = list.entries;
    for (auto& e : by_truth) e.score = e.view_time;
    sort_ranked(by_truth, catalog);
    const auto rec = top_labels(list.entries, cfg.intersection_k, catalog, categories);
    const auto act = top_labels(by_truth, cfg.intersection_k, catalog, categories);
    add(inter_key, static_cast<double>(size_of_intersection<std::string>(rec, act)));
    for (const auto& c : rec) rec_hist[c] += 1.0;
    for (const auto& c : act) truth_hist[c] += 1.0;
  }
  for (const auto& [key, sum] : sums) report.aggregate[key] = report.users ? sum / static_cast<double>(report.users) : 0.0;
  if (!rec_hist.empty()) report.aggregate["JSD@" + std::to_string(cfg.intersection_k)] = jsd_counts(rec_hist, truth_hist);

  const auto groups = per_group_view_time_at_k(data, scorer, scheme, cfg.group_k, truth);
  const std::string gk = view_time_at_k_key(cfg.group_k);
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (groups[g]) report.per_group.emplace_back(scheme.label(g), gk, *groups[g]);
  if (data.size() >= 2) {
    report.scores = score_distribution_stats(data, scorer, scheme);
    for (std::size_t g = 0; g < report.scores.groups.size(); ++g) {
      const auto& s = report.scores.groups[g];
      if (s.count == 0) continue;
      report.per_group.emplace_back(scheme.label(g), "score_mean", s.mean);
      report.per_group.emplace_back(scheme.label(g), "score_std", s.std);
    }
    report.aggregate["score_mean_spread"] = report.scores.mean_spread();
  }
  return report;
}

std::string report_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["users"] = report.users;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.aggregate) metrics[k] = v;
  j["metrics"] = metrics;
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const auto& [g, m, v] : report.per_group) groups.push_back({{"group", g}, {"metric", m}, {"value", v}});
  j["groups"] = groups;
  j["score_distribution_degenerate"] = report.scores.degenerate;
  return j.dump(2) + "\n";
}

void write_user_csv(std::ostream& out, const MetricReport& report) {
  out << "user,metric,value\n";
  for (const auto& [u, m, v] : report.per_user) out << u << ',' << m << ',' << format_number(v) << '\n';
}

void write_group_csv(std::ostream& out, const MetricReport& report) {
  out << "group,metric,value\n";
  for (const auto& [g, m, v] : report.per_group) out << '"' << g << "\"," << m << ',' << format_number(v) << '\n';
}

double relative_improvement(double ours, double baseline) {
  if (baseline == 0.0) throw std::invalid_argument("relative_improvement: zero baseline");
  return (ours - baseline) / baseline;
}

}  // namespace viewrank
