#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "viewrank/data.hpp"
#include "viewrank/evaluation.hpp"
#include "viewrank/grouping.hpp"

namespace viewrank {

struct SynthConfig {
  std::size_t n_users = 500;
  std::size_t n_videos = 5000;
  std::size_t n_interactions = 100000;
  std::size_t n_topics = 10;
  // Video lengths: a group of this scheme uniformly at random, then an integer
  // length uniformly inside it.
  GroupScheme length_groups = GroupScheme::kuaishou();
  double affinity_concentration = 1.0;  // symmetric Dirichlet over topics
  double bias_strength = 0.5;
  double noise_std = 1.0;    // seconds, additive to view time
  double base_jitter = 0.25;  // base progress = (l / max_length) * U(1 - j, 1 + j)
  std::uint64_t seed = 1;

  void validate() const;
};

// True affinity in [0, 1] per (user id, video id).
class GroundTruth {
 public:
  void set(const std::string& user, const std::string& video, double affinity);
  std::optional<double> affinity(const std::string& user, const std::string& video) const;
  std::size_t size() const { return values_.size(); }

  // Rows sorted by user id, then video id.
  void write(std::ostream& out) const;
  static GroundTruth read(std::istream& in, const std::string& source = "ground truth");

 private:
  static std::string key(const std::string& user, const std::string& video);
  std::unordered_map<std::string, double> values_;
};

struct SynthResult {
  Dataset data;
  GroundTruth truth;
};

SynthResult generate(const SynthConfig& cfg);

// Noise-free, bias-free view time length * a(u, v). Throws DataError for a
// pair the ground truth does not cover.
double oracle_view_time(const GroundTruth& truth, const std::string& user, const std::string& video, double length);

// Evaluation truth backed by oracle_view_time over `catalog` ids.
TruthFn oracle_truth(const GroundTruth& truth, const Catalog& catalog);

}  // namespace viewrank
