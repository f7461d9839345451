#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "viewrank/model.hpp"
#include "viewrank/training.hpp"

namespace gradcheck {

// Loss of `params`; accumulates the analytic gradient when `grads` is set.
using LossFn = std::function<double(const viewrank::ModelParams&, viewrank::Gradients*)>;

struct Result {
  double max_rel_error = 0.0;
  std::string worst;  // array name and entry of the largest error
  std::size_t checked = 0;
};

// Relative error below this magnitude is measured against the floor instead,
// since central differences carry ~1e-11 absolute rounding noise.
inline constexpr double kFloor = 1e-6;

inline Result check(viewrank::ModelParams params, const LossFn& loss, double h = 1e-5) {
  viewrank::Gradients grads(params);
  loss(params, &grads);
  std::vector<std::vector<double>> analytic;
  viewrank::for_each_array(grads, [&](const std::string&, std::span<double> g) {
    analytic.emplace_back(g.begin(), g.end());
  });
  Result r;
  std::size_t a = 0;
  viewrank::ModelParams probe = params;
  std::vector<std::pair<std::string, std::span<double>>> arrays;
  viewrank::for_each_array(probe, [&](const std::string& name, std::span<double> v) { arrays.emplace_back(name, v); });
  for (auto& [name, values] : arrays) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double x = values[i];
      values[i] = x + h;
      const double up = loss(probe, nullptr);
      values[i] = x - h;
      const double down = loss(probe, nullptr);
      values[i] = x;
      const double numeric = (up - down) / (2.0 * h);
      const double an = analytic[a][i];
      const double err = std::abs(an - numeric) / std::max({std::abs(an), std::abs(numeric), kFloor});
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst = name + "[" + std::to_string(i) + "]";
      }
      ++r.checked;
    }
    ++a;
  }
  return r;
}

// A random small multi-task problem: model, training data and a triple batch
// with randomly masked slots.
struct Problem {
  viewrank::Dataset data;
  viewrank::ModelParams params;
  std::vector<viewrank::TrainingTriple> triples;
  viewrank::LossWeights weights;
  std::uint64_t dropout_seed = 0;
};

inline Problem random_problem(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int n_users = uni(2, 5), n_videos = uni(3, 8), n_rows = uni(6, 16);
  std::vector<viewrank::Video> videos;
  for (int v = 0; v < n_videos; ++v) videos.push_back({"v" + std::to_string(v), static_cast<double>(uni(1, 60))});
  std::vector<fixtures::Row> rows;
  for (int i = 0; i < n_rows; ++i)
    rows.emplace_back("u" + std::to_string(uni(0, n_users - 1)), "v" + std::to_string(uni(0, n_videos - 1)),
                      static_cast<double>(uni(0, 60)));
  Problem p;
  p.data = fixtures::make(videos, rows);

  viewrank::FeatureSpec spec;
  spec.user_vocab = p.data.catalog().user_count();
  spec.video_vocab = p.data.catalog().video_count();
  spec.length_buckets = static_cast<std::size_t>(uni(1, 3));
  spec.embedding_dim = static_cast<std::size_t>(uni(1, 4));
  viewrank::HeadConfig head;
  head.hidden_sizes = {static_cast<std::size_t>(uni(1, 5)), static_cast<std::size_t>(uni(1, 3))};
  head.dropout_rate = uni(0, 1) ? 0.3 : 0.0;
  std::vector<std::uint32_t> bucket;
  for (int v = 0; v < n_videos; ++v) bucket.push_back(static_cast<std::uint32_t>(uni(0, int(spec.length_buckets) - 1)));
  p.params = viewrank::init_params(spec, head, bucket, seed);
  // Embeddings at init scale are tiny; widen them so every path carries signal.
  std::normal_distribution<double> wide(0.0, 0.5);
  for (auto* t : {&p.params.emb.user, &p.params.emb.video, &p.params.emb.length})
    for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] = wide(rng);

  const int n = uni(1, 8);
  for (int i = 0; i < n; ++i) {
    viewrank::TrainingTriple t;
    auto pick = [&] { return static_cast<std::size_t>(uni(0, n_rows - 1)); };
    const int mask = uni(0, 2);  // 0 both, 1 general only, 2 grouped only
    if (mask != 2) t.general = viewrank::OrientedPair{pick(), pick()};
    if (mask != 1) t.grouped = viewrank::OrientedPair{pick(), pick()};
    p.triples.push_back(t);
  }
  p.weights.alpha = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  p.dropout_seed = seed ^ 0x5eed;
  return p;
}

// Full multi-task loss with a fixed dropout draw per evaluation.
inline LossFn multitask_loss(const Problem& p) {
  return [&p](const viewrank::ModelParams& params, viewrank::Gradients* g) {
    viewrank::Rng rng(p.dropout_seed);
    return viewrank::batch_loss(params, p.data, p.triples, p.weights, rng, true, g).total;
  };
}

}  // namespace gradcheck
