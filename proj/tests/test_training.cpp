#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "viewrank/error.hpp"
#include "viewrank/pipeline.hpp"
#include "viewrank/synthgen.hpp"
#include "viewrank/training.hpp"

using namespace viewrank;

TEST_CASE("adam first step moves by the learning rate") {
  std::vector<double> p{1.0, -2.0, 0.0}, g{0.3, -4.0, 0.0}, m(3), v(3);
  adam_update(p, g, m, v, 1, 0.01);
  // With bias correction the first step is lr * g / (|g| + eps').
  CHECK(p[0] == doctest::Approx(0.99));
  CHECK(p[1] == doctest::Approx(-1.99));
  CHECK(p[2] == 0.0);
  CHECK(m[0] == doctest::Approx(0.03));
  CHECK(v[1] == doctest::Approx(0.016));
}

TEST_CASE("adam second step against a reference recurrence") {
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.1;
  double x = 0.5, mm = 0, vv = 0;
  std::vector<double> p{0.5}, m(1), v(1);
  for (long step = 1; step <= 5; ++step) {
    const double grad = 2 * x;  // d/dx x^2
    mm = b1 * mm + (1 - b1) * grad;
    vv = b2 * vv + (1 - b2) * grad * grad;
    x -= lr * (mm / (1 - std::pow(b1, step))) / (std::sqrt(vv / (1 - std::pow(b2, step))) + eps);
    std::vector<double> gs{2 * p[0]};
    adam_update(p, gs, m, v, step, lr);
    CHECK(p[0] == doctest::Approx(x).epsilon(1e-14));
  }
}

TEST_CASE("lazy adam leaves untouched embedding rows alone") {
  FeatureSpec spec;
  spec.user_vocab = 3;
  spec.video_vocab = 2;
  ModelParams p = init_params(spec, HeadConfig{}, {0, 0}, 1);
  const ModelParams before = p;
  Gradients g(p);
  ForwardTrace t;
  score(p, HeadId::kF, 1, 0, false, nullptr, &t);
  backward(p, HeadId::kF, t, 1.0, g);
  AdamState state(p);
  adam_step(p, g, state, 0.01);
  CHECK(p.emb.user.row(0) == before.emb.user.row(0));
  CHECK(p.emb.user.row(2) == before.emb.user.row(2));
  CHECK(p.emb.user.row(1) != before.emb.user.row(1));
  CHECK(p.emb.video.row(1) == before.emb.video.row(1));
  CHECK(state.step == 1);
}

TEST_CASE("adam step rejects non-finite gradients before mutating") {
  FeatureSpec spec;
  ModelParams p = init_params(spec, HeadConfig{}, {0}, 1);
  const ModelParams before = p;
  Gradients g(p);
  g.f_un.layers[1].bias(0) = NAN;
  AdamState state(p);
  try {
    adam_step(p, g, state, 0.01);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("f_un.layer1.bias") != std::string::npos);
  }
  CHECK(p.f.layers[0].weight == before.f.layers[0].weight);
  CHECK(state.step == 0);
}

TEST_CASE("batch loss mixes masked terms") {
  const Dataset d = fixtures::make({{"a", 10}, {"b", 20}}, {{"u", "a", 5}, {"u", "b", 5}, {"u", "a", 8}});
  FeatureSpec spec;
  spec.user_vocab = 1;
  spec.video_vocab = 2;
  ModelParams p = init_params(spec, HeadConfig{}, {0, 0}, 3);
  auto bpr = [&](HeadId h, const OrientedPair& pr) {
    const auto& x = d.interaction(pr.positive);
    const auto& y = d.interaction(pr.negative);
    return bpr_loss(score(p, h, x.user, x.video), score(p, h, y.user, y.video));
  };
  std::vector<TrainingTriple> ts(3);
  ts[0].general = OrientedPair{0, 1};
  ts[1].general = OrientedPair{1, 0};
  ts[1].grouped = OrientedPair{2, 0};
  ts[2].grouped = OrientedPair{0, 2};
  LossWeights w;
  w.alpha = 0.3;
  Rng rng(1);
  const BatchLoss l = batch_loss(p, d, ts, w, rng, false);
  const double l1 = (bpr(HeadId::kF, {0, 1}) + bpr(HeadId::kF, {1, 0})) / 2;
  const double l2 = (bpr(HeadId::kFUn, {2, 0}) + bpr(HeadId::kFUn, {0, 2})) / 2;
  CHECK(l.general == doctest::Approx(l1).epsilon(1e-14));
  CHECK(l.grouped == doctest::Approx(l2).epsilon(1e-14));
  CHECK(l.total == doctest::Approx(0.3 * l1 + 0.7 * l2).epsilon(1e-14));

  // All grouped slots masked: L2 = 0 and f_un receives no gradient.
  ts[1].grouped.reset();
  ts[2].grouped.reset();
  ts[2].general = OrientedPair{2, 1};
  Gradients g(p);
  const BatchLoss only = batch_loss(p, d, ts, w, rng, false, &g);
  CHECK(only.grouped == 0.0);
  for (const auto& layer : g.f_un.layers) CHECK(layer.weight.isZero());

  LossWeights bad;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

namespace {

RunConfig tiny_run(std::uint64_t seed) {
  RunConfig cfg;
  cfg.train.max_epochs = 3;
  cfg.train.batch_size = 128;
  cfg.train.seed = seed;
  cfg.model.embedding_dim = 4;
  cfg.model.head.hidden_sizes = {8, 4};
  return cfg;
}

Dataset tiny_synth(std::uint64_t seed) {
  SynthConfig sc;
  sc.n_users = 30;
  sc.n_videos = 200;
  sc.n_interactions = 2000;
  sc.seed = seed;
  return generate(sc).data;
}

}  // namespace

TEST_CASE("training loop records history and is reproducible") {
  const Dataset all = tiny_synth(2);
  const Splits split = viewrank::split(all, {0.1, 0.2, 1});
  const RunConfig cfg = tiny_run(4);
  const FitOutput a = fit(cfg, split.train, split.validation);
  const FitOutput b = fit(cfg, split.train, split.validation);
  REQUIRE(a.result.history.size() == 3);
  CHECK(a.result.best_epoch >= 1);
  CHECK(a.scheme.has_tau());
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.result.history[i].loss == b.result.history[i].loss);
    CHECK(a.result.history[i].valid_view_time_at_t == b.result.history[i].valid_view_time_at_t);
    CHECK(std::isfinite(a.result.history[i].loss));
  }
  // The loss drops from the untrained value of ln 2.
  CHECK(a.result.history.back().loss < std::log(2.0));
  CHECK(a.result.model.nets[0].f.layers[0].weight == b.result.model.nets[0].f.layers[0].weight);

  std::ostringstream csv;
  write_history_csv(csv, a.result.history);
  CHECK(csv.str().rfind("epoch,L,L1,L2,valid_view_time_at_T\n1,", 0) == 0);
}

TEST_CASE("early stopping keeps the best epoch") {
  const Dataset all = tiny_synth(3);
  const Splits split = viewrank::split(all, {0.1, 0.2, 1});
  RunConfig cfg = tiny_run(1);
  cfg.train.max_epochs = 12;
  cfg.train.patience = 0;
  const FitOutput out = fit(cfg, split.train, split.validation);
  const auto& h = out.result.history;
  REQUIRE(!h.empty());
  double best = -1;
  for (const auto& r : h) best = std::max(best, r.valid_view_time_at_t);
  CHECK(h[out.result.best_epoch - 1].valid_view_time_at_t == best);
  // Patience 0 stops right after the first non-improving epoch.
  if (h.size() < 12) CHECK(h.back().valid_view_time_at_t <= h[h.size() - 2].valid_view_time_at_t);
  CHECK(mean_view_time_at_t(out.result.model, split.validation, 120.0) == doctest::Approx(best));
}

TEST_CASE("training input errors") {
  const Dataset all = tiny_synth(5);
  RunConfig cfg = tiny_run(1);
  cfg.train.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.train.validate(), UsageError);
  cfg = tiny_run(1);
  CHECK_THROWS_AS(fit(cfg, Dataset{}, all), Error);

  // A user with a single interaction generates nothing.
  const Dataset solo = fixtures::make({{"a", 10}}, {{"u", "a", 5}});
  cfg.dataset.group_boundaries = std::vector<double>{60};
  CHECK_THROWS_AS(fit(cfg, solo, solo), DataError);
}
