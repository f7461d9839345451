#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "viewrank/error.hpp"
#include "viewrank/model.hpp"
#include "viewrank/training.hpp"

using namespace viewrank;

namespace {

ModelParams small_model(std::uint64_t seed = 1, double dropout = 0.0) {
  FeatureSpec spec;
  spec.user_vocab = 3;
  spec.video_vocab = 4;
  spec.length_buckets = 2;
  spec.embedding_dim = 2;
  HeadConfig head;
  head.hidden_sizes = {3, 2};
  head.dropout_rate = dropout;
  return init_params(spec, head, {0, 0, 1, 1}, seed);
}

}  // namespace

TEST_CASE("parameter layout") {
  const ModelParams p = small_model();
  CHECK(p.emb.user.rows() == 3);
  CHECK(p.emb.video.rows() == 4);
  CHECK(p.emb.length.rows() == 2);
  REQUIRE(p.f.layers.size() == 3);
  CHECK(p.f.layers[0].weight.rows() == 3);
  CHECK(p.f.layers[0].weight.cols() == 6);
  CHECK(p.f.layers[2].weight.rows() == 1);
  // embeddings 9 rows x 2, each head 6*3+3 + 3*2+2 + 2+1
  CHECK(parameter_count(p) == 18 + 2 * (21 + 8 + 3));

  std::vector<std::string> names;
  for_each_array(const_cast<ModelParams&>(p), [&](const std::string& n, std::span<double>) { names.push_back(n); });
  CHECK(names.front() == "emb.user");
  CHECK(std::find(names.begin(), names.end(), "f_un.layer2.bias") != names.end());
}

TEST_CASE("init is deterministic and zero mode is zero") {
  const ModelParams a = small_model(7), b = small_model(7), c = small_model(8);
  CHECK(a.f.layers[0].weight == b.f.layers[0].weight);
  CHECK(a.emb.video == b.emb.video);
  CHECK(a.f.layers[0].weight != c.f.layers[0].weight);
  // Heads are drawn independently.
  CHECK(a.f.layers[0].weight != a.f_un.layers[0].weight);

  FeatureSpec spec;
  const ModelParams z = init_params(spec, HeadConfig{}, {0}, 1, InitMode::kZero);
  CHECK(score(z, HeadId::kF, 0, 0) == 0.0);
}

TEST_CASE("init validation") {
  FeatureSpec spec;
  spec.embedding_dim = 0;
  CHECK_THROWS_AS(init_params(spec, HeadConfig{}, {0}, 1), UsageError);
  spec.embedding_dim = 2;
  HeadConfig head;
  head.dropout_rate = 1.0;
  CHECK_THROWS_AS(init_params(spec, head, {0}, 1), UsageError);
  CHECK_THROWS_AS(init_params(spec, HeadConfig{}, {0, 0}, 1), UsageError);
  CHECK_THROWS_AS(init_params(spec, HeadConfig{}, {1}, 1), UsageError);
}

TEST_CASE("score matches a hand-computed forward pass") {
  FeatureSpec spec;
  spec.embedding_dim = 1;
  HeadConfig head;
  head.hidden_sizes = {2};
  ModelParams p = init_params(spec, head, {0}, 1, InitMode::kZero);
  p.emb.user(0, 0) = 1.0;
  p.emb.video(0, 0) = 2.0;
  p.emb.length(0, 0) = -1.0;
  auto& l0 = p.f.layers[0];
  l0.weight << 1, 1, 1,  // 1 + 2 - 1 = 2
      -1, 0, 0;          // -1 -> relu 0
  l0.bias << 0.5, 0;
  p.f.layers[1].weight << 3, 5;
  p.f.layers[1].bias << 0.25;
  CHECK(score(p, HeadId::kF, 0, 0) == doctest::Approx(3 * 2.5 + 0.25));
  CHECK(score(p, HeadId::kFUn, 0, 0) == 0.0);
  CHECK_THROWS_AS(score(p, HeadId::kF, 1, 0), std::out_of_range);
  CHECK_THROWS_AS(score(p, HeadId::kF, 0, 1), std::out_of_range);
}

TEST_CASE("dropout is inactive at inference") {
  const ModelParams p = small_model(3, 0.5);
  const double a = score(p, HeadId::kF, 1, 2);
  CHECK(score(p, HeadId::kF, 1, 2) == a);
  Rng rng(1);
  bool differs = false;
  for (int i = 0; i < 20; ++i) differs |= score(p, HeadId::kF, 1, 2, true, &rng) != a;
  CHECK(differs);
}

TEST_CASE("bpr loss values") {
  CHECK(bpr_loss(0.0, 0.0) == doctest::Approx(std::log(2.0)));
  CHECK(bpr_loss(2.0, 1.0) == doctest::Approx(-std::log(1.0 / (1.0 + std::exp(-1.0)))));
  CHECK(bpr_loss(1000.0, 0.0) == doctest::Approx(0.0));
  CHECK(bpr_loss(0.0, 1000.0) == doctest::Approx(1000.0));
  CHECK(bpr_loss_slope(0.0) == doctest::Approx(-0.5));
  CHECK(bpr_loss_slope(-800.0) == doctest::Approx(-1.0));
  CHECK(bpr_loss_slope(800.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(bpr_loss(std::nan(""), 0.0), NumericError);
  CHECK_THROWS_AS(bpr_loss(0.0, INFINITY), NumericError);
}

TEST_CASE("analytic gradients match finite differences") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const gradcheck::Problem p = gradcheck::random_problem(seed);
    const auto r = gradcheck::check(p.params, gradcheck::multitask_loss(p));
    INFO("seed " << seed << " worst " << r.worst);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("gradients clear and track touched rows") {
  const ModelParams p = small_model();
  Gradients g(p);
  ForwardTrace t;
  score(p, HeadId::kF, 2, 3, false, nullptr, &t);
  backward(p, HeadId::kF, t, 1.0, g);
  CHECK(g.touched_users == std::vector<std::uint32_t>{2});
  CHECK(g.touched_videos == std::vector<std::uint32_t>{3});
  CHECK(g.touched_lengths == std::vector<std::uint32_t>{1});
  CHECK(g.f_un.layers[0].weight.isZero());
  g.clear();
  CHECK(g.touched_users.empty());
  CHECK(g.emb.user.isZero());
  CHECK(g.f.layers[0].weight.isZero());
}
