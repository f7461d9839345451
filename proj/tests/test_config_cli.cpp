#include <cstdlib>

#include "cli_run.hpp"
#include "doctest.h"
#include "json.hpp"
#include "viewrank/checkpoint.hpp"
#include "viewrank/config.hpp"
#include "viewrank/error.hpp"
#include "viewrank/pipeline.hpp"
#include "viewrank/synthgen.hpp"

using namespace viewrank;
using cli_run::run;
using cli_run::slurp;

namespace {

std::string what_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const UsageError& e) {
    return e.what();
  }
  return "";
}

// Small synthetic run config shared by the CLI tests.
const char* kTinyConfig = R"({
  "synthgen": {"n_users": 40, "n_videos": 300, "n_interactions": 3000, "seed": 2},
  "model": {"embedding_dim": 4, "hidden_sizes": [8, 4]},
  "train": {"max_epochs": 2, "batch_size": 256}
})";

}  // namespace

TEST_CASE("config defaults and overrides") {
  const RunConfig d = parse_config("{}");
  CHECK(d.method.kind == Method::kVldrec);
  CHECK(d.train.alpha.alpha == 0.5);
  CHECK(d.train.labeling.beta == 0.5);
  CHECK(d.train.labeling.epsilon == 0.1);
  CHECK(d.dataset.positive_fraction == 0.2);
  CHECK(d.model.inference == InferenceHead::kBlend);
  CHECK(d.dataset.scheme().upper_edges() == GroupScheme::kuaishou().upper_edges());

  const RunConfig c = parse_config(R"({"method": {"kind": "ips_c", "ips_cap": 0.2},
    "dataset": {"group_preset": "wechat", "max_length": 120, "split": {"seed": 9}},
    "train": {"alpha": 0.7, "seed": 3}, "evaluation": {"k": [1, 2], "t": [60]}})");
  CHECK(c.method.kind == Method::kIpsC);
  CHECK(*c.method.ips_cap == 0.2);
  CHECK(c.dataset.scheme().group_count() == 7);
  CHECK(c.dataset.split.seed == 9);
  CHECK(c.train.alpha.alpha == 0.7);
  CHECK(c.evaluation.metrics.k_values == std::vector<std::size_t>{1, 2});

  const RunConfig custom = parse_config(R"({"dataset": {"group_boundaries": [10, 60]}})");
  CHECK(custom.dataset.scheme().group_count() == 2);
}

TEST_CASE("config errors name the field") {
  CHECK(what_of(R"({"train": {"lr": 0.1}})") == "train.lr: unknown field");
  CHECK(what_of(R"({"train": {"alpha": "high"}})") == "train.alpha: expected a number");
  CHECK(what_of(R"({"model": {"hidden_sizes": [4, -1]}})") == "model.hidden_sizes[1]: expected a non-negative integer");
  CHECK(what_of(R"({"dataset": {"split": {"extra": 1}}})") == "dataset.split.extra: unknown field");
  CHECK(what_of(R"({"method": {"kind": "magic"}})").find("unknown method") != std::string::npos);
  CHECK(what_of(R"({"bogus": {}})") == "bogus: unknown field");
  CHECK(what_of("{not json").rfind("config: not valid JSON", 0) == 0);
  CHECK(what_of(R"({"train": {"alpha": 2}})").find("alpha") != std::string::npos);
  CHECK(what_of(R"({"dataset": {"max_length": 200}})").find("max_length") != std::string::npos);
}

TEST_CASE("config json round trip") {
  const RunConfig c = parse_config(R"({"method": {"kind": "caus_e", "caus_e_lambda": 0.5}, "train": {"beta": 0.3}})");
  const std::string text = config_json(c);
  CHECK(config_json(parse_config(text)) == text);
  CHECK(nlohmann::json::parse(text)["method"]["kind"] == "caus_e");
}

TEST_CASE("grid presets") {
  CHECK(grid_preset("learning_rate") == std::vector<double>{0.005, 0.001, 0.0005, 0.0001});
  CHECK(grid_preset("alpha") == std::vector<double>{0.1, 0.3, 0.5, 0.7, 0.9});
  CHECK(grid_preset("beta").size() == 5);
  CHECK_THROWS_AS(grid_preset("momentum"), UsageError);
}

TEST_CASE("checkpoint round trip") {
  SynthConfig sc;
  sc.n_users = 10;
  sc.n_videos = 40;
  sc.n_interactions = 200;
  const Dataset d = generate(sc).data;
  RunConfig cfg = parse_config(kTinyConfig);
  cfg.method.kind = Method::kCausE;
  cfg.train.max_epochs = 1;
  const FitOutput fit = viewrank::fit(cfg, d, d);
  const Checkpoint ck{fit.result.model, d.shared_catalog(), fit.scheme};
  std::stringstream s;
  save_checkpoint(s, ck);
  const std::string first = s.str();
  const Checkpoint back = load_checkpoint(s);
  CHECK(back.model.method == Method::kCausE);
  REQUIRE(back.model.nets.size() == 2);
  CHECK(back.model.nets[1].f.layers[0].weight == ck.model.nets[1].f.layers[0].weight);
  CHECK(back.catalog->video_count() == 40);
  std::stringstream again;
  save_checkpoint(again, back);
  CHECK(again.str() == first);

  std::stringstream broken(first.substr(0, first.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(broken), DataError);
}

TEST_CASE("cli usage errors") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  const auto v = run({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("0.1.0") != std::string::npos);
  CHECK(run({"train"}).code == 1);
  CHECK(run({"train", "--method", "nope", "--out", "x"}).code == 1);
  const auto missing = run({"evaluate", "--checkpoint", "/nonexistent/ck.json", "--test", "t.csv", "--out", "o"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("error:") == 0);
}

TEST_CASE("cli pipeline end to end") {
  cli_run::TempDir tmp("cli");
  cli_run::write_file(tmp.path() / "cfg.json", kTinyConfig);
  const std::string cfg = tmp / "cfg.json";

  REQUIRE(run({"synthgen", "--config", cfg, "--out", tmp / "synth"}).code == 0);
  CHECK(std::filesystem::exists(tmp.path() / "synth" / "ground_truth.csv"));
  CHECK(std::filesystem::exists(tmp.path() / "synth" / "manifest.json"));

  const auto ing = run({"ingest", "--config", cfg, "--interactions", tmp / "synth/interactions.csv", "--videos",
                        tmp / "synth/videos.csv", "--split-out", tmp / "split"});
  REQUIRE(ing.code == 0);
  CHECK(nlohmann::json::parse(ing.out).contains("interactions"));

  const auto groups = run({"analyze-groups", "--interactions", tmp / "synth/interactions.csv", "--videos",
                           tmp / "synth/videos.csv"});
  CHECK(groups.code == 0);
  CHECK(groups.out.rfind("length,", 0) == 0);

  const auto tr = run({"train", "--config", cfg, "--train", tmp / "split/train.csv", "--valid",
                       tmp / "split/validation.csv", "--videos", tmp / "split/videos.csv", "--out", tmp / "m.ckpt.json",
                       "--history", tmp / "hist.csv", "--dump-triples", tmp / "triples.csv"});
  REQUIRE_MESSAGE(tr.code == 0, tr.err);
  CHECK(std::filesystem::exists(tmp.path() / "m.ckpt.json.manifest.json"));
  CHECK(slurp(tmp.path() / "triples.csv").rfind("user,pos_video", 0) == 0);

  const auto ev = run({"evaluate", "--config", cfg, "--checkpoint", tmp / "m.ckpt.json", "--test",
                       tmp / "split/test.csv", "--ground-truth", tmp / "synth/ground_truth.csv", "--out", tmp / "eval"});
  REQUIRE_MESSAGE(ev.code == 0, ev.err);
  const auto metrics = nlohmann::json::parse(slurp(tmp.path() / "eval/metrics.json"));
  CHECK(metrics["metrics"].contains("View_Time@120"));
  CHECK(std::filesystem::exists(tmp.path() / "eval/users.csv"));
  CHECK(std::filesystem::exists(tmp.path() / "eval/groups.csv"));

  // Corrupt data exits with the data code.
  cli_run::write_file(tmp.path() / "bad.csv", "user_id,video_id,view_time\nu0,v0,abc\n");
  const auto bad = run({"evaluate", "--checkpoint", tmp / "m.ckpt.json", "--test", tmp / "bad.csv", "--out",
                        tmp / "eval2"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find(":2") != std::string::npos);

  // The triple dump needs a length-grouped method.
  const auto treg = run({"train", "--config", cfg, "--method", "t_reg", "--train", tmp / "split/train.csv", "--valid",
                         tmp / "split/validation.csv", "--videos", tmp / "split/videos.csv", "--out",
                         tmp / "t.ckpt.json", "--dump-triples", tmp / "t.csv"});
  CHECK(treg.code == 1);
}

TEST_CASE("cli grid resumes") {
  cli_run::TempDir tmp("grid");
  cli_run::write_file(tmp.path() / "cfg.json", R"({
    "synthgen": {"n_users": 30, "n_videos": 200, "n_interactions": 1500},
    "model": {"embedding_dim": 2, "hidden_sizes": [4]},
    "train": {"max_epochs": 1},
    "grid": {"alpha": [0.3, 0.7]}
  })");
  const std::string cfg = tmp / "cfg.json";
  REQUIRE(run({"synthgen", "--config", cfg, "--out", tmp / "s"}).code == 0);
  const std::vector<std::string> args{"grid", "--config", cfg, "--train", tmp / "s/interactions.csv", "--valid",
                                      tmp / "s/interactions.csv", "--videos", tmp / "s/videos.csv", "--out",
                                      tmp / "g"};
  const auto first = run(args);
  REQUIRE_MESSAGE(first.code == 0, first.err);
  CHECK(nlohmann::json::parse(first.out)["trials"] == 2);
  const auto second = run(args);
  CHECK(second.code == 0);
  CHECK(second.err.find("already complete") != std::string::npos);
  CHECK(second.out == first.out);
}
