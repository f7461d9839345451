#include "viewrank/cli.hpp"

#include <Eigen/Core>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "viewrank/checkpoint.hpp"
#include "viewrank/config.hpp"
#include "viewrank/error.hpp"
#include "viewrank/evaluation.hpp"
#include "viewrank/grouping.hpp"
#include "viewrank/pipeline.hpp"
#include "viewrank/sampling.hpp"
#include "viewrank/synthgen.hpp"

namespace viewrank {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

RunConfig resolve_config(const std::string& path) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_config(path);
  if (const char* s = std::getenv("VIEWRANK_SEED"); s && *s) {
    std::uint64_t seed = 0;
    const char* end = s + std::strlen(s);
    auto [p, ec] = std::from_chars(s, end, seed);
    if (ec != std::errc() || p != end) throw UsageError("VIEWRANK_SEED: expected a non-negative integer");
    cfg.train.seed = seed;
    cfg.synth.seed = seed;
  }
  cfg.synth.length_groups = cfg.dataset.scheme();
  cfg.validate();
  return cfg;
}

fs::path output_path(const std::string& p) {
  fs::path path(p);
  if (const char* dir = std::getenv("VIEWRANK_OUTPUT_DIR"); dir && *dir && path.is_relative()) path = fs::path(dir) / path;
  return path;
}

std::ifstream open_input(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw UsageError(what + ": file not found: " + path);
  std::ifstream in(path);
  if (!in) throw UsageError(what + ": cannot read " + path);
  return in;
}

// Dereferenced at the call site; the stream closes at the end of the statement.
std::unique_ptr<std::ofstream> open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto out = std::make_unique<std::ofstream>(path);
  if (!*out) throw UsageError("cannot write " + path.string());
  return out;
}

std::string require_path(const std::string& flag_value, const std::optional<std::string>& config_value,
                         const std::string& what) {
  if (!flag_value.empty()) return flag_value;
  if (config_value) return *config_value;
  throw UsageError(what + " is required");
}

void write_manifest(const fs::path& path, const std::string& subcommand, const RunConfig& cfg,
                    const ordered_json& inputs, const ordered_json& outputs) {
  ordered_json m;
  m["tool"] = "viewrank";
  m["version"] = kVersion;
  m["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION);
  m["subcommand"] = subcommand;
  m["seed"] = cfg.train.seed;
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  m["config"] = ordered_json::parse(config_json(cfg));
  *open_output(path) << m.dump(2) << '\n';
}

std::vector<InteractionRow> load_rows(const std::string& path, const std::string& what) {
  auto in = open_input(path, what);
  return read_interaction_rows(in, path);
}

std::vector<Video> load_videos(const std::string& path) {
  auto in = open_input(path, "videos");
  return read_video_rows(in, path);
}

std::map<std::string, std::string> load_categories(const std::string& path) {
  auto in = open_input(path, "category file");
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char sep = line.find('\t') != std::string::npos ? '\t' : ',';
    const auto at = line.find(sep);
    if (at == std::string::npos) throw DataError(path + ":" + std::to_string(n) + ": expected video_id,category");
    if (n == 1 && line.substr(0, at) == "video_id") continue;
    out[line.substr(0, at)] = line.substr(at + 1);
  }
  return out;
}

PreprocessResult load_preprocessed(const RunConfig& cfg, const std::string& interactions, const std::string& videos,
                                   IngestReport& report) {
  auto in_x = open_input(interactions, "interactions");
  auto in_v = open_input(videos, "videos");
  const Dataset raw = ingest(in_x, in_v, &report);
  return preprocess(raw, cfg.dataset.preprocess);
}

// ---- subcommands ----

struct Flags {
  std::string config, interactions, videos, train, valid, test, out, history, method, dump_triples, checkpoint,
      ground_truth, category_file, split_out, axes;
  bool skip_unknown = false;
};

int cmd_ingest(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(f.config);
  const std::string xp = require_path(f.interactions, cfg.dataset.interactions, "--interactions");
  const std::string vp = require_path(f.videos, cfg.dataset.videos, "--videos");
  IngestReport report;
  auto in_x = open_input(xp, "interactions");
  auto in_v = open_input(vp, "videos");
  const Dataset raw = ingest(in_x, in_v, &report);
  const PreprocessResult pre = preprocess(raw, cfg.dataset.preprocess);
  const Dataset& d = pre.data;
  const GroupScheme scheme = cfg.dataset.scheme();

  ordered_json stats;
  stats["raw_interactions"] = raw.size();
  stats["removed_by_progress"] = pre.removed_by_progress;
  stats["removed_videos"] = pre.removed_videos;
  stats["removed_by_length"] = pre.removed_by_length;
  stats["interactions"] = d.size();
  stats["active_users"] = d.active_users().size();
  stats["videos"] = d.catalog().video_count();
  const auto groups = video_groups(d.catalog(), scheme);
  std::vector<std::size_t> gv(scheme.group_count()), gx(scheme.group_count()), done(scheme.group_count());
  std::vector<double> gp(scheme.group_count());
  for (std::uint32_t g : groups) ++gv[g];
  for (const auto& x : d.interactions()) {
    const auto g = groups[x.video];
    ++gx[g];
    gp[g] += d.progress(x);
    done[g] += d.progress(x) >= 1.0;
  }
  ordered_json gj = ordered_json::array();
  for (std::size_t g = 0; g < scheme.group_count(); ++g) {
    ordered_json row = {{"group", scheme.label(g)}, {"videos", gv[g]}, {"interactions", gx[g]}};
    row["mean_progress"] = gx[g] ? gp[g] / static_cast<double>(gx[g]) : 0.0;
    row["completion_rate"] = gx[g] ? static_cast<double>(done[g]) / static_cast<double>(gx[g]) : 0.0;
    gj.push_back(row);
  }
  stats["groups"] = gj;
  stats["warnings"] = report.warnings;
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';

  if (!f.split_out.empty()) {
    const fs::path dir = output_path(f.split_out);
    const Splits s = split(d, cfg.dataset.split);
    write_interactions(*open_output(dir / "train.csv"), s.train);
    write_interactions(*open_output(dir / "validation.csv"), s.validation);
    write_interactions(*open_output(dir / "test.csv"), s.test);
    write_videos(*open_output(dir / "videos.csv"), d.catalog());
    stats["split"] = {{"train", s.train.size()}, {"validation", s.validation.size()}, {"test", s.test.size()}};
    *open_output(dir / "stats.json") << stats.dump(2) << '\n';
    write_manifest(dir / "manifest.json", "ingest", cfg, {{"interactions", xp}, {"videos", vp}},
                   {"train.csv", "validation.csv", "test.csv", "videos.csv", "stats.json"});
  }
  out << stats.dump(2) << '\n';
  return 0;
}

int cmd_analyze_groups(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(f.config);
  const std::string xp = require_path(f.interactions, cfg.dataset.interactions, "--interactions");
  const std::string vp = require_path(f.videos, cfg.dataset.videos, "--videos");
  IngestReport report;
  const PreprocessResult pre = load_preprocessed(cfg, xp, vp, report);
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  std::ostringstream csv;
  csv << "length,p50,p75,count\n";
  for (const auto& b : completion_curves(pre.data))
    csv << b.length << ',' << format_number(b.p50) << ',' << format_number(b.p75) << ',' << b.count << '\n';
  if (f.out.empty()) {
    out << csv.str();
  } else {
    const fs::path path = output_path(f.out);
    *open_output(path) << csv.str();
    write_manifest(path.string() + ".manifest.json", "analyze-groups", cfg, {{"interactions", xp}, {"videos", vp}},
                   {path.filename().string()});
  }
  return 0;
}

int cmd_synthgen(const Flags& f, std::ostream& out, std::ostream&) {
  const RunConfig cfg = resolve_config(f.config);
  if (f.out.empty()) throw UsageError("--out is required");
  const fs::path dir = output_path(f.out);
  const SynthResult r = generate(cfg.synth);
  write_interactions(*open_output(dir / "interactions.csv"), r.data);
  write_videos(*open_output(dir / "videos.csv"), r.data.catalog());
  r.truth.write(*open_output(dir / "ground_truth.csv"));
  write_manifest(dir / "manifest.json", "synthgen", cfg, ordered_json::object(),
                 {"interactions.csv", "videos.csv", "ground_truth.csv"});
  out << "wrote " << r.data.size() << " interactions to " << dir.string() << '\n';
  return 0;
}

struct TrainInputs {
  std::shared_ptr<const Catalog> catalog;
  Dataset train, valid;
  std::optional<GroundTruth> truth;  // early stopping target when present
  TruthFn valid_truth;
};

TrainInputs load_train_inputs(const RunConfig& cfg, const Flags& f, ordered_json& inputs) {
  const std::string tp = require_path(f.train, cfg.dataset.train, "--train");
  const std::string vp = require_path(f.valid, cfg.dataset.validation, "--valid");
  const std::string mp = require_path(f.videos, cfg.dataset.videos, "--videos");
  inputs = {{"train", tp}, {"validation", vp}, {"videos", mp}};
  std::vector<std::vector<InteractionRow>> rows{load_rows(tp, "train"), load_rows(vp, "validation")};
  TrainInputs in;
  in.catalog = build_catalog(load_videos(mp), rows);
  in.train = make_dataset(in.catalog, rows[0]);
  in.valid = make_dataset(in.catalog, rows[1]);
  const std::string gp = f.ground_truth.empty() ? cfg.dataset.ground_truth.value_or("") : f.ground_truth;
  if (!gp.empty()) {
    auto gin = open_input(gp, "ground truth");
    in.truth = GroundTruth::read(gin, gp);
    inputs["ground_truth"] = gp;
  }
  return in;
}

TruthFn truth_of(const TrainInputs& in) { return in.truth ? oracle_truth(*in.truth, *in.catalog) : TruthFn{}; }

ordered_json summary_json(const FitOutput& fit) {
  ordered_json s;
  s["method"] = method_name(fit.result.model.method);
  s["epochs_run"] = fit.result.history.size();
  s["best_epoch"] = fit.result.best_epoch;
  s["valid_view_time_at_T"] =
      fit.result.best_epoch ? fit.result.history[fit.result.best_epoch - 1].valid_view_time_at_t : 0.0;
  if (fit.ips_cap) s["ips_cap"] = *fit.ips_cap;
  if (fit.caus_e_lambda) s["caus_e_lambda"] = *fit.caus_e_lambda;
  return s;
}

int cmd_train(const Flags& f, std::ostream& out, std::ostream&) {
  RunConfig cfg = resolve_config(f.config);
  if (!f.method.empty()) {
    const auto m = parse_method(f.method);
    if (!m) throw UsageError("--method: unknown method '" + f.method + "'");
    cfg.method.kind = *m;
  }
  if (f.out.empty()) throw UsageError("--out is required");
  ordered_json inputs;
  const TrainInputs in = load_train_inputs(cfg, f, inputs);
  const FitOutput fit = viewrank::fit(cfg, in.train, in.valid, truth_of(in));

  const fs::path ckpt_path = output_path(f.out);
  save_checkpoint(*open_output(ckpt_path), {fit.result.model, in.catalog, cfg.dataset.scheme()});
  ordered_json outputs = {ckpt_path.filename().string()};
  if (!f.history.empty()) {
    const fs::path hp = output_path(f.history);
    write_history_csv(*open_output(hp), fit.result.history);
    outputs.push_back(hp.string());
  }
  if (!f.dump_triples.empty()) {
    if (!fit.labeling) throw UsageError("--dump-triples needs a length-grouped method (vldrec or caus_e)");
    const SampleIndex index(in.train, fit.labeling->scheme);
    const EpochStream stream = epoch_stream(index, *fit.labeling, derive_seed(cfg.train.seed, 1));
    const fs::path tp = output_path(f.dump_triples);
    write_triples_csv(*open_output(tp), in.train, stream.triples);
    outputs.push_back(tp.string());
  }
  write_manifest(ckpt_path.string() + ".manifest.json", "train", cfg, inputs, outputs);
  out << summary_json(fit).dump(2) << '\n';
  return 0;
}

int cmd_evaluate(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(f.config);
  if (f.checkpoint.empty()) throw UsageError("--checkpoint is required");
  if (f.out.empty()) throw UsageError("--out is required");
  auto ck_in = open_input(f.checkpoint, "checkpoint");
  const Checkpoint ckpt = load_checkpoint(ck_in, f.checkpoint);
  const std::string tp = require_path(f.test, cfg.dataset.test, "--test");
  ordered_json inputs = {{"checkpoint", f.checkpoint}, {"test", tp}};

  IngestReport report;
  const Dataset test = make_dataset(ckpt.catalog, load_rows(tp, "test"), &report, f.skip_unknown);
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';

  std::optional<GroundTruth> gt;
  TruthFn truth;
  const std::string gp = f.ground_truth.empty() ? cfg.dataset.ground_truth.value_or("") : f.ground_truth;
  if (!gp.empty()) {
    auto in = open_input(gp, "ground truth");
    gt = GroundTruth::read(in, gp);
    truth = oracle_truth(*gt, *ckpt.catalog);
    inputs["ground_truth"] = gp;
  }
  std::optional<std::map<std::string, std::string>> categories;
  const std::string cp = f.category_file.empty() ? cfg.evaluation.category_file.value_or("") : f.category_file;
  if (!cp.empty()) {
    categories = load_categories(cp);
    inputs["category_file"] = cp;
  }

  const Catalog& c = *ckpt.catalog;
  const Scorer scorer = [&](UserIndex u, VideoIndex v) { return rank_score(ckpt.model, c, u, v); };
  const MetricReport r = evaluate(test, scorer, ckpt.scheme, cfg.evaluation.metrics, truth,
                                  categories ? &*categories : nullptr);
  const fs::path dir = output_path(f.out);
  const std::string json = report_json(r);
  *open_output(dir / "metrics.json") << json;
  write_user_csv(*open_output(dir / "users.csv"), r);
  write_group_csv(*open_output(dir / "groups.csv"), r);
  write_manifest(dir / "manifest.json", "evaluate", cfg, inputs, {"metrics.json", "users.csv", "groups.csv"});
  out << json;
  return 0;
}

std::string trial_key(const RunConfig& c) {
  return format_number(c.train.learning_rate) + "|" + format_number(c.model.head.dropout_rate) + "|" +
         format_number(c.train.alpha.alpha) + "|" + format_number(c.train.labeling.beta);
}

int cmd_grid(const Flags& f, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve_config(f.config);
  if (!f.method.empty()) {
    const auto m = parse_method(f.method);
    if (!m) throw UsageError("--method: unknown method '" + f.method + "'");
    cfg.method.kind = *m;
  }
  if (f.out.empty()) throw UsageError("--out is required");
  if (!f.axes.empty()) {
    std::stringstream ss(f.axes);
    std::string axis;
    while (std::getline(ss, axis, ',')) {
      auto values = grid_preset(axis);
      if (axis == "learning_rate") cfg.grid.learning_rate = values;
      if (axis == "dropout") cfg.grid.dropout = values;
      if (axis == "alpha") cfg.grid.alpha = values;
      if (axis == "beta") cfg.grid.beta = values;
    }
  }
  auto axis_or = [](const std::vector<double>& axis, double base) {
    return axis.empty() ? std::vector<double>{base} : axis;
  };
  const auto lrs = axis_or(cfg.grid.learning_rate, cfg.train.learning_rate);
  const auto drops = axis_or(cfg.grid.dropout, cfg.model.head.dropout_rate);
  const auto alphas = axis_or(cfg.grid.alpha, cfg.train.alpha.alpha);
  const auto betas = axis_or(cfg.grid.beta, cfg.train.labeling.beta);

  ordered_json inputs;
  const TrainInputs in = load_train_inputs(cfg, f, inputs);
  const fs::path dir = output_path(f.out);
  const fs::path manifest_path = dir / "grid_manifest.json";
  const ordered_json base = ordered_json::parse(config_json(cfg));

  ordered_json manifest;
  if (fs::exists(manifest_path)) {
    std::ifstream mi(manifest_path);
    try {
      manifest = ordered_json::parse(mi);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(manifest_path.string() + ": malformed grid manifest");
    }
    if (manifest.value("config", ordered_json()) != base || manifest.value("inputs", ordered_json()) != inputs)
      throw UsageError(manifest_path.string() +
                       ": written for a different configuration; remove it or choose another --out");
  } else {
    manifest = {{"tool", "viewrank"}, {"version", kVersion}, {"subcommand", "grid"}, {"seed", cfg.train.seed},
                {"inputs", inputs},   {"config", base},      {"trials", ordered_json::array()}};
  }
  std::map<std::string, ordered_json> done;
  for (const auto& t : manifest["trials"]) done[t.at("key").get<std::string>()] = t;

  std::size_t index = 0;
  for (double lr : lrs)
    for (double dr : drops)
      for (double a : alphas)
        for (double b : betas) {
          RunConfig tc = cfg;
          tc.train.learning_rate = lr;
          tc.model.head.dropout_rate = dr;
          tc.train.alpha.alpha = a;
          tc.train.labeling.beta = b;
          const std::string key = trial_key(tc);
          const std::string ckpt_name = "trial_" + std::to_string(index++) + ".ckpt.json";
          if (done.count(key)) {
            err << "trial " << key << ": already complete\n";
            continue;
          }
          const FitOutput fit = viewrank::fit(tc, in.train, in.valid, truth_of(in));
          save_checkpoint(*open_output(dir / ckpt_name), {fit.result.model, in.catalog, tc.dataset.scheme()});
          ordered_json row = {{"key", key},     {"learning_rate", lr}, {"dropout", dr},
                              {"alpha", a},     {"beta", b},           {"checkpoint", ckpt_name}};
          const ordered_json s = summary_json(fit);
          row["best_epoch"] = s["best_epoch"];
          row["valid_view_time_at_T"] = s["valid_view_time_at_T"];
          manifest["trials"].push_back(row);
          done[key] = row;
          *open_output(manifest_path) << manifest.dump(2) << '\n';
          err << "trial " << key << ": valid View_Time@T " << format_number(row["valid_view_time_at_T"].get<double>())
              << '\n';
        }
  *open_output(manifest_path) << manifest.dump(2) << '\n';

  const ordered_json* best = nullptr;
  for (const auto& t : manifest["trials"])
    if (!best || t["valid_view_time_at_T"].get<double>() > (*best)["valid_view_time_at_T"].get<double>()) best = &t;
  ordered_json result = {{"trials", manifest["trials"].size()}, {"best", best ? *best : ordered_json()}};
  *open_output(dir / "best.json") << result.dump(2) << '\n';
  out << result.dump(2) << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"viewrank: view-time recommenders with video-length debiasing"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Flags f;

  auto with_config = [&](CLI::App* s) { s->add_option("--config", f.config, "JSON run configuration"); };

  auto* ingest_cmd = app.add_subcommand("ingest", "Validate a log, preprocess it and print statistics");
  with_config(ingest_cmd);
  ingest_cmd->add_option("--interactions", f.interactions, "user_id,video_id,view_time file");
  ingest_cmd->add_option("--videos", f.videos, "video_id,length file");
  ingest_cmd->add_option("--split-out", f.split_out, "Directory for train/validation/test files");

  auto* groups_cmd = app.add_subcommand("analyze-groups", "Completion-rate curves per integer video length");
  with_config(groups_cmd);
  groups_cmd->add_option("--interactions", f.interactions);
  groups_cmd->add_option("--videos", f.videos);
  groups_cmd->add_option("--out", f.out, "CSV path (stdout when omitted)");

  auto* synth_cmd = app.add_subcommand("synthgen", "Generate a synthetic biased log with ground truth");
  with_config(synth_cmd);
  synth_cmd->add_option("--out", f.out, "Output directory");

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  with_config(train_cmd);
  train_cmd->add_option("--train", f.train);
  train_cmd->add_option("--valid", f.valid);
  train_cmd->add_option("--videos", f.videos);
  train_cmd->add_option("--out", f.out, "Checkpoint path");
  train_cmd->add_option("--history", f.history, "Per-epoch history CSV");
  train_cmd->add_option("--method", f.method, "vldrec or a baseline name");
  train_cmd->add_option("--dump-triples", f.dump_triples, "Audit CSV of the first epoch's triples");
  train_cmd->add_option("--ground-truth", f.ground_truth, "Score validation against this affinity file");

  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on a test log");
  with_config(eval_cmd);
  eval_cmd->add_option("--checkpoint", f.checkpoint);
  eval_cmd->add_option("--test", f.test);
  eval_cmd->add_option("--out", f.out, "Output directory");
  eval_cmd->add_option("--ground-truth", f.ground_truth, "user_id,video_id,affinity file");
  eval_cmd->add_option("--category-file", f.category_file, "video_id,category file");
  eval_cmd->add_flag("--skip-unknown", f.skip_unknown, "Drop test rows of users unseen in training");

  auto* grid_cmd = app.add_subcommand("grid", "Sequential, resumable hyperparameter search");
  with_config(grid_cmd);
  grid_cmd->add_option("--train", f.train);
  grid_cmd->add_option("--valid", f.valid);
  grid_cmd->add_option("--videos", f.videos);
  grid_cmd->add_option("--out", f.out, "Output directory");
  grid_cmd->add_option("--method", f.method);
  grid_cmd->add_option("--ground-truth", f.ground_truth, "Score validation against this affinity file");
  grid_cmd->add_option("--axes", f.axes, "Comma-separated axes filled with the preset search values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (ingest_cmd->parsed()) return cmd_ingest(f, out, err);
    if (groups_cmd->parsed()) return cmd_analyze_groups(f, out, err);
    if (synth_cmd->parsed()) return cmd_synthgen(f, out, err);
    if (train_cmd->parsed()) return cmd_train(f, out, err);
    if (eval_cmd->parsed()) return cmd_evaluate(f, out, err);
    if (grid_cmd->parsed()) return cmd_grid(f, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kUsage);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kData);
  }
  return static_cast<int>(ExitCode::kUsage);
}

}  // namespace viewrank
