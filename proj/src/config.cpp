#include "viewrank/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "viewrank/error.hpp"

namespace viewrank {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Typed, path-aware access to one JSON object. Keys that are never read are
// reported by finish().
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw UsageError(where() + ": expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) out = convert<T>(*it, field(key));
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    used_.insert(key);
    if (auto it = j_.find(key); it != j_.end() && !it->is_null()) out = convert<T>(*it, field(key));
  }

  Section child(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return Section(it == j_.end() ? empty() : *it, field(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw UsageError(field(k) + ": unknown field");
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }
  std::string where() const { return path_.empty() ? "config" : path_; }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw UsageError(path + ": expected a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw UsageError(path + ": expected true or false");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
        throw UsageError(path + ": expected a non-negative integer");
      return static_cast<T>(v.get<unsigned long long>());
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw UsageError(path + ": expected a string");
      return v.get<std::string>();
    } else {
      if (!v.is_array()) throw UsageError(path + ": expected a list");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(convert<typename T::value_type>(v[i], path + "[" + std::to_string(i) + "]"));
      return out;
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace

GroupScheme DatasetConfig::scheme() const {
  if (!group_boundaries.empty()) {
    try {
      return GroupScheme(group_boundaries);
    } catch (const UsageError& e) {
      throw UsageError(std::string("dataset.group_boundaries: ") + e.what());
    }
  }
  auto s = GroupScheme::preset(group_preset);
  if (!s) throw UsageError("dataset.group_preset: unknown preset '" + group_preset + "'");
  return *s;
}

void RunConfig::validate() const {
  const GroupScheme scheme = dataset.scheme();
  if (!(dataset.preprocess.max_progress > 0.0)) throw UsageError("dataset.max_progress must be positive");
  if (!(dataset.preprocess.max_length > 0.0)) throw UsageError("dataset.max_length must be positive");
  if (dataset.preprocess.max_length > scheme.max_length())
    throw UsageError("dataset.max_length exceeds the last group boundary");
  if (!(dataset.positive_fraction >= 0.0 && dataset.positive_fraction <= 1.0))
    throw UsageError("dataset.positive_fraction must be in [0, 1]");
  const auto& sp = dataset.split;
  if (!(sp.validation_fraction >= 0.0 && sp.test_fraction >= 0.0 && sp.validation_fraction + sp.test_fraction < 1.0))
    throw UsageError("dataset.split: fractions must be non-negative and sum to less than 1");
  if (method.ips_cap && !(*method.ips_cap > 0.0)) throw UsageError("method.ips_cap must be positive");
  if (method.caus_e_lambda && !(*method.caus_e_lambda >= 0.0))
    throw UsageError("method.caus_e_lambda must be non-negative");
  if (model.embedding_dim < 1) throw UsageError("model.embedding_dim must be >= 1");
  model.head.validate();
  train.validate();
  if (train.max_epochs < 1) throw UsageError("train.max_epochs must be >= 1");
  if (!(train.labeling.beta >= 0.0 && train.labeling.beta <= 1.0)) throw UsageError("train.beta must be in [0, 1]");
  if (!(train.labeling.epsilon >= 0.0)) throw UsageError("train.epsilon must be non-negative");
  if (train.labeling.max_resample_attempts < 1) throw UsageError("train.max_resample_attempts must be positive");
  const auto& m = evaluation.metrics;
  for (std::size_t k : m.k_values)
    if (k < 1) throw UsageError("evaluation.k entries must be positive");
  for (double t : m.t_values)
    if (!(t > 0.0)) throw UsageError("evaluation.t entries must be positive");
  if (m.group_k < 1 || m.intersection_k < 1) throw UsageError("evaluation.group_k and intersection_k must be positive");
  auto in_unit = [](const std::vector<double>& axis, const char* name, bool open_top) {
    for (double x : axis)
      if (!(x >= 0.0 && (open_top ? x < 1.0 : x <= 1.0)))
        throw UsageError(std::string("grid.") + name + " values out of range");
  };
  for (double lr : grid.learning_rate)
    if (!(lr > 0.0)) throw UsageError("grid.learning_rate values must be positive");
  in_unit(grid.dropout, "dropout", true);
  in_unit(grid.alpha, "alpha", false);
  in_unit(grid.beta, "beta", false);
  SynthConfig s = synth;
  s.length_groups = scheme;
  s.validate();
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config: not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section top(root, "");

  Section ds = top.child("dataset");
  auto& d = cfg.dataset;
  ds.get("interactions", d.interactions);
  ds.get("videos", d.videos);
  ds.get("train", d.train);
  ds.get("validation", d.validation);
  ds.get("test", d.test);
  ds.get("ground_truth", d.ground_truth);
  ds.get("max_progress", d.preprocess.max_progress);
  ds.get("max_length", d.preprocess.max_length);
  ds.get("group_preset", d.group_preset);
  ds.get("group_boundaries", d.group_boundaries);
  ds.get("positive_fraction", d.positive_fraction);
  Section sp = ds.child("split");
  sp.get("validation", d.split.validation_fraction);
  sp.get("test", d.split.test_fraction);
  sp.get("seed", d.split.seed);
  sp.finish();
  ds.finish();

  Section me = top.child("method");
  std::string kind = method_name(cfg.method.kind);
  me.get("kind", kind);
  const auto parsed = parse_method(kind);
  if (!parsed) throw UsageError("method.kind: unknown method '" + kind + "'");
  cfg.method.kind = *parsed;
  me.get("ips_cap", cfg.method.ips_cap);
  me.get("caus_e_lambda", cfg.method.caus_e_lambda);
  me.finish();

  Section mo = top.child("model");
  mo.get("embedding_dim", cfg.model.embedding_dim);
  mo.get("hidden_sizes", cfg.model.head.hidden_sizes);
  mo.get("dropout", cfg.model.head.dropout_rate);
  std::string head = inference_head_name(cfg.model.inference);
  mo.get("inference_head", head);
  const auto ih = parse_inference_head(head);
  if (!ih) throw UsageError("model.inference_head: expected f, f_un or blend");
  cfg.model.inference = *ih;
  mo.finish();

  Section tr = top.child("train");
  auto& t = cfg.train;
  tr.get("learning_rate", t.learning_rate);
  tr.get("batch_size", t.batch_size);
  tr.get("max_epochs", t.max_epochs);
  tr.get("patience", t.patience);
  tr.get("alpha", t.alpha.alpha);
  tr.get("beta", t.labeling.beta);
  tr.get("epsilon", t.labeling.epsilon);
  tr.get("max_resample_attempts", t.labeling.max_resample_attempts);
  tr.get("seed", t.seed);
  tr.finish();

  Section ev = top.child("evaluation");
  auto& m = cfg.evaluation.metrics;
  ev.get("k", m.k_values);
  ev.get("t", m.t_values);
  ev.get("group_k", m.group_k);
  ev.get("intersection_k", m.intersection_k);
  ev.get("validation_t", t.validation_t);
  ev.get("category_file", cfg.evaluation.category_file);
  ev.finish();

  Section gr = top.child("grid");
  gr.get("learning_rate", cfg.grid.learning_rate);
  gr.get("dropout", cfg.grid.dropout);
  gr.get("alpha", cfg.grid.alpha);
  gr.get("beta", cfg.grid.beta);
  gr.finish();

  Section sy = top.child("synthgen");
  auto& s = cfg.synth;
  sy.get("n_users", s.n_users);
  sy.get("n_videos", s.n_videos);
  sy.get("n_interactions", s.n_interactions);
  sy.get("n_topics", s.n_topics);
  sy.get("affinity_concentration", s.affinity_concentration);
  sy.get("bias_strength", s.bias_strength);
  sy.get("noise_std", s.noise_std);
  sy.get("base_jitter", s.base_jitter);
  sy.get("seed", s.seed);
  sy.finish();

  top.finish();
  cfg.synth.length_groups = cfg.dataset.scheme();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_json(const RunConfig& cfg) {
  auto opt = [](const auto& o) { return o ? ordered_json(*o) : ordered_json(nullptr); };
  const auto& d = cfg.dataset;
  ordered_json j;
  j["dataset"] = {{"interactions", opt(d.interactions)},
                  {"videos", opt(d.videos)},
                  {"train", opt(d.train)},
                  {"validation", opt(d.validation)},
                  {"test", opt(d.test)},
                  {"ground_truth", opt(d.ground_truth)},
                  {"max_progress", d.preprocess.max_progress},
                  {"max_length", d.preprocess.max_length},
                  {"group_preset", d.group_preset},
                  {"group_boundaries", d.group_boundaries},
                  {"positive_fraction", d.positive_fraction},
                  {"split",
                   {{"validation", d.split.validation_fraction},
                    {"test", d.split.test_fraction},
                    {"seed", d.split.seed}}}};
  j["method"] = {{"kind", method_name(cfg.method.kind)},
                 {"ips_cap", opt(cfg.method.ips_cap)},
                 {"caus_e_lambda", opt(cfg.method.caus_e_lambda)}};
  j["model"] = {{"embedding_dim", cfg.model.embedding_dim},
                {"hidden_sizes", cfg.model.head.hidden_sizes},
                {"dropout", cfg.model.head.dropout_rate},
                {"inference_head", inference_head_name(cfg.model.inference)}};
  const auto& t = cfg.train;
  j["train"] = {{"learning_rate", t.learning_rate},
                {"batch_size", t.batch_size},
                {"max_epochs", t.max_epochs},
                {"patience", t.patience},
                {"alpha", t.alpha.alpha},
                {"beta", t.labeling.beta},
                {"epsilon", t.labeling.epsilon},
                {"max_resample_attempts", t.labeling.max_resample_attempts},
                {"seed", t.seed}};
  const auto& m = cfg.evaluation.metrics;
  j["evaluation"] = {{"k", m.k_values},
                     {"t", m.t_values},
                     {"group_k", m.group_k},
                     {"intersection_k", m.intersection_k},
                     {"validation_t", t.validation_t},
                     {"category_file", opt(cfg.evaluation.category_file)}};
  j["grid"] = {{"learning_rate", cfg.grid.learning_rate},
               {"dropout", cfg.grid.dropout},
               {"alpha", cfg.grid.alpha},
               {"beta", cfg.grid.beta}};
  const auto& s = cfg.synth;
  j["synthgen"] = {{"n_users", s.n_users},
                   {"n_videos", s.n_videos},
                   {"n_interactions", s.n_interactions},
                   {"n_topics", s.n_topics},
                   {"affinity_concentration", s.affinity_concentration},
                   {"bias_strength", s.bias_strength},
                   {"noise_std", s.noise_std},
                   {"base_jitter", s.base_jitter},
                   {"seed", s.seed}};
  return j.dump(2);
}

std::vector<double> grid_preset(const std::string& axis) {
  if (axis == "learning_rate") return {0.005, 0.001, 0.0005, 0.0001};
  if (axis == "alpha" || axis == "beta") return {0.1, 0.3, 0.5, 0.7, 0.9};
  if (axis == "dropout") return {0.0, 0.1, 0.3, 0.5};
  throw UsageError("grid: unknown axis '" + axis + "' (expected learning_rate, dropout, alpha or beta)");
}

}  // namespace viewrank
