#include "viewrank/checkpoint.hpp"

#include <istream>
#include <ostream>

#include "json.hpp"
#include "viewrank/error.hpp"

namespace viewrank {

using nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "viewrank-checkpoint";

ordered_json net_json(const ModelParams& net) {
  ordered_json j;
  j["spec"] = {{"user_vocab", net.spec.user_vocab},
               {"video_vocab", net.spec.video_vocab},
               {"length_buckets", net.spec.length_buckets},
               {"embedding_dim", net.spec.embedding_dim}};
  j["head"] = {{"hidden_sizes", net.head_config.hidden_sizes}, {"dropout", net.head_config.dropout_rate}};
  j["video_bucket"] = net.video_bucket;
  ordered_json arrays = ordered_json::object();
  for_each_array(const_cast<ModelParams&>(net), [&](const std::string& name, std::span<double> values) {
    arrays[name] = std::vector<double>(values.begin(), values.end());
  });
  j["arrays"] = std::move(arrays);
  return j;
}

ModelParams net_from_json(const ordered_json& j) {
  FeatureSpec spec;
  spec.user_vocab = j.at("spec").at("user_vocab").get<std::size_t>();
  spec.video_vocab = j.at("spec").at("video_vocab").get<std::size_t>();
  spec.length_buckets = j.at("spec").at("length_buckets").get<std::size_t>();
  spec.embedding_dim = j.at("spec").at("embedding_dim").get<std::size_t>();
  HeadConfig head;
  head.hidden_sizes = j.at("head").at("hidden_sizes").get<std::vector<std::size_t>>();
  head.dropout_rate = j.at("head").at("dropout").get<double>();
  auto buckets = j.at("video_bucket").get<std::vector<std::uint32_t>>();
  ModelParams net = init_params(spec, head, std::move(buckets), 0, InitMode::kZero);
  const auto& arrays = j.at("arrays");
  std::size_t seen = 0;
  for_each_array(net, [&](const std::string& name, std::span<double> values) {
    const auto stored = arrays.at(name).get<std::vector<double>>();
    if (stored.size() != values.size())
      throw DataError("array '" + name + "' has " + std::to_string(stored.size()) + " values, expected " +
                      std::to_string(values.size()));
    std::copy(stored.begin(), stored.end(), values.begin());
    ++seen;
  });
  if (seen != arrays.size()) throw DataError("unexpected extra parameter arrays");
  return net;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  ordered_json j;
  j["format"] = kFormat;
  j["format_version"] = kCheckpointFormatVersion;
  j["method"] = method_name(ckpt.model.method);
  j["inference_head"] = inference_head_name(ckpt.model.inference);
  j["blend_alpha"] = ckpt.model.blend_alpha;
  j["group_upper_edges"] = ckpt.scheme.upper_edges();
  j["user_ids"] = ckpt.catalog->user_ids();
  ordered_json videos = ordered_json::array();
  for (const auto& v : ckpt.catalog->videos()) videos.push_back({v.id, v.length});
  j["videos"] = std::move(videos);
  ordered_json nets = ordered_json::array();
  for (const auto& n : ckpt.model.nets) nets.push_back(net_json(n));
  j["nets"] = std::move(nets);
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(std::istream& in, const std::string& source) {
  try {
    const ordered_json j = ordered_json::parse(in);
    if (j.value("format", "") != kFormat) throw DataError("not a viewrank checkpoint");
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion)
      throw DataError("unsupported format_version " + std::to_string(version));
    Checkpoint ckpt;
    const auto method = parse_method(j.at("method").get<std::string>());
    const auto head = parse_inference_head(j.at("inference_head").get<std::string>());
    if (!method || !head) throw DataError("unknown method or inference head");
    ckpt.model.method = *method;
    ckpt.model.inference = *head;
    ckpt.model.blend_alpha = j.at("blend_alpha").get<double>();
    ckpt.scheme = GroupScheme(j.at("group_upper_edges").get<std::vector<double>>());
    std::vector<Video> videos;
    for (const auto& v : j.at("videos")) videos.push_back({v.at(0).get<std::string>(), v.at(1).get<double>()});
    ckpt.catalog = std::make_shared<const Catalog>(j.at("user_ids").get<std::vector<std::string>>(), std::move(videos));
    for (const auto& n : j.at("nets")) {
      ModelParams net = net_from_json(n);
      if (net.spec.user_vocab != ckpt.catalog->user_count() || net.spec.video_vocab != ckpt.catalog->video_count())
        throw DataError("network vocabulary does not match the stored ids");
      ckpt.model.nets.push_back(std::move(net));
    }
    if (ckpt.model.nets.empty()) throw DataError("checkpoint has no networks");
    return ckpt;
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": malformed checkpoint: " + e.what());
  } catch (const UsageError& e) {
    throw DataError(source + ": " + e.what());
  }
}

}  // namespace viewrank
