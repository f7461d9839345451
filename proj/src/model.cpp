#include "viewrank/model.hpp"

#include <cmath>
#include <stdexcept>

#include "viewrank/error.hpp"

namespace viewrank {

void FeatureSpec::validate() const {
  if (embedding_dim < 1) throw UsageError("model.embedding_dim must be >= 1");
  if (user_vocab < 1 || video_vocab < 1 || length_buckets < 1)
    throw UsageError("model vocabularies must be non-empty");
}

void HeadConfig::validate() const {
  if (hidden_sizes.empty()) throw UsageError("model.hidden_sizes must be non-empty");
  for (std::size_t h : hidden_sizes)
    if (h < 1) throw UsageError("model.hidden_sizes entries must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw UsageError("model.dropout must be in [0, 1)");
}

namespace {

FeedForwardHead make_head(std::size_t input_width, const HeadConfig& cfg, Rng& rng, InitMode mode) {
  FeedForwardHead head;
  std::size_t fan_in = input_width;
  std::vector<std::size_t> widths = cfg.hidden_sizes;
  widths.push_back(1);
  for (std::size_t out : widths) {
    DenseLayer layer{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(fan_in)),
                     Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
    if (mode == InitMode::kRandom) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = dist(rng);
    }
    head.layers.push_back(std::move(layer));
    fan_in = out;
  }
  return head;
}

RowMatrix make_table(std::size_t rows, std::size_t dim, Rng& rng, InitMode mode) {
  RowMatrix m = RowMatrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  if (mode == InitMode::kRandom) {
    std::normal_distribution<double> dist(0.0, 0.01);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  }
  return m;
}

}  // namespace

ModelParams init_params(const FeatureSpec& spec, const HeadConfig& cfg, std::vector<std::uint32_t> video_bucket,
                        std::uint64_t seed, InitMode mode) {
  spec.validate();
  cfg.validate();
  if (video_bucket.size() != spec.video_vocab) throw UsageError("video_bucket size must equal video_vocab");
  for (auto b : video_bucket)
    if (b >= spec.length_buckets) throw UsageError("video length bucket out of range");
  Rng rng(seed);
  ModelParams p;
  p.spec = spec;
  p.head_config = cfg;
  p.video_bucket = std::move(video_bucket);
  p.emb.user = make_table(spec.user_vocab, spec.embedding_dim, rng, mode);
  p.emb.video = make_table(spec.video_vocab, spec.embedding_dim, rng, mode);
  p.emb.length = make_table(spec.length_buckets, spec.embedding_dim, rng, mode);
  p.f = make_head(spec.input_width(), cfg, rng, mode);
  p.f_un = make_head(spec.input_width(), cfg, rng, mode);
  return p;
}

double score(const ModelParams& params, HeadId head_id, UserIndex user, VideoIndex video, bool training, Rng* rng,
             ForwardTrace* trace) {
  if (user >= params.spec.user_vocab) throw std::out_of_range("score: user index outside vocabulary");
  if (video >= params.spec.video_vocab) throw std::out_of_range("score: video index outside vocabulary");
  const auto d = static_cast<Eigen::Index>(params.spec.embedding_dim);
  Eigen::VectorXd x(3 * d);
  x.segment(0, d) = params.emb.user.row(user).transpose();
  x.segment(d, d) = params.emb.video.row(video).transpose();
  x.segment(2 * d, d) = params.emb.length.row(params.video_bucket[video]).transpose();

  const FeedForwardHead& head = params.head(head_id);
  const double rate = params.head_config.dropout_rate;
  const bool drop = training && rate > 0.0;
  if (drop && rng == nullptr) throw std::invalid_argument("score: training mode with dropout needs an rng");
  if (trace) {
    trace->user = user;
    trace->video = video;
    trace->input = x;
    trace->pre.clear();
    trace->post.clear();
    trace->mask.clear();
  }
  std::bernoulli_distribution keep(1.0 - rate);
  const std::size_t hidden = head.layers.size() - 1;
  for (std::size_t l = 0; l < hidden; ++l) {
    const DenseLayer& layer = head.layers[l];
    Eigen::VectorXd pre = layer.weight * x + layer.bias;
    Eigen::VectorXd post = pre.cwiseMax(0.0);
    Eigen::VectorXd mask;
    if (drop) {
      mask.resize(post.size());
      for (Eigen::Index i = 0; i < mask.size(); ++i) mask[i] = keep(*rng) ? 1.0 / (1.0 - rate) : 0.0;
      post = post.cwiseProduct(mask);
    }
    if (trace) {
      trace->pre.push_back(pre);
      trace->post.push_back(post);
      trace->mask.push_back(std::move(mask));
    }
    x = std::move(post);
  }
  const DenseLayer& out = head.layers.back();
  const double s = out.weight.row(0).dot(x) + out.bias[0];
  if (trace) trace->score = s;
  return s;
}

Gradients::Gradients(const ModelParams& like)
    : user_seen_(like.spec.user_vocab, false),
      video_seen_(like.spec.video_vocab, false),
      length_seen_(like.spec.length_buckets, false) {
  emb.user = RowMatrix::Zero(like.emb.user.rows(), like.emb.user.cols());
  emb.video = RowMatrix::Zero(like.emb.video.rows(), like.emb.video.cols());
  emb.length = RowMatrix::Zero(like.emb.length.rows(), like.emb.length.cols());
  for (HeadId id : {HeadId::kF, HeadId::kFUn}) {
    for (const auto& layer : like.head(id).layers)
      head(id).layers.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                                 Eigen::VectorXd::Zero(layer.bias.size())});
  }
}

void Gradients::touch_user(UserIndex u) {
  if (!user_seen_[u]) {
    user_seen_[u] = true;
    touched_users.push_back(u);
  }
}

void Gradients::touch_video(VideoIndex v) {
  if (!video_seen_[v]) {
    video_seen_[v] = true;
    touched_videos.push_back(v);
  }
}

void Gradients::touch_length(std::uint32_t b) {
  if (!length_seen_[b]) {
    length_seen_[b] = true;
    touched_lengths.push_back(b);
  }
}

void Gradients::clear() {
  for (auto u : touched_users) {
    emb.user.row(u).setZero();
    user_seen_[u] = false;
  }
  for (auto v : touched_videos) {
    emb.video.row(v).setZero();
    video_seen_[v] = false;
  }
  for (auto b : touched_lengths) {
    emb.length.row(b).setZero();
    length_seen_[b] = false;
  }
  touched_users.clear();
  touched_videos.clear();
  touched_lengths.clear();
  for (HeadId id : {HeadId::kF, HeadId::kFUn}) {
    for (auto& layer : head(id).layers) {
      layer.weight.setZero();
      layer.bias.setZero();
    }
  }
}

void backward(const ModelParams& params, HeadId head_id, const ForwardTrace& trace, double upstream,
              Gradients& grads) {
  const FeedForwardHead& head = params.head(head_id);
  FeedForwardHead& gh = grads.head(head_id);
  if (gh.layers.size() != head.layers.size() || grads.emb.user.rows() != params.emb.user.rows() ||
      grads.emb.video.rows() != params.emb.video.rows() || grads.emb.length.rows() != params.emb.length.rows() ||
      grads.emb.user.cols() != params.emb.user.cols())
    throw std::invalid_argument("backward: gradient buffers do not match the model shape");
  const std::size_t hidden = head.layers.size() - 1;
  if (trace.pre.size() != hidden) throw std::invalid_argument("backward: trace does not match the head depth");

  const Eigen::VectorXd& last_in = hidden == 0 ? trace.input : trace.post.back();
  gh.layers.back().weight.row(0) += upstream * last_in.transpose();
  gh.layers.back().bias[0] += upstream;
  Eigen::VectorXd dx = upstream * head.layers.back().weight.row(0).transpose();

  for (std::size_t l = hidden; l-- > 0;) {
    Eigen::VectorXd dpre = dx;
    if (trace.mask[l].size() > 0) dpre = dpre.cwiseProduct(trace.mask[l]);
    for (Eigen::Index i = 0; i < dpre.size(); ++i)
      if (!(trace.pre[l][i] > 0.0)) dpre[i] = 0.0;
    const Eigen::VectorXd& in = l == 0 ? trace.input : trace.post[l - 1];
    gh.layers[l].weight.noalias() += dpre * in.transpose();
    gh.layers[l].bias += dpre;
    dx = head.layers[l].weight.transpose() * dpre;
  }

  const auto d = static_cast<Eigen::Index>(params.spec.embedding_dim);
  const std::uint32_t bucket = params.video_bucket[trace.video];
  grads.touch_user(trace.user);
  grads.touch_video(trace.video);
  grads.touch_length(bucket);
  grads.emb.user.row(trace.user) += dx.segment(0, d).transpose();
  grads.emb.video.row(trace.video) += dx.segment(d, d).transpose();
  grads.emb.length.row(bucket) += dx.segment(2 * d, d).transpose();
}

namespace {

template <typename Tables, typename Head>
void visit(Tables& emb, Head& f, Head& f_un, const ArrayVisitor& fn) {
  auto span_of = [](auto& m) { return std::span<double>(m.data(), static_cast<std::size_t>(m.size())); };
  fn("emb.user", span_of(emb.user));
  fn("emb.video", span_of(emb.video));
  fn("emb.length", span_of(emb.length));
  for (auto [name, head] : {std::pair<const char*, Head*>{"f", &f}, {"f_un", &f_un}}) {
    for (std::size_t l = 0; l < head->layers.size(); ++l) {
      const std::string prefix = std::string(name) + ".layer" + std::to_string(l);
      fn(prefix + ".weight", span_of(head->layers[l].weight));
      fn(prefix + ".bias", span_of(head->layers[l].bias));
    }
  }
}

}  // namespace

void for_each_array(ModelParams& params, const ArrayVisitor& fn) { visit(params.emb, params.f, params.f_un, fn); }

void for_each_array(Gradients& grads, const ArrayVisitor& fn) { visit(grads.emb, grads.f, grads.f_un, fn); }

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  for_each_array(const_cast<ModelParams&>(params), [&](const std::string&, std::span<double> v) { n += v.size(); });
  return n;
}

}  // namespace viewrank
