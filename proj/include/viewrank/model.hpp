#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "viewrank/data.hpp"

namespace viewrank {

struct FeatureSpec {
  std::size_t user_vocab = 1;
  std::size_t video_vocab = 1;
  std::size_t length_buckets = 1;
  std::size_t embedding_dim = 8;

  std::size_t input_width() const { return 3 * embedding_dim; }
  void validate() const;
};

struct HeadConfig {
  std::vector<std::size_t> hidden_sizes{32, 16};
  double dropout_rate = 0.0;  // inverted dropout on hidden activations

  void validate() const;
};

// Affine layer y = weight * x + bias; weight is (out x in).
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

// ReLU hidden layers followed by a linear layer to a scalar.
struct FeedForwardHead {
  std::vector<DenseLayer> layers;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One row per id; columns = embedding_dim. Row-major so a row is contiguous.
struct EmbeddingTables {
  RowMatrix user;
  RowMatrix video;
  RowMatrix length;
};

enum class HeadId { kF, kFUn };

// Shared embeddings feeding two heads that share no parameters.
struct ModelParams {
  FeatureSpec spec;
  HeadConfig head_config;
  std::vector<std::uint32_t> video_bucket;  // length bucket of every video
  EmbeddingTables emb;
  FeedForwardHead f;
  FeedForwardHead f_un;

  const FeedForwardHead& head(HeadId id) const { return id == HeadId::kF ? f : f_un; }
  FeedForwardHead& head(HeadId id) { return id == HeadId::kF ? f : f_un; }
};

enum class InitMode { kRandom, kZero };

// Embeddings ~ N(0, 0.01^2); dense weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
ModelParams init_params(const FeatureSpec& spec, const HeadConfig& cfg, std::vector<std::uint32_t> video_bucket,
                        std::uint64_t seed, InitMode mode = InitMode::kRandom);

// Activations recorded by a forward pass, consumed by backward().
struct ForwardTrace {
  UserIndex user = 0;
  VideoIndex video = 0;
  Eigen::VectorXd input;
  std::vector<Eigen::VectorXd> pre;   // pre-activation of each hidden layer
  std::vector<Eigen::VectorXd> post;  // activation after ReLU and dropout
  std::vector<Eigen::VectorXd> mask;  // inverted dropout scale per unit (empty when inactive)
  double score = 0.0;
};

// Preference score of (user, video) under one head. Dropout is active only
// when `training` is set (then `rng` must be non-null). Throws
// std::out_of_range for ids outside the vocabulary.
double score(const ModelParams& params, HeadId head, UserIndex user, VideoIndex video, bool training = false,
             Rng* rng = nullptr, ForwardTrace* trace = nullptr);

// Gradient buffers congruent to ModelParams. Embedding rows are tracked so
// that clearing and sparse optimizer updates only visit touched rows.
struct Gradients {
  EmbeddingTables emb;
  FeedForwardHead f;
  FeedForwardHead f_un;
  std::vector<std::uint32_t> touched_users, touched_videos, touched_lengths;

  explicit Gradients(const ModelParams& like);
  FeedForwardHead& head(HeadId id) { return id == HeadId::kF ? f : f_un; }
  const FeedForwardHead& head(HeadId id) const { return id == HeadId::kF ? f : f_un; }

  void clear();
  void touch_user(UserIndex u);
  void touch_video(VideoIndex v);
  void touch_length(std::uint32_t b);

 private:
  std::vector<bool> user_seen_, video_seen_, length_seen_;
};

// Accumulates upstream * d(score)/d(params) into `grads`.
void backward(const ModelParams& params, HeadId head, const ForwardTrace& trace, double upstream, Gradients& grads);

// Visits every parameter array with a stable name, e.g. "emb.user",
// "f.layer0.weight". Used by the optimizer, checkpoints and gradient checks.
using ArrayVisitor = std::function<void(const std::string& name, std::span<double> values)>;
void for_each_array(ModelParams& params, const ArrayVisitor& fn);
void for_each_array(Gradients& grads, const ArrayVisitor& fn);

std::size_t parameter_count(const ModelParams& params);

}  // namespace viewrank
