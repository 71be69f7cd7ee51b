// Copyright 2026 The PVH Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pvh/features.hpp"
#include "pvh/metrics.hpp"
#include "pvh/nn.hpp"

namespace pvh::hipher {

using nn::Mat;

inline constexpr int kCheckpointVersion = 1;
inline constexpr int kDefaultPairGap = 2;
inline constexpr std::size_t kDefaultMaxPairs = 256;

struct PreferenceEmbedding {
  Eigen::VectorXd vector;
};

// Mean of the history-video embeddings.
PreferenceEmbedding preference_embedding(std::span<const HistoryEmbedding> history);

struct ModelConfig {
  int input_dim = 1024;
  int hidden_dim = 256;
  int heads = 4;
  int encoder_layers = 2;
  int ffn_dim = 512;
  int projection_layers = 3;
  double dropout = 0.1;
  double gamma = 0.15;
  bool positional_encoding = true;
  // Appends a zero key/value to cross-attention so the weight on the single
  // preference token depends on the segment query.
  bool null_attention_slot = true;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

enum class Mode { kTrain, kEval };

struct Parameter {
  std::string name;
  Mat value;
};

using Gradients = std::vector<Mat>;

class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  Gradients zero_gradients() const;
  std::size_t parameter_count() const;

  void save(const std::string& path) const;
  static Model load(const std::string& path);

  // Index layout of the parameter vector; public for the forward/backward code.
  struct LinearIdx { int W = -1, b = -1; };
  struct NormIdx { int gain = -1, bias = -1; };
  struct ProjIdx { NormIdx norm; LinearIdx linear; };
  struct AttnIdx { LinearIdx q, k, v, o; };
  struct EncoderIdx { AttnIdx attn; NormIdx norm1; LinearIdx ff1, ff2; NormIdx norm2; };
  struct Layout {
    std::vector<ProjIdx> segment_proj, preference_proj;
    AttnIdx cross;
    NormIdx cross_norm;
    std::vector<EncoderIdx> encoder;
    LinearIdx head;
  };
  const Layout& layout() const { return layout_; }

 private:
  int add(const std::string& name, int rows, int cols);
  LinearIdx add_linear(const std::string& name, int in, int out);
  NormIdx add_norm(const std::string& name, int dim);
  AttnIdx add_attention(const std::string& name, int dim);

  ModelConfig config_;
  std::vector<Parameter> params_;
  Layout layout_;
};

struct ForwardCache;

// One forward pass over a target video's segment features (rows). With
// Mode::kTrain and a dropout rng, dropout is applied. When `cache` is given,
// activations are kept for backward().
Eigen::VectorXd forward(const Model& model, const Mat& segments, const PreferenceEmbedding& e_p,
                        Mode mode, Rng* dropout_rng, ForwardCache* cache);

// Accumulates dL/dparams given dL/dscores into `grads`.
void backward(const Model& model, const ForwardCache& cache, const Eigen::VectorXd& dscores,
              Gradients& grads);

struct ForwardCache {
  struct Proj {
    std::vector<nn::LayerNormCache> norm;
    std::vector<nn::DropoutMask> drop;
    std::vector<Mat> linear_in;
  };
  struct Encoder {
    nn::AttentionCache attn;
    nn::DropoutMask drop1;
    nn::LayerNormCache norm1;
    Mat hidden1;
    Mat ff_pre;
    Mat ff_act;
    nn::DropoutMask drop2;
    nn::LayerNormCache norm2;
  };
  Proj segment_proj, preference_proj;
  nn::AttentionCache cross;
  nn::DropoutMask cross_drop;
  nn::LayerNormCache cross_norm;
  std::vector<Encoder> encoder;
  Mat head_in;
  Eigen::VectorXd scores;
};

// Evaluation-mode scores in [0,1], one per segment.
std::vector<double> score_segments(const Model& model, const Mat& segments,
                                   const PreferenceEmbedding& e_p);

// ---- pairs and loss ---------------------------------------------------------

struct PairSet {
  std::vector<std::pair<int, int>> pairs;  // (positive, negative)
};

// All (i, j) with gt[i] - gt[j] >= pair_gap, uniformly subsampled to
// max_pairs without replacement, returned in lexicographic order.
PairSet make_pairs(std::span<const int> gt, std::size_t max_pairs, std::uint64_t seed,
                   int pair_gap = kDefaultPairGap);

// Sum over pairs of max(0, gamma - (y+ - y-)).
double saliency_loss(std::span<const double> scores, const PairSet& pairs, double gamma);
// Subgradient of saliency_loss with respect to the scores (0 at the hinge).
Eigen::VectorXd saliency_loss_grad(std::span<const double> scores, const PairSet& pairs,
                                   double gamma);

// ---- training ---------------------------------------------------------------

struct Example {
  std::string id;
  std::vector<HistoryEmbedding> history;
  Mat target;  // n x input_dim
  std::vector<int> gt;
  std::vector<metrics::Span> spans;
};

struct TrainConfig {
  double gamma = 0.15;
  int epochs = 20;
  double learning_rate = 1e-4;
  int batch_size = 4;
  std::uint64_t seed = 0;
  std::size_t max_pairs = kDefaultMaxPairs;
  int pair_gap = kDefaultPairGap;
  double mse_weight = 0.0;  // optional auxiliary regression toward gt/10
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int jobs = 0;  // 0: OpenMP default

  nlohmann::json to_json() const;
};

struct TrainResult {
  std::vector<double> loss_trace;  // mean per-video loss, one entry per epoch
  std::size_t supervised_videos = 0;
  std::size_t skipped_videos = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Loss and gradient of one example under the training objective.
double example_loss_and_grad(const Model& model, const Mat& segments,
                             const PreferenceEmbedding& e_p, std::span<const int> gt,
                             const PairSet& pairs, double gamma, double mse_weight, Mode mode,
                             Rng* dropout_rng, Gradients& grads);

TrainResult train(Model& model, std::span<const Example> dataset, const TrainConfig& config);

// Batch kernels. The serial versions are the reference; the parallel ones
// run one video per OpenMP task and reduce in index order, so results are
// bit-identical to the serial path.
std::vector<std::vector<double>> score_batch_serial(const Model& model,
                                                    std::span<const Example> batch);
std::vector<std::vector<double>> score_batch(const Model& model, std::span<const Example> batch,
                                             int jobs = 0);

struct BatchGradient {
  Gradients grads;
  double loss_sum = 0.0;
  std::size_t videos = 0;
};

struct BatchItem {
  const Mat* segments;
  const PreferenceEmbedding* e_p;
  std::span<const int> gt;
  const PairSet* pairs;
  std::uint64_t dropout_seed;
};

BatchGradient batch_gradient_serial(const Model& model, std::span<const BatchItem> items,
                                    double gamma, double mse_weight, Mode mode);
BatchGradient batch_gradient(const Model& model, std::span<const BatchItem> items, double gamma,
                             double mse_weight, Mode mode, int jobs = 0);

// Scores every example and evaluates the metric suite. With
// `zero_preference`, e_p is replaced by the zero vector.
metrics::EvalReport evaluate_model(const Model& model, std::span<const Example> examples,
                                   const metrics::EvalConfig& config = {},
                                   bool zero_preference = false, int jobs = 0);

}  // namespace pvh::hipher
