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

#include "pvh/hipher.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "pvh/errors.hpp"

namespace pvh::hipher {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

PreferenceEmbedding preference_embedding(std::span<const HistoryEmbedding> history) {
  if (history.empty()) throw ValidationError("preference embedding needs a non-empty history");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(history.front().vector.size());
  for (const auto& h : history) {
    if (h.vector.size() != sum.size())
      throw DimensionError("history embeddings have inconsistent dimensions");
    sum += h.vector;
  }
  return {sum / static_cast<double>(history.size())};
}

// ---- config ---------------------------------------------------------------

void ModelConfig::validate() const {
  if (input_dim <= 0 || hidden_dim <= 0 || ffn_dim <= 0)
    throw ValidationError("model dimensions must be positive");
  if (heads <= 0 || hidden_dim % heads != 0)
    throw ValidationError("hidden_dim must be divisible by heads");
  if (projection_layers < 1) throw ValidationError("projection_layers must be >= 1");
  if (encoder_layers < 0) throw ValidationError("encoder_layers must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("dropout must lie in [0, 1)");
  if (!(gamma > 0.0)) throw ValidationError("gamma must be > 0");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"input_dim", input_dim},
          {"hidden_dim", hidden_dim},
          {"heads", heads},
          {"encoder_layers", encoder_layers},
          {"ffn_dim", ffn_dim},
          {"projection_layers", projection_layers},
          {"dropout", dropout},
          {"gamma", gamma},
          {"positional_encoding", positional_encoding},
          {"null_attention_slot", null_attention_slot}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.encoder_layers = j.at("encoder_layers").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.projection_layers = j.at("projection_layers").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.positional_encoding = j.at("positional_encoding").get<bool>();
  c.null_attention_slot = j.value("null_attention_slot", true);
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"gamma", gamma},         {"epochs", epochs},
          {"learning_rate", learning_rate}, {"batch_size", batch_size},
          {"seed", seed},           {"max_pairs", max_pairs},
          {"pair_gap", pair_gap},   {"mse_weight", mse_weight}};
}

// ---- model ----------------------------------------------------------------

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const int H = config_.hidden_dim;
  for (int i = 0; i < config_.projection_layers; ++i) {
    const std::string p = "segment_proj." + std::to_string(i);
    const int in = i == 0 ? config_.input_dim : H;
    layout_.segment_proj.push_back({add_norm(p + ".norm", in), add_linear(p + ".linear", in, H)});
  }
  for (int i = 0; i < config_.projection_layers; ++i) {
    const std::string p = "preference_proj." + std::to_string(i);
    const int in = i == 0 ? config_.input_dim : H;
    layout_.preference_proj.push_back(
        {add_norm(p + ".norm", in), add_linear(p + ".linear", in, H)});
  }
  layout_.cross = add_attention("cross_attn", H);
  layout_.cross_norm = add_norm("cross_norm", H);
  for (int l = 0; l < config_.encoder_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    EncoderIdx e;
    e.attn = add_attention(p + ".self_attn", H);
    e.norm1 = add_norm(p + ".norm1", H);
    e.ff1 = add_linear(p + ".ff1", H, config_.ffn_dim);
    e.ff2 = add_linear(p + ".ff2", config_.ffn_dim, H);
    e.norm2 = add_norm(p + ".norm2", H);
    layout_.encoder.push_back(e);
  }
  layout_.head = add_linear("head", H, 1);

  // Glorot-uniform weights, zero biases, unit norm gains.
  Rng rng(derive_seed(seed, "model/init"));
  for (auto& p : params_) {
    const auto& n = p.name;
    if (n.ends_with(".gain")) {
      p.value.setOnes();
    } else if (n.ends_with(".W")) {
      const double a = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
      for (Eigen::Index j = 0; j < p.value.cols(); ++j)
        for (Eigen::Index i = 0; i < p.value.rows(); ++i) p.value(i, j) = rng.uniform(-a, a);
    } else {
      p.value.setZero();
    }
  }
}

int Model::add(const std::string& name, int rows, int cols) {
  params_.push_back({name, Mat::Zero(rows, cols)});
  return static_cast<int>(params_.size()) - 1;
}

Model::LinearIdx Model::add_linear(const std::string& name, int in, int out) {
  return {add(name + ".W", in, out), add(name + ".b", 1, out)};
}

Model::NormIdx Model::add_norm(const std::string& name, int dim) {
  return {add(name + ".gain", 1, dim), add(name + ".bias", 1, dim)};
}

Model::AttnIdx Model::add_attention(const std::string& name, int dim) {
  return {add_linear(name + ".q", dim, dim), add_linear(name + ".k", dim, dim),
          add_linear(name + ".v", dim, dim), add_linear(name + ".o", dim, dim)};
}

Gradients Model::zero_gradients() const {
  Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  return g;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

// ---- forward / backward -----------------------------------------------------

namespace {

struct View {
  const Model& model;
  const Mat& v(int i) const { return model.parameters()[static_cast<std::size_t>(i)].value; }
  nn::AttentionWeights attn(const Model::AttnIdx& a) const {
    return {&v(a.q.W), &v(a.q.b), &v(a.k.W), &v(a.k.b),
            &v(a.v.W), &v(a.v.b), &v(a.o.W), &v(a.o.b)};
  }
};

nn::AttentionGrads attn_grads(Gradients& g, const Model::AttnIdx& a) {
  auto at = [&](int i) { return &g[static_cast<std::size_t>(i)]; };
  return {at(a.q.W), at(a.q.b), at(a.k.W), at(a.k.b), at(a.v.W), at(a.v.b), at(a.o.W), at(a.o.b)};
}

Mat project_forward(const View& w, const std::vector<Model::ProjIdx>& blocks, Mat x,
                    double dropout, Rng* rng, ForwardCache::Proj* c) {
  const std::size_t n = blocks.size();
  if (c) {
    c->norm.assign(n, {});
    c->drop.assign(n, {});
    c->linear_in.assign(n, {});
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& b = blocks[i];
    x = nn::layer_norm_forward(x, w.v(b.norm.gain), w.v(b.norm.bias), c ? &c->norm[i] : nullptr);
    x = nn::dropout_forward(x, dropout, rng, c ? &c->drop[i] : nullptr);
    if (c) c->linear_in[i] = x;
    x = nn::linear_forward(x, w.v(b.linear.W), w.v(b.linear.b));
  }
  return x;
}

void project_backward(const View& w, const std::vector<Model::ProjIdx>& blocks,
                      const ForwardCache::Proj& c, Mat dy, Gradients& g) {
  auto G = [&](int i) -> Mat& { return g[static_cast<std::size_t>(i)]; };
  for (std::size_t i = blocks.size(); i-- > 0;) {
    const auto& b = blocks[i];
    dy = nn::linear_backward(c.linear_in[i], w.v(b.linear.W), dy, G(b.linear.W), G(b.linear.b));
    dy = nn::dropout_backward(c.drop[i], dy);
    dy = nn::layer_norm_backward(c.norm[i], w.v(b.norm.gain), dy, G(b.norm.gain), G(b.norm.bias));
  }
}

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

Eigen::VectorXd forward(const Model& model, const Mat& segments, const PreferenceEmbedding& e_p,
                        Mode mode, Rng* dropout_rng, ForwardCache* cache) {
  const ModelConfig& cfg = model.config();
  if (segments.cols() != cfg.input_dim)
    throw DimensionError("segment features have dimension " + std::to_string(segments.cols()) +
                         ", model expects " + std::to_string(cfg.input_dim));
  if (e_p.vector.size() != cfg.input_dim)
    throw DimensionError("preference embedding has dimension " +
                         std::to_string(e_p.vector.size()) + ", model expects " +
                         std::to_string(cfg.input_dim));
  if (segments.rows() == 0) return Eigen::VectorXd();

  const View w{model};
  const auto& L = model.layout();
  Rng* rng = mode == Mode::kTrain ? dropout_rng : nullptr;
  const double p = cfg.dropout;

  Mat s = project_forward(w, L.segment_proj, segments, p, rng, cache ? &cache->segment_proj : nullptr);
  if (cfg.positional_encoding)
    s += nn::sinusoidal_positions(static_cast<int>(s.rows()), cfg.hidden_dim);
  const Mat pref = project_forward(w, L.preference_proj, e_p.vector.transpose(), p, rng,
                                   cache ? &cache->preference_proj : nullptr);

  Mat c = nn::attention_forward(s, pref, w.attn(L.cross), cfg.heads, cfg.null_attention_slot,
                                cache ? &cache->cross : nullptr);
  c = nn::dropout_forward(c, p, rng, cache ? &cache->cross_drop : nullptr);
  Mat h = nn::layer_norm_forward(s + c, w.v(L.cross_norm.gain), w.v(L.cross_norm.bias),
                                 cache ? &cache->cross_norm : nullptr);

  if (cache) cache->encoder.assign(L.encoder.size(), {});
  for (std::size_t l = 0; l < L.encoder.size(); ++l) {
    const auto& e = L.encoder[l];
    ForwardCache::Encoder* ec = cache ? &cache->encoder[l] : nullptr;
    Mat a = nn::attention_forward(h, h, w.attn(e.attn), cfg.heads, false, ec ? &ec->attn : nullptr);
    a = nn::dropout_forward(a, p, rng, ec ? &ec->drop1 : nullptr);
    Mat h1 = nn::layer_norm_forward(h + a, w.v(e.norm1.gain), w.v(e.norm1.bias),
                                    ec ? &ec->norm1 : nullptr);
    Mat pre = nn::linear_forward(h1, w.v(e.ff1.W), w.v(e.ff1.b));
    Mat act = nn::relu(pre);
    Mat f = nn::linear_forward(act, w.v(e.ff2.W), w.v(e.ff2.b));
    f = nn::dropout_forward(f, p, rng, ec ? &ec->drop2 : nullptr);
    h = nn::layer_norm_forward(h1 + f, w.v(e.norm2.gain), w.v(e.norm2.bias),
                               ec ? &ec->norm2 : nullptr);
    if (ec) {
      ec->hidden1 = std::move(h1);
      ec->ff_pre = std::move(pre);
      ec->ff_act = std::move(act);
    }
  }

  const Mat z = nn::linear_forward(h, w.v(L.head.W), w.v(L.head.b));
  Eigen::VectorXd y(z.rows());
  for (Eigen::Index k = 0; k < z.rows(); ++k) y[k] = sigmoid(z(k, 0));
  if (cache) {
    cache->head_in = std::move(h);
    cache->scores = y;
  }
  return y;
}

void backward(const Model& model, const ForwardCache& c, const Eigen::VectorXd& dscores,
              Gradients& g) {
  const ModelConfig& cfg = model.config();
  const View w{model};
  const auto& L = model.layout();
  auto G = [&](int i) -> Mat& { return g[static_cast<std::size_t>(i)]; };
  if (c.scores.size() == 0) return;

  Mat dz(c.scores.size(), 1);
  for (Eigen::Index k = 0; k < dz.rows(); ++k)
    dz(k, 0) = dscores[k] * c.scores[k] * (1.0 - c.scores[k]);
  Mat dh = nn::linear_backward(c.head_in, w.v(L.head.W), dz, G(L.head.W), G(L.head.b));

  for (std::size_t l = L.encoder.size(); l-- > 0;) {
    const auto& e = L.encoder[l];
    const auto& ec = c.encoder[l];
    const Mat dsum2 =
        nn::layer_norm_backward(ec.norm2, w.v(e.norm2.gain), dh, G(e.norm2.gain), G(e.norm2.bias));
    Mat dh1 = dsum2;
    const Mat df = nn::dropout_backward(ec.drop2, dsum2);
    Mat dact = nn::linear_backward(ec.ff_act, w.v(e.ff2.W), df, G(e.ff2.W), G(e.ff2.b));
    dact = nn::relu_backward(ec.ff_pre, dact);
    dh1 += nn::linear_backward(ec.hidden1, w.v(e.ff1.W), dact, G(e.ff1.W), G(e.ff1.b));
    const Mat dsum1 =
        nn::layer_norm_backward(ec.norm1, w.v(e.norm1.gain), dh1, G(e.norm1.gain), G(e.norm1.bias));
    const Mat da = nn::dropout_backward(ec.drop1, dsum1);
    Mat dq, dkv;
    nn::attention_backward(ec.attn, w.attn(e.attn), attn_grads(g, e.attn), da, cfg.heads, dq, dkv);
    dh = dsum1 + dq + dkv;
  }

  const Mat dsum = nn::layer_norm_backward(c.cross_norm, w.v(L.cross_norm.gain), dh,
                                           G(L.cross_norm.gain), G(L.cross_norm.bias));
  const Mat dc = nn::dropout_backward(c.cross_drop, dsum);
  Mat dq, dpref;
  nn::attention_backward(c.cross, w.attn(L.cross), attn_grads(g, L.cross), dc, cfg.heads, dq, dpref);
  project_backward(w, L.segment_proj, c.segment_proj, dsum + dq, g);
  project_backward(w, L.preference_proj, c.preference_proj, dpref, g);
}

std::vector<double> score_segments(const Model& model, const Mat& segments,
                                   const PreferenceEmbedding& e_p) {
  const Eigen::VectorXd y = forward(model, segments, e_p, Mode::kEval, nullptr, nullptr);
  return {y.data(), y.data() + y.size()};
}

// ---- pairs and loss ---------------------------------------------------------

PairSet make_pairs(std::span<const int> gt, std::size_t max_pairs, std::uint64_t seed,
                   int pair_gap) {
  if (gt.size() < 2) throw ValidationError("make_pairs needs at least 2 segments");
  PairSet all;
  for (std::size_t i = 0; i < gt.size(); ++i)
    for (std::size_t j = 0; j < gt.size(); ++j)
      if (gt[i] - gt[j] >= pair_gap)
        all.pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
  if (all.pairs.size() <= max_pairs) return all;

  Rng rng(seed);
  std::vector<std::size_t> idx(all.pairs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t k = 0; k < max_pairs; ++k) {
    const std::size_t r = k + static_cast<std::size_t>(rng.below(idx.size() - k));
    std::swap(idx[k], idx[r]);
  }
  idx.resize(max_pairs);
  std::sort(idx.begin(), idx.end());
  PairSet out;
  out.pairs.reserve(max_pairs);
  for (auto k : idx) out.pairs.push_back(all.pairs[k]);
  return out;
}

namespace {

void check_pair(const std::pair<int, int>& pr, std::size_t n) {
  if (pr.first < 0 || pr.second < 0 || static_cast<std::size_t>(pr.first) >= n ||
      static_cast<std::size_t>(pr.second) >= n)
    throw ValidationError("pair index out of range");
}

}  // namespace

double saliency_loss(std::span<const double> scores, const PairSet& pairs, double gamma) {
  double loss = 0.0;
  for (const auto& pr : pairs.pairs) {
    check_pair(pr, scores.size());
    loss += std::max(0.0, gamma - (scores[static_cast<std::size_t>(pr.first)] -
                                   scores[static_cast<std::size_t>(pr.second)]));
  }
  return loss;
}

Eigen::VectorXd saliency_loss_grad(std::span<const double> scores, const PairSet& pairs,
                                   double gamma) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(scores.size()));
  for (const auto& pr : pairs.pairs) {
    check_pair(pr, scores.size());
    const double margin = scores[static_cast<std::size_t>(pr.first)] -
                          scores[static_cast<std::size_t>(pr.second)];
    if (gamma - margin > 0.0) {
      g[pr.first] -= 1.0;
      g[pr.second] += 1.0;
    }
  }
  return g;
}

// ---- training ---------------------------------------------------------------

double example_loss_and_grad(const Model& model, const Mat& segments,
                             const PreferenceEmbedding& e_p, std::span<const int> gt,
                             const PairSet& pairs, double gamma, double mse_weight, Mode mode,
                             Rng* dropout_rng, Gradients& grads) {
  ForwardCache cache;
  const Eigen::VectorXd y = forward(model, segments, e_p, mode, dropout_rng, &cache);
  const std::span<const double> ys(y.data(), static_cast<std::size_t>(y.size()));
  double loss = saliency_loss(ys, pairs, gamma);
  Eigen::VectorXd dy = saliency_loss_grad(ys, pairs, gamma);
  if (mse_weight > 0.0 && y.size() > 0) {
    const double n = static_cast<double>(y.size());
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      const double d = y[k] - gt[static_cast<std::size_t>(k)] / 10.0;
      loss += mse_weight * d * d / n;
      dy[k] += mse_weight * 2.0 * d / n;
    }
  }
  backward(model, cache, dy, grads);
  return loss;
}

namespace {

void set_threads(int jobs) {
  if (jobs > 0) omp_set_num_threads(jobs);
}

void add_into(Gradients& acc, const Gradients& g) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

BatchGradient item_gradient(const Model& model, const BatchItem& item, double gamma,
                            double mse_weight, Mode mode) {
  BatchGradient out;
  out.grads = model.zero_gradients();
  Rng rng(item.dropout_seed);
  out.loss_sum = example_loss_and_grad(model, *item.segments, *item.e_p, item.gt, *item.pairs,
                                       gamma, mse_weight, mode, &rng, out.grads);
  out.videos = 1;
  return out;
}

}  // namespace

BatchGradient batch_gradient_serial(const Model& model, std::span<const BatchItem> items,
                                    double gamma, double mse_weight, Mode mode) {
  BatchGradient total;
  total.grads = model.zero_gradients();
  for (const auto& item : items) {
    BatchGradient g = item_gradient(model, item, gamma, mse_weight, mode);
    add_into(total.grads, g.grads);
    total.loss_sum += g.loss_sum;
    total.videos += 1;
  }
  return total;
}

BatchGradient batch_gradient(const Model& model, std::span<const BatchItem> items, double gamma,
                             double mse_weight, Mode mode, int jobs) {
  set_threads(jobs);
  std::vector<BatchGradient> per_item(items.size());
  const auto n = static_cast<std::ptrdiff_t>(items.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    per_item[static_cast<std::size_t>(i)] =
        item_gradient(model, items[static_cast<std::size_t>(i)], gamma, mse_weight, mode);
  BatchGradient total;
  total.grads = model.zero_gradients();
  for (const auto& g : per_item) {
    add_into(total.grads, g.grads);
    total.loss_sum += g.loss_sum;
    total.videos += 1;
  }
  return total;
}

namespace {

class Adam {
 public:
  Adam(const Model& model, const TrainConfig& cfg)
      : cfg_(cfg), m_(model.zero_gradients()), v_(model.zero_gradients()) {}

  void step(Model& model, const Gradients& g) {
    ++t_;
    const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, t_), c2 = 1.0 - std::pow(b2, t_);
    auto& params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (1.0 - b1) * g[i];
      v_[i] = b2 * v_[i] + (1.0 - b2) * g[i].cwiseProduct(g[i]);
      params[i].value.array() -=
          cfg_.learning_rate * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.adam_eps);
    }
  }

 private:
  TrainConfig cfg_;
  Gradients m_, v_;
  int t_ = 0;
};

}  // namespace

TrainResult train(Model& model, std::span<const Example> dataset, const TrainConfig& config) {
  if (dataset.empty()) throw TrainingError("empty training set");
  if (config.batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(config.gamma > 0.0)) throw ValidationError("gamma must be > 0");

  std::vector<PreferenceEmbedding> prefs;
  std::vector<PairSet> pairs;
  prefs.reserve(dataset.size());
  pairs.reserve(dataset.size());
  TrainResult result;
  std::vector<std::size_t> supervised;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Example& ex = dataset[i];
    if (static_cast<std::size_t>(ex.target.rows()) != ex.gt.size())
      throw DimensionError("example " + ex.id + ": gt length does not match segments");
    prefs.push_back(preference_embedding(ex.history));
    pairs.push_back(ex.gt.size() >= 2
                        ? make_pairs(ex.gt, config.max_pairs,
                                     derive_seed(config.seed, "pairs/" + ex.id), config.pair_gap)
                        : PairSet{});
    if (pairs.back().pairs.empty()) {
      ++result.skipped_videos;
    } else {
      supervised.push_back(i);
    }
  }
  if (supervised.empty()) throw TrainingError("no supervision: every PairSet is empty");
  result.supervised_videos = supervised.size();

  Adam adam(model, config);
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order = supervised;
    Rng rng(derive_seed(config.seed, "epoch/" + std::to_string(epoch)));
    shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::vector<BatchItem> items;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        items.push_back({&dataset[i].target, &prefs[i], dataset[i].gt, &pairs[i],
                         derive_seed(config.seed, "dropout/" + std::to_string(epoch) + "/" +
                                                      dataset[i].id)});
      }
      BatchGradient bg =
          batch_gradient(model, items, config.gamma, config.mse_weight, Mode::kTrain, config.jobs);
      for (auto& g : bg.grads) g /= static_cast<double>(bg.videos);
      adam.step(model, bg.grads);
      epoch_loss += bg.loss_sum;
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(supervised.size()));
  }
  return result;
}

// ---- batch scoring / evaluation ---------------------------------------------

namespace {

std::vector<double> score_example(const Model& model, const Example& ex, bool zero_preference) {
  PreferenceEmbedding e_p =
      zero_preference ? PreferenceEmbedding{Eigen::VectorXd::Zero(model.config().input_dim)}
                      : preference_embedding(ex.history);
  return score_segments(model, ex.target, e_p);
}

}  // namespace

std::vector<std::vector<double>> score_batch_serial(const Model& model,
                                                    std::span<const Example> batch) {
  std::vector<std::vector<double>> out;
  out.reserve(batch.size());
  for (const auto& ex : batch) out.push_back(score_example(model, ex, false));
  return out;
}

std::vector<std::vector<double>> score_batch(const Model& model, std::span<const Example> batch,
                                             int jobs) {
  set_threads(jobs);
  std::vector<std::vector<double>> out(batch.size());
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = score_example(model, batch[static_cast<std::size_t>(i)], false);
  return out;
}

metrics::EvalReport evaluate_model(const Model& model, std::span<const Example> examples,
                                   const metrics::EvalConfig& config, bool zero_preference,
                                   int jobs) {
  set_threads(jobs);
  std::vector<metrics::VideoPrediction> preds(examples.size());
  const auto n = static_cast<std::ptrdiff_t>(examples.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& ex = examples[static_cast<std::size_t>(i)];
    preds[static_cast<std::size_t>(i)] = {ex.id, score_example(model, ex, zero_preference), ex.gt,
                                          ex.spans};
  }
  return metrics::evaluate(preds, config);
}

// ---- checkpoint -------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'P', 'V', 'H', 'C', 'K', 'P', 'T', '\0'};
}

void Model::save(const std::string& path) const {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : params_)
    tensors.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  const std::string header = nlohmann::json{{"format_version", kCheckpointVersion},
                                            {"config", config_.to_json()},
                                            {"tensors", tensors}}
                                 .dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& p : params_) {
    // column-major, as Eigen stores it
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size())));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

Model Model::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError("checkpoint", path + " is not a checkpoint file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 26)) throw ParseError("checkpoint.header", "bad header length");
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint.header", e.what());
  }
  if (h.value("format_version", -1) != kCheckpointVersion)
    throw ParseError("checkpoint.format_version", "unsupported checkpoint version");
  Model model(ModelConfig::from_json(h.at("config")), 0);
  const auto& tensors = h.at("tensors");
  if (tensors.size() != model.params_.size())
    throw ParseError("checkpoint.tensors", "tensor count does not match the config");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& p = model.params_[i];
    if (tensors[i].at("name").get<std::string>() != p.name ||
        tensors[i].at("rows").get<Eigen::Index>() != p.value.rows() ||
        tensors[i].at("cols").get<Eigen::Index>() != p.value.cols())
      throw ParseError("checkpoint.tensors[" + std::to_string(i) + "]",
                       "tensor layout does not match the config");
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size())));
  }
  if (!in) throw ParseError("checkpoint.data", "truncated checkpoint");
  return model;
}

}  // namespace pvh::hipher
