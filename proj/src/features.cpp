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

#include "pvh/features.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pvh/errors.hpp"
#include "pvh/rng.hpp"
#include "pvh/text.hpp"

namespace pvh {

namespace {

Eigen::VectorXd unit_from_seed(std::uint64_t seed, int dim) {
  Rng rng(seed);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  const double n = v.norm();
  return n > 0.0 ? Eigen::VectorXd(v / n) : v;
}

}  // namespace

HashEmbeddingProvider::HashEmbeddingProvider(int d_v, int d_t, std::uint64_t salt)
    : d_v_(d_v), d_t_(d_t), salt_(salt) {
  if (d_v <= 0 || d_t <= 0) throw ValidationError("embedding dims must be positive");
}

Eigen::VectorXd HashEmbeddingProvider::embed_image(const std::string& frame_ref) const {
  return unit_from_seed(fnv1a64(frame_ref, fnv1a64("img", salt_)), d_v_);
}

Eigen::VectorXd HashEmbeddingProvider::embed_text(const std::string& text) const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d_t_);
  for (const auto& tok : text::tokens(text)) sum += unit_from_seed(fnv1a64(tok, fnv1a64("txt", salt_)), d_t_);
  const double n = sum.norm();
  if (n > 0.0) sum /= n;
  return sum;
}

std::string HashEmbeddingProvider::id() const {
  return "hash-" + std::to_string(d_v_) + "x" + std::to_string(d_t_) + "-" +
         std::to_string(salt_);
}

// ---- cache ----------------------------------------------------------------

CachedEmbeddingProvider::CachedEmbeddingProvider(std::shared_ptr<const EmbeddingProvider> inner)
    : inner_(std::move(inner)) {
  if (!inner_) throw ValidationError("cached provider needs an inner provider");
}

std::uint64_t CachedEmbeddingProvider::content_hash(char kind, const std::string& content) {
  return fnv1a64(content, fnv1a64(std::string(1, kind)));
}

Eigen::VectorXd CachedEmbeddingProvider::lookup(char kind, const std::string& content) const {
  const auto key = std::make_pair(inner_->id(), content_hash(kind, content));
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) {
      ++hits_;
      return Eigen::Map<const Eigen::VectorXd>(it->second.data(),
                                               static_cast<Eigen::Index>(it->second.size()));
    }
  }
  Eigen::VectorXd v = kind == 'i' ? inner_->embed_image(content) : inner_->embed_text(content);
  std::lock_guard<std::mutex> lock(mu_);
  cache_.emplace(key, std::vector<double>(v.data(), v.data() + v.size()));
  return v;
}

Eigen::VectorXd CachedEmbeddingProvider::embed_image(const std::string& frame_ref) const {
  return lookup('i', frame_ref);
}

Eigen::VectorXd CachedEmbeddingProvider::embed_text(const std::string& text) const {
  return lookup('t', text);
}

std::size_t CachedEmbeddingProvider::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.size();
}

void CachedEmbeddingProvider::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) return;  // a missing cache is an empty cache
  std::string line;
  std::lock_guard<std::mutex> lock(mu_);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    cache_[{j.at("provider").get<std::string>(),
            std::stoull(j.at("hash").get<std::string>(), nullptr, 16)}] =
        j.at("vector").get<std::vector<double>>();
  }
}

void CachedEmbeddingProvider::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  std::lock_guard<std::mutex> lock(mu_);
  for (const auto& [key, vec] : cache_) {
    std::ostringstream hash;
    hash << std::hex << key.second;
    out << nlohmann::json{{"provider", key.first}, {"hash", hash.str()}, {"vector", vec}}.dump()
        << '\n';
  }
}

// ---- featurization ----------------------------------------------------------

SegmentFeature segment_feature(const Segment& segment, const EmbeddingProvider& provider,
                               const FeatureConfig& config) {
  const auto [d_v, d_t] = provider.dims();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d_v + d_t);
  try {
    if (!config.zero_visual) {
      Eigen::VectorXd img = provider.embed_image(segment.frame_ref);
      if (img.size() != d_v) throw DimensionError("image embedding has wrong width");
      out.head(d_v) = img;
    }
    std::string text = segment.transcript;
    if (config.include_caption && !segment.caption.empty())
      text = text.empty() ? segment.caption : segment.caption + " " + text;
    if (!config.zero_text && !text.empty()) {
      Eigen::VectorXd txt = provider.embed_text(text);
      if (txt.size() != d_t) throw DimensionError("text embedding has wrong width");
      out.tail(d_t) = txt;
    }
  } catch (const FeaturizationError&) {
    throw;
  } catch (const std::exception& e) {
    throw FeaturizationError(segment.index, e.what());
  }
  if (!out.allFinite()) throw FeaturizationError(segment.index, "non-finite embedding");
  return {std::move(out)};
}

Eigen::MatrixXd video_features(const VideoRecord& video, const EmbeddingProvider& provider,
                               const FeatureConfig& config) {
  const auto [d_v, d_t] = provider.dims();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(video.segments.size()), d_v + d_t);
  for (std::size_t k = 0; k < video.segments.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) =
        segment_feature(video.segments[k], provider, config).vector.transpose();
  return out;
}

HistoryEmbedding encode_features(const Eigen::MatrixXd& segment_features) {
  if (segment_features.rows() == 0) throw ValidationError("cannot encode a video with no segments");
  return {segment_features.colwise().mean().transpose()};
}

HistoryEmbedding encode_video(const VideoRecord& video, const EmbeddingProvider& provider,
                              const FeatureConfig& config) {
  if (video.segments.empty())
    throw ValidationError("cannot encode video " + video.meta.video_id + ": no segments");
  return encode_features(video_features(video, provider, config));
}

void fill_segment_text(VideoRecord& video, FrameCaptionerPort* captioner,
                       TranscriberPort* transcriber) {
  for (auto& s : video.segments) {
    if (captioner && s.caption.empty()) s.caption = captioner->caption(s.frame_ref);
    if (transcriber && s.transcript.empty())
      s.transcript = transcriber->transcribe(video.meta.video_id, s.start_s, s.end_s);
  }
}

double representative_time(const Segment& segment) {
  return 0.5 * (segment.start_s + segment.end_s);
}

}  // namespace pvh
