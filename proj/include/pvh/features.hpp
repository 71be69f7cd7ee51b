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
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pvh/core_model.hpp"

namespace pvh {

class FeaturizationError : public std::runtime_error {
 public:
  FeaturizationError(int segment_index, const std::string& what)
      : std::runtime_error("segment " + std::to_string(segment_index) + ": " + what),
        segment_index_(segment_index) {}
  int segment_index() const { return segment_index_; }

 private:
  int segment_index_;
};

// Embedding backbone port. Output widths are fixed per instance.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Eigen::VectorXd embed_image(const std::string& frame_ref) const = 0;
  virtual Eigen::VectorXd embed_text(const std::string& text) const = 0;
  virtual std::pair<int, int> dims() const = 0;
  virtual std::string id() const = 0;
  // False when calls must be serialized by the caller.
  virtual bool thread_safe() const { return true; }
};

// Token and filename hashing into fixed pseudo-random unit vectors. Text
// embeddings are the normalized sum of lower-cased token vectors.
class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(int d_v = 512, int d_t = 512, std::uint64_t salt = 0);
  Eigen::VectorXd embed_image(const std::string& frame_ref) const override;
  Eigen::VectorXd embed_text(const std::string& text) const override;
  std::pair<int, int> dims() const override { return {d_v_, d_t_}; }
  std::string id() const override;

 private:
  int d_v_, d_t_;
  std::uint64_t salt_;
};

// Memoizes an inner provider keyed by (provider id, content hash). The cache
// can be persisted as a line-delimited file.
class CachedEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit CachedEmbeddingProvider(std::shared_ptr<const EmbeddingProvider> inner);
  Eigen::VectorXd embed_image(const std::string& frame_ref) const override;
  Eigen::VectorXd embed_text(const std::string& text) const override;
  std::pair<int, int> dims() const override { return inner_->dims(); }
  std::string id() const override { return inner_->id(); }
  bool thread_safe() const override { return inner_->thread_safe(); }

  // Entries from other providers are kept in memory but never served.
  void load(const std::string& path);
  void save(const std::string& path) const;
  std::size_t size() const;
  std::size_t hits() const { return hits_; }

  static std::uint64_t content_hash(char kind, const std::string& content);

 private:
  Eigen::VectorXd lookup(char kind, const std::string& content) const;

  std::shared_ptr<const EmbeddingProvider> inner_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<std::string, std::uint64_t>, std::vector<double>> cache_;
  mutable std::size_t hits_ = 0;
};

struct FeatureConfig {
  bool include_caption = false;  // text block embeds "caption transcript"
  bool zero_visual = false;
  bool zero_text = false;
};

struct SegmentFeature {
  Eigen::VectorXd vector;
};

struct HistoryEmbedding {
  Eigen::VectorXd vector;
};

SegmentFeature segment_feature(const Segment& segment, const EmbeddingProvider& provider,
                               const FeatureConfig& config = {});

// Rows are segment features, in segment order.
Eigen::MatrixXd video_features(const VideoRecord& video, const EmbeddingProvider& provider,
                               const FeatureConfig& config = {});

// Mean of the segment features.
HistoryEmbedding encode_video(const VideoRecord& video, const EmbeddingProvider& provider,
                              const FeatureConfig& config = {});
HistoryEmbedding encode_features(const Eigen::MatrixXd& segment_features);

// Optional upstream adapters that fill caption/transcript text before the
// record reaches the simulator.
class FrameCaptionerPort {
 public:
  virtual ~FrameCaptionerPort() = default;
  virtual std::string caption(const std::string& frame_ref) = 0;
};

class TranscriberPort {
 public:
  virtual ~TranscriberPort() = default;
  virtual std::string transcribe(const std::string& video_id, double start_s, double end_s) = 0;
};

// Fills empty captions/transcripts; either port may be null.
void fill_segment_text(VideoRecord& video, FrameCaptionerPort* captioner,
                       TranscriberPort* transcriber);

// Temporal midpoint of a segment, used to pick its representative frame.
double representative_time(const Segment& segment);

}  // namespace pvh
