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

// Synthetic oracle world: latent users and videos whose ground-truth
// saliency is a known function of the latents, plus mock ports that drive
// the simulator from those latents.

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "pvh/core_model.hpp"
#include "pvh/features.hpp"
#include "pvh/simulator.hpp"

namespace pvh::synth {

struct WorldConfig {
  std::uint64_t seed = 0;
  int n_users = 200;
  int n_videos = 5000;
  int dim = 16;
  int m = 10;   // turns per session
  int n = 30;   // segments per video
  int l = 8;    // candidates per turn
  int n_keywords = 256;
  int query_keywords = 5;    // keywords per mock search query
  double alpha = 0.6;        // weight of the video topic in segment latents
  double noise_scale = 1.0;  // std of the per-coordinate segment noise
  double drift_min = 0.7;    // per-user Explore threshold is drawn from
  double drift_max = 0.95;   // [drift_min, drift_max)

  void validate() const;
  nlohmann::json to_json() const;
  static WorldConfig from_json(const nlohmann::json& j);  // missing keys keep defaults
  bool operator==(const WorldConfig&) const = default;
};

struct SynthUser {
  Eigen::VectorXd u;
  double drift_threshold = 0.5;
  ProfileSeed seed;
};

struct SynthVideo {
  Eigen::VectorXd z;
  std::vector<Eigen::VectorXd> segment_latents;
  VideoRecord record;
};

struct SynthWorld {
  WorldConfig config;
  std::vector<Eigen::VectorXd> keyword_latents;  // keyword i is named keyword_name(i)
  std::vector<SynthUser> users;
  std::vector<SynthVideo> videos;
  std::map<std::string, int> video_index;

  const SynthVideo& video(const std::string& id) const;
};

std::string keyword_name(int i);
std::string video_id(int i);

SynthWorld generate_world(const WorldConfig& config);

// round(1 + 9 (cos + 1) / 2), clamped to [1, 10].
int oracle_saliency(const Eigen::VectorXd& u, const Eigen::VectorXd& c);
int oracle_saliency_from_cos(double cos);

// Profile seeds for every user, in user order; session ids are "u<index>".
std::vector<ProfileSeed> world_seeds(const SynthWorld& world);

// Search: query tokens naming keywords map to the normalized sum of their
// latents; results are the `limit` nearest videos by topic cosine.
// Related: nearest videos to the source's topic, excluding the source.
class SynthCatalog final : public sim::VideoCatalog {
 public:
  explicit SynthCatalog(std::shared_ptr<const SynthWorld> world) : world_(std::move(world)) {}
  std::vector<VideoMeta> search(const std::string& query, std::size_t limit) const override;
  std::vector<VideoMeta> related(const std::string& video_id, std::size_t limit) const override;
  VideoRecord fetch(const std::string& video_id) const override;

 private:
  std::vector<VideoMeta> nearest(const Eigen::VectorXd& q, std::size_t limit,
                                 const std::string& exclude) const;
  std::shared_ptr<const SynthWorld> world_;
};

// Answers the five prompt kinds from the user's latent: most wanted is the
// argmax candidate cosine to u, least wanted the argmin; Explore iff the best
// related video beats the user's drift threshold; clip scores are the oracle.
class SynthLanguageModel final : public sim::LanguageModel {
 public:
  SynthLanguageModel(std::shared_ptr<const SynthWorld> world, int user);
  std::string complete(const std::string& prompt, std::uint64_t seed) const override;

  std::string decide(const std::string& prompt, std::uint64_t seed) const;
  std::string select(const std::string& prompt) const;
  std::string review(const std::string& prompt) const;
  std::string update(const std::string& prompt) const;
  std::string score(const std::string& prompt) const;

 private:
  double cos_to_user(const std::string& video_id) const;
  std::shared_ptr<const SynthWorld> world_;
  int user_;
};

sim::Ports mock_ports(std::shared_ptr<const SynthWorld> world, int user);

// Features are the segment latent itself: the image block carries its first
// ceil(d/2) coordinates, the text block the rest. Content is resolved from
// the "v<id>/<k>" key embedded in frame refs and transcripts. With `mirror`,
// each block is [x, -x], so every feature vector has zero mean and the
// model's leading LayerNorm discards no latent information.
class LatentEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit LatentEmbeddingProvider(std::shared_ptr<const SynthWorld> world, bool mirror = true);
  Eigen::VectorXd embed_image(const std::string& frame_ref) const override;
  Eigen::VectorXd embed_text(const std::string& text) const override;
  std::pair<int, int> dims() const override { return {k_ * half_v_, k_ * half_t_}; }
  std::string id() const override {
    return std::string(k_ == 2 ? "latent-mirror-" : "latent-") + std::to_string(half_v_ + half_t_);
  }

 private:
  const Eigen::VectorXd* lookup(const std::string& content) const;
  Eigen::VectorXd lift(const Eigen::VectorXd& x) const;
  std::shared_ptr<const SynthWorld> world_;
  int half_v_, half_t_;
  int k_;  // 2 when mirrored
};

nlohmann::json world_to_json(const SynthWorld& world);
SynthWorld world_from_json(const nlohmann::json& j);
void save_world(const SynthWorld& world, const std::string& path);
SynthWorld load_world(const std::string& path);

}  // namespace pvh::synth
