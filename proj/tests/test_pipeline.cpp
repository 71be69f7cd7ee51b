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

#include <gtest/gtest.h>

#include "pvh/errors.hpp"
#include "pvh/pipeline.hpp"
#include "test_util.hpp"

using namespace pvh;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.model.hidden_dim = 32;
  c.model.heads = 1;
  c.model.encoder_layers = 0;
  c.model.ffn_dim = 32;
  c.model.dropout = 0.0;
  c.model.positional_encoding = false;
  c.train.epochs = 40;
  c.train.learning_rate = 2e-3;
  c.train.seed = 1;
  c.model_seed = 2;
  c.jobs = 1;
  return c;
}

int user_of(const std::string& session_id) { return std::stoi(session_id.substr(1)); }

}  // namespace

TEST(Examples, ShapesFollowRecords) {
  synth::LatentEmbeddingProvider p(fixture::small_world());
  const auto& recs = fixture::small_dataset().records;
  const auto ex = build_examples(recs, p);
  ASSERT_EQ(ex.size(), recs.size());
  for (std::size_t i = 0; i < ex.size(); ++i) {
    EXPECT_EQ(ex[i].id, recs[i].session.session_id);
    EXPECT_EQ(ex[i].history.size(), 9u);
    EXPECT_EQ(ex[i].target.rows(), static_cast<Eigen::Index>(recs[i].annotation.scores.size()));
    EXPECT_EQ(ex[i].target.cols(), 32);
    EXPECT_EQ(ex[i].gt, recs[i].annotation.scores);
    EXPECT_EQ(ex[i].spans.size(), ex[i].gt.size());
  }
}

TEST(Examples, HistoryKeepsMostRecent) {
  synth::LatentEmbeddingProvider p(fixture::small_world());
  const auto& r = fixture::small_dataset().records.front();
  ExampleOptions o;
  o.history_length = 3;
  const auto ex = build_examples({r}, p, o);
  ASSERT_EQ(ex[0].history.size(), 3u);
  EXPECT_EQ(ex[0].history[2].vector, encode_video(r.session.turns[8].chosen, p).vector);
  EXPECT_EQ(ex[0].history[0].vector, encode_video(r.session.turns[6].chosen, p).vector);
  o.history_length = 50;
  EXPECT_EQ(build_examples({r}, p, o)[0].history.size(), 9u);
}

TEST(Examples, MismatchedAnnotationIsRejected) {
  synth::LatentEmbeddingProvider p(fixture::small_world());
  auto r = fixture::small_dataset().records.front();
  r.annotation.scores.pop_back();
  EXPECT_THROW(build_examples({r}, p), ValidationError);
}

TEST(Examples, ThreadCountDoesNotMatter) {
  synth::LatentEmbeddingProvider p(fixture::small_world());
  const auto& recs = fixture::small_dataset().records;
  const auto a = build_examples(recs, p, {}, 1);
  const auto b = build_examples(recs, p, {}, 4);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].target, b[i].target);
}

TEST(SimulateWorld, IndependentOfThreads) {
  const auto a = simulate_world(fixture::small_world(), 5, 1);
  const auto b = simulate_world(fixture::small_world(), 5, 3);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.records.size(), 24u);
  EXPECT_NE(simulate_world(fixture::small_world(), 6, 1).records, a.records);
}

TEST(Ablation, ParsingAndModalities) {
  EXPECT_EQ(ablation_axis_from_string("gamma"), AblationAxis::kGamma);
  EXPECT_THROW(ablation_axis_from_string("depth"), ValidationError);
  EXPECT_TRUE(modality_features("visual").zero_text);
  EXPECT_TRUE(modality_features("text").zero_visual);
  EXPECT_TRUE(modality_features("none").zero_text && modality_features("none").zero_visual);
  EXPECT_THROW(modality_features("audio"), ValidationError);
}

TEST(Ablation, OneRowPerValue) {
  synth::LatentEmbeddingProvider p(fixture::small_world());
  const auto& recs = fixture::small_dataset().records;
  const std::vector<DatasetRecord> train(recs.begin(), recs.begin() + 16), test(recs.begin() + 16, recs.end());
  auto c = small_config();
  c.train.epochs = 2;
  const auto rows = run_ablation(train, test, p, AblationAxis::kHistoryLength, {"1", "9"}, c);
  ASSERT_EQ(rows.size(), 2u);
  const auto table = ablation_table(AblationAxis::kHistoryLength, rows);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
  EXPECT_NE(table.find("Hit1@7"), std::string::npos);
  EXPECT_THROW(run_ablation(train, test, p, AblationAxis::kGamma, {"-1"}, c), ValidationError);
  EXPECT_THROW(run_ablation(train, test, p, AblationAxis::kHistoryLength, {"2x"}, c),
               ValidationError);
}

// The model trained on mock data must rank segments the way the oracle does:
// segments aligned with the user (cos > 0) above anti-aligned ones, and its
// output must depend on the preference embedding.
TEST(TrainedModel, RecoversOracleStructure) {
  const auto world = fixture::small_world();
  synth::LatentEmbeddingProvider p(world);
  const auto& recs = fixture::small_dataset().records;
  const auto ex = build_examples(recs, p);
  auto c = small_config();
  hipher::ModelConfig mc = c.model;
  mc.input_dim = 32;
  hipher::Model model(mc, c.model_seed);
  hipher::train(model, ex, c.train);

  std::size_t ordered = 0, pairs = 0;
  std::size_t sensitive = 0, probes = 0;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    const auto& user = world->users[user_of(ex[i].id)];
    const auto& video = world->video(recs[i].annotation.video_id);
    const auto e_p = hipher::preference_embedding(ex[i].history);
    const auto s = hipher::score_segments(model, ex[i].target, e_p);
    for (std::size_t a = 0; a < s.size(); ++a)
      for (std::size_t b = 0; b < s.size(); ++b) {
        if (!(user.u.dot(video.segment_latents[a]) > 0 && user.u.dot(video.segment_latents[b]) < 0))
          continue;
        ++pairs;
        ordered += s[a] > s[b] ? 1 : 0;
      }
    const auto& other = ex[(i + 1) % ex.size()];
    const auto swapped = hipher::score_segments(model, ex[i].target,
                                                hipher::preference_embedding(other.history));
    ++probes;
    sensitive += (s != swapped) ? 1 : 0;
  }
  ASSERT_GT(pairs, 0u);
  EXPECT_GE(static_cast<double>(ordered) / pairs, 0.9);
  EXPECT_EQ(sensitive, probes);
}
