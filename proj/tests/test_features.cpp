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

#include <atomic>

#include "pvh/errors.hpp"
#include "pvh/features.hpp"
#include "test_util.hpp"

using namespace pvh;

namespace {

// image -> [1, 0], text -> [0, 1]; throws on frame refs containing "bad".
class UnitProvider final : public EmbeddingProvider {
 public:
  Eigen::VectorXd embed_image(const std::string& ref) const override {
    if (ref.find("bad") != std::string::npos) throw PortError("backbone unavailable");
    return Eigen::Vector2d(1, 0);
  }
  Eigen::VectorXd embed_text(const std::string&) const override {
    ++text_calls;
    return Eigen::Vector2d(0, 1);
  }
  std::pair<int, int> dims() const override { return {2, 2}; }
  std::string id() const override { return "unit"; }
  mutable std::atomic<int> text_calls{0};
};

Segment seg(int index, std::string transcript, std::string frame = "f.jpg") {
  Segment s;
  s.index = index;
  s.start_s = index;
  s.end_s = index + 1;
  s.caption = "a caption";
  s.transcript = std::move(transcript);
  s.frame_ref = std::move(frame);
  return s;
}

}  // namespace

TEST(SegmentFeature, ConcatenatesBlocks) {
  UnitProvider p;
  EXPECT_EQ(segment_feature(seg(0, "hello"), p).vector, Eigen::Vector4d(1, 0, 0, 1));
}

TEST(SegmentFeature, EmptyTranscriptZeroFillsText) {
  UnitProvider p;
  EXPECT_EQ(segment_feature(seg(0, ""), p).vector, Eigen::Vector4d(1, 0, 0, 0));
  EXPECT_EQ(p.text_calls, 0);
}

TEST(SegmentFeature, CaptionOnlyWhenRequested) {
  UnitProvider p;
  FeatureConfig c;
  c.include_caption = true;
  EXPECT_EQ(segment_feature(seg(0, ""), p, c).vector, Eigen::Vector4d(1, 0, 0, 1));
}

TEST(SegmentFeature, ZeroedBlocks) {
  UnitProvider p;
  FeatureConfig c;
  c.zero_visual = true;
  EXPECT_EQ(segment_feature(seg(0, "x"), p, c).vector, Eigen::Vector4d(0, 0, 0, 1));
  c.zero_text = true;
  EXPECT_EQ(segment_feature(seg(0, "x"), p, c).vector, Eigen::Vector4d::Zero());
}

TEST(SegmentFeature, HashProviderWidth) {
  HashEmbeddingProvider p;
  EXPECT_EQ(p.dims(), std::make_pair(512, 512));
  EXPECT_EQ(segment_feature(seg(0, "some words"), p).vector.size(), 1024);
}

TEST(SegmentFeature, ProviderFailureCarriesIndex) {
  UnitProvider p;
  try {
    segment_feature(seg(7, "x", "bad.jpg"), p);
    FAIL();
  } catch (const FeaturizationError& e) {
    EXPECT_EQ(e.segment_index(), 7);
  }
}

TEST(EncodeVideo, MeanOfSegments) {
  Eigen::MatrixXd f(2, 2);
  f << 1, 0, 0, 1;
  EXPECT_EQ(encode_features(f).vector, Eigen::Vector2d(0.5, 0.5));
  Eigen::MatrixXd one(1, 3);
  one << 0.1, -2, 5;
  EXPECT_EQ(encode_features(one).vector, Eigen::Vector3d(0.1, -2, 5));
  Eigen::MatrixXd same(3, 2);
  same << 0.3, 0.7, 0.3, 0.7, 0.3, 0.7;
  EXPECT_LE((encode_features(same).vector - Eigen::Vector2d(0.3, 0.7)).norm(), 1e-15);
  EXPECT_THROW(encode_features(Eigen::MatrixXd(0, 2)), ValidationError);
}

TEST(EncodeVideo, RecordWithoutSegmentsFails) {
  UnitProvider p;
  VideoRecord v;
  v.meta.video_id = "empty";
  EXPECT_THROW(encode_video(v, p), ValidationError);
}

TEST(HashProvider, DeterministicUnitVectors) {
  HashEmbeddingProvider a(32, 16, 9), b(32, 16, 9), c(32, 16, 10);
  EXPECT_EQ(a.embed_image("x.jpg"), b.embed_image("x.jpg"));
  EXPECT_NEAR(a.embed_image("x.jpg").norm(), 1.0, 1e-12);
  EXPECT_NEAR(a.embed_text("Cat grooming tips").norm(), 1.0, 1e-12);
  EXPECT_EQ(a.embed_text("cat GROOMING"), a.embed_text("grooming cat"));
  EXPECT_NE(a.embed_image("x.jpg"), c.embed_image("x.jpg"));
  EXPECT_EQ(a.embed_text("").norm(), 0.0);
  EXPECT_THROW(HashEmbeddingProvider(0, 4), ValidationError);
}

TEST(Cache, ServesRepeatsAndPersists) {
  fixture::TempDir dir("cache");
  auto inner = std::make_shared<HashEmbeddingProvider>(8, 8);
  CachedEmbeddingProvider cache(inner);
  const auto v = cache.embed_text("hello world");
  EXPECT_EQ(cache.embed_text("hello world"), v);
  EXPECT_EQ(cache.hits(), 1u);
  EXPECT_EQ(v, inner->embed_text("hello world"));
  cache.embed_image("f.jpg");
  EXPECT_EQ(cache.size(), 2u);
  cache.save(dir.file("cache.jsonl"));

  CachedEmbeddingProvider again(inner);
  again.load(dir.file("cache.jsonl"));
  EXPECT_EQ(again.size(), 2u);
  EXPECT_EQ(again.embed_text("hello world"), v);
  EXPECT_EQ(again.hits(), 1u);

  // entries keyed by another provider id are never served
  CachedEmbeddingProvider other(std::make_shared<HashEmbeddingProvider>(8, 8, 1));
  other.load(dir.file("cache.jsonl"));
  other.embed_text("hello world");
  EXPECT_EQ(other.hits(), 0u);
}

TEST(SegmentText, FillsOnlyEmptyFields) {
  struct Cap : FrameCaptionerPort {
    std::string caption(const std::string& ref) override { return "cap:" + ref; }
  } cap;
  struct Asr : TranscriberPort {
    std::string transcribe(const std::string& id, double s, double e) override {
      return id + "@" + std::to_string(int(s)) + "-" + std::to_string(int(e));
    }
  } asr;
  VideoRecord v;
  v.meta.video_id = "v1";
  v.segments = {seg(0, ""), seg(1, "kept")};
  v.segments[0].caption.clear();
  fill_segment_text(v, &cap, &asr);
  EXPECT_EQ(v.segments[0].caption, "cap:f.jpg");
  EXPECT_EQ(v.segments[0].transcript, "v1@0-1");
  EXPECT_EQ(v.segments[1].caption, "a caption");
  EXPECT_EQ(v.segments[1].transcript, "kept");
  fill_segment_text(v, nullptr, nullptr);
  EXPECT_DOUBLE_EQ(representative_time(v.segments[1]), 1.5);
}
