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

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pvh/analysis.hpp"
#include "pvh/errors.hpp"
#include "pvh/rng.hpp"
#include "test_util.hpp"

using namespace pvh;
using namespace pvh::analysis;

namespace {

WatchSession with_decisions(const std::vector<RetrievalDecision>& decisions) {
  WatchSession s;
  s.session_id = "s";
  for (const auto& d : decisions) {
    TurnRecord t;
    t.decision = d;
    s.turns.push_back(t);
  }
  return s;
}

const auto kExplore = RetrievalDecision::explore();
RetrievalDecision q(const std::string& s) { return RetrievalDecision::new_query(s); }

}  // namespace

TEST(Exploration, ThreeDriftsOutOfNine) {
  const auto s = with_decisions({q("dog training tips"), kExplore, q("italian pasta recipes"),
                                 kExplore, kExplore, q("dog training tips for puppies"),
                                 q("jazz piano"), kExplore, q("volcano eruptions"), kExplore});
  // "dog training tips for puppies" shares 3 of 5 tokens with turn 1: not a drift
  EXPECT_DOUBLE_EQ(exploration_ratio(s), 3.0 / 9.0);
}

TEST(Exploration, AllExploreIsZero) {
  std::vector<RetrievalDecision> d(10, kExplore);
  d[0] = q("dog training");
  EXPECT_EQ(exploration_ratio(with_decisions(d)), 0.0);
}

TEST(Exploration, AllDistinctIsOne) {
  std::vector<RetrievalDecision> d;
  for (int i = 0; i < 10; ++i) d.push_back(q("topic" + std::to_string(i) + " words"));
  // "words" is shared, but {topicN, words} vs {topicM, words} has Jaccard 1/3
  EXPECT_EQ(exploration_ratio(with_decisions(d)), 1.0);
}

TEST(Exploration, RepeatedQueryIsNotDrift) {
  EXPECT_EQ(exploration_ratio(with_decisions({q("a b"), q("A B")})), 0.0);
  EXPECT_THROW(exploration_ratio(with_decisions({q("a")})), ValidationError);
}

TEST(DistinctQuery, JaccardBoundary) {
  EXPECT_TRUE(is_distinct_query("a b c", {}));
  EXPECT_FALSE(is_distinct_query("a b", {"a b c d"}));  // exactly 0.5
  EXPECT_TRUE(is_distinct_query("a b", {"a c d"}));     // 0.25
}

TEST(ScoreStats, Examples) {
  const auto s = score_stats({2, 4, 4, 4, 5, 5, 7, 9});
  EXPECT_DOUBLE_EQ(s.mean, 5.0);
  EXPECT_DOUBLE_EQ(s.std, 2.0);
  const auto flat = score_stats({6, 6, 6});
  EXPECT_EQ(flat.mean, 6.0);
  EXPECT_EQ(flat.std, 0.0);
  EXPECT_THROW(score_stats(std::vector<int>{}), ValidationError);
}

TEST(ScoreStats, MatchesTwoPassReference) {
  Rng r(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> v(1 + r.below(40));
    for (auto& x : v) x = 1 + static_cast<int>(r.below(10));
    double mean = 0;
    for (int x : v) mean += x;
    mean /= v.size();
    double var = 0;
    for (int x : v) var += (x - mean) * (x - mean);
    const auto s = score_stats(v);
    EXPECT_NEAR(s.mean, mean, 1e-12);
    EXPECT_NEAR(s.std, std::sqrt(var / v.size()), 1e-12);
  }
}

TEST(Export, MeanOfVideoMeans) {
  const auto world = fixture::small_world();
  synth::LatentEmbeddingProvider p(world, false);
  const auto& session = fixture::small_dataset().records.front().session;
  const auto table = export_history_embeddings({session}, p, 1);
  ASSERT_EQ(table.rows.size(), 1u);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(p.dims().first);
  for (const auto& t : session.turns) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(p.dims().first);
    for (const auto& s : t.chosen.segments) m += p.embed_image(s.frame_ref);
    expected += m / static_cast<double>(t.chosen.segments.size());
  }
  expected /= static_cast<double>(session.turns.size());
  EXPECT_LE((table.rows[0].vector - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Export, TurnOrderDoesNotMatter) {
  synth::LatentEmbeddingProvider p(fixture::small_world());
  auto session = fixture::small_dataset().records.front().session;
  const auto a = export_history_embeddings({session}, p, 1);
  std::reverse(session.turns.begin(), session.turns.end());
  const auto b = export_history_embeddings({session}, p, 1);
  EXPECT_LE((a.rows[0].vector - b.rows[0].vector).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Export, FailuresAreSkippedAndThreadsAgree) {
  synth::LatentEmbeddingProvider p(fixture::small_world());
  std::vector<WatchSession> sessions;
  for (const auto& r : fixture::small_dataset().records) sessions.push_back(r.session);
  sessions[1].turns[0].chosen.segments[0].frame_ref = "missing";
  const auto one = export_history_embeddings(sessions, p, 1);
  const auto four = export_history_embeddings(sessions, p, 4);
  ASSERT_EQ(one.skipped.size(), 1u);
  EXPECT_EQ(one.skipped[0].rfind(sessions[1].session_id + ":", 0), 0u);
  ASSERT_EQ(one.rows.size(), sessions.size() - 1);
  for (std::size_t i = 0; i < one.rows.size(); ++i) {
    EXPECT_EQ(one.rows[i].session_id, four.rows[i].session_id);
    EXPECT_EQ(one.rows[i].vector, four.rows[i].vector);
  }
  std::ostringstream csv;
  write_embeddings_csv(one, csv);
  const std::string text = csv.str();
  EXPECT_EQ(text.rfind("session_id,e0,e1", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'),
            static_cast<long>(one.rows.size() + 1));
}

TEST(StatsCsv, Header) {
  std::ostringstream os;
  write_stats_csv({{"s1", 0.5, {5.0, 1.0}}}, os);
  EXPECT_EQ(os.str(), "session_id,exploration_ratio,score_mean,score_std\ns1,0.5,5,1\n");
}
