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
#include <filesystem>
#include <map>

#include "pvh/errors.hpp"
#include "pvh/simulator.hpp"
#include "test_util.hpp"

using namespace pvh;
using namespace pvh::sim;

namespace {

VideoMeta meta(const std::string& id) {
  VideoMeta m;
  m.video_id = id;
  m.title = "Video " + id;
  m.channel = "chan";
  m.description = "about " + id;
  m.view_count = 10;
  m.published = "2024-01-02";
  m.duration_s = 3.0;
  m.thumbnail_ref = id + ".jpg";
  return m;
}

VideoRecord record(const std::string& id, int n = 3) {
  VideoRecord v;
  v.meta = meta(id);
  v.meta.duration_s = n;
  for (int k = 0; k < n; ++k)
    v.segments.push_back({k, double(k), double(k + 1), "frame " + std::to_string(k),
                          "words " + std::to_string(k), id + "/" + std::to_string(k)});
  return v;
}

// In-memory catalog with explicit search and related tables.
class MapCatalog final : public VideoCatalog {
 public:
  std::map<std::string, std::vector<std::string>> search_table, related_table;
  std::vector<VideoMeta> search(const std::string& q, std::size_t limit) const override {
    return metas(search_table.count(q) ? search_table.at(q) : std::vector<std::string>{}, limit);
  }
  std::vector<VideoMeta> related(const std::string& id, std::size_t limit) const override {
    return metas(related_table.count(id) ? related_table.at(id) : std::vector<std::string>{},
                 limit);
  }
  VideoRecord fetch(const std::string& id) const override { return record(id); }

 private:
  static std::vector<VideoMeta> metas(const std::vector<std::string>& ids, std::size_t limit) {
    std::vector<VideoMeta> out;
    for (const auto& id : ids)
      if (out.size() < limit) out.push_back(meta(id));
    return out;
  }
};

// Wraps a catalog and returns nothing once `limit` videos have been fetched.
class DryingCatalog final : public VideoCatalog {
 public:
  DryingCatalog(std::shared_ptr<const VideoCatalog> inner, int limit)
      : inner_(std::move(inner)), limit_(limit) {}
  std::vector<VideoMeta> search(const std::string& q, std::size_t n) const override {
    return fetched_ >= limit_ ? std::vector<VideoMeta>{} : inner_->search(q, n);
  }
  std::vector<VideoMeta> related(const std::string& id, std::size_t n) const override {
    return fetched_ >= limit_ ? std::vector<VideoMeta>{} : inner_->related(id, n);
  }
  VideoRecord fetch(const std::string& id) const override {
    ++fetched_;
    return inner_->fetch(id);
  }

 private:
  std::shared_ptr<const VideoCatalog> inner_;
  int limit_;
  mutable std::atomic<int> fetched_{0};
};

std::vector<VideoMeta> metas(int n) {
  std::vector<VideoMeta> out;
  for (int i = 1; i <= n; ++i) out.push_back(meta("v" + std::to_string(i)));
  return out;
}

PreferenceProfile profile(int turn = 1) {
  PreferenceProfile p;
  p.likes = {"dog training"};
  p.turn = turn;
  return p;
}

}  // namespace

// ---- templates -----------------------------------------------------------------

TEST(Prompts, EmbeddedCopiesMatchFiles) {
  const auto files = PromptTemplates::load(PVH_SOURCE_DIR "/prompts");
  const auto& b = PromptTemplates::builtin();
  EXPECT_EQ(b.retrieval, files.retrieval);
  EXPECT_EQ(b.selection, files.selection);
  EXPECT_EQ(b.watch, files.watch);
  EXPECT_EQ(b.update, files.update);
  EXPECT_EQ(b.scoring, files.scoring);
  EXPECT_THROW(PromptTemplates::load("/nonexistent"), std::runtime_error);
}

TEST(Prompts, SlotsPerTemplate) {
  const auto& b = PromptTemplates::builtin();
  using V = std::vector<std::string>;
  EXPECT_EQ(placeholders(b.retrieval),
            (V{"intent", "search query", "watch history", "preference", "related videos"}));
  EXPECT_EQ(placeholders(b.selection), (V{"history", "preference", "query", "candidate"}));
  EXPECT_EQ(placeholders(b.watch), (V{"preference", "video"}));
  EXPECT_EQ(placeholders(b.scoring), (V{"preference_profile", "clip info"}));
}

TEST(Render, SubstitutesWithoutRescanning) {
  EXPECT_EQ(render("a {x} b {y}", {{"x", "{y}"}, {"y", "2"}}), "a {y} b 2");
  EXPECT_THROW(render("a {x}", {}), ValidationError);
  EXPECT_THROW(render("a {x", {{"x", "1"}}), ValidationError);
}

TEST(Render, Fragments) {
  EXPECT_EQ(render_meta_list({}), "(none)");
  EXPECT_NE(render_meta(meta("v9")).find("ID: v9"), std::string::npos);
  const auto list = render_meta_list(metas(2));
  EXPECT_EQ(list.rfind("1. ", 0), 0u);
  EXPECT_NE(list.find("\n2. "), std::string::npos);
  PreferenceProfile p;
  EXPECT_EQ(render_preference(p), "Likes:\n- (none)\nDislikes:\n- (none)");
  const auto clips = render_clips(record("v1", 2));
  EXPECT_NE(clips.find("Clip ID: clip_0"), std::string::npos);
  EXPECT_NE(clips.find("Clip ID: clip_1"), std::string::npos);
}

// ---- retrieval decision ------------------------------------------------------------

TEST(Decision, Parse) {
  EXPECT_EQ(parse_decision("Decision: [Explore]"), RetrievalDecision::explore());
  EXPECT_EQ(parse_decision("Decision: [Search for a new query]\nNew query: [dog agility training]"),
            RetrievalDecision::new_query("dog agility training"));
  EXPECT_FALSE(parse_decision("maybe explore?").has_value());
  EXPECT_FALSE(parse_decision("Decision: [Search for a new query]").has_value());
}

TEST(Decision, RetryThenExploreFallback) {
  ScriptedLanguageModel lm({"maybe explore?", "still unsure"});
  const auto r = decide_retrieval(metas(1), profile(), metas(2), lm, 40);
  EXPECT_EQ(r.decision, RetrievalDecision::explore());
  ASSERT_EQ(r.warnings.size(), 1u);
  ASSERT_EQ(lm.prompts().size(), 2u);
  EXPECT_EQ(lm.prompts()[0], lm.prompts()[1]);
  EXPECT_EQ(lm.seeds(), (std::vector<std::uint64_t>{40, 41}));
}

TEST(Decision, RetrySucceeds) {
  ScriptedLanguageModel lm({"??", "Decision: [Search]\nNew query: [cat grooming]"});
  const auto r = decide_retrieval(metas(1), profile(), {}, lm, 1);
  EXPECT_EQ(r.decision, RetrievalDecision::new_query("cat grooming"));
  EXPECT_TRUE(r.warnings.empty());
}

// ---- candidates -------------------------------------------------------------------

TEST(Candidates, NewQueryPassthrough) {
  MapCatalog c;
  for (int i = 1; i <= 8; ++i) c.search_table["cat grooming"].push_back("v" + std::to_string(i));
  const auto r =
      retrieve_candidates(RetrievalDecision::new_query("cat grooming"), std::nullopt, c, 8, {}, "x");
  EXPECT_EQ(r.candidates, metas(8));
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Candidates, ExploreDedupsWatched) {
  MapCatalog c;
  c.related_table["v3"] = {"v3", "v7"};
  const auto r =
      retrieve_candidates(RetrievalDecision::explore(), meta("v3"), c, 8, {"v3"}, "fallback");
  ASSERT_EQ(r.candidates.size(), 1u);
  EXPECT_EQ(r.candidates[0].video_id, "v7");
}

TEST(Candidates, FallbackQuery) {
  MapCatalog c;
  c.related_table["v3"] = {"v3"};
  c.search_table["Pets cats"] = {"v3", "v4"};
  const auto r =
      retrieve_candidates(RetrievalDecision::explore(), meta("v3"), c, 8, {"v3"}, "Pets cats");
  ASSERT_EQ(r.candidates.size(), 1u);
  EXPECT_EQ(r.candidates[0].video_id, "v4");
  ASSERT_TRUE(r.fallback.has_value());
  EXPECT_EQ(r.fallback->query, "Pets cats");
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Candidates, EmptyCatalogAborts) {
  MapCatalog c;
  EXPECT_THROW(retrieve_candidates(RetrievalDecision::new_query("q"), std::nullopt, c, 8, {}, "f"),
               RetrievalError);
}

// ---- selection -----------------------------------------------------------------------

TEST(Selection, OneBasedIndices) {
  ScriptedLanguageModel lm(
      {"Most Wanted: [2]\nExplanation: [fits]\nLeast Wanted: [5]\nExplanation: [boring]"});
  const auto s = select_videos(metas(8), {}, profile(), "q", lm, 1);
  EXPECT_EQ(s.most, 1u);
  EXPECT_EQ(s.least, 4u);
  EXPECT_EQ(s.choose_reason, "fits");
  EXPECT_EQ(s.reject_reason, "boring");
}

TEST(Selection, MostNoneSignalsRegeneration) {
  ScriptedLanguageModel lm({"Most Wanted: [None]\nLeast Wanted: [1]"});
  EXPECT_THROW(select_videos(metas(8), {}, profile(), "q", lm, 1), MostWantedUnavailable);
}

TEST(Selection, MostOutOfRange) {
  ScriptedLanguageModel lm({"Most Wanted: [9]\nLeast Wanted: [1]"});
  try {
    select_videos(metas(8), {}, profile(), "q", lm, 1);
    FAIL();
  } catch (const MostWantedUnavailable& e) {
    EXPECT_NE(std::string(e.what()).find("out of range"), std::string::npos);
  }
}

TEST(Selection, LeastNoneIsWarning) {
  ScriptedLanguageModel lm({"Most Wanted: [1]\nLeast Wanted: [None]"});
  const auto s = select_videos(metas(3), {}, profile(), "q", lm, 1);
  EXPECT_FALSE(s.least.has_value());
  EXPECT_EQ(s.warnings.size(), 1u);
}

TEST(Selection, PromptShowsAtMostThreeRecent) {
  ScriptedLanguageModel lm({"Most Wanted: [1]\nLeast Wanted: [2]"});
  select_videos(metas(2), {meta("h1"), meta("h2"), meta("h3"), meta("h4")}, profile(), "q", lm, 1);
  const auto prompt = lm.prompts().at(0);
  EXPECT_EQ(prompt.find("ID: h1"), std::string::npos);
  EXPECT_NE(prompt.find("ID: h4"), std::string::npos);
}

// ---- watching ------------------------------------------------------------------------

TEST(Watch, ReviewPassthrough) {
  ScriptedLanguageModel lm({"summary+opinion"});
  EXPECT_EQ(watch_video(record("v1"), profile(), lm, 1).text, "summary+opinion");
}

TEST(Watch, EmptyCaptionsStillRender) {
  auto v = record("v1");
  for (auto& s : v.segments) s.caption.clear();
  ScriptedLanguageModel lm({"ok"});
  EXPECT_EQ(watch_video(v, profile(), lm, 1).text, "ok");
  EXPECT_NE(lm.prompts()[0].find("words 2"), std::string::npos);
}

TEST(Watch, EmptyCompletionsGivePlaceholder) {
  ScriptedLanguageModel lm({"", "  "});
  const auto r = watch_video(record("v1"), profile(), lm, 1);
  EXPECT_EQ(r.text, kNoReview);
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Watch, VideoWithoutTextIsRejected) {
  auto v = record("v1");
  for (auto& s : v.segments) s.caption.clear(), s.transcript.clear();
  ScriptedLanguageModel lm({"x"});
  EXPECT_THROW(watch_video(v, profile(), lm, 1), ValidationError);
}

// ---- preference update --------------------------------------------------------------

TEST(Update, AddsBullets) {
  ScriptedLanguageModel lm({"Likes:\n- agility drills\n- puppy tricks\nDislikes:\n- loud music"});
  const auto r = update_preference(profile(1), {{"nice"}, meta("v1"), "", {}, ""}, lm, 1);
  EXPECT_EQ(r.profile.likes,
            (std::vector<std::string>{"dog training", "agility drills", "puppy tricks"}));
  EXPECT_EQ(r.profile.dislikes, (std::vector<std::string>{"loud music"}));
  EXPECT_EQ(r.profile.turn, 2);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Update, CapEvictsOldest) {
  std::string completion = "Likes:\n";
  for (int i = 1; i <= 15; ++i) completion += "- like " + std::to_string(i) + "\n";
  ScriptedLanguageModel lm({completion});
  PreferenceProfile empty;
  const auto r = update_preference(empty, {{"r"}, meta("v1"), "", {}, ""}, lm, 1);
  ASSERT_EQ(r.profile.likes.size(), 12u);
  EXPECT_EQ(r.profile.likes.front(), "like 4");
  EXPECT_EQ(r.profile.likes.back(), "like 15");
}

TEST(Update, GibberishCarriesProfileForward) {
  ScriptedLanguageModel lm({"lorem ipsum", "dolor sit"});
  const auto r = update_preference(profile(3), {{"r"}, meta("v1"), "", {}, ""}, lm, 1);
  EXPECT_EQ(r.profile.likes, profile().likes);
  EXPECT_EQ(r.profile.turn, 4);
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Update, RemovalHeader) {
  const auto parsed = parse_preference_bullets(
      "**Refined preferences:**\n1. cooking\nDislikes:\n* spoilers\nRemoved preferences:\n- dog training");
  EXPECT_EQ(parsed.likes, (std::vector<std::string>{"cooking"}));
  EXPECT_EQ(parsed.dislikes, (std::vector<std::string>{"spoilers"}));
  EXPECT_EQ(parsed.removals, (std::vector<std::string>{"dog training"}));
  const auto merged = merge_preference(profile(1), parsed);
  EXPECT_EQ(merged.likes, (std::vector<std::string>{"cooking"}));
}

// ---- sessions -----------------------------------------------------------------------

TEST(Session, BootstrapStrings) {
  ProfileSeed s{"Animals", "Dog", Intent::kAmusing, {}};
  EXPECT_EQ(bootstrap_query(s), intent_phrase(Intent::kAmusing) + " Animals Dog");
  const auto p = initial_preference(s);
  EXPECT_EQ(p.turn, 0);
  ASSERT_EQ(p.likes.size(), 1u);
  EXPECT_NE(p.likes[0].find("Dog"), std::string::npos);
}

TEST(Session, MockSessionHasTenTurnsAndIsDeterministic) {
  const auto world = fixture::small_world();
  const auto& seed = world->users[3].seed;
  const auto a = run_session(seed, synth::mock_ports(world, 3), {}, 77, "a");
  const auto b = run_session(seed, synth::mock_ports(world, 3), {}, 77, "a");
  ASSERT_EQ(a.turns.size(), 10u);
  EXPECT_NO_THROW(validate(a, 10));
  for (std::size_t i = 0; i < a.turns.size(); ++i)
    EXPECT_EQ(a.turns[i].preference_after.turn, static_cast<int>(i + 1));
  EXPECT_EQ(a.turns[0].decision, RetrievalDecision::new_query(bootstrap_query(seed)));
  std::ostringstream sa, sb;
  write_watch_session(a, sa);
  write_watch_session(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Session, CatalogRunningDryAbortsAtNextTurn) {
  const auto world = fixture::small_world();
  Ports ports = synth::mock_ports(world, 0);
  ports.catalog = std::make_shared<DryingCatalog>(ports.catalog, 4);
  try {
    run_session(world->users[0].seed, ports, {}, 1, "dry");
    FAIL();
  } catch (const SessionError& e) {
    EXPECT_EQ(e.failed_turn, 5);
    EXPECT_EQ(e.partial_session.turns.size(), 4u);
    EXPECT_NE(std::string(e.what()).find("turn 5"), std::string::npos);
  }
}

TEST(Session, BatchIndependentOfThreads) {
  const auto world = fixture::small_world();
  const auto seeds = synth::world_seeds(*world);
  auto ports = [&](std::size_t i) { return synth::mock_ports(world, static_cast<int>(i)); };
  const auto a = run_sessions(seeds, ports, {}, 9, 1);
  const auto b = run_sessions(seeds, ports, {}, 9, 4);
  EXPECT_TRUE(a.errors.empty());
  EXPECT_EQ(a.sessions, b.sessions);
  EXPECT_EQ(a.sessions.size(), seeds.size());
  EXPECT_EQ(a.sessions[2].session_id, seeds[2].extra["session_id"].get<std::string>());
}

TEST(Session, BatchRecordsFailures) {
  const auto world = fixture::small_world();
  auto seeds = synth::world_seeds(*world);
  seeds.resize(3);
  auto ports = [&](std::size_t i) {
    Ports p = synth::mock_ports(world, static_cast<int>(i));
    if (i == 1) p.catalog = std::make_shared<DryingCatalog>(p.catalog, 2);
    return p;
  };
  const auto r = run_sessions(seeds, ports, {}, 9, 1);
  EXPECT_EQ(r.sessions.size(), 2u);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_NE(r.errors[0].find("turn 3"), std::string::npos);
}

// ---- annotation -----------------------------------------------------------------------

namespace {

WatchSession one_turn_session(int n) {
  WatchSession s;
  s.session_id = "s";
  TurnRecord t;
  t.chosen = record("v1", n);
  t.review = "good";
  t.preference_after = profile(1);
  s.turns.push_back(t);
  s.final_preference = profile(1);
  return s;
}

}  // namespace

TEST(Annotate, ParsesScores) {
  ScriptedLanguageModel lm({"Clip ID: clip_0, Score: 8\nClip ID: clip_1, Score: 5\n"
                            "Clip ID: clip_2, Score: 9\nClip ID: clip_3, Score: 3\n"
                            "Clip ID: clip_4, Score: 6, Justification: [fine]"});
  const auto a = annotate_saliency(one_turn_session(5), lm, 1);
  EXPECT_EQ(a.scores, (std::vector<int>{8, 5, 9, 3, 6}));
  EXPECT_EQ(a.justifications[4], "fine");
  EXPECT_EQ(a.video_id, "v1");
  EXPECT_EQ(lm.prompts().size(), 1u);
}

TEST(Annotate, ClampsOutOfRange) {
  ScriptedLanguageModel lm({"Clip ID: clip_0, Score: 11\nClip ID: clip_1, Score: 4"});
  const auto a = annotate_saliency(one_turn_session(2), lm, 1);
  EXPECT_EQ(a.scores, (std::vector<int>{10, 4}));
  EXPECT_EQ(a.warnings.size(), 1u);
  EXPECT_EQ(lm.prompts().size(), 2u);  // out-of-range triggers the retry first
}

TEST(Annotate, RetryFillsGaps) {
  ScriptedLanguageModel lm({"Clip ID: clip_0, Score: 2", "Clip ID: clip_1, Score: 7"});
  const auto a = annotate_saliency(one_turn_session(2), lm, 1);
  EXPECT_EQ(a.scores, (std::vector<int>{2, 7}));
}

TEST(Annotate, MissingClipTwiceNamesIt) {
  ScriptedLanguageModel lm({"Clip ID: clip_0, Score: 2\nClip ID: clip_1, Score: 2"});
  try {
    annotate_saliency(one_turn_session(3), lm, 1);
    FAIL();
  } catch (const AnnotationError& e) {
    EXPECT_EQ(e.clip(), 2);
    EXPECT_NE(std::string(e.what()).find("clip_2"), std::string::npos);
  }
}

// ---- fixture catalog -------------------------------------------------------------------

TEST(FixtureCatalog, SearchRelatedFetch) {
  fixture::TempDir dir("fixture");
  for (const char* id : {"a1", "b2", "c3"}) {
    std::ofstream(dir.file(std::string(id) + ".json")) << to_json(record(id)).dump();
  }
  std::ofstream(dir.file("search_index.json"))
      << R"({"cat": ["a1", "b2"], "grooming": ["b2"], "dog": ["c3"]})";
  FixtureCatalog cat(dir.path().string());
  const auto hits = cat.search("Cat grooming", 8);
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].video_id, "b2");  // two token hits
  EXPECT_EQ(cat.search("cat", 1).size(), 1u);
  const auto rel = cat.related("a1", 8);
  ASSERT_EQ(rel.size(), 1u);
  EXPECT_EQ(rel[0].video_id, "b2");
  EXPECT_EQ(cat.fetch("c3"), record("c3"));
  EXPECT_THROW(cat.fetch("zz"), PortError);

  std::ofstream(dir.file("related.json")) << R"({"a1": ["c3"]})";
  FixtureCatalog with_related(dir.path().string());
  EXPECT_EQ(with_related.related("a1", 8).at(0).video_id, "c3");
}

TEST(FixtureCatalog, UnknownIdInIndexIsRejected) {
  fixture::TempDir dir("fixture_bad");
  std::ofstream(dir.file("search_index.json")) << R"({"cat": ["nope"]})";
  EXPECT_THROW(FixtureCatalog(dir.path().string()), PortError);
  EXPECT_THROW(FixtureCatalog("/nonexistent/dir"), PortError);
}

TEST(HttpModel, UnreachableEndpointIsPortError) {
  HttpLanguageModel::Options o;
  o.base_url = "http://127.0.0.1:9";
  o.timeout_s = 2;
  HttpLanguageModel lm(o);
  EXPECT_THROW(lm.complete("hi", 1), PortError);
}
