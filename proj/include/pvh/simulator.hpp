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

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pvh/core_model.hpp"

namespace pvh::sim {

// ---- ports --------------------------------------------------------------------

// Single-turn completion. Mock implementations must be deterministic in
// (prompt, seed); all implementations must tolerate concurrent calls.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::string complete(const std::string& prompt, std::uint64_t seed) const = 0;
};

class VideoCatalog {
 public:
  virtual ~VideoCatalog() = default;
  virtual std::vector<VideoMeta> search(const std::string& query, std::size_t limit) const = 0;
  virtual std::vector<VideoMeta> related(const std::string& video_id, std::size_t limit) const = 0;
  virtual VideoRecord fetch(const std::string& video_id) const = 0;
};

struct Ports {
  std::shared_ptr<const LanguageModel> lm;
  std::shared_ptr<const VideoCatalog> catalog;
};

// Replays canned completions in order, cycling on the last one. Records
// every prompt it receives.
class ScriptedLanguageModel final : public LanguageModel {
 public:
  explicit ScriptedLanguageModel(std::vector<std::string> responses);
  std::string complete(const std::string& prompt, std::uint64_t seed) const override;
  std::vector<std::string> prompts() const;
  std::vector<std::uint64_t> seeds() const;

 private:
  std::vector<std::string> responses_;
  mutable std::mutex mu_;
  mutable std::size_t next_ = 0;
  mutable std::vector<std::string> prompts_;
  mutable std::vector<std::uint64_t> seeds_;
};

class FunctionLanguageModel final : public LanguageModel {
 public:
  using Fn = std::function<std::string(const std::string&, std::uint64_t)>;
  explicit FunctionLanguageModel(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const std::string& prompt, std::uint64_t seed) const override {
    return fn_(prompt, seed);
  }

 private:
  Fn fn_;
};

// OpenAI-style chat-completions endpoint. The API key is read from
// HIPPO_LLM_API_KEY when not given explicitly.
class HttpLanguageModel final : public LanguageModel {
 public:
  struct Options {
    std::string base_url = "http://127.0.0.1:8000";
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o-mini";
    std::string api_key;  // empty: use the environment
    double temperature = 0.0;
    int timeout_s = 120;
  };
  explicit HttpLanguageModel(Options options);
  std::string complete(const std::string& prompt, std::uint64_t seed) const override;

 private:
  Options options_;
};

// Offline catalog: a directory of `<video_id>.json` VideoRecord files plus
// `search_index.json` mapping keywords to id lists. An optional
// `related.json` maps ids to related ids; otherwise related videos are the
// ones sharing the most index keywords.
class FixtureCatalog final : public VideoCatalog {
 public:
  explicit FixtureCatalog(const std::string& directory);
  std::vector<VideoMeta> search(const std::string& query, std::size_t limit) const override;
  std::vector<VideoMeta> related(const std::string& video_id, std::size_t limit) const override;
  VideoRecord fetch(const std::string& video_id) const override;

 private:
  std::map<std::string, VideoRecord> videos_;
  std::map<std::string, std::vector<std::string>> index_;
  std::map<std::string, std::vector<std::string>> related_;
  std::map<std::string, std::vector<std::string>> keywords_of_;
};

// ---- prompts ------------------------------------------------------------------

struct PromptTemplates {
  std::string retrieval;
  std::string selection;
  std::string watch;
  std::string update;
  std::string scoring;

  static const PromptTemplates& builtin();
  // Reads retrieval.txt, selection.txt, watch.txt, update.txt, scoring.txt.
  static PromptTemplates load(const std::string& directory);
};

// Substitutes every `{name}` slot. Throws ValidationError when a slot has no
// value. Substituted text is not rescanned.
std::string render(const std::string& tmpl, const std::map<std::string, std::string>& slots);
std::vector<std::string> placeholders(const std::string& tmpl);

std::string render_meta(const VideoMeta& meta);
std::string render_meta_list(const std::vector<VideoMeta>& metas);
std::string render_preference(const PreferenceProfile& p);
std::string render_video(const VideoRecord& video);
std::string render_clips(const VideoRecord& video);
std::string intent_phrase(Intent intent);

// ---- operations ---------------------------------------------------------------

class MostWantedUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RetrievalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AnnotationError : public std::runtime_error {
 public:
  AnnotationError(int clip, const std::string& what)
      : std::runtime_error(what), clip_(clip) {}
  int clip() const { return clip_; }

 private:
  int clip_;
};

struct SessionError : public std::runtime_error {
  SessionError(int turn, const std::string& what, WatchSession partial)
      : std::runtime_error("turn " + std::to_string(turn) + ": " + what),
        failed_turn(turn),
        partial_session(std::move(partial)) {}
  int failed_turn;
  WatchSession partial_session;
};

struct DecisionResult {
  RetrievalDecision decision;
  std::vector<std::string> warnings;
};

struct DecisionContext {
  Intent intent = Intent::kInformative;
  std::string current_query;
};

// Parses `Decision: [...]` / `New query: [...]`. Empty on failure.
std::optional<RetrievalDecision> parse_decision(const std::string& completion);

DecisionResult decide_retrieval(const std::vector<VideoMeta>& history,
                                const PreferenceProfile& preference,
                                const std::vector<VideoMeta>& related_preview,
                                const LanguageModel& lm, std::uint64_t seed,
                                const DecisionContext& context = {},
                                const PromptTemplates& templates = PromptTemplates::builtin());

struct CandidateResult {
  std::vector<VideoMeta> candidates;
  std::vector<std::string> warnings;
  std::optional<RetrievalDecision> fallback;  // set when the fallback query was used
};

// Explore -> related(last_video); NewQuery -> search(query); watched ids are
// removed. When nothing remains, `fallback_query` is searched; if that is
// also empty a RetrievalError is thrown.
CandidateResult retrieve_candidates(const RetrievalDecision& decision,
                                    const std::optional<VideoMeta>& last_video,
                                    const VideoCatalog& catalog, std::size_t l,
                                    const std::vector<std::string>& watched_ids,
                                    const std::string& fallback_query);

struct Selection {
  std::size_t most = 0;
  std::optional<std::size_t> least;
  std::string choose_reason;
  std::string reject_reason;
  std::vector<std::string> warnings;
};

Selection select_videos(const std::vector<VideoMeta>& candidates,
                        const std::vector<VideoMeta>& recent3, const PreferenceProfile& preference,
                        const std::string& query, const LanguageModel& lm, std::uint64_t seed,
                        const PromptTemplates& templates = PromptTemplates::builtin());

struct Review {
  std::string text;
  std::vector<std::string> warnings;
};

inline constexpr const char* kNoReview = "(no review)";

Review watch_video(const VideoRecord& video, const PreferenceProfile& preference,
                   const LanguageModel& lm, std::uint64_t seed,
                   const PromptTemplates& templates = PromptTemplates::builtin());

struct UpdateInputs {
  std::vector<std::string> reviews;
  VideoMeta selected;
  std::string choose_reason;
  std::optional<VideoMeta> least_wanted;
  std::string reject_reason;
};

struct ParsedBullets {
  std::vector<std::string> likes;
  std::vector<std::string> dislikes;
  std::vector<std::string> removals;
  bool empty() const { return likes.empty() && dislikes.empty() && removals.empty(); }
};

ParsedBullets parse_preference_bullets(const std::string& completion);

// Appends new bullets (skipping exact duplicates), drops bullets listed under
// a removal header, then evicts the oldest entries beyond the cap.
PreferenceProfile merge_preference(const PreferenceProfile& previous, const ParsedBullets& parsed);

struct UpdateResult {
  PreferenceProfile profile;
  std::vector<std::string> warnings;
};

UpdateResult update_preference(const PreferenceProfile& preference, const UpdateInputs& inputs,
                               const LanguageModel& lm, std::uint64_t seed,
                               const PromptTemplates& templates = PromptTemplates::builtin());

struct SessionParams {
  std::size_t l = 8;
  std::size_t m = 10;
};

PreferenceProfile initial_preference(const ProfileSeed& seed);
std::string bootstrap_query(const ProfileSeed& seed);

WatchSession run_session(const ProfileSeed& seed_profile, const Ports& ports,
                         const SessionParams& params, std::uint64_t seed,
                         const std::string& session_id = "",
                         const PromptTemplates& templates = PromptTemplates::builtin());

struct ClipScore {
  int score = 0;
  std::string justification;
};

// `Clip ID: clip_k, Score: s[, Justification: "..."]` lines, keyed by k.
std::map<int, ClipScore> parse_clip_scores(const std::string& completion);

SaliencyAnnotation annotate_saliency(const WatchSession& session, const LanguageModel& lm,
                                     std::uint64_t seed,
                                     const PromptTemplates& templates = PromptTemplates::builtin());

// Runs independent sessions on a worker pool; outputs are in seed order
// regardless of scheduling. `ports_for(i)` supplies the ports of session i.
struct BatchOutcome {
  std::vector<WatchSession> sessions;
  std::vector<std::string> errors;  // one per failed session, in seed order
};

BatchOutcome run_sessions(const std::vector<ProfileSeed>& seeds,
                          const std::function<Ports(std::size_t)>& ports_for,
                          const SessionParams& params, std::uint64_t seed, int jobs = 0,
                          const PromptTemplates& templates = PromptTemplates::builtin());

}  // namespace pvh::sim
