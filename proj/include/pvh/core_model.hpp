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
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace pvh {

inline constexpr std::size_t kPreferenceBulletCap = 12;
inline constexpr double kSegmentTilingSlack = 0.5;
inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 10;

struct VideoMeta {
  std::string video_id;
  std::string title;
  std::string channel;
  std::string description;
  std::uint64_t view_count = 0;
  std::string published;  // ISO-8601 date
  double duration_s = 0.0;
  std::string thumbnail_ref;

  bool operator==(const VideoMeta&) const = default;
};

struct Segment {
  int index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string caption;
  std::string transcript;
  std::string frame_ref;

  bool operator==(const Segment&) const = default;
};

struct VideoRecord {
  VideoMeta meta;
  std::vector<Segment> segments;

  bool operator==(const VideoRecord&) const = default;
};

struct PreferenceProfile {
  std::vector<std::string> likes;
  std::vector<std::string> dislikes;
  int turn = 0;

  bool operator==(const PreferenceProfile&) const = default;
};

enum class Intent { kAmusing, kEmotional, kInformative, kRecentNews };

std::string to_string(Intent intent);
Intent intent_from_string(const std::string& s);  // throws ValidationError

enum class RetrievalMode { kExplore, kNewQuery };

struct RetrievalDecision {
  RetrievalMode mode = RetrievalMode::kExplore;
  std::string query;  // non-empty iff mode == kNewQuery

  static RetrievalDecision explore() { return {}; }
  static RetrievalDecision new_query(std::string q) {
    return {RetrievalMode::kNewQuery, std::move(q)};
  }
  bool operator==(const RetrievalDecision&) const = default;
};

struct TurnRecord {
  RetrievalDecision decision;
  std::vector<VideoMeta> candidates;
  VideoRecord chosen;
  std::optional<VideoMeta> rejected;
  std::string choose_reason;
  std::string reject_reason;
  std::string review;
  PreferenceProfile preference_after;
  std::vector<std::string> warnings;

  bool operator==(const TurnRecord&) const = default;
};

struct WatchSession {
  std::string session_id;
  std::string seed_topic;
  std::string seed_subtopic;
  Intent intent = Intent::kInformative;
  std::vector<TurnRecord> turns;
  PreferenceProfile final_preference;

  const VideoRecord& target() const { return turns.back().chosen; }
  bool operator==(const WatchSession&) const = default;
};

struct SaliencyAnnotation {
  std::string session_id;
  std::string video_id;
  std::vector<int> scores;
  std::vector<std::string> justifications;
  std::vector<std::string> warnings;

  bool operator==(const SaliencyAnnotation&) const = default;
};

// One dataset line. `extra` holds unknown top-level fields so that a
// read/write cycle preserves them.
struct DatasetRecord {
  WatchSession session;
  SaliencyAnnotation annotation;
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const DatasetRecord&) const = default;
};

struct ProfileSeed {
  std::string topic;
  std::string subtopic;
  Intent intent = Intent::kInformative;
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const ProfileSeed&) const = default;
};

// ---- validation -----------------------------------------------------------

void validate(const VideoMeta& meta);
void validate(const VideoRecord& video);
void validate(const PreferenceProfile& profile);
void validate(const TurnRecord& turn);
// `expected_turns` of 0 skips the turn-count check.
void validate(const WatchSession& session, std::size_t expected_turns);
void validate(const SaliencyAnnotation& annotation, const VideoRecord& target);

// ---- JSON mapping ---------------------------------------------------------

nlohmann::json to_json(const VideoMeta& v);
nlohmann::json to_json(const Segment& s);
nlohmann::json to_json(const VideoRecord& v);
nlohmann::json to_json(const PreferenceProfile& p);
nlohmann::json to_json(const TurnRecord& t);
nlohmann::json to_json(const WatchSession& s);
nlohmann::json to_json(const SaliencyAnnotation& a);

VideoMeta video_meta_from_json(const nlohmann::json& j, const std::string& path = "meta");
VideoRecord video_record_from_json(const nlohmann::json& j, const std::string& path = "video");
PreferenceProfile preference_from_json(const nlohmann::json& j, const std::string& path = "preference");
TurnRecord turn_from_json(const nlohmann::json& j, const std::string& path = "turn");
WatchSession session_from_json(const nlohmann::json& j, const std::string& path = "session");
SaliencyAnnotation annotation_from_json(const nlohmann::json& j, const std::string& path = "annotation");

// ---- dataset lines --------------------------------------------------------

// Writes one `{"session":…, "annotation":…}` line. The session must hold
// `expected_turns` turns (default m = 10) and the annotation must match the
// target video.
void write_session(const WatchSession& session, const SaliencyAnnotation& annotation,
                   std::ostream& sink, std::size_t expected_turns = 10);
void write_record(const DatasetRecord& record, std::ostream& sink,
                  std::size_t expected_turns = 10);

std::pair<WatchSession, SaliencyAnnotation> read_session(std::istream& source);
DatasetRecord parse_record(const std::string& line);

// Session-only lines, as produced by `simulate` before annotation.
void write_watch_session(const WatchSession& session, std::ostream& sink);
WatchSession parse_watch_session(const std::string& line);

std::vector<DatasetRecord> load_dataset(const std::string& path);
void save_dataset(const std::vector<DatasetRecord>& records, const std::string& path,
                  std::size_t expected_turns = 10);
std::vector<WatchSession> load_sessions(const std::string& path);
void save_sessions(const std::vector<WatchSession>& sessions, const std::string& path);

std::vector<ProfileSeed> load_profile_seeds(const std::string& path);
void save_profile_seeds(const std::vector<ProfileSeed>& seeds, const std::string& path);

// ---- split ----------------------------------------------------------------

struct SplitResult {
  std::vector<DatasetRecord> train;
  std::vector<DatasetRecord> test;
  std::vector<std::string> warnings;
};

// Stratified by seed_topic. Per-stratum train counts are apportioned by
// largest remainder so the total equals round(N * train_fraction) over the
// stratifiable records and each stratum is within one record of its share.
SplitResult split_dataset(const std::vector<DatasetRecord>& records,
                          double train_fraction, std::uint64_t seed);

}  // namespace pvh
