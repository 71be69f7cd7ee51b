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

#include "pvh/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "pvh/errors.hpp"
#include "pvh/rng.hpp"

namespace pvh {

using nlohmann::json;

namespace {

constexpr double kBoundaryEps = 1e-6;

const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(path + "." + key, "missing field");
  return *it;
}

std::string get_string(const json& j, const std::string& key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_string()) throw ParseError(path + "." + key, "expected a string");
  return v.get<std::string>();
}

double get_number(const json& j, const std::string& key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_number()) throw ParseError(path + "." + key, "expected a number");
  return v.get<double>();
}

std::int64_t get_int(const json& j, const std::string& key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_number_integer()) throw ParseError(path + "." + key, "expected an integer");
  return v.get<std::int64_t>();
}

std::vector<std::string> get_strings(const json& j, const std::string& key,
                                     const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_array()) throw ParseError(path + "." + key, "expected an array");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string())
      throw ParseError(path + "." + key + "[" + std::to_string(i) + "]", "expected a string");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

const json& get_array(const json& j, const std::string& key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_array()) throw ParseError(path + "." + key, "expected an array");
  return v;
}

std::vector<std::string> optional_strings(const json& j, const std::string& key,
                                          const std::string& path) {
  if (!j.contains(key)) return {};
  return get_strings(j, key, path);
}

std::string idx(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

}  // namespace

std::string to_string(Intent intent) {
  switch (intent) {
    case Intent::kAmusing: return "amusing";
    case Intent::kEmotional: return "emotional";
    case Intent::kInformative: return "informative";
    case Intent::kRecentNews: return "recent_news";
  }
  return "informative";
}

Intent intent_from_string(const std::string& s) {
  if (s == "amusing") return Intent::kAmusing;
  if (s == "emotional") return Intent::kEmotional;
  if (s == "informative") return Intent::kInformative;
  if (s == "recent_news" || s == "recent news") return Intent::kRecentNews;
  throw ValidationError("unknown intent '" + s + "'");
}

// ---- validation -----------------------------------------------------------

void validate(const VideoMeta& meta) {
  if (meta.video_id.empty()) throw ValidationError("video_id must be non-empty");
  if (!(meta.duration_s > 0.0) || !std::isfinite(meta.duration_s))
    throw ValidationError("video " + meta.video_id + ": duration_s must be > 0");
}

void validate(const VideoRecord& video) {
  validate(video.meta);
  const auto& segs = video.segments;
  const std::string& id = video.meta.video_id;
  if (segs.empty()) throw ValidationError("video " + id + ": no segments");
  for (std::size_t k = 0; k < segs.size(); ++k) {
    const Segment& s = segs[k];
    if (s.index != static_cast<int>(k))
      throw ValidationError("video " + id + ": segment " + std::to_string(k) +
                            " has index " + std::to_string(s.index));
    if (!(s.start_s < s.end_s))
      throw ValidationError("video " + id + ": segment " + std::to_string(k) +
                            " has start_s >= end_s");
    if (k == 0 && std::abs(s.start_s) > kBoundaryEps)
      throw ValidationError("video " + id + ": first segment must start at 0");
    if (k > 0 && std::abs(s.start_s - segs[k - 1].end_s) > kBoundaryEps)
      throw ValidationError("video " + id + ": segments " + std::to_string(k - 1) + " and " +
                            std::to_string(k) + " are not contiguous");
  }
  if (std::abs(segs.back().end_s - video.meta.duration_s) > kSegmentTilingSlack)
    throw ValidationError("video " + id + ": segments do not tile [0, duration_s]");
}

void validate(const PreferenceProfile& profile) {
  if (profile.turn < 0) throw ValidationError("preference turn must be >= 0");
  if (profile.likes.size() > kPreferenceBulletCap ||
      profile.dislikes.size() > kPreferenceBulletCap)
    throw ValidationError("preference bullet list exceeds cap of " +
                          std::to_string(kPreferenceBulletCap));
}

void validate(const TurnRecord& turn) {
  if (turn.decision.mode == RetrievalMode::kNewQuery && turn.decision.query.empty())
    throw ValidationError("NewQuery decision with empty query");
  validate(turn.chosen);
  const bool member = std::any_of(
      turn.candidates.begin(), turn.candidates.end(),
      [&](const VideoMeta& c) { return c.video_id == turn.chosen.meta.video_id; });
  if (!member)
    throw ValidationError("chosen video " + turn.chosen.meta.video_id +
                          " is not among the candidates");
  validate(turn.preference_after);
}

void validate(const WatchSession& session, std::size_t expected_turns) {
  if (session.session_id.empty()) throw ValidationError("session_id must be non-empty");
  if (expected_turns != 0 && session.turns.size() != expected_turns)
    throw ValidationError("session " + session.session_id + " has " +
                          std::to_string(session.turns.size()) + " turns, expected " +
                          std::to_string(expected_turns));
  if (session.turns.empty()) throw ValidationError("session has no turns");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < session.turns.size(); ++i) {
    const TurnRecord& t = session.turns[i];
    validate(t);
    if (t.preference_after.turn != static_cast<int>(i + 1))
      throw ValidationError("turn " + std::to_string(i + 1) + " has preference turn " +
                            std::to_string(t.preference_after.turn));
    if (!seen.insert(t.chosen.meta.video_id).second)
      throw ValidationError("video " + t.chosen.meta.video_id + " watched twice");
  }
  validate(session.final_preference);
  if (session.final_preference.turn != static_cast<int>(session.turns.size()))
    throw ValidationError("final_preference.turn does not match turn count");
}

void validate(const SaliencyAnnotation& annotation, const VideoRecord& target) {
  if (annotation.video_id != target.meta.video_id)
    throw ValidationError("annotation video_id " + annotation.video_id +
                          " does not match target " + target.meta.video_id);
  if (annotation.scores.size() != target.segments.size())
    throw ValidationError("annotation has " + std::to_string(annotation.scores.size()) +
                          " scores for " + std::to_string(target.segments.size()) +
                          " segments");
  if (annotation.justifications.size() != annotation.scores.size())
    throw ValidationError("annotation justifications length mismatch");
  for (std::size_t k = 0; k < annotation.scores.size(); ++k) {
    const int s = annotation.scores[k];
    if (s < kMinScore || s > kMaxScore)
      throw ValidationError("score " + std::to_string(s) + " at clip_" + std::to_string(k) +
                            " outside [1,10]");
  }
}

// ---- JSON mapping ---------------------------------------------------------

json to_json(const VideoMeta& v) {
  return {{"video_id", v.video_id},       {"title", v.title},
          {"channel", v.channel},         {"description", v.description},
          {"view_count", v.view_count},   {"published", v.published},
          {"duration_s", v.duration_s},   {"thumbnail_ref", v.thumbnail_ref}};
}

json to_json(const Segment& s) {
  return {{"index", s.index},         {"start_s", s.start_s},
          {"end_s", s.end_s},         {"caption", s.caption},
          {"transcript", s.transcript}, {"frame_ref", s.frame_ref}};
}

json to_json(const VideoRecord& v) {
  json segs = json::array();
  for (const auto& s : v.segments) segs.push_back(to_json(s));
  return {{"meta", to_json(v.meta)}, {"segments", segs}};
}

json to_json(const PreferenceProfile& p) {
  return {{"likes", p.likes}, {"dislikes", p.dislikes}, {"turn", p.turn}};
}

json to_json(const TurnRecord& t) {
  json decision = {{"mode", t.decision.mode == RetrievalMode::kExplore ? "explore" : "new_query"}};
  if (t.decision.mode == RetrievalMode::kNewQuery) decision["query"] = t.decision.query;
  json cands = json::array();
  for (const auto& c : t.candidates) cands.push_back(to_json(c));
  return {{"decision", decision},
          {"candidates", cands},
          {"chosen", to_json(t.chosen)},
          {"rejected", t.rejected ? to_json(*t.rejected) : json(nullptr)},
          {"choose_reason", t.choose_reason},
          {"reject_reason", t.reject_reason},
          {"review", t.review},
          {"preference_after", to_json(t.preference_after)},
          {"warnings", t.warnings}};
}

json to_json(const WatchSession& s) {
  json turns = json::array();
  for (const auto& t : s.turns) turns.push_back(to_json(t));
  return {{"session_id", s.session_id},
          {"seed_topic", s.seed_topic},
          {"seed_subtopic", s.seed_subtopic},
          {"intent", to_string(s.intent)},
          {"turns", turns},
          {"final_preference", to_json(s.final_preference)}};
}

json to_json(const SaliencyAnnotation& a) {
  return {{"session_id", a.session_id},
          {"video_id", a.video_id},
          {"scores", a.scores},
          {"justifications", a.justifications},
          {"warnings", a.warnings}};
}

VideoMeta video_meta_from_json(const json& j, const std::string& path) {
  VideoMeta v;
  v.video_id = get_string(j, "video_id", path);
  v.title = get_string(j, "title", path);
  v.channel = get_string(j, "channel", path);
  v.description = get_string(j, "description", path);
  const std::int64_t views = get_int(j, "view_count", path);
  if (views < 0) throw ParseError(path + ".view_count", "must be non-negative");
  v.view_count = static_cast<std::uint64_t>(views);
  v.published = get_string(j, "published", path);
  v.duration_s = get_number(j, "duration_s", path);
  v.thumbnail_ref = get_string(j, "thumbnail_ref", path);
  return v;
}

VideoRecord video_record_from_json(const json& j, const std::string& path) {
  VideoRecord v;
  v.meta = video_meta_from_json(field(j, "meta", path), path + ".meta");
  const json& segs = get_array(j, "segments", path);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string p = idx(path + ".segments", i);
    Segment s;
    s.index = static_cast<int>(get_int(segs[i], "index", p));
    s.start_s = get_number(segs[i], "start_s", p);
    s.end_s = get_number(segs[i], "end_s", p);
    s.caption = get_string(segs[i], "caption", p);
    s.transcript = get_string(segs[i], "transcript", p);
    s.frame_ref = get_string(segs[i], "frame_ref", p);
    v.segments.push_back(std::move(s));
  }
  return v;
}

PreferenceProfile preference_from_json(const json& j, const std::string& path) {
  PreferenceProfile p;
  p.likes = get_strings(j, "likes", path);
  p.dislikes = get_strings(j, "dislikes", path);
  p.turn = static_cast<int>(get_int(j, "turn", path));
  return p;
}

TurnRecord turn_from_json(const json& j, const std::string& path) {
  TurnRecord t;
  const json& d = field(j, "decision", path);
  const std::string mode = get_string(d, "mode", path + ".decision");
  if (mode == "explore") {
    t.decision = RetrievalDecision::explore();
  } else if (mode == "new_query") {
    t.decision = RetrievalDecision::new_query(get_string(d, "query", path + ".decision"));
  } else {
    throw ParseError(path + ".decision.mode", "unknown mode '" + mode + "'");
  }
  const json& cands = get_array(j, "candidates", path);
  for (std::size_t i = 0; i < cands.size(); ++i)
    t.candidates.push_back(video_meta_from_json(cands[i], idx(path + ".candidates", i)));
  t.chosen = video_record_from_json(field(j, "chosen", path), path + ".chosen");
  const json& rej = field(j, "rejected", path);
  if (!rej.is_null()) t.rejected = video_meta_from_json(rej, path + ".rejected");
  t.choose_reason = get_string(j, "choose_reason", path);
  t.reject_reason = get_string(j, "reject_reason", path);
  t.review = get_string(j, "review", path);
  t.preference_after = preference_from_json(field(j, "preference_after", path),
                                            path + ".preference_after");
  t.warnings = optional_strings(j, "warnings", path);
  return t;
}

WatchSession session_from_json(const json& j, const std::string& path) {
  WatchSession s;
  s.session_id = get_string(j, "session_id", path);
  s.seed_topic = get_string(j, "seed_topic", path);
  s.seed_subtopic = get_string(j, "seed_subtopic", path);
  const std::string intent = get_string(j, "intent", path);
  try {
    s.intent = intent_from_string(intent);
  } catch (const ValidationError& e) {
    throw ParseError(path + ".intent", e.what());
  }
  const json& turns = get_array(j, "turns", path);
  for (std::size_t i = 0; i < turns.size(); ++i)
    s.turns.push_back(turn_from_json(turns[i], idx(path + ".turns", i)));
  s.final_preference = preference_from_json(field(j, "final_preference", path),
                                            path + ".final_preference");
  return s;
}

SaliencyAnnotation annotation_from_json(const json& j, const std::string& path) {
  SaliencyAnnotation a;
  a.session_id = get_string(j, "session_id", path);
  a.video_id = get_string(j, "video_id", path);
  const json& scores = get_array(j, "scores", path);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!scores[i].is_number_integer())
      throw ParseError(idx(path + ".scores", i), "expected an integer");
    a.scores.push_back(scores[i].get<int>());
  }
  a.justifications = get_strings(j, "justifications", path);
  a.warnings = optional_strings(j, "warnings", path);
  return a;
}

// ---- dataset lines --------------------------------------------------------

namespace {

json parse_line(const std::string& line) {
  if (line.find_first_not_of(" \t\r\n") == std::string::npos)
    throw ParseError("<line>", "empty line");
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError("<line>", e.what());
  }
}

}  // namespace

void write_record(const DatasetRecord& record, std::ostream& sink, std::size_t expected_turns) {
  validate(record.session, expected_turns);
  validate(record.annotation, record.session.target());
  json j = record.extra.is_object() ? record.extra : json::object();
  j["session"] = to_json(record.session);
  j["annotation"] = to_json(record.annotation);
  sink << j.dump() << '\n';
}

void write_session(const WatchSession& session, const SaliencyAnnotation& annotation,
                   std::ostream& sink, std::size_t expected_turns) {
  write_record({session, annotation, json::object()}, sink, expected_turns);
}

DatasetRecord parse_record(const std::string& line) {
  json j = parse_line(line);
  DatasetRecord r;
  r.session = session_from_json(field(j, "session", "record"), "session");
  r.annotation = annotation_from_json(field(j, "annotation", "record"), "annotation");
  j.erase("session");
  j.erase("annotation");
  r.extra = std::move(j);
  return r;
}

std::pair<WatchSession, SaliencyAnnotation> read_session(std::istream& source) {
  std::string line;
  if (!std::getline(source, line)) throw ParseError("<line>", "end of stream");
  DatasetRecord r = parse_record(line);
  return {std::move(r.session), std::move(r.annotation)};
}

void write_watch_session(const WatchSession& session, std::ostream& sink) {
  validate(session, 0);
  sink << to_json(session).dump() << '\n';
}

WatchSession parse_watch_session(const std::string& line) {
  return session_from_json(parse_line(line), "session");
}

namespace {

template <typename F>
void for_each_line(const std::string& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      f(line);
    } catch (const ParseError& e) {
      throw ParseError(e.field(), path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

std::vector<DatasetRecord> load_dataset(const std::string& path) {
  std::vector<DatasetRecord> out;
  for_each_line(path, [&](const std::string& l) { out.push_back(parse_record(l)); });
  return out;
}

void save_dataset(const std::vector<DatasetRecord>& records, const std::string& path,
                  std::size_t expected_turns) {
  auto out = open_out(path);
  for (const auto& r : records) write_record(r, out, expected_turns);
}

std::vector<WatchSession> load_sessions(const std::string& path) {
  std::vector<WatchSession> out;
  for_each_line(path, [&](const std::string& l) { out.push_back(parse_watch_session(l)); });
  return out;
}

void save_sessions(const std::vector<WatchSession>& sessions, const std::string& path) {
  auto out = open_out(path);
  for (const auto& s : sessions) write_watch_session(s, out);
}

std::vector<ProfileSeed> load_profile_seeds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("seeds", e.what());
  }
  if (!j.is_array()) throw ParseError("seeds", "expected an array of seed objects");
  std::vector<ProfileSeed> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = idx("seeds", i);
    ProfileSeed s;
    s.topic = get_string(j[i], "topic", p);
    s.subtopic = get_string(j[i], "subtopic", p);
    try {
      s.intent = intent_from_string(get_string(j[i], "intent", p));
    } catch (const ValidationError& e) {
      throw ParseError(p + ".intent", e.what());
    }
    json extra = j[i];
    extra.erase("topic");
    extra.erase("subtopic");
    extra.erase("intent");
    s.extra = std::move(extra);
    out.push_back(std::move(s));
  }
  return out;
}

void save_profile_seeds(const std::vector<ProfileSeed>& seeds, const std::string& path) {
  json j = json::array();
  for (const auto& s : seeds) {
    json o = s.extra.is_object() ? s.extra : json::object();
    o["topic"] = s.topic;
    o["subtopic"] = s.subtopic;
    o["intent"] = to_string(s.intent);
    j.push_back(std::move(o));
  }
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

// ---- split ----------------------------------------------------------------

SplitResult split_dataset(const std::vector<DatasetRecord>& records, double train_fraction,
                          std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationError("train_fraction must lie in (0, 1), got " +
                          std::to_string(train_fraction));

  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < records.size(); ++i)
    strata[records[i].session.seed_topic].push_back(i);

  SplitResult result;
  std::vector<char> to_train(records.size(), 0);

  struct Share {
    std::string topic;
    std::size_t base;
    double remainder;
  };
  std::vector<Share> shares;
  std::size_t stratifiable = 0;
  std::size_t assigned = 0;
  for (const auto& [topic, members] : strata) {
    if (members.size() < 2) {
      result.warnings.push_back("topic '" + topic + "' has " +
                                std::to_string(members.size()) +
                                " record(s); cannot stratify, assigned to train");
      for (auto i : members) to_train[i] = 1;
      continue;
    }
    const double exact = train_fraction * static_cast<double>(members.size());
    const auto base = static_cast<std::size_t>(std::floor(exact));
    shares.push_back({topic, base, exact - static_cast<double>(base)});
    stratifiable += members.size();
    assigned += base;
  }

  const auto target = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(stratifiable)));
  std::vector<std::size_t> order(shares.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return shares[a].remainder > shares[b].remainder;
  });
  for (std::size_t k = 0; k < order.size() && assigned < target; ++k, ++assigned)
    shares[order[k]].base += 1;

  for (const auto& share : shares) {
    std::vector<std::size_t> members = strata[share.topic];
    Rng rng(derive_seed(seed, "split/" + share.topic));
    shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < share.base; ++k) to_train[members[k]] = 1;
  }

  for (std::size_t i = 0; i < records.size(); ++i)
    (to_train[i] ? result.train : result.test).push_back(records[i]);
  return result;
}

}  // namespace pvh
