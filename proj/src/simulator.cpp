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

#include "pvh/simulator.hpp"

#include <omp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "pvh/errors.hpp"
#include "pvh/rng.hpp"
#include "pvh/text.hpp"

namespace pvh::sim {

namespace {
#include "prompts_builtin.inc"

std::string seed_tag(std::uint64_t seed, std::string_view stage) {
  return std::to_string(derive_seed(seed, stage));
}

std::uint64_t stage_seed(std::uint64_t seed, int turn, std::string_view stage) {
  return derive_seed(seed, "turn/" + std::to_string(turn) + "/" + std::string(stage));
}

std::string strip_brackets(std::string s) {
  s = text::trim(s);
  while (!s.empty() && (s.front() == '[' || s.front() == '"' || s.front() == '\'' ||
                        s.front() == '*'))
    s.erase(s.begin());
  while (!s.empty() &&
         (s.back() == ']' || s.back() == '"' || s.back() == '\'' || s.back() == '*'))
    s.pop_back();
  return text::trim(s);
}

}  // namespace

// ---- scripted LM ----------------------------------------------------------------

ScriptedLanguageModel::ScriptedLanguageModel(std::vector<std::string> responses)
    : responses_(std::move(responses)) {
  if (responses_.empty()) responses_.emplace_back();
}

std::string ScriptedLanguageModel::complete(const std::string& prompt, std::uint64_t seed) const {
  std::lock_guard<std::mutex> lock(mu_);
  prompts_.push_back(prompt);
  seeds_.push_back(seed);
  const std::size_t i = std::min(next_, responses_.size() - 1);
  ++next_;
  return responses_[i];
}

std::vector<std::string> ScriptedLanguageModel::prompts() const {
  std::lock_guard<std::mutex> lock(mu_);
  return prompts_;
}

std::vector<std::uint64_t> ScriptedLanguageModel::seeds() const {
  std::lock_guard<std::mutex> lock(mu_);
  return seeds_;
}

// ---- prompts ------------------------------------------------------------------

const PromptTemplates& PromptTemplates::builtin() {
  static const PromptTemplates t{kRetrievalTemplate, kSelectionTemplate, kWatchTemplate,
                                 kUpdateTemplate, kScoringTemplate};
  return t;
}

PromptTemplates PromptTemplates::load(const std::string& directory) {
  auto read = [&](const char* name) {
    const auto path = std::filesystem::path(directory) / name;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open prompt template " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  return {read("retrieval.txt"), read("selection.txt"), read("watch.txt"), read("update.txt"),
          read("scoring.txt")};
}

std::vector<std::string> placeholders(const std::string& tmpl) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = tmpl.find('{', pos)) != std::string::npos) {
    const auto close = tmpl.find('}', pos);
    if (close == std::string::npos) break;
    out.push_back(tmpl.substr(pos + 1, close - pos - 1));
    pos = close + 1;
  }
  return out;
}

std::string render(const std::string& tmpl, const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(tmpl.size() * 2);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos);
      break;
    }
    const auto close = tmpl.find('}', open);
    if (close == std::string::npos)
      throw ValidationError("unterminated placeholder in template");
    out.append(tmpl, pos, open - pos);
    const std::string name = tmpl.substr(open + 1, close - open - 1);
    auto it = slots.find(name);
    if (it == slots.end()) throw ValidationError("no value for placeholder {" + name + "}");
    out += it->second;
    pos = close + 1;
  }
  return out;
}

std::string intent_phrase(Intent intent) {
  return intent == Intent::kRecentNews ? "recent news" : to_string(intent);
}

std::string render_meta(const VideoMeta& m) {
  std::ostringstream os;
  os << "Title: " << m.title << " | Channel: " << m.channel << " | Views: " << m.view_count
     << " | Published: " << m.published << " | Duration: " << m.duration_s << "s"
     << " | Thumbnail: " << m.thumbnail_ref << " | ID: " << m.video_id << "\n"
     << "   Description: " << m.description;
  return os.str();
}

std::string render_meta_list(const std::vector<VideoMeta>& metas) {
  if (metas.empty()) return "(none)";
  std::ostringstream os;
  for (std::size_t i = 0; i < metas.size(); ++i) {
    if (i) os << '\n';
    os << i + 1 << ". " << render_meta(metas[i]);
  }
  return os.str();
}

std::string render_preference(const PreferenceProfile& p) {
  std::ostringstream os;
  os << "Likes:";
  if (p.likes.empty()) os << "\n- (none)";
  for (const auto& b : p.likes) os << "\n- " << b;
  os << "\nDislikes:";
  if (p.dislikes.empty()) os << "\n- (none)";
  for (const auto& b : p.dislikes) os << "\n- " << b;
  return os.str();
}

std::string render_video(const VideoRecord& v) {
  std::ostringstream os;
  for (std::size_t k = 0; k < v.segments.size(); ++k) {
    if (k) os << '\n';
    os << k + 1 << ". (\"" << v.segments[k].caption << "\", \"" << v.segments[k].transcript
       << "\")";
  }
  return os.str();
}

std::string render_clips(const VideoRecord& v) {
  std::ostringstream os;
  for (std::size_t k = 0; k < v.segments.size(); ++k) {
    const Segment& s = v.segments[k];
    if (k) os << '\n';
    os << "- Clip ID: clip_" << k << " [" << s.start_s << "s - " << s.end_s << "s]\n"
       << "  Frame description: " << s.caption << "\n"
       << "  Transcript: " << s.transcript;
  }
  return os.str();
}

// ---- retrieval decision -----------------------------------------------------------

std::optional<RetrievalDecision> parse_decision(const std::string& completion) {
  std::string decision_text;
  std::string query_text;
  bool have_decision = false;
  for (const auto& raw : text::split_lines(completion)) {
    const std::string line = text::trim(raw);
    if (text::starts_with_icase(line, "Decision:")) {
      decision_text = strip_brackets(line.substr(9));
      have_decision = true;
    } else if (text::starts_with_icase(line, "New query:")) {
      query_text = strip_brackets(line.substr(10));
    }
  }
  if (!have_decision) return std::nullopt;
  if (text::contains_icase(decision_text, "search") ||
      text::contains_icase(decision_text, "new query")) {
    if (query_text.empty() || text::contains_icase(query_text, "new query suggestion"))
      return std::nullopt;
    return RetrievalDecision::new_query(query_text);
  }
  if (text::contains_icase(decision_text, "explore")) return RetrievalDecision::explore();
  return std::nullopt;
}

DecisionResult decide_retrieval(const std::vector<VideoMeta>& history,
                                const PreferenceProfile& preference,
                                const std::vector<VideoMeta>& related_preview,
                                const LanguageModel& lm, std::uint64_t seed,
                                const DecisionContext& context,
                                const PromptTemplates& templates) {
  if (preference.turn < 0) throw ValidationError("preference is not initialized");
  const std::string prompt = render(templates.retrieval,
                                    {{"intent", intent_phrase(context.intent)},
                                     {"search query", context.current_query},
                                     {"watch history", render_meta_list(history)},
                                     {"preference", render_preference(preference)},
                                     {"related videos", render_meta_list(related_preview)}});
  DecisionResult result;
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (auto d = parse_decision(lm.complete(prompt, seed + static_cast<std::uint64_t>(attempt)))) {
      result.decision = *d;
      return result;
    }
  }
  result.decision = RetrievalDecision::explore();
  result.warnings.push_back("retrieval decision unparseable after retry; defaulted to Explore");
  return result;
}

// ---- candidates ---------------------------------------------------------------

CandidateResult retrieve_candidates(const RetrievalDecision& decision,
                                    const std::optional<VideoMeta>& last_video,
                                    const VideoCatalog& catalog, std::size_t l,
                                    const std::vector<std::string>& watched_ids,
                                    const std::string& fallback_query) {
  const std::set<std::string> watched(watched_ids.begin(), watched_ids.end());
  auto dedup = [&](std::vector<VideoMeta> metas) {
    std::vector<VideoMeta> out;
    std::set<std::string> seen;
    for (auto& m : metas)
      if (!watched.count(m.video_id) && seen.insert(m.video_id).second) out.push_back(std::move(m));
    if (out.size() > l) out.resize(l);
    return out;
  };

  CandidateResult result;
  if (decision.mode == RetrievalMode::kExplore) {
    if (!last_video) throw ValidationError("Explore requires a previously watched video");
    result.candidates = dedup(catalog.related(last_video->video_id, l));
  } else {
    if (decision.query.empty()) throw ValidationError("NewQuery with empty query");
    result.candidates = dedup(catalog.search(decision.query, l));
  }
  if (!result.candidates.empty()) return result;

  result.warnings.push_back("no candidates after dedup; fell back to query '" + fallback_query +
                            "'");
  result.fallback = RetrievalDecision::new_query(fallback_query);
  // widen the search so already-watched hits do not starve the fallback
  result.candidates = dedup(catalog.search(fallback_query, l + watched.size()));
  if (result.candidates.empty())
    throw RetrievalError("no candidates for the decision or the fallback query '" +
                         fallback_query + "'");
  return result;
}

// ---- selection ------------------------------------------------------------------

namespace {

struct ParsedSelection {
  std::string most;   // "None" or a number, as written
  std::string least;  // empty when absent
  std::string most_reason;
  std::string least_reason;
};

std::optional<ParsedSelection> parse_selection(const std::string& completion) {
  ParsedSelection p;
  bool have_most = false;
  int section = 0;  // 1: most, 2: least
  for (const auto& raw : text::split_lines(completion)) {
    std::string line = text::trim(raw);
    while (!line.empty() && (line.front() == '*' || line.front() == '-')) line.erase(line.begin());
    line = text::trim(line);
    if (text::starts_with_icase(line, "Most Wanted:")) {
      p.most = strip_brackets(line.substr(12));
      have_most = true;
      section = 1;
    } else if (text::starts_with_icase(line, "Least Wanted:")) {
      p.least = strip_brackets(line.substr(13));
      section = 2;
    } else if (text::starts_with_icase(line, "Explanation:")) {
      const std::string reason = strip_brackets(line.substr(12));
      if (section == 1) p.most_reason = reason;
      if (section == 2) p.least_reason = reason;
    }
  }
  if (!have_most) return std::nullopt;
  return p;
}

std::optional<long> parse_index(const std::string& s) {
  static const std::regex number(R"(^\s*(?:video\s*)?#?\s*(-?\d+))", std::regex::icase);
  std::smatch m;
  if (!std::regex_search(s, m, number)) return std::nullopt;
  try {
    return std::stol(m[1].str());
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

Selection select_videos(const std::vector<VideoMeta>& candidates,
                        const std::vector<VideoMeta>& recent3, const PreferenceProfile& preference,
                        const std::string& query, const LanguageModel& lm, std::uint64_t seed,
                        const PromptTemplates& templates) {
  if (candidates.empty()) throw ValidationError("select_videos needs candidates");
  std::vector<VideoMeta> recent = recent3;
  if (recent.size() > 3) recent.erase(recent.begin(), recent.end() - 3);
  const std::string prompt = render(templates.selection,
                                    {{"history", render_meta_list(recent)},
                                     {"preference", render_preference(preference)},
                                     {"query", query},
                                     {"candidate", render_meta_list(candidates)}});
  std::optional<ParsedSelection> parsed;
  for (int attempt = 0; attempt < 2 && !parsed; ++attempt)
    parsed = parse_selection(lm.complete(prompt, seed + static_cast<std::uint64_t>(attempt)));
  if (!parsed) throw MostWantedUnavailable("selection completion unparseable after retry");

  Selection sel;
  if (text::contains_icase(parsed->most, "none"))
    throw MostWantedUnavailable("most wanted video is [None]");
  const auto most = parse_index(parsed->most);
  if (!most || *most < 1 || static_cast<std::size_t>(*most) > candidates.size())
    throw MostWantedUnavailable("most wanted index '" + parsed->most + "' out of range 1.." +
                                std::to_string(candidates.size()));
  sel.most = static_cast<std::size_t>(*most - 1);
  sel.choose_reason = parsed->most_reason;

  if (parsed->least.empty() || text::contains_icase(parsed->least, "none")) {
    sel.warnings.push_back("least wanted is None; reject_reason left empty");
  } else {
    const auto least = parse_index(parsed->least);
    if (!least || *least < 1 || static_cast<std::size_t>(*least) > candidates.size() ||
        static_cast<std::size_t>(*least - 1) == sel.most) {
      sel.warnings.push_back("least wanted index '" + parsed->least + "' ignored");
    } else {
      sel.least = static_cast<std::size_t>(*least - 1);
      sel.reject_reason = parsed->least_reason;
    }
  }
  return sel;
}

// ---- watching -------------------------------------------------------------------

Review watch_video(const VideoRecord& video, const PreferenceProfile& preference,
                   const LanguageModel& lm, std::uint64_t seed, const PromptTemplates& templates) {
  const bool has_text = std::any_of(video.segments.begin(), video.segments.end(), [](const Segment& s) {
    return !s.caption.empty() || !s.transcript.empty();
  });
  if (!has_text)
    throw ValidationError("video " + video.meta.video_id + " has no caption or transcript text");
  const std::string prompt = render(
      templates.watch, {{"preference", render_preference(preference)}, {"video", render_video(video)}});
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string out = lm.complete(prompt, seed + static_cast<std::uint64_t>(attempt));
    if (!text::trim(out).empty()) return {std::move(out), {}};
  }
  return {kNoReview, {"empty review after retry; recorded placeholder"}};
}

// ---- preference update ------------------------------------------------------------

ParsedBullets parse_preference_bullets(const std::string& completion) {
  enum class Section { kLikes, kDislikes, kRemoval };
  static const std::regex bullet(R"(^\s*(?:[-*•]|\d+[.)])\s+(.*)$)");
  ParsedBullets out;
  Section section = Section::kLikes;
  for (const auto& raw : text::split_lines(completion)) {
    std::string line = raw;
    // drop markdown bold markers; a single '*' may be a bullet
    for (auto pos = line.find("**"); pos != std::string::npos; pos = line.find("**", pos))
      line.erase(pos, 2);
    std::smatch m;
    const bool is_bullet = std::regex_match(line, m, bullet);
    std::string body = is_bullet ? text::trim(m[1].str()) : text::trim(line);
    if (body.empty()) continue;
    // headers: a short line ending in ':' or a bullet that is only a header
    const bool header = body.back() == ':' && body.size() < 60;
    if (header) {
      const std::string h = text::to_lower(body);
      if (h.find("remov") != std::string::npos) {
        section = Section::kRemoval;
      } else if (h.find("dislike") != std::string::npos || h.find("dis-pref") != std::string::npos ||
                 h.find("dispref") != std::string::npos) {
        section = Section::kDislikes;
      } else if (h.find("like") != std::string::npos || h.find("preference") != std::string::npos ||
                 h.find("addition") != std::string::npos || h.find("refine") != std::string::npos) {
        section = Section::kLikes;
      }
      continue;
    }
    if (!is_bullet) continue;
    if (body == "(none)") continue;
    switch (section) {
      case Section::kLikes: out.likes.push_back(body); break;
      case Section::kDislikes: out.dislikes.push_back(body); break;
      case Section::kRemoval: out.removals.push_back(body); break;
    }
  }
  return out;
}

PreferenceProfile merge_preference(const PreferenceProfile& previous, const ParsedBullets& parsed) {
  PreferenceProfile next = previous;
  next.turn = previous.turn + 1;
  auto merge = [&](std::vector<std::string>& list, const std::vector<std::string>& add) {
    for (const auto& b : add)
      if (std::find(list.begin(), list.end(), b) == list.end()) list.push_back(b);
    std::erase_if(list, [&](const std::string& b) {
      return std::find(parsed.removals.begin(), parsed.removals.end(), b) != parsed.removals.end();
    });
    if (list.size() > kPreferenceBulletCap)
      list.erase(list.begin(), list.end() - static_cast<std::ptrdiff_t>(kPreferenceBulletCap));
  };
  merge(next.likes, parsed.likes);
  merge(next.dislikes, parsed.dislikes);
  return next;
}

UpdateResult update_preference(const PreferenceProfile& preference, const UpdateInputs& in,
                               const LanguageModel& lm, std::uint64_t seed,
                               const PromptTemplates& templates) {
  std::ostringstream reviews;
  for (std::size_t i = 0; i < in.reviews.size(); ++i) {
    if (i) reviews << '\n';
    reviews << i + 1 << ". " << in.reviews[i];
  }
  const std::string prompt = render(
      templates.update,
      {{"preference", render_preference(preference)},
       {"reviews", in.reviews.empty() ? "(none)" : reviews.str()},
       {"selected video", render_meta(in.selected)},
       {"selected reason", in.choose_reason.empty() ? "(none)" : in.choose_reason},
       {"least wanted video", in.least_wanted ? render_meta(*in.least_wanted) : "(none)"},
       {"least wanted reason", in.reject_reason.empty() ? "(none)" : in.reject_reason}});
  for (int attempt = 0; attempt < 2; ++attempt) {
    const ParsedBullets parsed =
        parse_preference_bullets(lm.complete(prompt, seed + static_cast<std::uint64_t>(attempt)));
    if (!parsed.empty()) return {merge_preference(preference, parsed), {}};
  }
  PreferenceProfile carried = preference;
  carried.turn = preference.turn + 1;
  return {carried, {"preference update had no parseable bullets; profile carried forward"}};
}

// ---- session ------------------------------------------------------------------------

PreferenceProfile initial_preference(const ProfileSeed& seed) {
  PreferenceProfile p;
  p.likes.push_back(intent_phrase(seed.intent) + " videos about " + seed.subtopic + " (" +
                    seed.topic + ")");
  p.turn = 0;
  return p;
}

std::string bootstrap_query(const ProfileSeed& seed) {
  return intent_phrase(seed.intent) + " " + seed.topic + " " + seed.subtopic;
}

WatchSession run_session(const ProfileSeed& seed_profile, const Ports& ports,
                         const SessionParams& params, std::uint64_t seed,
                         const std::string& session_id, const PromptTemplates& templates) {
  if (!ports.lm || !ports.catalog) throw ValidationError("run_session needs both ports");
  if (params.l < 1 || params.m < 1) throw ValidationError("session params need l >= 1 and m >= 1");
  const LanguageModel& lm = *ports.lm;
  const VideoCatalog& catalog = *ports.catalog;

  WatchSession session;
  session.session_id = session_id.empty()
                           ? "session-" + seed_tag(seed, seed_profile.topic + "/" +
                                                             seed_profile.subtopic + "/" +
                                                             to_string(seed_profile.intent))
                           : session_id;
  session.seed_topic = seed_profile.topic;
  session.seed_subtopic = seed_profile.subtopic;
  session.intent = seed_profile.intent;

  PreferenceProfile profile = initial_preference(seed_profile);
  session.final_preference = profile;
  const std::string fallback = seed_profile.topic + " " + seed_profile.subtopic;
  std::string current_query = bootstrap_query(seed_profile);
  std::vector<VideoMeta> history;
  std::vector<std::string> watched_ids;
  std::vector<std::string> reviews;

  for (std::size_t i = 1; i <= params.m; ++i) {
    const int turn = static_cast<int>(i);
    TurnRecord rec;
    try {
      const std::optional<VideoMeta> last =
          history.empty() ? std::nullopt : std::optional<VideoMeta>(history.back());
      if (i == 1) {
        rec.decision = RetrievalDecision::new_query(current_query);
      } else {
        const auto preview = catalog.related(last->video_id, params.l);
        DecisionResult d = decide_retrieval(history, profile, preview, lm,
                                            stage_seed(seed, turn, "decide"),
                                            {seed_profile.intent, current_query}, templates);
        rec.decision = d.decision;
        rec.warnings.insert(rec.warnings.end(), d.warnings.begin(), d.warnings.end());
      }

      auto fetch_candidates = [&](const RetrievalDecision& decision) {
        CandidateResult c =
            retrieve_candidates(decision, last, catalog, params.l, watched_ids, fallback);
        rec.warnings.insert(rec.warnings.end(), c.warnings.begin(), c.warnings.end());
        if (c.fallback) rec.decision = *c.fallback;
        if (rec.decision.mode == RetrievalMode::kNewQuery) current_query = rec.decision.query;
        return c.candidates;
      };
      rec.candidates = fetch_candidates(rec.decision);

      const std::vector<VideoMeta> recent3(
          history.end() - static_cast<std::ptrdiff_t>(std::min<std::size_t>(3, history.size())),
          history.end());
      Selection sel;
      try {
        sel = select_videos(rec.candidates, recent3, profile, current_query, lm,
                            stage_seed(seed, turn, "select"), templates);
      } catch (const MostWantedUnavailable& e) {
        rec.warnings.push_back(std::string(e.what()) + "; regenerating query");
        RetrievalDecision regen = RetrievalDecision::new_query(fallback);
        if (last) {
          const auto preview = catalog.related(last->video_id, params.l);
          DecisionResult d = decide_retrieval(history, profile, preview, lm,
                                              stage_seed(seed, turn, "regenerate"),
                                              {seed_profile.intent, current_query}, templates);
          if (d.decision.mode == RetrievalMode::kNewQuery && d.decision.query != current_query)
            regen = d.decision;
        }
        rec.decision = regen;
        rec.candidates = fetch_candidates(regen);
        sel = select_videos(rec.candidates, recent3, profile, current_query, lm,
                            stage_seed(seed, turn, "reselect"), templates);
      }
      rec.warnings.insert(rec.warnings.end(), sel.warnings.begin(), sel.warnings.end());
      rec.choose_reason = sel.choose_reason;
      rec.reject_reason = sel.reject_reason;
      if (sel.least) rec.rejected = rec.candidates[*sel.least];

      rec.chosen = catalog.fetch(rec.candidates[sel.most].video_id);
      if (rec.chosen.meta.video_id != rec.candidates[sel.most].video_id)
        throw PortError("catalog returned a different video for " +
                        rec.candidates[sel.most].video_id);

      Review review = watch_video(rec.chosen, profile, lm, stage_seed(seed, turn, "watch"), templates);
      rec.review = review.text;
      rec.warnings.insert(rec.warnings.end(), review.warnings.begin(), review.warnings.end());
      reviews.push_back(rec.review);

      UpdateResult upd = update_preference(
          profile, {reviews, rec.chosen.meta, rec.choose_reason, rec.rejected, rec.reject_reason},
          lm, stage_seed(seed, turn, "update"), templates);
      rec.warnings.insert(rec.warnings.end(), upd.warnings.begin(), upd.warnings.end());
      profile = upd.profile;
      rec.preference_after = profile;
      validate(rec);
    } catch (const SessionError&) {
      throw;
    } catch (const std::exception& e) {
      session.final_preference = profile;
      throw SessionError(turn, e.what(), session);
    }
    history.push_back(rec.chosen.meta);
    watched_ids.push_back(rec.chosen.meta.video_id);
    session.turns.push_back(std::move(rec));
    session.final_preference = profile;
  }
  return session;
}

// ---- annotation ---------------------------------------------------------------------

std::map<int, ClipScore> parse_clip_scores(const std::string& completion) {
  static const std::regex line_re(
      R"(Clip\s*ID:\s*\[?\s*clip_(\d+)\s*\]?\s*,\s*Score:\s*\[?\s*(-?\d+)\s*\]?(?:\s*,\s*Justification:\s*(.*))?)",
      std::regex::icase);
  std::map<int, ClipScore> out;
  for (const auto& raw : text::split_lines(completion)) {
    std::smatch m;
    if (!std::regex_search(raw, m, line_re)) continue;
    int clip = 0, score = 0;
    try {
      clip = std::stoi(m[1].str());
      score = std::stoi(m[2].str());
    } catch (const std::exception&) {
      continue;
    }
    if (out.count(clip)) continue;
    out[clip] = {score, m[3].matched ? strip_brackets(m[3].str()) : std::string()};
  }
  return out;
}

SaliencyAnnotation annotate_saliency(const WatchSession& session, const LanguageModel& lm,
                                     std::uint64_t seed, const PromptTemplates& templates) {
  if (session.turns.empty()) throw ValidationError("cannot annotate an empty session");
  const VideoRecord& target = session.target();
  const int n = static_cast<int>(target.segments.size());

  std::ostringstream profile;
  profile << "Long-term preferences:\n" << render_preference(session.final_preference)
          << "\n\nReviews of watched videos:";
  for (std::size_t i = 0; i < session.turns.size(); ++i)
    profile << "\n" << i + 1 << ". " << session.turns[i].chosen.meta.title << ": "
            << session.turns[i].review;
  const std::string prompt = render(
      templates.scoring, {{"preference_profile", profile.str()}, {"clip info", render_clips(target)}});

  auto acceptable = [&](const std::map<int, ClipScore>& scores) {
    for (int k = 0; k < n; ++k) {
      auto it = scores.find(k);
      if (it == scores.end() || it->second.score < kMinScore || it->second.score > kMaxScore)
        return false;
    }
    return true;
  };

  std::map<int, ClipScore> first = parse_clip_scores(lm.complete(prompt, seed));
  std::map<int, ClipScore> scores = first;
  if (!acceptable(first)) {
    scores = parse_clip_scores(lm.complete(prompt, seed + 1));
    for (const auto& [k, v] : first) scores.emplace(k, v);  // fill gaps from the first attempt
  }

  SaliencyAnnotation a;
  a.session_id = session.session_id;
  a.video_id = target.meta.video_id;
  for (int k = 0; k < n; ++k) {
    auto it = scores.find(k);
    if (it == scores.end())
      throw AnnotationError(k, "annotation missing clip_" + std::to_string(k) + " after retry");
    int s = it->second.score;
    if (s < kMinScore || s > kMaxScore) {
      const int clamped = std::clamp(s, kMinScore, kMaxScore);
      a.warnings.push_back("clip_" + std::to_string(k) + " score " + std::to_string(s) +
                           " clamped to " + std::to_string(clamped));
      s = clamped;
    }
    a.scores.push_back(s);
    a.justifications.push_back(it->second.justification);
  }
  return a;
}

// ---- batch ------------------------------------------------------------------------

BatchOutcome run_sessions(const std::vector<ProfileSeed>& seeds,
                          const std::function<Ports(std::size_t)>& ports_for,
                          const SessionParams& params, std::uint64_t seed, int jobs,
                          const PromptTemplates& templates) {
  std::vector<std::optional<WatchSession>> out(seeds.size());
  std::vector<std::string> errors(seeds.size());
  const auto n = static_cast<std::ptrdiff_t>(seeds.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs > 0 ? jobs : omp_get_max_threads())
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const ProfileSeed& s = seeds[u];
    char id[32];
    std::snprintf(id, sizeof(id), "s%05zu", u);
    const std::string session_id =
        s.extra.contains("session_id") ? s.extra["session_id"].get<std::string>() : id;
    try {
      out[u] = run_session(s, ports_for(u), params, derive_seed(seed, "session/" + session_id),
                           session_id, templates);
    } catch (const std::exception& e) {
      errors[u] = session_id + ": " + e.what();
    }
  }
  BatchOutcome outcome;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (out[i]) outcome.sessions.push_back(std::move(*out[i]));
    if (!errors[i].empty()) outcome.errors.push_back(errors[i]);
  }
  return outcome;
}

}  // namespace pvh::sim
