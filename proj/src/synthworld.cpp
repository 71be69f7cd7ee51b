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

#include "pvh/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include "pvh/errors.hpp"
#include "pvh/rng.hpp"
#include "pvh/text.hpp"

namespace pvh::synth {

using nlohmann::json;

namespace {

Eigen::VectorXd random_unit(Rng& rng, int dim) {
  Eigen::VectorXd v(dim);
  double n = 0.0;
  do {
    for (int i = 0; i < dim; ++i) v[i] = rng.normal();
    n = v.norm();
  } while (n == 0.0);
  return v / n;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd from_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Keyword indices sorted by cosine to `v`, descending; ties by index.
std::vector<int> keywords_by_cos(const SynthWorld& w, const Eigen::VectorXd& v) {
  std::vector<int> order(w.keyword_latents.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::vector<double> cos(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) cos[i] = w.keyword_latents[i].dot(v);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return cos[a] > cos[b]; });
  return order;
}

std::string fmt2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

// Text between `begin` and `end` markers (end optional).
std::string section(const std::string& s, const std::string& begin, const std::string& end) {
  const auto b = s.find(begin);
  if (b == std::string::npos) return {};
  const auto start = b + begin.size();
  const auto e = end.empty() ? std::string::npos : s.find(end, start);
  return s.substr(start, e == std::string::npos ? std::string::npos : e - start);
}

std::vector<std::string> listed_ids(const std::string& s) {
  static const std::regex id_re(R"(ID: (v\d+))");
  std::vector<std::string> out;
  for (std::sregex_iterator it(s.begin(), s.end(), id_re), end; it != end; ++it)
    out.push_back((*it)[1].str());
  return out;
}

constexpr int kTopicKeywords = 8;

const std::regex& segment_key_re() {
  static const std::regex re(R"((v\d+)/(\d+))");
  return re;
}

}  // namespace

// ---- config -------------------------------------------------------------------

void WorldConfig::validate() const {
  if (n_users <= 0 || n_videos <= 0 || dim <= 1 || m <= 0 || n <= 0 || l <= 0 || n_keywords < 8 ||
      query_keywords < 1)
    throw ValidationError("world counts must be positive (dim at least 2, n_keywords at least 8)");
  if (alpha < 0.0 || alpha > 1.0) throw ValidationError("alpha must lie in [0, 1]");
  if (noise_scale < 0.0) throw ValidationError("noise_scale must be non-negative");
  if (drift_min > drift_max) throw ValidationError("drift_min exceeds drift_max");
  if (n_videos < m + l) throw ValidationError("catalog too small for m turns of l candidates");
}

json WorldConfig::to_json() const {
  return {{"seed", seed},         {"n_users", n_users},     {"n_videos", n_videos},
          {"dim", dim},           {"m", m},                 {"n", n},
          {"l", l},               {"n_keywords", n_keywords}, {"query_keywords", query_keywords}, {"alpha", alpha},
          {"noise_scale", noise_scale}, {"drift_min", drift_min}, {"drift_max", drift_max}};
}

WorldConfig WorldConfig::from_json(const json& j) {
  WorldConfig c;
  auto get = [&](const char* k, auto& field) {
    if (!j.contains(k)) return;
    try {
      j.at(k).get_to(field);
    } catch (const json::exception& e) {
      throw ParseError(std::string("world.") + k, e.what());
    }
  };
  get("seed", c.seed);
  get("n_users", c.n_users);
  get("n_videos", c.n_videos);
  get("dim", c.dim);
  get("m", c.m);
  get("n", c.n);
  get("l", c.l);
  get("n_keywords", c.n_keywords);
  get("query_keywords", c.query_keywords);
  get("alpha", c.alpha);
  get("noise_scale", c.noise_scale);
  get("drift_min", c.drift_min);
  get("drift_max", c.drift_max);
  return c;
}

// ---- world ----------------------------------------------------------------------

std::string keyword_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "kw%02d", i);
  return buf;
}

std::string video_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "v%05d", i);
  return buf;
}

const SynthVideo& SynthWorld::video(const std::string& id) const {
  auto it = video_index.find(id);
  if (it == video_index.end()) throw PortError("unknown synthetic video " + id);
  return videos[static_cast<std::size_t>(it->second)];
}

SynthWorld generate_world(const WorldConfig& config) {
  config.validate();
  SynthWorld w;
  w.config = config;
  const int d = config.dim;

  Rng kw_rng(derive_seed(config.seed, "world/keywords"));
  for (int i = 0; i < config.n_keywords; ++i) w.keyword_latents.push_back(random_unit(kw_rng, d));

  Rng video_rng(derive_seed(config.seed, "world/videos"));
  static const char* kMonths[] = {"01", "02", "03", "04", "05", "06",
                                  "07", "08", "09", "10", "11", "12"};
  for (int v = 0; v < config.n_videos; ++v) {
    SynthVideo sv;
    sv.z = random_unit(video_rng, d);
    const std::string id = video_id(v);
    const auto kws = keywords_by_cos(w, sv.z);
    const std::string k1 = keyword_name(kws[0]), k2 = keyword_name(kws[1]);

    double t = 0.0;
    for (int k = 0; k < config.n; ++k) {
      Eigen::VectorXd noise(d);
      for (int i = 0; i < d; ++i) noise[i] = config.noise_scale * video_rng.normal();
      Eigen::VectorXd c = config.alpha * sv.z + (1.0 - config.alpha) * noise;
      const double norm = c.norm();
      sv.segment_latents.push_back(norm > 0.0 ? Eigen::VectorXd(c / norm) : sv.z);

      // durations on a 0.1 s grid so the JSON stays exact
      const double len = static_cast<double>(20 + video_rng.below(61)) / 10.0;
      Segment s;
      s.index = k;
      s.start_s = t;
      t = std::round((t + len) * 10.0) / 10.0;
      s.end_s = t;
      const std::string key = id + "/" + std::to_string(k);
      const auto seg_kw = keyword_name(keywords_by_cos(w, sv.segment_latents.back())[0]);
      s.caption = "frame " + key + " showing " + seg_kw;
      s.transcript = "narration " + key + " about " + seg_kw;
      s.frame_ref = "synth://" + key;
      sv.record.segments.push_back(std::move(s));
    }
    VideoMeta& m = sv.record.meta;
    m.video_id = id;
    m.title = k1 + " and " + k2 + " " + id;
    m.channel = "channel " + std::to_string(video_rng.below(50));
    m.description = "A synthetic video about " + k1 + ", touching on " + k2 + ".";
    m.view_count = 100 + video_rng.below(1000000);
    m.published = std::to_string(2008 + video_rng.below(17)) + "-" +
                  kMonths[video_rng.below(12)] + "-" +
                  (std::to_string(10 + video_rng.below(19)));
    m.duration_s = t;
    m.thumbnail_ref = "synth://" + id + "/thumb";
    w.video_index[id] = v;
    w.videos.push_back(std::move(sv));
  }

  Rng user_rng(derive_seed(config.seed, "world/users"));
  static const Intent kIntents[] = {Intent::kAmusing, Intent::kEmotional, Intent::kInformative,
                                    Intent::kRecentNews};
  for (int i = 0; i < config.n_users; ++i) {
    SynthUser u;
    u.u = random_unit(user_rng, d);
    u.drift_threshold = user_rng.uniform(config.drift_min, config.drift_max);
    // topic: nearest of the first kTopicKeywords keywords (a coarse stratum);
    // subtopic: nearest keyword overall
    const auto kws = keywords_by_cos(w, u.u);
    int topic = -1;
    for (int k : kws)
      if (k < kTopicKeywords) {
        topic = k;
        break;
      }
    u.seed.topic = keyword_name(topic);
    u.seed.subtopic = keyword_name(kws[0] == topic ? kws[1] : kws[0]);
    u.seed.intent = kIntents[user_rng.below(4)];
    char sid[16];
    std::snprintf(sid, sizeof(sid), "u%04d", i);
    u.seed.extra = json{{"session_id", sid}};
    w.users.push_back(std::move(u));
  }
  return w;
}

int oracle_saliency_from_cos(double cos) {
  const long s = std::lround(1.0 + 9.0 * (cos + 1.0) / 2.0);
  return static_cast<int>(std::clamp<long>(s, kMinScore, kMaxScore));
}

int oracle_saliency(const Eigen::VectorXd& u, const Eigen::VectorXd& c) {
  const double denom = u.norm() * c.norm();
  if (denom == 0.0) throw ValidationError("oracle_saliency needs non-zero latents");
  return oracle_saliency_from_cos(u.dot(c) / denom);
}

std::vector<ProfileSeed> world_seeds(const SynthWorld& world) {
  std::vector<ProfileSeed> out;
  for (const auto& u : world.users) out.push_back(u.seed);
  return out;
}

// ---- catalog --------------------------------------------------------------------

std::vector<VideoMeta> SynthCatalog::nearest(const Eigen::VectorXd& q, std::size_t limit,
                                             const std::string& exclude) const {
  std::vector<std::pair<double, int>> scored;
  scored.reserve(world_->videos.size());
  for (std::size_t i = 0; i < world_->videos.size(); ++i)
    scored.emplace_back(-world_->videos[i].z.dot(q), static_cast<int>(i));
  const std::size_t k = std::min(scored.size(), limit + 1);
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end());
  std::vector<VideoMeta> out;
  for (std::size_t i = 0; i < k && out.size() < limit; ++i) {
    const auto& v = world_->videos[static_cast<std::size_t>(scored[i].second)];
    if (v.record.meta.video_id != exclude) out.push_back(v.record.meta);
  }
  return out;
}

std::vector<VideoMeta> SynthCatalog::search(const std::string& query, std::size_t limit) const {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(world_->config.dim);
  bool any = false;
  for (const auto& tok : text::tokens(query)) {
    if (tok.size() < 3 || tok.rfind("kw", 0) != 0 ||
        tok.find_first_not_of("0123456789", 2) != std::string::npos)
      continue;
    const int i = std::atoi(tok.c_str() + 2);
    if (i < 0 || i >= static_cast<int>(world_->keyword_latents.size())) continue;
    q += world_->keyword_latents[static_cast<std::size_t>(i)];
    any = true;
  }
  if (!any || q.norm() == 0.0) return {};
  return nearest(q / q.norm(), limit, "");
}

std::vector<VideoMeta> SynthCatalog::related(const std::string& id, std::size_t limit) const {
  return nearest(world_->video(id).z, limit, id);
}

VideoRecord SynthCatalog::fetch(const std::string& id) const { return world_->video(id).record; }

// ---- language model -----------------------------------------------------------------

SynthLanguageModel::SynthLanguageModel(std::shared_ptr<const SynthWorld> world, int user)
    : world_(std::move(world)), user_(user) {
  if (user < 0 || user >= static_cast<int>(world_->users.size()))
    throw ValidationError("user index out of range");
}

double SynthLanguageModel::cos_to_user(const std::string& id) const {
  return world_->video(id).z.dot(world_->users[static_cast<std::size_t>(user_)].u);
}

std::string SynthLanguageModel::complete(const std::string& prompt, std::uint64_t seed) const {
  if (prompt.rfind("You are finding", 0) == 0) return decide(prompt, seed);
  if (prompt.rfind("You are a video quality rater", 0) == 0) return select(prompt);
  if (prompt.rfind("You are a YouTube viewer", 0) == 0) return review(prompt);
  if (prompt.rfind("You are a preference analyzer", 0) == 0) return update(prompt);
  if (prompt.rfind("You are a viewer with specific content preferences", 0) == 0)
    return score(prompt);
  return "";
}

std::string SynthLanguageModel::decide(const std::string& prompt, std::uint64_t seed) const {
  const SynthUser& user = world_->users[static_cast<std::size_t>(user_)];
  double best = -2.0;
  for (const auto& id : listed_ids(section(prompt, "current related videos are:", "Now, decide")))
    best = std::max(best, cos_to_user(id));
  if (best > user.drift_threshold) return "Decision: [Explore]\nNew query: []";
  // lead keyword picked by seed among the user's top three, the rest chosen
  // greedily so the query latent tracks u
  const auto kws = keywords_by_cos(*world_, user.u);
  const std::size_t top = std::min<std::size_t>(3, kws.size());
  std::vector<int> chosen{kws[seed % top]};
  Eigen::VectorXd q = world_->keyword_latents[static_cast<std::size_t>(chosen[0])];
  while (chosen.size() < std::min<std::size_t>(static_cast<std::size_t>(world_->config.query_keywords), kws.size())) {
    int best_k = -1;
    double best_cos = -2.0;
    for (std::size_t k = 0; k < world_->keyword_latents.size(); ++k) {
      if (std::find(chosen.begin(), chosen.end(), static_cast<int>(k)) != chosen.end()) continue;
      const Eigen::VectorXd cand = q + world_->keyword_latents[k];
      const double c = cand.dot(user.u) / cand.norm();
      if (c > best_cos) best_cos = c, best_k = static_cast<int>(k);
    }
    chosen.push_back(best_k);
    q += world_->keyword_latents[static_cast<std::size_t>(best_k)];
  }
  std::string query;
  for (int k : chosen) query += (query.empty() ? "" : " ") + keyword_name(k);
  return "Decision: [Search for a new query]\nNew query: [" + query + "]";
}

std::string SynthLanguageModel::select(const std::string& prompt) const {
  const auto ids = listed_ids(section(prompt, "Candidate Videos:", "Answer Format:"));
  if (ids.empty()) return "Most Wanted: [None]\nExplanation: [no candidates]";
  std::size_t most = 0, least = 0;
  std::vector<double> cos;
  for (const auto& id : ids) cos.push_back(cos_to_user(id));
  for (std::size_t i = 1; i < ids.size(); ++i) {
    if (cos[i] > cos[most]) most = i;
    if (cos[i] < cos[least]) least = i;
  }
  std::ostringstream os;
  os << "Most Wanted: [" << most + 1 << "]\nExplanation: [closest match, affinity "
     << fmt2(cos[most]) << "]\n\n";
  if (ids.size() > 1)
    os << "Least Wanted: [" << least + 1 << "]\nExplanation: [weakest match, affinity "
       << fmt2(cos[least]) << "]";
  else
    os << "Least Wanted: [None]\nExplanation: [only one candidate]";
  return os.str();
}

std::string SynthLanguageModel::review(const std::string& prompt) const {
  std::smatch m;
  const std::string video = section(prompt, "Video:", "");
  if (!std::regex_search(video, m, segment_key_re())) return "";
  const auto& v = world_->video(m[1].str());
  const double c = cos_to_user(m[1].str());
  const auto kw = keyword_name(keywords_by_cos(*world_, v.z)[0]);
  return "The video walks through " + kw + " material across " +
         std::to_string(v.segment_latents.size()) + " scenes. It stays on topic throughout. " +
         (c > 0.0 ? "I enjoyed it" : "It did not appeal to me") + ", affinity " + fmt2(c) +
         ". The " + kw + " parts were the most memorable.";
}

std::string SynthLanguageModel::update(const std::string& prompt) const {
  const auto chosen = listed_ids(section(prompt, "as the most wanted video", "Reason:"));
  const auto rejected = listed_ids(section(prompt, "as the least wanted video", "Reason:"));
  std::ostringstream os;
  os << "Likes:";
  if (!chosen.empty())
    os << "\n- enjoys " << keyword_name(keywords_by_cos(*world_, world_->video(chosen[0]).z)[0])
       << " content";
  os << "\nDislikes:";
  if (!rejected.empty())
    os << "\n- avoids " << keyword_name(keywords_by_cos(*world_, world_->video(rejected[0]).z)[0])
       << " content";
  return os.str();
}

std::string SynthLanguageModel::score(const std::string& prompt) const {
  const Eigen::VectorXd& u = world_->users[static_cast<std::size_t>(user_)].u;
  static const std::regex clip_re(R"(Clip ID: clip_(\d+)[^\n]*\n\s*Frame description: [^\n]*?(v\d+)/(\d+))");
  const std::string clips = section(prompt, "Clips to Evaluate:", "Output Format:");
  std::ostringstream os;
  for (std::sregex_iterator it(clips.begin(), clips.end(), clip_re), end; it != end; ++it) {
    const auto& v = world_->video((*it)[2].str());
    const auto k = static_cast<std::size_t>(std::stoul((*it)[3].str()));
    if (k >= v.segment_latents.size()) continue;
    const double c = u.dot(v.segment_latents[k]);
    os << "- Clip ID: clip_" << (*it)[1].str() << ", Score: " << oracle_saliency_from_cos(c)
       << ", Justification: \"affinity " << fmt2(c) << "\"\n";
  }
  return os.str();
}

sim::Ports mock_ports(std::shared_ptr<const SynthWorld> world, int user) {
  return {std::make_shared<SynthLanguageModel>(world, user), std::make_shared<SynthCatalog>(world)};
}

// ---- embeddings ---------------------------------------------------------------------

LatentEmbeddingProvider::LatentEmbeddingProvider(std::shared_ptr<const SynthWorld> world,
                                                 bool mirror)
    : world_(std::move(world)),
      half_v_((world_->config.dim + 1) / 2),
      half_t_(world_->config.dim - (world_->config.dim + 1) / 2),
      k_(mirror ? 2 : 1) {}

const Eigen::VectorXd* LatentEmbeddingProvider::lookup(const std::string& content) const {
  std::smatch m;
  if (!std::regex_search(content, m, segment_key_re()))
    throw ValidationError("no segment key in '" + content + "'");
  const auto& v = world_->video(m[1].str());
  const auto k = static_cast<std::size_t>(std::stoul(m[2].str()));
  if (k >= v.segment_latents.size()) throw ValidationError("segment key out of range: " + m.str());
  return &v.segment_latents[k];
}

Eigen::VectorXd LatentEmbeddingProvider::lift(const Eigen::VectorXd& x) const {
  if (k_ == 1) return x;
  Eigen::VectorXd out(2 * x.size());
  out << x, -x;
  return out;
}

Eigen::VectorXd LatentEmbeddingProvider::embed_image(const std::string& frame_ref) const {
  return lift(lookup(frame_ref)->head(half_v_));
}

Eigen::VectorXd LatentEmbeddingProvider::embed_text(const std::string& text) const {
  return lift(lookup(text)->tail(half_t_));
}

// ---- dump -------------------------------------------------------------------------

json world_to_json(const SynthWorld& w) {
  json keywords = json::array();
  for (const auto& k : w.keyword_latents) keywords.push_back(to_vec(k));
  json users = json::array();
  for (const auto& u : w.users) {
    json seed = u.seed.extra;
    seed["topic"] = u.seed.topic;
    seed["subtopic"] = u.seed.subtopic;
    seed["intent"] = to_string(u.seed.intent);
    users.push_back({{"u", to_vec(u.u)}, {"drift_threshold", u.drift_threshold}, {"seed", seed}});
  }
  json videos = json::array();
  for (const auto& v : w.videos) {
    json segs = json::array();
    for (const auto& c : v.segment_latents) segs.push_back(to_vec(c));
    videos.push_back({{"z", to_vec(v.z)}, {"segment_latents", segs}, {"record", to_json(v.record)}});
  }
  return {{"config", w.config.to_json()},
          {"keywords", keywords},
          {"users", users},
          {"videos", videos}};
}

SynthWorld world_from_json(const json& j) {
  SynthWorld w;
  try {
    w.config = WorldConfig::from_json(j.at("config"));
    for (const auto& k : j.at("keywords")) w.keyword_latents.push_back(from_vec(k));
    for (const auto& u : j.at("users")) {
      SynthUser su;
      su.u = from_vec(u.at("u"));
      su.drift_threshold = u.at("drift_threshold").get<double>();
      json seed = u.at("seed");
      su.seed.topic = seed.at("topic").get<std::string>();
      su.seed.subtopic = seed.at("subtopic").get<std::string>();
      su.seed.intent = intent_from_string(seed.at("intent").get<std::string>());
      seed.erase("topic");
      seed.erase("subtopic");
      seed.erase("intent");
      su.seed.extra = seed;
      w.users.push_back(std::move(su));
    }
    for (const auto& v : j.at("videos")) {
      SynthVideo sv;
      sv.z = from_vec(v.at("z"));
      for (const auto& c : v.at("segment_latents")) sv.segment_latents.push_back(from_vec(c));
      sv.record = video_record_from_json(v.at("record"));
      w.video_index[sv.record.meta.video_id] = static_cast<int>(w.videos.size());
      w.videos.push_back(std::move(sv));
    }
  } catch (const json::exception& e) {
    throw ParseError("world", e.what());
  }
  return w;
}

void save_world(const SynthWorld& world, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << world_to_json(world).dump() << '\n';
}

SynthWorld load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open world file " + path);
  try {
    return world_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError("world", e.what());
  }
}

}  // namespace pvh::synth
