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

// Live-LLM and offline-catalog adapters for the simulator ports.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"
#include "pvh/errors.hpp"
#include "pvh/simulator.hpp"
#include "pvh/text.hpp"

namespace pvh::sim {

namespace fs = std::filesystem;
using nlohmann::json;

HttpLanguageModel::HttpLanguageModel(Options options) : options_(std::move(options)) {
  if (options_.api_key.empty()) {
    if (const char* env = std::getenv("HIPPO_LLM_API_KEY")) options_.api_key = env;
  }
}

std::string HttpLanguageModel::complete(const std::string& prompt, std::uint64_t seed) const {
  httplib::Client client(options_.base_url);
  client.set_read_timeout(options_.timeout_s, 0);
  client.set_write_timeout(options_.timeout_s, 0);
  httplib::Headers headers;
  if (!options_.api_key.empty())
    headers.emplace("Authorization", "Bearer " + options_.api_key);
  const json body = {{"model", options_.model},
                     {"temperature", options_.temperature},
                     {"seed", seed & 0x7fffffffffffffffULL},
                     {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  auto res = client.Post(options_.path, headers, body.dump(), "application/json");
  if (!res) throw PortError("language model request failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw PortError("language model returned HTTP " + std::to_string(res->status));
  try {
    const json reply = json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw PortError(std::string("malformed language model reply: ") + e.what());
  }
}

// ---- fixture catalog --------------------------------------------------------------

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw PortError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(p.filename().string(), e.what());
  }
}

}  // namespace

FixtureCatalog::FixtureCatalog(const std::string& directory) {
  const fs::path dir(directory);
  if (!fs::is_directory(dir)) throw PortError("catalog directory not found: " + directory);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    const auto name = p.filename().string();
    if (p.extension() != ".json" || name == "search_index.json" || name == "related.json") continue;
    VideoRecord v = video_record_from_json(read_json(p), name);
    const std::string id = v.meta.video_id;
    videos_.emplace(id, std::move(v));
  }
  const json index = read_json(dir / "search_index.json");
  for (const auto& [keyword, ids] : index.items()) {
    auto& list = index_[text::to_lower(keyword)];
    for (const auto& id : ids) {
      const auto s = id.get<std::string>();
      if (!videos_.count(s)) throw PortError("search index names unknown video " + s);
      list.push_back(s);
      keywords_of_[s].push_back(text::to_lower(keyword));
    }
  }
  if (fs::exists(dir / "related.json")) {
    const json related = read_json(dir / "related.json");
    for (const auto& [id, ids] : related.items()) related_[id] = ids.get<std::vector<std::string>>();
  }
}

std::vector<VideoMeta> FixtureCatalog::search(const std::string& query, std::size_t limit) const {
  // rank by number of query tokens hitting the index, ties by first appearance
  std::map<std::string, int> hits;
  std::vector<std::string> order;
  for (const auto& tok : text::tokens(query)) {
    auto it = index_.find(tok);
    if (it == index_.end()) continue;
    for (const auto& id : it->second) {
      if (!hits.count(id)) order.push_back(id);
      ++hits[id];
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](const std::string& a, const std::string& b) { return hits[a] > hits[b]; });
  std::vector<VideoMeta> out;
  for (const auto& id : order) {
    if (out.size() >= limit) break;
    out.push_back(videos_.at(id).meta);
  }
  return out;
}

std::vector<VideoMeta> FixtureCatalog::related(const std::string& video_id,
                                               std::size_t limit) const {
  if (!videos_.count(video_id)) throw PortError("unknown video " + video_id);
  std::vector<std::string> ids;
  if (auto it = related_.find(video_id); it != related_.end()) {
    ids = it->second;
  } else {
    const auto kw = keywords_of_.count(video_id) ? keywords_of_.at(video_id)
                                                 : std::vector<std::string>{};
    const std::set<std::string> mine(kw.begin(), kw.end());
    std::vector<std::pair<int, std::string>> scored;
    for (const auto& [id, words] : keywords_of_) {
      if (id == video_id) continue;
      int shared = 0;
      for (const auto& w : words) shared += mine.count(w) ? 1 : 0;
      if (shared > 0) scored.emplace_back(-shared, id);
    }
    std::sort(scored.begin(), scored.end());
    for (const auto& s : scored) ids.push_back(s.second);
  }
  std::vector<VideoMeta> out;
  for (const auto& id : ids) {
    if (out.size() >= limit) break;
    if (auto it = videos_.find(id); it != videos_.end()) out.push_back(it->second.meta);
  }
  return out;
}

VideoRecord FixtureCatalog::fetch(const std::string& video_id) const {
  auto it = videos_.find(video_id);
  if (it == videos_.end()) throw PortError("unknown video " + video_id);
  return it->second;
}

}  // namespace pvh::sim
