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

#include "pvh/analysis.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>

#include "pvh/errors.hpp"
#include "pvh/text.hpp"

namespace pvh::analysis {

bool is_distinct_query(const std::string& query, const std::vector<std::string>& previous) {
  for (const auto& p : previous)
    if (text::jaccard(query, p) >= kDistinctQueryJaccard) return false;
  return true;
}

double exploration_ratio(const WatchSession& session) {
  const std::size_t m = session.turns.size();
  if (m < 2) throw ValidationError("exploration ratio needs at least 2 turns");
  std::vector<std::string> queries;
  const auto& first = session.turns.front().decision;
  if (first.mode == RetrievalMode::kNewQuery) queries.push_back(first.query);
  std::size_t drift = 0;
  for (std::size_t i = 1; i < m; ++i) {
    const auto& d = session.turns[i].decision;
    if (d.mode != RetrievalMode::kNewQuery) continue;
    if (is_distinct_query(d.query, queries)) ++drift;
    queries.push_back(d.query);
  }
  return static_cast<double>(drift) / static_cast<double>(m - 1);
}

ScoreStats score_stats(const std::vector<int>& scores) {
  if (scores.empty()) throw ValidationError("score_stats needs at least one score");
  double sum = 0.0;
  for (int s : scores) sum += s;
  const double n = static_cast<double>(scores.size());
  const double mean = sum / n;
  double ss = 0.0;
  for (int s : scores) ss += (s - mean) * (s - mean);
  return {mean, std::sqrt(ss / n)};
}

EmbeddingExport export_history_embeddings(const std::vector<WatchSession>& sessions,
                                          const EmbeddingProvider& provider, int jobs) {
  const int d_v = provider.dims().first;
  FeatureConfig visual_only;
  visual_only.zero_text = true;
  std::vector<std::optional<Eigen::VectorXd>> vectors(sessions.size());
  std::vector<std::string> errors(sessions.size());
  const auto n = static_cast<std::ptrdiff_t>(sessions.size());
  const int threads = provider.thread_safe() ? jobs : 1;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads > 0 ? threads : omp_get_max_threads())
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& s = sessions[static_cast<std::size_t>(i)];
    try {
      if (s.turns.empty()) throw ValidationError("session has no videos");
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(d_v);
      for (const auto& t : s.turns)
        acc += encode_video(t.chosen, provider, visual_only).vector.head(d_v);
      vectors[static_cast<std::size_t>(i)] = acc / static_cast<double>(s.turns.size());
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = s.session_id + ": " + e.what();
    }
  }
  EmbeddingExport out;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    if (vectors[i]) out.rows.push_back({sessions[i].session_id, std::move(*vectors[i])});
    else out.skipped.push_back(errors[i]);
  }
  return out;
}

void write_embeddings_csv(const EmbeddingExport& table, std::ostream& out) {
  const Eigen::Index d = table.rows.empty() ? 0 : table.rows.front().vector.size();
  out << "session_id";
  for (Eigen::Index k = 0; k < d; ++k) out << ",e" << k;
  out << '\n';
  char buf[32];
  for (const auto& r : table.rows) {
    out << r.session_id;
    for (Eigen::Index k = 0; k < r.vector.size(); ++k) {
      std::snprintf(buf, sizeof(buf), ",%.17g", r.vector[k]);
      out << buf;
    }
    out << '\n';
  }
}

void write_stats_csv(const std::vector<SessionStats>& rows, std::ostream& out) {
  out << "session_id,exploration_ratio,score_mean,score_std\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,%.17g\n", r.exploration, r.scores.mean,
                  r.scores.std);
    out << r.session_id << buf;
  }
}

}  // namespace pvh::analysis
