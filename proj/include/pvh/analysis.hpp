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

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "pvh/core_model.hpp"
#include "pvh/features.hpp"

namespace pvh::analysis {

inline constexpr double kDistinctQueryJaccard = 0.5;

// True when `query` has token-set Jaccard < kDistinctQueryJaccard against
// every entry of `previous`.
bool is_distinct_query(const std::string& query, const std::vector<std::string>& previous);

// Fraction of turns 2..m that are topic drift: a NewQuery whose query is
// distinct from every earlier query in the session (turn 1 included).
double exploration_ratio(const WatchSession& session);

struct ScoreStats {
  double mean = 0.0;
  double std = 0.0;  // population
};

ScoreStats score_stats(const std::vector<int>& scores);
inline ScoreStats score_stats(const SaliencyAnnotation& a) { return score_stats(a.scores); }

struct EmbeddingRow {
  std::string session_id;
  Eigen::VectorXd vector;
};

struct EmbeddingExport {
  std::vector<EmbeddingRow> rows;
  std::vector<std::string> skipped;  // "session_id: reason"
};

// Per session: mean over watched videos of the mean visual block of their
// segment features. Sessions that fail featurization are skipped.
EmbeddingExport export_history_embeddings(const std::vector<WatchSession>& sessions,
                                          const EmbeddingProvider& provider, int jobs = 0);

void write_embeddings_csv(const EmbeddingExport& table, std::ostream& out);

struct SessionStats {
  std::string session_id;
  double exploration = 0.0;
  ScoreStats scores;
};

void write_stats_csv(const std::vector<SessionStats>& rows, std::ostream& out);

}  // namespace pvh::analysis
