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

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace pvh::metrics {

struct Span {
  double start_s = 0.0;
  double end_s = 0.0;
};

struct Moment {
  double start_s = 0.0;
  double end_s = 0.0;
  double score = 0.0;  // mean prediction over the covered segments
  std::size_t first_segment = 0;
  std::size_t last_segment = 0;  // inclusive
};

// Segment indices ordered by prediction, descending; ties by ascending index.
std::vector<std::size_t> rank_segments(std::span<const double> pred);

// Mean over relevant segments (gt >= threshold) of precision at their rank.
// Empty when no segment is relevant.
std::optional<double> average_precision(std::span<const double> pred, std::span<const int> gt,
                                        int salient_threshold);

int hit_at_1(std::span<const double> pred, std::span<const int> gt, int salient_threshold);

// Maximal runs of segments with pred >= tau, ranked by mean score
// (descending, ties by earlier start). With `fallback` set and no run, the
// argmax segment becomes the single moment.
std::vector<Moment> extract_moments(std::span<const double> pred, std::span<const Span> spans,
                                    double tau, bool fallback = true);

// Ground-truth moments: runs with gt >= salient_threshold, no fallback.
std::vector<Moment> gt_moments(std::span<const int> gt, std::span<const Span> spans,
                               int salient_threshold = 7);

double temporal_iou(double a_start, double a_end, double b_start, double b_end);

// 1 iff the top predicted moment reaches `iou_threshold` against any ground
// truth moment. Empty when there is no ground-truth moment.
std::optional<int> recall_at_1(std::span<const Moment> pred_moments,
                               std::span<const Moment> gt_moments, double iou_threshold);

struct F1Result {
  double f1 = 0.0;
  bool vacuous = false;  // both sets empty; f1 reported as 1
};

F1Result f1_at(std::span<const double> pred, std::span<const int> gt, int t);

// Per-video RMSE between pred in [0,1] and gt/10.
double rmse(std::span<const double> pred, std::span<const int> gt);

// ---- dataset-level evaluation ----------------------------------------------

struct EvalConfig {
  int map_threshold = 7;
  std::vector<int> hit_thresholds = {7, 9};
  std::vector<double> iou_thresholds = {0.5, 0.7};
  std::vector<int> f1_thresholds = {5, 7};
  double moment_tau = 0.7;
  int gt_moment_threshold = 7;

  nlohmann::json to_json() const;
};

struct VideoPrediction {
  std::string video_id;
  std::vector<double> pred;
  std::vector<int> gt;
  std::vector<Span> spans;
};

struct VideoMetrics {
  std::string video_id;
  // Metric name -> value; absent when the metric is undefined for the video.
  std::map<std::string, double> values;
  std::vector<std::string> vacuous;  // F1 entries scored by vacuous agreement
};

struct MetricSummary {
  double mean = 0.0;
  std::size_t included = 0;
  std::size_t excluded = 0;
};

struct EvalReport {
  EvalConfig config;
  std::vector<std::string> metric_names;
  std::vector<VideoMetrics> videos;
  std::map<std::string, MetricSummary> summary;
  std::size_t vacuous_f1 = 0;

  double mean(const std::string& metric) const;
  nlohmann::json to_json() const;
};

std::vector<std::string> metric_names(const EvalConfig& config);

VideoMetrics evaluate_video(const VideoPrediction& video, const EvalConfig& config);

// Serial reference.
EvalReport evaluate_serial(std::span<const VideoPrediction> videos, const EvalConfig& config);
// OpenMP over videos; output identical to evaluate_serial.
EvalReport evaluate(std::span<const VideoPrediction> videos, const EvalConfig& config);

}  // namespace pvh::metrics
