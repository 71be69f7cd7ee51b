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

#include "pvh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pvh/errors.hpp"

namespace pvh::metrics {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
}

std::string format_threshold(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string map_name() { return "mAP"; }
std::string hit_name(int t) { return "Hit1@" + std::to_string(t); }
std::string recall_name(double t) { return "R1@" + format_threshold(t); }
std::string f1_name(int t) { return "F1@" + std::to_string(t); }
std::string rmse_name() { return "RMSE"; }

template <typename Pred>
std::vector<Moment> runs(std::size_t n, std::span<const Span> spans, Pred&& in_run,
                         std::span<const double> score) {
  std::vector<Moment> out;
  std::size_t k = 0;
  while (k < n) {
    if (!in_run(k)) {
      ++k;
      continue;
    }
    std::size_t j = k;
    double sum = 0.0;
    while (j < n && in_run(j)) sum += score[j++];
    out.push_back({spans[k].start_s, spans[j - 1].end_s, sum / static_cast<double>(j - k), k,
                   j - 1});
    k = j;
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Moment& a, const Moment& b) { return a.score > b.score; });
  return out;
}

}  // namespace

std::vector<std::size_t> rank_segments(std::span<const double> pred) {
  std::vector<std::size_t> order(pred.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pred[a] > pred[b]; });
  return order;
}

std::optional<double> average_precision(std::span<const double> pred, std::span<const int> gt,
                                        int salient_threshold) {
  check_lengths(pred.size(), gt.size(), "average_precision");
  const auto order = rank_segments(pred);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (gt[order[r]] >= salient_threshold) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

int hit_at_1(std::span<const double> pred, std::span<const int> gt, int salient_threshold) {
  check_lengths(pred.size(), gt.size(), "hit_at_1");
  if (pred.empty()) return 0;
  const auto top = static_cast<std::size_t>(
      std::max_element(pred.begin(), pred.end()) - pred.begin());
  return gt[top] >= salient_threshold ? 1 : 0;
}

std::vector<Moment> extract_moments(std::span<const double> pred, std::span<const Span> spans,
                                    double tau, bool fallback) {
  check_lengths(pred.size(), spans.size(), "extract_moments");
  auto out = runs(pred.size(), spans, [&](std::size_t k) { return pred[k] >= tau; }, pred);
  if (out.empty() && fallback && !pred.empty()) {
    const auto top = static_cast<std::size_t>(
        std::max_element(pred.begin(), pred.end()) - pred.begin());
    out.push_back({spans[top].start_s, spans[top].end_s, pred[top], top, top});
  }
  return out;
}

std::vector<Moment> gt_moments(std::span<const int> gt, std::span<const Span> spans,
                               int salient_threshold) {
  check_lengths(gt.size(), spans.size(), "gt_moments");
  std::vector<double> normalized(gt.size());
  for (std::size_t k = 0; k < gt.size(); ++k) normalized[k] = gt[k] / 10.0;
  return runs(
      gt.size(), spans, [&](std::size_t k) { return gt[k] >= salient_threshold; }, normalized);
}

double temporal_iou(double a_start, double a_end, double b_start, double b_end) {
  const double inter = std::max(0.0, std::min(a_end, b_end) - std::max(a_start, b_start));
  const double uni = std::max(a_end, b_end) - std::min(a_start, b_start);
  return uni > 0.0 ? inter / uni : 0.0;
}

std::optional<int> recall_at_1(std::span<const Moment> pred_moments,
                               std::span<const Moment> gt, double iou_threshold) {
  if (gt.empty()) return std::nullopt;
  if (pred_moments.empty()) return 0;
  const Moment& top = pred_moments.front();
  for (const Moment& g : gt)
    if (temporal_iou(top.start_s, top.end_s, g.start_s, g.end_s) >= iou_threshold) return 1;
  return 0;
}

F1Result f1_at(std::span<const double> pred, std::span<const int> gt, int t) {
  check_lengths(pred.size(), gt.size(), "f1_at");
  const double cut = t / 10.0;
  std::size_t pred_pos = 0, gt_pos = 0, both = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const bool p = pred[k] >= cut;
    const bool g = gt[k] >= t;
    pred_pos += p;
    gt_pos += g;
    both += p && g;
  }
  if (pred_pos == 0 && gt_pos == 0) return {1.0, true};
  if (both == 0) return {0.0, false};
  const double precision = static_cast<double>(both) / static_cast<double>(pred_pos);
  const double recall = static_cast<double>(both) / static_cast<double>(gt_pos);
  return {2.0 * precision * recall / (precision + recall), false};
}

double rmse(std::span<const double> pred, std::span<const int> gt) {
  check_lengths(pred.size(), gt.size(), "rmse");
  if (pred.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double d = pred[k] - gt[k] / 10.0;
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

// ---- dataset-level evaluation ----------------------------------------------

nlohmann::json EvalConfig::to_json() const {
  return {{"map_threshold", map_threshold},
          {"hit_thresholds", hit_thresholds},
          {"iou_thresholds", iou_thresholds},
          {"f1_thresholds", f1_thresholds},
          {"moment_tau", moment_tau},
          {"gt_moment_threshold", gt_moment_threshold},
          {"tie_rule", "ascending segment index"}};
}

std::vector<std::string> metric_names(const EvalConfig& config) {
  std::vector<std::string> names{map_name()};
  for (int t : config.hit_thresholds) names.push_back(hit_name(t));
  for (double t : config.iou_thresholds) names.push_back(recall_name(t));
  for (int t : config.f1_thresholds) names.push_back(f1_name(t));
  names.push_back(rmse_name());
  return names;
}

VideoMetrics evaluate_video(const VideoPrediction& v, const EvalConfig& config) {
  check_lengths(v.pred.size(), v.gt.size(), v.video_id.c_str());
  check_lengths(v.pred.size(), v.spans.size(), v.video_id.c_str());
  VideoMetrics m;
  m.video_id = v.video_id;
  if (auto ap = average_precision(v.pred, v.gt, config.map_threshold)) m.values[map_name()] = *ap;
  for (int t : config.hit_thresholds) m.values[hit_name(t)] = hit_at_1(v.pred, v.gt, t);
  const auto pm = extract_moments(v.pred, v.spans, config.moment_tau);
  const auto gm = gt_moments(v.gt, v.spans, config.gt_moment_threshold);
  for (double t : config.iou_thresholds)
    if (auto r = recall_at_1(pm, gm, t)) m.values[recall_name(t)] = *r;
  for (int t : config.f1_thresholds) {
    const F1Result f = f1_at(v.pred, v.gt, t);
    m.values[f1_name(t)] = f.f1;
    if (f.vacuous) m.vacuous.push_back(f1_name(t));
  }
  m.values[rmse_name()] = rmse(v.pred, v.gt);
  return m;
}

namespace {

EvalReport summarize(std::vector<VideoMetrics> per_video, const EvalConfig& config) {
  EvalReport report;
  report.config = config;
  report.metric_names = metric_names(config);
  report.videos = std::move(per_video);
  for (const auto& name : report.metric_names) {
    MetricSummary s;
    double sum = 0.0;
    for (const auto& v : report.videos) {
      auto it = v.values.find(name);
      if (it == v.values.end()) {
        ++s.excluded;
      } else {
        ++s.included;
        sum += it->second;
      }
    }
    s.mean = s.included ? sum / static_cast<double>(s.included) : 0.0;
    report.summary[name] = s;
  }
  for (const auto& v : report.videos) report.vacuous_f1 += v.vacuous.size();
  return report;
}

}  // namespace

EvalReport evaluate_serial(std::span<const VideoPrediction> videos, const EvalConfig& config) {
  std::vector<VideoMetrics> per_video;
  per_video.reserve(videos.size());
  for (const auto& v : videos) per_video.push_back(evaluate_video(v, config));
  return summarize(std::move(per_video), config);
}

EvalReport evaluate(std::span<const VideoPrediction> videos, const EvalConfig& config) {
  std::vector<VideoMetrics> per_video(videos.size());
  const auto n = static_cast<std::ptrdiff_t>(videos.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    per_video[static_cast<std::size_t>(i)] =
        evaluate_video(videos[static_cast<std::size_t>(i)], config);
  return summarize(std::move(per_video), config);
}

double EvalReport::mean(const std::string& metric) const {
  auto it = summary.find(metric);
  if (it == summary.end()) throw std::out_of_range("unknown metric " + metric);
  return it->second.mean;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json means = nlohmann::json::object();
  nlohmann::json excluded = nlohmann::json::object();
  for (const auto& name : metric_names) {
    const auto& s = summary.at(name);
    means[name] = s.mean;
    excluded[name] = s.excluded;
  }
  nlohmann::json per_video = nlohmann::json::array();
  for (const auto& v : videos) {
    nlohmann::json values = nlohmann::json::object();
    for (const auto& name : metric_names) {
      auto it = v.values.find(name);
      values[name] = it == v.values.end() ? nlohmann::json(nullptr) : nlohmann::json(it->second);
    }
    per_video.push_back({{"video_id", v.video_id}, {"values", values}, {"vacuous", v.vacuous}});
  }
  return {{"config", config.to_json()},
          {"metrics", metric_names},
          {"means", means},
          {"excluded", excluded},
          {"vacuous_f1", vacuous_f1},
          {"videos", per_video}};
}

}  // namespace pvh::metrics
