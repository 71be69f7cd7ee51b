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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. `pvh_acceptance 5 6` runs a subset.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "pvh/hipher.hpp"
#include "pvh/metrics.hpp"
#include "pvh/pipeline.hpp"
#include "pvh/rng.hpp"
#include "pvh/simulator.hpp"
#include "pvh/synthworld.hpp"
#include "test_util.hpp"

using namespace pvh;

namespace {

// ---- pinned tolerances and limits -------------------------------------------------

constexpr double kOracleTol = 1e-9;
constexpr double kGradTol = 1e-4;
constexpr double kEmbeddingTol = 1e-9;
constexpr double kMapTarget = 0.90;
constexpr double kHitTarget = 0.80;
constexpr double kAblationGap = 0.10;
constexpr int kGradDraws = 20;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failed checks; the first few are reported.
struct Checker {
  Outcome out;
  int failures = 0;
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    out.pass = false;
    if (++failures <= 3) out.detail += (out.detail.empty() ? "" : "; ") + what;
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// ---- 1: metric oracle ---------------------------------------------------------------

Outcome metric_oracle() {
  Checker c;
  Rng rng(2024);
  const metrics::EvalConfig cfg;
  for (std::size_t i = 0; i < 1000; ++i) {
    const auto v = oracle::random_video(rng, i);
    const auto m = metrics::evaluate_video(v, cfg);
    const auto ap = oracle::average_precision(v.pred, v.gt, 7);
    c.expect(ap.has_value() == (m.values.count("mAP") == 1), v.video_id + " AP definedness");
    if (ap && m.values.count("mAP")) c.expect(near(*ap, m.values.at("mAP"), kOracleTol), v.video_id + " AP");
    for (int t : {7, 9})
      c.expect(oracle::hit_at_1(v.pred, v.gt, t) == m.values.at("Hit1@" + std::to_string(t)),
               v.video_id + " Hit@1");
    for (double thr : {0.5, 0.7}) {
      const auto r = oracle::recall_at_1(v.pred, v.gt, v.spans, cfg.moment_tau, 7, thr);
      const std::string name = thr == 0.5 ? "R1@0.5" : "R1@0.7";
      c.expect(r.has_value() == (m.values.count(name) == 1), v.video_id + " " + name + " definedness");
      if (r && m.values.count(name)) c.expect(*r == m.values.at(name), v.video_id + " " + name);
    }
    for (int t : {5, 7})
      c.expect(near(oracle::f1_at(v.pred, v.gt, t), m.values.at("F1@" + std::to_string(t)), kOracleTol),
               v.video_id + " F1");
    c.expect(near(oracle::rmse(v.pred, v.gt), m.values.at("RMSE"), kOracleTol), v.video_id + " RMSE");
  }
  if (c.out.pass) c.out.detail = "1000 videos";
  return c.out;
}

// ---- 2: worked examples ---------------------------------------------------------------

Outcome hand_examples() {
  Checker c;
  const std::vector<int> gt = {9, 3, 7, 2};
  using V = std::vector<double>;
  c.expect(near(*metrics::average_precision(V{0.9, 0.1, 0.8, 0.2}, gt, 7), 1.0, 1e-12), "AP perfect");
  c.expect(near(*metrics::average_precision(V{0.1, 0.9, 0.2, 0.8}, gt, 7), 0.41667, 5e-6),
           "AP inverted");
  c.expect(near(metrics::temporal_iou(10, 20, 15, 25), 5.0 / 15.0, 1e-12), "IoU 5/15");
  c.expect(near(metrics::temporal_iou(0, 10, 5, 10), 0.5, 1e-12), "IoU 0.5");
  c.expect(near(metrics::temporal_iou(3, 7, 3, 7), 1.0, 1e-12), "IoU 1");
  c.expect(near(metrics::f1_at(V{0.9, 0.6, 0.8, 0.2}, gt, 5).f1, 0.8, 1e-12), "F1 0.8");
  c.expect(near(metrics::rmse(V{0.6, 0.4, 0.6}, std::vector<int>{8, 4, 6}), 0.11547, 5e-6), "RMSE");
  c.expect(near(hipher::saliency_loss(V{0.9, 0.5}, {{{0, 1}}}, 1.0), 0.6, 1e-12), "loss 0.6");
  c.expect(near(hipher::saliency_loss(V{0.7, 0.6, 0.9, 0.2}, {{{0, 1}, {2, 3}}}, 0.15), 0.05, 1e-12),
           "loss 0.05");
  if (c.out.pass) c.out.detail = "AP, IoU, F1, RMSE, loss";
  return c.out;
}

// ---- 3: gradient check --------------------------------------------------------------

Outcome gradient() {
  Checker c;
  double worst = 0.0;
  for (int s = 1; s <= kGradDraws; ++s) {
    const auto g = fixture::gradient_check(static_cast<std::uint64_t>(s));
    worst = std::max(worst, g.max_rel_error);
    c.expect(g.max_rel_error <= kGradTol, "draw " + std::to_string(s) + fmt(" rel %.2e", g.max_rel_error));
  }
  if (c.out.pass) c.out.detail = std::to_string(kGradDraws) + " draws, max rel " + fmt("%.2e", worst);
  return c.out;
}

// ---- 4: preference embedding properties -------------------------------------------------

Outcome embedding_properties() {
  Checker c;
  Rng r(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int len = 1 + static_cast<int>(r.below(12));
    std::vector<HistoryEmbedding> h;
    for (int i = 0; i < len; ++i) {
      Eigen::VectorXd v(32);
      for (int k = 0; k < 32; ++k) v[k] = r.normal();
      h.push_back({v});
    }
    const auto a = hipher::preference_embedding(h).vector;
    std::vector<HistoryEmbedding> shuffled = h;
    shuffle(shuffled.begin(), shuffled.end(), r);
    c.expect((hipher::preference_embedding(shuffled).vector - a).lpNorm<Eigen::Infinity>() <= kEmbeddingTol,
             "permutation");
    const std::vector<HistoryEmbedding> same(static_cast<std::size_t>(len), h[0]);
    c.expect((hipher::preference_embedding(same).vector - h[0].vector).lpNorm<Eigen::Infinity>() <=
                 kEmbeddingTol,
             "idempotence");
  }
  if (c.out.pass) c.out.detail = "100 histories";
  return c.out;
}

// ---- 5-7: synthetic learning --------------------------------------------------------------

struct Learning {
  std::shared_ptr<const synth::SynthWorld> world;
  std::vector<DatasetRecord> train, test;
};

const Learning& learning_world() {
  static const Learning data = [] {
    synth::WorldConfig wc;
    wc.seed = 1;
    wc.n_users = 200;
    wc.n_videos = 10000;
    Learning l;
    l.world = std::make_shared<const synth::SynthWorld>(synth::generate_world(wc));
    const auto ds = simulate_world(l.world, 1, 0);
    if (!ds.errors.empty()) throw std::runtime_error("simulation failed: " + ds.errors.front());
    // users are i.i.d., so the first 140 form the training split
    for (const auto& r : ds.records) (std::stoi(r.session.session_id.substr(1)) < 140 ? l.train : l.test).push_back(r);
    return l;
  }();
  return data;
}

ExperimentConfig learning_config(std::uint64_t seed) {
  ExperimentConfig c;
  c.model.hidden_dim = 32;
  c.model.heads = 1;
  c.model.encoder_layers = 0;
  c.model.ffn_dim = 32;
  c.model.projection_layers = 3;
  c.model.dropout = 0.0;
  c.model.positional_encoding = false;
  c.train.epochs = 60;
  c.train.learning_rate = 2e-3;
  c.train.batch_size = 4;
  c.train.seed = derive_seed(seed, "train");
  c.model_seed = derive_seed(seed, "model");
  c.jobs = 0;
  return c;
}

Outcome end_to_end() {
  const auto& l = learning_world();
  synth::LatentEmbeddingProvider p(l.world);
  Checker c;
  c.expect(l.train.size() == 140 && l.test.size() == 60, "split is not 140/60");
  const auto full = run_experiment(l.train, l.test, p, learning_config(1));
  auto ablated_cfg = learning_config(1);
  ablated_cfg.zero_preference = true;
  const auto ablated = run_experiment(l.train, l.test, p, ablated_cfg);
  const double map = full.report.mean("mAP"), hit = full.report.mean("Hit1@7");
  const double map0 = ablated.report.mean("mAP");
  c.expect(map >= kMapTarget, fmt("mAP %.4f", map));
  c.expect(hit >= kHitTarget, fmt("Hit1@7 %.4f", hit));
  c.expect(map - map0 >= kAblationGap, fmt("ablation gap %.4f", map - map0));
  c.out.detail = (c.out.pass ? "" : c.out.detail + " | ") + fmt("mAP %.4f", map) +
                 fmt(" Hit1@7 %.4f", hit) + fmt(" zero-e_p mAP %.4f", map0);
  return c.out;
}

// Mean test mAP over three seeds for each variant.
std::vector<double> seed_averaged(AblationAxis axis, const std::vector<std::string>& values) {
  const auto& l = learning_world();
  synth::LatentEmbeddingProvider p(l.world);
  std::vector<double> mean(values.size(), 0.0);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto rows = run_ablation(l.train, l.test, p, axis, values, learning_config(seed));
    for (std::size_t i = 0; i < rows.size(); ++i) mean[i] += rows[i].result.report.mean("mAP") / 3.0;
  }
  return mean;
}

Outcome history_trend() {
  const auto m = seed_averaged(AblationAxis::kHistoryLength, {"10", "1"});
  Outcome o;
  o.pass = m[0] > m[1];
  o.detail = fmt("mAP m=10 %.4f", m[0]) + fmt(" vs m=1 %.4f", m[1]);
  return o;
}

Outcome modality_order() {
  const auto m = seed_averaged(AblationAxis::kModality, {"full", "visual", "text", "none"});
  Outcome o;
  o.pass = m[0] > m[1] && m[0] > m[2] && m[3] < m[1] && m[3] < m[2];
  o.detail = fmt("full %.4f", m[0]) + fmt(" visual %.4f", m[1]) + fmt(" text %.4f", m[2]) +
             fmt(" none %.4f", m[3]);
  return o;
}

// ---- 8: simulator determinism and schema ---------------------------------------------------

Outcome simulator_schema() {
  synth::WorldConfig wc;
  wc.seed = 8;
  wc.n_users = 20;
  wc.n_videos = 2000;
  const auto world = std::make_shared<const synth::SynthWorld>(synth::generate_world(wc));
  fixture::TempDir dir("acceptance8");
  const auto a = simulate_world(world, 8, 0);
  const auto b = simulate_world(world, 8, 1);
  save_dataset(a.records, dir.file("a.jsonl"));
  save_dataset(b.records, dir.file("b.jsonl"));
  Checker c;
  c.expect(a.errors.empty() && a.records.size() == 20, "expected 20 sessions");
  c.expect(fixture::read_file(dir.file("a.jsonl")) == fixture::read_file(dir.file("b.jsonl")),
           "runs differ");
  for (const auto& r : load_dataset(dir.file("a.jsonl"))) {
    const auto& s = r.session;
    c.expect(s.turns.size() == 10, s.session_id + " turn count");
    for (std::size_t t = 0; t < s.turns.size(); ++t) {
      c.expect(s.turns[t].preference_after.turn == static_cast<int>(t + 1), s.session_id + " turn order");
      const auto& cands = s.turns[t].candidates;
      c.expect(std::find(cands.begin(), cands.end(), s.turns[t].chosen.meta) != cands.end(),
               s.session_id + " chosen not a candidate");
    }
    c.expect(r.annotation.scores.size() == s.target().segments.size(), s.session_id + " score count");
    for (int x : r.annotation.scores) c.expect(x >= kMinScore && x <= kMaxScore, s.session_id + " score range");
  }
  if (c.out.pass) c.out.detail = "20 sessions, byte-identical";
  return c.out;
}

// ---- 9: gamma sweep through the CLI ----------------------------------------------------------

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome gamma_sweep() {
  fixture::TempDir dir("acceptance9");
  const std::string cli = PVH_CLI_PATH;
  const std::string log = " >> " + dir.file("log.txt") + " 2>&1";
  Checker c;
  c.expect(shell(cli + " synth --users 30 --videos 1000 --out " + dir.file("w.json") + log) == 0, "synth");
  c.expect(shell(cli + " simulate --seeds " + dir.file("w.json.seeds.json") + " --world " +
                 dir.file("w.json") + " --out " + dir.file("s.jsonl") + log) == 0,
           "simulate");
  c.expect(shell(cli + " annotate --sessions " + dir.file("s.jsonl") + " --world " + dir.file("w.json") +
                 " --out " + dir.file("d.jsonl") + log) == 0,
           "annotate");
  c.expect(shell(cli + " ablate --axis gamma --values 0.1,0.15,0.2,0.5,1.0 --data " + dir.file("d.jsonl") +
                 " --features latent --world " + dir.file("w.json") +
                 " --epochs 3 --hidden 16 --heads 1 --table " + dir.file("t.txt") + log) == 0,
           "ablate");
  if (!c.out.pass) return c.out;
  std::istringstream table(fixture::read_file(dir.file("t.txt")));
  std::vector<std::string> lines;
  for (std::string line; std::getline(table, line);) lines.push_back(line);
  c.expect(lines.size() == 6, std::to_string(lines.size()) + " table lines");
  const std::vector<std::string> want = {"0.1", "0.15", "0.2", "0.5", "1.0"};
  for (std::size_t i = 0; i + 1 < lines.size() && i < want.size(); ++i)
    c.expect(lines[i + 1].rfind(want[i] + " ", 0) == 0, "row " + std::to_string(i + 1));
  if (c.out.pass) c.out.detail = "5 rows";
  return c.out;
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0: no runtime limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "metric oracle equivalence", 10, metric_oracle},
      {2, "hand-checked vectors", 0, hand_examples},
      {3, "gradient check", 30, gradient},
      {4, "preference embedding properties", 0, embedding_properties},
      {5, "synthetic end-to-end learning", 600, end_to_end},
      {6, "history-length trend", 0, history_trend},
      {7, "modality ablation order", 0, modality_order},
      {8, "simulator determinism and schema", 30, simulator_schema},
      {9, "gamma sweep harness", 0, gamma_sweep},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  bool all_pass = true;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs > c.limit_s) {
      o.pass = false;
      o.detail += fmt(" | over the %.0f s limit", c.limit_s);
    }
    all_pass &= o.pass;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
