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

// pvh: command-line entry point for the personalized video highlighting
// pipeline (synthetic world, simulation, annotation, training, evaluation,
// analysis and ablations).

#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pvh/analysis.hpp"
#include "pvh/core_model.hpp"
#include "pvh/errors.hpp"
#include "pvh/features.hpp"
#include "pvh/hipher.hpp"
#include "pvh/pipeline.hpp"
#include "pvh/rng.hpp"
#include "pvh/simulator.hpp"
#include "pvh/synthworld.hpp"
#include "pvh/text.hpp"

namespace {

using nlohmann::json;
using namespace pvh;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Flags > config file > built-in defaults. Options write straight into their
// fields; after parsing, config values are applied to fields whose flag was
// not given.
class Layers {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& flag, T& field, const std::string& section,
                   const std::string& key, const std::string& help) {
    CLI::Option* opt = app->add_option(flag, field, help)->capture_default_str();
    apply_.push_back([opt, &field, section, key](const json& cfg) {
      if (opt->count() > 0) return;
      if (!cfg.contains(section) || !cfg.at(section).contains(key)) return;
      try {
        cfg.at(section).at(key).get_to(field);
      } catch (const json::exception& e) {
        throw ParseError(section + "." + key, e.what());
      }
    });
    return opt;
  }

  CLI::Option* add_flag(CLI::App* app, const std::string& flag, bool& field,
                        const std::string& section, const std::string& key,
                        const std::string& help) {
    CLI::Option* opt = app->add_flag(flag, field, help)->capture_default_str();
    apply_.push_back([opt, &field, section, key](const json& cfg) {
      if (opt->count() > 0) return;
      if (cfg.contains(section) && cfg.at(section).contains(key))
        field = cfg.at(section).at(key).get<bool>();
    });
    return opt;
  }

  void apply(const json& cfg) const {
    for (const auto& f : apply_) f(cfg);
  }

 private:
  std::vector<std::function<void(const json&)>> apply_;
};

struct Globals {
  std::uint64_t seed = 0;
  int jobs = 0;
  std::string config_path;
  json config = json::object();
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path, e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = text::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---- shared option groups ---------------------------------------------------------

struct FeatureOptions {
  std::string kind = "latent";
  std::string world;
  bool no_mirror = false;
  bool include_caption = false;
  int history_length = 0;
  std::string modality = "full";

  void add(CLI::App* app, Layers& L) {
    L.add(app, "--features", kind, "features", "kind", "Embedding provider: latent or hash")
        ->check(CLI::IsMember({"latent", "hash"}));
    L.add(app, "--world", world, "features", "world",
          "World dump for the latent provider")
        ->check(CLI::ExistingFile);
    L.add_flag(app, "--no-mirror", no_mirror, "features", "no_mirror",
               "Latent provider: use the raw latent instead of the mirrored [x, -x] lift");
    L.add_flag(app, "--include-caption", include_caption, "features", "include_caption",
               "Text block embeds caption + transcript instead of transcript only");
    L.add(app, "--history-length", history_length, "features", "history_length",
          "Most recent history videos used for e_p (0 = all)");
    L.add(app, "--modality", modality, "features", "modality",
          "Feature blocks kept: full, visual, text, none")
        ->check(CLI::IsMember({"full", "visual", "text", "none"}));
  }

  std::shared_ptr<const EmbeddingProvider> provider() const {
    if (kind == "hash") return std::make_shared<HashEmbeddingProvider>();
    if (world.empty()) throw ValidationError("--features latent needs --world");
    auto w = std::make_shared<synth::SynthWorld>(synth::load_world(world));
    return std::make_shared<synth::LatentEmbeddingProvider>(std::move(w), !no_mirror);
  }

  ExampleOptions examples() const {
    ExampleOptions o;
    o.history_length = history_length;
    o.features = modality_features(modality);
    o.features.include_caption = include_caption;
    return o;
  }

  json to_json() const {
    return {{"kind", kind},
            {"world", world},
            {"mirror", !no_mirror},
            {"include_caption", include_caption},
            {"history_length", history_length},
            {"modality", modality}};
  }
};

struct ModelOptions {
  hipher::ModelConfig model;
  hipher::TrainConfig train;
  bool no_positional = false;

  void add(CLI::App* app, Layers& L) {
    L.add(app, "--hidden", model.hidden_dim, "model", "hidden_dim", "Hidden width");
    L.add(app, "--heads", model.heads, "model", "heads", "Attention heads");
    L.add(app, "--encoder-layers", model.encoder_layers, "model", "encoder_layers",
          "Self-attention encoder layers");
    L.add(app, "--ffn", model.ffn_dim, "model", "ffn_dim", "Encoder feed-forward width");
    L.add(app, "--projection-layers", model.projection_layers, "model", "projection_layers",
          "LayerNorm/dropout/linear blocks in each projection stack");
    L.add(app, "--dropout", model.dropout, "model", "dropout", "Dropout rate");
    L.add_flag(app, "--no-positional", no_positional, "model", "no_positional",
               "Disable sinusoidal positions on target segments");
    L.add(app, "--gamma", train.gamma, "train", "gamma", "Hinge margin");
    L.add(app, "--epochs", train.epochs, "train", "epochs", "Training epochs");
    L.add(app, "--lr", train.learning_rate, "train", "learning_rate", "Adam learning rate");
    L.add(app, "--batch", train.batch_size, "train", "batch_size", "Videos per step");
    L.add(app, "--max-pairs", train.max_pairs, "train", "max_pairs", "Pair cap per video");
    L.add(app, "--pair-gap", train.pair_gap, "train", "pair_gap",
          "Minimum ground-truth gap of a training pair");
    L.add(app, "--mse-weight", train.mse_weight, "train", "mse_weight",
          "Weight of the auxiliary regression toward gt/10");
  }

  void finalize(const Globals& g) {
    model.positional_encoding = !no_positional;
    model.gamma = train.gamma;
    train.seed = derive_seed(g.seed, "train");
    train.jobs = g.jobs;
  }
};

std::shared_ptr<const sim::LanguageModel> http_lm(const std::string& base_url,
                                                  const std::string& model) {
  sim::HttpLanguageModel::Options o;
  o.base_url = base_url;
  o.model = model;
  return std::make_shared<sim::HttpLanguageModel>(o);
}

// Synthetic user index of a seed or session id ("u0012" -> 12), else fallback.
int user_index(const std::string& id, int fallback, int n_users) {
  if (id.size() > 1 && id[0] == 'u' &&
      id.find_first_not_of("0123456789", 1) == std::string::npos) {
    const int i = std::stoi(id.substr(1));
    if (i < n_users) return i;
  }
  return fallback % n_users;
}

// ---- commands ---------------------------------------------------------------------

struct SynthCmd {
  synth::WorldConfig world;
  std::string out, seeds_out;

  void add(CLI::App* app, Layers& L) {
    app->add_option("--out", out, "World dump to write")->required();
    app->add_option("--seeds-out", seeds_out, "Profile seeds to write (default <out>.seeds.json)");
    L.add(app, "--users", world.n_users, "world", "n_users", "Number of users");
    L.add(app, "--videos", world.n_videos, "world", "n_videos", "Catalog size");
    L.add(app, "--dim", world.dim, "world", "dim", "Latent dimension");
    L.add(app, "--m", world.m, "world", "m", "Turns per session");
    L.add(app, "--n", world.n, "world", "n", "Segments per video");
    L.add(app, "--l", world.l, "world", "l", "Candidates per turn");
    L.add(app, "--keywords", world.n_keywords, "world", "n_keywords", "Search keywords");
    L.add(app, "--query-keywords", world.query_keywords, "world", "query_keywords",
          "Keywords per mock search query");
    L.add(app, "--alpha", world.alpha, "world", "alpha", "Topic weight in segment latents");
    L.add(app, "--noise-scale", world.noise_scale, "world", "noise_scale",
          "Per-coordinate segment noise std");
    L.add(app, "--drift-min", world.drift_min, "world", "drift_min", "Lowest Explore threshold");
    L.add(app, "--drift-max", world.drift_max, "world", "drift_max", "Highest Explore threshold");
  }

  int run(const Globals& g) {
    if (!g.config.contains("world") || !g.config.at("world").contains("seed"))
      world.seed = g.seed;
    else
      world.seed = g.config.at("world").at("seed").get<std::uint64_t>();
    const synth::SynthWorld w = synth::generate_world(world);
    synth::save_world(w, out);
    const std::string seeds_path = seeds_out.empty() ? out + ".seeds.json" : seeds_out;
    save_profile_seeds(synth::world_seeds(w), seeds_path);
    std::cerr << "world: " << w.users.size() << " users, " << w.videos.size() << " videos -> "
              << out << "; seeds -> " << seeds_path << "\n";
    return 0;
  }
};

struct SimulateCmd {
  std::string seeds, out, llm = "mock", world, catalog, base_url = "http://127.0.0.1:8000";
  std::string model_name = "gpt-4o-mini";
  std::size_t m = 10, l = 8;

  void add(CLI::App* app, Layers& L) {
    app->add_option("--seeds", seeds, "Profile seeds (JSON array)")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "Sessions file to write (JSON lines)")->required();
    L.add(app, "--llm", llm, "simulate", "llm", "Language model: mock or http")
        ->check(CLI::IsMember({"mock", "http"}));
    L.add(app, "--world", world, "simulate", "world", "World dump (mock)")->check(CLI::ExistingFile);
    L.add(app, "--catalog", catalog, "simulate", "catalog", "Fixture catalog directory (http)")
        ->check(CLI::ExistingDirectory);
    L.add(app, "--base-url", base_url, "simulate", "base_url", "Chat-completions endpoint (http)");
    L.add(app, "--model-name", model_name, "simulate", "model_name", "Remote model name (http)");
    L.add(app, "--m", m, "simulate", "m", "Turns per session");
    L.add(app, "--l", l, "simulate", "l", "Candidates per turn");
  }

  int run(const Globals& g) {
    const auto profile_seeds = load_profile_seeds(seeds);
    sim::SessionParams params{l, m};
    std::function<sim::Ports(std::size_t)> ports_for;
    std::shared_ptr<const synth::SynthWorld> w;
    if (llm == "mock") {
      if (world.empty()) throw ValidationError("--llm mock needs --world");
      w = std::make_shared<synth::SynthWorld>(synth::load_world(world));
      ports_for = [&](std::size_t i) {
        const std::string id = profile_seeds[i].extra.value("session_id", std::string());
        return synth::mock_ports(
            w, user_index(id, static_cast<int>(i), static_cast<int>(w->users.size())));
      };
    } else {
      if (catalog.empty()) throw ValidationError("--llm http needs --catalog");
      sim::Ports shared{http_lm(base_url, model_name),
                        std::make_shared<sim::FixtureCatalog>(catalog)};
      ports_for = [shared](std::size_t) { return shared; };
    }
    const auto batch =
        sim::run_sessions(profile_seeds, ports_for, params, derive_seed(g.seed, "simulate"), g.jobs);
    save_sessions(batch.sessions, out);
    for (const auto& e : batch.errors) std::cerr << "session failed: " << e << "\n";
    std::cerr << batch.sessions.size() << " sessions -> " << out << "\n";
    return batch.errors.empty() ? 0 : kExitRuntime;
  }
};

struct AnnotateCmd {
  std::string sessions, out, llm = "mock", world, base_url = "http://127.0.0.1:8000";
  std::string model_name = "gpt-4o-mini";

  void add(CLI::App* app, Layers& L) {
    app->add_option("--sessions", sessions, "Sessions file (JSON lines)")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "Dataset file to write (JSON lines)")->required();
    L.add(app, "--llm", llm, "annotate", "llm", "Language model: mock or http")
        ->check(CLI::IsMember({"mock", "http"}));
    L.add(app, "--world", world, "annotate", "world", "World dump (mock)")->check(CLI::ExistingFile);
    L.add(app, "--base-url", base_url, "annotate", "base_url", "Chat-completions endpoint (http)");
    L.add(app, "--model-name", model_name, "annotate", "model_name", "Remote model name (http)");
  }

  int run(const Globals& g) {
    const auto all = load_sessions(sessions);
    std::shared_ptr<const synth::SynthWorld> w;
    std::shared_ptr<const sim::LanguageModel> remote;
    if (llm == "mock") {
      if (world.empty()) throw ValidationError("--llm mock needs --world");
      w = std::make_shared<synth::SynthWorld>(synth::load_world(world));
    } else {
      remote = http_lm(base_url, model_name);
    }
    std::vector<DatasetRecord> records(all.size());
    std::vector<std::string> errors(all.size());
    const auto n = static_cast<std::ptrdiff_t>(all.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(g.jobs > 0 ? g.jobs : omp_get_max_threads())
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto& s = all[static_cast<std::size_t>(i)];
      try {
        std::shared_ptr<const sim::LanguageModel> lm = remote;
        if (w)
          lm = std::make_shared<synth::SynthLanguageModel>(
              w, user_index(s.session_id, static_cast<int>(i), static_cast<int>(w->users.size())));
        records[static_cast<std::size_t>(i)] = {
            s, sim::annotate_saliency(s, *lm, derive_seed(g.seed, "annotate/" + s.session_id)),
            json::object()};
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(i)] = s.session_id + ": " + e.what();
      }
    }
    std::vector<DatasetRecord> ok;
    int failed = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (errors[i].empty()) {
        ok.push_back(std::move(records[i]));
      } else {
        ++failed;
        std::cerr << "annotation failed: " << errors[i] << "\n";
      }
    }
    save_dataset(ok, out, 0);
    std::cerr << ok.size() << " records -> " << out << "\n";
    return failed == 0 ? 0 : kExitRuntime;
  }
};

// Shared by train and ablate: resolves the training / held-out records.
struct DataOptions {
  std::string data, test_data, holdout_out;
  double holdout = 0.0;

  void add(CLI::App* app, Layers& L, bool require_test) {
    app->add_option("--data", data, "Dataset file (JSON lines)")->required()->check(CLI::ExistingFile);
    app->add_option("--test-data", test_data, "Held-out dataset file")->check(CLI::ExistingFile);
    L.add(app, "--holdout", holdout, "data", "holdout",
          require_test ? "Held-out fraction when --test-data is absent"
                       : "Held-out fraction (0 = train on everything)");
    app->add_option("--holdout-out", holdout_out, "Write the held-out records here");
  }

  std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> load(std::uint64_t seed) const {
    auto records = load_dataset(data);
    if (!test_data.empty()) return {std::move(records), load_dataset(test_data)};
    if (holdout <= 0.0) return {std::move(records), {}};
    SplitResult split = split_dataset(records, 1.0 - holdout, derive_seed(seed, "split"));
    for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";
    if (!holdout_out.empty()) save_dataset(split.test, holdout_out, 0);
    return {std::move(split.train), std::move(split.test)};
  }

  json to_json() const {
    return {{"data", data}, {"test_data", test_data}, {"holdout", holdout}};
  }
};

json run_header(const std::string& command, const Globals& g) {
  json header = {{"command", command}, {"seed", g.seed}, {"jobs", g.jobs}, {"config_file", g.config_path}};
  return {{"run_header", header}};
}

void print_summary(const metrics::EvalReport& r) {
  for (const auto& name : r.metric_names) {
    const auto& s = r.summary.at(name);
    std::printf("%-8s %.4f  (%zu videos, %zu excluded)\n", name.c_str(), s.mean, s.included,
                s.excluded);
  }
}

struct TrainCmd {
  DataOptions data;
  FeatureOptions features;
  ModelOptions model;
  std::string out, report;

  void add(CLI::App* app, Layers& L) {
    data.add(app, L, false);
    features.add(app, L);
    model.add(app, L);
    app->add_option("--out", out, "Checkpoint to write")->required();
    app->add_option("--report", report, "Training report (JSON)");
  }

  int run(const Globals& g) {
    model.finalize(g);
    const auto [train_records, test_records] = data.load(g.seed);
    const auto provider = features.provider();
    const auto opts = features.examples();
    const auto train_ex = build_examples(train_records, *provider, opts, g.jobs);
    hipher::ModelConfig mc = model.model;
    mc.input_dim = provider->dims().first + provider->dims().second;
    hipher::Model m(mc, derive_seed(g.seed, "model"));
    const auto result = hipher::train(m, train_ex, model.train);
    m.save(out);
    std::fprintf(stderr, "trained on %zu videos (%zu skipped); loss %.4f -> %.4f; -> %s\n",
                 result.supervised_videos, result.skipped_videos, result.loss_trace.front(),
                 result.loss_trace.back(), out.c_str());
    json rep = run_header("train", g);
    rep["config"] = {{"model", mc.to_json()},
                     {"train", model.train.to_json()},
                     {"features", features.to_json()},
                     {"data", data.to_json()}};
    rep["loss_trace"] = result.loss_trace;
    rep["supervised_videos"] = result.supervised_videos;
    rep["skipped_videos"] = result.skipped_videos;
    if (!test_records.empty()) {
      const auto test_ex = build_examples(test_records, *provider, opts, g.jobs);
      const auto r = hipher::evaluate_model(m, test_ex, {}, false, g.jobs);
      print_summary(r);
      rep["holdout"] = r.to_json();
    }
    if (!report.empty()) write_json(report, rep);
    return 0;
  }
};

struct EvaluateCmd {
  std::string ckpt, data, report;
  FeatureOptions features;
  metrics::EvalConfig eval;
  bool zero_preference = false;

  void add(CLI::App* app, Layers& L) {
    app->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    app->add_option("--data", data, "Dataset file (JSON lines)")->required()->check(CLI::ExistingFile);
    app->add_option("--report", report, "Evaluation report (JSON)");
    features.add(app, L);
    L.add(app, "--tau", eval.moment_tau, "eval", "moment_tau", "Moment extraction threshold");
    L.add(app, "--map-threshold", eval.map_threshold, "eval", "map_threshold",
          "Ground-truth score counted as relevant for mAP");
    L.add_flag(app, "--zero-preference", zero_preference, "eval", "zero_preference",
               "Replace e_p with the zero vector");
  }

  int run(const Globals& g) {
    const hipher::Model m = hipher::Model::load(ckpt);
    const auto provider = features.provider();
    const int dim = provider->dims().first + provider->dims().second;
    if (dim != m.config().input_dim)
      throw DimensionError("checkpoint expects input_dim " + std::to_string(m.config().input_dim) +
                           " but the " + features.kind + " features have dimension " +
                           std::to_string(dim));
    const auto examples = build_examples(load_dataset(data), *provider, features.examples(), g.jobs);
    const auto r = hipher::evaluate_model(m, examples, eval, zero_preference, g.jobs);
    print_summary(r);
    if (!report.empty()) {
      json rep = run_header("evaluate", g);
      rep["config"] = {{"ckpt", ckpt},
                       {"data", data},
                       {"model", m.config().to_json()},
                       {"features", features.to_json()},
                       {"zero_preference", zero_preference},
                       {"eval", eval.to_json()}};
      rep["results"] = r.to_json();
      write_json(report, rep);
    }
    return 0;
  }
};

struct AnalyzeCmd {
  std::string data, stats_out, embeddings_out, report;
  FeatureOptions features;

  void add(CLI::App* app, Layers& L) {
    app->add_option("--data", data, "Dataset file (JSON lines)")->required()->check(CLI::ExistingFile);
    app->add_option("--stats-out", stats_out, "Per-session stats table (CSV)");
    app->add_option("--embeddings-out", embeddings_out, "History embedding table (CSV)");
    app->add_option("--report", report, "Summary report (JSON)");
    features.add(app, L);
  }

  int run(const Globals& g) {
    const auto records = load_dataset(data);
    std::vector<analysis::SessionStats> rows;
    double expl = 0.0, mean = 0.0, sd = 0.0;
    for (const auto& r : records) {
      analysis::SessionStats s{r.session.session_id, analysis::exploration_ratio(r.session),
                               analysis::score_stats(r.annotation)};
      expl += s.exploration;
      mean += s.scores.mean;
      sd += s.scores.std;
      rows.push_back(s);
    }
    const double n = records.empty() ? 1.0 : static_cast<double>(records.size());
    std::printf("sessions %zu  exploration %.4f  score mean %.4f  score std %.4f\n",
                records.size(), expl / n, mean / n, sd / n);
    if (!stats_out.empty()) {
      std::ostringstream os;
      analysis::write_stats_csv(rows, os);
      write_text(stats_out, os.str());
    }
    std::size_t skipped = 0;
    if (!embeddings_out.empty()) {
      std::vector<WatchSession> sessions;
      for (const auto& r : records) sessions.push_back(r.session);
      const auto table =
          analysis::export_history_embeddings(sessions, *features.provider(), g.jobs);
      for (const auto& s : table.skipped) std::cerr << "skipped: " << s << "\n";
      skipped = table.skipped.size();
      std::ostringstream os;
      analysis::write_embeddings_csv(table, os);
      write_text(embeddings_out, os.str());
    }
    if (!report.empty()) {
      json rep = run_header("analyze", g);
      rep["config"] = {{"data", data}, {"features", features.to_json()}};
      rep["results"] = {{"sessions", records.size()},
                        {"mean_exploration_ratio", expl / n},
                        {"mean_score_mean", mean / n},
                        {"mean_score_std", sd / n},
                        {"embeddings_skipped", skipped}};
      write_json(report, rep);
    }
    return 0;
  }
};

struct AblateCmd {
  std::string axis, values, report, table_out;
  DataOptions data;
  FeatureOptions features;
  ModelOptions model;

  void add(CLI::App* app, Layers& L) {
    app->add_option("--axis", axis, "history_length, modality or gamma")
        ->required()
        ->check(CLI::IsMember({"history_length", "modality", "gamma"}));
    app->add_option("--values", values, "Comma-separated values along the axis")->required();
    app->add_option("--report", report, "Ablation report (JSON)");
    app->add_option("--table", table_out, "Comparison table (text)");
    data.holdout = 0.3;
    data.add(app, L, true);
    features.add(app, L);
    model.add(app, L);
  }

  int run(const Globals& g) {
    model.finalize(g);
    auto [train_records, test_records] = data.load(g.seed);
    if (test_records.empty()) throw ValidationError("ablate needs --test-data or --holdout > 0");
    const auto provider = features.provider();
    ExperimentConfig base;
    base.model = model.model;
    base.train = model.train;
    base.examples = features.examples();
    base.model_seed = derive_seed(g.seed, "model");
    base.jobs = g.jobs;
    const AblationAxis ax = ablation_axis_from_string(axis);
    const auto rows = run_ablation(train_records, test_records, *provider, ax, split_list(values), base);
    const std::string table = ablation_table(ax, rows);
    std::cout << table;
    if (!table_out.empty()) write_text(table_out, table);
    if (!report.empty()) {
      json rep = run_header("ablate", g);
      rep["config"] = {{"axis", axis},
                       {"values", split_list(values)},
                       {"base", base.to_json()},
                       {"features", features.to_json()},
                       {"data", data.to_json()}};
      json out = json::array();
      for (const auto& r : rows)
        out.push_back({{"value", r.value},
                       {"loss_trace", r.result.training.loss_trace},
                       {"results", r.result.report.to_json()}});
      rep["rows"] = out;
      write_json(report, rep);
    }
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pvh: personalized video highlighting pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  Layers L;
  app.add_option("--seed", g.seed, "Global seed; stage seeds derive from it")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads (0 = OpenMP default)")->capture_default_str();
  app.add_option("--config", g.config_path, "Config file (JSON); flags take precedence")
      ->check(CLI::ExistingFile);

  SynthCmd synth_cmd;
  SimulateCmd simulate_cmd;
  AnnotateCmd annotate_cmd;
  TrainCmd train_cmd;
  EvaluateCmd evaluate_cmd;
  AnalyzeCmd analyze_cmd;
  AblateCmd ablate_cmd;
  std::vector<std::pair<CLI::App*, std::function<int(const Globals&)>>> commands;
  auto reg = [&](const char* name, const char* help, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    cmd.add(sub, L);
    commands.emplace_back(sub, [&cmd](const Globals& gl) { return cmd.run(gl); });
  };
  reg("synth", "Generate a synthetic world and its profile seeds", synth_cmd);
  reg("simulate", "Run watch sessions from profile seeds", simulate_cmd);
  reg("annotate", "Annotate session targets with saliency scores", annotate_cmd);
  reg("train", "Train a scorer on a dataset", train_cmd);
  reg("evaluate", "Score a dataset with a checkpoint and report metrics", evaluate_cmd);
  reg("analyze", "Exploration ratios, score statistics, history embeddings", analyze_cmd);
  reg("ablate", "Train variants along one axis and compare them", ablate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (!g.config_path.empty()) {
      g.config = read_json_file(g.config_path);
      if (!g.config.is_object()) throw ParseError(g.config_path, "config must be a JSON object");
      if (!app.get_option("--seed")->count() && g.config.contains("seed"))
        g.seed = g.config.at("seed").get<std::uint64_t>();
      if (!app.get_option("--jobs")->count() && g.config.contains("jobs"))
        g.jobs = g.config.at("jobs").get<int>();
    }
    L.apply(g.config);
    for (auto& [sub, run] : commands)
      if (sub->parsed()) return run(g);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
