// Copyright 2026 The pedcross Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// pedcross command-line driver.
//
// Exit status: 0 success, 1 runtime or validation failure, 2 usage error.
// Failures print one line "error: <kind>: <message>" to stderr. Data goes to
// stdout or files, progress to stderr.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pedcross.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pedcross {
namespace {

constexpr const char* kCorpusEnv = "PEDCROSS_CORPUS";

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& msg) : Error("usage", msg) {}
};

// Values from a JSON config file fill every option of `sub` that was not
// given on the command line. Keys are long flag names without dashes.
void ApplyConfigFile(CLI::App& sub, const std::string& path) {
  if (path.empty()) return;
  const json cfg = io::ReadJsonFile(path);
  if (!cfg.is_object()) throw ConfigError(path + ": config must be a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    if (key == "config") continue;
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (!opt) throw ConfigError(path + ": unknown key '" + key + "' for " + sub.get_name());
    if (opt->count() > 0) continue;
    auto text = [](const json& v) {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
      return v.dump();
    };
    if (value.is_array())
      for (const auto& v : value) opt->add_result(text(v));
    else
      opt->add_result(text(value));
    opt->run_callback();
  }
}

fs::path ResolveCorpus(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kCorpusEnv); env && *env) return env;
  throw UsageError(std::string("no corpus given (use --corpus or set ") + kCorpusEnv + ")");
}

void WriteText(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

struct CommonOptions {
  std::string config;
  std::string corpus;
};

struct PipelineOptions {
  SamplingOptions sampling;
  double ratio = 0.7;
  std::uint64_t split_seed = 0;
  std::string split_file;
  double iou = 0.3;
  double blend = 0.5;
};

void AddPipelineOptions(CLI::App* sub, PipelineOptions& p, bool with_split_file) {
  sub->add_option("--tte-min", p.sampling.tte_min, "minimum time-to-event, frames");
  sub->add_option("--tte-max", p.sampling.tte_max, "maximum time-to-event, frames");
  sub->add_option("--stride", p.sampling.stride, "window stride, frames");
  sub->add_option("--ratio", p.ratio, "train fraction per class");
  sub->add_option("--split-seed", p.split_seed, "split shuffle seed");
  sub->add_option("--iou", p.iou, "detection matching IoU threshold");
  sub->add_option("--blend", p.blend, "projected/detection blend weight");
  if (with_split_file)
    sub->add_option("--split", p.split_file, "reuse a split manifest written by 'sample'");
}

void AddModelOptions(CLI::App* sub, ModelConfig& c, std::string& modalities) {
  sub->add_option("--modalities", modalities, "all, or a comma list of scene,map,traj,ego");
  sub->add_option("--image-side", c.image_side, "scene and raster side, pixels");
  sub->add_option("--obs-len", c.obs_len, "observation length, frames");
  sub->add_option("--lstm-units", c.lstm_units, "cells per LSTM");
  sub->add_option("--dense-hidden", c.dense_hidden, "hidden dense width");
  sub->add_option("--dropout", c.dropout_p, "dropout probability");
  sub->add_option("--lr", c.learning_rate, "RMSProp learning rate");
  sub->add_option("--batch-size", c.batch_size, "mini-batch size");
  sub->add_option("--epochs", c.epochs, "training epochs");
  sub->add_option("--seed", c.seed, "model and training seed");
}

PreparedCorpus Prepare(const std::vector<SceneBundle>& bundles, const PipelineOptions& p) {
  DensifyOptions d;
  d.iou_threshold = p.iou;
  d.blend = p.blend;
  PreparedCorpus pc = PrepareCorpus(bundles, p.sampling, p.ratio, p.split_seed, d);
  if (!p.split_file.empty()) {
    pc.split = SplitManifestFromJson(io::ReadJsonFile(p.split_file));
    const std::set<std::string> train(pc.split.train_track_ids.begin(),
                                      pc.split.train_track_ids.end());
    const std::set<std::string> test(pc.split.test_track_ids.begin(),
                                     pc.split.test_track_ids.end());
    pc.train.clear();
    pc.test.clear();
    for (const auto& s : pc.samples) {
      if (train.count(s.track_key())) pc.train.push_back(s);
      else if (test.count(s.track_key())) pc.test.push_back(s);
    }
  }
  return pc;
}

int RunGen(const SyntheticSpec& spec, const std::string& out_flag) {
  const fs::path out = ResolveCorpus(out_flag);
  const auto bundles = GenerateSynthetic(spec, out);
  const auto stats = ComputeCorpusStats(bundles);
  std::fprintf(stderr, "gen: wrote %zu bundles to %s (%lld crossing, %lld non-crossing)\n",
               bundles.size(), out.string().c_str(),
               static_cast<long long>(stats.crossing),
               static_cast<long long>(stats.non_crossing));
  return 0;
}

json StatsToJson(const CorpusStats& s) {
  return {{"with_behavior", s.with_behavior},
          {"crossing", s.crossing},
          {"non_crossing", s.non_crossing},
          {"per_frame_behavior", s.per_frame_behavior},
          {"pedestrian_boxes", s.pedestrian_boxes},
          {"other_boxes", s.other_boxes}};
}

int RunValidate(const fs::path& corpus) {
  if (!fs::is_directory(corpus)) throw LoadError("missing corpus directory " + corpus.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(corpus))
    if (e.is_directory() && fs::exists(e.path() / "meta.json")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<SceneBundle> bundles;
  std::size_t violations = 0;
  for (const auto& d : dirs) {
    try {
      bundles.push_back(LoadBundle(d));
    } catch (const ValidationError& e) {
      for (const auto& v : e.violations()) std::cerr << d.filename().string() << ": " << v << "\n";
      violations += e.violations().size();
      continue;
    } catch (const LoadError& e) {
      std::cerr << d.filename().string() << ": " << e.what() << "\n";
      ++violations;
      continue;
    }
    for (const auto& v : ValidateLabels(bundles.back())) {
      std::cerr << v << "\n";
      ++violations;
    }
  }
  const CorpusStats stats = ComputeCorpusStats(bundles);
  if (!stats.Consistent()) {
    std::cerr << "corpus_stats: crossing + non_crossing != with_behavior\n";
    ++violations;
  }
  json out = {{"bundles", dirs.size()}, {"violations", violations},
              {"stats", StatsToJson(stats)}};
  std::cout << out.dump(2) << "\n";
  if (violations)
    throw ValidationError({std::to_string(violations) + " violation(s) in " + corpus.string()});
  return 0;
}

int RunDensify(const fs::path& corpus, const std::string& out_flag, const PipelineOptions& p) {
  const fs::path out = out_flag.empty() ? corpus / "dense" : fs::path(out_flag);
  fs::create_directories(out);
  DensifyOptions d;
  d.iou_threshold = p.iou;
  d.blend = p.blend;
  for (const auto& b : LoadCorpus(corpus)) {
    const auto dense = DensifyBundle(b, d);
    WriteDenseTracks(out / (b.bundle_id + ".json"), dense);
    std::fprintf(stderr, "densify: %s (%zu tracks)\n", b.bundle_id.c_str(), dense.size());
  }
  return 0;
}

int RunRasterize(const fs::path& corpus, const std::string& out_flag, int side) {
  const fs::path out = out_flag.empty() ? corpus / "rasters" : fs::path(out_flag);
  const RasterConfig config = RasterConfig::WithSide(side);
  for (const auto& b : LoadCorpus(corpus)) {
    const fs::path dir = out / b.bundle_id;
    fs::create_directories(dir);
    for (int f = 0; f < b.frame_count(); ++f) {
      const MapRaster r = RasterizeFrame(b.map_layers, b.ego_states[f], config, f);
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%05d.ppm", f);
      WritePpm(dir / name, r.pixels);
    }
    std::fprintf(stderr, "rasterize: %s (%d frames)\n", b.bundle_id.c_str(), b.frame_count());
  }
  return 0;
}

int RunSample(const fs::path& corpus, const std::string& out_flag, const PipelineOptions& p) {
  const fs::path out = out_flag.empty() ? corpus / "samples" : fs::path(out_flag);
  fs::create_directories(out);
  const auto bundles = LoadCorpus(corpus);
  const PreparedCorpus pc = Prepare(bundles, p);
  io::WriteJsonFile(out / "split.json", ToJson(pc.split));
  // One record per sample, numbered in corpus order; stale records from an
  // earlier run are removed first.
  const fs::path dir = out / "samples";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::set<std::string> train(pc.split.train_track_ids.begin(),
                                    pc.split.train_track_ids.end());
  for (std::size_t i = 0; i < pc.samples.size(); ++i) {
    json rec = ToJson(pc.samples[i]);
    rec["split"] = train.count(pc.samples[i].track_key()) ? "train" : "test";
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.json", i);
    io::WriteJsonFile(dir / name, rec);
  }
  std::fprintf(stderr, "sample: %zu train / %zu test samples, %d+%d train tracks, %d+%d test tracks\n",
               pc.train.size(), pc.test.size(), pc.split.train_positive,
               pc.split.train_negative, pc.split.test_positive, pc.split.test_negative);
  return 0;
}

int RunTrain(const fs::path& corpus, ModelConfig config, const PipelineOptions& p,
             const std::string& report_path, const std::string& checkpoint) {
  config.Validate();
  PipelineOptions pp = p;
  pp.sampling.obs_len = config.obs_len;
  const auto bundles = LoadCorpus(corpus);
  const PreparedCorpus pc = Prepare(bundles, pp);
  const ClassWeights w = ComputeClassWeights(pc.train);
  HybridModel model(config);
  const auto train = MaterializeExamples(pc.train, bundles, config);
  const auto test = MaterializeExamples(pc.test, bundles, config);
  std::fprintf(stderr, "train: %zu train / %zu test samples, %zu parameters\n",
               train.size(), test.size(), model.parameter_count());
  const TrainReport report = Train(model, train, w, test);
  if (!checkpoint.empty()) {
    const auto specs = model.layer_specs();
    const auto params = model.parameters();
    nn::SaveCheckpoint(checkpoint, specs, params, {{"config", ToJson(config)}});
  }
  WriteText(report_path, ToJson(report).dump(2) + "\n");
  return 0;
}

int RunAblate(const fs::path& corpus, ModelConfig config, const PipelineOptions& p,
              const std::string& table_path, const std::string& json_path,
              const std::string& only) {
  PipelineOptions pp = p;
  pp.sampling.obs_len = config.obs_len;
  const auto bundles = LoadCorpus(corpus);
  const PreparedCorpus pc = Prepare(bundles, pp);
  std::vector<AblationEntry> grid;
  for (const auto& e : DefaultAblationGrid())
    if (only.empty() || only == e.name) grid.push_back(e);
  if (grid.empty()) throw UsageError("unknown ablation row '" + only + "'");
  const auto rows = RunAblation(pc.train, pc.test, bundles, config, grid, stderr);
  if (!json_path.empty()) io::WriteJsonFile(json_path, AblationToJson(rows));
  WriteText(table_path, AblationTable(rows));
  return 0;
}

int RunGradCheck(int side, int obs_len, std::size_t entries, std::uint64_t seed,
                 double tolerance) {
  ModelConfig c;
  c.image_side = side;
  c.obs_len = obs_len;
  c.seed = seed;
  HybridModel model(c);
  Xorshift64 rng(seed + 1);
  const std::size_t n = 2, t = obs_len, s = side;
  Batch b;
  auto random = [&](nn::Shape shape, double lo, double hi) {
    nn::Tensor x(std::move(shape));
    for (double& v : x.values()) v = rng.Uniform(lo, hi);
    return x;
  };
  b.scene = random({n, 3 * t, s, s}, 0.0, 1.0);
  b.map = random({n, 3 * t, s, s}, 0.0, 1.0);
  b.trajectory = random({n, t, 2}, -1.0, 1.0);
  b.ego = random({n, t, 3}, -2.0, 2.0);
  b.labels = {1, 0};
  auto loss = [&](nn::Tape& tape) {
    Xorshift64 unused(0);
    return nn::WeightedBce(model.Forward(tape, b, nn::Mode::kEval, unused), b.labels, 1.5, 0.75);
  };
  nn::GradCheckOptions opt;
  opt.max_entries_per_param = entries;
  opt.seed = seed;
  const auto params = model.parameters();
  const auto r = nn::GradCheck(loss, params, opt);
  json out = {{"max_relative_error", r.max_relative_error},
              {"worst_parameter", r.worst_parameter},
              {"worst_index", r.worst_index},
              {"entries_checked", r.entries_checked},
              {"entries_refined", r.entries_refined},
              {"entries_on_kink", r.entries_on_kink},
              {"tolerance", tolerance},
              {"passed", r.Passed(tolerance)}};
  std::cout << out.dump(2) << "\n";
  if (!r.Passed(tolerance))
    throw ValidationError({"gradient check failed: max relative error " +
                           std::to_string(r.max_relative_error)});
  return 0;
}

int Main(int argc, char** argv) {
  CLI::App app{"pedcross: pedestrian crossing-action prediction pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "pedcross 1.0.0");

  CommonOptions gen_c, val_c, den_c, ras_c, sam_c, tr_c, ab_c, gc_c;

  SyntheticSpec spec;
  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  gen->add_option("--config", gen_c.config, "JSON file of option values");
  gen->add_option("--out", gen_c.corpus, "output corpus directory");
  gen->add_option("--bundles", spec.n_bundles, "number of bundles");
  gen->add_option("--frames", spec.frames_per_bundle, "frames per bundle");
  gen->add_option("--peds", spec.peds_per_bundle, "pedestrians per bundle");
  gen->add_option("--crossing-fraction", spec.crossing_fraction, "share of crossers");
  gen->add_option("--image-side", spec.image_side, "scene image side, pixels");
  gen->add_option("--map-extent", spec.map_extent, "road length, metres");
  gen->add_option("--vehicles", spec.vehicles_per_bundle, "parked vehicles per bundle");
  gen->add_option("--seed", spec.seed, "generator seed");

  auto* val = app.add_subcommand("validate", "check bundles, labels and corpus statistics");
  val->add_option("--config", val_c.config, "JSON file of option values");
  val->add_option("--corpus", val_c.corpus, "corpus directory");

  PipelineOptions den_p;
  std::string den_out;
  auto* den = app.add_subcommand("densify", "interpolate and adjust boxes at 10Hz");
  den->add_option("--config", den_c.config, "JSON file of option values");
  den->add_option("--corpus", den_c.corpus, "corpus directory");
  den->add_option("--out", den_out, "output directory (default <corpus>/dense)");
  den->add_option("--iou", den_p.iou, "detection matching IoU threshold");
  den->add_option("--blend", den_p.blend, "projected/detection blend weight");

  std::string ras_out;
  int ras_side = 300;
  auto* ras = app.add_subcommand("rasterize", "export ego-centred map rasters");
  ras->add_option("--config", ras_c.config, "JSON file of option values");
  ras->add_option("--corpus", ras_c.corpus, "corpus directory");
  ras->add_option("--out", ras_out, "output directory (default <corpus>/rasters)");
  ras->add_option("--side", ras_side, "raster side, pixels (30 m extent)");

  PipelineOptions sam_p;
  std::string sam_out;
  auto* sam = app.add_subcommand("sample", "clip, sample and split into manifests");
  sam->add_option("--config", sam_c.config, "JSON file of option values");
  sam->add_option("--corpus", sam_c.corpus, "corpus directory");
  sam->add_option("--out", sam_out, "output directory (default <corpus>/samples)");
  sam->add_option("--obs-len", sam_p.sampling.obs_len, "observation length, frames");
  AddPipelineOptions(sam, sam_p, false);

  PipelineOptions tr_p;
  ModelConfig tr_m;
  std::string tr_mod = "all", tr_report, tr_ckpt;
  auto* tr = app.add_subcommand("train", "train and evaluate one model");
  tr->add_option("--config", tr_c.config, "JSON file of option values");
  tr->add_option("--corpus", tr_c.corpus, "corpus directory");
  tr->add_option("--report", tr_report, "report file (default stdout)");
  tr->add_option("--checkpoint", tr_ckpt, "write the trained weights here");
  AddModelOptions(tr, tr_m, tr_mod);
  AddPipelineOptions(tr, tr_p, true);

  PipelineOptions ab_p;
  ModelConfig ab_m;
  std::string ab_mod = "all", ab_table, ab_json, ab_only;
  auto* ab = app.add_subcommand("ablate", "train the six-row modality grid");
  ab->add_option("--config", ab_c.config, "JSON file of option values");
  ab->add_option("--corpus", ab_c.corpus, "corpus directory");
  ab->add_option("--table", ab_table, "text table file (default stdout)");
  ab->add_option("--json", ab_json, "JSON table file");
  ab->add_option("--only", ab_only, "run a single row by name");
  AddModelOptions(ab, ab_m, ab_mod);
  AddPipelineOptions(ab, ab_p, true);

  int gc_side = 16, gc_obs = 2;
  std::size_t gc_entries = 24;
  std::uint64_t gc_seed = 0;
  double gc_tol = 1e-4;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the full model");
  gc->add_option("--config", gc_c.config, "JSON file of option values");
  gc->add_option("--image-side", gc_side, "image side, pixels");
  gc->add_option("--obs-len", gc_obs, "observation length, frames");
  gc->add_option("--entries", gc_entries, "entries sampled per parameter (0 = all)");
  gc->add_option("--seed", gc_seed, "seed");
  gc->add_option("--tolerance", gc_tol, "pass threshold on the max relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*gen) {
      ApplyConfigFile(*gen, gen_c.config);
      return RunGen(spec, gen_c.corpus);
    }
    if (*val) {
      ApplyConfigFile(*val, val_c.config);
      return RunValidate(ResolveCorpus(val_c.corpus));
    }
    if (*den) {
      ApplyConfigFile(*den, den_c.config);
      return RunDensify(ResolveCorpus(den_c.corpus), den_out, den_p);
    }
    if (*ras) {
      ApplyConfigFile(*ras, ras_c.config);
      return RunRasterize(ResolveCorpus(ras_c.corpus), ras_out, ras_side);
    }
    if (*sam) {
      ApplyConfigFile(*sam, sam_c.config);
      return RunSample(ResolveCorpus(sam_c.corpus), sam_out, sam_p);
    }
    if (*tr) {
      ApplyConfigFile(*tr, tr_c.config);
      tr_m.modalities = Modalities::Parse(tr_mod);
      return RunTrain(ResolveCorpus(tr_c.corpus), tr_m, tr_p, tr_report, tr_ckpt);
    }
    if (*ab) {
      ApplyConfigFile(*ab, ab_c.config);
      ab_m.modalities = Modalities::Parse(ab_mod);
      return RunAblate(ResolveCorpus(ab_c.corpus), ab_m, ab_p, ab_table, ab_json, ab_only);
    }
    if (*gc) {
      ApplyConfigFile(*gc, gc_c.config);
      return RunGradCheck(gc_side, gc_obs, gc_entries, gc_seed, gc_tol);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.kind() << ": "
              << (e.violations().empty() ? std::string(e.what()) : e.violations().front())
              << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace
}  // namespace pedcross

int main(int argc, char** argv) { return pedcross::Main(argc, argv); }
