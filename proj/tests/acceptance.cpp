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

// Acceptance runner: one PASS/FAIL line per primary criterion, nonzero exit
// if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pedcross.hpp"

namespace pedcross {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
constexpr double kPi = std::numbers::pi;

double Seconds(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

// ---- gradients -------------------------------------------------------------

nn::Tensor RandomTensor(nn::Shape shape, Xorshift64& rng, double lo = -1, double hi = 1) {
  nn::Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.Uniform(lo, hi);
  return t;
}

double Projected(const std::function<nn::Var(nn::Tape&)>& build,
                 std::vector<nn::Parameter*> params, Xorshift64& rng, const nn::Shape& shape) {
  const nn::Tensor proj = RandomTensor(shape, rng);
  auto loss = [&](nn::Tape& tape) {
    return nn::Sum(nn::Mul(build(tape), tape.Constant(proj)));
  };
  return nn::GradCheck(loss, params).max_relative_error;
}

Outcome GradientSuite() {
  using namespace nn;
  const auto t0 = Clock::now();
  std::map<std::string, double> worst;
  auto note = [&](const std::string& k, double e) { worst[k] = std::max(worst[k], e); };
  Xorshift64 rng(4242);
  for (int t = 0; t < 20; ++t) {
    {
      const std::size_t c = 1 + rng.Below(3), f = 1 + rng.Below(3);
      const std::size_t h = 2 + rng.Below(6), k = 1 + 2 * rng.Below(2), s = 1 + rng.Below(3);
      Parameter x("x", RandomTensor({2, c, h, h}, rng));
      Conv2DLayer conv("c", c, f, k, s, rng);
      const std::size_t o = SameExtent(h, s);
      note("conv2d", Projected([&](Tape& tp) { return conv(tp, tp.Param(x)); },
                               {&x, &conv.weight, &conv.bias}, rng, {2, f, o, o}));
    }
    {
      const std::size_t d = 1 + rng.Below(3), u = 1 + rng.Below(4), steps = 1 + rng.Below(5);
      std::vector<Parameter> xs;
      for (std::size_t s = 0; s < steps; ++s) xs.emplace_back("x", RandomTensor({2, d}, rng));
      LstmLayer lstm("l", d, u, rng);
      auto params = lstm.parameters();
      for (auto& x : xs) params.push_back(&x);
      note("lstm", Projected(
                       [&](Tape& tp) {
                         std::vector<Var> in;
                         for (auto& x : xs) in.push_back(tp.Param(x));
                         return lstm.Run(tp, in);
                       },
                       params, rng, {2, u}));
    }
    {
      const std::size_t n = 1 + rng.Below(4), d = 1 + rng.Below(5), u = 1 + rng.Below(5);
      Parameter x("x", RandomTensor({n, d}, rng));
      DenseLayer dense("d", d, u, rng);
      note("dense", Projected([&](Tape& tp) { return dense(tp, tp.Param(x)); },
                              {&x, &dense.weight, &dense.bias}, rng, {n, u}));
    }
    {
      const std::size_t n = 1 + rng.Below(4), d = 1 + rng.Below(6);
      const double p = rng.Uniform(0.0, 0.9);
      Parameter x("x", RandomTensor({n, d}, rng));
      const std::uint64_t mask_seed = rng();
      note("dropout", Projected(
                          [&](Tape& tp) {
                            Xorshift64 mask(mask_seed);
                            return Dropout(tp.Param(x), p, Mode::kTrain, mask);
                          },
                          {&x}, rng, {n, d}));
    }
    {
      const std::size_t n = 1 + rng.Below(3), c = 1 + rng.Below(4);
      const std::size_t h = 1 + rng.Below(5), w = 1 + rng.Below(5);
      Parameter x("x", RandomTensor({n, c, h, w}, rng));
      note("gap", Projected([&](Tape& tp) { return GlobalAvgPool(tp.Param(x)); }, {&x}, rng,
                            {n, c}));
    }
    {
      const std::size_t n = 1 + rng.Below(4), d = 1 + rng.Below(6);
      Parameter x("x", RandomTensor({n, d}, rng, -3, 3));
      for (double& v : x.value.values())
        if (std::abs(v) < 1e-3) v = 0.5;
      note("relu", Projected([&](Tape& tp) { return Relu(tp.Param(x)); }, {&x}, rng, {n, d}));
      note("sigmoid",
           Projected([&](Tape& tp) { return Sigmoid(tp.Param(x)); }, {&x}, rng, {n, d}));
      note("tanh", Projected([&](Tape& tp) { return Tanh(tp.Param(x)); }, {&x}, rng, {n, d}));
    }
    {
      Parameter a("a", RandomTensor({3, 2}, rng)), b("b", RandomTensor({3, 1}, rng));
      DenseLayer head("h", 3, 1, rng);
      const std::vector<int> y = {1, 0, 1};
      auto loss = [&](Tape& tp) {
        Var z = ConcatCols({tp.Param(a), tp.Param(b)});
        return WeightedBce(Reshape(Sigmoid(head(tp, z)), {3}), y, 1.7, 0.6);
      };
      std::vector<Parameter*> ps = {&a, &b, &head.weight, &head.bias};
      note("bce+concat", GradCheck(loss, ps).max_relative_error);
    }
  }

  ModelConfig c;
  c.image_side = 16;
  c.obs_len = 2;
  c.seed = 3;
  HybridModel model(c);
  Batch batch;
  const std::size_t n = 2, t = 2, s = 16;
  batch.scene = RandomTensor({n, 3 * t, s, s}, rng, 0, 1);
  batch.map = RandomTensor({n, 3 * t, s, s}, rng, 0, 1);
  batch.trajectory = RandomTensor({n, t, 2}, rng);
  batch.ego = RandomTensor({n, t, 3}, rng, -2, 2);
  batch.labels = {1, 0};
  auto loss = [&](Tape& tp) {
    Xorshift64 unused(0);
    return WeightedBce(model.Forward(tp, batch, Mode::kEval, unused), batch.labels, 1.4, 0.8);
  };
  GradCheckOptions opt;
  opt.max_entries_per_param = 256;
  opt.seed = 9;
  const auto params = model.parameters();
  const auto full = GradCheck(loss, params, opt);
  note("full_model", full.max_relative_error);

  Outcome o;
  const double secs = Seconds(t0);
  char buf[160];
  for (const auto& [k, e] : worst) {
    std::snprintf(buf, sizeof(buf), "%s %.2e ", k.c_str(), e);
    o.detail += buf;
    o.pass &= e < 1e-4;
  }
  std::snprintf(buf, sizeof(buf), "(full model: %zu entries over %zu tensors, %zu refined, %zu on kink) %.1fs",
                full.entries_checked, params.size(), full.entries_refined,
                full.entries_on_kink, secs);
  o.detail += buf;
  o.pass &= secs < 300.0;
  return o;
}

// ---- geometry --------------------------------------------------------------

Outcome GeometryOracles() {
  Xorshift64 rng(1001);
  double yaw_err = 0, center_err = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    PedestrianTrack track;
    const int kf = 2 + static_cast<int>(rng.Below(5));
    for (int k = 0; k < kf; ++k) {
      Box3D b;
      b.center = {rng.Uniform(-80, 80), rng.Uniform(-80, 80), rng.Uniform(0, 2)};
      b.size = {rng.Uniform(0.2, 2), rng.Uniform(0.2, 5), rng.Uniform(0.5, 2)};
      b.yaw = NormalizeAngle(rng.Uniform(-kPi, kPi));
      b.timestamp = 0.5 * k;
      track.keyframe_boxes.push_back(b);
    }
    std::vector<double> grid;
    for (int f = 0; f <= 5 * (kf - 1); ++f) grid.push_back(0.1 * f);
    const DenseTrack d = InterpolateTrack(track, grid);
    for (const auto& f : d.frames) {
      const int seg = std::min(f.frame_index / 5, kf - 2);
      const Box3D& a = track.keyframe_boxes[seg];
      const Box3D& b = track.keyframe_boxes[seg + 1];
      const double al = (f.frame_index - 5 * seg) / 5.0;
      yaw_err = std::max(yaw_err, oracle::AngleGap(f.box.yaw, oracle::CircleYaw(a.yaw, b.yaw, al)));
      const Vec3 want = a.center + (b.center - a.center) * al;
      const Vec3 diff = f.box.center - want;
      center_err = std::max(center_err, std::sqrt(Dot(diff, diff)));
    }
  }

  double px_err = 0;
  int compared = 0;
  while (compared < 1000) {
    EgoState e;
    e.position = {rng.Uniform(-30, 30), rng.Uniform(-30, 30), 0};
    e.heading = rng.Uniform(-kPi, kPi);
    CameraCalib cal = detail::ForwardCamera(e, 64 + static_cast<int>(rng.Below(900)));
    cal.intrinsics(0, 0) = rng.Uniform(100, 1200);
    cal.intrinsics(1, 1) = rng.Uniform(100, 1200);
    const double depth = rng.Uniform(3, 50), lateral = rng.Uniform(-20, 20);
    const double ch = std::cos(e.heading), sh = std::sin(e.heading);
    Box3D b;
    b.center = {e.position.x + depth * ch + lateral * sh, e.position.y + depth * sh - lateral * ch,
                rng.Uniform(0, 2)};
    b.size = {rng.Uniform(0.3, 2), rng.Uniform(0.3, 5), rng.Uniform(0.5, 2)};
    b.yaw = rng.Uniform(-kPi, kPi);
    const auto want = oracle::ProjectCorners(b, cal);
    const auto got = ProjectBox(b, cal);
    if (want.has_value() != got.has_value()) {
      px_err = INFINITY;
      break;
    }
    if (!want) continue;
    for (double d : {got->x_min - want->x_min, got->y_min - want->y_min,
                     got->x_max - want->x_max, got->y_max - want->y_max})
      px_err = std::max(px_err, std::abs(d));
    ++compared;
  }
  Outcome o;
  o.pass = yaw_err < 1e-9 && center_err < 1e-9 && px_err < 1e-6;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "1000 tracks: yaw %.1e rad, center %.1e m; 1000 projections: %.1e px", yaw_err,
                center_err, px_err);
  o.detail = buf;
  return o;
}

// ---- rasterizer ------------------------------------------------------------

std::vector<MapLayer> RandomScene(Xorshift64& rng, const EgoState& ego, double extent) {
  std::vector<MapLayer> layers;
  const int n_layers = 1 + static_cast<int>(rng.Below(3));
  for (int l = 0; l < n_layers; ++l) {
    MapLayer layer;
    layer.kind = static_cast<LayerKind>(rng.Below(3));
    const int n_poly = 1 + static_cast<int>(rng.Below(3));
    for (int k = 0; k < n_poly; ++k) {
      Polygon poly;
      const int nv = 3 + static_cast<int>(rng.Below(7));
      for (int v = 0; v < nv; ++v)
        poly.push_back({ego.position.x + rng.Uniform(-0.7, 0.7) * extent,
                        ego.position.y + rng.Uniform(-0.7, 0.7) * extent});
      layer.polygons.push_back(poly);
    }
    layers.push_back(layer);
  }
  return layers;
}

Outcome RasterOracle() {
  Xorshift64 rng(2002);
  int oracle_ok = 0, invariant_ok = 0;
  for (int scene = 0; scene < 100; ++scene) {
    const int side = 8 + static_cast<int>(rng.Below(57));
    const RasterConfig cfg = RasterConfig::WithSide(side, rng.Uniform(10, 40));
    EgoState ego;
    ego.position = {rng.Uniform(-100, 100), rng.Uniform(-100, 100), 0};
    ego.heading = rng.Uniform(-kPi, kPi);
    const auto layers = RandomScene(rng, ego, cfg.extent);
    const MapRaster r = RasterizeFrame(layers, ego, cfg);
    oracle_ok += r.pixels == oracle::RasterPerPixel(layers, ego, cfg);

    const double phi = rng.Uniform(-kPi, kPi);
    const double sx = rng.Uniform(-100, 100), sy = rng.Uniform(-100, 100);
    const double c = std::cos(phi), s = std::sin(phi);
    std::vector<MapLayer> moved = layers;
    for (auto& l : moved)
      for (auto& poly : l.polygons)
        for (auto& v : poly) {
          const double dx = v.x - ego.position.x, dy = v.y - ego.position.y;
          v = {ego.position.x + c * dx - s * dy + sx, ego.position.y + s * dx + c * dy + sy};
        }
    EgoState ego2 = ego;
    ego2.heading += phi;
    ego2.position.x += sx;
    ego2.position.y += sy;
    invariant_ok += RasterizeFrame(moved, ego2, cfg).pixels == r.pixels;
  }
  Outcome o;
  o.pass = oracle_ok == 100 && invariant_ok == 100;
  o.detail = std::to_string(oracle_ok) + "/100 scenes equal the per-pixel oracle, " +
             std::to_string(invariant_ok) + "/100 invariant under rotation+translation";
  return o;
}

// ---- metrics ---------------------------------------------------------------

Outcome MetricOracle() {
  Xorshift64 rng(3003);
  double worst = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t n = 1 + rng.Below(50);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse scores so ties are common.
      s[i] = inst % 2 ? std::round(rng.Uniform() * 8) / 8 : rng.Uniform();
      y[i] = rng.Bernoulli(0.4);
    }
    worst = std::max(worst, std::abs(RankAuc(s, y) - oracle::PairwiseAuc(s, y)));
  }
  const std::vector<double> s = {0.9, 0.4, 0.6, 0.3, 0.2};
  const std::vector<int> y = {1, 1, 0, 0, 0};
  const double worked = RankAuc(s, y);
  Outcome o;
  o.pass = worst <= 1e-9 && worked == 5.0 / 6.0;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "200 instances max |rank - pairwise| %.1e; worked example %.17g",
                worst, worked);
  o.detail = buf;
  return o;
}

// ---- protocol --------------------------------------------------------------

Outcome ProtocolConformance() {
  Outcome o;
  std::size_t total = 0, bad = 0, leaks = 0;
  int seeds = 0;
  std::string ratio_note;
  for (std::uint64_t seed : {0ULL, 1ULL, 2ULL, 3ULL, 4ULL}) {
    SyntheticSpec spec;
    spec.seed = seed;
    spec.n_bundles = 6;
    spec.image_side = 32;
    std::vector<SceneBundle> bundles;
    for (int i = 0; i < spec.n_bundles; ++i) bundles.push_back(GenerateBundle(spec, i).bundle);
    const PreparedCorpus pc = PrepareCorpus(bundles, SamplingOptions{}, 0.7, seed);
    for (const auto& s : pc.samples) {
      ++total;
      bool ok = s.frame_indices.size() == 5 && s.time_to_event >= 10 && s.time_to_event <= 20;
      for (std::size_t i = 1; i < s.frame_indices.size(); ++i)
        ok &= s.frame_indices[i] == s.frame_indices[i - 1] + 1;
      ok &= s.trajectory.size() == 5 && s.ego_velocity.size() == 5 && s.scene_frames.size() == 5;
      bad += !ok;
    }
    std::map<std::string, std::set<int>> side;
    for (const auto& s : pc.train) side[s.track_key()].insert(0);
    for (const auto& s : pc.test) side[s.track_key()].insert(1);
    for (const auto& [k, v] : side) leaks += v.size() > 1;
    std::set<std::string> train_ids(pc.split.train_track_ids.begin(),
                                    pc.split.train_track_ids.end());
    for (const auto& id : pc.split.test_track_ids) leaks += train_ids.count(id);
    const auto& m = pc.split;
    const double pos = m.train_positive + m.test_positive;
    const double neg = m.train_negative + m.test_negative;
    if (std::abs(m.train_positive - 0.7 * pos) > 1.0 || std::abs(m.train_negative - 0.7 * neg) > 1.0)
      o.pass = false;
    ratio_note += " " + std::to_string(m.train_positive) + "/" + std::to_string(int(pos)) + "+" +
                  std::to_string(m.train_negative) + "/" + std::to_string(int(neg));
    ++seeds;
  }
  o.pass &= total > 0 && bad == 0 && leaks == 0;
  o.detail = std::to_string(total) + " samples over " + std::to_string(seeds) +
             " corpora, " + std::to_string(bad) + " off-protocol, " + std::to_string(leaks) +
             " leaked tracks; train pos/neg per corpus:" + ratio_note;
  return o;
}

// ---- corpus statistics -----------------------------------------------------

Outcome StatsConsistency() {
  const SyntheticSpec spec;  // default corpus
  std::vector<SceneBundle> bundles;
  for (int i = 0; i < spec.n_bundles; ++i) bundles.push_back(GenerateBundle(spec, i).bundle);
  const CorpusStats s = ComputeCorpusStats(bundles);
  const std::int64_t cross = std::int64_t{spec.n_bundles} * spec.crossers_per_bundle();
  const std::int64_t peds = std::int64_t{spec.n_bundles} * spec.peds_per_bundle;
  bool ok = s.Consistent() && s.crossing == cross && s.non_crossing == peds - cross &&
            s.with_behavior == peds &&
            s.pedestrian_boxes == peds * spec.dense_frames() &&
            s.other_boxes ==
                std::int64_t{spec.n_bundles} * spec.vehicles_per_bundle * spec.dense_frames();
  CorpusStats published;
  published.crossing = 149;
  published.non_crossing = 570;
  published.with_behavior = 719;
  CorpusStats broken = published;
  broken.with_behavior = 718;
  ok &= published.Consistent() && !broken.Consistent();
  const ClassWeights w = ComputeClassWeights(149, 570);
  ok &= std::abs(w.positive - 719.0 / 298.0) < 1e-12 && std::abs(w.negative - 719.0 / 1140.0) < 1e-12;
  Outcome o;
  o.pass = ok;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "default synthetic: crossing %lld + non-crossing %lld = %lld (expected %lld + %lld); "
                "149 + 570 = 719 accepted, weights %.4f/%.4f",
                static_cast<long long>(s.crossing), static_cast<long long>(s.non_crossing),
                static_cast<long long>(s.with_behavior), static_cast<long long>(cross),
                static_cast<long long>(peds - cross), w.positive, w.negative);
  o.detail = buf;
  return o;
}

// ---- overfit ---------------------------------------------------------------

Outcome Overfit(const fs::path& scratch) {
  const auto t0 = Clock::now();
  SyntheticSpec spec;
  spec.image_side = 32;
  spec.seed = 5;
  const auto bundles = GenerateSynthetic(spec, scratch / "overfit");
  const PreparedCorpus pc = PrepareCorpus(bundles, SamplingOptions{}, 1.0, 5);
  // 8 per class, taken round-robin over tracks so many tracks contribute.
  std::map<std::string, std::vector<const ObservationSample*>> by_track[2];
  for (const auto& s : pc.samples) by_track[s.label][s.track_key()].push_back(&s);
  std::vector<ObservationSample> chosen;
  for (int label = 0; label < 2; ++label) {
    int taken = 0;
    for (std::size_t round = 0; taken < 8; ++round) {
      bool any = false;
      for (auto& [k, v] : by_track[label]) {
        if (round >= v.size() || taken == 8) continue;
        chosen.push_back(*v[round]);
        ++taken;
        any = true;
      }
      if (!any) break;
    }
  }
  Outcome o;
  if (chosen.size() != 16) {
    o.pass = false;
    o.detail = "could not draw 16 balanced samples";
    return o;
  }
  const ClassWeights weights = ComputeClassWeights(chosen);
  double acc[2] = {0, 0};
  double secs[2] = {0, 0};
  const char* mods[2] = {"all", "traj"};
  for (int i = 0; i < 2; ++i) {
    const auto t1 = Clock::now();
    ModelConfig c;
    c.modalities = Modalities::Parse(mods[i]);
    c.image_side = 32;
    c.epochs = 200;
    c.learning_rate = 1e-3;
    c.seed = 1;
    HybridModel model(c);
    const auto ex = MaterializeExamples(chosen, bundles, c);
    const TrainReport r = Train(model, ex, weights);
    acc[i] = r.train_metrics.accuracy;
    secs[i] = Seconds(t1);
  }
  const double total = Seconds(t0);
  o.pass = acc[0] >= 0.95 && acc[1] >= 0.7 && secs[0] < 600.0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "16 samples, side 32, 200 epochs, lr 1e-3: all-modality train acc %.4f (%.0fs), "
                "trajectory-only %.4f (%.0fs); total %.0fs",
                acc[0], secs[0], acc[1], secs[1], total);
  o.detail = buf;
  return o;
}

// ---- ablation determinism --------------------------------------------------

Outcome AblationDeterminism(const fs::path& scratch) {
  SyntheticSpec spec;
  spec.image_side = 16;
  spec.seed = 7;
  const auto bundles = GenerateSynthetic(spec, scratch / "ablate");
  const PreparedCorpus pc = PrepareCorpus(bundles, SamplingOptions{}, 0.7, 7);
  ModelConfig base;
  base.image_side = 16;
  base.epochs = 2;
  base.seed = 7;
  const auto grid = DefaultAblationGrid();
  std::string out[2];
  for (auto& s : out) {
    const auto rows = RunAblation(pc.train, pc.test, bundles, base, grid);
    s = AblationTable(rows) + AblationToJson(rows).dump();
  }
  Outcome o;
  o.pass = out[0] == out[1] && !out[0].empty();
  o.detail = "two runs of the 6-config grid (seed 7): " +
             std::string(o.pass ? "byte-identical" : "DIFFER") + ", " +
             std::to_string(out[0].size()) + " bytes";
  return o;
}

}  // namespace
}  // namespace pedcross

int main() {
  using namespace pedcross;
  const fs::path scratch = fs::temp_directory_path() / "pedcross_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"gradient-suite", GradientSuite},
      {"geometry-oracles", GeometryOracles},
      {"rasterizer-oracle", RasterOracle},
      {"metric-oracle", MetricOracle},
      {"protocol-conformance", ProtocolConformance},
      {"corpus-stats-consistency", StatsConsistency},
      {"overfit-smoke", [&] { return Overfit(scratch); }},
      {"ablation-determinism", [&] { return AblationDeterminism(scratch); }},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(scratch);
  return failures == 0 ? 0 : 1;
}
