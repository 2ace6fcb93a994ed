// Runs every acceptance criterion and prints one PASS/FAIL/SKIP line each.
// Exit status is nonzero when any criterion fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "spadnn/cli.hpp"
#include "spadnn/data.hpp"
#include "spadnn/imaging.hpp"
#include "spadnn/ops.hpp"
#include "spadnn/profiling.hpp"
#include "spadnn/spiking.hpp"
#include "spadnn/temporal.hpp"
#include "spadnn/training.hpp"
#include "spadnn/util.hpp"

using namespace spadnn;
namespace fs = std::filesystem;

namespace {

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status = Status::kPass;
  std::string detail;
};

// Collects the first few failure messages of a criterion.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 5) msgs_ << (failures_ > 1 ? "; " : "") << what;
  }
  Outcome done(const std::string& summary) const {
    if (failures_ == 0) return {Status::kPass, summary};
    return {Status::kFail, std::to_string(failures_) + " check(s) failed: " + msgs_.str()};
  }

 private:
  std::size_t failures_ = 0;
  std::ostringstream msgs_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Tensor leaf(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return Tensor::from(shape, oracle::random_vec(shape_numel(shape), rng, lo, hi), true);
}

// A random linear functional of `y`, so every output element gets a distinct weight.
Tensor probe(const Tensor& y, const Tensor& weights) { return sum(mul(y, weights)); }

// ---------------------------------------------------------------- 1

Outcome gradient_integrity() {
  std::mt19937_64 rng(1001);
  Checker ck;
  double worst = 0.0;
  auto check = [&](const std::string& op, double err) {
    worst = std::max(worst, err);
    ck.expect(err < 1e-4, op + " relative error " + fmt(err));
  };
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t B = pick(rng, 1, 2), C = pick(rng, 1, 4);
    const std::size_t H = pick(rng, 3, 8), W = pick(rng, 3, 8);

    {
      const std::size_t O = pick(rng, 1, 4), K = pick(rng, 1, 3);
      const std::size_t stride = pick(rng, 1, 2), pad = pick(rng, 0, K / 2);
      auto x = leaf({B, C, H, W}, rng), k = leaf({O, C, K, K}, rng), b = leaf({O}, rng);
      const auto shape = conv2d(x, k, b, stride, pad).shape();
      auto r = Tensor::from(shape, oracle::random_vec(shape_numel(shape), rng));
      check("conv2d", oracle::gradient_error({x, k, b}, [&] {
              return probe(conv2d(x, k, b, stride, pad), r);
            }));
    }
    {
      const std::size_t I = C * pick(rng, 1, 8), O = pick(rng, 1, 8);
      auto x = leaf({B, I}, rng), w = leaf({O, I}, rng), b = leaf({O}, rng);
      auto r = Tensor::from({B, O}, oracle::random_vec(B * O, rng));
      check("affine", oracle::gradient_error({x, w, b}, [&] { return probe(affine(x, w, b), r); }));
    }
    {
      auto x = leaf({B, C, H, W}, rng), g = leaf({C}, rng, 0.5, 1.5), be = leaf({C}, rng);
      auto r = Tensor::from({B, C, H, W}, oracle::random_vec(B * C * H * W, rng));
      BatchNormState st(C);
      check("batchnorm2d", oracle::gradient_error({x, g, be}, [&] {
              return probe(batchnorm2d(x, g, be, st, Mode::kTrain), r);
            }));
    }
    {
      const std::size_t win = pick(rng, 1, 3);
      auto x = leaf({B, C, H, W}, rng);
      const auto shape = maxpool2d(x, win, PoolTail::kDrop).shape();
      auto r = Tensor::from(shape, oracle::random_vec(shape_numel(shape), rng));
      check("maxpool2d", oracle::gradient_error({x}, [&] {
              return probe(maxpool2d(x, win, PoolTail::kDrop), r);
            }));
    }
    {
      const std::size_t K = pick(rng, 2, 8);
      auto z = leaf({B, K}, rng, -3.0, 3.0);
      std::vector<int> labels(B);
      for (auto& l : labels) l = static_cast<int>(pick(rng, 0, K - 1));
      check("softmax_cross_entropy",
            oracle::gradient_error({z}, [&] { return softmax_cross_entropy(z, labels); }));
    }
  }
  return ck.done("50 randomized checks, worst relative error " + fmt(worst));
}

// ---------------------------------------------------------------- 2

Outcome if_dynamics() {
  std::vector<double> vs;
  for (int i = -10; i <= 20; ++i) vs.push_back(i / 10.0);
  const std::size_t n = vs.size() * vs.size();
  std::vector<double> v0(n), x(n);
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = 0; j < vs.size(); ++j) v0[i * vs.size() + j] = vs[i], x[i * vs.size() + j] = vs[j];

  IFState st;
  st.v_th = 1.0;
  st.v = Tensor::from({n}, v0);
  const auto s = if_step(st, Tensor::from({n}, x));
  Checker ck;
  for (std::size_t k = 0; k < n; ++k) {
    const double h = v0[k] + x[k];
    const bool fire = h >= 1.0;
    const std::string at = "V=" + fmt(v0[k]) + " X=" + fmt(x[k]);
    ck.expect(s.data()[k] == (fire ? 1.0 : 0.0), at + " spike mismatch");
    ck.expect(st.v.data()[k] == (fire ? 0.0 : h), at + " post-potential mismatch");
  }
  return ck.done(std::to_string(n) + " (V, X) pairs match hard-reset semantics");
}

// ---------------------------------------------------------------- 3

Outcome encoder_statistics() {
  const std::size_t N = 10000, T = 8;
  Checker ck;
  std::ostringstream summary;
  Rng rng(derive_seed(3003, {}));
  for (double x : {0.0, 0.1, 0.5, 0.9, 1.0}) {
    const auto train = poisson_encode(Tensor::full({N}, x), T, rng);
    std::vector<double> totals(N, 0.0);
    for (const auto& frame : train.frames)
      for (std::size_t i = 0; i < N; ++i) totals[i] += frame.data()[i];
    const double mean = std::accumulate(totals.begin(), totals.end(), 0.0) / N;
    if (x == 0.0 || x == 1.0) {
      for (double t : totals) ck.expect(t == T * x, "x=" + fmt(x) + " not exact");
    } else {
      const double tol = 4.0 * std::sqrt(T * x * (1.0 - x) / N);
      ck.expect(std::fabs(mean - T * x) <= tol,
                "x=" + fmt(x) + " mean " + fmt(mean) + " tolerance " + fmt(tol));
    }
    summary << "x=" << x << " mean " << fmt(mean) << "; ";
  }
  return ck.done(summary.str() + "T=8, N=10000");
}

// ---------------------------------------------------------------- 4

Outcome bicubic_oracle() {
  std::mt19937_64 rng(4004);
  Checker ck;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Image img(8, 8);
    img.pixels = oracle::random_vec(64, rng, 0.0, 1.0);
    const auto got = bicubic_resize(img, 25, 25);
    const auto want = oracle::bicubic(img.pixels, 8, 8, 25, 25, kKeysA);
    for (std::size_t i = 0; i < want.size(); ++i)
      worst = std::max(worst, std::fabs(got.pixels[i] - want[i]));
  }
  ck.expect(worst <= 1e-10, "oracle deviation " + fmt(worst));

  for (double c : {0.0, 0.375, 1.0}) {
    for (double v : bicubic_resize(Image(8, 8, c), 25, 25).pixels)
      ck.expect(v == c, "constant " + fmt(c) + " not reproduced exactly, got " + fmt(v));
  }

  double ramp_worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto coef = oracle::random_vec(3, rng);
    Image img(8, 8);
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t c = 0; c < 8; ++c) img.at(r, c) = coef[0] + coef[1] * r + coef[2] * c;
    const auto out = bicubic_resize(img, 25, 25);
    for (std::size_t i = 0; i < 25; ++i)
      for (std::size_t j = 0; j < 25; ++j) {
        const double sy = (i + 0.5) * 8.0 / 25.0 - 0.5, sx = (j + 0.5) * 8.0 / 25.0 - 0.5;
        if (std::floor(sy) < 1 || std::floor(sy) > 5 || std::floor(sx) < 1 || std::floor(sx) > 5)
          continue;
        ramp_worst = std::max(ramp_worst,
                              std::fabs(out.at(i, j) - (coef[0] + coef[1] * sy + coef[2] * sx)));
      }
  }
  ck.expect(ramp_worst <= 1e-6, "ramp deviation " + fmt(ramp_worst));
  return ck.done("oracle deviation " + fmt(worst) + ", ramp deviation " + fmt(ramp_worst));
}

// ---------------------------------------------------------------- 5

struct SimResult {
  std::vector<double> input_spikes;  // per synaptic layer, summed over batch and time
  std::vector<std::size_t> inputs;   // input elements per sample
  std::vector<std::uint64_t> conv_macs;
  std::vector<std::uint64_t> oracle_conv_macs;
};

// Re-runs a spiking network in eval mode with the reference kernels and its
// own IF bookkeeping, counting the spikes that reach each conv and fc layer.
SimResult simulate(Network& net, const SpikeTrain& train, std::size_t B) {
  const auto& spec = net.spec();
  const auto params = net.parameters();
  const auto buffers = net.buffers();
  auto param = [&](const std::string& name) {
    for (const auto& p : params)
      if (p.name == name) return std::vector<double>(p.tensor.data().begin(), p.tensor.data().end());
    throw std::runtime_error("missing parameter " + name);
  };
  auto buffer = [&](const std::string& name) {
    for (const auto& b : buffers)
      if (b.name == name) return *b.values;
    throw std::runtime_error("missing buffer " + name);
  };

  SimResult res;
  std::vector<std::vector<double>> potentials(spec.layers.size());
  bool first = true;
  for (const auto& frame : train.frames) {
    std::vector<double> a(frame.data().begin(), frame.data().end());
    std::size_t c = spec.input_shape[0], h = spec.input_shape[1], w = spec.input_shape[2];
    std::size_t syn = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
      const auto& l = spec.layers[i];
      const std::string p = "layers." + std::to_string(i) + ".";
      auto count = [&] {
        if (first) res.input_spikes.push_back(0.0), res.inputs.push_back(a.size() / B);
        for (double s : a) res.input_spikes[syn] += s;
        ++syn;
      };
      switch (l.kind) {
        case LayerKind::kConv: {
          count();
          const std::size_t ho = (h + 2 * l.padding - l.kernel) / l.stride + 1;
          const std::size_t wo = (w + 2 * l.padding - l.kernel) / l.stride + 1;
          if (first) {
            res.conv_macs.push_back(mac_conv(c, l.kernel, l.kernel, ho, wo, l.out_channels));
            res.oracle_conv_macs.push_back(oracle::count_conv_macs(c, l.kernel, ho, wo, l.out_channels));
          }
          a = oracle::conv2d(a, param(p + "weight"), param(p + "bias"), B, c, h, w, l.out_channels,
                             l.kernel, l.stride, l.padding);
          c = l.out_channels, h = ho, w = wo;
          break;
        }
        case LayerKind::kBatchNorm: {
          const auto g = param(p + "gamma"), be = param(p + "beta");
          const auto mean = buffer(p + "running_mean"), var = buffer(p + "running_var");
          for (std::size_t k = 0; k < a.size(); ++k) {
            const std::size_t ch = (k / (h * w)) % c;
            a[k] = oracle::bn_eval_scalar(a[k], mean[ch], var[ch], 1e-5, g[ch], be[ch]);
          }
          break;
        }
        case LayerKind::kPool:
          a = oracle::maxpool(a, B, c, h, w, l.window);
          h /= l.window, w /= l.window;
          break;
        case LayerKind::kFc: {
          count();
          const std::size_t in = a.size() / B;
          a = oracle::affine(a, param(p + "weight"), param(p + "bias"), B, in, l.out_features);
          break;
        }
        case LayerKind::kSpike: {
          auto& v = potentials[i];
          if (v.empty()) v.assign(a.size(), 0.0);
          for (std::size_t k = 0; k < a.size(); ++k) {
            const double hk = v[k] + a[k];
            a[k] = hk >= spec.v_threshold ? 1.0 : 0.0;
            v[k] = a[k] == 1.0 ? 0.0 : hk;
          }
          break;
        }
        default:
          break;
      }
    }
    first = false;
  }
  return res;
}

Outcome flops_accounting() {
  std::mt19937_64 rng(5005);
  Checker ck;
  double busiest = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto spec = oracle::random_spiking_spec(rng);
    const std::string tag = "spec " + std::to_string(trial) + ": ";
    const auto slots = oracle::count_slots(spec);
    const auto layers = synaptic_layers(spec);
    ck.expect(layers.size() == slots.size(), tag + "synaptic layer count");
    if (layers.size() != slots.size()) continue;

    std::uint64_t cnn = 0;
    for (std::size_t k = 0; k < slots.size(); ++k) {
      ck.expect(layers[k].slots == slots[k].slots, tag + "slots of layer " + std::to_string(k));
      cnn += 2 * slots[k].slots;
    }
    ck.expect(flops_cnn(to_cnn(spec)) == cnn, tag + "flops_cnn");

    auto net = Network::build(spec, 100 + trial);
    for (auto& p : net.parameters()) {
      auto d = p.tensor.mutable_data();
      const bool scale = p.name.ends_with("gamma");
      const auto v = oracle::random_vec(d.size(), rng, scale ? 0.5 : -0.5, scale ? 1.5 : 1.0);
      std::copy(v.begin(), v.end(), d.begin());
    }
    for (auto& b : net.buffers()) {
      const bool var = b.name.ends_with("running_var");
      *b.values = oracle::random_vec(b.values->size(), rng, var ? 0.5 : -0.2, var ? 2.0 : 0.2);
    }
    net.round_to_storage();
    net.set_mode(Mode::kEval);

    const std::size_t B = 2, T = 8;
    Shape shape{B, spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};
    Rng enc(derive_seed(5005, {static_cast<std::uint64_t>(trial)}));
    std::vector<double> img(shape_numel(shape));
    for (auto& x : img) x = uniform01(enc);
    const auto train = poisson_encode(Tensor::from(shape, img), T, enc);
    reset_states(net);
    net.set_recording(true);
    run_temporal(net, train);
    const auto records = net.spike_records();
    const auto sim = simulate(net, train, B);

    for (std::size_t k = 0; k < sim.conv_macs.size(); ++k)
      ck.expect(sim.conv_macs[k] == sim.oracle_conv_macs[k], tag + "mac_conv");
    ck.expect(records.size() == sim.input_spikes.size(), tag + "record count");
    if (records.size() != sim.input_spikes.size()) continue;

    std::vector<double> rates, want_rates;
    double want_snn = 0.0;
    for (std::size_t k = 0; k < records.size(); ++k) {
      ck.expect(records[k].spikes == sim.input_spikes[k],
                tag + "spikes into layer " + std::to_string(k) + ": " + fmt(records[k].spikes) +
                    " vs " + fmt(sim.input_spikes[k]));
      rates.push_back(measure_spike_rate(records[k]));
      want_rates.push_back(sim.input_spikes[k] / static_cast<double>(B * sim.inputs[k]));
      ck.expect(rates.back() == want_rates.back(), tag + "measure_spike_rate " + std::to_string(k));
      want_snn += static_cast<double>(slots[k].slots) * want_rates.back();
      busiest = std::max(busiest, rates.back());
    }
    ck.expect(flops_snn(spec, rates) == want_snn, tag + "flops_snn");

    std::uniform_real_distribution<double> r2(0.0, 2.0);
    std::vector<double> rs(rates.size());
    for (auto& r : rs) r = r2(rng);
    const double base = flops_snn(spec, rs);
    ck.expect(base <= static_cast<double>(cnn), tag + "r<=2 exceeds cnn FLOPs");
    for (std::size_t k = 0; k < rs.size(); ++k) {
      auto up = rs;
      up[k] += 0.5;
      ck.expect(flops_snn(spec, up) >= base, tag + "not monotone in r");
    }
  }
  return ck.done("20 random specs; largest measured rate " + fmt(busiest));
}

// ---------------------------------------------------------------- 6

double overfit(ArchFamily family, const std::vector<Frame>& frames, std::size_t* epochs) {
  TrainConfig cfg;
  cfg.seed = 6006;
  cfg.max_epochs = 200;
  cfg.patience = 200;
  cfg.batch_size = 16;
  auto net = Network::build(default_spec(family), cfg.seed);
  const auto result = train(net, frames, frames, cfg);
  *epochs = result.history.size();
  auto best = Network::from_checkpoint(result.best);
  EvalOptions opts;
  opts.encoder_seed = derive_seed(cfg.seed, {0x7a1});
  return evaluate(best, frames, opts).accuracy;
}

Outcome end_to_end_overfit() {
  SyntheticGestureConfig cfg;
  cfg.seed = 606;
  auto frames = synth_generate(cfg, 6).frames;
  frames.resize(64);
  std::size_t scnn_epochs = 0, cnn_epochs = 0;
  const double scnn = overfit(ArchFamily::kScnn, frames, &scnn_epochs);
  const double cnn = overfit(ArchFamily::kCnn, frames, &cnn_epochs);
  Checker ck;
  ck.expect(scnn >= 0.95, "scnn training accuracy " + fmt(scnn));
  ck.expect(cnn >= 0.99, "cnn training accuracy " + fmt(cnn));
  return ck.done("64 frames: scnn " + fmt(scnn) + " after " + std::to_string(scnn_epochs) +
                 " epochs, cnn " + fmt(cnn) + " after " + std::to_string(cnn_epochs) + " epochs");
}

// ---------------------------------------------------------------- 7

struct SeedStats {
  double mean = 0.0;
  std::vector<double> acc;
};

SeedStats eval_seeds(Network& net, const std::vector<Frame>& frames, std::optional<double> ambient,
                     std::uint64_t seed) {
  SeedStats s;
  for (std::uint64_t k = 0; k < 5; ++k) {
    EvalOptions opts;
    opts.ambient = ambient;
    opts.encoder_seed = derive_seed(seed, {k});
    s.acc.push_back(evaluate(net, frames, opts).accuracy);
  }
  s.mean = std::accumulate(s.acc.begin(), s.acc.end(), 0.0) / s.acc.size();
  return s;
}

Outcome ambient_degradation(std::size_t max_epochs) {
  SyntheticGestureConfig cfg;
  cfg.seed = 707;
  auto pool = synth_generate(cfg, 500).frames;
  std::vector<Frame> train_set;
  std::size_t background = 0;
  for (const auto& f : pool)
    if (f.label != 10 || background++ < 100) train_set.push_back(f);
  cfg.seed = 708;
  const auto val_set = synth_generate(cfg, 30).frames;
  cfg.seed = 709;
  const auto test_set = synth_generate(cfg, 100).frames;

  TrainConfig tc;
  tc.seed = 7007;
  tc.max_epochs = max_epochs;
  auto net = Network::build(default_spec(ArchFamily::kScnn), tc.seed);
  const auto result = train(net, train_set, val_set, tc);
  auto best = Network::from_checkpoint(result.best);
  const auto clean = eval_seeds(best, test_set, std::nullopt, 77);
  const auto noisy = eval_seeds(best, test_set, 200.0, 77);

  Checker ck;
  ck.expect(train_set.size() == 5100 && test_set.size() == 1100, "set sizes");
  ck.expect(noisy.mean <= clean.mean,
            "ambient " + fmt(noisy.mean) + " exceeds clean " + fmt(clean.mean));
  return ck.done(std::to_string(train_set.size()) + " training frames, " +
                 std::to_string(result.history.size()) + " epochs; clean " + fmt(clean.mean) +
                 ", lambda_bg=200 " + fmt(noisy.mean) + " over 5 encoder seeds");
}

// ---------------------------------------------------------------- 8

Outcome released_reproduction() {
  const char* root = std::getenv("SPADNN_RELEASED_DATASET");
  if (!root || !*root) return {Status::kSkip, "SPADNN_RELEASED_DATASET not set"};
  const fs::path dir(root);
  if (!fs::exists(dir / "train") || !fs::exists(dir / "test"))
    return {Status::kSkip, dir.string() + " lacks imported train/ and test/ datasets"};

  const auto full = load_dataset(dir / "train").frames;
  const auto test = load_dataset(dir / "test").frames;
  auto [train_set, val_set] = split(full, 0.9, 8008);

  auto fit = [&](ArchFamily family) {
    TrainConfig tc;
    tc.seed = 8008;
    auto net = Network::build(default_spec(family), tc.seed);
    return Network::from_checkpoint(train(net, train_set, val_set, tc).best);
  };
  auto cnn = fit(ArchFamily::kCnn);
  auto scnn = fit(ArchFamily::kScnn);
  EvalOptions once;
  const double cnn_acc = evaluate(cnn, test, once).accuracy * 100.0;
  const double scnn_acc = eval_seeds(scnn, test, std::nullopt, 88).mean * 100.0;
  const auto prof = profile_network(scnn, test, derive_seed(88, {0}));
  const double reduction = prof.reduction_percent.value_or(NAN);

  Checker ck;
  ck.expect(std::fabs(cnn_acc - 92.9) <= 3.0, "cnn accuracy " + fmt(cnn_acc) + "%");
  ck.expect(std::fabs(scnn_acc - 90.8) <= 3.0, "scnn accuracy " + fmt(scnn_acc) + "%");
  ck.expect(std::fabs(reduction - 20.5) <= 10.0, "FLOPs reduction " + fmt(reduction) + "%");
  return ck.done("cnn " + fmt(cnn_acc) + "%, scnn " + fmt(scnn_acc) + "%, FLOPs reduction " +
                 fmt(reduction) + "%");
}

// ---------------------------------------------------------------- 9

int run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

Outcome cli_determinism(const fs::path& work) {
  const auto data = work / "det_data";
  Checker ck;
  ck.expect(run({"synth", "--per-class", "8", "--seed", "9", "--out", data.string()}) == 0, "synth");
  std::vector<fs::path> outs;
  for (const char* tag : {"a", "b"}) {
    const auto dir = work / (std::string("det_") + tag);
    ck.expect(run({"train", "--arch", "scnn", "--data", data.string(), "--epochs", "3", "--seed",
                   "4", "--out", (dir / "train").string()}) == 0,
              std::string("train ") + tag);
    ck.expect(run({"eval", "--ckpt", (dir / "train" / "model.ckpt").string(), "--data",
                   data.string(), "--seeds", "2", "--ambient", "200", "--seed", "4", "--out",
                   (dir / "eval").string()}) == 0,
              std::string("eval ") + tag);
    outs.push_back(dir);
  }
  std::size_t compared = 0;
  for (const char* f : {"train/history.csv", "eval/confusion.csv", "eval/confusion_ambient.csv"}) {
    const auto a = outs[0] / f, b = outs[1] / f;
    if (!fs::exists(a) || !fs::exists(b)) {
      ck.expect(false, std::string(f) + " missing");
      continue;
    }
    ck.expect(read_file(a) == read_file(b), std::string(f) + " differs between runs");
    ++compared;
  }
  return ck.done(std::to_string(compared) + " CSV outputs byte-identical across two invocations");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks for spadnn"};
  std::vector<int> only;
  std::size_t ambient_epochs = 15;
  std::string work = (fs::temp_directory_path() / "spadnn_acceptance").string();
  app.add_option("criteria", only, "Criterion numbers to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--ambient-epochs", ambient_epochs, "Epoch cap for the ambient-light run")
      ->capture_default_str();
  app.add_option("--work", work, "Scratch directory")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient integrity", gradient_integrity},
      {"IF dynamics", if_dynamics},
      {"encoder statistics", encoder_statistics},
      {"bicubic oracle", bicubic_oracle},
      {"FLOPs accounting", flops_accounting},
      {"end-to-end overfit", end_to_end_overfit},
      {"ambient-light degradation", [&] { return ambient_degradation(ambient_epochs); }},
      {"released-dataset reproduction", released_reproduction},
      {"determinism", [&] { return cli_determinism(work); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* label = o.status == Status::kPass ? "PASS" : o.status == Status::kFail ? "FAIL" : "SKIP";
    failed += o.status == Status::kFail;
    std::printf("%s %d %s (%.1f s): %s\n", label, id, criteria[i].first.c_str(), secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
