#include "spadnn/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>

#include "spadnn/checkpoint.hpp"
#include "spadnn/data.hpp"
#include "spadnn/errors.hpp"
#include "spadnn/models.hpp"
#include "spadnn/profiling.hpp"
#include "spadnn/training.hpp"
#include "spadnn/util.hpp"

namespace spadnn {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string default_out_dir() {
  const char* env = std::getenv(kOutputDirEnv);
  return env && *env ? env : "spadnn_out";
}

std::string file_checksum(const fs::path& p) {
  return "fnv1a64:" + hex64(fnv1a64(read_file(p)));
}

void write_json(const fs::path& p, const json& j) { write_file_atomic(p, j.dump(2) + "\n"); }

ArchitectureSpec resolve_arch(const std::string& arch) {
  if (arch == "cnn" || arch == "scnn" || arch == "smlp")
    return default_spec(parse_family(arch));
  return load_arch_config(arch);
}

json accuracy_summary(const std::vector<double>& accs) {
  double mean = 0.0;
  for (double a : accs) mean += a;
  mean /= static_cast<double>(accs.size());
  double var = 0.0;
  for (double a : accs) var += (a - mean) * (a - mean);
  const double sd = accs.size() > 1 ? std::sqrt(var / static_cast<double>(accs.size() - 1)) : 0.0;
  json j;
  j["accuracies"] = accs;
  j["mean"] = mean;
  j["stddev"] = sd;
  j["min"] = *std::min_element(accs.begin(), accs.end());
  j["max"] = *std::max_element(accs.begin(), accs.end());
  return j;
}

struct Common {
  std::string out_dir = default_out_dir();
  std::uint64_t seed = 0;
  bool csv = false;
};

// ---------------------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::size_t per_class = 0;
  SyntheticGestureConfig cfg;
};

int cmd_synth(const SynthArgs& a, const std::string& invocation, std::ostream& out) {
  if (a.per_class < 1) throw UsageError("--per-class must be >= 1");
  auto cfg = a.cfg;
  cfg.seed = a.common.seed;
  const auto ds = synth_generate(cfg, a.per_class);
  save_dataset(ds, a.common.out_dir);
  out << "wrote " << ds.frames.size() << " frames (" << kSyntheticClasses << " classes x "
      << a.per_class << ") to " << a.common.out_dir << " [" << invocation << "]\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ImportArgs {
  Common common;
  std::string src;
};

int cmd_import(const ImportArgs& a, std::ostream& out) {
  const fs::path src(a.src);
  const fs::path dst(a.common.out_dir);
  auto report = [&](const std::string& part, const Dataset& ds) {
    out << part << ": " << ds.frames.size() << " frames";
    for (std::size_t c = 0; c < ds.manifest.num_classes(); ++c)
      out << (c ? ", " : " (") << ds.manifest.class_names[c] << "="
          << ds.manifest.frames_per_class[c];
    out << ")\n";
  };
  if (fs::is_directory(src / "train") && fs::is_directory(src / "test")) {
    for (const char* part : {"train", "test"}) {
      const auto ds = import_released(src / part);
      save_dataset(ds, dst / part);
      report(part, ds);
    }
  } else {
    const auto ds = import_released(src);
    save_dataset(ds, dst);
    report(src.filename().string(), ds);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string arch = "scnn";
  std::string data;
  std::string config;
  TrainConfig cfg;
  double val_ratio = 0.1;
  CLI::App* app = nullptr;
};

void apply_run_config(const std::string& path, TrainArgs& a) {
  if (path.empty()) return;
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw FormatError("run config " + path + " is not valid JSON: " + e.what());
  }
  // Flags given on the command line take precedence over file values.
  auto set = [&](const char* key, const char* flag, auto& field) {
    if (!j.contains(key) || a.app->count(flag) > 0) return;
    try {
      field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    } catch (const json::exception&) {
      throw ValidationError(std::string("run config field '") + key + "' has the wrong type");
    }
  };
  set("lr", "--lr", a.cfg.lr);
  set("batch_size", "--batch-size", a.cfg.batch_size);
  set("max_epochs", "--epochs", a.cfg.max_epochs);
  set("patience", "--patience", a.cfg.patience);
  set("timesteps", "--timesteps", a.cfg.timesteps);
  set("seed", "--seed", a.common.seed);
  set("val_ratio", "--val-ratio", a.val_ratio);
  set("arch", "--arch", a.arch);
  set("data", "--data", a.data);
}

int cmd_train(TrainArgs& a, const std::string& invocation, std::ostream& out) {
  apply_run_config(a.config, a);
  if (a.data.empty()) throw UsageError("--data is required");
  auto spec = resolve_arch(a.arch);
  if (a.app->count("--timesteps") > 0 || !a.config.empty()) spec.timesteps = a.cfg.timesteps;
  a.cfg.timesteps = spec.timesteps;
  a.cfg.seed = a.common.seed;
  a.cfg.validate();
  validate(spec);

  const auto ds = load_dataset(a.data);
  if (ds.manifest.num_classes() != spec.num_classes)
    throw ValidationError("dataset has " + std::to_string(ds.manifest.num_classes()) +
                          " classes, architecture expects " + std::to_string(spec.num_classes));
  const auto [train_part, val_part] = split(ds.frames, 1.0 - a.val_ratio, a.common.seed);

  const auto t0 = std::chrono::steady_clock::now();
  Network net = Network::build(spec, a.common.seed);
  const auto result = train(net, train_part, val_part, a.cfg, [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " loss " << r.train_loss << " train_acc " << r.train_acc
        << " val_acc " << r.val_acc << "\n";
  });
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path dir(a.common.out_dir);
  const auto ckpt_path = dir / "model.ckpt";
  save_checkpoint(result.best, ckpt_path);
  write_file_atomic(dir / "history.csv", history_to_csv(result.history));

  const auto counts = count_params(Network::from_checkpoint(result.best));
  json m;
  m["command"] = "train";
  m["invocation"] = invocation;
  m["seed"] = a.common.seed;
  m["model"] = to_string(spec.family);
  m["timesteps"] = spec.spiking() ? json(spec.timesteps) : json(nullptr);
  m["train_frames"] = train_part.size();
  m["val_frames"] = val_part.size();
  m["epochs_run"] = result.history.size();
  m["early_stopped"] = result.early_stopped;
  m["best_epoch"] = result.best_epoch;
  m["best_val_acc"] = result.best_val_acc;
  m["params"] = counts.params;
  m["model_bytes_f32"] = counts.bytes_f32;
  m["training_seconds"] = seconds;
  m["checksums"] = {{"checkpoint", file_checksum(ckpt_path)},
                    {"dataset_manifest", file_checksum(fs::path(a.data) / "manifest")}};
  write_json(dir / "metrics.json", m);
  if (a.common.csv) {
    out << history_to_csv(result.history);
  } else {
    out << "best epoch " << result.best_epoch << " val_acc " << result.best_val_acc
        << "; wrote " << ckpt_path.string() << ", history.csv, metrics.json\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string ckpt;
  std::string data;
  std::optional<double> ambient;
  std::size_t seeds = 0;  // 0: 5 for spiking models, 1 otherwise
  std::string expect_arch;
};

Network load_checked(const std::string& ckpt, const std::string& expect_arch) {
  auto ck = load_checkpoint(ckpt);
  if (!expect_arch.empty() && to_string(ck.spec.family) != expect_arch)
    throw ValidationError("checkpoint " + ckpt + " holds a " + to_string(ck.spec.family) +
                          " model, but " + expect_arch + " was requested");
  return Network::from_checkpoint(ck);
}

int cmd_eval(const EvalArgs& a, const std::string& invocation, std::ostream& out) {
  if (a.ckpt.empty() || a.data.empty()) throw UsageError("--ckpt and --data are required");
  Network net = load_checked(a.ckpt, a.expect_arch);
  const auto ds = load_dataset(a.data);
  if (ds.manifest.num_classes() != net.spec().num_classes)
    throw ValidationError("dataset classes do not match the checkpoint's num_classes");
  const std::size_t n_seeds = a.seeds ? a.seeds : (net.spiking() ? 5 : 1);

  const fs::path dir(a.common.out_dir);
  json m;
  m["command"] = "eval";
  m["invocation"] = invocation;
  m["seed"] = a.common.seed;
  m["model"] = to_string(net.spec().family);
  m["frames"] = ds.frames.size();
  std::vector<std::uint64_t> encoder_seeds;
  for (std::size_t s = 0; s < n_seeds; ++s)
    encoder_seeds.push_back(derive_seed(a.common.seed, {s}));
  m["encoder_seeds"] = encoder_seeds;

  double seconds = 0.0;
  auto run_condition = [&](std::optional<double> ambient, const char* csv_name) {
    std::vector<double> accs;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      EvalOptions opts;
      opts.ambient = ambient;
      opts.encoder_seed = encoder_seeds[s];
      opts.record_spikes = s == 0 && !ambient && net.spiking();
      const auto r = evaluate(net, ds.frames, opts);
      seconds += r.seconds;
      accs.push_back(r.accuracy);
      if (s == 0) write_file_atomic(dir / csv_name, r.confusion.to_csv());
      if (opts.record_spikes) {
        json rates = json::object();
        for (const auto& rec : r.spike_records) rates[rec.layer] = measure_spike_rate(rec);
        m["spike_rates"] = rates;
      }
    }
    return accuracy_summary(accs);
  };
  m["clean"] = run_condition(std::nullopt, "confusion.csv");
  if (a.ambient) {
    m["ambient"] = run_condition(a.ambient, "confusion_ambient.csv");
    m["ambient"]["lambda_bg"] = *a.ambient;
  }
  m["eval_seconds"] = seconds;
  m["checksums"] = {{"checkpoint", file_checksum(a.ckpt)},
                    {"dataset_manifest", file_checksum(fs::path(a.data) / "manifest")}};
  write_json(dir / "metrics.json", m);

  if (a.common.csv) {
    out << read_file(dir / "confusion.csv");
  } else {
    out << "clean accuracy mean " << m["clean"]["mean"].get<double>() << " over " << n_seeds
        << " seed(s)";
    if (a.ambient)
      out << "; ambient(" << *a.ambient << ") mean " << m["ambient"]["mean"].get<double>();
    out << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct ProfileArgs {
  Common common;
  std::string ckpt;
  std::string data;
  std::string accounting = "auto";
  std::size_t limit = 0;
};

int cmd_profile(const ProfileArgs& a, const std::string& invocation, std::ostream& out) {
  if (a.ckpt.empty() || a.data.empty()) throw UsageError("--ckpt and --data are required");
  Accounting acc = Accounting::kAuto;
  if (a.accounting == "cnn") acc = Accounting::kCnn;
  else if (a.accounting == "snn") acc = Accounting::kSnn;
  else if (a.accounting != "auto") throw UsageError("--accounting must be auto, cnn or snn");

  Network net = load_checked(a.ckpt, "");
  const auto ds = load_dataset(a.data);
  std::vector<Frame> frames = ds.frames;
  if (a.limit > 0 && a.limit < frames.size()) frames.resize(a.limit);
  const auto encoder_seed = derive_seed(a.common.seed, {0});
  const auto rep = profile_network(net, frames, encoder_seed, acc);

  const fs::path dir(a.common.out_dir);
  json m;
  m["command"] = "profile";
  m["invocation"] = invocation;
  m["seed"] = a.common.seed;
  m["encoder_seed"] = rep.encoder_seed;
  m["model"] = rep.model;
  m["samples"] = rep.samples;
  json layers = json::array();
  for (const auto& l : rep.layers) {
    json e;
    e["layer"] = l.name;
    e["slots"] = l.slots;
    e["r"] = l.rate ? json(*l.rate) : json(nullptr);
    e["flops"] = l.flops;
    layers.push_back(e);
  }
  m["layers"] = layers;
  m["total_flops"] = rep.total_flops;
  m["cnn_flops"] = rep.cnn_flops;
  m["snn_flops"] = rep.snn_flops ? json(*rep.snn_flops) : json(nullptr);
  m["reduction_percent"] = rep.reduction_percent ? json(*rep.reduction_percent) : json(nullptr);
  m["inference_ms_per_image"] = rep.inference_ms_per_image;
  const auto counts = count_params(net);
  m["params"] = counts.params;
  m["model_bytes_f32"] = counts.bytes_f32;
  m["checksums"] = {{"checkpoint", file_checksum(a.ckpt)},
                    {"dataset_manifest", file_checksum(fs::path(a.data) / "manifest")}};
  write_json(dir / "profile.json", m);
  write_file_atomic(dir / "profile.csv", profile_to_csv(rep));

  if (a.common.csv) {
    out << profile_to_csv(rep);
  } else {
    out << rep.model << " total FLOPs " << rep.total_flops << " (cnn baseline " << rep.cnn_flops
        << ")";
    if (rep.reduction_percent) out << ", reduction " << *rep.reduction_percent << "%";
    out << ", " << rep.inference_ms_per_image << " ms/image\n";
  }
  return 0;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out_dir, "Output directory (default $SPADNN_OUT_DIR)");
  sub->add_option("--seed", c.seed, "Seed recorded in every report");
  sub->add_flag("--csv", c.csv, "Print CSV instead of the text summary");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spiking and conventional gesture classifiers for 8x8 photon-count frames",
               "spadnn"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic gesture dataset");
  add_common(synth, synth_args.common);
  synth->add_option("--per-class", synth_args.per_class, "Frames per class")->required();
  synth->add_option("--rotation", synth_args.cfg.rotation_deg, "Rotation range in degrees");
  synth->add_option("--budget", synth_args.cfg.photon_budget, "Signal counts per covered pixel");
  synth->add_option("--background", synth_args.cfg.background, "Mean dark counts per pixel");

  ImportArgs import_args;
  auto* imp = app.add_subcommand("import", "Convert the released dataset to the native format");
  add_common(imp, import_args.common);
  imp->add_option("--src", import_args.src, "Released dataset directory")->required();

  TrainArgs train_args;
  auto* tr = app.add_subcommand("train", "Train a model");
  add_common(tr, train_args.common);
  train_args.app = tr;
  tr->add_option("--arch", train_args.arch, "Architecture config file or cnn|scnn|smlp");
  tr->add_option("--data", train_args.data, "Dataset directory");
  tr->add_option("--config", train_args.config, "Run config (JSON); flags override it");
  tr->add_option("--epochs", train_args.cfg.max_epochs, "Maximum epochs");
  tr->add_option("--patience", train_args.cfg.patience, "Early-stopping patience");
  tr->add_option("--batch-size", train_args.cfg.batch_size, "Mini-batch size");
  tr->add_option("--lr", train_args.cfg.lr, "Adam learning rate");
  tr->add_option("--timesteps", train_args.cfg.timesteps, "Timesteps for spiking models");
  tr->add_option("--val-ratio", train_args.val_ratio, "Validation fraction");

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint, optionally under ambient light");
  add_common(ev, eval_args.common);
  ev->add_option("--ckpt", eval_args.ckpt, "Checkpoint file")->required();
  ev->add_option("--data", eval_args.data, "Test dataset directory")->required();
  ev->add_option("--ambient", eval_args.ambient, "Ambient photons per pixel (lambda_bg)");
  ev->add_option("--seeds", eval_args.seeds, "Encoder seeds to average");
  ev->add_option("--expect-arch", eval_args.expect_arch, "Reject checkpoints of another family");

  ProfileArgs prof_args;
  auto* pr = app.add_subcommand("profile", "Count FLOPs and spike rates of a checkpoint");
  add_common(pr, prof_args.common);
  pr->add_option("--ckpt", prof_args.ckpt, "Checkpoint file")->required();
  pr->add_option("--data", prof_args.data, "Dataset directory")->required();
  pr->add_option("--accounting", prof_args.accounting, "auto|cnn|snn");
  pr->add_option("--limit", prof_args.limit, "Profile only the first N frames");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kUsage);
  }

  std::string invocation = "spadnn";
  for (const auto& a : args) invocation += " " + a;

  try {
    if (synth->parsed()) return cmd_synth(synth_args, invocation, out);
    if (imp->parsed()) return cmd_import(import_args, out);
    if (tr->parsed()) return cmd_train(train_args, invocation, out);
    if (ev->parsed()) return cmd_eval(eval_args, invocation, out);
    if (pr->parsed()) return cmd_profile(prof_args, invocation, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  }
  return static_cast<int>(ExitCode::kUsage);
}

}  // namespace spadnn
