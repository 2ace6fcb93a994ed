#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spadnn/checkpoint.hpp"
#include "spadnn/frame.hpp"
#include "spadnn/imaging.hpp"
#include "spadnn/models.hpp"

namespace spadnn {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 300;
  std::size_t patience = 20;
  std::uint64_t seed = 0;
  std::size_t timesteps = 8;

  void validate() const;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

// One bias-corrected Adam update of `params` in place. `step` counts from 1.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamMoments& moments, const TrainConfig& cfg, std::size_t step,
               std::string_view name = "param");

// Adam over every trainable tensor of a network.
class Adam {
 public:
  Adam(const Network& network, TrainConfig cfg);
  void step();
  std::size_t steps() const { return step_; }

 private:
  std::vector<NamedTensor> params_;
  std::vector<AdamMoments> moments_;
  TrainConfig cfg_;
  std::size_t step_ = 0;
};

// Tracks the best validation score; stops after `patience` epochs without a
// strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);

  // Returns true when `score` is a new best.
  bool observe(std::size_t epoch, double score);
  bool should_stop() const { return since_best_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_score() const { return best_score_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  double best_score_ = -1.0;
  std::size_t since_best_ = 0;
  bool seen_ = false;
};

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0);

  void add(int truth, int predicted);
  std::size_t classes() const { return k_; }
  std::size_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * k_ + predicted];
  }
  std::size_t total() const;
  std::size_t row_sum(std::size_t truth) const;
  double accuracy() const;
  std::string to_csv() const;

 private:
  std::size_t k_;
  std::vector<std::size_t> counts_;
};

// normalize -> bicubic resize to the network input extent, as [1, H, W].
std::vector<double> preprocess(const Frame& frame, std::size_t rows, std::size_t cols);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

std::string history_to_csv(const std::vector<EpochRecord>& history);

struct TrainResult {
  ModelCheckpoint best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_acc = 0.0;
  bool early_stopped = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch training with seeded shuffling and per-sample Poisson encoding
// (spiking networks), cross-entropy on logits or firing rates, Adam, and early
// stopping on validation accuracy. `network` is left holding the last epoch's
// weights; the best ones are in the returned checkpoint.
TrainResult train(Network& network, std::span<const Frame> train_set,
                  std::span<const Frame> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

struct EvalOptions {
  std::optional<double> ambient;  // lambda_bg injected before normalisation
  std::uint64_t encoder_seed = 0;
  std::size_t batch_size = 64;
  bool record_spikes = false;
};

struct EvalResult {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::vector<int> predictions;
  std::vector<SpikeRecord> spike_records;  // spiking networks with record_spikes
  double seconds = 0.0;
};

EvalResult evaluate(Network& network, std::span<const Frame> frames,
                    const EvalOptions& opts = {});

}  // namespace spadnn
