#include "spadnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "spadnn/errors.hpp"
#include "spadnn/ops.hpp"
#include "spadnn/temporal.hpp"
#include "spadnn/util.hpp"

namespace spadnn {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ValidationError("Adam betas must lie in [0,1)");
  if (!(eps_adam > 0.0)) throw ValidationError("Adam epsilon must be > 0");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
  if (patience < 1) throw ValidationError("patience must be >= 1");
  if (timesteps < 1) throw ValidationError("timesteps must be >= 1");
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamMoments& moments, const TrainConfig& cfg, std::size_t step,
               std::string_view name) {
  if (step < 1) throw ContractError("adam_step: step index starts at 1");
  if (grads.size() != params.size())
    throw DimensionError("adam_step: " + std::string(name) + " has " +
                         std::to_string(params.size()) + " values but " +
                         std::to_string(grads.size()) + " gradients");
  for (double g : grads)
    if (!std::isfinite(g))
      throw OptimizerError("non-finite gradient for parameter '" + std::string(name) + "'");
  if (moments.m.empty()) {
    moments.m.assign(params.size(), 0.0);
    moments.v.assign(params.size(), 0.0);
  }
  if (moments.m.size() != params.size() || moments.v.size() != params.size())
    throw DimensionError("adam_step: moment buffers do not match " + std::string(name));

  const double t = static_cast<double>(step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    moments.m[i] = cfg.beta1 * moments.m[i] + (1.0 - cfg.beta1) * g;
    moments.v[i] = cfg.beta2 * moments.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = moments.m[i] / c1;
    const double v_hat = moments.v[i] / c2;
    params[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps_adam);
  }
}

Adam::Adam(const Network& network, TrainConfig cfg)
    : params_(network.parameters()), moments_(params_.size()), cfg_(cfg) {
  cfg_.validate();
}

void Adam::step() {
  ++step_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.tensor.has_grad()) continue;
    adam_step(p.tensor.mutable_data(), p.tensor.grad(), moments_[i], cfg_, step_, p.name);
  }
}

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
  if (patience < 1) throw ValidationError("patience must be >= 1");
}

bool EarlyStopping::observe(std::size_t epoch, double score) {
  if (!seen_ || score > best_score_) {
    seen_ = true;
    best_score_ = score;
    best_epoch_ = epoch;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : k_(classes), counts_(classes * classes, 0) {}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= k_ ||
      static_cast<std::size_t>(predicted) >= k_)
    throw DataError("confusion matrix entry (" + std::to_string(truth) + "," +
                    std::to_string(predicted) + ") outside " + std::to_string(k_) +
                    " classes");
  ++counts_[static_cast<std::size_t>(truth) * k_ + static_cast<std::size_t>(predicted)];
}

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::size_t s = 0;
  for (std::size_t j = 0; j < k_; ++j) s += at(truth, j);
  return s;
}

double ConfusionMatrix::accuracy() const {
  const auto n = total();
  if (n == 0) return 0.0;
  std::size_t diag = 0;
  for (std::size_t i = 0; i < k_; ++i) diag += at(i, i);
  return static_cast<double>(diag) / static_cast<double>(n);
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream os;
  os << "true\\pred";
  for (std::size_t j = 0; j < k_; ++j) os << ',' << j;
  os << '\n';
  for (std::size_t i = 0; i < k_; ++i) {
    os << i;
    for (std::size_t j = 0; j < k_; ++j) os << ',' << at(i, j);
    os << '\n';
  }
  return os.str();
}

std::vector<double> preprocess(const Frame& frame, std::size_t rows, std::size_t cols) {
  return bicubic_resize(normalize(frame), rows, cols).pixels;
}

std::string history_to_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,train_acc,val_acc\n";
  for (const auto& r : history)
    os << r.epoch << ',' << r.train_loss << ',' << r.train_acc << ',' << r.val_acc << '\n';
  return os.str();
}

namespace {

void check_labels(std::span<const Frame> frames, std::size_t k, const char* what) {
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (!frames[i].labeled() || static_cast<std::size_t>(frames[i].label) >= k)
      throw DataError(std::string(what) + " frame " + std::to_string(i) + " has label " +
                      std::to_string(frames[i].label) + " outside [0," +
                      std::to_string(k) + ")");
}

int argmax_row(std::span<const double> row) {
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

// Bicubic ringing can leave [0,1]; encoder intensities are probabilities.
void clamp_unit(std::vector<double>& v) {
  for (auto& x : v) x = std::clamp(x, 0.0, 1.0);
}

// Runs one mini-batch through the network. `images` are preprocessed
// samples; `encoder_seeds` gives one Poisson stream per sample.
Tensor forward_batch(Network& net, const std::vector<const std::vector<double>*>& images,
                     const std::vector<std::uint64_t>& encoder_seeds) {
  const auto& in = net.spec().input_shape;
  const std::size_t per = in[0] * in[1] * in[2];
  const std::size_t batch = images.size();
  const Shape shape{batch, in[0], in[1], in[2]};
  if (!net.spiking()) {
    std::vector<double> x(batch * per);
    for (std::size_t b = 0; b < batch; ++b)
      std::copy(images[b]->begin(), images[b]->end(), x.begin() + b * per);
    return net.forward(Tensor::from(shape, std::move(x)));
  }
  const std::size_t steps = net.spec().timesteps;
  std::vector<std::vector<double>> frames(steps, std::vector<double>(batch * per));
  for (std::size_t b = 0; b < batch; ++b) {
    auto pixels = *images[b];
    clamp_unit(pixels);
    Rng rng(encoder_seeds[b]);
    const auto train = poisson_encode(Tensor::from({in[0], in[1], in[2]}, std::move(pixels)),
                                      steps, rng);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto f = train.frames[t].data();
      std::copy(f.begin(), f.end(), frames[t].begin() + b * per);
    }
  }
  SpikeTrain batch_train;
  for (auto& f : frames) batch_train.frames.push_back(Tensor::from(shape, std::move(f)));
  net.reset_states();
  return run_temporal(net, batch_train).rate;
}

}  // namespace

TrainResult train(Network& network, std::span<const Frame> train_set,
                  std::span<const Frame> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  if (val_set.empty()) throw DataError("validation set is empty");
  const auto& spec = network.spec();
  if (network.spiking() && spec.timesteps != cfg.timesteps)
    throw ValidationError("training timesteps " + std::to_string(cfg.timesteps) +
                          " differ from the architecture's " +
                          std::to_string(spec.timesteps));
  check_labels(train_set, spec.num_classes, "training");
  check_labels(val_set, spec.num_classes, "validation");
  if (spec.input_shape[0] != 1)
    throw ValidationError("frames are single-channel; input_shape must start with 1");

  std::vector<std::vector<double>> images;
  images.reserve(train_set.size());
  for (const auto& f : train_set)
    images.push_back(preprocess(f, spec.input_shape[1], spec.input_shape[2]));

  Adam adam(network, cfg);
  EarlyStopping stopper(cfg.patience);
  TrainResult result;
  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    network.set_mode(Mode::kTrain);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, {0x5f, epoch}));
    for (std::size_t i = n; i > 1; --i) {
      const auto j = std::min(i - 1, static_cast<std::size_t>(uniform01(shuffle_rng) *
                                                              static_cast<double>(i)));
      std::swap(order[i - 1], order[j]);
    }

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      std::vector<const std::vector<double>*> batch_images;
      std::vector<std::uint64_t> seeds;
      std::vector<int> labels;
      for (std::size_t k = start; k < end; ++k) {
        batch_images.push_back(&images[order[k]]);
        seeds.push_back(derive_seed(cfg.seed, {0xe0, epoch, order[k]}));
        labels.push_back(train_set[order[k]].label);
      }
      Tensor out = forward_batch(network, batch_images, seeds);
      Tensor loss = softmax_cross_entropy(out, labels);
      if (!std::isfinite(loss.item()))
        throw TrainingError("loss diverged (" + std::to_string(loss.item()) +
                            ") at epoch " + std::to_string(epoch) + ", batch starting " +
                            std::to_string(start));
      network.zero_grad();
      backprop(loss);
      adam.step();
      network.round_to_storage();

      const std::size_t k = spec.num_classes;
      const auto o = out.data();
      for (std::size_t b = 0; b < labels.size(); ++b)
        if (argmax_row(o.subspan(b * k, k)) == labels[b]) ++correct;
      loss_sum += loss.item() * static_cast<double>(labels.size());
    }

    EvalOptions vopts;
    vopts.encoder_seed = derive_seed(cfg.seed, {0x7a1});
    network.set_mode(Mode::kEval);
    const auto val = evaluate(network, val_set, vopts);
    network.set_mode(Mode::kTrain);

    EpochRecord rec{epoch, loss_sum / static_cast<double>(n),
                    static_cast<double>(correct) / static_cast<double>(n), val.accuracy};
    result.history.push_back(rec);
    if (stopper.observe(epoch, val.accuracy)) {
      result.best = network.to_checkpoint();
      result.best.meta.epoch = epoch;
      result.best.meta.seed = cfg.seed;
      result.best.meta.metrics = {{"train_acc", rec.train_acc},
                                  {"train_loss", rec.train_loss},
                                  {"val_acc", rec.val_acc}};
    }
    if (on_epoch) on_epoch(rec);
    if (stopper.should_stop()) {
      result.early_stopped = true;
      break;
    }
  }
  result.best_epoch = stopper.best_epoch();
  result.best_val_acc = stopper.best_score();
  return result;
}

EvalResult evaluate(Network& network, std::span<const Frame> frames, const EvalOptions& opts) {
  const auto& spec = network.spec();
  check_labels(frames, spec.num_classes, "evaluation");
  if (opts.batch_size < 1) throw ValidationError("batch size must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  const Mode saved_mode = network.mode();
  network.set_mode(Mode::kEval);
  if (opts.record_spikes) {
    network.clear_records();
    network.set_recording(true);
  }

  EvalResult res;
  res.confusion = ConfusionMatrix(spec.num_classes);
  res.predictions.reserve(frames.size());
  for (std::size_t start = 0; start < frames.size(); start += opts.batch_size) {
    const std::size_t end = std::min(frames.size(), start + opts.batch_size);
    std::vector<std::vector<double>> images;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = start; i < end; ++i) {
      Frame f = frames[i];
      if (opts.ambient) {
        Rng rng(derive_seed(opts.encoder_seed, {0xa1, i}));
        f = inject_ambient(f, *opts.ambient, rng);
      }
      images.push_back(preprocess(f, spec.input_shape[1], spec.input_shape[2]));
      seeds.push_back(derive_seed(opts.encoder_seed, {0xe7, i}));
    }
    std::vector<const std::vector<double>*> ptrs;
    for (const auto& im : images) ptrs.push_back(&im);
    const Tensor out = forward_batch(network, ptrs, seeds);
    const auto o = out.data();
    for (std::size_t b = 0; b < ptrs.size(); ++b) {
      const int pred = argmax_row(o.subspan(b * spec.num_classes, spec.num_classes));
      res.predictions.push_back(pred);
      res.confusion.add(frames[start + b].label, pred);
    }
  }
  if (opts.record_spikes) {
    res.spike_records = network.spike_records();
    network.set_recording(false);
  }
  network.set_mode(saved_mode);
  res.accuracy = res.confusion.accuracy();
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace spadnn
