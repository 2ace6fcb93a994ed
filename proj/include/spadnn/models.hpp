#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "spadnn/ops.hpp"
#include "spadnn/spiking.hpp"
#include "spadnn/tensor.hpp"

namespace spadnn {

enum class ArchFamily { kCnn, kScnn, kSmlp };

std::string to_string(ArchFamily family);
ArchFamily parse_family(const std::string& name);

enum class LayerKind { kConv, kBatchNorm, kPool, kFlatten, kFc, kDropout, kSpike, kRelu };

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::kFlatten;
  std::size_t out_channels = 0;  // conv
  std::size_t kernel = 0;        // conv
  std::size_t stride = 1;        // conv
  std::size_t padding = 0;       // conv
  std::size_t window = 0;        // pool
  std::size_t out_features = 0;  // fc
  double dropout = 0.0;          // dropout probability

  static LayerSpec conv(std::size_t out_ch, std::size_t k, std::size_t stride = 1,
                        std::size_t pad = 0);
  static LayerSpec batchnorm();
  static LayerSpec pool(std::size_t window);
  static LayerSpec flatten();
  static LayerSpec fc(std::size_t out);
  static LayerSpec drop(double p);
  static LayerSpec spike();
  static LayerSpec relu();

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ArchitectureSpec {
  ArchFamily family = ArchFamily::kScnn;
  std::vector<LayerSpec> layers;
  std::array<std::size_t, 3> input_shape{1, 25, 25};
  std::size_t num_classes = 11;
  std::size_t timesteps = 8;  // spiking families only
  double v_threshold = 1.0;
  double surrogate_alpha = 4.0;

  bool spiking() const { return family != ArchFamily::kCnn; }
  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

ArchitectureSpec default_spec(ArchFamily family);

// Per-layer output shapes (without the batch axis). Throws ValidationError
// naming the first layer whose shape does not chain.
std::vector<Shape> infer_shapes(const ArchitectureSpec& spec);
void validate(const ArchitectureSpec& spec);

// Same topology with spike layers mapped to ReLU and the trailing output
// spike layer dropped; used for equal-topology FLOPs comparison.
ArchitectureSpec to_cnn(const ArchitectureSpec& spec);

// Structured-text (JSON) form shared by .cfg files and checkpoint headers.
std::string spec_to_text(const ArchitectureSpec& spec);
ArchitectureSpec spec_from_text(const std::string& text);
ArchitectureSpec load_arch_config(const std::filesystem::path& path);
void save_arch_config(const ArchitectureSpec& spec, const std::filesystem::path& path);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct NamedBuffer {
  std::string name;
  std::vector<double>* values;
};

// Spikes entering one synaptic layer, summed over timesteps and samples.
struct SpikeRecord {
  std::size_t layer_index = 0;
  std::string layer;
  std::size_t neurons = 0;  // input elements per sample
  std::size_t samples = 0;
  double spikes = 0.0;
};

class Layer;
struct ModelCheckpoint;

class Network {
 public:
  // Kaiming-uniform (fan-in) weights, zero biases, unit BN scale.
  static Network build(const ArchitectureSpec& spec, std::uint64_t seed);
  static Network from_checkpoint(const ModelCheckpoint& ckpt);

  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;
  ~Network();

  const ArchitectureSpec& spec() const { return spec_; }
  bool spiking() const { return spec_.spiking(); }

  void set_mode(Mode mode) { mode_ = mode; }
  Mode mode() const { return mode_; }

  // One pass for a CNN, one timestep for a spiking network. Input is
  // [B, C, H, W] matching spec().input_shape.
  Tensor forward(const Tensor& x);

  void reset_states();
  bool states_fresh() const { return fresh_; }

  std::vector<NamedTensor> parameters() const;
  std::vector<NamedBuffer> buffers();
  void zero_grad();
  // Rounds parameters and running statistics to float32-representable
  // values, the storage precision of checkpoints.
  void round_to_storage();

  void set_recording(bool on);
  void clear_records();
  void note_recorded_samples(std::size_t batch);
  std::vector<SpikeRecord> spike_records() const;

  ModelCheckpoint to_checkpoint() const;

 private:
  explicit Network(ArchitectureSpec spec);

  ArchitectureSpec spec_;
  std::vector<Shape> shapes_;
  std::vector<std::unique_ptr<Layer>> layers_;
  Mode mode_ = Mode::kTrain;
  bool fresh_ = true;
  bool recording_ = false;
};

struct CountSummary {
  std::size_t params = 0;
  std::size_t bytes_f32 = 0;
};

CountSummary count_params(const Network& network);

}  // namespace spadnn
