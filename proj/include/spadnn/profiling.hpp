#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spadnn/frame.hpp"
#include "spadnn/models.hpp"

namespace spadnn {

// Multiply-accumulates of one convolution: CH_in * Kx * Ky * H_out * W_out * CH_out.
std::uint64_t mac_conv(std::uint64_t ch_in, std::uint64_t k_x, std::uint64_t k_y,
                       std::uint64_t h_out, std::uint64_t w_out, std::uint64_t ch_out);

// A conv or fc layer with its synapse slot count: MACs for a CNN, ACCs
// (accumulate-only, same slot count) for a spiking network.
struct SynapticLayer {
  std::size_t layer_index = 0;
  LayerKind kind = LayerKind::kFc;
  std::string name;
  std::uint64_t slots = 0;
  std::size_t input_neurons = 0;
};

std::vector<SynapticLayer> synaptic_layers(const ArchitectureSpec& spec);

// sum_conv 2 * MAC_conv + sum_fc 2 * I * O. Batch norm, pooling and
// activations are not counted.
std::uint64_t flops_cnn(const ArchitectureSpec& spec);

// Spikes entering the layer over all timesteps and samples, per neuron and
// sample; lies in [0, T].
double measure_spike_rate(const SpikeRecord& record);

// sum over synaptic layers of ACC * r, with r the rate of the layer's input
// spikes; `rates` holds one entry per synaptic layer in network order.
double flops_snn(const ArchitectureSpec& spec, std::span<const double> rates);

struct LayerProfile {
  std::string name;
  std::uint64_t slots = 0;
  std::optional<double> rate;
  double flops = 0.0;
};

struct ProfileReport {
  std::string model;
  std::vector<LayerProfile> layers;
  double total_flops = 0.0;
  std::uint64_t cnn_flops = 0;        // same topology, conventional network
  std::optional<double> snn_flops;
  std::optional<double> reduction_percent;  // (1 - snn / cnn) * 100
  double inference_ms_per_image = 0.0;
  std::size_t samples = 0;
  std::uint64_t encoder_seed = 0;
};

enum class Accounting { kAuto, kCnn, kSnn };

// Evaluates `frames` with spike recording and assembles per-layer FLOPs.
// kSnn on a conventional network is a contract error.
ProfileReport profile_network(Network& network, std::span<const Frame> frames,
                              std::uint64_t encoder_seed,
                              Accounting accounting = Accounting::kAuto);

std::string profile_to_csv(const ProfileReport& report);

}  // namespace spadnn
