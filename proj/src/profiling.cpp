#include "spadnn/profiling.hpp"

#include <sstream>

#include "spadnn/errors.hpp"
#include "spadnn/training.hpp"

namespace spadnn {

std::uint64_t mac_conv(std::uint64_t ch_in, std::uint64_t k_x, std::uint64_t k_y,
                       std::uint64_t h_out, std::uint64_t w_out, std::uint64_t ch_out) {
  if (ch_in < 1 || k_x < 1 || k_y < 1 || h_out < 1 || w_out < 1 || ch_out < 1)
    throw DomainError("mac_conv: every extent must be >= 1");
  return ch_in * k_x * k_y * h_out * w_out * ch_out;
}

std::vector<SynapticLayer> synaptic_layers(const ArchitectureSpec& spec) {
  const auto shapes = infer_shapes(spec);
  std::vector<SynapticLayer> out;
  Shape in{spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const auto& o = shapes[i];
    if (l.kind == LayerKind::kConv) {
      out.push_back({i, l.kind, "layers." + std::to_string(i) + ".conv",
                     mac_conv(in[0], l.kernel, l.kernel, o[1], o[2], o[0]),
                     shape_numel(in)});
    } else if (l.kind == LayerKind::kFc) {
      out.push_back({i, l.kind, "layers." + std::to_string(i) + ".fc",
                     static_cast<std::uint64_t>(in[0]) * o[0], in[0]});
    }
    in = o;
  }
  return out;
}

std::uint64_t flops_cnn(const ArchitectureSpec& spec) {
  if (spec.spiking())
    throw ContractError("flops_cnn applies to conventional networks; use flops_snn for " +
                        to_string(spec.family));
  std::uint64_t total = 0;
  for (const auto& s : synaptic_layers(spec)) total += 2 * s.slots;
  return total;
}

double measure_spike_rate(const SpikeRecord& record) {
  if (record.samples == 0 || record.neurons == 0)
    throw ContractError("measure_spike_rate: no recorded forward pass for " + record.layer);
  return record.spikes /
         (static_cast<double>(record.neurons) * static_cast<double>(record.samples));
}

double flops_snn(const ArchitectureSpec& spec, std::span<const double> rates) {
  const auto layers = synaptic_layers(spec);
  if (rates.size() != layers.size())
    throw ContractError("flops_snn: " + std::to_string(layers.size()) +
                        " synaptic layers but " + std::to_string(rates.size()) + " rates");
  double total = 0.0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!(rates[i] >= 0.0))
      throw ContractError("flops_snn: missing or negative rate for " + layers[i].name);
    total += static_cast<double>(layers[i].slots) * rates[i];
  }
  return total;
}

ProfileReport profile_network(Network& network, std::span<const Frame> frames,
                              std::uint64_t encoder_seed, Accounting accounting) {
  const auto& spec = network.spec();
  if (accounting == Accounting::kSnn && !spec.spiking())
    throw ContractError("spiking accounting requested for a cnn model");
  if (accounting == Accounting::kCnn && spec.spiking())
    throw ContractError("MAC accounting requested for a spiking model; it is reported "
                        "as the same-topology baseline");
  if (frames.empty()) throw DataError("profiling needs at least one frame");

  EvalOptions opts;
  opts.encoder_seed = encoder_seed;
  opts.record_spikes = spec.spiking();
  opts.batch_size = 1;
  const auto eval = evaluate(network, frames, opts);

  ProfileReport rep;
  rep.model = to_string(spec.family);
  rep.samples = frames.size();
  rep.encoder_seed = encoder_seed;
  rep.inference_ms_per_image = 1e3 * eval.seconds / static_cast<double>(frames.size());
  const auto layers = synaptic_layers(spec);
  const ArchitectureSpec baseline = spec.spiking() ? to_cnn(spec) : spec;
  rep.cnn_flops = flops_cnn(baseline);

  if (!spec.spiking()) {
    for (const auto& l : layers)
      rep.layers.push_back({l.name, l.slots, std::nullopt, 2.0 * static_cast<double>(l.slots)});
    rep.total_flops = static_cast<double>(rep.cnn_flops);
    return rep;
  }
  std::vector<double> rates;
  for (const auto& r : eval.spike_records) rates.push_back(measure_spike_rate(r));
  for (std::size_t i = 0; i < layers.size(); ++i)
    rep.layers.push_back(
        {layers[i].name, layers[i].slots, rates[i], static_cast<double>(layers[i].slots) * rates[i]});
  rep.snn_flops = flops_snn(spec, rates);
  rep.total_flops = *rep.snn_flops;
  rep.reduction_percent = (1.0 - *rep.snn_flops / static_cast<double>(rep.cnn_flops)) * 100.0;
  return rep;
}

std::string profile_to_csv(const ProfileReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "layer,slots,r,flops\n";
  for (const auto& l : report.layers) {
    os << l.name << ',' << l.slots << ',';
    if (l.rate) os << *l.rate;
    os << ',' << l.flops << '\n';
  }
  os << "total,,," << report.total_flops << '\n';
  return os.str();
}

}  // namespace spadnn
