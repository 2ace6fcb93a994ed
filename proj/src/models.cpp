#include "spadnn/models.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>

#include "spadnn/checkpoint.hpp"
#include "spadnn/errors.hpp"
#include "spadnn/util.hpp"

namespace spadnn {

using json = nlohmann::ordered_json;

std::string to_string(ArchFamily family) {
  switch (family) {
    case ArchFamily::kCnn: return "cnn";
    case ArchFamily::kScnn: return "scnn";
    case ArchFamily::kSmlp: return "smlp";
  }
  return "?";
}

ArchFamily parse_family(const std::string& name) {
  if (name == "cnn") return ArchFamily::kCnn;
  if (name == "scnn") return ArchFamily::kScnn;
  if (name == "smlp") return ArchFamily::kSmlp;
  throw ValidationError("unknown architecture family '" + name +
                        "' (expected cnn, scnn or smlp)");
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kPool: return "pool";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kFc: return "fc";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kSpike: return "spike";
    case LayerKind::kRelu: return "relu";
  }
  return "?";
}

namespace {

LayerKind parse_kind(const std::string& name) {
  for (auto k : {LayerKind::kConv, LayerKind::kBatchNorm, LayerKind::kPool,
                 LayerKind::kFlatten, LayerKind::kFc, LayerKind::kDropout,
                 LayerKind::kSpike, LayerKind::kRelu})
    if (to_string(k) == name) return k;
  throw ValidationError("unknown layer type '" + name + "'");
}

}  // namespace

LayerSpec LayerSpec::conv(std::size_t out_ch, std::size_t k, std::size_t stride,
                          std::size_t pad) {
  LayerSpec l;
  l.kind = LayerKind::kConv;
  l.out_channels = out_ch;
  l.kernel = k;
  l.stride = stride;
  l.padding = pad;
  return l;
}
LayerSpec LayerSpec::batchnorm() { LayerSpec l; l.kind = LayerKind::kBatchNorm; return l; }
LayerSpec LayerSpec::pool(std::size_t window) {
  LayerSpec l;
  l.kind = LayerKind::kPool;
  l.window = window;
  return l;
}
LayerSpec LayerSpec::flatten() { LayerSpec l; l.kind = LayerKind::kFlatten; return l; }
LayerSpec LayerSpec::fc(std::size_t out) {
  LayerSpec l;
  l.kind = LayerKind::kFc;
  l.out_features = out;
  return l;
}
LayerSpec LayerSpec::drop(double p) {
  LayerSpec l;
  l.kind = LayerKind::kDropout;
  l.dropout = p;
  return l;
}
LayerSpec LayerSpec::spike() { LayerSpec l; l.kind = LayerKind::kSpike; return l; }
LayerSpec LayerSpec::relu() { LayerSpec l; l.kind = LayerKind::kRelu; return l; }

ArchitectureSpec default_spec(ArchFamily family) {
  ArchitectureSpec s;
  s.family = family;
  using L = LayerSpec;
  if (family == ArchFamily::kSmlp) {
    s.layers = {L::flatten(), L::fc(320), L::spike(), L::drop(0.5),
                L::fc(256),   L::spike(), L::drop(0.5), L::fc(11), L::spike()};
    return s;
  }
  const bool spk = family == ArchFamily::kScnn;
  const L act = spk ? L::spike() : L::relu();
  s.layers = {L::conv(16, 3, 1, 1), L::batchnorm(), act, L::pool(2),
              L::conv(32, 3, 1, 1), L::batchnorm(), act, L::pool(2),
              L::flatten(),         L::fc(64),      act, L::fc(11)};
  if (spk) s.layers.push_back(L::spike());
  return s;
}

std::vector<Shape> infer_shapes(const ArchitectureSpec& spec) {
  for (auto extent : spec.input_shape)
    if (extent == 0) throw ValidationError("input_shape extents must be >= 1");
  if (spec.num_classes < 2) throw ValidationError("num_classes must be >= 2");
  if (spec.layers.empty()) throw ValidationError("architecture has no layers");

  Shape cur{spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};
  std::vector<Shape> shapes;
  shapes.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    auto fail = [&](const std::string& why) {
      return ValidationError("layers." + std::to_string(i) + " (" +
                             to_string(l.kind) + ") with input " +
                             shape_str(cur) + ": " + why);
    };
    switch (l.kind) {
      case LayerKind::kConv: {
        if (cur.size() != 3) throw fail("expects a [C,H,W] feature map");
        if (l.out_channels == 0 || l.kernel == 0 || l.stride == 0)
          throw fail("out_channels, kernel and stride must be >= 1");
        if (l.kernel > cur[1] + 2 * l.padding || l.kernel > cur[2] + 2 * l.padding)
          throw fail("kernel larger than padded input");
        cur = {l.out_channels, (cur[1] + 2 * l.padding - l.kernel) / l.stride + 1,
               (cur[2] + 2 * l.padding - l.kernel) / l.stride + 1};
        break;
      }
      case LayerKind::kBatchNorm:
        if (cur.size() != 3) throw fail("expects a [C,H,W] feature map");
        break;
      case LayerKind::kPool:
        if (cur.size() != 3) throw fail("expects a [C,H,W] feature map");
        if (l.window == 0 || l.window > cur[1] || l.window > cur[2])
          throw fail("window must be in [1, min(H,W)]");
        cur = {cur[0], cur[1] / l.window, cur[2] / l.window};
        break;
      case LayerKind::kFlatten:
        cur = {shape_numel(cur)};
        break;
      case LayerKind::kFc:
        if (cur.size() != 1) throw fail("expects a flat feature vector");
        if (l.out_features == 0) throw fail("out_features must be >= 1");
        cur = {l.out_features};
        break;
      case LayerKind::kDropout:
        if (!(l.dropout >= 0.0 && l.dropout < 1.0))
          throw fail("dropout probability must be in [0,1)");
        break;
      case LayerKind::kSpike:
      case LayerKind::kRelu:
        break;
    }
    shapes.push_back(cur);
  }
  if (cur != Shape{spec.num_classes})
    throw ValidationError("network output " + shape_str(cur) +
                          " does not match num_classes " +
                          std::to_string(spec.num_classes));
  return shapes;
}

void validate(const ArchitectureSpec& spec) {
  infer_shapes(spec);
  bool has_spike = false;
  for (const auto& l : spec.layers) has_spike |= l.kind == LayerKind::kSpike;
  if (spec.spiking() && !has_spike)
    throw ValidationError(to_string(spec.family) +
                          " architecture must contain a spike layer");
  if (!spec.spiking() && has_spike)
    throw ValidationError("cnn architecture must not contain spike layers");
  if (spec.spiking()) {
    if (spec.timesteps < 1) throw ValidationError("timesteps must be >= 1");
    if (!(spec.v_threshold > 0.0) || !std::isfinite(spec.v_threshold))
      throw ValidationError("v_threshold must be positive and finite");
    if (!(spec.surrogate_alpha > 0.0) || !std::isfinite(spec.surrogate_alpha))
      throw ValidationError("surrogate_alpha must be positive and finite");
  }
}

ArchitectureSpec to_cnn(const ArchitectureSpec& spec) {
  ArchitectureSpec out = spec;
  out.family = ArchFamily::kCnn;
  for (auto& l : out.layers)
    if (l.kind == LayerKind::kSpike) l = LayerSpec::relu();
  if (spec.spiking() && !out.layers.empty() &&
      out.layers.back().kind == LayerKind::kRelu)
    out.layers.pop_back();
  return out;
}

namespace {

json spec_to_json(const ArchitectureSpec& spec) {
  json j;
  j["family"] = to_string(spec.family);
  j["input_shape"] = spec.input_shape;
  j["num_classes"] = spec.num_classes;
  if (spec.spiking()) {
    j["timesteps"] = spec.timesteps;
    j["v_threshold"] = spec.v_threshold;
    j["surrogate_alpha"] = spec.surrogate_alpha;
  }
  json layers = json::array();
  for (const auto& l : spec.layers) {
    json e;
    e["type"] = to_string(l.kind);
    switch (l.kind) {
      case LayerKind::kConv:
        e["out_channels"] = l.out_channels;
        e["kernel"] = l.kernel;
        e["stride"] = l.stride;
        e["padding"] = l.padding;
        break;
      case LayerKind::kPool: e["window"] = l.window; break;
      case LayerKind::kFc: e["out_features"] = l.out_features; break;
      case LayerKind::kDropout: e["p"] = l.dropout; break;
      default: break;
    }
    layers.push_back(std::move(e));
  }
  j["layers"] = std::move(layers);
  return j;
}

template <typename T>
T take(const json& obj, const char* key, T fallback, bool required = false) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) throw ValidationError(std::string("missing field '") + key + "'");
    return fallback;
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok |= it.key() == k;
    if (!ok) throw ValidationError("unknown field '" + it.key() + "' in " + where);
  }
}

}  // namespace

std::string spec_to_text(const ArchitectureSpec& spec) {
  return spec_to_json(spec).dump(2) + "\n";
}

ArchitectureSpec spec_from_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("architecture config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("architecture config must be an object");
  reject_unknown(j, {"family", "input_shape", "num_classes", "timesteps",
                     "v_threshold", "surrogate_alpha", "layers"},
                 "architecture config");
  ArchitectureSpec spec;
  spec.family = parse_family(take<std::string>(j, "family", "", true));
  spec.input_shape = take(j, "input_shape", spec.input_shape);
  spec.num_classes = take(j, "num_classes", spec.num_classes);
  spec.timesteps = take(j, "timesteps", spec.timesteps);
  spec.v_threshold = take(j, "v_threshold", spec.v_threshold);
  spec.surrogate_alpha = take(j, "surrogate_alpha", spec.surrogate_alpha);
  const auto& layers = j.at("layers");
  if (!layers.is_array()) throw ValidationError("'layers' must be an array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& e = layers[i];
    const std::string where = "layer " + std::to_string(i);
    if (!e.is_object()) throw ValidationError(where + " must be an object");
    LayerSpec l;
    l.kind = parse_kind(take<std::string>(e, "type", "", true));
    switch (l.kind) {
      case LayerKind::kConv:
        reject_unknown(e, {"type", "out_channels", "kernel", "stride", "padding"}, where);
        l.out_channels = take<std::size_t>(e, "out_channels", 0, true);
        l.kernel = take<std::size_t>(e, "kernel", 0, true);
        l.stride = take<std::size_t>(e, "stride", 1);
        l.padding = take<std::size_t>(e, "padding", 0);
        break;
      case LayerKind::kPool:
        reject_unknown(e, {"type", "window"}, where);
        l.window = take<std::size_t>(e, "window", 0, true);
        break;
      case LayerKind::kFc:
        reject_unknown(e, {"type", "out_features"}, where);
        l.out_features = take<std::size_t>(e, "out_features", 0, true);
        break;
      case LayerKind::kDropout:
        reject_unknown(e, {"type", "p"}, where);
        l.dropout = take<double>(e, "p", 0.5);
        break;
      default:
        reject_unknown(e, {"type"}, where);
        break;
    }
    spec.layers.push_back(l);
  }
  validate(spec);
  return spec;
}

ArchitectureSpec load_arch_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw IoError("architecture config not found: " + path.string());
  return spec_from_text(read_file(path));
}

void save_arch_config(const ArchitectureSpec& spec,
                      const std::filesystem::path& path) {
  write_file_atomic(path, spec_to_text(spec));
}

// ---------------------------------------------------------------------------
// Layers

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  virtual void reset_state() {}
  virtual void collect_params(const std::string&, std::vector<NamedTensor>&) const {}
  virtual void collect_buffers(const std::string&, std::vector<NamedBuffer>&) {}
  virtual bool synaptic() const { return false; }

  // Input spike accounting (synaptic layers only).
  bool recording = false;
  double recorded_spikes = 0.0;
  std::size_t recorded_neurons = 0;
  std::size_t recorded_samples = 0;

 protected:
  void record_input(const Tensor& x) {
    if (!recording || x.rank() == 0 || x.dim(0) == 0) return;
    double s = 0.0;
    for (double v : x.data()) s += v;
    recorded_spikes += s;
    recorded_neurons = x.numel() / x.dim(0);
  }
};

namespace {

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> w(shape_numel(shape));
  for (auto& v : w) v = (2.0 * uniform01(rng) - 1.0) * bound;
  return Tensor::from(std::move(shape), std::move(w), true);
}

class ConvLayer final : public Layer {
 public:
  ConvLayer(std::size_t in_ch, const LayerSpec& l, Rng& rng)
      : stride_(l.stride), pad_(l.padding) {
    weight_ = kaiming_uniform({l.out_channels, in_ch, l.kernel, l.kernel},
                              in_ch * l.kernel * l.kernel, rng);
    bias_ = Tensor::zeros({l.out_channels}, true);
  }
  Tensor forward(const Tensor& x, Mode) override {
    record_input(x);
    return conv2d(x, weight_, bias_, stride_, pad_);
  }
  void collect_params(const std::string& p, std::vector<NamedTensor>& out) const override {
    out.push_back({p + "weight", weight_});
    out.push_back({p + "bias", bias_});
  }
  bool synaptic() const override { return true; }

 private:
  Tensor weight_, bias_;
  std::size_t stride_, pad_;
};

class FcLayer final : public Layer {
 public:
  FcLayer(std::size_t in, const LayerSpec& l, Rng& rng) {
    weight_ = kaiming_uniform({l.out_features, in}, in, rng);
    bias_ = Tensor::zeros({l.out_features}, true);
  }
  Tensor forward(const Tensor& x, Mode) override {
    record_input(x);
    return affine(x, weight_, bias_);
  }
  void collect_params(const std::string& p, std::vector<NamedTensor>& out) const override {
    out.push_back({p + "weight", weight_});
    out.push_back({p + "bias", bias_});
  }
  bool synaptic() const override { return true; }

 private:
  Tensor weight_, bias_;
};

class BatchNormLayer final : public Layer {
 public:
  explicit BatchNormLayer(std::size_t ch)
      : gamma_(Tensor::full({ch}, 1.0, true)),
        beta_(Tensor::zeros({ch}, true)),
        state_(ch) {}
  Tensor forward(const Tensor& x, Mode mode) override {
    return batchnorm2d(x, gamma_, beta_, state_, mode);
  }
  void collect_params(const std::string& p, std::vector<NamedTensor>& out) const override {
    out.push_back({p + "gamma", gamma_});
    out.push_back({p + "beta", beta_});
  }
  void collect_buffers(const std::string& p, std::vector<NamedBuffer>& out) override {
    out.push_back({p + "running_mean", &state_.running_mean});
    out.push_back({p + "running_var", &state_.running_var});
  }

 private:
  Tensor gamma_, beta_;
  BatchNormState state_;
};

class PoolLayer final : public Layer {
 public:
  explicit PoolLayer(std::size_t window) : window_(window) {}
  Tensor forward(const Tensor& x, Mode) override {
    return maxpool2d(x, window_, PoolTail::kDrop);
  }

 private:
  std::size_t window_;
};

class FlattenLayer final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode) override { return flatten(x); }
};

class ReluLayer final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode) override { return relu(x); }
};

class SpikeLayer final : public Layer {
 public:
  SpikeLayer(double v_th, double alpha) : cfg_{alpha} { state_.v_th = v_th; }
  Tensor forward(const Tensor& x, Mode) override { return if_step(state_, x, cfg_); }
  void reset_state() override { state_.reset(); }

 private:
  IFState state_;
  SurrogateConfig cfg_;
};

// Inverted dropout. In a spiking network one mask is drawn per sample
// sequence and reused for every timestep until the next reset.
class DropoutLayer final : public Layer {
 public:
  DropoutLayer(double p, std::uint64_t seed, bool per_sequence)
      : p_(p), rng_(seed), per_sequence_(per_sequence) {}
  Tensor forward(const Tensor& x, Mode mode) override {
    if (mode == Mode::kEval || p_ == 0.0) return x;
    if (!per_sequence_ || !mask_.defined() || mask_.shape() != x.shape()) {
      std::vector<double> m(x.numel());
      const double keep = 1.0 / (1.0 - p_);
      for (auto& v : m) v = uniform01(rng_) < p_ ? 0.0 : keep;
      mask_ = Tensor::from(x.shape(), std::move(m));
    }
    return mul(x, mask_);
  }
  void reset_state() override { mask_ = Tensor(); }

 private:
  double p_;
  Rng rng_;
  bool per_sequence_;
  Tensor mask_;
};

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

// ---------------------------------------------------------------------------
// Network

Network::Network(ArchitectureSpec spec) : spec_(std::move(spec)) {}
Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;
Network::~Network() = default;

Network Network::build(const ArchitectureSpec& spec, std::uint64_t seed) {
  validate(spec);
  Network net(spec);
  net.shapes_ = infer_shapes(spec);
  Rng rng(seed);
  Shape cur{spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    std::unique_ptr<Layer> layer;
    switch (l.kind) {
      case LayerKind::kConv: layer = std::make_unique<ConvLayer>(cur[0], l, rng); break;
      case LayerKind::kBatchNorm: layer = std::make_unique<BatchNormLayer>(cur[0]); break;
      case LayerKind::kPool: layer = std::make_unique<PoolLayer>(l.window); break;
      case LayerKind::kFlatten: layer = std::make_unique<FlattenLayer>(); break;
      case LayerKind::kFc: layer = std::make_unique<FcLayer>(cur[0], l, rng); break;
      case LayerKind::kDropout:
        layer = std::make_unique<DropoutLayer>(l.dropout, derive_seed(seed, {0xd5, i}),
                                               spec.spiking());
        break;
      case LayerKind::kSpike:
        layer = std::make_unique<SpikeLayer>(spec.v_threshold, spec.surrogate_alpha);
        break;
      case LayerKind::kRelu: layer = std::make_unique<ReluLayer>(); break;
    }
    net.layers_.push_back(std::move(layer));
    cur = net.shapes_[i];
  }
  net.round_to_storage();
  return net;
}

Tensor Network::forward(const Tensor& x) {
  const auto& in = spec_.input_shape;
  if (x.rank() != 4 || x.dim(1) != in[0] || x.dim(2) != in[1] || x.dim(3) != in[2])
    throw DimensionError("network expects input [B," + std::to_string(in[0]) + "," +
                         std::to_string(in[1]) + "," + std::to_string(in[2]) +
                         "], got " + shape_str(x.shape()));
  if (spiking()) fresh_ = false;
  Tensor h = x;
  for (auto& layer : layers_) h = layer->forward(h, mode_);
  return h;
}

void Network::reset_states() {
  for (auto& layer : layers_) layer->reset_state();
  fresh_ = true;
}

std::vector<NamedTensor> Network::parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect_params("layers." + std::to_string(i) + ".", out);
  return out;
}

std::vector<NamedBuffer> Network::buffers() {
  std::vector<NamedBuffer> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect_buffers("layers." + std::to_string(i) + ".", out);
  return out;
}

void Network::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

void Network::round_to_storage() {
  for (auto& p : parameters())
    for (auto& v : p.tensor.mutable_data()) v = round_f32(v);
  for (auto& b : buffers())
    for (auto& v : *b.values) v = round_f32(v);
}

void Network::set_recording(bool on) {
  recording_ = on;
  for (auto& layer : layers_) layer->recording = on && layer->synaptic();
}

void Network::clear_records() {
  for (auto& layer : layers_) {
    layer->recorded_spikes = 0.0;
    layer->recorded_neurons = 0;
    layer->recorded_samples = 0;
  }
}

void Network::note_recorded_samples(std::size_t batch) {
  if (!recording_) return;
  for (auto& layer : layers_)
    if (layer->recording) layer->recorded_samples += batch;
}

std::vector<SpikeRecord> Network::spike_records() const {
  std::vector<SpikeRecord> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = *layers_[i];
    if (!layer.synaptic()) continue;
    SpikeRecord r;
    r.layer_index = i;
    r.layer = "layers." + std::to_string(i) + "." + to_string(spec_.layers[i].kind);
    r.neurons = layer.recorded_neurons;
    r.samples = layer.recorded_samples;
    r.spikes = layer.recorded_spikes;
    out.push_back(std::move(r));
  }
  return out;
}

ModelCheckpoint Network::to_checkpoint() const {
  ModelCheckpoint ck;
  ck.spec = spec_;
  for (const auto& p : parameters()) {
    const auto d = p.tensor.data();
    ck.weights.push_back({p.name, p.tensor.shape(), {d.begin(), d.end()}});
  }
  for (const auto& b : const_cast<Network*>(this)->buffers())
    ck.buffers.push_back({b.name, Shape{b.values->size()}, *b.values});
  return ck;
}

Network Network::from_checkpoint(const ModelCheckpoint& ckpt) {
  Network net = build(ckpt.spec, 0);
  auto load_into = [](const std::string& name, const Shape& shape,
                      const std::vector<NamedArray>& blocks, std::span<double> dst) {
    for (const auto& b : blocks) {
      if (b.name != name) continue;
      if (b.shape != shape || b.values.size() != dst.size())
        throw ValidationError("checkpoint block '" + name + "' has shape " +
                              shape_str(b.shape) + ", architecture expects " +
                              shape_str(shape));
      std::copy(b.values.begin(), b.values.end(), dst.begin());
      return;
    }
    throw ValidationError("checkpoint is missing block '" + name + "'");
  };
  auto params = net.parameters();
  auto bufs = net.buffers();
  if (ckpt.weights.size() != params.size() || ckpt.buffers.size() != bufs.size())
    throw ValidationError("checkpoint block count does not match architecture '" +
                          to_string(ckpt.spec.family) + "'");
  for (auto& p : params)
    load_into(p.name, p.tensor.shape(), ckpt.weights, p.tensor.mutable_data());
  for (auto& b : bufs)
    load_into(b.name, Shape{b.values->size()}, ckpt.buffers, *b.values);
  return net;
}

CountSummary count_params(const Network& network) {
  CountSummary s;
  for (const auto& p : network.parameters()) s.params += p.tensor.numel();
  s.bytes_f32 = s.params * sizeof(float);
  return s;
}

}  // namespace spadnn
