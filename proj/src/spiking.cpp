#include "spadnn/spiking.hpp"

#include <cmath>
#include <string>

#include "spadnn/errors.hpp"
#include "spadnn/ops.hpp"
#include "spadnn/temporal.hpp"

namespace spadnn {

namespace {

void check_alpha(const SurrogateConfig& cfg) {
  if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha))
    throw DomainError("surrogate slope alpha must be positive and finite");
}

}  // namespace

double surrogate_spike_grad(double u, const SurrogateConfig& cfg) {
  check_alpha(cfg);
  const double e = std::exp(-cfg.alpha * std::fabs(u));
  const double denom = 1.0 + e;
  return cfg.alpha * e / (denom * denom);
}

Tensor spike_fn(const Tensor& h, double v_th, const SurrogateConfig& cfg) {
  check_alpha(cfg);
  const auto hv = h.data();
  std::vector<double> s(hv.size());
  for (std::size_t i = 0; i < hv.size(); ++i) s[i] = hv[i] >= v_th ? 1.0 : 0.0;
  return Tensor::make_result(
      h.shape(), std::move(s), {h}, [v_th, cfg](detail::Node& self) {
        auto& p = *self.parents[0];
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i)
          g[i] += self.grad[i] * surrogate_spike_grad(p.value[i] - v_th, cfg);
      });
}

Tensor hard_reset(const Tensor& h, const Tensor& spikes) {
  if (h.shape() != spikes.shape())
    throw DimensionError("hard_reset: potentials " + shape_str(h.shape()) +
                         " vs spikes " + shape_str(spikes.shape()));
  const auto hv = h.data(), sv = spikes.data();
  std::vector<double> v(hv.size());
  for (std::size_t i = 0; i < hv.size(); ++i)
    v[i] = sv[i] != 0.0 ? 0.0 : hv[i];
  return Tensor::make_result(
      h.shape(), std::move(v), {h, spikes}, [](detail::Node& self) {
        auto& ph = *self.parents[0];
        auto& ps = *self.parents[1];
        if (ph.requires_grad) {
          auto& g = ph.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += self.grad[i] * (1.0 - ps.value[i]);
        }
        if (ps.requires_grad) {
          auto& g = ps.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] -= self.grad[i] * ph.value[i];
        }
      });
}

Tensor if_step(IFState& state, const Tensor& x, const SurrogateConfig& cfg) {
  if (!(state.v_th > 0.0) || !std::isfinite(state.v_th))
    throw DomainError("IF threshold must be positive and finite");
  Tensor h;
  if (state.v.defined()) {
    if (state.v.shape() != x.shape())
      throw DimensionError("if_step: input " + shape_str(x.shape()) +
                           " does not match potentials " +
                           shape_str(state.v.shape()));
    h = add(state.v, x);
  } else {
    h = x;
  }
  Tensor s = spike_fn(h, state.v_th, cfg);
  state.v = hard_reset(h, s);
  return s;
}

SpikeTrain poisson_encode(const Tensor& image, std::size_t timesteps,
                          Rng& rng) {
  if (timesteps < 1) throw DomainError("poisson_encode: T must be >= 1");
  const auto x = image.data();
  for (double v : x)
    if (!(v >= 0.0 && v <= 1.0))
      throw DomainError("poisson_encode: intensity " + std::to_string(v) +
                        " outside [0,1]");
  SpikeTrain train;
  train.frames.reserve(timesteps);
  for (std::size_t t = 0; t < timesteps; ++t) {
    std::vector<double> frame(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      frame[i] = uniform01(rng) < x[i] ? 1.0 : 0.0;
    train.frames.push_back(Tensor::from(image.shape(), std::move(frame)));
  }
  return train;
}

TemporalOutput run_temporal(Network& network, const SpikeTrain& train) {
  if (!network.states_fresh())
    throw ContractError(
        "run_temporal: network state carries a previous sample; call "
        "reset_states first");
  if (train.timesteps() == 0)
    throw ContractError("run_temporal: empty spike train");
  TemporalOutput out;
  out.outputs.reserve(train.timesteps());
  for (const auto& frame : train.frames)
    out.outputs.push_back(network.forward(frame));
  out.rate = average(out.outputs);
  network.note_recorded_samples(train.frames.front().dim(0));
  return out;
}

void reset_states(Network& network) { network.reset_states(); }

}  // namespace spadnn
