#pragma once

#include <cstddef>
#include <vector>

#include "spadnn/tensor.hpp"
#include "spadnn/util.hpp"

namespace spadnn {

// Slope of the sigmoid used as the stand-in derivative of the spike threshold.
struct SurrogateConfig {
  double alpha = 4.0;
};

// d/du sigmoid(alpha * u) = alpha * s * (1 - s). Evaluated through exp(-alpha|u|)
// so that f(u) == f(-u) holds bit-for-bit.
double surrogate_spike_grad(double u, const SurrogateConfig& cfg = {});

// Heaviside(h - v_th) with H >= v_th firing. The backward pass substitutes
// surrogate_spike_grad(h - v_th).
Tensor spike_fn(const Tensor& h, double v_th, const SurrogateConfig& cfg = {});

// h * (1 - spikes): fired neurons return to 0, silent ones keep h.
Tensor hard_reset(const Tensor& h, const Tensor& spikes);

// Membrane potentials of one Integrate-and-Fire population. An undefined
// `v` stands for all-zero potentials of whatever shape arrives next.
struct IFState {
  Tensor v;
  double v_th = 1.0;

  void reset() { v = Tensor(); }
};

// H = V + X; S = [H >= V_th]; V <- 0 where S, else H. Returns S.
Tensor if_step(IFState& state, const Tensor& x, const SurrogateConfig& cfg = {});

// T binary frames shaped like the encoded image.
struct SpikeTrain {
  std::vector<Tensor> frames;

  std::size_t timesteps() const { return frames.size(); }
};

// Rate coding: at every timestep each element fires independently with
// probability equal to its intensity, so the count over T has mean T * x.
SpikeTrain poisson_encode(const Tensor& image, std::size_t timesteps, Rng& rng);

}  // namespace spadnn
