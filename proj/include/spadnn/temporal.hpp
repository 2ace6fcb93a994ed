#pragma once

#include <vector>

#include "spadnn/models.hpp"
#include "spadnn/spiking.hpp"

namespace spadnn {

struct TemporalOutput {
  std::vector<Tensor> outputs;  // final-layer spikes per timestep, [B, K]
  Tensor rate;                  // mean of `outputs` over T
};

// Feeds frame t through the network for t = 0..T-1, carrying IF states across
// timesteps. Every step stays on the tape, so backprop from a loss on `rate`
// differentiates through time. Requires freshly reset states.
TemporalOutput run_temporal(Network& network, const SpikeTrain& train);

void reset_states(Network& network);

}  // namespace spadnn
