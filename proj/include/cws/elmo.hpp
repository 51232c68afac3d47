#pragma once

#include <array>
#include <vector>

#include "cws/bilm.hpp"
#include "cws/tensor.hpp"

namespace cws {

// Task-trained combination of the three exposed LM layers:
//   mix_k = gamma * (s0 * x_k + s1 * h1_k + s2 * h2_k),  s = softmax(w).
// Starts as an unbiased mixture: w = (0,0,0), gamma = 1.
struct ElmoMixer {
  Tensor w;      // [3] raw weights, pre-softmax
  Tensor gamma;  // [1]
  ElmoMixer();
  std::vector<Tensor*> parameters();
};

std::array<double, 3> normalized_weights(const ElmoMixer& mixer);

std::vector<Vec> elmo_mix(const ElmoMixer& mixer, const LayerActivations& acts);

// Accumulates d(loss)/dw and d(loss)/dgamma for a scalar loss with gradient
// dout on the mixed vectors. The LM layers stay frozen downstream, so no
// gradient flows into the activations.
void elmo_mix_backward(ElmoMixer& mixer, const LayerActivations& acts,
                       const std::vector<Vec>& dout);

}  // namespace cws
