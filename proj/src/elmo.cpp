#include "cws/elmo.hpp"

#include <cmath>

#include "cws/errors.hpp"

namespace cws {

namespace {

void check_dims(const LayerActivations& acts) {
  if (acts.h1.size() != acts.x.size() || acts.h2.size() != acts.x.size())
    throw ConfigError("elmo: layer lengths differ");
  for (size_t k = 0; k < acts.x.size(); ++k)
    if (acts.h1[k].size() != acts.x[k].size() || acts.h2[k].size() != acts.x[k].size())
      throw ConfigError("elmo: layer dims differ at position " + std::to_string(k));
}

}  // namespace

ElmoMixer::ElmoMixer() : w("elmo.w", {3}), gamma("elmo.gamma", {1}) {
  gamma.v[0] = 1.0;
}

std::vector<Tensor*> ElmoMixer::parameters() { return {&w, &gamma}; }

std::array<double, 3> normalized_weights(const ElmoMixer& mixer) {
  Vec s = softmax(mixer.w.v);
  return {s[0], s[1], s[2]};
}

std::vector<Vec> elmo_mix(const ElmoMixer& mixer, const LayerActivations& acts) {
  check_dims(acts);
  const auto s = normalized_weights(mixer);
  const double g = mixer.gamma.v[0];
  std::vector<Vec> out(acts.size());
  for (size_t k = 0; k < acts.size(); ++k) {
    const size_t d = acts.x[k].size();
    Vec v(d);
    // combine first, scale after: gamma acts on the finished mixture
    for (size_t j = 0; j < d; ++j)
      v[j] = g * (s[0] * acts.x[k][j] + s[1] * acts.h1[k][j] + s[2] * acts.h2[k][j]);
    out[k] = std::move(v);
  }
  return out;
}

void elmo_mix_backward(ElmoMixer& mixer, const LayerActivations& acts,
                       const std::vector<Vec>& dout) {
  check_dims(acts);
  if (dout.size() != acts.size()) throw ConfigError("elmo: gradient length mismatch");
  const auto s = normalized_weights(mixer);
  const double g = mixer.gamma.v[0];
  double ds[3] = {0.0, 0.0, 0.0};
  double dgamma = 0.0;
  for (size_t k = 0; k < acts.size(); ++k) {
    const Vec* layers[3] = {&acts.x[k], &acts.h1[k], &acts.h2[k]};
    for (size_t j = 0; j < dout[k].size(); ++j) {
      const double d = dout[k][j];
      const double combo = s[0] * acts.x[k][j] + s[1] * acts.h1[k][j] + s[2] * acts.h2[k][j];
      dgamma += d * combo;
      for (int i = 0; i < 3; ++i) ds[i] += d * g * (*layers[i])[j];
    }
  }
  const double dot = s[0] * ds[0] + s[1] * ds[1] + s[2] * ds[2];
  for (int i = 0; i < 3; ++i) mixer.w.g[size_t(i)] += s[i] * (ds[i] - dot);
  mixer.gamma.g[0] += dgamma;
}

}  // namespace cws
