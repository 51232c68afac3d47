#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cws/errors.hpp"
#include "cws/rng.hpp"
#include "cws/tensor.hpp"

namespace cws {

void init_uniform(Tensor& t, double lo, double hi, Rng& rng);

// y = W x + b
struct Linear {
  Tensor w;  // [out, in]
  Tensor b;  // [out]

  Linear() = default;
  Linear(const std::string& prefix, int out, int in);

  int out_dim() const { return w.shape[0]; }
  int in_dim() const { return w.shape[1]; }

  void apply(const double* x, double* y) const;
  Vec apply(const Vec& x) const;
  // Accumulates into w.g / b.g; dx may be null for leaf inputs.
  void backward(const double* x, const double* dy, double* dx);
};

void init_linear(Linear& lin, Rng& rng);

// Single LSTM cell, gates packed i|f|g|o in the 4H preactivation:
//   a = Wx x + Wh h_prev + b
//   i = sigmoid(a_i)  f = sigmoid(a_f)  g = tanh(a_g)  o = sigmoid(a_o)
//   c = f * c_prev + i * g
//   h = o * tanh(c)
struct LstmCell {
  int input_dim = 0;
  int hidden_dim = 0;
  Tensor wx;  // [4H, I]
  Tensor wh;  // [4H, H]
  Tensor b;   // [4H]

  LstmCell() = default;
  LstmCell(const std::string& prefix, int input_dim, int hidden_dim);
};

// Weights uniform in [-0.1, 0.1]; biases zero except the forget gate.
void init_lstm(LstmCell& cell, Rng& rng, double forget_bias = 1.0);

struct LstmStepCache {
  Vec x, h_prev, c_prev;
  Vec i, f, g, o;
  Vec c, tanh_c;
};

// h and c must point at hidden_dim doubles. cache may be null.
void lstm_step(const LstmCell& cell, const double* x, const double* h_prev,
               const double* c_prev, double* h, double* c, LstmStepCache* cache);

std::pair<Vec, Vec> lstm_step(const LstmCell& cell, const Vec& x, const Vec& h_prev,
                              const Vec& c_prev);

// Accumulates parameter gradients into the cell; dx/dh_prev/dc_prev may be null.
void lstm_step_backward(LstmCell& cell, const LstmStepCache& cache, const double* dh,
                        const double* dc_in, double* dx, double* dh_prev, double* dc_prev);

// One direction over a whole sequence, keeping per-step caches for the
// reverse pass. Initial state is zero.
struct LstmSeq {
  std::vector<LstmStepCache> caches;
  std::vector<Vec> h;  // per-step outputs
};

LstmSeq lstm_run(const LstmCell& cell, const std::vector<Vec>& xs);
// dh_out: external gradient on each step's h. Returns d(xs).
std::vector<Vec> lstm_run_backward(LstmCell& cell, const LstmSeq& seq,
                                   const std::vector<Vec>& dh_out);

// loss = -log softmax(logits)[target]; grad (optional) = softmax - onehot.
double softmax_xent(const double* logits, int k, int target, double* grad);
Vec softmax(const Vec& logits);
Vec log_softmax(const Vec& logits);

// Inverted dropout: zero with probability rate, survivors scaled 1/(1-rate).
// The mask multiplies both the forward activations and their gradient.
Vec dropout_mask(size_t n, double rate, Rng& rng);
Vec dropout(const Vec& v, double rate, bool training, Rng& rng);

struct AdamConfig {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(std::vector<Tensor*> params, AdamConfig cfg = {});

  // Applies one update from the gradients currently held by the bound
  // tensors, then increments the step count. Gradients are left in place.
  void step();

  int64_t step_count() const { return t_; }
  const std::vector<Vec>& first_moments() const { return m_; }
  const std::vector<Vec>& second_moments() const { return v_; }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<Tensor*> params_;
  std::vector<Vec> m_, v_;
};

double global_grad_norm(const std::vector<Tensor*>& params);
// Scales all gradients so the global norm does not exceed max_norm.
void clip_global_norm(const std::vector<Tensor*>& params, double max_norm);
void zero_grads(const std::vector<Tensor*>& params);

}  // namespace cws
