#include "cws/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>

#include "cws/kernels.hpp"

namespace cws {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::string name, std::vector<int> shape)
    : name(std::move(name)), shape(std::move(shape)) {
  for (int d : this->shape)
    if (d <= 0) throw ConfigError("tensor '" + this->name + "': non-positive dimension");
  const size_t n = size_t(shape_numel(this->shape));
  v.assign(n, 0.0);
  g.assign(n, 0.0);
}

void init_uniform(Tensor& t, double lo, double hi, Rng& rng) {
  for (double& x : t.v) x = rng.uniform(lo, hi);
}

Linear::Linear(const std::string& prefix, int out, int in)
    : w(prefix + ".w", {out, in}), b(prefix + ".b", {out}) {}

void Linear::apply(const double* x, double* y) const {
  const int rows = out_dim(), cols = in_dim();
  std::copy(b.v.begin(), b.v.end(), y);
  kernels::matvec_acc(w.v.data(), x, y, rows, cols);
}

Vec Linear::apply(const Vec& x) const {
  if (int(x.size()) != in_dim()) throw ConfigError("linear '" + w.name + "': input dim mismatch");
  Vec y(size_t(out_dim()), 0.0);
  apply(x.data(), y.data());
  return y;
}

void Linear::backward(const double* x, const double* dy, double* dx) {
  const int rows = out_dim(), cols = in_dim();
  kernels::outer_acc(w.g.data(), dy, x, rows, cols);
  for (int r = 0; r < rows; ++r) b.g[size_t(r)] += dy[r];
  if (dx) kernels::matvec_t_acc(w.v.data(), dy, dx, rows, cols);
}

void init_linear(Linear& lin, Rng& rng) { init_uniform(lin.w, -0.1, 0.1, rng); }

LstmCell::LstmCell(const std::string& prefix, int input_dim, int hidden_dim)
    : input_dim(input_dim),
      hidden_dim(hidden_dim),
      wx(prefix + ".wx", {4 * hidden_dim, input_dim}),
      wh(prefix + ".wh", {4 * hidden_dim, hidden_dim}),
      b(prefix + ".b", {4 * hidden_dim}) {
  if (input_dim <= 0 || hidden_dim <= 0)
    throw ConfigError("lstm cell '" + prefix + "': non-positive dimension");
}

void init_lstm(LstmCell& cell, Rng& rng, double forget_bias) {
  init_uniform(cell.wx, -0.1, 0.1, rng);
  init_uniform(cell.wh, -0.1, 0.1, rng);
  std::fill(cell.b.v.begin(), cell.b.v.end(), 0.0);
  const int h = cell.hidden_dim;
  for (int j = 0; j < h; ++j) cell.b.v[size_t(h + j)] = forget_bias;
}

namespace {

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

void require_finite(const double* p, int n, const char* what) {
  for (int j = 0; j < n; ++j)
    if (!std::isfinite(p[j])) throw NumericError(std::string("lstm_step: non-finite ") + what);
}

}  // namespace

void lstm_step(const LstmCell& cell, const double* x, const double* h_prev,
               const double* c_prev, double* h, double* c, LstmStepCache* cache) {
  const int hd = cell.hidden_dim;
  require_finite(x, cell.input_dim, "input");
  require_finite(h_prev, hd, "h_prev");
  require_finite(c_prev, hd, "c_prev");

  Vec a = cell.b.v;
  kernels::matvec_acc(cell.wx.v.data(), x, a.data(), 4 * hd, cell.input_dim);
  kernels::matvec_acc(cell.wh.v.data(), h_prev, a.data(), 4 * hd, hd);

  Vec gi(size_t(hd), 0.0), gf(size_t(hd), 0.0), gg(size_t(hd), 0.0), go(size_t(hd), 0.0),
      tc(size_t(hd), 0.0);
  for (int j = 0; j < hd; ++j) {
    gi[size_t(j)] = sigmoid(a[size_t(j)]);
    gf[size_t(j)] = sigmoid(a[size_t(hd + j)]);
    gg[size_t(j)] = std::tanh(a[size_t(2 * hd + j)]);
    go[size_t(j)] = sigmoid(a[size_t(3 * hd + j)]);
    c[j] = gf[size_t(j)] * c_prev[j] + gi[size_t(j)] * gg[size_t(j)];
    tc[size_t(j)] = std::tanh(c[j]);
    h[j] = go[size_t(j)] * tc[size_t(j)];
  }

  if (cache) {
    cache->x.assign(x, x + cell.input_dim);
    cache->h_prev.assign(h_prev, h_prev + hd);
    cache->c_prev.assign(c_prev, c_prev + hd);
    cache->i = std::move(gi);
    cache->f = std::move(gf);
    cache->g = std::move(gg);
    cache->o = std::move(go);
    cache->c.assign(c, c + hd);
    cache->tanh_c = std::move(tc);
  }
}

std::pair<Vec, Vec> lstm_step(const LstmCell& cell, const Vec& x, const Vec& h_prev,
                              const Vec& c_prev) {
  if (int(x.size()) != cell.input_dim || int(h_prev.size()) != cell.hidden_dim ||
      int(c_prev.size()) != cell.hidden_dim)
    throw ConfigError("lstm_step: dimension mismatch");
  Vec h(size_t(cell.hidden_dim), 0.0), c(size_t(cell.hidden_dim), 0.0);
  lstm_step(cell, x.data(), h_prev.data(), c_prev.data(), h.data(), c.data(), nullptr);
  return {std::move(h), std::move(c)};
}

void lstm_step_backward(LstmCell& cell, const LstmStepCache& cache, const double* dh,
                        const double* dc_in, double* dx, double* dh_prev, double* dc_prev) {
  const int hd = cell.hidden_dim;
  Vec da(size_t(4 * hd), 0.0);
  for (int j = 0; j < hd; ++j) {
    const double i = cache.i[size_t(j)], f = cache.f[size_t(j)];
    const double g = cache.g[size_t(j)], o = cache.o[size_t(j)];
    const double tc = cache.tanh_c[size_t(j)];
    const double dhj = dh ? dh[j] : 0.0;
    const double dcj = (dc_in ? dc_in[j] : 0.0) + dhj * o * (1.0 - tc * tc);
    da[size_t(j)] = dcj * g * i * (1.0 - i);
    da[size_t(hd + j)] = dcj * cache.c_prev[size_t(j)] * f * (1.0 - f);
    da[size_t(2 * hd + j)] = dcj * i * (1.0 - g * g);
    da[size_t(3 * hd + j)] = dhj * tc * o * (1.0 - o);
    if (dc_prev) dc_prev[j] = dcj * f;
  }
  kernels::outer_acc(cell.wx.g.data(), da.data(), cache.x.data(), 4 * hd, cell.input_dim);
  kernels::outer_acc(cell.wh.g.data(), da.data(), cache.h_prev.data(), 4 * hd, hd);
  for (int j = 0; j < 4 * hd; ++j) cell.b.g[size_t(j)] += da[size_t(j)];
  if (dx) kernels::matvec_t_acc(cell.wx.v.data(), da.data(), dx, 4 * hd, cell.input_dim);
  if (dh_prev) kernels::matvec_t_acc(cell.wh.v.data(), da.data(), dh_prev, 4 * hd, hd);
}

LstmSeq lstm_run(const LstmCell& cell, const std::vector<Vec>& xs) {
  const int hd = cell.hidden_dim;
  LstmSeq seq;
  seq.caches.resize(xs.size());
  seq.h.resize(xs.size());
  Vec h(size_t(hd), 0.0), c(size_t(hd), 0.0), c_next(size_t(hd), 0.0);
  for (size_t t = 0; t < xs.size(); ++t) {
    if (int(xs[t].size()) != cell.input_dim)
      throw ConfigError("lstm_run: input dim mismatch at step " + std::to_string(t));
    Vec h_next(size_t(hd), 0.0);
    lstm_step(cell, xs[t].data(), h.data(), c.data(), h_next.data(), c_next.data(),
              &seq.caches[t]);
    seq.h[t] = h_next;
    h = std::move(h_next);
    std::swap(c, c_next);
  }
  return seq;
}

std::vector<Vec> lstm_run_backward(LstmCell& cell, const LstmSeq& seq,
                                   const std::vector<Vec>& dh_out) {
  const int hd = cell.hidden_dim;
  const size_t n = seq.caches.size();
  std::vector<Vec> dxs(n, Vec(size_t(cell.input_dim), 0.0));
  Vec dh_rec(size_t(hd), 0.0), dc_rec(size_t(hd), 0.0);
  Vec dh(size_t(hd), 0.0), dh_prev(size_t(hd), 0.0), dc_prev(size_t(hd), 0.0);
  for (size_t t = n; t-- > 0;) {
    for (int j = 0; j < hd; ++j) dh[size_t(j)] = dh_rec[size_t(j)] + dh_out[t][size_t(j)];
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    lstm_step_backward(cell, seq.caches[t], dh.data(), dc_rec.data(), dxs[t].data(),
                       dh_prev.data(), dc_prev.data());
    dh_rec = dh_prev;
    std::swap(dc_rec, dc_prev);
  }
  return dxs;
}

double softmax_xent(const double* logits, int k, int target, double* grad) {
  if (k < 2) throw ConfigError("softmax_xent: need at least 2 classes");
  if (target < 0 || target >= k) throw std::out_of_range("softmax_xent: target out of range");
  double mx = logits[0];
  for (int j = 1; j < k; ++j) mx = std::max(mx, logits[j]);
  double sum = 0.0;
  for (int j = 0; j < k; ++j) sum += std::exp(logits[j] - mx);
  const double log_sum = std::log(sum);
  const double loss = -(logits[target] - mx - log_sum);
  if (grad) {
    for (int j = 0; j < k; ++j) grad[j] = std::exp(logits[j] - mx) / sum;
    grad[target] -= 1.0;
  }
  return loss;
}

Vec softmax(const Vec& logits) {
  Vec p(logits.size());
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (size_t j = 0; j < logits.size(); ++j) {
    p[j] = std::exp(logits[j] - mx);
    sum += p[j];
  }
  for (double& v : p) v /= sum;
  return p;
}

Vec log_softmax(const Vec& logits) {
  Vec lp(logits.size());
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double log_sum = std::log(sum);
  for (size_t j = 0; j < logits.size(); ++j) lp[j] = logits[j] - mx - log_sum;
  return lp;
}

Vec dropout_mask(size_t n, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
  Vec mask(n);
  const double scale = 1.0 / (1.0 - rate);
  for (size_t j = 0; j < n; ++j) mask[j] = (rng.uniform() >= rate) ? scale : 0.0;
  return mask;
}

Vec dropout(const Vec& v, double rate, bool training, Rng& rng) {
  if (!training || rate == 0.0) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
    return v;
  }
  Vec mask = dropout_mask(v.size(), rate, rng);
  Vec out(v.size());
  for (size_t j = 0; j < v.size(); ++j) out[j] = v[j] * mask[j];
  return out;
}

Adam::Adam(std::vector<Tensor*> params, AdamConfig cfg) : cfg_(cfg), params_(std::move(params)) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor* t : params_) {
    m_.emplace_back(t->v.size(), 0.0);
    v_.emplace_back(t->v.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (size_t p = 0; p < params_.size(); ++p) {
    Tensor& t = *params_[p];
    if (m_[p].size() != t.v.size()) throw ConfigError("adam: shape mismatch for '" + t.name + "'");
    Vec& m = m_[p];
    Vec& v = v_[p];
    for (size_t j = 0; j < t.v.size(); ++j) {
      const double g = t.g[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      // Elements with exactly zero gradient keep their value; the moments
      // still decay. Untouched embedding rows stay put this way.
      if (g == 0.0) continue;
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      t.v[j] -= cfg_.alpha * mh / (std::sqrt(vh) + cfg_.eps);
    }
  }
}

double global_grad_norm(const std::vector<Tensor*>& params) {
  double sq = 0.0;
  for (const Tensor* t : params)
    for (double g : t->g) sq += g * g;
  return std::sqrt(sq);
}

void clip_global_norm(const std::vector<Tensor*>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  for (Tensor* t : params)
    for (double& g : t->g) g *= scale;
}

void zero_grads(const std::vector<Tensor*>& params) {
  for (Tensor* t : params) t->zero_grad();
}

}  // namespace cws
