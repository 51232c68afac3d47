#include "cws/bilm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "cws/errors.hpp"

namespace cws {

namespace {

void check_config(const BiLMConfig& cfg) {
  if (cfg.vocab_size <= 0 || cfg.embed_dim <= 0 || cfg.hidden_dim <= 0)
    throw ConfigError("bilm: all dims must be positive");
  if (cfg.num_layers != 2) throw ConfigError("bilm: layer count is fixed at 2");
  if (cfg.projection_dim != 0 && cfg.projection_dim != 2 * cfg.hidden_dim)
    throw ConfigError("bilm: exposed dim must equal twice the lstm hidden dim");
}

void check_ids(const BiLMModel& m, const std::vector<int>& ids) {
  if (ids.empty()) throw ConfigError("bilm: empty sentence");
  for (int id : ids)
    if (id < 0 || id >= m.cfg.vocab_size)
      throw std::out_of_range("bilm: char id " + std::to_string(id) + " out of range");
}

// One direction's inputs and targets. Forward reads BOS, t1..t_{N-1} and
// predicts t1..tN; backward reads EOS, tN..t2 and predicts tN..t1.
void shift_ids(const std::vector<int>& ids, LmDirection dir, std::vector<int>& in_ids,
               std::vector<int>& targets) {
  const size_t n = ids.size();
  in_ids.clear();
  targets.clear();
  in_ids.reserve(n);
  targets.reserve(n);
  if (dir == LmDirection::kForward) {
    in_ids.push_back(CharVocab::kBos);
    for (size_t j = 0; j + 1 < n; ++j) in_ids.push_back(ids[j]);
    targets.assign(ids.begin(), ids.end());
  } else {
    in_ids.push_back(CharVocab::kEos);
    for (size_t j = n; j-- > 1;) in_ids.push_back(ids[j]);
    targets.assign(ids.rbegin(), ids.rend());
  }
}

// Token representation with the tanh activation kept for backprop.
Vec rep_forward(const BiLMModel& m, int id, Vec* hidden_out) {
  const int e = m.cfg.embed_dim;
  const double* row = m.embed.v.data() + size_t(id) * size_t(e);
  Vec hidden(size_t(e), 0.0);
  m.rep_hidden.apply(row, hidden.data());
  for (double& h : hidden) h = std::tanh(h);
  Vec x = m.rep_out.apply(hidden);
  if (hidden_out) *hidden_out = std::move(hidden);
  return x;
}

void rep_backward(BiLMModel& m, int id, const Vec& hidden, const double* dx) {
  const int e = m.cfg.embed_dim;
  Vec dhidden(size_t(e), 0.0);
  m.rep_out.backward(hidden.data(), dx, dhidden.data());
  for (int j = 0; j < e; ++j) dhidden[size_t(j)] *= 1.0 - hidden[size_t(j)] * hidden[size_t(j)];
  const double* row = m.embed.v.data() + size_t(id) * size_t(e);
  Vec de(size_t(e), 0.0);
  m.rep_hidden.backward(row, dhidden.data(), de.data());
  double* grow = m.embed.g.data() + size_t(id) * size_t(e);
  for (int j = 0; j < e; ++j) grow[j] += de[size_t(j)];
}

double dir_loss(const BiLMModel& m, const std::vector<int>& ids, LmDirection dir,
                BiLMDirTape& tape) {
  const LstmCell& c1 = dir == LmDirection::kForward ? m.fwd1 : m.bwd1;
  const LstmCell& c2 = dir == LmDirection::kForward ? m.fwd2 : m.bwd2;
  shift_ids(ids, dir, tape.in_ids, tape.targets);
  const size_t n = tape.in_ids.size();
  tape.hiddens.resize(n);
  tape.xs.resize(n);
  for (size_t j = 0; j < n; ++j)
    tape.xs[j] = rep_forward(m, tape.in_ids[j], &tape.hiddens[j]);
  tape.l1 = lstm_run(c1, tape.xs);
  tape.l2 = lstm_run(c2, tape.l1.h);
  double loss = 0.0;
  Vec logits(size_t(m.cfg.vocab_size), 0.0);
  for (size_t j = 0; j < n; ++j) {
    m.out.apply(tape.l2.h[j].data(), logits.data());
    loss += softmax_xent(logits.data(), m.cfg.vocab_size, tape.targets[j], nullptr);
  }
  return loss;
}

void dir_backward(BiLMModel& m, LmDirection dir, const BiLMDirTape& tape) {
  LstmCell& c1 = dir == LmDirection::kForward ? m.fwd1 : m.bwd1;
  LstmCell& c2 = dir == LmDirection::kForward ? m.fwd2 : m.bwd2;
  const size_t n = tape.in_ids.size();
  const int v = m.cfg.vocab_size;
  std::vector<Vec> dh2(n, Vec(size_t(m.cfg.hidden_dim), 0.0));
  Vec logits(size_t(v), 0.0), dlogits(size_t(v), 0.0);
  for (size_t j = 0; j < n; ++j) {
    m.out.apply(tape.l2.h[j].data(), logits.data());
    softmax_xent(logits.data(), v, tape.targets[j], dlogits.data());
    m.out.backward(tape.l2.h[j].data(), dlogits.data(), dh2[j].data());
  }
  std::vector<Vec> dh1 = lstm_run_backward(c2, tape.l2, dh2);
  std::vector<Vec> dxs = lstm_run_backward(c1, tape.l1, dh1);
  for (size_t j = 0; j < n; ++j)
    rep_backward(m, tape.in_ids[j], tape.hiddens[j], dxs[j].data());
}

}  // namespace

BiLMModel::BiLMModel(const BiLMConfig& config, CharVocab voc)
    : cfg(config),
      vocab(std::move(voc)),
      embed("bilm.embed", {config.vocab_size, config.embed_dim}),
      rep_hidden("bilm.rep.hidden", config.embed_dim, config.embed_dim),
      rep_out("bilm.rep.out", config.embed_dim, config.embed_dim),
      fwd1("bilm.fwd1", config.embed_dim, config.hidden_dim),
      fwd2("bilm.fwd2", config.hidden_dim, config.hidden_dim),
      bwd1("bilm.bwd1", config.embed_dim, config.hidden_dim),
      bwd2("bilm.bwd2", config.hidden_dim, config.hidden_dim),
      out("bilm.out", config.vocab_size, config.hidden_dim),
      expose_x("bilm.expose", 2 * config.hidden_dim, config.embed_dim) {
  check_config(cfg);
  if (vocab.size() != cfg.vocab_size)
    throw ConfigError("bilm: vocab_size does not match the vocabulary");
}

std::vector<Tensor*> BiLMModel::parameters() {
  std::vector<Tensor*> ps = {&embed, &rep_hidden.w, &rep_hidden.b, &rep_out.w, &rep_out.b};
  for (LstmCell* c : {&fwd1, &fwd2, &bwd1, &bwd2}) {
    ps.push_back(&c->wx);
    ps.push_back(&c->wh);
    ps.push_back(&c->b);
  }
  ps.push_back(&out.w);
  ps.push_back(&out.b);
  ps.push_back(&expose_x.w);
  ps.push_back(&expose_x.b);
  return ps;
}

BiLMModel make_bilm(const BiLMConfig& cfg, CharVocab vocab, Rng& rng) {
  BiLMModel m(cfg, std::move(vocab));
  init_uniform(m.embed, -0.1, 0.1, rng);
  init_linear(m.rep_hidden, rng);
  init_linear(m.rep_out, rng);
  init_lstm(m.fwd1, rng);
  init_lstm(m.fwd2, rng);
  init_lstm(m.bwd1, rng);
  init_lstm(m.bwd2, rng);
  init_linear(m.out, rng);
  init_linear(m.expose_x, rng);
  return m;
}

Vec token_representation(const BiLMModel& m, int id) {
  if (id < 0 || id >= m.cfg.vocab_size)
    throw std::out_of_range("bilm: char id " + std::to_string(id) + " out of range");
  return rep_forward(m, id, nullptr);
}

std::vector<Vec> token_representation(const BiLMModel& m, const std::vector<int>& ids) {
  std::vector<Vec> xs;
  xs.reserve(ids.size());
  for (int id : ids) xs.push_back(token_representation(m, id));
  return xs;
}

std::vector<Vec> lm_logprobs(const BiLMModel& m, const std::vector<int>& ids,
                             LmDirection dir) {
  check_ids(m, ids);
  BiLMDirTape tape;
  const LstmCell& c1 = dir == LmDirection::kForward ? m.fwd1 : m.bwd1;
  const LstmCell& c2 = dir == LmDirection::kForward ? m.fwd2 : m.bwd2;
  shift_ids(ids, dir, tape.in_ids, tape.targets);
  std::vector<Vec> xs;
  xs.reserve(tape.in_ids.size());
  for (int id : tape.in_ids) xs.push_back(rep_forward(m, id, nullptr));
  LstmSeq l1 = lstm_run(c1, xs);
  LstmSeq l2 = lstm_run(c2, l1.h);
  std::vector<Vec> lps(ids.size());
  for (size_t j = 0; j < l2.h.size(); ++j) {
    // step j predicts position j (forward) or position n-1-j (backward)
    size_t pos = dir == LmDirection::kForward ? j : ids.size() - 1 - j;
    lps[pos] = log_softmax(m.out.apply(l2.h[j]));
  }
  return lps;
}

double bilm_loss(const BiLMModel& m, const std::vector<int>& ids, BiLMTape* tape) {
  check_ids(m, ids);
  BiLMTape local;
  BiLMTape& t = tape ? *tape : local;
  return dir_loss(m, ids, LmDirection::kForward, t.fwd) +
         dir_loss(m, ids, LmDirection::kBackward, t.bwd);
}

void bilm_loss_backward(BiLMModel& m, const BiLMTape& tape) {
  dir_backward(m, LmDirection::kForward, tape.fwd);
  dir_backward(m, LmDirection::kBackward, tape.bwd);
}

LayerActivations extract_layers(const BiLMModel& m, const std::vector<int>& ids) {
  check_ids(m, ids);
  const size_t n = ids.size();
  const int h = m.cfg.hidden_dim;

  // Forward pass over BOS, t1..tN; backward pass over EOS, tN..t1.
  std::vector<Vec> fx, bx;
  fx.reserve(n + 1);
  bx.reserve(n + 1);
  fx.push_back(rep_forward(m, CharVocab::kBos, nullptr));
  bx.push_back(rep_forward(m, CharVocab::kEos, nullptr));
  std::vector<Vec> reps;
  reps.reserve(n);
  for (size_t j = 0; j < n; ++j) reps.push_back(rep_forward(m, ids[j], nullptr));
  for (size_t j = 0; j < n; ++j) fx.push_back(reps[j]);
  for (size_t j = n; j-- > 0;) bx.push_back(reps[j]);

  LstmSeq f1 = lstm_run(m.fwd1, fx);
  LstmSeq f2 = lstm_run(m.fwd2, f1.h);
  LstmSeq b1 = lstm_run(m.bwd1, bx);
  LstmSeq b2 = lstm_run(m.bwd2, b1.h);

  LayerActivations acts;
  acts.x.resize(n);
  acts.h1.resize(n);
  acts.h2.resize(n);
  for (size_t p = 0; p < n; ++p) {
    acts.x[p] = m.expose_x.apply(reps[p]);
    // forward state after reading t_{p+1}; backward state after reading it
    // from the other end
    auto concat = [&](const LstmSeq& f, const LstmSeq& b) {
      Vec v(size_t(2 * h), 0.0);
      std::copy(f.h[p + 1].begin(), f.h[p + 1].end(), v.begin());
      std::copy(b.h[n - p].begin(), b.h[n - p].end(), v.begin() + h);
      return v;
    };
    acts.h1[p] = concat(f1, b1);
    acts.h2[p] = concat(f2, b2);
  }
  return acts;
}

BiLMModel train_bilm(const Corpus& corpus, BiLMConfig cfg, int epochs, uint64_t seed,
                     std::vector<double>* epoch_mean_loss, bool verbose, int min_count) {
  if (corpus.size() == 0) throw ConfigError("bilm: empty training corpus");
  CharVocab vocab = build_vocab(corpus, min_count);
  cfg.vocab_size = vocab.size();
  Rng rng(seed);
  BiLMModel m = make_bilm(cfg, std::move(vocab), rng);

  std::vector<std::vector<int>> encoded;
  encoded.reserve(corpus.size());
  for (const Sentence& s : corpus.sentences) {
    std::vector<int> ids = m.vocab.encode(s.chars);
    if (!ids.empty()) encoded.push_back(std::move(ids));
  }
  if (encoded.empty()) throw ConfigError("bilm: no non-empty sentences to train on");

  std::vector<Tensor*> params = m.parameters();
  Adam adam(params);
  std::vector<size_t> order(encoded.size());
  for (size_t j = 0; j < order.size(); ++j) order[j] = j;

  BiLMTape tape;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    shuffle(order, rng);
    double total = 0.0;
    size_t terms = 0;
    for (size_t j : order) {
      zero_grads(params);
      total += bilm_loss(m, encoded[j], &tape);
      terms += 2 * encoded[j].size();
      bilm_loss_backward(m, tape);
      clip_global_norm(params, 5.0);
      adam.step();
    }
    const double mean = total / double(terms);
    if (epoch_mean_loss) epoch_mean_loss->push_back(mean);
    if (verbose)
      std::fprintf(stderr, "epoch %d/%d  lm mean loss %.4f\n", epoch + 1, epochs, mean);
  }
  return m;
}

ModelFile pack_bilm(const BiLMModel& m) {
  ModelFile mf;
  mf.component = "bilm";
  mf.meta = {{"embed_dim", std::to_string(m.cfg.embed_dim)},
             {"hidden_dim", std::to_string(m.cfg.hidden_dim)},
             {"num_layers", std::to_string(m.cfg.num_layers)},
             {"projection_dim", std::to_string(m.cfg.exposed_dim())}};
  for (const Tensor* t : const_cast<BiLMModel&>(m).parameters()) mf.tensors.push_back(*t);
  for (Tensor& t : mf.tensors) t.zero_grad();
  mf.vocab = m.vocab.entries_utf8();
  return mf;
}

BiLMModel unpack_bilm(const ModelFile& mf) {
  if (mf.component != "bilm")
    throw ModelError("expected a bilm model file, got component '" + mf.component + "'");
  BiLMConfig cfg;
  cfg.embed_dim = std::stoi(mf.meta_value("embed_dim"));
  cfg.hidden_dim = std::stoi(mf.meta_value("hidden_dim"));
  if (std::stoi(mf.meta_value("num_layers")) != cfg.num_layers)
    throw ModelError("bilm model file: unsupported layer count");
  CharVocab vocab = CharVocab::from_entries_utf8(mf.vocab);
  cfg.vocab_size = vocab.size();
  if (std::stoi(mf.meta_value("projection_dim")) != cfg.exposed_dim())
    throw ModelError("bilm model file: projection dim does not match hidden dim");
  BiLMModel m(cfg, std::move(vocab));
  for (Tensor* t : m.parameters()) {
    const Tensor& src = mf.require(t->name);
    if (src.shape != t->shape)
      throw ModelError("bilm model file: tensor '" + t->name + "' has the wrong shape");
    t->v = src.v;
  }
  return m;
}

}  // namespace cws
