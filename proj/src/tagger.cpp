#include "cws/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cws/errors.hpp"
#include "cws/eval.hpp"

namespace cws {

namespace {

TaggerConfig validated(TaggerConfig cfg) {
  if (cfg.input_dim <= 0 || cfg.hidden_dim <= 0)
    throw ConfigError("tagger: dims must be positive");
  if (cfg.num_bilstms != 3) throw ConfigError("tagger: layer count is fixed at 3");
  if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0)
    throw ConfigError("tagger: dropout rate must be in [0, 1)");
  if (cfg.embedding_source != "elmo" && cfg.embedding_source != "static")
    throw ConfigError("tagger: embedding source must be 'elmo' or 'static'");
  return cfg;
}

int upper_in_dim(const TaggerConfig& cfg) {
  return cfg.topology == Topology::kParallel ? cfg.input_dim : 2 * cfg.hidden_dim;
}

int final_in_dim(const TaggerConfig& cfg) {
  return cfg.topology == Topology::kParallel ? 6 * cfg.hidden_dim : 2 * cfg.hidden_dim;
}

// One Bi-LSTM pass: forward over the sequence, backward over its reversal,
// outputs concatenated per position.
struct BiSeq {
  LstmSeq f, b;
  std::vector<Vec> out;
};

BiSeq bilstm_run(const BiLstmLayer& layer, const std::vector<Vec>& xs) {
  const size_t n = xs.size();
  const int h = layer.fwd.hidden_dim;
  std::vector<Vec> rev(xs.rbegin(), xs.rend());
  BiSeq s;
  s.f = lstm_run(layer.fwd, xs);
  s.b = lstm_run(layer.bwd, rev);
  s.out.resize(n);
  for (size_t p = 0; p < n; ++p) {
    Vec v(size_t(2 * h), 0.0);
    std::copy(s.f.h[p].begin(), s.f.h[p].end(), v.begin());
    std::copy(s.b.h[n - 1 - p].begin(), s.b.h[n - 1 - p].end(), v.begin() + h);
    s.out[p] = std::move(v);
  }
  return s;
}

std::vector<Vec> bilstm_backward(BiLstmLayer& layer, const BiSeq& s,
                                 const std::vector<Vec>& dout) {
  const size_t n = dout.size();
  const int h = layer.fwd.hidden_dim;
  std::vector<Vec> dhf(n, Vec(size_t(h)));
  std::vector<Vec> dhb(n, Vec(size_t(h)));
  for (size_t p = 0; p < n; ++p) {
    std::copy(dout[p].begin(), dout[p].begin() + h, dhf[p].begin());
    std::copy(dout[p].begin() + h, dout[p].end(), dhb[n - 1 - p].begin());
  }
  std::vector<Vec> dxf = lstm_run_backward(layer.fwd, s.f, dhf);
  std::vector<Vec> dxb = lstm_run_backward(layer.bwd, s.b, dhb);
  std::vector<Vec> dxs(n);
  for (size_t p = 0; p < n; ++p) {
    dxs[p] = dxf[p];
    const Vec& rb = dxb[n - 1 - p];
    for (size_t j = 0; j < dxs[p].size(); ++j) dxs[p][j] += rb[j];
  }
  return dxs;
}

struct TaggerTape {
  std::vector<Vec> inputs;
  BiSeq s1, s2, s3;
  std::vector<Vec> in2, in3;      // stacked: inputs of layers 2 and 3
  std::vector<Vec> mask1, mask2;  // empty at inference or rate 0
  std::vector<Vec> drop1, drop2;  // parallel: dropped outputs of layers 1 and 2
  std::vector<Vec> final_in;
  std::vector<Vec> logits;
};

std::vector<Vec> make_masks(size_t n, size_t dim, double rate, bool training, Rng* rng) {
  std::vector<Vec> masks;
  if (training && rate > 0.0) {
    masks.resize(n);
    for (size_t p = 0; p < n; ++p) masks[p] = dropout_mask(dim, rate, *rng);
  }
  return masks;
}

std::vector<Vec> apply_masks(const std::vector<Vec>& v, const std::vector<Vec>& masks) {
  if (masks.empty()) return v;
  std::vector<Vec> out(v.size());
  for (size_t p = 0; p < v.size(); ++p) {
    out[p].resize(v[p].size());
    for (size_t j = 0; j < v[p].size(); ++j) out[p][j] = v[p][j] * masks[p][j];
  }
  return out;
}

void tagger_forward(const SegmenterModel& m, const std::vector<Vec>& inputs, bool training,
                    Rng* rng, TaggerTape& tape) {
  for (const Vec& v : inputs)
    if (int(v.size()) != m.cfg.input_dim) throw ConfigError("tagger: input dim mismatch");
  const size_t n = inputs.size();
  const size_t hh = size_t(2 * m.cfg.hidden_dim);
  tape.inputs = inputs;
  if (m.cfg.topology == Topology::kParallel) {
    tape.s1 = bilstm_run(m.l1, inputs);
    tape.mask1 = make_masks(n, hh, m.cfg.dropout_rate, training, rng);
    tape.s2 = bilstm_run(m.l2, inputs);
    tape.mask2 = make_masks(n, hh, m.cfg.dropout_rate, training, rng);
    tape.s3 = bilstm_run(m.l3, inputs);
    tape.drop1 = apply_masks(tape.s1.out, tape.mask1);
    tape.drop2 = apply_masks(tape.s2.out, tape.mask2);
    tape.final_in.resize(n);
    for (size_t p = 0; p < n; ++p) {
      Vec v;
      v.reserve(3 * hh);
      v.insert(v.end(), tape.drop1[p].begin(), tape.drop1[p].end());
      v.insert(v.end(), tape.drop2[p].begin(), tape.drop2[p].end());
      v.insert(v.end(), tape.s3.out[p].begin(), tape.s3.out[p].end());
      tape.final_in[p] = std::move(v);
    }
  } else {
    tape.s1 = bilstm_run(m.l1, inputs);
    tape.mask1 = make_masks(n, hh, m.cfg.dropout_rate, training, rng);
    tape.in2 = apply_masks(tape.s1.out, tape.mask1);
    tape.s2 = bilstm_run(m.l2, tape.in2);
    tape.mask2 = make_masks(n, hh, m.cfg.dropout_rate, training, rng);
    tape.in3 = apply_masks(tape.s2.out, tape.mask2);
    tape.s3 = bilstm_run(m.l3, tape.in3);
    tape.final_in = tape.s3.out;
  }
  tape.logits.resize(n);
  for (size_t p = 0; p < n; ++p) tape.logits[p] = m.out.apply(tape.final_in[p]);
}

std::vector<Vec> tagger_backward(SegmenterModel& m, const TaggerTape& tape,
                                 const std::vector<Vec>& dlogits) {
  const size_t n = tape.inputs.size();
  const size_t hh = size_t(2 * m.cfg.hidden_dim);
  std::vector<Vec> dfinal(n, Vec(size_t(final_in_dim(m.cfg)), 0.0));
  for (size_t p = 0; p < n; ++p)
    m.out.backward(tape.final_in[p].data(), dlogits[p].data(), dfinal[p].data());

  if (m.cfg.topology == Topology::kParallel) {
    std::vector<Vec> d1(n, Vec(hh)), d2(n, Vec(hh)), d3(n, Vec(hh));
    for (size_t p = 0; p < n; ++p) {
      std::copy(dfinal[p].begin(), dfinal[p].begin() + hh, d1[p].begin());
      std::copy(dfinal[p].begin() + hh, dfinal[p].begin() + 2 * hh, d2[p].begin());
      std::copy(dfinal[p].begin() + 2 * hh, dfinal[p].end(), d3[p].begin());
    }
    d1 = apply_masks(d1, tape.mask1);
    d2 = apply_masks(d2, tape.mask2);
    std::vector<Vec> dinputs = bilstm_backward(m.l1, tape.s1, d1);
    auto add = [&](std::vector<Vec> dx) {
      for (size_t p = 0; p < n; ++p)
        for (size_t j = 0; j < dinputs[p].size(); ++j) dinputs[p][j] += dx[p][j];
    };
    add(bilstm_backward(m.l2, tape.s2, d2));
    add(bilstm_backward(m.l3, tape.s3, d3));
    return dinputs;
  }
  std::vector<Vec> din3 = bilstm_backward(m.l3, tape.s3, dfinal);
  din3 = apply_masks(din3, tape.mask2);
  std::vector<Vec> din2 = bilstm_backward(m.l2, tape.s2, din3);
  din2 = apply_masks(din2, tape.mask1);
  return bilstm_backward(m.l1, tape.s1, din2);
}

std::vector<Label> argmax_labels(const std::vector<Vec>& logits) {
  std::vector<Label> labels(logits.size());
  for (size_t p = 0; p < logits.size(); ++p)
    labels[p] = logits[p][1] >= logits[p][0] ? Label::kSeparate : Label::kContinue;
  return labels;
}

}  // namespace

std::string topology_name(Topology t) {
  return t == Topology::kParallel ? "parallel" : "stacked";
}

Topology topology_from_name(const std::string& name) {
  if (name == "parallel") return Topology::kParallel;
  if (name == "stacked") return Topology::kStacked;
  throw ConfigError("unknown topology '" + name + "'");
}

BiLstmLayer::BiLstmLayer(const std::string& prefix, int input_dim, int hidden_dim)
    : fwd(prefix + ".fwd", input_dim, hidden_dim), bwd(prefix + ".bwd", input_dim, hidden_dim) {}

SegmenterModel::SegmenterModel(const TaggerConfig& config)
    : cfg(validated(config)),
      l1("tagger.l1", cfg.input_dim, cfg.hidden_dim),
      l2("tagger.l2", upper_in_dim(cfg), cfg.hidden_dim),
      l3("tagger.l3", upper_in_dim(cfg), cfg.hidden_dim),
      out("tagger.out", 2, final_in_dim(cfg)) {}

std::vector<Tensor*> SegmenterModel::parameters() {
  std::vector<Tensor*> ps;
  for (BiLstmLayer* l : {&l1, &l2, &l3})
    for (LstmCell* c : {&l->fwd, &l->bwd}) {
      ps.push_back(&c->wx);
      ps.push_back(&c->wh);
      ps.push_back(&c->b);
    }
  ps.push_back(&out.w);
  ps.push_back(&out.b);
  ps.push_back(&mixer.w);
  ps.push_back(&mixer.gamma);
  return ps;
}

SegmenterModel make_segmenter(const TaggerConfig& cfg, Rng& rng) {
  SegmenterModel m(cfg);
  for (BiLstmLayer* l : {&m.l1, &m.l2, &m.l3}) {
    init_lstm(l->fwd, rng);
    init_lstm(l->bwd, rng);
  }
  init_linear(m.out, rng);
  return m;
}

std::vector<Label> encode_labels(const Sentence& s) {
  if (!s.has_gold()) throw ConfigError("encode_labels: sentence has no gold segmentation");
  std::vector<Label> labels(s.chars.size(), Label::kContinue);
  for (const Span& w : s.gold_words) {
    if (w.begin < 0 || w.end <= w.begin || w.end > int(s.chars.size()))
      throw ConfigError("encode_labels: word span out of range");
    labels[size_t(w.end - 1)] = Label::kSeparate;
  }
  return labels;
}

std::vector<Span> decode_labels(const std::u32string& chars, const std::vector<Label>& labels) {
  if (chars.size() != labels.size()) throw ConfigError("decode_labels: length mismatch");
  std::vector<Span> words;
  int start = 0;
  const int n = int(chars.size());
  for (int p = 0; p < n; ++p)
    if (labels[size_t(p)] == Label::kSeparate) {
      words.push_back({start, p + 1});
      start = p + 1;
    }
  if (start < n) words.push_back({start, n});  // force-close a trailing open word
  return words;
}

std::vector<Vec> tagger_logits(const SegmenterModel& m, const std::vector<Vec>& inputs,
                               bool training, uint64_t seed) {
  Rng rng(seed);
  TaggerTape tape;
  tagger_forward(m, inputs, training, &rng, tape);
  return std::move(tape.logits);
}

int EmbeddingProvider::dim() const {
  if (bilm && sgns) throw ConfigError("embedding provider: both sources set");
  if (bilm) return bilm->cfg.exposed_dim();
  if (sgns) return sgns->embed_dim;
  throw ConfigError("embedding provider: no source set");
}

std::string EmbeddingProvider::source() const {
  if (bilm && sgns) throw ConfigError("embedding provider: both sources set");
  if (bilm) return "elmo";
  if (sgns) return "static";
  throw ConfigError("embedding provider: no source set");
}

const CharVocab& EmbeddingProvider::char_vocab() const {
  if (bilm) return bilm->vocab;
  if (sgns) return sgns->vocab;
  throw ConfigError("embedding provider: no source set");
}

std::vector<int> EmbeddingProvider::encode(const std::u32string& chars) const {
  return char_vocab().encode(chars);
}

ProviderStates provider_states(const EmbeddingProvider& p, const std::vector<int>& ids) {
  ProviderStates st;
  if (p.source() == "elmo") {
    st.acts = extract_layers(*p.bilm, ids);
  } else {
    st.statics.reserve(ids.size());
    for (int id : ids) st.statics.push_back(embed_lookup(*p.sgns, id));
  }
  return st;
}

std::vector<Vec> provider_inputs(const SegmenterModel& m, const ProviderStates& st) {
  if (m.cfg.embedding_source == "elmo") return elmo_mix(m.mixer, st.acts);
  return st.statics;
}

double sentence_loss(SegmenterModel& m, const ProviderStates& st,
                     const std::vector<Label>& labels, bool training, uint64_t dropout_seed,
                     bool grads) {
  std::vector<Vec> inputs = provider_inputs(m, st);
  if (inputs.size() != labels.size())
    throw ConfigError("tagger: labels do not match the sentence length");
  Rng rng(dropout_seed);
  TaggerTape tape;
  tagger_forward(m, inputs, training, &rng, tape);
  const size_t n = inputs.size();
  double loss = 0.0;
  std::vector<Vec> dlogits(n, Vec(2, 0.0));
  for (size_t p = 0; p < n; ++p)
    loss += softmax_xent(tape.logits[p].data(), 2, int(labels[p]),
                         grads ? dlogits[p].data() : nullptr);
  if (grads) {
    std::vector<Vec> dinputs = tagger_backward(m, tape, dlogits);
    if (m.cfg.embedding_source == "elmo") elmo_mix_backward(m.mixer, st.acts, dinputs);
  }
  return loss;
}

SegmenterModel train_tagger(const Corpus& train, const Corpus& valid,
                            const EmbeddingProvider& provider, TaggerConfig cfg, int epochs,
                            uint64_t seed, TaggerTrainStats* stats, bool verbose) {
  if (train.size() == 0) throw ConfigError("tagger: empty training corpus");
  if (cfg.input_dim == 0) cfg.input_dim = provider.dim();
  if (cfg.input_dim != provider.dim())
    throw ConfigError("tagger: input dim does not match the embedding provider");
  cfg.embedding_source = provider.source();

  Rng rng(seed);
  SegmenterModel model = make_segmenter(cfg, rng);
  model.provider_fingerprint = provider.fingerprint;
  const bool mixes = provider.source() == "elmo";

  // The provider is frozen, so its per-sentence work happens exactly once.
  struct Example {
    std::vector<Label> labels;
    ProviderStates st;
    size_t n = 0;
  };
  std::vector<Example> examples;
  examples.reserve(train.size());
  for (const Sentence& s : train.sentences) {
    Example ex;
    ex.labels = encode_labels(s);
    ex.st = provider_states(provider, provider.encode(s.chars));
    ex.n = s.chars.size();
    examples.push_back(std::move(ex));
  }
  std::vector<ProviderStates> valid_states;
  valid_states.reserve(valid.size());
  for (const Sentence& s : valid.sentences) {
    if (!s.has_gold()) throw ConfigError("tagger: validation sentence without segmentation");
    valid_states.push_back(provider_states(provider, provider.encode(s.chars)));
  }

  std::vector<Tensor*> params = model.parameters();
  Adam adam(params);
  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), size_t(0));

  std::vector<Vec> best;
  double best_f1 = -1.0;
  int best_epoch = -1;

  TaggerTape tape;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    size_t positions = 0;
    for (size_t idx : order) {
      const Example& ex = examples[idx];
      std::vector<Vec> inputs = provider_inputs(model, ex.st);
      zero_grads(params);
      tagger_forward(model, inputs, true, &rng, tape);
      std::vector<Vec> dlogits(ex.n, Vec(2));
      for (size_t p = 0; p < ex.n; ++p)
        epoch_loss += softmax_xent(tape.logits[p].data(), 2, int(ex.labels[p]),
                                   dlogits[p].data());
      positions += ex.n;
      std::vector<Vec> dinputs = tagger_backward(model, tape, dlogits);
      if (mixes) elmo_mix_backward(model.mixer, ex.st.acts, dinputs);
      clip_global_norm(params, 5.0);
      adam.step();
    }

    double f1 = 0.0;
    if (valid.size() > 0) {
      Corpus pred;
      pred.sentences.reserve(valid.size());
      for (size_t i = 0; i < valid.size(); ++i) {
        TaggerTape vt;
        tagger_forward(model, provider_inputs(model, valid_states[i]), false, nullptr, vt);
        Sentence ps;
        ps.chars = valid.sentences[i].chars;
        ps.gold_words = decode_labels(ps.chars, argmax_labels(vt.logits));
        pred.sentences.push_back(std::move(ps));
      }
      f1 = score_f1(valid, pred).f1;
    }
    if (stats) stats->epoch_valid_f1.push_back(f1);
    if (verbose)
      std::fprintf(stderr, "epoch %d/%d  tag loss %.4f  valid f1 %.4f\n", epoch + 1, epochs,
                   positions ? epoch_loss / double(positions) : 0.0, f1);
    if (f1 >= best_f1) {  // later epochs win ties
      best_f1 = f1;
      best_epoch = epoch;
      best.clear();
      best.reserve(params.size());
      for (const Tensor* t : params) best.push_back(t->v);
    }
  }

  if (best_epoch >= 0)
    for (size_t j = 0; j < params.size(); ++j) params[j]->v = best[j];
  if (stats) {
    stats->best_epoch = best_epoch;
    stats->best_f1 = best_f1 < 0.0 ? 0.0 : best_f1;
  }
  return model;
}

std::vector<Label> tag_chars(const SegmenterModel& m, const EmbeddingProvider& p,
                             const std::u32string& chars) {
  if (chars.empty()) return {};
  if (p.source() != m.cfg.embedding_source)
    throw ConfigError("tagger: embedding source mismatch (model wants " +
                      m.cfg.embedding_source + ", provider is " + p.source() + ")");
  if (p.dim() != m.cfg.input_dim)
    throw ConfigError("tagger: provider dim does not match the model");
  ProviderStates st = provider_states(p, p.encode(chars));
  TaggerTape tape;
  tagger_forward(m, provider_inputs(m, st), false, nullptr, tape);
  return argmax_labels(tape.logits);
}

std::vector<std::u32string> segment(const SegmenterModel& m, const EmbeddingProvider& p,
                                    std::u32string_view raw) {
  std::u32string chars;
  chars.reserve(raw.size());
  for (char32_t c : raw) {
    c = halfwidth_of(c);
    if (c == U' ' || c == U'\t') continue;  // word breaks carry no content
    chars.push_back(c);
  }
  if (chars.empty()) return {};
  std::vector<Label> labels = tag_chars(m, p, chars);
  std::vector<std::u32string> words;
  for (const Span& w : decode_labels(chars, labels))
    words.push_back(chars.substr(size_t(w.begin), size_t(w.end - w.begin)));
  return words;
}

Corpus segment_corpus(const SegmenterModel& m, const EmbeddingProvider& p, const Corpus& in) {
  Corpus out;
  out.source = in.source;
  out.normalized = in.normalized;
  out.sentences.resize(in.size());
  for (size_t i = 0; i < in.size(); ++i) {
    const std::u32string& chars = in.sentences[i].chars;
    out.sentences[i].chars = chars;
    out.sentences[i].gold_words = decode_labels(chars, tag_chars(m, p, chars));
  }
  return out;
}

ModelFile pack_tagger(const SegmenterModel& m) {
  ModelFile mf;
  mf.component = "tagger";
  char drop[64];
  std::snprintf(drop, sizeof(drop), "%.17g", m.cfg.dropout_rate);
  mf.meta = {{"topology", topology_name(m.cfg.topology)},
             {"input_dim", std::to_string(m.cfg.input_dim)},
             {"hidden_dim", std::to_string(m.cfg.hidden_dim)},
             {"num_bilstms", std::to_string(m.cfg.num_bilstms)},
             {"dropout_rate", drop},
             {"embedding_source", m.cfg.embedding_source},
             {"provider_fingerprint", m.provider_fingerprint}};
  for (const BiLstmLayer* l : {&m.l1, &m.l2, &m.l3})
    for (const LstmCell* c : {&l->fwd, &l->bwd}) {
      mf.tensors.push_back(c->wx);
      mf.tensors.push_back(c->wh);
      mf.tensors.push_back(c->b);
    }
  mf.tensors.push_back(m.out.w);
  mf.tensors.push_back(m.out.b);
  for (int i = 0; i < 3; ++i) {
    Tensor t("elmo.w" + std::to_string(i), {1});
    t.v[0] = m.mixer.w.v[size_t(i)];
    mf.tensors.push_back(std::move(t));
  }
  Tensor g("elmo.gamma", {1});
  g.v[0] = m.mixer.gamma.v[0];
  mf.tensors.push_back(std::move(g));
  for (Tensor& t : mf.tensors) t.zero_grad();
  return mf;
}

SegmenterModel unpack_tagger(const ModelFile& mf) {
  if (mf.component != "tagger")
    throw ModelError("expected a tagger model file, got component '" + mf.component + "'");
  TaggerConfig cfg;
  cfg.topology = topology_from_name(mf.meta_value("topology"));
  cfg.input_dim = std::stoi(mf.meta_value("input_dim"));
  cfg.hidden_dim = std::stoi(mf.meta_value("hidden_dim"));
  cfg.num_bilstms = std::stoi(mf.meta_value("num_bilstms"));
  cfg.dropout_rate = std::stod(mf.meta_value("dropout_rate"));
  cfg.embedding_source = mf.meta_value("embedding_source");
  SegmenterModel m(cfg);
  m.provider_fingerprint = mf.meta_value("provider_fingerprint");
  for (Tensor* t : m.parameters()) {
    if (t == &m.mixer.w || t == &m.mixer.gamma) continue;
    const Tensor& src = mf.require(t->name);
    if (src.shape != t->shape)
      throw ModelError("tagger model file: tensor '" + t->name + "' has the wrong shape");
    t->v = src.v;
  }
  for (int i = 0; i < 3; ++i)
    m.mixer.w.v[size_t(i)] = mf.require("elmo.w" + std::to_string(i)).v.at(0);
  m.mixer.gamma.v[0] = mf.require("elmo.gamma").v.at(0);
  return m;
}

}  // namespace cws
