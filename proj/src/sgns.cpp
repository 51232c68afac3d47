#include "cws/sgns.hpp"

#include "cws/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "cws/errors.hpp"
#include "cws/rng.hpp"

namespace cws {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Cumulative unigram^0.75 distribution over char ids present in the corpus.
struct NegativeSampler {
  std::vector<double> cdf;  // parallel to vocab ids
  int draw(Rng& rng) const {
    const double u = rng.uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    return int(it - cdf.begin());
  }
};

NegativeSampler build_sampler(const Corpus& corpus, const CharVocab& vocab) {
  std::vector<double> mass(size_t(vocab.size()), 0.0);
  for (const Sentence& s : corpus.sentences)
    for (char32_t c : s.chars) mass[size_t(vocab.id_of(c))] += 1.0;
  NegativeSampler ns;
  ns.cdf.resize(mass.size());
  double acc = 0.0;
  for (size_t j = 0; j < mass.size(); ++j) {
    acc += std::pow(mass[j], 0.75);
    ns.cdf[j] = acc;
  }
  if (acc <= 0.0) throw ConfigError("skipgram: corpus has no characters");
  return ns;
}

}  // namespace

SkipGramModel::SkipGramModel(CharVocab voc, int dim)
    : embed_dim(dim),
      vocab(std::move(voc)),
      center("sgns.center", {vocab.size(), dim}),
      context("sgns.context", {vocab.size(), dim}) {
  if (dim <= 0) throw ConfigError("skipgram: embed dim must be positive");
}

std::vector<std::pair<int, int>> skipgram_pairs(const std::vector<int>& ids, int window) {
  if (window < 1) throw ConfigError("skipgram: window must be at least 1");
  std::vector<std::pair<int, int>> pairs;
  const int n = int(ids.size());
  for (int p = 0; p < n; ++p)
    for (int off = -window; off <= window; ++off) {
      if (off == 0) continue;
      const int q = p + off;
      if (q < 0 || q >= n) continue;
      pairs.emplace_back(ids[size_t(p)], ids[size_t(q)]);
    }
  return pairs;
}

SkipGramModel train_skipgram(const Corpus& corpus, CharVocab vocab, int embed_dim,
                             int window, int negatives, int epochs, uint64_t seed,
                             double lr, bool verbose) {
  if (corpus.size() == 0) throw ConfigError("skipgram: empty training corpus");
  if (negatives < 0) throw ConfigError("skipgram: negative count must be non-negative");
  Rng rng(seed);
  SkipGramModel m(std::move(vocab), embed_dim);
  const double bound = 0.5 / double(embed_dim);
  init_uniform(m.center, -bound, bound, rng);
  // context rows start at zero, the usual skip-gram convention

  NegativeSampler sampler = build_sampler(corpus, m.vocab);

  std::vector<std::vector<int>> encoded;
  encoded.reserve(corpus.size());
  for (const Sentence& s : corpus.sentences) {
    std::vector<int> ids = m.vocab.encode(s.chars);
    if (!ids.empty()) encoded.push_back(std::move(ids));
  }

  std::vector<size_t> order(encoded.size());
  for (size_t j = 0; j < order.size(); ++j) order[j] = j;

  const int d = embed_dim;
  Vec dv(size_t(d), 0.0);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    shuffle(order, rng);
    size_t pair_count = 0;
    for (size_t s : order) {
      for (const auto& [cen, ctx] : skipgram_pairs(encoded[s], window)) {
        ++pair_count;
        double* v = m.center.v.data() + size_t(cen) * size_t(d);
        std::fill(dv.begin(), dv.end(), 0.0);
        auto update = [&](int id, double label) {
          double* u = m.context.v.data() + size_t(id) * size_t(d);
          double dot = 0.0;
          for (int j = 0; j < d; ++j) dot += u[j] * v[j];
          const double g = (label - sigmoid(dot)) * lr;
          for (int j = 0; j < d; ++j) {
            dv[size_t(j)] += g * u[j];
            u[j] += g * v[j];
          }
        };
        update(ctx, 1.0);
        for (int nn = 0; nn < negatives; ++nn) {
          int neg = sampler.draw(rng);
          // never use the positive context as its own negative
          for (int attempt = 0; neg == ctx && attempt < 100; ++attempt)
            neg = sampler.draw(rng);
          if (neg == ctx) continue;
          update(neg, 0.0);
        }
        for (int j = 0; j < d; ++j) v[j] += dv[size_t(j)];
      }
    }
    if (verbose)
      std::fprintf(stderr, "epoch %d/%d  skipgram pairs %zu\n", epoch + 1, epochs,
                   pair_count);
  }
  return m;
}

Vec embed_lookup(const SkipGramModel& m, int char_id) {
  if (char_id < 0 || char_id >= m.vocab.size())
    throw std::out_of_range("skipgram: char id " + std::to_string(char_id) + " out of range");
  const double* row = m.center.v.data() + size_t(char_id) * size_t(m.embed_dim);
  return Vec(row, row + m.embed_dim);
}

ModelFile pack_sgns(const SkipGramModel& m) {
  ModelFile mf;
  mf.component = "sgns";
  mf.meta = {{"embed_dim", std::to_string(m.embed_dim)}};
  mf.tensors.push_back(m.center);
  mf.tensors.push_back(m.context);
  for (Tensor& t : mf.tensors) t.zero_grad();
  mf.vocab = m.vocab.entries_utf8();
  return mf;
}

SkipGramModel unpack_sgns(const ModelFile& mf) {
  if (mf.component != "sgns")
    throw ModelError("expected a sgns model file, got component '" + mf.component + "'");
  const int dim = std::stoi(mf.meta_value("embed_dim"));
  SkipGramModel m(CharVocab::from_entries_utf8(mf.vocab), dim);
  for (Tensor* t : {&m.center, &m.context}) {
    const Tensor& src = mf.require(t->name);
    if (src.shape != t->shape)
      throw ModelError("sgns model file: tensor '" + t->name + "' has the wrong shape");
    t->v = src.v;
  }
  return m;
}

}  // namespace cws
