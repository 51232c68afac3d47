#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cws/data.hpp"
#include "cws/serialize.hpp"
#include "cws/tensor.hpp"

namespace cws {

// Static character embeddings trained with skip-gram and negative sampling.
// The center table is the embedding users look up; the context table only
// exists for training.
struct SkipGramModel {
  int embed_dim = 0;
  CharVocab vocab;
  Tensor center;   // [V, D]
  Tensor context;  // [V, D]
  SkipGramModel(CharVocab vocab, int embed_dim);
};

// (center, context) pairs for one sentence: every offset in -window..window
// except 0, clipped at the sentence bounds, in position-major order.
std::vector<std::pair<int, int>> skipgram_pairs(const std::vector<int>& ids, int window);

// One positive and `negatives` sampled updates per pair, maximizing
// log sigmoid(u.v) + sum log sigmoid(-u.v'); negatives drawn from the
// unigram^0.75 distribution, resampled when they hit the positive context.
// Plain SGD with a fixed learning rate.
SkipGramModel train_skipgram(const Corpus& corpus, CharVocab vocab, int embed_dim,
                             int window, int negatives, int epochs, uint64_t seed,
                             double lr = 0.025, bool verbose = false);

Vec embed_lookup(const SkipGramModel& m, int char_id);

ModelFile pack_sgns(const SkipGramModel& m);
SkipGramModel unpack_sgns(const ModelFile& mf);

}  // namespace cws
