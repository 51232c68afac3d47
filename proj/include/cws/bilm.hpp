#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cws/data.hpp"
#include "cws/nn.hpp"
#include "cws/rng.hpp"
#include "cws/serialize.hpp"
#include "cws/tensor.hpp"

namespace cws {

// Character-level bidirectional LM: per-character token representations fed
// through two forward and two backward LSTM layers, with one output softmax
// shared by both directions.
struct BiLMConfig {
  int vocab_size = 0;
  int embed_dim = 64;    // token representation dim
  int hidden_dim = 64;   // LSTM hidden dim per direction
  int num_layers = 2;    // fixed; kept as data so loaders can validate it
  // Dimension of each exposed layer. 0 means 2 * hidden_dim, the only value
  // the plain-concatenation layers can produce.
  int projection_dim = 0;
  int exposed_dim() const { return projection_dim > 0 ? projection_dim : 2 * hidden_dim; }
};

struct BiLMModel {
  BiLMConfig cfg;
  CharVocab vocab;
  Tensor embed;       // [V, E]
  Linear rep_hidden;  // E <- E, tanh
  Linear rep_out;     // E <- E
  LstmCell fwd1, fwd2, bwd1, bwd2;
  Linear out;       // V <- H, softmax weights shared by both directions
  Linear expose_x;  // 2H <- E, fixed random projection; only the mixer sees it

  BiLMModel(const BiLMConfig& cfg, CharVocab vocab);
  std::vector<Tensor*> parameters();
};

BiLMModel make_bilm(const BiLMConfig& cfg, CharVocab vocab, Rng& rng);

// Per-position token representation: embedding row -> tanh MLP. Context-free.
Vec token_representation(const BiLMModel& m, int id);
std::vector<Vec> token_representation(const BiLMModel& m, const std::vector<int>& ids);

enum class LmDirection { kForward, kBackward };

// Log-distribution over the vocab at every position, in sentence order.
// Forward: position k conditions on BOS, t_1..t_{k-1}. Backward: position k
// conditions on EOS, t_N..t_{k+1}.
std::vector<Vec> lm_logprobs(const BiLMModel& m, const std::vector<int>& ids,
                             LmDirection dir);

struct BiLMDirTape {
  std::vector<int> in_ids;   // sentinel followed by the shifted sentence
  std::vector<int> targets;  // one predicted char id per step
  std::vector<Vec> hiddens;  // tanh activations of the representation MLP
  std::vector<Vec> xs;       // token representations fed to layer 1
  LstmSeq l1, l2;
};
struct BiLMTape {
  BiLMDirTape fwd, bwd;
};

// Total negative log-likelihood: forward cross-entropy sum plus backward
// cross-entropy sum over all positions.
double bilm_loss(const BiLMModel& m, const std::vector<int>& ids, BiLMTape* tape = nullptr);
void bilm_loss_backward(BiLMModel& m, const BiLMTape& tape);

// The three exposed layers, every position, all of dim exposed_dim():
// x through the fixed projection, h1 and h2 as (forward; backward) concats.
struct LayerActivations {
  std::vector<Vec> x, h1, h2;
  size_t size() const { return x.size(); }
};

LayerActivations extract_layers(const BiLMModel& m, const std::vector<int>& ids);

// Builds the vocab from the corpus, then runs per-sentence Adam over
// seeded-shuffled sentence order. Mean per-char-position loss of each epoch
// lands in epoch_mean_loss when given.
BiLMModel train_bilm(const Corpus& corpus, BiLMConfig cfg, int epochs, uint64_t seed,
                     std::vector<double>* epoch_mean_loss = nullptr, bool verbose = false,
                     int min_count = 1);

ModelFile pack_bilm(const BiLMModel& m);
BiLMModel unpack_bilm(const ModelFile& mf);

}  // namespace cws
