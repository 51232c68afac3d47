#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cws/bilm.hpp"
#include "cws/data.hpp"
#include "cws/elmo.hpp"
#include "cws/nn.hpp"
#include "cws/rng.hpp"
#include "cws/serialize.hpp"
#include "cws/sgns.hpp"

namespace cws {

// Per-character segmentation state: stay in the current word or end it here.
enum class Label : int { kContinue = 0, kSeparate = 1 };

// Three Bi-LSTMs over the input vectors, wired one of two ways:
//   parallel - all three read the input; outputs 1 and 2 pass dropout; the
//              three concatenated outputs feed the 2-way projection
//   stacked  - layers feed forward with dropout after 1 and 2; the top
//              layer's output feeds the projection
enum class Topology { kParallel, kStacked };

std::string topology_name(Topology t);
Topology topology_from_name(const std::string& name);

struct TaggerConfig {
  int input_dim = 0;
  int hidden_dim = 300;  // per direction
  int num_bilstms = 3;   // fixed; kept as data so loaders can validate it
  Topology topology = Topology::kParallel;
  double dropout_rate = 0.33;
  std::string embedding_source = "elmo";  // "elmo" | "static"
};

struct BiLstmLayer {
  LstmCell fwd, bwd;
  BiLstmLayer(const std::string& prefix, int input_dim, int hidden_dim);
};

struct SegmenterModel {
  TaggerConfig cfg;
  BiLstmLayer l1, l2, l3;
  Linear out;  // 2 rows
  ElmoMixer mixer;
  // Content hash of the frozen embedding model this tagger was trained
  // against; enforced when segmenting.
  std::string provider_fingerprint;

  explicit SegmenterModel(const TaggerConfig& cfg);
  std::vector<Tensor*> parameters();
};

SegmenterModel make_segmenter(const TaggerConfig& cfg, Rng& rng);

// SEPARATE at the last character of every gold word, CONTINUE elsewhere.
std::vector<Label> encode_labels(const Sentence& s);
// SEPARATE closes a word after its character; a trailing open word is
// force-closed at the end. Always a partition.
std::vector<Span> decode_labels(const std::u32string& chars, const std::vector<Label>& labels);

// Per-position 2-vectors. Dropout only when training; inference deterministic.
std::vector<Vec> tagger_logits(const SegmenterModel& m, const std::vector<Vec>& inputs,
                               bool training, uint64_t seed);

// Frozen source of per-character input vectors: either a bidirectional LM
// (mixed by the model's trainable mixer) or a static embedding table.
struct EmbeddingProvider {
  const BiLMModel* bilm = nullptr;
  const SkipGramModel* sgns = nullptr;
  std::string fingerprint;  // content hash of the file the provider came from

  int dim() const;
  std::string source() const;  // "elmo" | "static"
  const CharVocab& char_vocab() const;
  std::vector<int> encode(const std::u32string& chars) const;
};

// One sentence's frozen activations, computed once and reused every epoch.
struct ProviderStates {
  LayerActivations acts;     // elmo source
  std::vector<Vec> statics;  // static source
};
ProviderStates provider_states(const EmbeddingProvider& p, const std::vector<int>& ids);
std::vector<Vec> provider_inputs(const SegmenterModel& m, const ProviderStates& st);

// One sentence's summed cross-entropy from frozen provider states, exactly
// as the trainer computes it. Dropout masks are drawn from dropout_seed, so
// repeated calls see the same forward pass. With grads = true the backward
// pass accumulates into parameters(), mixer included for the elmo source.
double sentence_loss(SegmenterModel& m, const ProviderStates& st,
                     const std::vector<Label>& labels, bool training, uint64_t dropout_seed,
                     bool grads);

struct TaggerTrainStats {
  std::vector<double> epoch_valid_f1;
  int best_epoch = -1;  // -1 when no epochs ran
  double best_f1 = 0.0;
};

// Per sentence: frozen provider states -> trainable mix (elmo) -> tagger in
// training mode -> summed per-position cross-entropy -> one clipped Adam step
// over tagger + mixer parameters. Keeps the parameters of the epoch with the
// best validation F1, later epochs winning ties.
SegmenterModel train_tagger(const Corpus& train, const Corpus& valid,
                            const EmbeddingProvider& provider, TaggerConfig cfg, int epochs,
                            uint64_t seed, TaggerTrainStats* stats = nullptr,
                            bool verbose = false);

// Greedy per-position argmax, ties toward SEPARATE.
std::vector<Label> tag_chars(const SegmenterModel& m, const EmbeddingProvider& p,
                             const std::u32string& chars);

// Half-width normalization, then spaces and tabs are dropped, then the
// remaining characters are tagged and cut into words. Empty input gives an
// empty list; the words always concatenate back to the tagged characters.
std::vector<std::u32string> segment(const SegmenterModel& m, const EmbeddingProvider& p,
                                    std::u32string_view raw);

// Tags every sentence; the result carries predicted spans as its word lists.
Corpus segment_corpus(const SegmenterModel& m, const EmbeddingProvider& p, const Corpus& in);

ModelFile pack_tagger(const SegmenterModel& m);
SegmenterModel unpack_tagger(const ModelFile& mf);

}  // namespace cws
