#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cws/errors.hpp"
#include "cws/rng.hpp"

namespace cws {

// Character-index word span, [begin, end).
struct Span {
  int begin = 0;
  int end = 0;
  bool operator==(const Span&) const = default;
};

struct Sentence {
  std::u32string chars;
  std::vector<Span> gold_words;  // empty when the sentence is unsegmented
  bool has_gold() const { return !gold_words.empty(); }
};

struct Corpus {
  std::vector<Sentence> sentences;
  std::string source;
  bool normalized = false;
  size_t size() const { return sentences.size(); }
};

// Throws DataError naming the byte offset of the first invalid sequence;
// base_offset shifts the reported offset (for line-wise decoding).
std::u32string decode_utf8(std::string_view bytes, size_t base_offset = 0);
std::string encode_utf8(std::u32string_view chars);

// Fullwidth forms U+FF01..U+FF5E map down by 0xFEE0; ideographic space
// U+3000 maps to U+0020. Everything else is untouched, CJK punctuation
// included.
char32_t halfwidth_of(char32_t c);
std::u32string normalize_halfwidth(std::u32string_view text);
std::string normalize_halfwidth_utf8(std::string_view text);

// One sentence per line, words separated by runs of ASCII spaces. A line
// without spaces becomes a single one-word sentence.
Sentence parse_sentence_line(const std::u32string& line);
Corpus corpus_from_text(std::string_view text, std::string source, bool normalize);
Corpus load_corpus(const std::string& path, bool normalize);

// Renders sentences back with single spaces between words.
std::string render_corpus(const Corpus& corpus);

// Seeded shuffle assigns ceil(fraction * N) sentences to the validation
// side; both sides keep the original sentence order.
std::pair<Corpus, Corpus> split_train_valid(const Corpus& corpus, double fraction,
                                            uint64_t seed);

class CharVocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kNumReserved = 4;

  CharVocab();

  // Adds the character if absent; returns its id either way.
  int add(char32_t c);
  int id_of(char32_t c) const;  // kUnk for characters absent at build time
  bool contains(char32_t c) const;
  char32_t char_of(int id) const;  // valid for non-reserved ids only
  int size() const { return int(chars_.size()); }

  std::vector<int> encode(std::u32string_view chars) const;

  // Entries in id order: the four reserved names, then one single-character
  // string per id. This is the vocabulary section of the model container.
  std::vector<std::string> entries_utf8() const;
  static CharVocab from_entries_utf8(const std::vector<std::string>& entries);

 private:
  std::unordered_map<char32_t, int> ids_;
  std::vector<char32_t> chars_;  // reserved slots hold U+0000
};

// Characters with frequency >= min_count get ids in frequency-descending
// order, ties broken by code point.
CharVocab build_vocab(const Corpus& train, int min_count = 1);

}  // namespace cws
