#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cws/data.hpp"

namespace cws {

// Word-level scores, micro-averaged over the whole corpus.
struct SegScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int64_t gold_words = 0;
  int64_t predicted_words = 0;
  int64_t correct_words = 0;
};

struct OOVReport {
  double oov_rate = 0.0;     // over gold test word tokens
  double oov_recall = 0.0;   // exact-span recovery of OOV tokens
  double digit_ratio = 0.0;  // over distinct OOV surfaces
  double long_ratio = 0.0;   // length >= 5, over distinct OOV surfaces
  int64_t gold_tokens = 0;
  int64_t oov_tokens = 0;
  int64_t oov_recovered = 0;
  int64_t oov_types = 0;
};

struct WordSpan {
  int begin = 0;
  int end = 0;
  std::u32string surface;
  bool operator==(const WordSpan&) const = default;
};

// Canonical matching form of a segmentation. Throws EvalError unless the
// words partition the sentence.
std::vector<WordSpan> to_spans(const std::u32string& chars, const std::vector<Span>& words);
std::vector<WordSpan> to_spans(const Sentence& s);

// Exact span matching between aligned corpora. Throws EvalError naming the
// first sentence whose character sequences disagree.
SegScore score_f1(const Corpus& gold, const Corpus& pred);

// OOV = gold test token whose surface never appears as a training word.
OOVReport oov_report(const Corpus& train, const Corpus& gold, const Corpus& pred);

// One key=value per line, 4 decimal places.
std::string format_report(const SegScore& s);
std::string format_report(const OOVReport& r);

}  // namespace cws
