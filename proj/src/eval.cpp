#include "cws/eval.hpp"

#include <cstdio>
#include <unordered_set>

#include "cws/errors.hpp"

namespace cws {

namespace {

double ratio(int64_t num, int64_t den) { return den > 0 ? double(num) / double(den) : 0.0; }

void check_aligned(const Corpus& a, const Corpus& b, const char* what) {
  if (a.size() != b.size())
    throw EvalError(std::string(what) + ": corpora have different sentence counts (" +
                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  for (size_t i = 0; i < a.size(); ++i)
    if (a.sentences[i].chars != b.sentences[i].chars)
      throw EvalError(std::string(what) + ": character mismatch at sentence " +
                      std::to_string(i));
}

// Count of offset-identical spans between two sorted partitions.
int64_t count_matches(const std::vector<Span>& g, const std::vector<Span>& p) {
  int64_t n = 0;
  size_t i = 0, j = 0;
  while (i < g.size() && j < p.size()) {
    if (g[i].begin == p[j].begin && g[i].end == p[j].end) {
      ++n;
      ++i;
      ++j;
    } else if (g[i].begin < p[j].begin) {
      ++i;
    } else if (p[j].begin < g[i].begin) {
      ++j;
    } else {
      // same start, different end: skip whichever closes first
      if (g[i].end < p[j].end) ++i; else ++j;
    }
  }
  return n;
}

bool contains_ascii_digit(const std::u32string& w) {
  for (char32_t c : w) {
    char32_t n = halfwidth_of(c);
    if (n >= U'0' && n <= U'9') return true;
  }
  return false;
}

}  // namespace

std::vector<WordSpan> to_spans(const std::u32string& chars, const std::vector<Span>& words) {
  if (words.empty() && !chars.empty())
    throw EvalError("to_spans: empty segmentation of a non-empty sentence");
  std::vector<WordSpan> spans;
  spans.reserve(words.size());
  int expected = 0;
  for (const Span& w : words) {
    if (w.begin != expected || w.end <= w.begin || w.end > int(chars.size()))
      throw EvalError("to_spans: words do not partition the sentence");
    spans.push_back({w.begin, w.end, chars.substr(size_t(w.begin), size_t(w.end - w.begin))});
    expected = w.end;
  }
  if (expected != int(chars.size()))
    throw EvalError("to_spans: words do not cover the sentence");
  return spans;
}

std::vector<WordSpan> to_spans(const Sentence& s) { return to_spans(s.chars, s.gold_words); }

SegScore score_f1(const Corpus& gold, const Corpus& pred) {
  check_aligned(gold, pred, "score_f1");
  SegScore sc;
  for (size_t i = 0; i < gold.size(); ++i) {
    const Sentence& g = gold.sentences[i];
    const Sentence& p = pred.sentences[i];
    if (!g.has_gold() || !p.has_gold())
      throw EvalError("score_f1: sentence " + std::to_string(i) + " has no segmentation");
    sc.gold_words += int64_t(g.gold_words.size());
    sc.predicted_words += int64_t(p.gold_words.size());
    sc.correct_words += count_matches(g.gold_words, p.gold_words);
  }
  sc.precision = ratio(sc.correct_words, sc.predicted_words);
  sc.recall = ratio(sc.correct_words, sc.gold_words);
  sc.f1 = (sc.precision + sc.recall) > 0.0
              ? 2.0 * sc.precision * sc.recall / (sc.precision + sc.recall)
              : 0.0;
  return sc;
}

OOVReport oov_report(const Corpus& train, const Corpus& gold, const Corpus& pred) {
  check_aligned(gold, pred, "oov_report");
  std::unordered_set<std::u32string> train_words;
  for (const Sentence& s : train.sentences) {
    if (!s.has_gold()) throw EvalError("oov_report: training corpus has no segmentation");
    for (const WordSpan& w : to_spans(s)) train_words.insert(w.surface);
  }

  OOVReport r;
  std::unordered_set<std::u32string> oov_surfaces;
  for (size_t i = 0; i < gold.size(); ++i) {
    const Sentence& g = gold.sentences[i];
    const Sentence& p = pred.sentences[i];
    if (!g.has_gold() || !p.has_gold())
      throw EvalError("oov_report: sentence " + std::to_string(i) + " has no segmentation");
    std::unordered_set<int64_t> pred_offsets;
    for (const Span& w : p.gold_words)
      pred_offsets.insert(int64_t(w.begin) << 32 | int64_t(w.end));
    for (const WordSpan& w : to_spans(g)) {
      ++r.gold_tokens;
      if (train_words.count(w.surface)) continue;
      ++r.oov_tokens;
      oov_surfaces.insert(w.surface);
      if (pred_offsets.count(int64_t(w.begin) << 32 | int64_t(w.end))) ++r.oov_recovered;
    }
  }

  r.oov_types = int64_t(oov_surfaces.size());
  int64_t digits = 0, longs = 0;
  for (const std::u32string& w : oov_surfaces) {
    if (contains_ascii_digit(w)) ++digits;
    if (w.size() >= 5) ++longs;
  }
  r.oov_rate = ratio(r.oov_tokens, r.gold_tokens);
  r.oov_recall = ratio(r.oov_recovered, r.oov_tokens);
  r.digit_ratio = ratio(digits, r.oov_types);
  r.long_ratio = ratio(longs, r.oov_types);
  return r;
}

std::string format_report(const SegScore& s) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "precision=%.4f\nrecall=%.4f\nf1=%.4f\n", s.precision,
                s.recall, s.f1);
  return buf;
}

std::string format_report(const OOVReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "oov_rate=%.4f\noov_recall=%.4f\noov_digit_ratio=%.4f\noov_long_ratio=%.4f\n",
                r.oov_rate, r.oov_recall, r.digit_ratio, r.long_ratio);
  return buf;
}

}  // namespace cws
