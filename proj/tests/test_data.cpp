#include <algorithm>
#include <set>
#include <string>

#include "cws/data.hpp"
#include "cws/rng.hpp"
#include "doctest.h"

using namespace cws;

TEST_CASE("utf-8 round trip") {
  std::string bytes = "歡迎 abc １５類。";
  std::u32string chars = decode_utf8(bytes);
  CHECK(encode_utf8(chars) == bytes);
  CHECK(chars.size() == 11);
  CHECK(chars[0] == U'歡');
  CHECK(chars[3] == U'a');
}

TEST_CASE("utf-8 decode reports the byte offset of bad input") {
  std::string bad = "ab";
  bad += char(0xFF);
  CHECK_THROWS_WITH_AS(decode_utf8(bad), doctest::Contains("byte offset 2"), DataError);

  std::string truncated = "歡";
  truncated.pop_back();  // cut a 3-byte sequence short
  CHECK_THROWS_AS(decode_utf8(truncated), DataError);

  // Overlong encoding of '/' must not pass.
  std::string overlong;
  overlong += char(0xC0);
  overlong += char(0xAF);
  CHECK_THROWS_AS(decode_utf8(overlong), DataError);

  // base_offset shifts the reported position.
  CHECK_THROWS_WITH_AS(decode_utf8(bad, 100), doctest::Contains("byte offset 102"), DataError);
}

TEST_CASE("halfwidth mapping covers the whole fullwidth block") {
  for (char32_t c = 0xFF01; c <= 0xFF5E; ++c) CHECK(halfwidth_of(c) == c - 0xFEE0);
  CHECK(halfwidth_of(U'　') == U' ');  // ideographic space
  CHECK(halfwidth_of(U'。') == U'。');
  CHECK(halfwidth_of(U'歡') == U'歡');
  CHECK(halfwidth_of(U'a') == U'a');
  CHECK(halfwidth_of(char32_t(0xFF00)) == char32_t(0xFF00));  // block starts at FF01
  CHECK(halfwidth_of(char32_t(0xFF5F)) == char32_t(0xFF5F));  // and ends at FF5E
}

TEST_CASE("normalize_halfwidth examples") {
  CHECK(normalize_halfwidth_utf8("１５類") == "15類");
  CHECK(normalize_halfwidth_utf8("ＡＢｃ，") == "ABc,");
  CHECK(normalize_halfwidth_utf8("歡迎。") == "歡迎。");
}

TEST_CASE("normalize_halfwidth preserves length and is idempotent") {
  Rng rng(4242);
  for (int trial = 0; trial < 200; ++trial) {
    std::u32string s;
    const int n = int(rng.below(40));
    for (int i = 0; i < n; ++i) {
      switch (rng.below(4)) {
        case 0: s.push_back(char32_t(0xFF01 + rng.below(0x5E))); break;
        case 1: s.push_back(char32_t(0x4E00 + rng.below(500))); break;
        case 2: s.push_back(char32_t(0x20 + rng.below(0x5F))); break;
        default: s.push_back(char32_t(0x3000 + rng.below(4))); break;
      }
    }
    std::u32string once = normalize_halfwidth(s);
    CHECK(once.size() == s.size());
    CHECK(normalize_halfwidth(once) == once);
  }
}

TEST_CASE("sentence lines split on spaces") {
  Sentence s = parse_sentence_line(U"歡迎 來 到");
  CHECK(s.chars == U"歡迎來到");
  REQUIRE(s.gold_words.size() == 3);
  CHECK(s.gold_words[0] == Span{0, 2});
  CHECK(s.gold_words[1] == Span{2, 3});
  CHECK(s.gold_words[2] == Span{3, 4});

  Sentence d = parse_sentence_line(U"a  b");
  REQUIRE(d.gold_words.size() == 2);
  CHECK(d.gold_words[0] == Span{0, 1});
  CHECK(d.gold_words[1] == Span{1, 2});

  Sentence one = parse_sentence_line(U"歡迎");
  CHECK(one.gold_words.size() == 1);
  CHECK(one.gold_words[0] == Span{0, 2});
}

TEST_CASE("corpus_from_text skips blank and space-only lines") {
  Corpus c = corpus_from_text("歡迎 來\n\n   \n到 台灣\n", "t", false);
  CHECK(c.size() == 2);
  CHECK(c.sentences[0].chars == U"歡迎來");
  CHECK(c.sentences[1].chars == U"到台灣");
  CHECK_FALSE(c.normalized);

  Corpus empty = corpus_from_text("", "t", true);
  CHECK(empty.size() == 0);
  CHECK(empty.normalized);
}

TEST_CASE("corpus normalization happens before word splitting") {
  // The fullwidth space U+3000 must act as a separator once normalized.
  Corpus c = corpus_from_text("歡迎　來", "t", true);
  REQUIRE(c.size() == 1);
  CHECK(c.sentences[0].chars == U"歡迎來");
  CHECK(c.sentences[0].gold_words.size() == 2);

  Corpus raw = corpus_from_text("歡迎　來", "t", false);
  REQUIRE(raw.size() == 1);
  CHECK(raw.sentences[0].chars == U"歡迎　來");  // untouched without the flag
  CHECK(raw.sentences[0].gold_words.size() == 1);
}

TEST_CASE("render and reload is the identity on normalized text") {
  const std::string text = "歡迎 來 到 台灣\n學生 在 學校\n";
  Corpus c = corpus_from_text(text, "t", true);
  CHECK(render_corpus(c) == text);
  Corpus again = corpus_from_text(render_corpus(c), "t", true);
  REQUIRE(again.size() == c.size());
  for (size_t i = 0; i < c.size(); ++i) {
    CHECK(again.sentences[i].chars == c.sentences[i].chars);
    CHECK(again.sentences[i].gold_words == c.sentences[i].gold_words);
  }
}

namespace {

Corpus numbered_corpus(int n) {
  std::string text;
  for (int i = 0; i < n; ++i) text += "s" + std::to_string(i) + "\n";
  return corpus_from_text(text, "t", false);
}

}  // namespace

TEST_CASE("split_train_valid sizes use the ceiling") {
  Corpus c = numbered_corpus(100);
  auto [train, valid] = split_train_valid(c, 0.05, 1);
  CHECK(train.size() == 95);
  CHECK(valid.size() == 5);

  auto [t2, v2] = split_train_valid(numbered_corpus(10), 0.01, 1);
  CHECK(v2.size() == 1);  // ceil(0.1)
  CHECK(t2.size() == 9);

  auto [t3, v3] = split_train_valid(numbered_corpus(1), 0.05, 1);
  CHECK(v3.size() == 1);
  CHECK(t3.size() == 0);
}

TEST_CASE("split_train_valid partitions deterministically") {
  Corpus c = numbered_corpus(40);
  auto [t1, v1] = split_train_valid(c, 0.25, 7);
  auto [t2, v2] = split_train_valid(c, 0.25, 7);
  auto [t3, v3] = split_train_valid(c, 0.25, 8);

  auto lines = [](const Corpus& k) {
    std::vector<std::u32string> out;
    for (const auto& s : k.sentences) out.push_back(s.chars);
    return out;
  };
  CHECK(lines(t1) == lines(t2));
  CHECK(lines(v1) == lines(v2));
  CHECK(lines(v1) != lines(v3));

  // Exact partition: every sentence appears once across the two sides.
  std::multiset<std::u32string> both;
  for (const auto& s : t1.sentences) both.insert(s.chars);
  for (const auto& s : v1.sentences) both.insert(s.chars);
  std::multiset<std::u32string> orig;
  for (const auto& s : c.sentences) orig.insert(s.chars);
  CHECK(both == orig);

  // Both sides keep the original relative order. Sentences are "s<N>", so
  // recovering N and checking monotonicity is enough.
  auto indices = [](const Corpus& k) {
    std::vector<int> out;
    for (const auto& s : k.sentences)
      out.push_back(std::stoi(encode_utf8(s.chars).substr(1)));
    return out;
  };
  const std::vector<int> ti = indices(t1), vi = indices(v1);
  CHECK(std::is_sorted(ti.begin(), ti.end()));
  CHECK(std::is_sorted(vi.begin(), vi.end()));
}

TEST_CASE("split_train_valid rejects bad fractions") {
  Corpus c = numbered_corpus(10);
  CHECK_THROWS_AS(split_train_valid(c, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split_train_valid(c, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(split_train_valid(c, -0.5, 1), ConfigError);
  CHECK_THROWS_AS(split_train_valid(Corpus{}, 0.5, 1), ConfigError);
}

TEST_CASE("vocab assigns frequency-descending ids after the reserved block") {
  Corpus c = corpus_from_text("a a b\n", "t", false);
  CharVocab v = build_vocab(c);
  CHECK(v.id_of(U'a') == 4);
  CHECK(v.id_of(U'b') == 5);
  CHECK(v.size() == 6);

  CharVocab thresh = build_vocab(c, 2);
  CHECK(thresh.id_of(U'a') == 4);
  CHECK(thresh.id_of(U'b') == CharVocab::kUnk);

  CharVocab tie = build_vocab(corpus_from_text("b a\n", "t", false));
  CHECK(tie.id_of(U'a') == 4);  // code-point tiebreak
  CHECK(tie.id_of(U'b') == 5);
}

TEST_CASE("vocab reserved ids and unknown lookups") {
  CharVocab v = build_vocab(corpus_from_text("歡 迎\n", "t", false));
  CHECK(CharVocab::kPad == 0);
  CHECK(CharVocab::kUnk == 1);
  CHECK(CharVocab::kBos == 2);
  CHECK(CharVocab::kEos == 3);
  CHECK(v.id_of(U'x') == CharVocab::kUnk);
  CHECK_FALSE(v.contains(U'x'));
  CHECK(v.contains(U'歡'));

  auto ids = v.encode(U"歡x迎");
  CHECK(ids.size() == 3);
  CHECK(ids[1] == CharVocab::kUnk);
  CHECK(v.char_of(ids[0]) == U'歡');
}

TEST_CASE("vocab entries round-trip through the serialized form") {
  CharVocab v = build_vocab(corpus_from_text("歡迎 來 到\n", "t", false));
  auto entries = v.entries_utf8();
  CHECK(entries.size() == size_t(v.size()));
  CHECK(entries[0] == "<pad>");
  CHECK(entries[1] == "<unk>");
  CHECK(entries[2] == "<bos>");
  CHECK(entries[3] == "<eos>");
  CharVocab back = CharVocab::from_entries_utf8(entries);
  CHECK(back.size() == v.size());
  for (char32_t c : std::u32string(U"歡迎來到")) CHECK(back.id_of(c) == v.id_of(c));
}

TEST_CASE("vocab ids are dense") {
  Corpus c = corpus_from_text("歡迎 來 到 台灣\n", "t", false);
  CharVocab v = build_vocab(c);
  std::set<char32_t> distinct(c.sentences[0].chars.begin(), c.sentences[0].chars.end());
  CHECK(v.size() == 4 + int(distinct.size()));
  for (int id = CharVocab::kNumReserved; id < v.size(); ++id)
    CHECK(v.id_of(v.char_of(id)) == id);
}
