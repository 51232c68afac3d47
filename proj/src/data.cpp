#include "cws/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cws {

std::u32string decode_utf8(std::string_view bytes, size_t base_offset) {
  std::u32string out;
  out.reserve(bytes.size());
  size_t i = 0;
  auto fail = [&](size_t at) {
    throw DataError("invalid UTF-8 at byte offset " + std::to_string(base_offset + at));
  };
  while (i < bytes.size()) {
    const unsigned char b0 = (unsigned char)bytes[i];
    uint32_t cp = 0;
    size_t len = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      fail(i);
    }
    if (i + len > bytes.size()) fail(i);
    for (size_t k = 1; k < len; ++k) {
      const unsigned char bk = (unsigned char)bytes[i + k];
      if ((bk & 0xC0) != 0x80) fail(i);
      cp = (cp << 6) | (bk & 0x3F);
    }
    // Overlong encodings, surrogates, and out-of-range values are invalid.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF)
      fail(i);
    out.push_back(char32_t(cp));
    i += len;
  }
  return out;
}

std::string encode_utf8(std::u32string_view chars) {
  std::string out;
  out.reserve(chars.size() * 3);
  for (char32_t c : chars) {
    const uint32_t cp = uint32_t(c);
    if (cp < 0x80) {
      out.push_back(char(cp));
    } else if (cp < 0x800) {
      out.push_back(char(0xC0 | (cp >> 6)));
      out.push_back(char(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(char(0xE0 | (cp >> 12)));
      out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(char(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(char(0xF0 | (cp >> 18)));
      out.push_back(char(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(char(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

char32_t halfwidth_of(char32_t c) {
  if (c >= 0xFF01 && c <= 0xFF5E) return c - 0xFEE0;
  if (c == 0x3000) return 0x0020;
  return c;
}

std::u32string normalize_halfwidth(std::u32string_view text) {
  std::u32string out(text);
  for (char32_t& c : out) c = halfwidth_of(c);
  return out;
}

std::string normalize_halfwidth_utf8(std::string_view text) {
  return encode_utf8(normalize_halfwidth(decode_utf8(text)));
}

Sentence parse_sentence_line(const std::u32string& line) {
  Sentence s;
  int word_len = 0;
  for (char32_t c : line) {
    if (c == U' ') {
      if (word_len > 0) {
        const int end = int(s.chars.size());
        s.gold_words.push_back({end - word_len, end});
        word_len = 0;
      }
    } else {
      s.chars.push_back(c);
      ++word_len;
    }
  }
  if (word_len > 0) {
    const int end = int(s.chars.size());
    s.gold_words.push_back({end - word_len, end});
  }
  return s;
}

Corpus corpus_from_text(std::string_view text, std::string source, bool normalize) {
  Corpus corpus;
  corpus.source = std::move(source);
  corpus.normalized = normalize;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (!raw.empty()) {
      std::u32string line = decode_utf8(raw, pos);
      if (normalize) line = normalize_halfwidth(line);
      Sentence s = parse_sentence_line(line);
      if (!s.chars.empty()) corpus.sentences.push_back(std::move(s));
    }
    if (nl == text.size()) break;
    pos = nl + 1;
  }
  return corpus;
}

Corpus load_corpus(const std::string& path, bool normalize) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return corpus_from_text(buf.str(), path, normalize);
}

std::string render_corpus(const Corpus& corpus) {
  std::string out;
  for (const Sentence& s : corpus.sentences) {
    for (size_t w = 0; w < s.gold_words.size(); ++w) {
      if (w > 0) out.push_back(' ');
      const Span& sp = s.gold_words[w];
      out += encode_utf8(std::u32string_view(s.chars).substr(size_t(sp.begin),
                                                             size_t(sp.end - sp.begin)));
    }
    out.push_back('\n');
  }
  return out;
}

std::pair<Corpus, Corpus> split_train_valid(const Corpus& corpus, double fraction,
                                            uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ConfigError("split_train_valid: fraction must be in (0, 1)");
  if (corpus.sentences.empty()) throw ConfigError("split_train_valid: empty corpus");

  const size_t n = corpus.sentences.size();
  const size_t n_valid = size_t(std::ceil(fraction * double(n)));
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);

  std::vector<bool> is_valid(n, false);
  for (size_t i = 0; i < n_valid; ++i) is_valid[order[i]] = true;

  Corpus train, valid;
  train.source = corpus.source;
  valid.source = corpus.source;
  train.normalized = valid.normalized = corpus.normalized;
  for (size_t i = 0; i < n; ++i)
    (is_valid[i] ? valid : train).sentences.push_back(corpus.sentences[i]);
  if (train.sentences.empty())
    std::fprintf(stderr, "warning: validation split consumed all %zu sentence(s)\n", n);
  return {std::move(train), std::move(valid)};
}

CharVocab::CharVocab() : chars_(kNumReserved, U'\0') {}

int CharVocab::add(char32_t c) {
  auto it = ids_.find(c);
  if (it != ids_.end()) return it->second;
  const int id = int(chars_.size());
  chars_.push_back(c);
  ids_.emplace(c, id);
  return id;
}

int CharVocab::id_of(char32_t c) const {
  auto it = ids_.find(c);
  return it == ids_.end() ? kUnk : it->second;
}

bool CharVocab::contains(char32_t c) const { return ids_.count(c) > 0; }

char32_t CharVocab::char_of(int id) const {
  if (id < kNumReserved || id >= size())
    throw std::out_of_range("CharVocab::char_of: id " + std::to_string(id));
  return chars_[size_t(id)];
}

std::vector<int> CharVocab::encode(std::u32string_view chars) const {
  std::vector<int> ids;
  ids.reserve(chars.size());
  for (char32_t c : chars) ids.push_back(id_of(c));
  return ids;
}

namespace {
const char* const kReservedNames[] = {"<pad>", "<unk>", "<bos>", "<eos>"};
}

std::vector<std::string> CharVocab::entries_utf8() const {
  std::vector<std::string> entries;
  entries.reserve(size_t(size()));
  for (int id = 0; id < kNumReserved; ++id) entries.emplace_back(kReservedNames[id]);
  for (int id = kNumReserved; id < size(); ++id)
    entries.push_back(encode_utf8(std::u32string(1, chars_[size_t(id)])));
  return entries;
}

CharVocab CharVocab::from_entries_utf8(const std::vector<std::string>& entries) {
  if (entries.size() < kNumReserved)
    throw ModelError("vocabulary section shorter than the reserved ids");
  for (int id = 0; id < kNumReserved; ++id)
    if (entries[size_t(id)] != kReservedNames[id])
      throw ModelError("vocabulary reserved entry mismatch at id " + std::to_string(id));
  CharVocab vocab;
  for (size_t id = kNumReserved; id < entries.size(); ++id) {
    const std::u32string c = decode_utf8(entries[id]);
    if (c.size() != 1) throw ModelError("vocabulary entry is not a single character");
    vocab.add(c[0]);
  }
  return vocab;
}

CharVocab build_vocab(const Corpus& train, int min_count) {
  if (train.sentences.empty()) throw ConfigError("build_vocab: empty corpus");
  std::unordered_map<char32_t, int64_t> counts;
  for (const Sentence& s : train.sentences)
    for (char32_t c : s.chars) ++counts[c];

  std::vector<std::pair<char32_t, int64_t>> kept;
  kept.reserve(counts.size());
  for (const auto& [c, n] : counts)
    if (n >= min_count) kept.emplace_back(c, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  CharVocab vocab;
  for (const auto& [c, n] : kept) vocab.add(c);
  return vocab;
}

}  // namespace cws
