#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cws/bilm.hpp"
#include "cws/data.hpp"
#include "cws/serialize.hpp"
#include "cws/sgns.hpp"
#include "cws/tagger.hpp"
#include "doctest.h"
#include "support/fd.hpp"
#include "support/synth.hpp"

using namespace cws;

namespace {

std::u32string chars_of(int n) {
  std::u32string s;
  for (int i = 0; i < n; ++i) s.push_back(char32_t(0x4E00 + i));
  return s;
}

// Word spans for a boundary bitmask: bit p set means a word ends after
// character p. The final word always closes at n.
std::vector<Span> spans_of_mask(int n, unsigned mask) {
  std::vector<Span> spans;
  int start = 0;
  for (int p = 0; p + 1 < n; ++p)
    if (mask >> p & 1u) {
      spans.push_back({start, p + 1});
      start = p + 1;
    }
  spans.push_back({start, n});
  return spans;
}

bool is_partition(const std::vector<Span>& spans, int n) {
  if (spans.empty()) return n == 0;
  if (spans.front().begin != 0 || spans.back().end != n) return false;
  for (size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].end <= spans[i].begin) return false;
    if (i > 0 && spans[i].begin != spans[i - 1].end) return false;
  }
  return true;
}

SkipGramModel random_static(const Corpus& corpus, int dim, uint64_t seed) {
  SkipGramModel sg(build_vocab(corpus), dim);
  Rng rng(seed);
  for (double& x : sg.center.v) x = rng.uniform(-0.5, 0.5);
  return sg;
}

BiLMModel small_bilm(uint64_t seed, int embed = 6, int hidden = 4) {
  Corpus c = corpus_from_text("歡迎 來 到\n台灣 大學\n", "t", false);
  BiLMConfig cfg;
  cfg.embed_dim = embed;
  cfg.hidden_dim = hidden;
  CharVocab vocab = build_vocab(c);
  cfg.vocab_size = vocab.size();
  Rng rng(seed);
  return make_bilm(cfg, std::move(vocab), rng);
}

bool same_params(SegmenterModel& a, SegmenterModel& b) {
  std::vector<Tensor*> pa = a.parameters(), pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (size_t i = 0; i < pa.size(); ++i)
    if (pa[i]->v != pb[i]->v) return false;
  return true;
}

void zero_output(SegmenterModel& m) {
  std::fill(m.out.w.v.begin(), m.out.w.v.end(), 0.0);
  std::fill(m.out.b.v.begin(), m.out.b.v.end(), 0.0);
}

}  // namespace

TEST_CASE("label encoding of a segmented sentence") {
  Sentence s = parse_sentence_line(U"歡迎 來 到 台灣 大學 電機系");
  REQUIRE(s.chars.size() == 11);
  std::vector<Label> labels = encode_labels(s);
  const std::vector<int> want = {0, 1, 1, 1, 0, 1, 0, 1, 0, 0, 1};
  REQUIRE(labels.size() == want.size());
  for (size_t i = 0; i < want.size(); ++i) CHECK(int(labels[i]) == want[i]);

  Sentence one = parse_sentence_line(U"來");
  std::vector<Label> single = encode_labels(one);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == Label::kSeparate);

  Sentence four;
  four.chars = chars_of(4);
  four.gold_words = {{0, 4}};
  std::vector<Label> quad = encode_labels(four);
  const std::vector<int> want4 = {0, 0, 0, 1};
  for (size_t i = 0; i < 4; ++i) CHECK(int(quad[i]) == want4[i]);
}

TEST_CASE("label decoding cuts words and force-closes the tail") {
  const std::u32string abc = U"歡迎來";
  std::vector<Span> w1 =
      decode_labels(abc, {Label::kContinue, Label::kSeparate, Label::kSeparate});
  CHECK(w1 == std::vector<Span>{{0, 2}, {2, 3}});

  std::vector<Span> open = decode_labels(U"大學", {Label::kContinue, Label::kContinue});
  CHECK(open == std::vector<Span>{{0, 2}});

  std::vector<Span> all = decode_labels(abc, std::vector<Label>(3, Label::kSeparate));
  CHECK(all == std::vector<Span>{{0, 1}, {1, 2}, {2, 3}});

  CHECK(decode_labels(U"", {}).empty());
}

TEST_CASE("encode/decode roundtrip over every segmentation up to length 12") {
  for (int n = 1; n <= 12; ++n) {
    const std::u32string chars = chars_of(n);
    const unsigned total = 1u << (n - 1);
    for (unsigned mask = 0; mask < total; ++mask) {
      Sentence s;
      s.chars = chars;
      s.gold_words = spans_of_mask(n, mask);
      std::vector<Label> labels = encode_labels(s);
      REQUIRE(labels.back() == Label::kSeparate);
      std::vector<Span> back = decode_labels(chars, labels);
      REQUIRE(back == s.gold_words);
    }
  }
}

TEST_CASE("decoding arbitrary labels always yields a partition") {
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + int(rng.below(20));
    std::vector<Label> labels(size_t(n), Label::kContinue);
    for (auto& l : labels)
      l = rng.uniform() < 0.5 ? Label::kContinue : Label::kSeparate;
    std::vector<Span> spans = decode_labels(chars_of(n), labels);
    REQUIRE(is_partition(spans, n));
  }
}

TEST_CASE("label codec rejects malformed input") {
  CHECK_THROWS_AS(decode_labels(U"ab", std::vector<Label>(3, Label::kSeparate)), ConfigError);

  Sentence bare;
  bare.chars = U"ab";
  CHECK_THROWS_AS(encode_labels(bare), ConfigError);

  Sentence bad;
  bad.chars = U"ab";
  bad.gold_words = {{0, 3}};
  CHECK_THROWS_AS(encode_labels(bad), ConfigError);
}

TEST_CASE("topology names roundtrip") {
  CHECK(topology_name(Topology::kParallel) == "parallel");
  CHECK(topology_name(Topology::kStacked) == "stacked");
  CHECK(topology_from_name("parallel") == Topology::kParallel);
  CHECK(topology_from_name("stacked") == Topology::kStacked);
  CHECK_THROWS_AS(topology_from_name("diagonal"), ConfigError);
}

TEST_CASE("config validation") {
  TaggerConfig ok;
  ok.input_dim = 4;
  ok.hidden_dim = 3;
  CHECK_NOTHROW(SegmenterModel{ok});

  TaggerConfig bad = ok;
  bad.hidden_dim = 0;
  CHECK_THROWS_AS(SegmenterModel{bad}, ConfigError);

  bad = ok;
  bad.input_dim = -1;
  CHECK_THROWS_AS(SegmenterModel{bad}, ConfigError);

  bad = ok;
  bad.num_bilstms = 2;
  CHECK_THROWS_AS(SegmenterModel{bad}, ConfigError);

  bad = ok;
  bad.dropout_rate = 1.0;
  CHECK_THROWS_AS(SegmenterModel{bad}, ConfigError);

  bad = ok;
  bad.embedding_source = "fasttext";
  CHECK_THROWS_AS(SegmenterModel{bad}, ConfigError);
}

TEST_CASE("logit pass shape, determinism, and input checks") {
  TaggerConfig cfg;
  cfg.input_dim = 4;
  cfg.hidden_dim = 3;
  cfg.dropout_rate = 0.33;
  Rng rng(8);
  SegmenterModel m = make_segmenter(cfg, rng);

  std::vector<Vec> inputs(5, Vec(4));
  for (Vec& v : inputs)
    for (double& x : v) x = rng.uniform(-1.0, 1.0);

  std::vector<Vec> a = tagger_logits(m, inputs, false, 1);
  REQUIRE(a.size() == 5);
  for (const Vec& l : a) REQUIRE(l.size() == 2);

  SUBCASE("inference ignores the dropout seed") {
    std::vector<Vec> b = tagger_logits(m, inputs, false, 999);
    CHECK(a == b);
  }

  SUBCASE("training is reproducible per seed and varies across seeds") {
    std::vector<Vec> t1 = tagger_logits(m, inputs, true, 42);
    std::vector<Vec> t2 = tagger_logits(m, inputs, true, 42);
    CHECK(t1 == t2);
    std::vector<Vec> t3 = tagger_logits(m, inputs, true, 43);
    CHECK(t1 != t3);
  }

  SUBCASE("zero output projection gives zero logits") {
    zero_output(m);
    for (const Vec& l : tagger_logits(m, inputs, false, 0)) {
      CHECK(l[0] == 0.0);
      CHECK(l[1] == 0.0);
    }
  }

  SUBCASE("wrong input width is rejected") {
    std::vector<Vec> narrow(2, Vec(3, 0.0));
    CHECK_THROWS_AS(tagger_logits(m, narrow, false, 0), ConfigError);
  }
}

TEST_CASE("ties at the decision boundary break toward SEPARATE") {
  Corpus c = corpus_from_text("歡 迎 來\n", "t", false);
  SkipGramModel sg(build_vocab(c), 4);
  EmbeddingProvider p;
  p.sgns = &sg;
  p.fingerprint = "f";

  TaggerConfig cfg;
  cfg.input_dim = 4;
  cfg.hidden_dim = 2;
  cfg.embedding_source = "static";
  Rng rng(3);
  SegmenterModel m = make_segmenter(cfg, rng);
  zero_output(m);

  std::vector<Label> labels = tag_chars(m, p, U"歡迎來");
  REQUIRE(labels.size() == 3);
  for (Label l : labels) CHECK(l == Label::kSeparate);

  std::vector<std::u32string> words = segment(m, p, U"歡迎 來");
  CHECK(words == std::vector<std::u32string>{U"歡", U"迎", U"來"});
}

TEST_CASE("provider validation") {
  EmbeddingProvider empty;
  CHECK_THROWS_AS(empty.dim(), ConfigError);
  CHECK_THROWS_AS(empty.source(), ConfigError);

  Corpus c = corpus_from_text("歡 迎\n", "t", false);
  SkipGramModel sg(build_vocab(c), 4);
  BiLMModel lm = small_bilm(1);
  EmbeddingProvider both;
  both.sgns = &sg;
  both.bilm = &lm;
  CHECK_THROWS_AS(both.dim(), ConfigError);

  EmbeddingProvider st;
  st.sgns = &sg;
  CHECK(st.dim() == 4);
  CHECK(st.source() == "static");

  EmbeddingProvider el;
  el.bilm = &lm;
  CHECK(el.dim() == lm.cfg.exposed_dim());
  CHECK(el.source() == "elmo");
}

TEST_CASE("sentence loss matches finite differences") {
  BiLMModel lm = small_bilm(17);
  EmbeddingProvider p;
  p.bilm = &lm;
  p.fingerprint = "f";
  const std::u32string text = U"歡迎來到台";
  ProviderStates st = provider_states(p, p.encode(text));
  std::vector<Label> labels = {Label::kContinue, Label::kSeparate, Label::kSeparate,
                               Label::kContinue, Label::kSeparate};

  auto run = [&](Topology topo, double rate, bool training, uint64_t fd_seed) {
    TaggerConfig cfg;
    cfg.input_dim = lm.cfg.exposed_dim();
    cfg.hidden_dim = 4;
    cfg.topology = topo;
    cfg.dropout_rate = rate;
    Rng rng(fd_seed);
    SegmenterModel m = make_segmenter(cfg, rng);
    m.mixer.w.v = {0.3, -0.2, 0.1};
    m.mixer.gamma.v[0] = 1.2;

    std::vector<Tensor*> params = m.parameters();
    zero_grads(params);
    const uint64_t drop_seed = 1234;
    double l1 = sentence_loss(m, st, labels, training, drop_seed, true);
    double l2 = sentence_loss(m, st, labels, training, drop_seed, false);
    CHECK(l1 > 0.0);
    CHECK(l1 == l2);  // masks are a pure function of the seed

    fd::CheckResult r = fd::check_params(
        params, [&] { return sentence_loss(m, st, labels, training, drop_seed, false); });
    INFO(r.worst);
    CHECK(r.checked > 1000);
    CHECK(r.max_rel_err < 1e-3);
  };

  SUBCASE("parallel with dropout") { run(Topology::kParallel, 0.33, true, 21); }
  SUBCASE("stacked with dropout") { run(Topology::kStacked, 0.25, true, 22); }
  SUBCASE("parallel at inference") { run(Topology::kParallel, 0.0, false, 23); }
}

TEST_CASE("static source leaves the mixer untouched") {
  Corpus c = corpus_from_text("歡迎 來 到\n台灣 大學\n", "t", false);
  SkipGramModel sg = random_static(c, 6, 9);
  EmbeddingProvider p;
  p.sgns = &sg;
  p.fingerprint = "f";
  const std::u32string text = U"歡迎來";
  ProviderStates st = provider_states(p, p.encode(text));
  std::vector<Label> labels = {Label::kContinue, Label::kSeparate, Label::kSeparate};

  TaggerConfig cfg;
  cfg.input_dim = 6;
  cfg.hidden_dim = 3;
  cfg.embedding_source = "static";
  Rng rng(31);
  SegmenterModel m = make_segmenter(cfg, rng);
  std::vector<Tensor*> params = m.parameters();
  zero_grads(params);
  sentence_loss(m, st, labels, false, 0, true);

  for (double g : m.mixer.w.g) CHECK(g == 0.0);
  CHECK(m.mixer.gamma.g[0] == 0.0);

  fd::CheckResult r = fd::check_params(
      params, [&] { return sentence_loss(m, st, labels, false, 0, false); });
  INFO(r.worst);
  CHECK(r.max_rel_err < 1e-3);

  std::vector<Label> wrong(2, Label::kSeparate);
  CHECK_THROWS_AS(sentence_loss(m, st, wrong, false, 0, false), ConfigError);
}

TEST_CASE("zero training epochs return the freshly initialized model") {
  Corpus c = corpus_from_text("歡迎 來\n來 到\n歡迎 到\n", "t", false);
  SkipGramModel sg = random_static(c, 6, 12);
  EmbeddingProvider p;
  p.sgns = &sg;
  p.fingerprint = "prov";

  TaggerConfig cfg;
  cfg.hidden_dim = 5;
  cfg.dropout_rate = 0.2;
  TaggerTrainStats stats;
  SegmenterModel m = train_tagger(c, c, p, cfg, 0, 42, &stats);

  CHECK(stats.best_epoch == -1);
  CHECK(stats.best_f1 == 0.0);
  CHECK(stats.epoch_valid_f1.empty());
  CHECK(m.provider_fingerprint == "prov");
  CHECK(m.cfg.input_dim == 6);
  CHECK(m.cfg.embedding_source == "static");

  TaggerConfig ref_cfg = cfg;
  ref_cfg.input_dim = 6;
  ref_cfg.embedding_source = "static";
  Rng rng(42);
  SegmenterModel ref = make_segmenter(ref_cfg, rng);
  CHECK(same_params(m, ref));
}

TEST_CASE("training is reproducible per seed") {
  Corpus c = corpus_from_text("歡迎 來\n來 到\n歡迎 到\n台灣 大學\n", "t", false);
  SkipGramModel sg = random_static(c, 8, 2);
  EmbeddingProvider p;
  p.sgns = &sg;
  p.fingerprint = "prov";

  TaggerConfig cfg;
  cfg.hidden_dim = 6;
  cfg.dropout_rate = 0.1;

  TaggerTrainStats s1, s2, s3;
  SegmenterModel a = train_tagger(c, c, p, cfg, 5, 99, &s1);
  SegmenterModel b = train_tagger(c, c, p, cfg, 5, 99, &s2);
  CHECK(same_params(a, b));
  CHECK(s1.best_epoch == s2.best_epoch);
  CHECK(s1.epoch_valid_f1 == s2.epoch_valid_f1);

  SegmenterModel d = train_tagger(c, c, p, cfg, 5, 100, &s3);
  CHECK_FALSE(same_params(a, d));
}

TEST_CASE("training input checks") {
  Corpus c = corpus_from_text("歡迎 來\n", "t", false);
  SkipGramModel sg = random_static(c, 4, 1);
  EmbeddingProvider p;
  p.sgns = &sg;

  TaggerConfig cfg;
  cfg.hidden_dim = 2;
  CHECK_THROWS_AS(train_tagger(Corpus{}, c, p, cfg, 1, 1), ConfigError);

  TaggerConfig off = cfg;
  off.input_dim = 5;
  CHECK_THROWS_AS(train_tagger(c, c, p, off, 1, 1), ConfigError);

  Corpus bare;
  bare.sentences.push_back({U"歡迎", {}});
  CHECK_THROWS_AS(train_tagger(c, bare, p, cfg, 1, 1), ConfigError);
}

TEST_CASE("a small corpus is learned to F1 = 1") {
  Corpus toy = load_corpus(TOY_CORPUS, true);
  REQUIRE(toy.size() >= 8);
  Corpus sub;
  sub.sentences.assign(toy.sentences.begin(), toy.sentences.begin() + 8);

  SkipGramModel sg = train_skipgram(sub, build_vocab(sub), 32, 2, 5, 5, 5);
  EmbeddingProvider p;
  p.sgns = &sg;
  p.fingerprint = "toy";

  TaggerConfig cfg;
  cfg.hidden_dim = 32;
  cfg.dropout_rate = 0.1;
  TaggerTrainStats stats;
  SegmenterModel m = train_tagger(sub, sub, p, cfg, 300, 7, &stats);
  CHECK(stats.best_f1 == 1.0);

  for (const Sentence& s : sub.sentences) {
    std::u32string raw;
    std::vector<std::u32string> want;
    for (const Span& w : s.gold_words) {
      std::u32string word = s.chars.substr(size_t(w.begin), size_t(w.end - w.begin));
      if (!raw.empty()) raw.push_back(U' ');
      raw += word;
      want.push_back(std::move(word));
    }
    CHECK(segment(m, p, raw) == want);
  }
}

TEST_CASE("segmenting strips separators and preserves every other character") {
  Corpus c = corpus_from_text("歡迎 來 到\n", "t", false);
  SkipGramModel sg = random_static(c, 6, 77);
  EmbeddingProvider p;
  p.sgns = &sg;

  TaggerConfig cfg;
  cfg.input_dim = 6;
  cfg.hidden_dim = 3;
  cfg.embedding_source = "static";
  Rng rng(5);
  SegmenterModel m = make_segmenter(cfg, rng);

  SUBCASE("empty and separator-only input give no words") {
    CHECK(segment(m, p, U"").empty());
    CHECK(segment(m, p, U" \t 　").empty());
  }

  SUBCASE("words concatenate to the normalized input") {
    const std::u32string raw = U"　１５類 ＡＢ\tｃ歡迎";
    std::vector<std::u32string> words = segment(m, p, raw);
    std::u32string joined;
    for (const std::u32string& w : words) {
      CHECK_FALSE(w.empty());
      joined += w;
    }
    CHECK(joined == U"15類ABc歡迎");
  }
}

TEST_CASE("tagging rejects a mismatched provider") {
  Corpus c = corpus_from_text("歡迎 來\n", "t", false);
  SkipGramModel sg = random_static(c, 4, 1);
  EmbeddingProvider st;
  st.sgns = &sg;

  TaggerConfig cfg;
  cfg.input_dim = 8;
  cfg.hidden_dim = 2;
  cfg.embedding_source = "elmo";
  Rng rng(6);
  SegmenterModel elmo_model = make_segmenter(cfg, rng);
  CHECK_THROWS_AS(tag_chars(elmo_model, st, U"歡迎"), ConfigError);

  TaggerConfig narrow = cfg;
  narrow.input_dim = 6;
  narrow.embedding_source = "static";
  SegmenterModel narrow_model = make_segmenter(narrow, rng);
  CHECK_THROWS_AS(tag_chars(narrow_model, st, U"歡迎"), ConfigError);

  CHECK(tag_chars(narrow_model, st, U"").empty());
}

TEST_CASE("corpus segmentation keeps shape and produces partitions") {
  Corpus c = corpus_from_text("歡迎 來 到\n台灣 大學\n歡迎\n", "in", true);
  SkipGramModel sg = random_static(c, 6, 13);
  EmbeddingProvider p;
  p.sgns = &sg;

  TaggerConfig cfg;
  cfg.input_dim = 6;
  cfg.hidden_dim = 3;
  cfg.embedding_source = "static";
  Rng rng(14);
  SegmenterModel m = make_segmenter(cfg, rng);

  Corpus out = segment_corpus(m, p, c);
  REQUIRE(out.size() == c.size());
  CHECK(out.source == c.source);
  CHECK(out.normalized == c.normalized);
  for (size_t i = 0; i < out.size(); ++i) {
    CHECK(out.sentences[i].chars == c.sentences[i].chars);
    CHECK(is_partition(out.sentences[i].gold_words, int(c.sentences[i].chars.size())));
  }
}

TEST_CASE("model files roundtrip") {
  TaggerConfig cfg;
  cfg.input_dim = 8;
  cfg.hidden_dim = 4;
  cfg.dropout_rate = 0.33;
  cfg.embedding_source = "elmo";
  Rng rng(44);
  SegmenterModel m = make_segmenter(cfg, rng);
  m.mixer.w.v = {0.2, -0.3, 0.5};
  m.mixer.gamma.v[0] = 1.7;
  m.provider_fingerprint = "abcd1234abcd1234";

  ModelFile mf = pack_tagger(m);
  CHECK(mf.component == "tagger");
  CHECK(mf.meta_value("topology") == "parallel");
  CHECK(mf.meta_value("embedding_source") == "elmo");

  SegmenterModel back = unpack_tagger(mf);
  CHECK(back.cfg.input_dim == cfg.input_dim);
  CHECK(back.cfg.hidden_dim == cfg.hidden_dim);
  CHECK(back.cfg.topology == cfg.topology);
  CHECK(back.cfg.dropout_rate == cfg.dropout_rate);
  CHECK(back.cfg.embedding_source == "elmo");
  CHECK(back.provider_fingerprint == "abcd1234abcd1234");
  CHECK(back.mixer.w.v == m.mixer.w.v);
  CHECK(back.mixer.gamma.v == m.mixer.gamma.v);
  CHECK(same_params(m, back));

  SUBCASE("files are byte-stable across load/save cycles") {
    const std::string p1 = synth::temp_path("tagger_a.cwsm");
    const std::string p2 = synth::temp_path("tagger_b.cwsm");
    save_model(p1, mf);
    SegmenterModel loaded = unpack_tagger(load_model(p1));
    save_model(p2, pack_tagger(loaded));
    CHECK(synth::read_text(p1) == synth::read_text(p2));
  }

  SUBCASE("stacked topology survives the roundtrip") {
    TaggerConfig st = cfg;
    st.topology = Topology::kStacked;
    st.embedding_source = "static";
    Rng r2(45);
    SegmenterModel sm = make_segmenter(st, r2);
    SegmenterModel sback = unpack_tagger(pack_tagger(sm));
    CHECK(sback.cfg.topology == Topology::kStacked);
    CHECK(sback.cfg.embedding_source == "static");
    CHECK(same_params(sm, sback));
  }

  SUBCASE("foreign components are rejected") {
    Corpus c = corpus_from_text("歡 迎\n", "t", false);
    SkipGramModel sg(build_vocab(c), 4);
    CHECK_THROWS_AS(unpack_tagger(pack_sgns(sg)), ModelError);
  }
}
