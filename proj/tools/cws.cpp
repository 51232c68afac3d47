#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cws/bilm.hpp"
#include "cws/data.hpp"
#include "cws/errors.hpp"
#include "cws/eval.hpp"
#include "cws/serialize.hpp"
#include "cws/sgns.hpp"
#include "cws/tagger.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cws::DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw cws::DataError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw cws::DataError("write failed: " + path);
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = nl + 1;
  }
  return lines;
}

// Loads whichever embedding model a path holds and keeps it alive.
struct ProviderHolder {
  std::optional<cws::BiLMModel> bilm;
  std::optional<cws::SkipGramModel> sgns;
  cws::EmbeddingProvider provider;

  void load(const std::string& path, bool want_lm) {
    std::string fp;
    cws::ModelFile mf = cws::load_model(path, &fp);
    if (want_lm)
      bilm.emplace(cws::unpack_bilm(mf));
    else
      sgns.emplace(cws::unpack_sgns(mf));
    provider.bilm = bilm ? &*bilm : nullptr;
    provider.sgns = sgns ? &*sgns : nullptr;
    provider.fingerprint = fp;
  }
};

void run_normalize(const std::string& in, const std::string& out) {
  write_file(out, cws::normalize_halfwidth_utf8(read_file(in)));
}

struct TrainLmArgs {
  std::string corpus, out;
  int epochs = 10, embed_dim = 64, hidden_dim = 64, min_count = 1;
  uint64_t seed = 42;
};

void run_train_lm(const TrainLmArgs& a) {
  cws::Corpus corpus = cws::load_corpus(a.corpus, true);
  cws::BiLMConfig cfg;
  cfg.embed_dim = a.embed_dim;
  cfg.hidden_dim = a.hidden_dim;
  cws::BiLMModel model =
      cws::train_bilm(corpus, cfg, a.epochs, a.seed, nullptr, true, a.min_count);
  cws::save_model(a.out, cws::pack_bilm(model));
  std::fprintf(stderr, "wrote %s\n", a.out.c_str());
}

struct TrainEmbedArgs {
  std::string corpus, out;
  int dim = 64, window = 2, negatives = 5, epochs = 5, min_count = 1;
  uint64_t seed = 42;
};

void run_train_embed(const TrainEmbedArgs& a) {
  cws::Corpus corpus = cws::load_corpus(a.corpus, true);
  cws::CharVocab vocab = cws::build_vocab(corpus, a.min_count);
  cws::SkipGramModel model = cws::train_skipgram(corpus, std::move(vocab), a.dim, a.window,
                                                 a.negatives, a.epochs, a.seed, 0.025, true);
  cws::save_model(a.out, cws::pack_sgns(model));
  std::fprintf(stderr, "wrote %s\n", a.out.c_str());
}

struct TrainSegArgs {
  std::string corpus, lm, embed, out, topology = "parallel";
  int epochs = 30, hidden_dim = 300;
  double dropout = 0.33, valid_frac = 0.05;
  uint64_t seed = 42;
};

void run_train_seg(const TrainSegArgs& a) {
  cws::Corpus corpus = cws::load_corpus(a.corpus, true);
  ProviderHolder holder;
  holder.load(a.lm.empty() ? a.embed : a.lm, !a.lm.empty());
  auto [train, valid] = cws::split_train_valid(corpus, a.valid_frac, a.seed);
  cws::TaggerConfig cfg;
  cfg.hidden_dim = a.hidden_dim;
  cfg.dropout_rate = a.dropout;
  cfg.topology = cws::topology_from_name(a.topology);
  cws::TaggerTrainStats stats;
  cws::SegmenterModel model =
      cws::train_tagger(train, valid, holder.provider, cfg, a.epochs, a.seed, &stats, true);
  cws::save_model(a.out, cws::pack_tagger(model));
  if (stats.best_epoch >= 0)
    std::fprintf(stderr, "best epoch %d  valid f1 %.4f\n", stats.best_epoch + 1,
                 stats.best_f1);
  std::fprintf(stderr, "wrote %s\n", a.out.c_str());
}

struct SegmentArgs {
  std::string model, lm, embed, in, out;
};

void run_segment(const SegmentArgs& a) {
  cws::SegmenterModel model = cws::unpack_tagger(cws::load_model(a.model));
  ProviderHolder holder;
  holder.load(a.lm.empty() ? a.embed : a.lm, !a.lm.empty());
  if (model.provider_fingerprint != holder.provider.fingerprint)
    throw cws::ModelError("embedding model does not match the one this segmenter was "
                          "trained with (fingerprint " +
                          holder.provider.fingerprint + ", model expects " +
                          model.provider_fingerprint + ")");

  std::vector<std::string> lines = split_lines(read_file(a.in));
  std::vector<std::string> out_lines(lines.size());
  std::string first_error;
  int64_t first_error_line = -1;

  const int64_t n = int64_t(lines.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int64_t i = 0; i < n; ++i) {
    try {
      std::u32string u32 = cws::decode_utf8(lines[size_t(i)]);
      std::string joined;
      bool first = true;
      for (const std::u32string& w : cws::segment(model, holder.provider, u32)) {
        if (!first) joined.push_back(' ');
        joined += cws::encode_utf8(w);
        first = false;
      }
      out_lines[size_t(i)] = std::move(joined);
    } catch (const std::exception& e) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (first_error_line < 0 || i < first_error_line) {
        first_error_line = i;
        first_error = e.what();
      }
    }
  }
  if (first_error_line >= 0)
    throw cws::DataError("line " + std::to_string(first_error_line + 1) + ": " + first_error);

  std::string text;
  for (const std::string& line : out_lines) {
    text += line;
    text.push_back('\n');
  }
  write_file(a.out, text);
}

void run_eval(const std::string& gold, const std::string& pred) {
  cws::SegScore s = cws::score_f1(cws::load_corpus(gold, true), cws::load_corpus(pred, true));
  std::fputs(cws::format_report(s).c_str(), stdout);
}

void run_oov_stats(const std::string& train, const std::string& gold,
                   const std::string& pred) {
  cws::OOVReport r = cws::oov_report(cws::load_corpus(train, true),
                                     cws::load_corpus(gold, true),
                                     cws::load_corpus(pred, true));
  std::fputs(cws::format_report(r).c_str(), stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chinese word segmentation laboratory"};
  app.require_subcommand(1);

  auto* norm = app.add_subcommand("normalize", "Half-width normalize a UTF-8 text file");
  std::string norm_in, norm_out;
  norm->add_option("in", norm_in, "input file")->required();
  norm->add_option("out", norm_out, "output file")->required();
  norm->callback([&] { run_normalize(norm_in, norm_out); });

  auto* tlm = app.add_subcommand("train-lm", "Train the bidirectional character LM");
  TrainLmArgs lm_args;
  tlm->add_option("corpus", lm_args.corpus, "training text")->required();
  tlm->add_option("--out", lm_args.out, "model file to write")->required();
  tlm->add_option("--epochs", lm_args.epochs);
  tlm->add_option("--embed-dim", lm_args.embed_dim);
  tlm->add_option("--hidden-dim", lm_args.hidden_dim);
  tlm->add_option("--min-count", lm_args.min_count);
  tlm->add_option("--seed", lm_args.seed);
  tlm->callback([&] { run_train_lm(lm_args); });

  auto* tem = app.add_subcommand("train-embed", "Train static skip-gram char embeddings");
  TrainEmbedArgs em_args;
  tem->add_option("corpus", em_args.corpus, "training text")->required();
  tem->add_option("--out", em_args.out, "model file to write")->required();
  tem->add_option("--dim", em_args.dim);
  tem->add_option("--window", em_args.window);
  tem->add_option("--negatives", em_args.negatives);
  tem->add_option("--epochs", em_args.epochs);
  tem->add_option("--min-count", em_args.min_count);
  tem->add_option("--seed", em_args.seed);
  tem->callback([&] { run_train_embed(em_args); });

  auto* tsg = app.add_subcommand("train-seg", "Train the segmenter on a gold corpus");
  TrainSegArgs sg_args;
  tsg->add_option("corpus", sg_args.corpus, "segmented training text")->required();
  auto* sg_lm = tsg->add_option("--lm", sg_args.lm, "bidirectional LM model");
  auto* sg_em = tsg->add_option("--embed", sg_args.embed, "static embedding model");
  sg_lm->excludes(sg_em);
  tsg->add_option("--out", sg_args.out, "model file to write")->required();
  tsg->add_option("--epochs", sg_args.epochs);
  tsg->add_option("--hidden-dim", sg_args.hidden_dim);
  tsg->add_option("--dropout", sg_args.dropout);
  tsg->add_option("--topology", sg_args.topology)
      ->check(CLI::IsMember({"parallel", "stacked"}));
  tsg->add_option("--valid-frac", sg_args.valid_frac);
  tsg->add_option("--seed", sg_args.seed);
  tsg->callback([&] {
    if (sg_args.lm.empty() && sg_args.embed.empty())
      throw CLI::RequiredError("train-seg: one of --lm/--embed");
    run_train_seg(sg_args);
  });

  auto* seg = app.add_subcommand("segment", "Segment raw text, one sentence per line");
  SegmentArgs seg_args;
  seg->add_option("--model", seg_args.model, "segmenter model")->required();
  auto* seg_lm = seg->add_option("--lm", seg_args.lm, "bidirectional LM model");
  auto* seg_em = seg->add_option("--embed", seg_args.embed, "static embedding model");
  seg_lm->excludes(seg_em);
  seg->add_option("in", seg_args.in, "input file")->required();
  seg->add_option("out", seg_args.out, "output file")->required();
  seg->callback([&] {
    if (seg_args.lm.empty() && seg_args.embed.empty())
      throw CLI::RequiredError("segment: one of --lm/--embed");
    run_segment(seg_args);
  });

  auto* ev = app.add_subcommand("eval", "Word-level precision/recall/F1");
  std::string ev_gold, ev_pred;
  ev->add_option("--gold", ev_gold)->required();
  ev->add_option("--pred", ev_pred)->required();
  ev->callback([&] { run_eval(ev_gold, ev_pred); });

  auto* ov = app.add_subcommand("oov-stats", "OOV rate, recall, and composition");
  std::string ov_train, ov_gold, ov_pred;
  ov->add_option("--train", ov_train)->required();
  ov->add_option("--gold", ov_gold)->required();
  ov->add_option("--pred", ov_pred)->required();
  ov->callback([&] { run_oov_stats(ov_train, ov_gold, ov_pred); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
