#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "llmcomp/archive.hpp"
#include "llmcomp/bench.hpp"
#include "llmcomp/codec.hpp"
#include "llmcomp/error.hpp"
#include "llmcomp/field.hpp"
#include "llmcomp/metrics.hpp"
#include "llmcomp/model.hpp"

using namespace llmcomp;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return 2;
    case ErrorKind::io: return 3;
    case ErrorKind::malformed_input: return 4;
    case ErrorKind::corruption: return 5;
    case ErrorKind::bound_violation: return 6;
    case ErrorKind::divergence: return 7;
  }
  return 1;
}

constexpr const char* exit_codes_help =
    "Exit codes:\n"
    "  0  success\n"
    "  1  unexpected internal error\n"
    "  2  usage: invalid flags or parameter combinations\n"
    "  3  io: a file could not be read or written\n"
    "  4  malformed-input: input bytes are not a valid field, archive or checkpoint\n"
    "  5  corruption: checksum, hash or stream accounting failure\n"
    "  6  bound-violation: a reconstructed point violates the error bound\n"
    "  7  divergence: training produced a non-finite loss\n"
    "Failures print one line: error: <category>: <message>\n"
    "LLMCOMP_THREADS sets the default worker count for bench.";

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

struct FieldArgs {
  std::string input;
  std::string dims;
  std::string precision = "f32";

  void add(CLI::App* app) {
    app->add_option("--input", input, "raw little-endian field file")->required();
    app->add_option("--dims", dims, "T,M,N")->required();
    app->add_option("--precision", precision, "f32 or f64")->capture_default_str();
  }
  Field load() const { return load_field(input, parse_dims(dims), parse_precision(precision)); }
};

struct TokenArgs {
  double eps = 1e-3;
  uint32_t vocab = 1024;
  std::string layout = "zorder";

  void add(CLI::App* app) {
    app->add_option("--eps", eps, "relative error bound")->capture_default_str();
    app->add_option("--vocab", vocab, "vocabulary size V")->capture_default_str();
    app->add_option("--layout", layout, "zorder, row or col")->capture_default_str();
  }
};

void print_train_log(const TrainLogEntry& e) {
  std::printf("step %u ce %.6f mse %.6f total %.6f", e.step, e.ce, e.mse, e.total);
  if (e.heldout_accuracy) std::printf(" heldout_acc %.4f", *e.heldout_accuracy);
  std::printf("\n");
}

void print_header(const ArchiveHeader& h) {
  std::printf("version: %u\n", archive_version);
  std::printf("dims: %u,%u,%u\n", h.dims.t, h.dims.m, h.dims.n);
  std::printf("precision: %s\n", std::string(to_string(h.precision)).c_str());
  std::printf("layout: %s\n", std::string(to_string(h.layout)).c_str());
  std::printf("predictor: %s\n", std::string(to_string(h.predictor)).c_str());
  std::printf("predictor_hash: %s\n", to_hex(h.predictor_hash).c_str());
  std::printf("epsilon: %.17g\n", h.epsilon);
  std::printf("vmin: %.17g\n", h.vmin);
  std::printf("vmax: %.17g\n", h.vmax);
  std::printf("vocab: %u\n", h.vocab);
  std::printf("context: %u\n", h.context);
  std::printf("topk: %u\n", h.topk);
  std::printf("ranks: %llu\n", static_cast<unsigned long long>(h.rank_count));
  std::printf("corrections: %llu\n", static_cast<unsigned long long>(h.correction_count));
  std::printf("residuals: %llu\n", static_cast<unsigned long long>(h.residual_count));
}

std::optional<TransformerPredictor> load_predictor(const std::string& checkpoint) {
  if (checkpoint.empty()) return std::nullopt;
  return TransformerPredictor(load_checkpoint(checkpoint));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Error-bounded lossy compressor for gridded floating-point fields built on top-k token prediction."};
  app.footer(exit_codes_help);
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "write a synthetic field");
  std::string gen_kind = "smooth-advection", gen_dims, gen_precision = "f32", gen_out;
  uint64_t gen_seed = 1;
  uint32_t gen_plateaus = 4;
  gen->add_option("--kind", gen_kind, "smooth-advection, sinusoid-mixture, piecewise-constant or white-noise")
      ->capture_default_str();
  gen->add_option("--dims", gen_dims, "T,M,N")->required();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--precision", gen_precision)->capture_default_str();
  gen->add_option("--plateaus", gen_plateaus, "piecewise-constant levels")->capture_default_str();
  gen->add_option("--out", gen_out)->required();

  // train
  auto* trn = app.add_subcommand("train", "train a transformer predictor on a field's token stream");
  FieldArgs trn_field;
  TokenArgs trn_tok;
  ModelConfig trn_model;
  TrainingConfig trn_cfg;
  std::string trn_out, trn_sampling = "target-aware", trn_optimizer = "adam";
  trn_field.add(trn);
  trn_tok.add(trn);
  trn->add_option("--context", trn_model.context, "context length C")->capture_default_str();
  trn->add_option("--layers", trn_model.layers)->capture_default_str();
  trn->add_option("--hidden", trn_model.hidden)->capture_default_str();
  trn->add_option("--heads", trn_model.heads)->capture_default_str();
  trn->add_option("--max-t", trn_model.max_t, "temporal embedding table size")->capture_default_str();
  trn->add_option("--steps", trn_cfg.steps)->capture_default_str();
  trn->add_option("--batch", trn_cfg.batch)->capture_default_str();
  trn->add_option("--lr", trn_cfg.lr)->capture_default_str();
  trn->add_option("--alpha", trn_cfg.alpha, "weight of the midpoint MSE term")->capture_default_str();
  trn->add_option("--sampling", trn_sampling, "random, uniform or target-aware")->capture_default_str();
  trn->add_option("--sampling-ratio", trn_cfg.sampling_ratio)->capture_default_str();
  trn->add_option("--optimizer", trn_optimizer, "adam or sgd")->capture_default_str();
  trn->add_option("--seed", trn_cfg.seed)->capture_default_str();
  trn->add_option("--eval-every", trn_cfg.eval_every)->capture_default_str();
  trn->add_option("--out", trn_out, "checkpoint path")->required();

  // compress
  auto* cmp = app.add_subcommand("compress", "compress a field into an archive");
  FieldArgs cmp_field;
  TokenArgs cmp_tok;
  uint32_t cmp_topk = 8, cmp_context = 32;
  std::string cmp_predictor = "last", cmp_checkpoint, cmp_out;
  cmp_field.add(cmp);
  cmp_tok.add(cmp);
  cmp->add_option("--topk", cmp_topk, "top-k")->capture_default_str();
  cmp->add_option("--context", cmp_context, "context length C")->capture_default_str();
  cmp->add_option("--predictor", cmp_predictor, "transformer, last or freq")->capture_default_str();
  cmp->add_option("--checkpoint", cmp_checkpoint, "checkpoint for the transformer predictor");
  cmp->add_option("--out", cmp_out)->required();

  // decompress
  auto* dec = app.add_subcommand("decompress", "reconstruct a field from an archive");
  std::string dec_archive, dec_checkpoint, dec_out;
  dec->add_option("--archive", dec_archive)->required();
  dec->add_option("--checkpoint", dec_checkpoint);
  dec->add_option("--out", dec_out)->required();

  // verify
  auto* ver = app.add_subcommand("verify", "decompress an archive and check the error bound against the original");
  std::string ver_input, ver_archive, ver_checkpoint;
  ver->add_option("--input", ver_input, "original raw field")->required();
  ver->add_option("--archive", ver_archive)->required();
  ver->add_option("--checkpoint", ver_checkpoint);

  // bench
  auto* bch = app.add_subcommand("bench", "run an ablation sweep");
  std::string bch_spec, bch_out;
  unsigned bch_threads = 0;
  bch->add_option("--spec", bch_spec, "sweep spec JSON")->required();
  bch->add_option("--out", bch_out, "report path (.csv or .json)")->required();
  bch->add_option("--threads", bch_threads, "concurrent sweep points (default LLMCOMP_THREADS or 1)");

  // inspect
  auto* ins = app.add_subcommand("inspect", "print an archive header and section sizes");
  std::string ins_archive;
  ins->add_option("archive", ins_archive)->required();

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      std::cout << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      std::cout << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) return app.exit(e);
      fail(ErrorKind::usage, e.what());
    }

    if (*gen) {
      SyntheticOptions o;
      o.precision = parse_precision(gen_precision);
      o.plateaus = gen_plateaus;
      const Field f = gen_synthetic(parse_synthetic_kind(gen_kind), parse_dims(gen_dims), gen_seed, o);
      save_field(f, gen_out);
      std::printf("wrote %zu samples, range [%.17g, %.17g]\n", f.dims().count(), f.vmin(), f.vmax());
    } else if (*trn) {
      const Field field = trn_field.load();
      trn_cfg.sampling = parse_sampling(trn_sampling);
      trn_cfg.optimizer = parse_optimizer(trn_optimizer);
      trn_cfg.validate();
      trn_model.vocab = trn_tok.vocab;
      trn_model.max_m = std::max(trn_model.max_m, field.dims().m);
      trn_model.max_n = std::max(trn_model.max_n, field.dims().n);
      trn_model.validate();
      if (trn_model.context >= field.dims().count())
        fail(ErrorKind::usage, "context length must be smaller than the field's sample count");
      CompressOptions o;
      o.epsilon = trn_tok.eps;
      o.vocab = trn_tok.vocab;
      o.topk = 1;
      o.layout = parse_layout(trn_tok.layout);
      const Tokenized tok = tokenize(field, o);
      const TrainResult r = train(tok.stream.tokens, tok.stream.coords, trn_model, trn_cfg, tok.quantizer);
      for (const auto& e : r.log)
        if (e.heldout_accuracy) print_train_log(e);
      save_checkpoint(r.checkpoint, trn_out);
      std::printf("pool %zu heldout_acc %.4f hash %s\n", r.pool_size, r.heldout_accuracy,
                  to_hex(r.checkpoint.hash).c_str());
    } else if (*cmp) {
      const Field field = cmp_field.load();
      CompressOptions o;
      o.epsilon = cmp_tok.eps;
      o.vocab = cmp_tok.vocab;
      o.topk = cmp_topk;
      o.layout = parse_layout(cmp_tok.layout);
      if (o.topk == 0 || o.topk > o.vocab)
        fail(ErrorKind::usage, "--topk must be in [1, V]; got k=" + std::to_string(o.topk) + " with V=" +
                                   std::to_string(o.vocab));
      if (cmp_context == 0 || cmp_context >= field.dims().count())
        fail(ErrorKind::usage, "--context must be in [1, L) where L=" + std::to_string(field.dims().count()));
      const PredictorKind kind = parse_predictor_kind(cmp_predictor);
      std::optional<TransformerPredictor> transformer;
      if (kind == PredictorKind::transformer) {
        if (cmp_checkpoint.empty()) fail(ErrorKind::usage, "--predictor transformer needs --checkpoint");
        transformer = load_predictor(cmp_checkpoint);
        if (transformer->vocab() != o.vocab || transformer->context_length() != cmp_context)
          fail(ErrorKind::usage, "checkpoint was trained with V=" + std::to_string(transformer->vocab()) + " C=" +
                                     std::to_string(transformer->context_length()) + "; pass matching --vocab/--context");
      } else if (!cmp_checkpoint.empty()) {
        fail(ErrorKind::usage, "--checkpoint only applies to --predictor transformer");
      }
      const Tokenized tok = tokenize(field, o);
      std::unique_ptr<Predictor> baseline;
      const Predictor* predictor = nullptr;
      if (transformer) {
        predictor = &*transformer;
      } else {
        baseline = make_baseline(kind, tok.stream.tokens, o.vocab, cmp_context);
        predictor = baseline.get();
      }
      const CompressResult r = compress(field, tok, o, *predictor);
      save_archive(r.archive, cmp_out);
      const size_t size = r.archive.size_bytes();
      std::printf("archive %zu bytes ratio %.4f bitrate %.4f corrections %zu residuals %zu\n", size,
                  compression_ratio(field.size_bytes(), size), bitrate(size, field.dims().count()), r.corrections,
                  r.residuals);
    } else if (*dec) {
      const Archive a = load_archive(dec_archive);
      const auto transformer = load_predictor(dec_checkpoint);
      const Field f = decompress(a, transformer ? &*transformer : nullptr);
      save_field(f, dec_out);
      std::printf("wrote %zu samples\n", f.dims().count());
    } else if (*ver) {
      const Archive a = load_archive(ver_archive);
      const Field original = load_field(ver_input, a.header.dims, a.header.precision);
      const auto transformer = load_predictor(ver_checkpoint);
      const VerifyReport r = verify(original, a, transformer ? &*transformer : nullptr);
      std::printf("max_abs_error %.17g\nmax_rel_error %.17g\nepsilon %.17g\npsnr %.6f\nratio %.6f\nbitrate %.6f\n",
                  r.errors.max_abs, r.errors.max_rel, r.epsilon, r.errors.psnr, r.ratio, r.bitrate);
      if (r.expands) std::printf("warning: archive is larger than the original field\n");
      if (!r.within_bound) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "max relative error " << r.errors.max_rel << " exceeds epsilon " << r.epsilon;
        fail(ErrorKind::bound_violation, msg.str());
      }
      std::printf("ok\n");
    } else if (*bch) {
      const SweepSpec spec = load_sweep_spec(bch_spec);
      const Report report = run_sweep(spec, bch_threads);
      write_report(report, bch_out);
      std::printf("%zu sweep points written to %s\n", report.size(), bch_out.c_str());
    } else if (*ins) {
      const Archive a = load_archive(ins_archive);
      print_header(a.header);
      std::printf("archive_bytes: %zu\nheader_bytes: %zu\n", a.size_bytes(), archive_header_size);
      for (size_t i = 0; i < section_count; ++i) {
        const auto s = static_cast<Section>(i);
        std::printf("%s_bytes: %zu\n", std::string(to_string(s)).c_str(), a.section(s).size());
      }
    }
  } catch (const Error& e) {
    std::fflush(stdout);
    std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(e.kind())).c_str(), one_line(e.what()).c_str());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fflush(stdout);
    std::fprintf(stderr, "error: internal: %s\n", one_line(e.what()).c_str());
    return 1;
  }
  return 0;
}
