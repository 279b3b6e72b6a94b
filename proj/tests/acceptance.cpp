// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "llmcomp/bench.hpp"
#include "llmcomp/codec.hpp"
#include "llmcomp/entropy.hpp"
#include "llmcomp/layout.hpp"
#include "llmcomp/metrics.hpp"
#include "llmcomp/model.hpp"
#include "llmcomp/quant.hpp"
#include "llmcomp/rng.hpp"
#include "support.hpp"

using namespace llmcomp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Independent scan of the relative error bound.
double scan_max_relative_error(const Field& a, const Field& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.values().size(); ++i) worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  if (a.vrange() == 0.0) return worst == 0.0 ? 0.0 : INFINITY;
  return worst / a.vrange();
}

ModelConfig tiny_model(uint32_t vocab, uint32_t context, Dims dims, uint32_t layers, uint32_t hidden, uint32_t heads) {
  ModelConfig mc;
  mc.layers = layers;
  mc.hidden = hidden;
  mc.heads = heads;
  mc.vocab = vocab;
  mc.context = context;
  mc.max_m = std::max<uint32_t>(dims.m, 1);
  mc.max_n = std::max<uint32_t>(dims.n, 1);
  mc.max_t = std::max<uint32_t>(dims.t, 1);
  return mc;
}

TrainingConfig short_training(uint32_t steps, uint32_t batch, double lr, uint64_t seed) {
  TrainingConfig tc;
  tc.steps = steps;
  tc.batch = batch;
  tc.lr = lr;
  tc.seed = seed;
  tc.eval_every = 0;
  tc.sampling_ratio = 0.25;
  return tc;
}

// 1. Error-bound contract.
Outcome criterion_error_bound() {
  const auto start = Clock::now();
  Rng rng(2024);
  const SyntheticKind kinds[] = {SyntheticKind::smooth_advection, SyntheticKind::sinusoid_mixture,
                                 SyntheticKind::piecewise_constant, SyntheticKind::white_noise};
  double worst_ratio = 0.0;  // max relative error divided by epsilon
  size_t runs = 0, violations = 0;
  for (int i = 0; i < 20; ++i) {
    const Dims dims{1 + uint32_t(rng.below(8)), 2 + uint32_t(rng.below(63)), 2 + uint32_t(rng.below(63))};
    const Precision precision = i % 2 ? Precision::f64 : Precision::f32;
    const Field field = gen_synthetic(kinds[i % 4], dims, 100 + i, {precision, 2 + uint32_t(rng.below(6))});
    for (double eps : {1e-2, 1e-3, 1e-4}) {
      CompressOptions o;
      o.epsilon = eps;
      o.vocab = 128;
      o.topk = 4;
      o.layout = static_cast<LayoutKind>(i % 3);
      const uint32_t context = std::min<uint32_t>(8, uint32_t(dims.count() - 1));
      const Tokenized tok = tokenize(field, o);
      const auto check = [&](const Predictor& pred, bool external) {
        const Archive a = parse_archive(serialize_archive(compress(field, tok, o, pred).archive));
        const Field back = decompress(a, external ? &pred : nullptr);
        const double rel = scan_max_relative_error(field, back);
        worst_ratio = std::max(worst_ratio, rel / eps);
        ++runs;
        if (!(rel <= eps)) ++violations;
      };
      check(*make_baseline(PredictorKind::last_value, tok.stream.tokens, o.vocab, context), false);
      check(*make_baseline(PredictorKind::frequency, tok.stream.tokens, o.vocab, context), false);
      const TrainResult tr = train(tok.stream.tokens, tok.stream.coords, tiny_model(o.vocab, context, dims, 1, 16, 2),
                                   short_training(20, 8, 1e-2, 7 + i), tok.quantizer);
      check(TransformerPredictor(tr.checkpoint), true);
    }
  }
  const double secs = seconds_since(start);
  Outcome out;
  out.pass = violations == 0 && runs == 180 && secs < 300;
  out.detail = std::to_string(runs) + " round trips, " + std::to_string(violations) +
               " violations, worst error/eps " + fmt("%.4f", worst_ratio) + ", " + fmt("%.1f s", secs);
  return out;
}

// 2. Token-exact round trip for randomized configurations.
Outcome criterion_token_roundtrip() {
  Rng rng(77);
  const SyntheticKind kinds[] = {SyntheticKind::smooth_advection, SyntheticKind::sinusoid_mixture,
                                 SyntheticKind::piecewise_constant, SyntheticKind::white_noise};
  const uint32_t vocabs[] = {2, 5, 16, 64, 256};
  size_t exact = 0, adversarial = 0;
  std::map<std::string, size_t> by_predictor;
  for (int i = 0; i < 200; ++i) {
    const Dims dims{1 + uint32_t(rng.below(4)), 1 + uint32_t(rng.below(16)), 2 + uint32_t(rng.below(15))};
    const Field field =
        gen_synthetic(kinds[rng.below(4)], dims, 500 + i, {rng.below(2) ? Precision::f32 : Precision::f64});
    CompressOptions o;
    o.epsilon = 1e-2;
    o.vocab = vocabs[rng.below(5)];
    o.layout = static_cast<LayoutKind>(rng.below(3));
    const uint32_t pick = uint32_t(rng.below(4));
    o.topk = pick == 0 ? 1 : pick == 1 ? o.vocab : 1 + uint32_t(rng.below(o.vocab));
    const uint32_t context = 1 + uint32_t(rng.below(std::min<size_t>(12, dims.count() - 1)));
    const Tokenized tok = tokenize(field, o);

    std::unique_ptr<Predictor> owned;
    std::string name;
    bool external = true;
    switch (i % 6) {
      case 0:
        owned = std::make_unique<testing::AdversarialPredictor>(tok.stream.tokens, dims, o.layout, o.vocab, context);
        name = "adversarial";
        break;
      case 1:
        owned = make_baseline(PredictorKind::last_value, tok.stream.tokens, o.vocab, context);
        name = "last-value";
        external = false;
        break;
      case 2:
        owned = make_baseline(PredictorKind::frequency, tok.stream.tokens, o.vocab, context);
        name = "frequency";
        external = false;
        break;
      case 3:
        owned = std::make_unique<testing::HashPredictor>(o.vocab, context, i);
        name = "hash";
        break;
      case 4:
        owned = std::make_unique<UniformPredictor>(o.vocab, context);
        name = "uniform";
        break;
      default: {
        Transformer t = Transformer::initialized(tiny_model(o.vocab, context, dims, 1, 8, 2), i, 0.5);
        const TensorInfo& head = t.tensor("head.w");
        for (size_t j = 0; j < head.size; ++j) t.parameters()[head.offset + j] = rng.normal();
        owned = std::make_unique<TransformerPredictor>(make_checkpoint(t));
        name = "transformer";
      }
    }
    const CompressResult r = compress(field, tok, o, *owned);
    const Archive a = parse_archive(serialize_archive(r.archive));
    const Decoded d = decompress_tokens(a, external ? owned.get() : nullptr);
    if (d.tokens == tok.stream.tokens && d.ranks == r.ranks) ++exact;
    if (i % 6 == 0 && r.corrections == (o.topk < o.vocab ? dims.count() - context : 0)) ++adversarial;
    ++by_predictor[name];
  }
  Outcome out;
  out.pass = exact == 200 && adversarial == by_predictor["adversarial"];
  out.detail = std::to_string(exact) + "/200 exact; adversarial runs with every position corrected: " +
               std::to_string(adversarial) + "/" + std::to_string(by_predictor["adversarial"]);
  return out;
}

// 3. Lloyd-Max correctness.
Outcome criterion_lloyd_max() {
  Rng rng(31);
  std::vector<double> u(100000);
  for (auto& v : u) v = rng.uniform();
  const QuantizerModel q = lloyd_max_fit(u, 2, 1e-3);
  const double db = std::abs(q.boundaries[0] - 0.5);
  const double dl = std::max(std::abs(q.levels[0] - 0.25), std::abs(q.levels[1] - 0.75));
  size_t monotone = 0;
  for (int s = 0; s < 50; ++s) {
    std::vector<double> x(500 + rng.below(5000));
    const int shape = s % 4;
    for (auto& v : x) {
      switch (shape) {
        case 0: v = rng.uniform(); break;
        case 1: v = rng.normal(); break;
        case 2: v = std::exp(2.0 * rng.normal()); break;
        default: v = rng.uniform() < 0.8 ? rng.normal() * 0.1 : 5.0 + rng.normal();
      }
    }
    LloydMaxTrace trace;
    lloyd_max_fit(x, 2 + uint32_t(rng.below(200)), 1e-3, {}, &trace);
    bool ok = !trace.mse.empty();
    for (size_t i = 1; i < trace.mse.size(); ++i) ok = ok && trace.mse[i] <= trace.mse[i - 1];
    monotone += ok;
  }
  Outcome out;
  out.pass = db <= 0.01 && dl <= 0.01 && monotone == 50;
  out.detail = "boundary off by " + fmt("%.5f", db) + ", levels off by " + fmt("%.5f", dl) + ", monotone traces " +
               std::to_string(monotone) + "/50";
  return out;
}

// Chebyshev step computed from the coordinate stream, independent of the
// library's own helper.
double chebyshev_from_coords(uint32_t m, uint32_t n, LayoutKind kind) {
  const auto coords = stream_coords({1, m, n}, kind);
  double sum = 0;
  for (size_t i = 1; i < coords.size(); ++i) {
    const auto dx = std::abs(int64_t(coords[i].x) - int64_t(coords[i - 1].x));
    const auto dy = std::abs(int64_t(coords[i].y) - int64_t(coords[i - 1].y));
    sum += double(std::max(dx, dy));
  }
  return sum / double(coords.size() - 1);
}

// 4. Layout bijectivity and locality.
Outcome criterion_layout() {
  size_t cases = 0, identities = 0;
  for (uint32_t t = 1; t <= 5; ++t)
    for (uint32_t m = 1; m <= 17; ++m)
      for (uint32_t n = 1; n <= 17; ++n) {
        std::vector<double> v(size_t{t} * m * n);
        for (size_t i = 0; i < v.size(); ++i) v[i] = double(i);
        const Field f({t, m, n}, Precision::f64, v);
        for (auto kind : {LayoutKind::zorder, LayoutKind::row_major, LayoutKind::column_major}) {
          ++cases;
          const Sequence s = flatten(f, kind);
          std::vector<double> sorted = s.values;
          std::sort(sorted.begin(), sorted.end());
          const Field back = unflatten(s.values, f.dims(), kind, Precision::f64);
          bool ok = sorted == v && std::equal(back.values().begin(), back.values().end(), v.begin());
          for (size_t p = 0; ok && p < s.coords.size(); ++p)
            ok = s.values[p] == f.at(s.coords[p].t, s.coords[p].x, s.coords[p].y);
          identities += ok;
        }
      }
  bool locality = true;
  std::string steps;
  for (auto [m, n] : {std::pair{16u, 16u}, std::pair{17u, 33u}}) {
    const double z = chebyshev_from_coords(m, n, LayoutKind::zorder);
    const double r = chebyshev_from_coords(m, n, LayoutKind::row_major);
    locality = locality && z < r && z == mean_chebyshev_step(m, n, LayoutKind::zorder) &&
               r == mean_chebyshev_step(m, n, LayoutKind::row_major);
    steps += " " + std::to_string(m) + "x" + std::to_string(n) + ": zorder " + fmt("%.3f", z) + " < row " +
             fmt("%.3f", r) + ";";
  }
  Outcome out;
  out.pass = identities == cases && locality;
  out.detail = std::to_string(identities) + "/" + std::to_string(cases) + " bijective;" + steps;
  return out;
}

// 5. Transformer numerics.
Outcome criterion_numerics() {
  const uint32_t V = 12, C = 5;
  ModelConfig mc = tiny_model(V, C, {6, 7, 7}, 1, 8, 2);
  Transformer zero = Transformer::initialized(mc, 3);
  Rng rng(55);

  const auto random_context = [&](std::vector<uint32_t>& toks, std::vector<Coord>& coords) {
    toks.resize(C);
    coords.resize(C + 1);
    for (auto& t : toks) t = uint32_t(rng.below(V));
    for (auto& c : coords) c = {uint32_t(rng.below(7)), uint32_t(rng.below(7)), uint32_t(rng.below(9))};
  };

  bool uniform = true;
  std::vector<uint32_t> toks;
  std::vector<Coord> coords;
  for (int i = 0; i < 5; ++i) {
    random_context(toks, coords);
    for (double p : zero.probabilities({toks, coords})) uniform = uniform && p == 1.0 / V;
  }

  Transformer model = zero;
  for (auto& w : model.parameters()) w += 0.3 * rng.normal();
  std::vector<double> mid(V);
  for (uint32_t v = 0; v < V; ++v) mid[v] = (v + 0.5) / V;
  auto ws = model.make_workspace();
  double worst_grad = 0.0, worst_sum = 0.0;
  const double h = 1e-5, alpha = 0.1;
  for (int pair = 0; pair < 20; ++pair) {
    random_context(toks, coords);
    const uint32_t target = uint32_t(rng.below(V));
    const Context ctx{toks, coords};
    const auto p = model.probabilities(ctx);
    double sum = 0;
    for (double x : p) sum += x;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));

    std::vector<double> grad(model.parameters().size(), 0.0);
    model.loss_and_gradient(ctx, target, mid, alpha, grad, *ws);
    double diff2 = 0, norm2 = 0;
    for (size_t j = 0; j < grad.size(); ++j) {
      double& w = model.parameters()[j];
      const double saved = w;
      w = saved + h;
      const double up = hybrid_loss(model.probabilities(ctx), target, mid, alpha).total;
      w = saved - h;
      const double down = hybrid_loss(model.probabilities(ctx), target, mid, alpha).total;
      w = saved;
      const double fd = (up - down) / (2 * h);
      diff2 += (fd - grad[j]) * (fd - grad[j]);
      norm2 += std::max(fd * fd, grad[j] * grad[j]);
    }
    worst_grad = std::max(worst_grad, std::sqrt(diff2 / norm2));
  }
  Outcome out;
  out.pass = uniform && worst_sum <= 1e-5 && worst_grad <= 1e-3;
  out.detail = "worst gradient relative error " + fmt("%.2e", worst_grad) + " over 20 pairs (" +
               std::to_string(model.parameters().size()) + " parameters), |sum p - 1| <= " + fmt("%.1e", worst_sum) +
               ", zero head uniform: " + (uniform ? "yes" : "no");
  return out;
}

// 6. Learnability on a period-4 sequence.
Outcome criterion_learnability() {
  const auto start = Clock::now();
  const Dims dims{1, 96, 96};
  const LayoutKind layout = LayoutKind::zorder;
  std::vector<double> stream(dims.count());
  for (size_t p = 0; p < stream.size(); ++p) stream[p] = double(p % 4);
  const Field field = unflatten(stream, dims, layout, Precision::f32);

  CompressOptions o;
  o.epsilon = 1e-3;
  o.vocab = 4;
  o.topk = 1;
  o.layout = layout;
  const Tokenized tok = tokenize(field, o);
  bool periodic = true;
  for (size_t p = 4; p < tok.stream.tokens.size(); ++p)
    periodic = periodic && tok.stream.tokens[p] == tok.stream.tokens[p - 4] && tok.stream.tokens[p] != tok.stream.tokens[p - 1];

  const uint32_t C = 8;
  TrainingConfig tc = short_training(2000, 8, 1e-3, 11);
  tc.eval_windows = 2048;
  const TrainResult tr = train(tok.stream.tokens, tok.stream.coords, tiny_model(4, C, dims, 2, 64, 4), tc, tok.quantizer);
  const double train_secs = seconds_since(start);

  const TransformerPredictor model(tr.checkpoint);
  const Archive learned = compress(field, tok, o, model).archive;
  CompressOptions degenerate_options = o;
  degenerate_options.topk = 4;
  const UniformPredictor uniform(4, C);
  const Archive degenerate = compress(field, tok, degenerate_options, uniform).archive;
  const bool exact = decompress_tokens(parse_archive(serialize_archive(learned)), &model).tokens == tok.stream.tokens;
  const double shrink = double(degenerate.size_bytes()) / double(learned.size_bytes());
  const double secs = seconds_since(start);

  Outcome out;
  out.pass = periodic && exact && tr.heldout_accuracy >= 0.99 && shrink >= 5.0 && secs < 600;
  out.detail = "held-out top-1 " + fmt("%.4f", tr.heldout_accuracy) + ", archive " +
               std::to_string(learned.size_bytes()) + " B vs k=V " + std::to_string(degenerate.size_bytes()) +
               " B (" + fmt("%.2fx", shrink) + "), training " + fmt("%.1f s", train_secs) + ", total " +
               fmt("%.1f s", secs);
  return out;
}

// 7. Qualitative trends.
Outcome criterion_trends() {
  Outcome out;
  out.pass = true;
  const auto note = [&](const std::string& label, bool ok, const std::string& detail) {
    out.pass = out.pass && ok;
    out.detail += (out.detail.empty() ? "" : "; ") + label + (ok ? " ok" : " FAILED") + " (" + detail + ")";
  };

  {
    SweepSpec s = parse_sweep_spec(R"({
      "axis": "topk", "values": [1, 2, 4, 8, 16], "epsilon": 0.001,
      "dataset": {"kind": "piecewise-constant", "dims": [4, 32, 32], "seed": 3},
      "base": {"vocab": 64, "context": 8, "predictor": "freq"}
    })");
    const Report r = run_sweep(s, 0);
    bool ok = r.size() == 5;
    std::string bytes;
    for (size_t i = 0; i < r.size(); ++i) {
      if (i) ok = ok && r[i].correction_bytes <= r[i - 1].correction_bytes;
      bytes += (i ? "," : "") + std::to_string(r[i].correction_bytes);
    }
    note("a", ok, "correction bytes " + bytes);
  }
  {
    SweepSpec s = parse_sweep_spec(R"({
      "axis": "vocab", "values": [16, 64, 256, 1024, 4096], "epsilon": 0.001,
      "dataset": {"kind": "sinusoid-mixture", "dims": [4, 48, 48], "seed": 4},
      "base": {"topk": 8, "context": 8, "predictor": "last"}
    })");
    const Report r = run_sweep(s, 0);
    const Field f = load_dataset(s.dataset);
    bool consistent = r.size() == 5;
    bool reaches_zero = false;
    std::string detail;
    for (size_t i = 0; i < r.size(); ++i) {
      CompressOptions o;
      o.epsilon = s.epsilon;
      o.vocab = std::stoul(r[i].value);
      const Tokenized tok = tokenize(f, o);
      const size_t wide = tok.quantizer.wide_count();
      consistent = consistent && ((wide == 0) == (r[i].residual_bytes == 0));
      reaches_zero = reaches_zero || (wide == 0 && r[i].residual_bytes == 0);
      detail += (i ? "," : "") + r[i].value + ":" + std::to_string(r[i].residual_bytes) + "B/" +
                std::to_string(wide) + "wide";
    }
    note("b", consistent && !r.empty() && r.front().residual_bytes > 0 && reaches_zero, detail);
  }
  {
    SweepSpec s = parse_sweep_spec(R"({
      "axis": "layout", "values": ["zorder", "row"], "epsilon": 0.001,
      "dataset": {"kind": "smooth-advection", "dims": [4, 64, 64], "seed": 5},
      "base": {"vocab": 1024, "topk": 8, "context": 8, "predictor": "last"}
    })");
    const Report r = run_sweep(s, 0);
    const double z = r.at(0).rank_entropy_bits, row = r.at(1).rank_entropy_bits;
    note("c", z <= row, "H0 bits zorder " + fmt("%.0f", z) + " vs row " + fmt("%.0f", row));
  }
  {
    Rng rng(9);
    std::vector<uint32_t> corpus(100000);
    for (auto& t : corpus) t = rng.uniform() < 0.9 ? 0 : 1;
    const size_t pool = 20000;
    const auto ratio = [&](const std::vector<size_t>& picks) {
      size_t c[2] = {0, 0};
      for (size_t p : picks) ++c[corpus[p]];
      return c[1] == 0 || c[0] == 0 ? INFINITY : double(std::max(c[0], c[1])) / double(std::min(c[0], c[1]));
    };
    Rng a(1), b(1);
    const double aware = ratio(target_aware_sample(corpus, 8, pool, a));
    const double random = ratio(random_sample(corpus, 8, pool, b));
    note("d", aware <= 3.0 && random > 8.0, "target-aware " + fmt("%.2f", aware) + ", random " + fmt("%.2f", random));
  }
  return out;
}

// 8. Entropy coder.
Outcome criterion_entropy() {
  Rng rng(88);
  bool lossless = true;
  for (uint32_t alphabet : {2u, 9u, 1025u}) {
    std::vector<uint32_t> s(1000000);
    for (auto& v : s) v = uint32_t(rng.below(alphabet));
    lossless = lossless && entropy_decode(entropy_encode(s, alphabet), s.size(), alphabet) == s;
  }
  std::vector<uint32_t> skew(100000);
  for (auto& v : skew) v = rng.uniform() < 0.99 ? 0 : 1 + uint32_t(rng.below(8));
  std::map<uint32_t, double> counts;
  for (uint32_t v : skew) counts[v] += 1;
  double h0_bits = 0;
  for (const auto& [v, c] : counts) h0_bits -= c * std::log2(c / double(skew.size()));
  const double coded_bits = 8.0 * double(entropy_encode(skew, 9).size());
  const double gap = std::abs(coded_bits - h0_bits) / h0_bits;
  Outcome out;
  out.pass = lossless && gap <= 0.02;
  out.detail = std::string("round trips ") + (lossless ? "exact" : "BROKEN") + "; skewed stream " +
               fmt("%.0f", coded_bits) + " bits vs n*H0 " + fmt("%.0f", h0_bits) + " (" + fmt("%.2f%%", 100 * gap) +
               ")";
  return out;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(LLMCOMP_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 9. Determinism across runs and across copies.
Outcome criterion_determinism() {
  const auto dir = testing::scratch_dir("acceptance-det");
  const fs::path log = dir / "log.txt";
  const auto field = dir / "f.raw";
  Outcome out;
  if (run_cli("gen --kind smooth-advection --dims 3,16,16 --seed 4 --precision f32 --out " + field.string(), log) != 0) {
    out.detail = "gen failed: " + read_bytes(log);
    return out;
  }
  const std::string common = "--input " + field.string() + " --dims 3,16,16 --precision f32 --eps 1e-3 --vocab 64 ";
  const std::string train_args = "train " + common + "--context 8 --layers 1 --hidden 16 --heads 2 --steps 60 "
                                 "--batch 8 --lr 3e-3 --seed 5 --eval-every 0 --out ";
  int rc = run_cli(train_args + (dir / "a.ckpt").string(), log);
  rc |= run_cli(train_args + (dir / "b.ckpt").string(), log);
  const std::string compress_args = "compress " + common + "--topk 4 --context 8 --predictor transformer --checkpoint " +
                                    (dir / "a.ckpt").string() + " --out ";
  rc |= run_cli(compress_args + (dir / "a.llmc").string(), log);
  rc |= run_cli(compress_args + (dir / "b.llmc").string(), log);
  if (rc != 0) {
    out.detail = "CLI failed: " + read_bytes(log);
    return out;
  }
  const bool same_ckpt = read_bytes(dir / "a.ckpt") == read_bytes(dir / "b.ckpt");
  const bool same_archive = read_bytes(dir / "a.llmc") == read_bytes(dir / "b.llmc");

  const fs::path other = dir / "machine-b";
  fs::create_directories(other);
  fs::copy_file(dir / "a.llmc", other / "x.llmc");
  fs::copy_file(dir / "a.ckpt", other / "x.ckpt");
  const Field original = load_field(field, {3, 16, 16}, Precision::f32);
  CompressOptions o;
  o.epsilon = 1e-3;
  o.vocab = 64;
  const Tokenized tok = tokenize(original, o);
  const TransformerPredictor pred(load_checkpoint(other / "x.ckpt"));
  const bool same_tokens = decompress_tokens(load_archive(other / "x.llmc"), &pred).tokens == tok.stream.tokens;
  rc = run_cli("decompress --archive " + (other / "x.llmc").string() + " --checkpoint " + (other / "x.ckpt").string() +
                   " --out " + (other / "y.raw").string(),
               log);
  rc |= run_cli("decompress --archive " + (dir / "a.llmc").string() + " --checkpoint " + (dir / "a.ckpt").string() +
                    " --out " + (dir / "y.raw").string(),
                log);
  const bool same_field = rc == 0 && read_bytes(other / "y.raw") == read_bytes(dir / "y.raw");

  out.pass = same_ckpt && same_archive && same_tokens && same_field;
  out.detail = std::string("checkpoints ") + (same_ckpt ? "identical" : "DIFFER") + ", archives " +
               (same_archive ? "identical" : "DIFFER") + ", copied archive decodes to the encoder's tokens: " +
               (same_tokens ? "yes" : "NO") + ", reconstructions " + (same_field ? "identical" : "DIFFER");
  return out;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"error bound holds at every point", criterion_error_bound},
      {"token-exact codec round trip", criterion_token_roundtrip},
      {"Lloyd-Max fit", criterion_lloyd_max},
      {"layout bijectivity and locality", criterion_layout},
      {"transformer gradients and probabilities", criterion_numerics},
      {"period-4 learnability", criterion_learnability},
      {"qualitative trends", criterion_trends},
      {"entropy coder", criterion_entropy},
      {"determinism", criterion_determinism},
  };
  int failures = 0;
  int index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    failures += !o.pass;
    std::printf("[%s] criterion %d: %s: %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of 9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
