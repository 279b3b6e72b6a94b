#include "llmcomp/predictor.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "llmcomp/error.hpp"

namespace llmcomp {

std::string_view to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::transformer: return "transformer";
    case PredictorKind::last_value: return "last";
    case PredictorKind::frequency: return "freq";
    case PredictorKind::other: return "other";
  }
  return "unknown";
}

PredictorKind parse_predictor_kind(std::string_view s) {
  if (s == "transformer") return PredictorKind::transformer;
  if (s == "last") return PredictorKind::last_value;
  if (s == "freq") return PredictorKind::frequency;
  fail(ErrorKind::usage, "unknown predictor '" + std::string(s) + "' (expected transformer, last or freq)");
}

void predict_topk(const Predictor& predictor, const Context& ctx, uint32_t k, std::vector<double>& scores,
                  std::vector<uint32_t>& ranked) {
  const uint32_t vocab = predictor.vocab();
  if (k == 0 || k > vocab)
    fail(ErrorKind::usage, "top-k must be in [1, V], got k=" + std::to_string(k) + " V=" + std::to_string(vocab));
  if (ctx.tokens.size() != predictor.context_length() || ctx.coords.size() != ctx.tokens.size() + 1)
    fail(ErrorKind::usage, "context must hold exactly " + std::to_string(predictor.context_length()) + " tokens");
  scores.resize(vocab);
  predictor.scores(ctx, scores);
  ranked.resize(vocab);
  std::iota(ranked.begin(), ranked.end(), 0u);
  auto better = [&](uint32_t a, uint32_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  std::partial_sort(ranked.begin(), ranked.begin() + k, ranked.end(), better);
  ranked.resize(k);
}

std::vector<uint32_t> predict_topk(const Predictor& predictor, const Context& ctx, uint32_t k) {
  std::vector<double> scores;
  std::vector<uint32_t> ranked;
  predict_topk(predictor, ctx, k, scores, ranked);
  return ranked;
}

void UniformPredictor::scores(const Context&, std::span<double> out) const { std::fill(out.begin(), out.end(), 0.0); }

FrequencyPredictor::FrequencyPredictor(std::vector<uint64_t> counts, uint32_t context)
    : counts_(std::move(counts)), context_(context) {
  if (counts_.empty()) fail(ErrorKind::usage, "frequency predictor needs a nonempty count table");
}

void FrequencyPredictor::scores(const Context&, std::span<double> out) const {
  for (size_t v = 0; v < counts_.size(); ++v) out[v] = static_cast<double>(counts_[v]);
}

LastValuePredictor::LastValuePredictor(uint32_t vocab, uint32_t context, std::vector<uint64_t> counts)
    : vocab_(vocab), context_(context), counts_(std::move(counts)) {
  if (context == 0) fail(ErrorKind::usage, "last-value predictor needs a context of at least one token");
  if (!counts_.empty() && counts_.size() != vocab) fail(ErrorKind::usage, "count table does not match vocabulary");
}

void LastValuePredictor::scores(const Context& ctx, std::span<double> out) const {
  for (uint32_t v = 0; v < vocab_; ++v) out[v] = counts_.empty() ? 0.0 : static_cast<double>(counts_[v]);
  const uint32_t last = ctx.tokens.back();
  if (last < vocab_) out[last] = std::numeric_limits<double>::infinity();
}

std::unique_ptr<Predictor> baseline_last_value(uint32_t vocab, uint32_t context, std::vector<uint64_t> counts) {
  return std::make_unique<LastValuePredictor>(vocab, context, std::move(counts));
}

std::unique_ptr<Predictor> baseline_frequency(std::vector<uint64_t> counts, uint32_t context) {
  return std::make_unique<FrequencyPredictor>(std::move(counts), context);
}

std::vector<uint64_t> token_counts(std::span<const uint32_t> tokens, uint32_t vocab) {
  std::vector<uint64_t> counts(vocab, 0);
  for (uint32_t t : tokens) {
    if (t >= vocab) fail(ErrorKind::usage, "token outside vocabulary");
    ++counts[t];
  }
  return counts;
}

}  // namespace llmcomp
