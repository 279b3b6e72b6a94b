#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "llmcomp/io.hpp"
#include "llmcomp/layout.hpp"

namespace llmcomp {

// C preceding tokens plus C + 1 coordinates: the context positions followed
// by the position being predicted.
struct Context {
  std::span<const uint32_t> tokens;
  std::span<const Coord> coords;
};

enum class PredictorKind : uint8_t { transformer = 0, last_value = 1, frequency = 2, other = 255 };

std::string_view to_string(PredictorKind kind);
PredictorKind parse_predictor_kind(std::string_view s);  // "transformer", "last", "freq"

class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual uint32_t vocab() const = 0;
  virtual uint32_t context_length() const = 0;
  virtual PredictorKind kind() const { return PredictorKind::other; }

  // Identifies the predictor state a decoder must reproduce. All zeros for
  // predictors whose state travels inside the archive.
  virtual Digest state_hash() const { return {}; }

  // Writes one score per vocabulary entry; higher ranks first. Must be a
  // pure function of (predictor state, context) and single-threaded.
  virtual void scores(const Context& ctx, std::span<double> out) const = 0;
};

// The k highest-scoring tokens, ties broken by ascending token ID.
std::vector<uint32_t> predict_topk(const Predictor& predictor, const Context& ctx, uint32_t k);

// Same, reusing caller-owned buffers on the hot path.
void predict_topk(const Predictor& predictor, const Context& ctx, uint32_t k, std::vector<double>& scores,
                  std::vector<uint32_t>& ranked);

// Scores every token equally, so ranks equal token IDs.
class UniformPredictor final : public Predictor {
 public:
  UniformPredictor(uint32_t vocab, uint32_t context) : vocab_(vocab), context_(context) {}
  uint32_t vocab() const override { return vocab_; }
  uint32_t context_length() const override { return context_; }
  void scores(const Context&, std::span<double> out) const override;

 private:
  uint32_t vocab_, context_;
};

// Scores tokens by corpus counts.
class FrequencyPredictor final : public Predictor {
 public:
  FrequencyPredictor(std::vector<uint64_t> counts, uint32_t context);

  uint32_t vocab() const override { return static_cast<uint32_t>(counts_.size()); }
  uint32_t context_length() const override { return context_; }
  PredictorKind kind() const override { return PredictorKind::frequency; }
  void scores(const Context&, std::span<double> out) const override;

  std::span<const uint64_t> counts() const { return counts_; }

 private:
  std::vector<uint64_t> counts_;
  uint32_t context_;
};

// Ranks the most recent context token first, then falls back to corpus
// counts (or ascending token ID when no counts are given).
class LastValuePredictor final : public Predictor {
 public:
  LastValuePredictor(uint32_t vocab, uint32_t context, std::vector<uint64_t> counts = {});

  uint32_t vocab() const override { return vocab_; }
  uint32_t context_length() const override { return context_; }
  PredictorKind kind() const override { return PredictorKind::last_value; }
  void scores(const Context& ctx, std::span<double> out) const override;

  std::span<const uint64_t> counts() const { return counts_; }

 private:
  uint32_t vocab_, context_;
  std::vector<uint64_t> counts_;
};

std::unique_ptr<Predictor> baseline_last_value(uint32_t vocab, uint32_t context, std::vector<uint64_t> counts = {});
std::unique_ptr<Predictor> baseline_frequency(std::vector<uint64_t> counts, uint32_t context);

std::vector<uint64_t> token_counts(std::span<const uint32_t> tokens, uint32_t vocab);

}  // namespace llmcomp
