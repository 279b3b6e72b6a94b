#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "llmcomp/archive.hpp"
#include "llmcomp/field.hpp"
#include "llmcomp/layout.hpp"
#include "llmcomp/predictor.hpp"
#include "llmcomp/quant.hpp"

namespace llmcomp {

struct Correction {
  uint64_t position = 0;  // stream index in [C, L)
  uint32_t token = 0;
  bool operator==(const Correction&) const = default;
};

// One symbol per non-prefix position: the rank of the true token among the
// predictor's top k, or k (escape) with the token moved to `corrections`.
struct RankCoding {
  std::vector<uint32_t> ranks;
  std::vector<Correction> corrections;
};

RankCoding encode_ranks(std::span<const uint32_t> tokens, std::span<const Coord> coords, const Predictor& predictor,
                        uint32_t k);

// Rebuilds the full token stream autoregressively from the C prefix tokens.
// Every correction must be consumed at exactly its recorded position.
std::vector<uint32_t> decode_ranks(std::span<const uint32_t> prefix, std::span<const uint32_t> ranks,
                                   std::span<const Correction> corrections, std::span<const Coord> coords,
                                   const Predictor& predictor, uint32_t k);

// Reorders the rank stream (positions C..L-1) so each (x, y) cell's symbols
// are contiguous in ascending t, then differences consecutive symbols within
// a cell. The first symbol of each cell is kept absolute.
std::vector<int32_t> delta_encode_temporal(std::span<const uint32_t> ranks, Dims dims, LayoutKind layout,
                                           uint32_t context);
std::vector<uint32_t> delta_decode_temporal(std::span<const int32_t> deltas, Dims dims, LayoutKind layout,
                                            uint32_t context);

Bytes encode_rank_section(std::span<const uint32_t> ranks, Dims dims, LayoutKind layout, uint32_t context,
                          uint32_t k);
std::vector<uint32_t> decode_rank_section(std::span<const uint8_t> bytes, Dims dims, LayoutKind layout,
                                          uint32_t context, uint32_t k);

// Position gaps and tokens share one range-coded stream with separate models.
Bytes encode_corrections(std::span<const Correction> corrections, uint32_t context, uint32_t vocab);
std::vector<Correction> decode_corrections(std::span<const uint8_t> bytes, size_t count, uint32_t context,
                                           uint32_t vocab, uint64_t length);

Bytes encode_residuals(std::span<const int64_t> residuals);
std::vector<int64_t> decode_residuals(std::span<const uint8_t> bytes, size_t count);

// Fixed-width packing at bit_width(V - 1) bits per token, LSB first.
Bytes pack_tokens(std::span<const uint32_t> tokens, uint32_t vocab);
std::vector<uint32_t> unpack_tokens(std::span<const uint8_t> bytes, size_t count, uint32_t vocab);

struct CompressOptions {
  double epsilon = 1e-3;
  uint32_t vocab = 1024;
  uint32_t topk = 8;
  LayoutKind layout = LayoutKind::zorder;
  LloydMaxOptions fit{};
};

// Quantizer tolerance for a field under relative bound epsilon, derived only
// from values the archive header records.
double working_tolerance(double epsilon, double vmin, double vmax, Precision precision);

struct Tokenized {
  QuantizerModel quantizer;
  QuantizedField stream;
};

Tokenized tokenize(const Field& field, const CompressOptions& options);

// Baseline predictors whose state is derived from the token stream and
// stored in the archive.
std::unique_ptr<Predictor> make_baseline(PredictorKind kind, std::span<const uint32_t> tokens, uint32_t vocab,
                                         uint32_t context);

struct CompressResult {
  Archive archive;
  std::vector<uint32_t> tokens;  // stream order, as encoded
  std::vector<uint32_t> ranks;
  size_t corrections = 0;
  size_t residuals = 0;
};

CompressResult compress(const Field& field, const Tokenized& tokenized, const CompressOptions& options,
                        const Predictor& predictor);
CompressResult compress(const Field& field, const CompressOptions& options, const Predictor& predictor);

struct Decoded {
  QuantizerModel quantizer;
  std::vector<uint32_t> tokens;
  std::vector<uint32_t> ranks;
  std::vector<int64_t> residuals;
};

// `predictor` is required for transformer and external predictors and must
// match the header's kind, V, C and state hash. Baseline archives carry
// their own predictor state.
Decoded decompress_tokens(const Archive& archive, const Predictor* predictor = nullptr);
Field decompress(const Archive& archive, const Predictor* predictor = nullptr);

}  // namespace llmcomp
