#include "llmcomp/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "llmcomp/entropy.hpp"
#include "llmcomp/error.hpp"

namespace llmcomp {

namespace {

Context context_at(std::span<const uint32_t> tokens, std::span<const Coord> coords, size_t p, uint32_t c) {
  return Context{tokens.subspan(p - c, c), coords.subspan(p - c, size_t{c} + 1)};
}

void check_k(uint32_t k, uint32_t vocab) {
  if (k == 0 || k > vocab)
    fail(ErrorKind::usage, "top-k must be in [1, V], got k=" + std::to_string(k) + " V=" + std::to_string(vocab));
}

// Stream positions in (x, y)-major, t-minor order, skipping the prefix.
std::vector<size_t> temporal_order(Dims dims, LayoutKind layout, uint32_t context) {
  const LinearIndexMap map(dims.m, dims.n, layout);
  const size_t plane = dims.plane();
  std::vector<size_t> order;
  order.reserve(dims.count() - std::min<size_t>(context, dims.count()));
  for (size_t cell = 0; cell < plane; ++cell)
    for (size_t t = 0; t < dims.t; ++t) {
      const size_t p = t * plane + map.rank()[cell];
      if (p >= context) order.push_back(p);
    }
  return order;
}

Bytes encode_counts(std::span<const uint64_t> counts) {
  if (counts.empty()) return {};
  RangeEncoder enc;
  AdaptiveIntegerCoder coder;
  for (uint64_t c : counts) coder.encode(enc, c);
  return enc.finish();
}

std::vector<uint64_t> decode_counts(std::span<const uint8_t> bytes, uint32_t vocab) {
  if (bytes.empty()) return {};
  RangeDecoder dec(bytes);
  AdaptiveIntegerCoder coder;
  std::vector<uint64_t> counts(vocab);
  for (auto& c : counts) c = coder.decode(dec);
  dec.expect_end();
  return counts;
}

Bytes predictor_state(const Predictor& predictor) {
  if (const auto* p = dynamic_cast<const LastValuePredictor*>(&predictor)) return encode_counts(p->counts());
  if (const auto* p = dynamic_cast<const FrequencyPredictor*>(&predictor)) return encode_counts(p->counts());
  return {};
}

}  // namespace

RankCoding encode_ranks(std::span<const uint32_t> tokens, std::span<const Coord> coords, const Predictor& predictor,
                        uint32_t k) {
  const uint32_t c = predictor.context_length();
  check_k(k, predictor.vocab());
  if (coords.size() != tokens.size()) fail(ErrorKind::usage, "token and coordinate streams differ in length");
  if (tokens.size() <= c) fail(ErrorKind::usage, "stream must be longer than the context length");
  RankCoding out;
  out.ranks.reserve(tokens.size() - c);
  std::vector<double> scores;
  std::vector<uint32_t> ranked;
  for (size_t p = c; p < tokens.size(); ++p) {
    predict_topk(predictor, context_at(tokens, coords, p, c), k, scores, ranked);
    const auto hit = std::find(ranked.begin(), ranked.end(), tokens[p]);
    if (hit != ranked.end()) {
      out.ranks.push_back(static_cast<uint32_t>(hit - ranked.begin()));
    } else {
      out.ranks.push_back(k);
      out.corrections.push_back({p, tokens[p]});
    }
  }
  return out;
}

std::vector<uint32_t> decode_ranks(std::span<const uint32_t> prefix, std::span<const uint32_t> ranks,
                                   std::span<const Correction> corrections, std::span<const Coord> coords,
                                   const Predictor& predictor, uint32_t k) {
  const uint32_t c = predictor.context_length();
  check_k(k, predictor.vocab());
  if (prefix.size() != c) fail(ErrorKind::corruption, "prefix does not hold C tokens");
  const size_t length = prefix.size() + ranks.size();
  if (coords.size() != length) fail(ErrorKind::corruption, "rank stream length does not match the field");
  std::vector<uint32_t> tokens(prefix.begin(), prefix.end());
  tokens.reserve(length);
  std::vector<double> scores;
  std::vector<uint32_t> ranked;
  size_t next = 0;
  for (size_t p = c; p < length; ++p) {
    const uint32_t symbol = ranks[p - c];
    if (symbol < k) {
      predict_topk(predictor, context_at(tokens, coords, p, c), k, scores, ranked);
      tokens.push_back(ranked[symbol]);
    } else if (symbol == k) {
      if (next == corrections.size()) fail(ErrorKind::corruption, "correction set underrun at position " + std::to_string(p));
      if (corrections[next].position != p)
        fail(ErrorKind::corruption, "correction recorded for position " + std::to_string(corrections[next].position) +
                                        ", escape found at " + std::to_string(p));
      if (corrections[next].token >= predictor.vocab()) fail(ErrorKind::corruption, "correction token outside vocabulary");
      tokens.push_back(corrections[next++].token);
    } else {
      fail(ErrorKind::corruption, "rank symbol " + std::to_string(symbol) + " exceeds k at position " + std::to_string(p));
    }
  }
  if (next != corrections.size()) fail(ErrorKind::corruption, "correction set overrun");
  return tokens;
}

std::vector<int32_t> delta_encode_temporal(std::span<const uint32_t> ranks, Dims dims, LayoutKind layout,
                                           uint32_t context) {
  const auto order = temporal_order(dims, layout, context);
  if (order.size() != ranks.size()) fail(ErrorKind::usage, "rank stream length does not match dims and context");
  std::vector<int32_t> out(ranks.size());
  const size_t plane = dims.plane();
  size_t i = 0;
  int64_t prev = 0;
  size_t prev_cell = SIZE_MAX;
  for (size_t p : order) {
    const size_t cell = p % plane;
    const int64_t r = ranks[p - context];
    out[i++] = static_cast<int32_t>(cell == prev_cell ? r - prev : r);
    prev = r;
    prev_cell = cell;
  }
  return out;
}

std::vector<uint32_t> delta_decode_temporal(std::span<const int32_t> deltas, Dims dims, LayoutKind layout,
                                            uint32_t context) {
  const auto order = temporal_order(dims, layout, context);
  if (order.size() != deltas.size()) fail(ErrorKind::corruption, "delta stream length does not match dims and context");
  std::vector<uint32_t> out(deltas.size());
  const size_t plane = dims.plane();
  size_t i = 0;
  int64_t prev = 0;
  size_t prev_cell = SIZE_MAX;
  for (size_t p : order) {
    const size_t cell = p % plane;
    const int64_t r = cell == prev_cell ? prev + deltas[i] : deltas[i];
    ++i;
    if (r < 0 || r > UINT32_MAX) fail(ErrorKind::corruption, "delta stream decodes to a negative rank");
    out[p - context] = static_cast<uint32_t>(r);
    prev = r;
    prev_cell = cell;
  }
  return out;
}

Bytes encode_rank_section(std::span<const uint32_t> ranks, Dims dims, LayoutKind layout, uint32_t context,
                          uint32_t k) {
  const auto deltas = delta_encode_temporal(ranks, dims, layout, context);
  std::vector<uint32_t> symbols(deltas.size());
  for (size_t i = 0; i < deltas.size(); ++i) symbols[i] = static_cast<uint32_t>(zigzag(deltas[i]));
  return entropy_encode(symbols, 2 * k + 1);
}

std::vector<uint32_t> decode_rank_section(std::span<const uint8_t> bytes, Dims dims, LayoutKind layout,
                                          uint32_t context, uint32_t k) {
  const size_t count = dims.count() - std::min<size_t>(context, dims.count());
  const auto symbols = entropy_decode(bytes, count, 2 * k + 1);
  std::vector<int32_t> deltas(count);
  for (size_t i = 0; i < count; ++i) deltas[i] = static_cast<int32_t>(unzigzag(symbols[i]));
  return delta_decode_temporal(deltas, dims, layout, context);
}

Bytes encode_corrections(std::span<const Correction> corrections, uint32_t context, uint32_t vocab) {
  if (corrections.empty()) return {};
  RangeEncoder enc;
  AdaptiveIntegerCoder gaps;
  AdaptiveModel tokens(vocab);
  uint64_t prev = uint64_t{context} - 1;
  for (const auto& c : corrections) {
    if (c.position <= prev)
      fail(ErrorKind::usage, "correction positions must be strictly increasing and at least C");
    gaps.encode(enc, c.position - prev - 1);
    tokens.encode(enc, c.token);
    prev = c.position;
  }
  return enc.finish();
}

std::vector<Correction> decode_corrections(std::span<const uint8_t> bytes, size_t count, uint32_t context,
                                           uint32_t vocab, uint64_t length) {
  std::vector<Correction> out;
  if (count == 0) {
    if (!bytes.empty()) fail(ErrorKind::corruption, "correction section has trailing bytes");
    return out;
  }
  RangeDecoder dec(bytes);
  AdaptiveIntegerCoder gaps;
  AdaptiveModel tokens(vocab);
  out.reserve(count);
  uint64_t prev = uint64_t{context} - 1;
  for (size_t i = 0; i < count; ++i) {
    const uint64_t gap = gaps.decode(dec);
    if (gap >= length - prev - 1) fail(ErrorKind::corruption, "correction position past end of stream");
    prev += gap + 1;
    out.push_back({prev, tokens.decode(dec)});
  }
  dec.expect_end();
  return out;
}

Bytes encode_residuals(std::span<const int64_t> residuals) {
  if (residuals.empty()) return {};
  RangeEncoder enc;
  AdaptiveIntegerCoder coder;
  for (int64_t r : residuals) coder.encode(enc, zigzag(r));
  return enc.finish();
}

std::vector<int64_t> decode_residuals(std::span<const uint8_t> bytes, size_t count) {
  std::vector<int64_t> out;
  if (count == 0) {
    if (!bytes.empty()) fail(ErrorKind::corruption, "residual section has trailing bytes");
    return out;
  }
  RangeDecoder dec(bytes);
  AdaptiveIntegerCoder coder;
  out.resize(count);
  for (auto& r : out) r = unzigzag(coder.decode(dec));
  dec.expect_end();
  return out;
}

Bytes pack_tokens(std::span<const uint32_t> tokens, uint32_t vocab) {
  const unsigned width = std::bit_width(vocab - 1);
  Bytes out((tokens.size() * width + 7) / 8, 0);
  size_t bit = 0;
  for (uint32_t t : tokens) {
    if (t >= vocab) fail(ErrorKind::usage, "token outside vocabulary");
    for (unsigned b = 0; b < width; ++b, ++bit)
      if ((t >> b) & 1u) out[bit / 8] |= static_cast<uint8_t>(1u << (bit % 8));
  }
  return out;
}

std::vector<uint32_t> unpack_tokens(std::span<const uint8_t> bytes, size_t count, uint32_t vocab) {
  const unsigned width = std::bit_width(vocab - 1);
  if (bytes.size() != (count * width + 7) / 8) fail(ErrorKind::corruption, "prefix section has the wrong size");
  std::vector<uint32_t> out(count, 0);
  size_t bit = 0;
  for (auto& t : out) {
    for (unsigned b = 0; b < width; ++b, ++bit)
      if ((bytes[bit / 8] >> (bit % 8)) & 1u) t |= 1u << b;
    if (t >= vocab) fail(ErrorKind::corruption, "prefix token outside vocabulary");
  }
  return out;
}

double working_tolerance(double epsilon, double vmin, double vmax, Precision precision) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail(ErrorKind::usage, "error bound must be a positive number");
  return ErrorBound::relative(epsilon, vmin, vmax).working(precision, vmin, vmax);
}

Tokenized tokenize(const Field& field, const CompressOptions& options) {
  if (options.vocab < 2) fail(ErrorKind::usage, "vocabulary size must be at least 2");
  check_k(options.topk, options.vocab);
  const double tol = working_tolerance(options.epsilon, field.vmin(), field.vmax(), field.precision());
  Tokenized out;
  out.quantizer = lloyd_max_fit(field.values(), options.vocab, tol, options.fit);
  out.stream = quantize_field(field, out.quantizer, options.layout);
  return out;
}

std::unique_ptr<Predictor> make_baseline(PredictorKind kind, std::span<const uint32_t> tokens, uint32_t vocab,
                                         uint32_t context) {
  switch (kind) {
    case PredictorKind::last_value: return baseline_last_value(vocab, context, token_counts(tokens, vocab));
    case PredictorKind::frequency: return baseline_frequency(token_counts(tokens, vocab), context);
    default: fail(ErrorKind::usage, "'" + std::string(to_string(kind)) + "' is not a baseline predictor");
  }
}

CompressResult compress(const Field& field, const Tokenized& tokenized, const CompressOptions& options,
                        const Predictor& predictor) {
  const QuantizerModel& q = tokenized.quantizer;
  const uint32_t c = predictor.context_length();
  const size_t length = field.dims().count();
  if (predictor.vocab() != options.vocab || q.vocab != options.vocab)
    fail(ErrorKind::usage, "predictor vocabulary " + std::to_string(predictor.vocab()) + " does not match V=" +
                               std::to_string(options.vocab));
  check_k(options.topk, options.vocab);
  if (c == 0 || c >= length)
    fail(ErrorKind::usage, "context length C=" + std::to_string(c) + " must be in [1, L) for L=" + std::to_string(length));
  const double tol = working_tolerance(options.epsilon, field.vmin(), field.vmax(), field.precision());
  if (q.tolerance != tol) fail(ErrorKind::usage, "quantizer was fitted for a different error bound");
  const auto& tokens = tokenized.stream.tokens;
  if (tokens.size() != length) fail(ErrorKind::usage, "token stream does not match the field");

  CompressResult out;
  RankCoding coding = encode_ranks(tokens, tokenized.stream.coords, predictor, options.topk);

  ArchiveHeader& h = out.archive.header;
  h.dims = field.dims();
  h.precision = field.precision();
  h.layout = options.layout;
  h.predictor = predictor.kind();
  h.epsilon = options.epsilon;
  h.vmin = field.vmin();
  h.vmax = field.vmax();
  h.vocab = options.vocab;
  h.context = c;
  h.topk = options.topk;
  h.predictor_hash = predictor.state_hash();
  h.rank_count = coding.ranks.size();
  h.correction_count = coding.corrections.size();
  h.residual_count = tokenized.stream.residuals.size();

  ByteWriter qw(out.archive.section(Section::quantizer));
  write_quantizer(qw, q);
  out.archive.section(Section::predictor) = predictor_state(predictor);
  out.archive.section(Section::prefix) = pack_tokens(std::span(tokens).first(c), options.vocab);
  out.archive.section(Section::ranks) = encode_rank_section(coding.ranks, h.dims, h.layout, c, h.topk);
  out.archive.section(Section::corrections) = encode_corrections(coding.corrections, c, h.vocab);
  out.archive.section(Section::residuals) = encode_residuals(tokenized.stream.residuals);

  // The reconstruction a decoder will produce, checked point by point.
  const auto recon = unflatten(dequantize_stream(tokens, tokenized.stream.residuals, q, tol), h.dims, h.layout,
                               h.precision);
  const double bound = options.epsilon * field.vrange();
  for (size_t i = 0; i < length; ++i) {
    const double err = std::abs(field.values()[i] - recon.values()[i]);
    if (!(err <= bound))
      fail(ErrorKind::bound_violation, "reconstruction error " + std::to_string(err) + " exceeds " +
                                           std::to_string(bound) + " at sample " + std::to_string(i));
  }

  out.tokens = tokens;
  out.ranks = std::move(coding.ranks);
  out.corrections = coding.corrections.size();
  out.residuals = tokenized.stream.residuals.size();
  return out;
}

CompressResult compress(const Field& field, const CompressOptions& options, const Predictor& predictor) {
  return compress(field, tokenize(field, options), options, predictor);
}

Decoded decompress_tokens(const Archive& archive, const Predictor* predictor) {
  const ArchiveHeader& h = archive.header;
  const double tol = working_tolerance(h.epsilon, h.vmin, h.vmax, h.precision);
  Decoded out;
  {
    ByteReader r(archive.section(Section::quantizer));
    out.quantizer = read_quantizer(r, tol);
    if (r.remaining() != 0) fail(ErrorKind::corruption, "quantizer section has trailing bytes");
    if (out.quantizer.vocab != h.vocab) fail(ErrorKind::corruption, "quantizer vocabulary disagrees with the header");
  }

  std::unique_ptr<Predictor> owned;
  if (h.predictor == PredictorKind::last_value) {
    owned = baseline_last_value(h.vocab, h.context, decode_counts(archive.section(Section::predictor), h.vocab));
    predictor = owned.get();
  } else if (h.predictor == PredictorKind::frequency) {
    auto counts = decode_counts(archive.section(Section::predictor), h.vocab);
    if (counts.empty()) fail(ErrorKind::corruption, "frequency predictor state is missing");
    owned = baseline_frequency(std::move(counts), h.context);
    predictor = owned.get();
  } else {
    if (predictor == nullptr)
      fail(ErrorKind::usage, "archive was written with a " + std::string(to_string(h.predictor)) +
                                 " predictor; supply the matching checkpoint");
    if (predictor->kind() != h.predictor) fail(ErrorKind::usage, "supplied predictor kind does not match the archive");
    if (predictor->state_hash() != h.predictor_hash)
      fail(ErrorKind::usage, "checkpoint hash " + to_hex(predictor->state_hash()) + " does not match archive hash " +
                                 to_hex(h.predictor_hash));
  }
  if (predictor->vocab() != h.vocab || predictor->context_length() != h.context)
    fail(ErrorKind::usage, "predictor V/C do not match the archive");

  const auto coords = stream_coords(h.dims, h.layout);
  const auto prefix = unpack_tokens(archive.section(Section::prefix), h.context, h.vocab);
  out.ranks = decode_rank_section(archive.section(Section::ranks), h.dims, h.layout, h.context, h.topk);
  const size_t escapes = static_cast<size_t>(std::count(out.ranks.begin(), out.ranks.end(), h.topk));
  if (escapes != h.correction_count) fail(ErrorKind::corruption, "escape count does not match the correction set size");
  const auto corrections =
      decode_corrections(archive.section(Section::corrections), h.correction_count, h.context, h.vocab, h.dims.count());
  out.residuals = decode_residuals(archive.section(Section::residuals), h.residual_count);
  out.tokens = decode_ranks(prefix, out.ranks, corrections, coords, *predictor, h.topk);
  return out;
}

Field decompress(const Archive& archive, const Predictor* predictor) {
  const ArchiveHeader& h = archive.header;
  const Decoded d = decompress_tokens(archive, predictor);
  const double tol = working_tolerance(h.epsilon, h.vmin, h.vmax, h.precision);
  return unflatten(dequantize_stream(d.tokens, d.residuals, d.quantizer, tol), h.dims, h.layout, h.precision);
}

}  // namespace llmcomp
