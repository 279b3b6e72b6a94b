#include "llmcomp/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <sstream>
#include <thread>
#include <variant>

#include "json.hpp"

#include "llmcomp/codec.hpp"
#include "llmcomp/entropy.hpp"
#include "llmcomp/error.hpp"
#include "llmcomp/metrics.hpp"

namespace llmcomp {

using nlohmann::json;

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::topk: return "topk";
    case SweepAxis::vocab: return "vocab";
    case SweepAxis::context: return "context";
    case SweepAxis::sampling: return "sampling";
    case SweepAxis::sampling_ratio: return "sampling_ratio";
    case SweepAxis::layout: return "layout";
    case SweepAxis::model_size: return "model_size";
  }
  return "unknown";
}

SweepAxis parse_sweep_axis(std::string_view s) {
  for (auto a : {SweepAxis::topk, SweepAxis::vocab, SweepAxis::context, SweepAxis::sampling, SweepAxis::sampling_ratio,
                 SweepAxis::layout, SweepAxis::model_size})
    if (to_string(a) == s) return a;
  fail(ErrorKind::usage, "unknown sweep axis '" + std::string(s) + "'");
}

namespace {

uint32_t parse_u32(std::string_view s, std::string_view what) {
  uint32_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size())
    fail(ErrorKind::usage, std::string(what) + " value '" + std::string(s) + "' is not an unsigned integer");
  return v;
}

double parse_double(std::string_view s, std::string_view what) {
  double v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size())
    fail(ErrorKind::malformed_input, std::string(what) + " value '" + std::string(s) + "' is not a number");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

// "LxDxH": layers, hidden width, heads.
void apply_model_size(ModelConfig& m, std::string_view s) {
  const auto a = s.find('x');
  const auto b = a == std::string_view::npos ? a : s.find('x', a + 1);
  if (b == std::string_view::npos) fail(ErrorKind::usage, "model size '" + std::string(s) + "' must look like 2x64x4");
  m.layers = parse_u32(s.substr(0, a), "layers");
  m.hidden = parse_u32(s.substr(a + 1, b - a - 1), "hidden");
  m.heads = parse_u32(s.substr(b + 1), "heads");
}

std::string value_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_unsigned() || v.is_number_integer()) return std::to_string(v.get<int64_t>());
  if (v.is_number()) return format_double(v.get<double>());
  fail(ErrorKind::malformed_input, "sweep values must be numbers or strings");
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ReportRecord run_point(const SweepSpec& spec, const std::string& value, const Field& field) {
  const PointConfig pc = spec.point(value);
  ReportRecord rec;
  rec.axis = std::string(to_string(spec.axis));
  rec.value = value;
  rec.epsilon = spec.epsilon;

  CompressOptions options;
  options.epsilon = spec.epsilon;
  options.vocab = pc.vocab;
  options.topk = pc.topk;
  options.layout = pc.layout;
  const Tokenized tokenized = tokenize(field, options);

  std::unique_ptr<Predictor> predictor;
  const auto train_start = std::chrono::steady_clock::now();
  if (pc.predictor == PredictorKind::transformer) {
    ModelConfig mc = pc.model;
    mc.vocab = pc.vocab;
    mc.context = pc.context;
    mc.max_m = std::max(mc.max_m, field.dims().m);
    mc.max_n = std::max(mc.max_n, field.dims().n);
    const TrainResult trained =
        train(tokenized.stream.tokens, tokenized.stream.coords, mc, pc.training, tokenized.quantizer);
    predictor = std::make_unique<TransformerPredictor>(trained.checkpoint);
  } else {
    predictor = make_baseline(pc.predictor, tokenized.stream.tokens, pc.vocab, pc.context);
  }
  rec.train_seconds = seconds_since(train_start);

  const auto compress_start = std::chrono::steady_clock::now();
  const CompressResult result = compress(field, tokenized, options, *predictor);
  rec.compress_seconds = seconds_since(compress_start);

  // Re-verify from the serialized bytes rather than trusting the encoder.
  const Archive archive = parse_archive(serialize_archive(result.archive));
  const Decoded decoded = decompress_tokens(archive, predictor.get());
  const std::string where = "sweep point " + rec.axis + "=" + value;
  if (decoded.tokens != result.tokens) fail(ErrorKind::corruption, where + ": decoded token stream differs");
  const VerifyReport report = verify(field, archive, predictor.get());
  if (!report.within_bound)
    fail(ErrorKind::bound_violation, where + ": max relative error " + format_double(report.errors.max_rel) +
                                         " exceeds " + format_double(spec.epsilon));

  const StorageBreakdown sb = storage_breakdown(archive);
  rec.ratio = report.ratio;
  rec.bitrate = report.bitrate;
  rec.psnr = report.errors.psnr;
  rec.max_rel_error = report.errors.max_rel;
  rec.archive_bytes = archive.size_bytes();
  rec.header_bytes = sb.header;
  rec.quantizer_bytes = sb.quantizer;
  rec.predictor_bytes = sb.predictor;
  rec.prefix_bytes = sb.prefix;
  rec.rank_bytes = sb.ranks;
  rec.correction_bytes = sb.corrections;
  rec.residual_bytes = sb.residuals;
  rec.corrections = result.corrections;
  rec.residuals = result.residuals;
  const auto hits = std::count_if(result.ranks.begin(), result.ranks.end(), [&](uint32_t r) { return r < pc.topk; });
  rec.accuracy = static_cast<double>(hits) / static_cast<double>(result.ranks.size());
  rec.rank_entropy_bits = order0_entropy_bits(result.ranks);
  return rec;
}

using Member = std::variant<std::string ReportRecord::*, double ReportRecord::*, uint64_t ReportRecord::*>;

const std::vector<std::pair<const char*, Member>>& columns() {
  static const std::vector<std::pair<const char*, Member>> cols = {
      {"axis", &ReportRecord::axis},
      {"value", &ReportRecord::value},
      {"epsilon", &ReportRecord::epsilon},
      {"accuracy", &ReportRecord::accuracy},
      {"ratio", &ReportRecord::ratio},
      {"bitrate", &ReportRecord::bitrate},
      {"psnr", &ReportRecord::psnr},
      {"max_rel_error", &ReportRecord::max_rel_error},
      {"archive_bytes", &ReportRecord::archive_bytes},
      {"header_bytes", &ReportRecord::header_bytes},
      {"quantizer_bytes", &ReportRecord::quantizer_bytes},
      {"predictor_bytes", &ReportRecord::predictor_bytes},
      {"prefix_bytes", &ReportRecord::prefix_bytes},
      {"rank_bytes", &ReportRecord::rank_bytes},
      {"correction_bytes", &ReportRecord::correction_bytes},
      {"residual_bytes", &ReportRecord::residual_bytes},
      {"corrections", &ReportRecord::corrections},
      {"residuals", &ReportRecord::residuals},
      {"rank_entropy_bits", &ReportRecord::rank_entropy_bits},
      {"train_seconds", &ReportRecord::train_seconds},
      {"compress_seconds", &ReportRecord::compress_seconds},
  };
  return cols;
}

std::string cell_text(const ReportRecord& r, const Member& m) {
  return std::visit(
      [&](auto ptr) -> std::string {
        using T = std::remove_cvref_t<decltype(r.*ptr)>;
        if constexpr (std::is_same_v<T, std::string>) return r.*ptr;
        else if constexpr (std::is_same_v<T, double>) return format_double(r.*ptr);
        else return std::to_string(r.*ptr);
      },
      m);
}

void set_cell(ReportRecord& r, const Member& m, std::string_view text, const char* name) {
  std::visit(
      [&](auto ptr) {
        using T = std::remove_cvref_t<decltype(r.*ptr)>;
        if constexpr (std::is_same_v<T, std::string>) r.*ptr = std::string(text);
        else if constexpr (std::is_same_v<T, double>) r.*ptr = parse_double(text, name);
        else {
          uint64_t v = 0;
          const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
          if (ec != std::errc() || end != text.data() + text.size())
            fail(ErrorKind::malformed_input, std::string(name) + " value '" + std::string(text) + "' is not an integer");
          r.*ptr = v;
        }
      },
      m);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

}  // namespace

PointConfig SweepSpec::point(std::string_view value) const {
  PointConfig p = base;
  switch (axis) {
    case SweepAxis::topk: p.topk = parse_u32(value, "topk"); break;
    case SweepAxis::vocab: p.vocab = parse_u32(value, "vocab"); break;
    case SweepAxis::context: p.context = parse_u32(value, "context"); break;
    case SweepAxis::sampling: p.training.sampling = parse_sampling(value); break;
    case SweepAxis::sampling_ratio:
      try {
        p.training.sampling_ratio = parse_double(value, "sampling_ratio");
      } catch (const Error& e) {
        fail(ErrorKind::usage, e.what());
      }
      break;
    case SweepAxis::layout: p.layout = parse_layout(value); break;
    case SweepAxis::model_size: apply_model_size(p.model, value); break;
  }
  return p;
}

void SweepSpec::validate() const {
  if (!(epsilon > 0.0)) fail(ErrorKind::usage, "sweep epsilon must be positive");
  for (const auto& v : values) {
    if (v.find_first_of(",\n\"") != std::string::npos)
      fail(ErrorKind::usage, "sweep value '" + v + "' may not contain commas, quotes or newlines");
    const PointConfig p = point(v);
    if (p.vocab < 2) fail(ErrorKind::usage, "vocab must be at least 2");
    if (p.topk == 0 || p.topk > p.vocab)
      fail(ErrorKind::usage, "sweep point " + v + " has k=" + std::to_string(p.topk) + " outside [1, V]");
    if (p.context == 0 || p.context >= dataset.dims.count())
      fail(ErrorKind::usage, "sweep point " + v + " has a context length outside [1, L)");
    if (p.predictor == PredictorKind::transformer) {
      ModelConfig mc = p.model;
      mc.vocab = p.vocab;
      mc.context = p.context;
      mc.validate();
      p.training.validate();
    }
  }
}

SweepSpec parse_sweep_spec(std::string_view text) {
  SweepSpec spec;
  try {
    const json j = json::parse(text);
    spec.axis = parse_sweep_axis(j.at("axis").get<std::string>());
    for (const auto& v : j.at("values")) spec.values.push_back(value_text(v));
    read_opt(j, "epsilon", spec.epsilon);
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      if (d.contains("kind")) spec.dataset.kind = parse_synthetic_kind(d.at("kind").get<std::string>());
      if (d.contains("dims")) {
        const auto dims = d.at("dims").get<std::vector<uint32_t>>();
        if (dims.size() != 3) fail(ErrorKind::usage, "dataset dims must be [T, M, N]");
        spec.dataset.dims = {dims[0], dims[1], dims[2]};
      }
      read_opt(d, "seed", spec.dataset.seed);
      if (d.contains("precision")) spec.dataset.precision = parse_precision(d.at("precision").get<std::string>());
      if (d.contains("file")) spec.dataset.file = d.at("file").get<std::string>();
    }
    if (j.contains("base")) {
      const json& b = j.at("base");
      PointConfig& p = spec.base;
      read_opt(b, "vocab", p.vocab);
      read_opt(b, "topk", p.topk);
      read_opt(b, "context", p.context);
      if (b.contains("layout")) p.layout = parse_layout(b.at("layout").get<std::string>());
      if (b.contains("predictor")) p.predictor = parse_predictor_kind(b.at("predictor").get<std::string>());
      if (b.contains("model_size")) apply_model_size(p.model, b.at("model_size").get<std::string>());
      if (b.contains("sampling")) p.training.sampling = parse_sampling(b.at("sampling").get<std::string>());
      read_opt(b, "sampling_ratio", p.training.sampling_ratio);
      read_opt(b, "steps", p.training.steps);
      read_opt(b, "batch", p.training.batch);
      read_opt(b, "lr", p.training.lr);
      read_opt(b, "alpha", p.training.alpha);
      read_opt(b, "seed", p.training.seed);
      p.training.eval_every = 0;
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::malformed_input, std::string("sweep spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  return parse_sweep_spec(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

Field load_dataset(const DatasetSpec& d) {
  if (d.file) return load_field(*d.file, d.dims, d.precision);
  return gen_synthetic(d.kind, d.dims, d.seed, SyntheticOptions{d.precision});
}

unsigned default_thread_count() {
  if (const char* env = std::getenv("LLMCOMP_THREADS")) {
    unsigned v = 0;
    const std::string_view s(env);
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && end == s.data() + s.size() && v > 0) return v;
    fail(ErrorKind::usage, "LLMCOMP_THREADS must be a positive integer");
  }
  return 1;
}

Report run_sweep(const SweepSpec& spec, unsigned threads) {
  spec.validate();
  Report report(spec.values.size());
  if (spec.values.empty()) return report;
  const Field field = load_dataset(spec.dataset);
  if (threads == 0) threads = default_thread_count();
  threads = std::min<unsigned>(threads, static_cast<unsigned>(spec.values.size()));

  std::vector<std::exception_ptr> errors(spec.values.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i; (i = next.fetch_add(1)) < spec.values.size();) {
      try {
        report[i] = run_point(spec, spec.values[i], field);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return report;
}

std::string report_to_csv(const Report& report) {
  std::ostringstream out;
  const auto& cols = columns();
  for (size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c].first;
  out << '\n';
  for (const auto& r : report) {
    for (size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cell_text(r, cols[c].second);
    out << '\n';
  }
  return out.str();
}

Report report_from_csv(std::string_view csv) {
  const auto& cols = columns();
  auto lines = split(csv, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) fail(ErrorKind::malformed_input, "report CSV has no header");
  const auto header = split(lines[0], ',');
  if (header.size() != cols.size()) fail(ErrorKind::malformed_input, "report CSV header has the wrong column count");
  for (size_t c = 0; c < cols.size(); ++c)
    if (header[c] != cols[c].first) fail(ErrorKind::malformed_input, "unexpected report column '" + std::string(header[c]) + "'");
  Report report;
  for (size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != cols.size()) fail(ErrorKind::malformed_input, "report CSV row " + std::to_string(i) + " is ragged");
    ReportRecord r;
    for (size_t c = 0; c < cols.size(); ++c) set_cell(r, cols[c].second, cells[c], cols[c].first);
    report.push_back(std::move(r));
  }
  return report;
}

std::string report_to_json(const Report& report) {
  json arr = json::array();
  for (const auto& r : report) {
    json obj = json::object();
    for (const auto& [name, member] : columns()) {
      std::visit(
          [&](auto ptr) {
            using T = std::remove_cvref_t<decltype(r.*ptr)>;
            if constexpr (std::is_same_v<T, double>) {
              if (std::isfinite(r.*ptr)) obj[name] = r.*ptr;
              else obj[name] = format_double(r.*ptr);
            } else {
              obj[name] = r.*ptr;
            }
          },
          member);
    }
    arr.push_back(std::move(obj));
  }
  return arr.dump(2) + "\n";
}

Report report_from_json(std::string_view text) {
  Report report;
  try {
    const json arr = json::parse(text);
    if (!arr.is_array()) fail(ErrorKind::malformed_input, "report JSON must be an array");
    for (const auto& obj : arr) {
      ReportRecord r;
      for (const auto& [name, member] : columns()) {
        const json& v = obj.at(name);
        std::visit(
            [&](auto ptr) {
              using T = std::remove_cvref_t<decltype(r.*ptr)>;
              if constexpr (std::is_same_v<T, double>) {
                r.*ptr = v.is_string() ? parse_double(v.get<std::string>(), name) : v.get<double>();
              } else {
                r.*ptr = v.get<T>();
              }
            },
            member);
      }
      report.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::malformed_input, std::string("report JSON: ") + e.what());
  }
  return report;
}

void write_report(const Report& report, const std::filesystem::path& path) {
  const std::string text = path.extension() == ".json" ? report_to_json(report) : report_to_csv(report);
  write_file_atomic(path, std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

}  // namespace llmcomp
