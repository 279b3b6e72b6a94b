#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llmcomp/field.hpp"
#include "llmcomp/layout.hpp"
#include "llmcomp/model.hpp"
#include "llmcomp/predictor.hpp"

namespace llmcomp {

enum class SweepAxis { topk, vocab, context, sampling, sampling_ratio, layout, model_size };

SweepAxis parse_sweep_axis(std::string_view s);
std::string_view to_string(SweepAxis axis);

struct DatasetSpec {
  SyntheticKind kind = SyntheticKind::smooth_advection;
  Dims dims{4, 32, 32};
  uint64_t seed = 1;
  Precision precision = Precision::f32;
  std::optional<std::filesystem::path> file;  // raw field instead of a synthetic one
};

// One sweep point's full configuration.
struct PointConfig {
  uint32_t vocab = 1024;
  uint32_t topk = 8;
  uint32_t context = 32;
  LayoutKind layout = LayoutKind::zorder;
  PredictorKind predictor = PredictorKind::last_value;
  ModelConfig model{};             // vocab/context are overwritten from the point
  TrainingConfig training{};
};

struct SweepSpec {
  SweepAxis axis = SweepAxis::topk;
  std::vector<std::string> values;  // textual axis values, e.g. "8", "row", "2x64x4"
  double epsilon = 1e-3;
  DatasetSpec dataset;
  PointConfig base;

  // Applies one axis value to the base configuration.
  PointConfig point(std::string_view value) const;
  void validate() const;
};

SweepSpec parse_sweep_spec(std::string_view json);
SweepSpec load_sweep_spec(const std::filesystem::path& path);

struct ReportRecord {
  std::string axis;
  std::string value;
  double epsilon = 0.0;
  double accuracy = 0.0;  // fraction of non-prefix positions with rank < k
  double ratio = 0.0;
  double bitrate = 0.0;
  double psnr = 0.0;
  double max_rel_error = 0.0;
  uint64_t archive_bytes = 0;
  uint64_t header_bytes = 0;
  uint64_t quantizer_bytes = 0;
  uint64_t predictor_bytes = 0;
  uint64_t prefix_bytes = 0;
  uint64_t rank_bytes = 0;
  uint64_t correction_bytes = 0;
  uint64_t residual_bytes = 0;
  uint64_t corrections = 0;
  uint64_t residuals = 0;
  double rank_entropy_bits = 0.0;  // order-0 entropy of the rank stream, total bits
  double train_seconds = 0.0;
  double compress_seconds = 0.0;

  bool operator==(const ReportRecord&) const = default;
};

using Report = std::vector<ReportRecord>;

// Runs compress + decompress + verify per value with identical seeds.
// Throws bound_violation naming the point if any verify fails. `threads`
// points run concurrently; 0 reads LLMCOMP_THREADS (default 1).
Report run_sweep(const SweepSpec& spec, unsigned threads = 0);

Field load_dataset(const DatasetSpec& dataset);

std::string report_to_csv(const Report& report);
std::string report_to_json(const Report& report);
Report report_from_csv(std::string_view csv);
Report report_from_json(std::string_view json);

// Format chosen by extension: ".json" writes JSON, anything else CSV.
void write_report(const Report& report, const std::filesystem::path& path);

unsigned default_thread_count();

}  // namespace llmcomp
