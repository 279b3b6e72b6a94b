#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "llmcomp/error.hpp"
#include "llmcomp/io.hpp"
#include "llmcomp/predictor.hpp"
#include "llmcomp/quant.hpp"
#include "llmcomp/rng.hpp"

namespace llmcomp {

struct ModelConfig {
  uint32_t layers = 2;
  uint32_t hidden = 64;
  uint32_t heads = 4;
  uint32_t vocab = 1024;
  uint32_t context = 32;
  uint32_t max_m = 64;  // row embedding table size
  uint32_t max_n = 64;  // column embedding table size
  uint32_t max_t = 64;  // temporal table size; time index is t mod max_t

  // 12 layers, hidden 768, 12 heads of width 64.
  static ModelConfig reference_scale(uint32_t vocab = 1024, uint32_t context = 32);

  uint32_t head_dim() const { return hidden / heads; }
  size_t parameter_count() const;
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

enum class SamplingKind : uint8_t { random = 0, uniform = 1, target_aware = 2 };
SamplingKind parse_sampling(std::string_view s);  // "random", "uniform", "target-aware"
std::string_view to_string(SamplingKind kind);

enum class OptimizerKind : uint8_t { sgd = 0, adam = 1 };
OptimizerKind parse_optimizer(std::string_view s);

struct TrainingConfig {
  double alpha = 0.1;  // weight of the midpoint MSE term
  double lr = 1e-3;
  uint32_t steps = 1000;
  uint32_t batch = 16;
  SamplingKind sampling = SamplingKind::target_aware;
  double sampling_ratio = 0.01;  // fraction of windows forming the training pool
  uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::adam;
  double grad_clip = 1.0;  // global L2 norm; 0 disables
  double init_std = 0.02;
  uint32_t eval_every = 100;
  uint32_t eval_windows = 256;
  uint32_t eval_topk = 1;

  void validate() const;
};

// Target positions p (window = tokens [p - C, p)) drawn round-robin over
// target-token buckets, uniformly within a bucket.
std::vector<size_t> target_aware_sample(std::span<const uint32_t> tokens, uint32_t context, size_t count, Rng& rng);
std::vector<size_t> random_sample(std::span<const uint32_t> tokens, uint32_t context, size_t count, Rng& rng);
std::vector<size_t> uniform_sample(std::span<const uint32_t> tokens, uint32_t context, size_t count);

struct TensorInfo {
  std::string name;
  size_t offset = 0;
  size_t size = 0;
};

// Activation cache for one context window; reusable across calls.
struct Workspace {
  struct Layer {
    std::vector<double> x_in, ln1_hat, ln1_rstd, a, qkv, att, o, x_mid, ln2_hat, ln2_rstd, c, u, g;
  };
  std::vector<Layer> layers;
  std::vector<double> x_out, lnf_hat, f, logits, probs;
  double lnf_rstd = 0.0;
  // Backward scratch.
  std::vector<double> dx, dtmp, dqkv, dwide, dlogits;
};

struct LossParts {
  double ce = 0.0;
  double mse = 0.0;
  double total = 0.0;
};

// Decoder-only transformer over C context slots plus one query slot that
// carries the target position. Pre-norm blocks, causal attention, tanh-GELU
// MLP, final norm and a linear head. All arithmetic is double precision and
// single-threaded with a fixed accumulation order.
class Transformer {
 public:
  explicit Transformer(ModelConfig config);  // all parameters zero

  // Gaussian(0, std) weights, unit norm gains, zero biases and zero head.
  static Transformer initialized(const ModelConfig& config, uint64_t seed, double std = 0.02);

  const ModelConfig& config() const { return config_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& tensor(std::string_view name) const;

  // Vocabulary logits for the query slot.
  void logits(const Context& ctx, std::span<double> out, Workspace& ws) const;
  std::vector<double> probabilities(const Context& ctx) const;

  // Hybrid loss for one window; adds d(loss)/d(params) into `grad`.
  // `midpoints` are the per-token bin midpoints scaled to [0, 1].
  LossParts loss_and_gradient(const Context& ctx, uint32_t target, std::span<const double> midpoints, double alpha,
                              std::span<double> grad, Workspace& ws) const;

  std::unique_ptr<Workspace> make_workspace() const;

 private:
  void forward(const Context& ctx, Workspace& ws) const;
  void check_context(const Context& ctx) const;

  struct LayerOffsets {
    size_t ln1_g, ln1_b, w_qkv, b_qkv, w_out, b_out, ln2_g, ln2_b, w_fc, b_fc, w_proj, b_proj;
  };

  ModelConfig config_;
  std::vector<double> params_;
  std::vector<TensorInfo> tensors_;
  size_t tok_ = 0, query_ = 0, row_ = 0, col_ = 0, time_ = 0;
  size_t lnf_g_ = 0, lnf_b_ = 0, head_w_ = 0, head_b_ = 0;
  std::vector<LayerOffsets> layer_off_;
};

// L_CE + alpha * 0.5 * (sum_v p[v] * mid[v] - mid[target])^2.
LossParts hybrid_loss(std::span<const double> p, uint32_t target, std::span<const double> midpoints, double alpha);

// Bin midpoints of a quantizer normalised by its value range.
std::vector<double> normalized_midpoints(const QuantizerModel& quantizer);

struct Checkpoint {
  ModelConfig config;
  std::vector<float> parameters;
  Digest hash{};

  bool operator==(const Checkpoint&) const = default;
};

class ConfigMismatchError : public Error {
 public:
  explicit ConfigMismatchError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

Checkpoint make_checkpoint(const Transformer& model);
Transformer from_checkpoint(const Checkpoint& checkpoint);

Bytes serialize_checkpoint(const Checkpoint& checkpoint);
// Verifies the trailing content hash; throws corruption on mismatch.
Checkpoint parse_checkpoint(std::span<const uint8_t> bytes);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::optional<ModelConfig>& expected = std::nullopt);

struct TrainLogEntry {
  uint32_t step = 0;
  double ce = 0.0;   // batch means
  double mse = 0.0;
  double total = 0.0;
  std::optional<double> heldout_accuracy;
  std::optional<double> heldout_argmax_mse;  // 0.5 * (mid[argmax p] - mid[target])^2
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainLogEntry> log;
  double heldout_accuracy = 0.0;
  size_t pool_size = 0;
};

TrainResult train(std::span<const uint32_t> tokens, std::span<const Coord> coords, const ModelConfig& model_config,
                  const TrainingConfig& training, const QuantizerModel& quantizer);

// Fraction of windows whose target is in the model's top-k.
double topk_accuracy(const Transformer& model, std::span<const uint32_t> tokens, std::span<const Coord> coords,
                     std::span<const size_t> positions, uint32_t k);

class TransformerPredictor final : public Predictor {
 public:
  explicit TransformerPredictor(const Checkpoint& checkpoint);

  uint32_t vocab() const override { return model_.config().vocab; }
  uint32_t context_length() const override { return model_.config().context; }
  PredictorKind kind() const override { return PredictorKind::transformer; }
  Digest state_hash() const override { return hash_; }
  void scores(const Context& ctx, std::span<double> out) const override;

  const Transformer& model() const { return model_; }

 private:
  Transformer model_;
  Digest hash_;
};

}  // namespace llmcomp
