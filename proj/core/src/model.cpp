#include "llmcomp/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace llmcomp {

namespace {

constexpr double ln_eps = 1e-5;
constexpr double gelu_k = 0.79788456080286535588;  // sqrt(2 / pi)
constexpr char ckpt_magic[8] = {'L', 'L', 'M', 'C', 'K', 'P', 'T', '1'};

void layer_norm_fwd(const double* x, const double* g, const double* b, double* y, double* hat, double& rstd,
                    size_t d) {
  double mean = 0.0;
  for (size_t i = 0; i < d; ++i) mean += x[i];
  mean /= static_cast<double>(d);
  double var = 0.0;
  for (size_t i = 0; i < d; ++i) {
    const double c = x[i] - mean;
    var += c * c;
  }
  var /= static_cast<double>(d);
  rstd = 1.0 / std::sqrt(var + ln_eps);
  for (size_t i = 0; i < d; ++i) {
    hat[i] = (x[i] - mean) * rstd;
    y[i] = g[i] * hat[i] + b[i];
  }
}

// Accumulates into dx, dg, db.
void layer_norm_bwd(const double* dy, const double* hat, double rstd, const double* g, double* dg, double* db,
                    double* dx, size_t d) {
  double m1 = 0.0, m2 = 0.0;
  for (size_t i = 0; i < d; ++i) {
    const double dh = dy[i] * g[i];
    m1 += dh;
    m2 += dh * hat[i];
    dg[i] += dy[i] * hat[i];
    db[i] += dy[i];
  }
  m1 /= static_cast<double>(d);
  m2 /= static_cast<double>(d);
  for (size_t i = 0; i < d; ++i) dx[i] += rstd * (dy[i] * g[i] - m1 - hat[i] * m2);
}

// y[rows x out] = x[rows x in] * w[in x out] + b
void linear_fwd(const double* x, const double* w, const double* b, double* y, size_t rows, size_t in, size_t out) {
  for (size_t r = 0; r < rows; ++r) {
    double* yr = y + r * out;
    std::copy(b, b + out, yr);
    const double* xr = x + r * in;
    for (size_t k = 0; k < in; ++k) {
      const double xv = xr[k];
      const double* wk = w + k * out;
      for (size_t o = 0; o < out; ++o) yr[o] += xv * wk[o];
    }
  }
}

// dx = dy * w^T (overwritten); dw += x^T * dy; db += column sums of dy.
void linear_bwd(const double* x, const double* w, const double* dy, double* dx, double* dw, double* db, size_t rows,
                size_t in, size_t out) {
  for (size_t r = 0; r < rows; ++r) {
    const double* dyr = dy + r * out;
    const double* xr = x + r * in;
    double* dxr = dx + r * in;
    for (size_t o = 0; o < out; ++o) db[o] += dyr[o];
    for (size_t k = 0; k < in; ++k) {
      const double* wk = w + k * out;
      double* dwk = dw + k * out;
      const double xv = xr[k];
      double acc = 0.0;
      for (size_t o = 0; o < out; ++o) {
        acc += dyr[o] * wk[o];
        dwk[o] += xv * dyr[o];
      }
      dxr[k] = acc;
    }
  }
}

void softmax(std::span<const double> z, std::span<double> p) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
}

}  // namespace

ModelConfig ModelConfig::reference_scale(uint32_t vocab, uint32_t context) {
  ModelConfig c;
  c.layers = 12;
  c.hidden = 768;
  c.heads = 12;
  c.vocab = vocab;
  c.context = context;
  c.max_m = 1024;
  c.max_n = 2048;
  c.max_t = 8784;
  return c;
}

size_t ModelConfig::parameter_count() const {
  const size_t d = hidden;
  const size_t per_layer = 2 * d + (d * 3 * d + 3 * d) + (d * d + d) + 2 * d + (d * 4 * d + 4 * d) + (4 * d * d + d);
  return size_t{vocab} * d + d + size_t{max_m} * d + size_t{max_n} * d + size_t{max_t} * d + layers * per_layer + 2 * d +
         d * vocab + vocab;
}

void ModelConfig::validate() const {
  if (layers == 0) fail(ErrorKind::usage, "model needs at least one layer");
  if (hidden == 0 || heads == 0 || hidden % heads != 0)
    fail(ErrorKind::usage, "hidden size must be a positive multiple of the head count");
  if (vocab < 2) fail(ErrorKind::usage, "vocabulary size must be at least 2");
  if (context < 1) fail(ErrorKind::usage, "context length must be at least 1");
  if (max_m == 0 || max_n == 0 || max_t == 0) fail(ErrorKind::usage, "embedding tables must be nonempty");
}

SamplingKind parse_sampling(std::string_view s) {
  if (s == "random") return SamplingKind::random;
  if (s == "uniform") return SamplingKind::uniform;
  if (s == "target-aware") return SamplingKind::target_aware;
  fail(ErrorKind::usage, "unknown sampling strategy '" + std::string(s) + "'");
}

std::string_view to_string(SamplingKind kind) {
  switch (kind) {
    case SamplingKind::random: return "random";
    case SamplingKind::uniform: return "uniform";
    case SamplingKind::target_aware: return "target-aware";
  }
  return "unknown";
}

OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  fail(ErrorKind::usage, "unknown optimizer '" + std::string(s) + "'");
}

void TrainingConfig::validate() const {
  if (!(alpha >= 0.0)) fail(ErrorKind::usage, "alpha must be non-negative");
  if (!(lr > 0.0)) fail(ErrorKind::usage, "learning rate must be positive");
  if (batch == 0) fail(ErrorKind::usage, "batch size must be positive");
  if (!(sampling_ratio > 0.0 && sampling_ratio <= 1.0)) fail(ErrorKind::usage, "sampling ratio must be in (0, 1]");
  if (eval_topk == 0) fail(ErrorKind::usage, "evaluation top-k must be positive");
}

namespace {

void check_sampling(std::span<const uint32_t> tokens, uint32_t context) {
  if (tokens.size() <= context)
    fail(ErrorKind::usage, "sequence of " + std::to_string(tokens.size()) + " tokens has no target after a context of " +
                               std::to_string(context));
}

}  // namespace

std::vector<size_t> target_aware_sample(std::span<const uint32_t> tokens, uint32_t context, size_t count, Rng& rng) {
  check_sampling(tokens, context);
  std::vector<std::vector<size_t>> buckets;
  std::vector<size_t> bucket_of;  // token -> bucket index + 1
  for (size_t p = context; p < tokens.size(); ++p) {
    const uint32_t tok = tokens[p];
    if (tok >= bucket_of.size()) bucket_of.resize(tok + 1, 0);
    if (bucket_of[tok] == 0) bucket_of[tok] = 1;  // mark present
  }
  for (auto& b : bucket_of)
    if (b != 0) {
      buckets.emplace_back();
      b = buckets.size();
    }
  for (size_t p = context; p < tokens.size(); ++p) buckets[bucket_of[tokens[p]] - 1].push_back(p);

  std::vector<size_t> out(count);
  const size_t start = rng.below(buckets.size());
  for (size_t i = 0; i < count; ++i) {
    const auto& bucket = buckets[(start + i) % buckets.size()];
    out[i] = bucket[rng.below(bucket.size())];
  }
  return out;
}

std::vector<size_t> random_sample(std::span<const uint32_t> tokens, uint32_t context, size_t count, Rng& rng) {
  check_sampling(tokens, context);
  std::vector<size_t> out(count);
  const size_t span = tokens.size() - context;
  for (auto& p : out) p = context + rng.below(span);
  return out;
}

std::vector<size_t> uniform_sample(std::span<const uint32_t> tokens, uint32_t context, size_t count) {
  check_sampling(tokens, context);
  std::vector<size_t> out(count);
  const size_t span = tokens.size() - context;
  for (size_t i = 0; i < count; ++i) out[i] = context + (i * span) / std::max<size_t>(count, 1);
  return out;
}

Transformer::Transformer(ModelConfig config) : config_(config) {
  config_.validate();
  const size_t d = config_.hidden, V = config_.vocab;
  size_t offset = 0;
  auto add = [&](std::string name, size_t size) {
    tensors_.push_back({std::move(name), offset, size});
    offset += size;
    return tensors_.back().offset;
  };
  tok_ = add("tok_emb", V * d);
  query_ = add("query_emb", d);
  row_ = add("row_emb", size_t{config_.max_m} * d);
  col_ = add("col_emb", size_t{config_.max_n} * d);
  time_ = add("time_emb", size_t{config_.max_t} * d);
  for (uint32_t l = 0; l < config_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerOffsets o{};
    o.ln1_g = add(p + "ln1.g", d);
    o.ln1_b = add(p + "ln1.b", d);
    o.w_qkv = add(p + "attn.w_qkv", d * 3 * d);
    o.b_qkv = add(p + "attn.b_qkv", 3 * d);
    o.w_out = add(p + "attn.w_out", d * d);
    o.b_out = add(p + "attn.b_out", d);
    o.ln2_g = add(p + "ln2.g", d);
    o.ln2_b = add(p + "ln2.b", d);
    o.w_fc = add(p + "mlp.w_fc", d * 4 * d);
    o.b_fc = add(p + "mlp.b_fc", 4 * d);
    o.w_proj = add(p + "mlp.w_proj", 4 * d * d);
    o.b_proj = add(p + "mlp.b_proj", d);
    layer_off_.push_back(o);
  }
  lnf_g_ = add("lnf.g", d);
  lnf_b_ = add("lnf.b", d);
  head_w_ = add("head.w", d * V);
  head_b_ = add("head.b", V);
  params_.assign(offset, 0.0);
}

Transformer Transformer::initialized(const ModelConfig& config, uint64_t seed, double std) {
  Transformer model(config);
  Rng rng(seed);
  for (const auto& t : model.tensors_) {
    auto values = std::span<double>(model.params_).subspan(t.offset, t.size);
    const auto suffix = t.name.substr(t.name.find_last_of('.') + 1);
    if (t.name.starts_with("head.")) continue;
    if (suffix == "g") {
      std::fill(values.begin(), values.end(), 1.0);
    } else if (suffix == "b" || suffix.starts_with("b_")) {
      continue;
    } else {
      for (auto& v : values) v = std * rng.normal();
    }
  }
  return model;
}

const TensorInfo& Transformer::tensor(std::string_view name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return t;
  fail(ErrorKind::usage, "no tensor named '" + std::string(name) + "'");
}

std::unique_ptr<Workspace> Transformer::make_workspace() const {
  auto ws = std::make_unique<Workspace>();
  const size_t S = config_.context + 1, d = config_.hidden, H = config_.heads;
  ws->layers.resize(config_.layers);
  for (auto& L : ws->layers) {
    L.x_in.resize(S * d);
    L.ln1_hat.resize(S * d);
    L.ln1_rstd.resize(S);
    L.a.resize(S * d);
    L.qkv.resize(S * 3 * d);
    L.att.resize(H * S * S);
    L.o.resize(S * d);
    L.x_mid.resize(S * d);
    L.ln2_hat.resize(S * d);
    L.ln2_rstd.resize(S);
    L.c.resize(S * d);
    L.u.resize(S * 4 * d);
    L.g.resize(S * 4 * d);
  }
  ws->x_out.resize(S * d);
  ws->lnf_hat.resize(d);
  ws->f.resize(d);
  ws->logits.resize(config_.vocab);
  ws->probs.resize(config_.vocab);
  ws->dx.resize(S * d);
  ws->dtmp.resize(S * d);
  ws->dqkv.resize(S * 3 * d);
  ws->dwide.resize(S * 4 * d);
  ws->dlogits.resize(config_.vocab);
  return ws;
}

void Transformer::check_context(const Context& ctx) const {
  const uint32_t C = config_.context;
  if (ctx.tokens.size() != C || ctx.coords.size() != size_t{C} + 1)
    fail(ErrorKind::usage, "context must hold " + std::to_string(C) + " tokens and " + std::to_string(C + 1) +
                               " coordinates");
  for (uint32_t tok : ctx.tokens)
    if (tok >= config_.vocab) fail(ErrorKind::usage, "context token " + std::to_string(tok) + " outside vocabulary");
  for (const auto& c : ctx.coords)
    if (c.x >= config_.max_m || c.y >= config_.max_n)
      fail(ErrorKind::usage, "coordinate (" + std::to_string(c.x) + "," + std::to_string(c.y) +
                                 ") outside the model's spatial embedding tables");
}

void Transformer::forward(const Context& ctx, Workspace& ws) const {
  check_context(ctx);
  const size_t C = config_.context, S = C + 1, d = config_.hidden, H = config_.heads, hd = config_.head_dim();
  const size_t F = 4 * d;
  const double* P = params_.data();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  std::vector<double>& x0 = ws.layers[0].x_in;
  for (size_t i = 0; i < S; ++i) {
    const Coord& c = ctx.coords[i];
    const double* e_tok = i < C ? P + tok_ + size_t{ctx.tokens[i]} * d : P + query_;
    const double* e_row = P + row_ + size_t{c.x} * d;
    const double* e_col = P + col_ + size_t{c.y} * d;
    const double* e_time = P + time_ + size_t{c.t % config_.max_t} * d;
    double* xi = x0.data() + i * d;
    for (size_t k = 0; k < d; ++k) xi[k] = e_tok[k] + e_row[k] + e_col[k] + e_time[k];
  }

  for (size_t l = 0; l < config_.layers; ++l) {
    auto& L = ws.layers[l];
    const auto& o = layer_off_[l];
    for (size_t i = 0; i < S; ++i)
      layer_norm_fwd(&L.x_in[i * d], P + o.ln1_g, P + o.ln1_b, &L.a[i * d], &L.ln1_hat[i * d], L.ln1_rstd[i], d);
    linear_fwd(L.a.data(), P + o.w_qkv, P + o.b_qkv, L.qkv.data(), S, d, 3 * d);

    std::fill(L.o.begin(), L.o.end(), 0.0);
    for (size_t h = 0; h < H; ++h) {
      for (size_t i = 0; i < S; ++i) {
        const double* q = &L.qkv[i * 3 * d + h * hd];
        double* row = &L.att[(h * S + i) * S];
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t j = 0; j <= i; ++j) {
          const double* k = &L.qkv[j * 3 * d + d + h * hd];
          double s = 0.0;
          for (size_t e = 0; e < hd; ++e) s += q[e] * k[e];
          row[j] = s * scale;
          mx = std::max(mx, row[j]);
        }
        double sum = 0.0;
        for (size_t j = 0; j <= i; ++j) {
          row[j] = std::exp(row[j] - mx);
          sum += row[j];
        }
        for (size_t j = 0; j <= i; ++j) row[j] /= sum;
        for (size_t j = i + 1; j < S; ++j) row[j] = 0.0;
        double* out = &L.o[i * d + h * hd];
        for (size_t j = 0; j <= i; ++j) {
          const double* v = &L.qkv[j * 3 * d + 2 * d + h * hd];
          for (size_t e = 0; e < hd; ++e) out[e] += row[j] * v[e];
        }
      }
    }
    linear_fwd(L.o.data(), P + o.w_out, P + o.b_out, L.x_mid.data(), S, d, d);
    for (size_t k = 0; k < S * d; ++k) L.x_mid[k] += L.x_in[k];

    for (size_t i = 0; i < S; ++i)
      layer_norm_fwd(&L.x_mid[i * d], P + o.ln2_g, P + o.ln2_b, &L.c[i * d], &L.ln2_hat[i * d], L.ln2_rstd[i], d);
    linear_fwd(L.c.data(), P + o.w_fc, P + o.b_fc, L.u.data(), S, d, F);
    for (size_t k = 0; k < S * F; ++k) {
      const double u = L.u[k];
      L.g[k] = 0.5 * u * (1.0 + std::tanh(gelu_k * (u + 0.044715 * u * u * u)));
    }
    std::vector<double>& next = l + 1 < config_.layers ? ws.layers[l + 1].x_in : ws.x_out;
    linear_fwd(L.g.data(), P + o.w_proj, P + o.b_proj, next.data(), S, F, d);
    for (size_t k = 0; k < S * d; ++k) next[k] += L.x_mid[k];
  }

  layer_norm_fwd(&ws.x_out[C * d], P + lnf_g_, P + lnf_b_, ws.f.data(), ws.lnf_hat.data(), ws.lnf_rstd, d);
  linear_fwd(ws.f.data(), P + head_w_, P + head_b_, ws.logits.data(), 1, d, config_.vocab);
}

void Transformer::logits(const Context& ctx, std::span<double> out, Workspace& ws) const {
  forward(ctx, ws);
  std::copy(ws.logits.begin(), ws.logits.end(), out.begin());
}

std::vector<double> Transformer::probabilities(const Context& ctx) const {
  auto ws = make_workspace();
  forward(ctx, *ws);
  std::vector<double> p(config_.vocab);
  softmax(ws->logits, p);
  return p;
}

LossParts hybrid_loss(std::span<const double> p, uint32_t target, std::span<const double> midpoints, double alpha) {
  LossParts parts;
  parts.ce = -std::log(p[target]);
  double expect = 0.0;
  for (size_t v = 0; v < p.size(); ++v) expect += p[v] * midpoints[v];
  const double diff = expect - midpoints[target];
  parts.mse = 0.5 * diff * diff;
  parts.total = parts.ce + alpha * parts.mse;
  return parts;
}

LossParts Transformer::loss_and_gradient(const Context& ctx, uint32_t target, std::span<const double> midpoints,
                                         double alpha, std::span<double> grad, Workspace& ws) const {
  if (target >= config_.vocab) fail(ErrorKind::usage, "target token outside vocabulary");
  if (midpoints.size() != config_.vocab) fail(ErrorKind::usage, "midpoint table does not match vocabulary");
  if (grad.size() != params_.size()) fail(ErrorKind::usage, "gradient buffer has the wrong size");
  forward(ctx, ws);

  const size_t C = config_.context, S = C + 1, d = config_.hidden, H = config_.heads, hd = config_.head_dim();
  const size_t V = config_.vocab, F = 4 * d;
  const double* P = params_.data();
  double* G = grad.data();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  softmax(ws.logits, ws.probs);
  // Cross-entropy through log-sum-exp for accuracy on confident outputs.
  const double mx = *std::max_element(ws.logits.begin(), ws.logits.end());
  double sum = 0.0;
  for (double z : ws.logits) sum += std::exp(z - mx);
  LossParts parts = hybrid_loss(ws.probs, target, midpoints, alpha);
  parts.ce = mx + std::log(sum) - ws.logits[target];
  parts.total = parts.ce + alpha * parts.mse;

  double expect = 0.0;
  for (size_t v = 0; v < V; ++v) expect += ws.probs[v] * midpoints[v];
  const double dm = alpha * (expect - midpoints[target]);
  for (size_t v = 0; v < V; ++v)
    ws.dlogits[v] = ws.probs[v] * (1.0 + dm * (midpoints[v] - expect)) - (v == target ? 1.0 : 0.0);

  // Head and final norm; only the query slot receives gradient.
  std::vector<double> df(d);
  linear_bwd(ws.f.data(), P + head_w_, ws.dlogits.data(), df.data(), G + head_w_, G + head_b_, 1, d, V);
  std::fill(ws.dx.begin(), ws.dx.end(), 0.0);
  layer_norm_bwd(df.data(), ws.lnf_hat.data(), ws.lnf_rstd, P + lnf_g_, G + lnf_g_, G + lnf_b_, &ws.dx[C * d], d);

  for (size_t l = config_.layers; l-- > 0;) {
    auto& L = ws.layers[l];
    const auto& o = layer_off_[l];

    // MLP branch: dx holds d(loss)/d(block output).
    linear_bwd(L.g.data(), P + o.w_proj, ws.dx.data(), ws.dwide.data(), G + o.w_proj, G + o.b_proj, S, F, d);
    for (size_t k = 0; k < S * F; ++k) {
      const double u = L.u[k];
      const double th = std::tanh(gelu_k * (u + 0.044715 * u * u * u));
      const double dgelu = 0.5 * (1.0 + th) + 0.5 * u * (1.0 - th * th) * gelu_k * (1.0 + 3.0 * 0.044715 * u * u);
      ws.dwide[k] *= dgelu;
    }
    linear_bwd(L.c.data(), P + o.w_fc, ws.dwide.data(), ws.dtmp.data(), G + o.w_fc, G + o.b_fc, S, d, F);
    for (size_t i = 0; i < S; ++i)
      layer_norm_bwd(&ws.dtmp[i * d], &L.ln2_hat[i * d], L.ln2_rstd[i], P + o.ln2_g, G + o.ln2_g, G + o.ln2_b,
                     &ws.dx[i * d], d);

    // Attention branch: dx now holds d(loss)/d(x_mid).
    linear_bwd(L.o.data(), P + o.w_out, ws.dx.data(), ws.dtmp.data(), G + o.w_out, G + o.b_out, S, d, d);
    std::fill(ws.dqkv.begin(), ws.dqkv.end(), 0.0);
    std::vector<double> dp(S);
    for (size_t h = 0; h < H; ++h) {
      for (size_t i = 0; i < S; ++i) {
        const double* row = &L.att[(h * S + i) * S];
        const double* dout = &ws.dtmp[i * d + h * hd];
        const double* q = &L.qkv[i * 3 * d + h * hd];
        double* dq = &ws.dqkv[i * 3 * d + h * hd];
        double* dpp = dp.data();
        double weighted = 0.0;
        for (size_t j = 0; j <= i; ++j) {
          const double* v = &L.qkv[j * 3 * d + 2 * d + h * hd];
          double* dv = &ws.dqkv[j * 3 * d + 2 * d + h * hd];
          double s = 0.0;
          for (size_t e = 0; e < hd; ++e) {
            s += dout[e] * v[e];
            dv[e] += row[j] * dout[e];
          }
          dpp[j] = s;
          weighted += row[j] * s;
        }
        for (size_t j = 0; j <= i; ++j) {
          const double ds = row[j] * (dpp[j] - weighted) * scale;
          const double* k = &L.qkv[j * 3 * d + d + h * hd];
          double* dk = &ws.dqkv[j * 3 * d + d + h * hd];
          for (size_t e = 0; e < hd; ++e) {
            dq[e] += ds * k[e];
            dk[e] += ds * q[e];
          }
        }
      }
    }
    linear_bwd(L.a.data(), P + o.w_qkv, ws.dqkv.data(), ws.dtmp.data(), G + o.w_qkv, G + o.b_qkv, S, d, 3 * d);
    for (size_t i = 0; i < S; ++i)
      layer_norm_bwd(&ws.dtmp[i * d], &L.ln1_hat[i * d], L.ln1_rstd[i], P + o.ln1_g, G + o.ln1_g, G + o.ln1_b,
                     &ws.dx[i * d], d);
  }

  for (size_t i = 0; i < S; ++i) {
    const Coord& c = ctx.coords[i];
    double* g_tok = i < C ? G + tok_ + size_t{ctx.tokens[i]} * d : G + query_;
    double* g_row = G + row_ + size_t{c.x} * d;
    double* g_col = G + col_ + size_t{c.y} * d;
    double* g_time = G + time_ + size_t{c.t % config_.max_t} * d;
    const double* dxi = &ws.dx[i * d];
    for (size_t k = 0; k < d; ++k) {
      g_tok[k] += dxi[k];
      g_row[k] += dxi[k];
      g_col[k] += dxi[k];
      g_time[k] += dxi[k];
    }
  }
  return parts;
}

std::vector<double> normalized_midpoints(const QuantizerModel& quantizer) {
  std::vector<double> mid(quantizer.vocab, 0.0);
  const double range = quantizer.hi - quantizer.lo;
  if (range <= 0.0) return mid;
  for (uint32_t v = 0; v < quantizer.vocab; ++v) mid[v] = (quantizer.midpoint(v) - quantizer.lo) / range;
  return mid;
}

Bytes serialize_checkpoint(const Checkpoint& checkpoint) {
  const ModelConfig& c = checkpoint.config;
  Bytes out;
  ByteWriter w(out);
  w.put_bytes(std::span(reinterpret_cast<const uint8_t*>(ckpt_magic), sizeof(ckpt_magic)));
  for (uint32_t v : {c.layers, c.hidden, c.heads, c.vocab, c.context, c.max_m, c.max_n, c.max_t}) w.put(v);
  w.put<uint64_t>(checkpoint.parameters.size());
  for (float p : checkpoint.parameters) w.put(p);
  const Digest digest = sha256(out);
  w.put_bytes(digest);
  return out;
}

Checkpoint make_checkpoint(const Transformer& model) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  ckpt.parameters.reserve(model.parameters().size());
  for (double p : model.parameters()) ckpt.parameters.push_back(static_cast<float>(p));
  const Bytes bytes = serialize_checkpoint(ckpt);
  std::copy(bytes.end() - 32, bytes.end(), ckpt.hash.begin());
  return ckpt;
}

Transformer from_checkpoint(const Checkpoint& checkpoint) {
  Transformer model(checkpoint.config);
  if (checkpoint.parameters.size() != model.parameters().size())
    fail(ErrorKind::malformed_input, "checkpoint parameter count does not match its config");
  std::copy(checkpoint.parameters.begin(), checkpoint.parameters.end(), model.parameters().begin());
  return model;
}

Checkpoint parse_checkpoint(std::span<const uint8_t> bytes) {
  if (bytes.size() < sizeof(ckpt_magic) + 32 || std::memcmp(bytes.data(), ckpt_magic, sizeof(ckpt_magic)) != 0)
    fail(ErrorKind::malformed_input, "not a checkpoint file");
  const auto body = bytes.first(bytes.size() - 32);
  const Digest digest = sha256(body);
  if (!std::equal(digest.begin(), digest.end(), bytes.end() - 32))
    fail(ErrorKind::corruption, "checkpoint content hash mismatch");

  ByteReader r(body);
  r.get_bytes(sizeof(ckpt_magic));
  Checkpoint ckpt;
  ModelConfig& c = ckpt.config;
  for (uint32_t* v : {&c.layers, &c.hidden, &c.heads, &c.vocab, &c.context, &c.max_m, &c.max_n, &c.max_t})
    *v = r.get<uint32_t>();
  c.validate();
  const auto count = r.get<uint64_t>();
  if (count != c.parameter_count() || r.remaining() != count * sizeof(float))
    fail(ErrorKind::malformed_input, "checkpoint parameter blob does not match its config");
  ckpt.parameters.resize(count);
  for (auto& p : ckpt.parameters) p = r.get<float>();
  std::copy(digest.begin(), digest.end(), ckpt.hash.begin());
  return ckpt;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::optional<ModelConfig>& expected) {
  Checkpoint ckpt = parse_checkpoint(read_file(path));
  if (expected && !(*expected == ckpt.config))
    throw ConfigMismatchError("checkpoint '" + path.string() + "' has a different model configuration");
  return ckpt;
}

double topk_accuracy(const Transformer& model, std::span<const uint32_t> tokens, std::span<const Coord> coords,
                     std::span<const size_t> positions, uint32_t k) {
  if (positions.empty()) return 0.0;
  const uint32_t C = model.config().context;
  auto ws = model.make_workspace();
  std::vector<double> z(model.config().vocab);
  size_t hits = 0;
  for (size_t p : positions) {
    model.logits({tokens.subspan(p - C, C), coords.subspan(p - C, C + 1)}, z, *ws);
    const double zt = z[tokens[p]];
    // Rank of the target under the (score desc, id asc) order.
    size_t better = 0;
    for (uint32_t v = 0; v < z.size(); ++v)
      if (z[v] > zt || (z[v] == zt && v < tokens[p])) ++better;
    if (better < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(positions.size());
}

namespace {

struct HeldoutStats {
  double accuracy = 0.0;
  double argmax_mse = 0.0;
};

HeldoutStats evaluate(const Transformer& model, std::span<const uint32_t> tokens, std::span<const Coord> coords,
                      std::span<const size_t> positions, uint32_t k, std::span<const double> midpoints) {
  HeldoutStats stats;
  if (positions.empty()) return stats;
  stats.accuracy = topk_accuracy(model, tokens, coords, positions, k);
  const uint32_t C = model.config().context;
  auto ws = model.make_workspace();
  std::vector<double> z(model.config().vocab);
  double total = 0.0;
  for (size_t p : positions) {
    model.logits({tokens.subspan(p - C, C), coords.subspan(p - C, C + 1)}, z, *ws);
    const auto best = static_cast<size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    const double diff = midpoints[best] - midpoints[tokens[p]];
    total += 0.5 * diff * diff;
  }
  stats.argmax_mse = total / static_cast<double>(positions.size());
  return stats;
}

}  // namespace

TrainResult train(std::span<const uint32_t> tokens, std::span<const Coord> coords, const ModelConfig& model_config,
                  const TrainingConfig& training, const QuantizerModel& quantizer) {
  model_config.validate();
  training.validate();
  const uint32_t C = model_config.context;
  if (coords.size() != tokens.size()) fail(ErrorKind::usage, "token and coordinate streams differ in length");
  if (quantizer.vocab != model_config.vocab) fail(ErrorKind::usage, "quantizer and model vocabularies differ");
  check_sampling(tokens, C);
  for (const auto& c : coords)
    if (c.x >= model_config.max_m || c.y >= model_config.max_n)
      fail(ErrorKind::usage, "field grid exceeds the model's spatial embedding tables");

  const std::vector<double> midpoints = normalized_midpoints(quantizer);
  Rng rng(training.seed);
  Transformer model = Transformer::initialized(model_config, rng.next(), training.init_std);

  const size_t candidates = tokens.size() - C;
  const auto wanted = static_cast<size_t>(std::llround(training.sampling_ratio * static_cast<double>(candidates)));
  const size_t pool_size = std::clamp<size_t>(wanted, 1, candidates);
  std::vector<size_t> pool;
  switch (training.sampling) {
    case SamplingKind::random: pool = random_sample(tokens, C, pool_size, rng); break;
    case SamplingKind::uniform: pool = uniform_sample(tokens, C, pool_size); break;
    case SamplingKind::target_aware: pool = target_aware_sample(tokens, C, pool_size, rng); break;
  }

  std::vector<bool> in_pool(tokens.size(), false);
  for (size_t p : pool) in_pool[p] = true;
  std::vector<size_t> heldout;
  for (size_t p = C; p < tokens.size(); ++p)
    if (!in_pool[p]) heldout.push_back(p);
  if (heldout.empty()) heldout = pool;
  if (heldout.size() > training.eval_windows) {
    std::vector<size_t> picked(training.eval_windows);
    for (size_t i = 0; i < picked.size(); ++i) picked[i] = heldout[i * heldout.size() / picked.size()];
    heldout = std::move(picked);
  }

  const size_t n = model.parameters().size();
  std::vector<double> grad(n), m1, m2;
  if (training.optimizer == OptimizerKind::adam) {
    m1.assign(n, 0.0);
    m2.assign(n, 0.0);
  }
  auto ws = model.make_workspace();
  TrainResult result;
  result.pool_size = pool.size();

  for (uint32_t step = 1; step <= training.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    LossParts mean;
    for (uint32_t b = 0; b < training.batch; ++b) {
      const size_t p = pool[rng.below(pool.size())];
      const LossParts parts = model.loss_and_gradient({tokens.subspan(p - C, C), coords.subspan(p - C, C + 1)},
                                                      tokens[p], midpoints, training.alpha, grad, *ws);
      mean.ce += parts.ce;
      mean.mse += parts.mse;
      mean.total += parts.total;
    }
    const double inv = 1.0 / training.batch;
    mean.ce *= inv;
    mean.mse *= inv;
    mean.total *= inv;
    if (!std::isfinite(mean.total))
      fail(ErrorKind::divergence, "loss became non-finite at step " + std::to_string(step) +
                                      " (ce=" + std::to_string(mean.ce) + ", mse=" + std::to_string(mean.mse) +
                                      ", lr=" + std::to_string(training.lr) + ")");

    double norm2 = 0.0;
    for (auto& g : grad) {
      g *= inv;
      norm2 += g * g;
    }
    double clip = 1.0;
    if (training.grad_clip > 0.0 && std::sqrt(norm2) > training.grad_clip) clip = training.grad_clip / std::sqrt(norm2);

    auto params = model.parameters();
    if (training.optimizer == OptimizerKind::sgd) {
      for (size_t i = 0; i < n; ++i) params[i] -= training.lr * clip * grad[i];
    } else {
      constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
      const double c1 = 1.0 - std::pow(beta1, step), c2 = 1.0 - std::pow(beta2, step);
      for (size_t i = 0; i < n; ++i) {
        const double g = clip * grad[i];
        m1[i] = beta1 * m1[i] + (1.0 - beta1) * g;
        m2[i] = beta2 * m2[i] + (1.0 - beta2) * g * g;
        params[i] -= training.lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
      }
    }

    TrainLogEntry entry{step, mean.ce, mean.mse, mean.total, std::nullopt, std::nullopt};
    if ((training.eval_every > 0 && step % training.eval_every == 0) || step == training.steps) {
      const auto stats = evaluate(model, tokens, coords, heldout, training.eval_topk, midpoints);
      entry.heldout_accuracy = stats.accuracy;
      entry.heldout_argmax_mse = stats.argmax_mse;
    }
    result.log.push_back(entry);
  }

  result.checkpoint = make_checkpoint(model);
  // Accuracy of the float-rounded parameters the checkpoint actually holds.
  result.heldout_accuracy =
      topk_accuracy(from_checkpoint(result.checkpoint), tokens, coords, heldout, training.eval_topk);
  return result;
}

TransformerPredictor::TransformerPredictor(const Checkpoint& checkpoint)
    : model_(from_checkpoint(checkpoint)), hash_(checkpoint.hash) {}

void TransformerPredictor::scores(const Context& ctx, std::span<double> out) const {
  auto ws = model_.make_workspace();
  model_.logits(ctx, out, *ws);
}

}  // namespace llmcomp
