#pragma once

#include <algorithm>
#include <numeric>

#include "core.hpp"
#include "denoiser.hpp"

namespace bcdnet {

enum class Optimizer { adam, sgd };

struct TrainConfig {
  int batch_size = 512;
  int epochs = 200;
  double lr_filters = 1e-3;
  double lr_thresholds = 1e-2;
  double lr_decay = 0.9;       // multiplies both rates every decay_every epochs
  int decay_every = 10;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Initialization. filter_init_scale <= 0 selects the default 0.1/sqrt(taps).
  double filter_init_scale = -1.0;
  double threshold_init_log = std::log(0.01);
};

inline void validate(const TrainConfig& cfg) {
  require(cfg.batch_size >= 1, "train config: batch size must be >= 1");
  require(cfg.epochs >= 0, "train config: epochs must be >= 0");
  require(cfg.lr_filters > 0.0 && cfg.lr_thresholds > 0.0,
          "train config: learning rates must be positive");
  require(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0, "train config: decay must be in (0, 1]");
  require(cfg.decay_every >= 1, "train config: decay interval must be >= 1");
}

struct TrainingGradient {
  std::vector<double> decode;          // matches AutoencoderParams::decode
  std::vector<double> encode;          // matches AutoencoderParams::encode
  std::vector<double> log_thresholds;  // matches AutoencoderParams::log_thresholds
};

namespace detail {

inline void require_paired(const AutoencoderParams& p, const PatchMatrix& target,
                           const PatchMatrix& input) {
  require(target.patch_size == input.patch_size && target.n_patches == input.n_patches,
          "training: target and input patch matrices must be the same shape");
  require(target.patch_size == p.taps(), "training: patch size does not match filter taps");
  require(target.n_patches >= 1, "training: empty patch set");
}

/// Shared evaluation core: squared-error loss over the given columns,
/// normalized by taps * column count, optionally accumulating the gradient.
/// Threshold kinks (|code| == threshold) fall in the zero branch.
inline double loss_grad_over(const AutoencoderParams& p, const PatchMatrix& target,
                             const PatchMatrix& input, std::span<const long> cols,
                             TrainingGradient* grad) {
  const int taps = p.taps();
  const int k_count = p.filter_count;
  const double norm = 1.0 / (static_cast<double>(taps) * cols.size());

  std::vector<double> thresholds(k_count);
  for (int k = 0; k < k_count; ++k) thresholds[k] = std::exp(p.log_thresholds[k]);

  if (grad) {
    grad->decode.assign(p.decode.size(), 0.0);
    grad->encode.assign(p.encode.size(), 0.0);
    grad->log_thresholds.assign(p.log_thresholds.size(), 0.0);
  }

  std::vector<double> code(k_count), sparse(k_count), resid(taps), backcode(k_count);
  double loss = 0.0;
  for (long ci : cols) {
    const std::span<const double> in = input.column(ci);
    const std::span<const double> tgt = target.column(ci);
    for (int k = 0; k < k_count; ++k) {
      const double* enc = p.encode.data() + static_cast<std::size_t>(k) * taps;
      double acc = 0.0;
      for (int q = 0; q < taps; ++q) acc += enc[q] * in[q];
      code[k] = acc;
      sparse[k] = soft_threshold(acc, thresholds[k]);
    }
    for (int q = 0; q < taps; ++q) resid[q] = -tgt[q];
    for (int k = 0; k < k_count; ++k) {
      if (sparse[k] == 0.0) continue;
      const double* dec = p.decode.data() + static_cast<std::size_t>(k) * taps;
      for (int q = 0; q < taps; ++q) resid[q] += dec[q] * sparse[k];
    }
    for (int q = 0; q < taps; ++q) loss += sq(resid[q]);

    if (!grad) continue;
    for (int k = 0; k < k_count; ++k) {
      const double* dec = p.decode.data() + static_cast<std::size_t>(k) * taps;
      double* g_dec = grad->decode.data() + static_cast<std::size_t>(k) * taps;
      double acc = 0.0;
      for (int q = 0; q < taps; ++q) {
        g_dec[q] += resid[q] * sparse[k];
        acc += dec[q] * resid[q];
      }
      backcode[k] = acc;
    }
    for (int k = 0; k < k_count; ++k) {
      if (std::abs(code[k]) <= thresholds[k]) continue;  // inactive: no signal past the kink
      const double sign = code[k] > 0.0 ? 1.0 : -1.0;
      double* g_enc = grad->encode.data() + static_cast<std::size_t>(k) * taps;
      for (int q = 0; q < taps; ++q) g_enc[q] += in[q] * backcode[k];
      grad->log_thresholds[k] -= backcode[k] * sign * thresholds[k];
    }
  }

  if (grad) {
    const double two_norm = 2.0 * norm;
    for (double& g : grad->decode) g *= two_norm;
    for (double& g : grad->encode) g *= two_norm;
    for (double& g : grad->log_thresholds) g *= two_norm;
  }
  return loss * norm;
}

inline std::vector<long> all_columns(const PatchMatrix& m) {
  std::vector<long> cols(m.n_patches);
  std::iota(cols.begin(), cols.end(), 0L);
  return cols;
}

}  // namespace detail

/// Mean squared reconstruction error of the autoencoder over paired patch
/// matrices, normalized by taps * patch count.
inline double training_loss(const AutoencoderParams& p, const PatchMatrix& target,
                            const PatchMatrix& input) {
  validate(p);
  detail::require_paired(p, target, input);
  const std::vector<long> cols = detail::all_columns(target);
  return detail::loss_grad_over(p, target, input, cols, nullptr);
}

/// Exact gradient of training_loss in all parameters. The soft threshold is
/// flat inside [-a, a], so inactive codes contribute nothing to the encode
/// and threshold blocks; threshold gradients carry the exp() chain factor
/// because thresholds are optimized in the log domain.
inline TrainingGradient training_grad(const AutoencoderParams& p, const PatchMatrix& target,
                                      const PatchMatrix& input) {
  validate(p);
  detail::require_paired(p, target, input);
  TrainingGradient grad;
  const std::vector<long> cols = detail::all_columns(target);
  detail::loss_grad_over(p, target, input, cols, &grad);
  return grad;
}

/// Seeded Gaussian filter initialization with small positive thresholds.
inline AutoencoderParams init_autoencoder(int filter_count, int filter_side,
                                          const TrainConfig& cfg) {
  require(filter_count >= 1, "init_autoencoder: filter count must be >= 1");
  require(filter_side >= 1 && filter_side % 2 == 1,
          "init_autoencoder: filter side must be odd and >= 1");
  AutoencoderParams p;
  p.filter_count = filter_count;
  p.filter_side = filter_side;
  const int taps = p.taps();
  const double scale =
      cfg.filter_init_scale > 0.0 ? cfg.filter_init_scale : 0.1 / std::sqrt(double(taps));
  Rng rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, scale);
  p.decode.resize(static_cast<std::size_t>(filter_count) * taps);
  p.encode.resize(p.decode.size());
  for (double& v : p.encode) v = noise(rng);
  for (double& v : p.decode) v = noise(rng);
  p.log_thresholds.assign(filter_count, cfg.threshold_init_log);
  return p;
}

struct TrainLayerResult {
  AutoencoderParams params;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Trains one layer's autoencoder on paired patches by mini-batch gradient
/// descent (Adam by default). Columns are reshuffled every epoch from the
/// seeded generator, and the best full-data loss seen (including the
/// initialization) decides the returned parameters, so the final loss never
/// exceeds the initial one. Deterministic for a fixed config.
inline TrainLayerResult train_layer(const PatchMatrix& target, const PatchMatrix& input,
                                    int filter_count, int filter_side, const TrainConfig& cfg) {
  validate(cfg);
  AutoencoderParams p = init_autoencoder(filter_count, filter_side, cfg);
  detail::require_paired(p, target, input);

  const std::vector<long> all = detail::all_columns(target);
  TrainLayerResult result;
  result.initial_loss = detail::loss_grad_over(p, target, input, all, nullptr);
  result.params = p;
  result.final_loss = result.initial_loss;
  double best = result.initial_loss;

  Rng rng(derive_seed(cfg.seed, 0x5475ULL));
  std::vector<long> order = all;
  TrainingGradient grad;
  TrainingGradient m1, m2;  // Adam moments
  m1.decode.assign(p.decode.size(), 0.0);
  m1.encode.assign(p.encode.size(), 0.0);
  m1.log_thresholds.assign(p.log_thresholds.size(), 0.0);
  m2 = m1;

  double lr_filters = cfg.lr_filters;
  double lr_thresholds = cfg.lr_thresholds;
  long adam_t = 0;

  const auto apply = [&](std::vector<double>& param, const std::vector<double>& g,
                         std::vector<double>& m, std::vector<double>& v, double lr) {
    if (cfg.optimizer == Optimizer::sgd) {
      for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * g[i];
      return;
    }
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, double(adam_t));
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, double(adam_t));
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
      v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
      param[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_epsilon);
    }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const long> batch(order.data() + start, stop - start);
      detail::loss_grad_over(p, target, input, batch, &grad);
      ++adam_t;
      apply(p.decode, grad.decode, m1.decode, m2.decode, lr_filters);
      apply(p.encode, grad.encode, m1.encode, m2.encode, lr_filters);
      apply(p.log_thresholds, grad.log_thresholds, m1.log_thresholds, m2.log_thresholds,
            lr_thresholds);
    }
    if ((epoch + 1) % cfg.decay_every == 0) {
      lr_filters *= cfg.lr_decay;
      lr_thresholds *= cfg.lr_decay;
    }
    const double loss = detail::loss_grad_over(p, target, input, all, nullptr);
    if (loss < best) {
      best = loss;
      result.params = p;
      result.final_loss = loss;
    }
  }
  return result;
}

}  // namespace bcdnet
