#pragma once

#include "ecct/channel.hpp"
#include "ecct/codes.hpp"
#include "ecct/masking.hpp"
#include "ecct/model.hpp"

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ecct {

struct TrainConfig {
  std::size_t m = 12800;
  double ebn0_db = 2.0;
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  std::size_t eval_size = 0;  // 0 selects 10 * m

  void validate() const;
  std::size_t resolved_eval_size() const { return eval_size ? eval_size : 10 * m; }
};

/// m noisy all-zero codewords; sample i draws from stream (seed, i).
std::vector<ChannelSample> make_dataset(const ParityCheckMatrix& h, std::size_t m, double ebn0_db,
                                        std::uint64_t seed);

struct BceResult {
  double loss = 0.0;
  Vec grad;  // d loss / d z_hat
};

/// Mean binary cross-entropy of sigmoid(z_hat) against the flip targets.
BceResult bce_loss(const Vec& z_hat, std::span<const std::uint8_t> target);
/// Soft-target form; target entries are probabilities in [0, 1].
BceResult bce_loss(const Vec& z_hat, const Vec& target);

/// Fraction of positions where two +-1 vectors differ.
double ber_loss(const Vec& x_hat_s, const Vec& x_s);

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam update over a list of tensors. State is lazily sized.
void adam_step(std::span<Mat* const> weights, std::span<const Mat* const> grads, AdamState& state,
               const AdamParams& p);
void adam_step(ECCTWeights& weights, const ECCTWeights& grads, AdamState& state, const AdamParams& p);

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_ber = 0.0;  // running BER of the pre-update predictions
};

struct TrainResult {
  ECCTWeights weights;
  std::vector<EpochStats> history;
  bool aborted = false;
  std::string abort_reason;
};

TrainResult train(const ParityCheckMatrix& h, const MaskMatrix& mask, const ECCTConfig& cfg,
                  const TrainConfig& tcfg);
/// Same loop on a caller-provided dataset.
TrainResult train_on(std::span<const ChannelSample> data, const MaskMatrix& mask, const ECCTConfig& cfg,
                     const TrainConfig& tcfg);

enum class CodewordSource { all_zero, random_codeword };

/// Mean BER over the given samples.
double dataset_ber(const ECCTWeights& w, const MaskMatrix& mask, const ECCTConfig& cfg,
                   std::span<const ChannelSample> data);

/// Monte Carlo BER over fresh samples; random codewords come from derive_generator(h).
double evaluate(const ECCTWeights& w, const ParityCheckMatrix& h, const MaskMatrix& mask,
                const ECCTConfig& cfg, std::size_t n_samples, double ebn0_db, std::uint64_t seed,
                CodewordSource source = CodewordSource::all_zero);

constexpr double kGapDivisorFloor = 1e-9;

struct GapFields {
  double gap = 0.0;
  double normalized_gap = 0.0;
};

/// gap = test - train; normalized by max(train, 1e-9).
GapFields generalization_gap(double train_ber, double test_ber);

struct ExperimentRecord {
  std::string code;
  std::size_t n = 0, r = 0, L = 0, d = 0, u = 0, T = 0, P = 0;
  bool masked = true;
  std::size_t m = 0;
  double ebn0_db = 0.0;
  std::uint64_t seed = 0;
  double train_ber = 0.0;
  double test_ber = 0.0;
  double gap = 0.0;
  double normalized_gap = 0.0;
  double log_lambda = 0.0;
  double bound_total = 0.0;
  double wall_time_s = 0.0;
};

void write_history_csv(std::ostream& out, std::span<const EpochStats> history);

}  // namespace ecct
