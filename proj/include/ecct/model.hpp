#pragma once

#include "ecct/codes.hpp"
#include "ecct/masking.hpp"
#include "ecct/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ecct {

enum class Activation { relu, gelu, identity };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);
/// Upper bound on |sigma'|: 1 for relu and identity, 1.13 for gelu.
double activation_lipschitz(Activation a);

struct ECCTConfig {
  std::size_t n = 7;
  std::size_t r = 3;
  std::size_t d = 32;
  std::size_t u = 1;  // FFN hidden width is u * d
  std::size_t T = 1;
  Activation activation = Activation::relu;
  bool masked = true;
  bool softmax_scale = false;  // divide logits by sqrt(d)

  std::size_t L() const { return n + r; }
  void validate() const;

  static ECCTConfig for_code(const ParityCheckMatrix& h, std::size_t d, std::size_t u, std::size_t T);
};

struct LayerWeights {
  Mat qk;  // d x d
  Mat v;   // d x d
  Mat f1;  // d x ud
  Mat f2;  // ud x d
};

struct ECCTWeights {
  Mat emb;  // L x d
  std::vector<LayerWeights> layers;
  Mat o1;  // d x 1
  Mat o2;  // L x n

  static ECCTWeights zeros(const ECCTConfig& cfg);

  /// Every learnable matrix with a stable name ("emb", "qk1", ..., "o2").
  std::vector<std::pair<std::string, Mat*>> tensors();
  std::vector<std::pair<std::string, const Mat*>> tensors() const;

  std::size_t parameter_count() const;
  /// Throws std::invalid_argument on a shape mismatch with cfg or a non-finite entry.
  void check(const ECCTConfig& cfg) const;

  friend bool operator==(const ECCTWeights& a, const ECCTWeights& b);
};

/// Which logits the attention pass evaluates. `all_pairs` fills U and dA for
/// every (i, j); `support_only` skips pairs outside Omega, whose attention
/// weights are exactly zero either way. Values inside Omega are bit-identical.
enum class LogitCoverage { all_pairs, support_only };

struct LayerCache {
  Mat x_in;     // L x d
  Mat xw;       // x_in * W_QK
  Mat u;        // pre-mask logits, L x L
  Mat a;        // attention, zero outside Omega
  Mat h_att;    // A * x_in
  Mat h_v;      // h_att * W_V
  Mat h_f1;     // h_v * W_F1
  Mat h_sigma;  // sigma(h_f1)
  Mat x_out;    // h_sigma * W_F2
};

struct ForwardCache {
  Vec y_tilde;
  std::vector<LayerCache> layers;
  Mat x_final;  // X^(T)
  Vec h_o1;     // X^(T) * W_o1
  Vec z_hat;    // W_o2^T * h_o1
  LogitCoverage coverage = LogitCoverage::all_pairs;

  /// X^(t) for t = 0..T.
  const Mat& x(std::size_t t) const { return t < layers.size() ? layers[t].x_in : x_final; }
};

struct GradientSet {
  ECCTWeights weights;     // d loss / d each weight
  std::vector<Mat> d_u;    // per layer, L x L
  std::vector<Mat> d_a;    // per layer, L x L
  Mat d_x0;                // d loss / d X^(0)
};

struct BackwardOptions {
  bool keep_attention_grads = true;
};

/// Norm-budget constants of a concrete model.
struct NormBudget {
  double b_x = 0, B_qk = 0, B_v = 0, B_f1 = 0, B_f2 = 0, B_emb = 0;
  double b_o1 = 0, b_o2 = 0, w = 0;
  double L_sigma = 1, L_sm = 1;

  static NormBudget unit();
};

/// Uniform on +-1/sqrt(d), W_o2 on +-1/sqrt(L).
ECCTWeights init_weights(const ECCTConfig& cfg, std::uint64_t seed);

/// Row i of the result is y_tilde[i] * W_emb[i, :].
Mat embed(const Vec& y_tilde, const Mat& w_emb);

/// Omega used by the model: build_mask(h) when cfg.masked, the full grid otherwise.
MaskMatrix effective_mask(const ParityCheckMatrix& h, const ECCTConfig& cfg);

LayerCache attention_layer(const Mat& x_in, const LayerWeights& w, const MaskMatrix& support,
                           const ECCTConfig& cfg, LogitCoverage coverage = LogitCoverage::all_pairs);

ForwardCache forward(const Vec& y_tilde, const ECCTWeights& w, const MaskMatrix& support,
                     const ECCTConfig& cfg, LogitCoverage coverage = LogitCoverage::all_pairs);

/// Hard decision x_hat^s = sign(y) * (sigmoid(z_hat) >= 1/2 ? -1 : +1), sign(0) = +1.
Vec decide(const Vec& y, const Vec& z_hat);
/// Signed noise estimate: -1 where the predicted flip probability is >= 1/2.
Vec noise_sign(const Vec& z_hat);

double sigmoid(double x);

GradientSet backward(const ForwardCache& cache, const ECCTWeights& w, const MaskMatrix& support,
                     const ECCTConfig& cfg, const Vec& dl_dzhat, const BackwardOptions& opt = {});

/// Spectral norms by power iteration; b_x is the largest row norm of every
/// attention-layer input over the sample.
NormBudget measure_norm_budget(const ECCTWeights& w, std::span<const Vec> y_tildes,
                               const MaskMatrix& support, const ECCTConfig& cfg);

}  // namespace ecct
