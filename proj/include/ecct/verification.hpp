#pragma once

#include "ecct/codes.hpp"
#include "ecct/masking.hpp"
#include "ecct/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ecct {

struct VerificationDetail {
  std::string label;
  double value = 0.0;
};

struct VerificationReport {
  std::string name;
  std::size_t trials = 0;
  double max_violation = 0.0;
  double threshold = 0.0;
  bool passed = false;
  bool control = false;  // expected to fail; guards against a vacuous check
  std::vector<VerificationDetail> details;

  /// passed <=> max_violation <= threshold
  void finalize();
  /// For controls the check succeeds when the underlying comparison fails.
  bool ok() const { return control ? !passed : passed; }
};

/// Max |dU[i,j]| over pairs outside `reference` for models attending over `support`.
VerificationReport check_gradient_sparsity(const ECCTConfig& cfg, const ParityCheckMatrix& h,
                                           const MaskMatrix& support, const MaskMatrix& reference,
                                           std::size_t trials, std::uint64_t seed);
/// Masked configs check against build_mask(h); unmasked configs run as a control.
VerificationReport check_gradient_sparsity(const ECCTConfig& cfg, const ParityCheckMatrix& h, std::size_t trials,
                                           std::uint64_t seed);

struct LemmaOptions {
  double ebn0_db = 2.0;
  bool random_codewords = true;
  bool noiseless = false;
  bool force_flip_all = false;  // replace the decoder output with "flip every bit"
};

/// Codeword-side BER minus noise-side BER, per sample.
VerificationReport check_lemma_equivalence(const ECCTWeights& w, const ParityCheckMatrix& h, const MaskMatrix& mask,
                                           const ECCTConfig& cfg, std::size_t n_samples, std::uint64_t seed,
                                           const LemmaOptions& opt = {});

struct LipschitzCheckOptions {
  std::size_t trials = 200;
  double perturbation_scale = 1e-3;
  double ebn0_db = 2.0;
  std::size_t n_inputs = 16;
};

/// Ratio |df[j]| / |dW_i|_F against the per-weight constants, one weight perturbed at a time.
/// The budget is measured from `w` on freshly drawn inputs; perturbed weights are projected
/// back into it. Masked QK ratios are compared against the sparse constant.
VerificationReport check_lipschitz_empirical(const ECCTWeights& w, const ParityCheckMatrix& h, const MaskMatrix& mask,
                                             const ECCTConfig& cfg, std::uint64_t seed,
                                             const LipschitzCheckOptions& opt = {});

/// Relative error of backward() against central differences of a random linear functional of z_hat.
VerificationReport check_finite_difference(const ECCTConfig& cfg, const ParityCheckMatrix& h, const MaskMatrix& mask,
                                           std::size_t trials, double eps, std::uint64_t seed);

/// max(|dU|_F - |dA restricted to Omega|_F) over layers and draws.
VerificationReport check_frobenius_contraction(const ECCTConfig& cfg, const ParityCheckMatrix& h,
                                               const MaskMatrix& mask, std::size_t trials, std::uint64_t seed);

struct SuiteOptions {
  std::uint64_t seed = 7;
  bool quick = false;  // reduced trial counts
};

/// Every check on the default configurations, controls included.
std::vector<VerificationReport> run_verification_suite(const SuiteOptions& opt = {});

std::string reports_to_json(const std::vector<VerificationReport>& reports);

}  // namespace ecct
