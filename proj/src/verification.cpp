#include "ecct/verification.hpp"

#include "ecct/bounds.hpp"
#include "ecct/channel.hpp"
#include "ecct/linalg.hpp"
#include "ecct/parallel.hpp"
#include "ecct/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace ecct {

void VerificationReport::finalize() { passed = max_violation <= threshold; }

namespace {

constexpr double kGain = 2.0;

ECCTWeights random_weights(const ECCTConfig& cfg, std::uint64_t seed, double gain) {
  auto w = init_weights(cfg, seed);
  for (auto& [name, m] : w.tensors()) *m *= gain;
  return w;
}

ChannelSample draw_sample(const ParityCheckMatrix& h, const std::optional<GeneratorMatrix>& gen,
                          const NoiseModel& model, Rng& rng) {
  Bits cw(h.cols(), 0);
  if (gen) {
    Bits msg(gen->k);
    for (auto& b : msg) b = static_cast<std::uint8_t>(rng() & 1u);
    cw = gen->encode(msg);
  }
  return make_sample(h, std::move(cw), model, rng);
}

Vec random_direction(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec g(n);
  for (Eigen::Index i = 0; i < n; ++i) g[i] = normal(rng);
  return g;
}

void merge_max(VerificationReport& r, const std::vector<double>& per_trial) {
  for (double v : per_trial) r.max_violation = std::max(r.max_violation, v);
}

}  // namespace

VerificationReport check_gradient_sparsity(const ECCTConfig& cfg, const ParityCheckMatrix& h,
                                           const MaskMatrix& support, const MaskMatrix& reference,
                                           std::size_t trials, std::uint64_t seed) {
  cfg.validate();
  VerificationReport r;
  r.name = "gradient_sparsity";
  r.trials = trials;
  r.threshold = 1e-12;
  const auto model = NoiseModel::from_ebn0(2.0, h.rate());
  const auto gen = derive_generator(h);
  std::vector<double> worst(trials, 0.0);
  parallel_for(trials, [&](std::size_t t) {
    auto rng = make_rng(seed, t);
    const auto w = random_weights(cfg, derive_seed(seed, t, 1), kGain);
    const auto s = draw_sample(h, gen, model, rng);
    const auto fc = forward(s.y_tilde, w, support, cfg, LogitCoverage::all_pairs);
    const auto g = backward(fc, w, support, cfg, random_direction(fc.z_hat.size(), rng));
    for (const auto& du : g.d_u)
      for (Eigen::Index i = 0; i < du.rows(); ++i)
        for (Eigen::Index j = 0; j < du.cols(); ++j)
          if (!reference.allowed(static_cast<std::size_t>(i), static_cast<std::size_t>(j)))
            worst[t] = std::max(worst[t], std::abs(du(i, j)));
  });
  merge_max(r, worst);
  r.details.push_back({"T", static_cast<double>(cfg.T)});
  r.details.push_back({"L", static_cast<double>(cfg.L())});
  r.finalize();
  return r;
}

VerificationReport check_gradient_sparsity(const ECCTConfig& cfg, const ParityCheckMatrix& h, std::size_t trials,
                                           std::uint64_t seed) {
  auto r = check_gradient_sparsity(cfg, h, effective_mask(h, cfg), build_mask(h), trials, seed);
  if (!cfg.masked) {
    r.name = "gradient_sparsity_unmasked_control";
    r.control = true;
  }
  return r;
}

VerificationReport check_lemma_equivalence(const ECCTWeights& w, const ParityCheckMatrix& h, const MaskMatrix& mask,
                                           const ECCTConfig& cfg, std::size_t n_samples, std::uint64_t seed,
                                           const LemmaOptions& opt) {
  if (n_samples < 1) throw std::invalid_argument("check_lemma_equivalence: n_samples must be >= 1");
  VerificationReport r;
  r.name = "ber_equivalence";
  r.trials = n_samples;
  r.threshold = 0.0;
  std::optional<GeneratorMatrix> gen;
  if (opt.random_codewords) gen = derive_generator(h);
  const auto model = NoiseModel::from_ebn0(opt.ebn0_db, h.rate());
  std::vector<double> diff(n_samples, 0.0), code_ber(n_samples, 0.0);
  parallel_for(n_samples, [&](std::size_t i) {
    auto rng = make_rng(seed, i);
    auto s = draw_sample(h, gen, model, rng);
    if (opt.noiseless) {
      s.y = s.xs;
      s.z = s.y.cwiseProduct(s.xs);
      s.y_tilde = preprocess(s.y, h, SyndromeEmbedding::plus_minus_one);
    }
    Vec z_hat = forward(s.y_tilde, w, mask, cfg, LogitCoverage::support_only).z_hat;
    if (opt.force_flip_all) z_hat.setConstant(50.0);
    // Codeword side: decoded word against the transmitted symbols.
    const Vec x_hat = decide(s.y, z_hat);
    std::size_t e_code = 0;
    for (Eigen::Index j = 0; j < x_hat.size(); ++j) e_code += x_hat[j] != s.xs[j];
    // Noise side: estimated noise sign against the true multiplicative noise sign.
    const Vec z_est = noise_sign(z_hat);
    std::size_t e_noise = 0;
    for (Eigen::Index j = 0; j < z_est.size(); ++j) e_noise += z_est[j] != (s.z[j] < 0 ? -1.0 : 1.0);
    const double n = static_cast<double>(x_hat.size());
    code_ber[i] = static_cast<double>(e_code) / n;
    diff[i] = std::abs(code_ber[i] - static_cast<double>(e_noise) / n);
  });
  merge_max(r, diff);
  double mean = 0.0;
  for (double b : code_ber) mean += b;
  r.details.push_back({"mean_ber", mean / static_cast<double>(n_samples)});
  r.finalize();
  return r;
}

namespace {

void project(Mat& m, const std::string& name, const NormBudget& nb) {
  m = m.cwiseMax(-nb.w).cwiseMin(nb.w);
  if (name == "o1") {
    const double nrm = m.norm();
    if (nrm > nb.b_o1) m *= nb.b_o1 / nrm;
    return;
  }
  if (name == "o2") {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double nrm = m.col(j).norm();
      if (nrm > nb.b_o2) m.col(j) *= nb.b_o2 / nrm;
    }
    return;
  }
  double bound = 0.0;
  if (name.rfind("qk", 0) == 0) bound = nb.B_qk;
  else if (name.rfind("v", 0) == 0) bound = nb.B_v;
  else if (name.rfind("f1", 0) == 0) bound = nb.B_f1;
  else if (name.rfind("f2", 0) == 0) bound = nb.B_f2;
  else return;
  const double sn = spectral_norm(m);
  if (sn > bound) m *= bound / sn;
}

// Layer index (0-based) encoded in names like "qk2" or "f1_3".
std::size_t layer_of(const std::string& name) {
  const auto pos = name.find_last_not_of("0123456789");
  return static_cast<std::size_t>(std::stoul(name.substr(pos + 1))) - 1;
}

double constant_for(const std::string& name, const LipschitzSet& ls) {
  if (name == "o1") return ls.o1;
  if (name == "o2") return ls.o2;
  if (name.rfind("qk", 0) == 0) return ls.qk;
  if (name.rfind("v", 0) == 0) return ls.v;
  if (name.rfind("f1", 0) == 0) return ls.f1;
  return ls.f2;
}

}  // namespace

VerificationReport check_lipschitz_empirical(const ECCTWeights& w, const ParityCheckMatrix& h, const MaskMatrix& mask,
                                             const ECCTConfig& cfg, std::uint64_t seed,
                                             const LipschitzCheckOptions& opt) {
  cfg.validate();
  w.check(cfg);
  if (opt.trials < 1 || opt.n_inputs < 1) throw std::invalid_argument("check_lipschitz_empirical: empty run");
  VerificationReport r;
  r.name = "lipschitz_domination";
  r.threshold = 0.0;
  r.max_violation = -std::numeric_limits<double>::infinity();

  const auto model = NoiseModel::from_ebn0(opt.ebn0_db, h.rate());
  const auto gen = derive_generator(h);
  std::vector<Vec> inputs;
  for (std::size_t i = 0; i < opt.n_inputs; ++i) {
    auto rng = make_rng(derive_seed(seed, 0xA11), i);
    inputs.push_back(draw_sample(h, gen, model, rng).y_tilde);
  }
  const NormBudget base = measure_norm_budget(w, inputs, mask, cfg);
  const std::size_t L = cfg.L();
  const std::size_t P = sparsity(mask).P;
  r.details.push_back({"b_x", base.b_x});
  r.details.push_back({"P", static_cast<double>(P)});

  std::vector<std::string> names;
  for (const auto& [name, m] : w.tensors())
    if (name != "emb") names.push_back(name);
  const std::size_t total = names.size() * opt.trials;
  r.trials = total;
  std::vector<double> viol(total, -std::numeric_limits<double>::infinity());
  std::vector<double> ratio(total, 0.0), dense_margin(total, -std::numeric_limits<double>::infinity());

  parallel_for(total, [&](std::size_t k) {
    const std::string& name = names[k / opt.trials];
    const std::size_t trial = k % opt.trials;
    auto rng = make_rng(derive_seed(seed, 0xB22), k);
    ECCTWeights wp = w;
    Mat* target = nullptr;
    for (auto& [nm, m] : wp.tensors())
      if (nm == name) target = m;
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat delta(target->rows(), target->cols());
    for (Eigen::Index i = 0; i < delta.size(); ++i) delta.data()[i] = normal(rng);
    *target += opt.perturbation_scale * delta / delta.norm() * std::max(1.0, target->norm());
    project(*target, name, base);
    const Mat* orig = nullptr;
    for (const auto& [nm, m] : w.tensors())
      if (nm == name) orig = m;
    const double dw = (*target - *orig).norm();
    if (!(dw > 0.0)) return;  // degenerate perturbation, skipped

    const Vec& yt = inputs[trial % inputs.size()];
    const Vec z0 = forward(yt, w, mask, cfg, LogitCoverage::support_only).z_hat;
    const Vec z1 = forward(yt, wp, mask, cfg, LogitCoverage::support_only).z_hat;
    const double q = (z1 - z0).cwiseAbs().maxCoeff() / dw;

    NormBudget nb = base;
    const std::vector<Vec> one{yt};
    nb.b_x = std::max(base.b_x, measure_norm_budget(wp, one, mask, cfg).b_x);
    const auto layers = lipschitz_layers(nb, L, P, cfg.T);
    const auto dense = lipschitz_dense(nb, L);
    const bool in_layer = name != "o1" && name != "o2";
    const double c = constant_for(name, in_layer ? layers[layer_of(name)] : layers.back());
    ratio[k] = q;
    viol[k] = q - c;
    if (cfg.T == 1) {
      viol[k] = std::max(viol[k], q - constant_for(name, dense));
      dense_margin[k] = q - constant_for(name, dense);
    }
  });

  for (std::size_t i = 0; i < names.size(); ++i) {
    double worst_ratio = 0.0, worst = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < opt.trials; ++t) {
      worst_ratio = std::max(worst_ratio, ratio[i * opt.trials + t]);
      worst = std::max(worst, viol[i * opt.trials + t]);
    }
    r.details.push_back({names[i] + ".max_ratio", worst_ratio});
    r.details.push_back({names[i] + ".max_ratio_minus_bound", worst});
    r.max_violation = std::max(r.max_violation, worst);
  }
  r.finalize();
  return r;
}

VerificationReport check_finite_difference(const ECCTConfig& cfg, const ParityCheckMatrix& h, const MaskMatrix& mask,
                                           std::size_t trials, double eps, std::uint64_t seed) {
  cfg.validate();
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw std::invalid_argument("check_finite_difference: eps must lie in [1e-7, 1e-3]");
  VerificationReport r;
  r.name = "finite_difference";
  r.trials = trials;
  r.threshold = 1e-4;
  const auto model = NoiseModel::from_ebn0(2.0, h.rate());
  const auto gen = derive_generator(h);
  constexpr Eigen::Index kMaxEntries = 48;
  std::vector<double> worst(trials, 0.0), skipped(trials, 0.0);

  parallel_for(trials, [&](std::size_t t) {
    auto rng = make_rng(seed, t);
    ECCTWeights w = random_weights(cfg, derive_seed(seed, t, 1), kGain);
    const auto s = draw_sample(h, gen, model, rng);
    const Vec dir = random_direction(static_cast<Eigen::Index>(cfg.n), rng);
    const auto base = forward(s.y_tilde, w, mask, cfg);
    const auto g = backward(base, w, mask, cfg, dir, {.keep_attention_grads = false});

    // Activation pattern of the base point; a finite difference straddling a kink
    // of a piecewise-linear activation does not approximate the derivative.
    const auto pattern = [&](const ForwardCache& fc) {
      std::vector<bool> p;
      for (const auto& l : fc.layers)
        for (Eigen::Index i = 0; i < l.h_f1.size(); ++i) p.push_back(l.h_f1.data()[i] > 0.0);
      return p;
    };
    const auto p0 = pattern(base);
    const bool kinked = cfg.activation == Activation::relu;

    auto grads = g.weights.tensors();
    auto params = w.tensors();
    for (std::size_t k = 0; k < params.size(); ++k) {
      Mat& p = *params[k].second;
      const Mat& ga = *grads[k].second;
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(p.size()));
      for (Eigen::Index i = 0; i < p.size(); ++i) idx[static_cast<std::size_t>(i)] = i;
      if (p.size() > kMaxEntries) {
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(kMaxEntries);
      }
      double diff2 = 0.0, an2 = 0.0, nu2 = 0.0;
      for (auto i : idx) {
        const double keep = p.data()[i];
        p.data()[i] = keep + eps;
        const auto fp = forward(s.y_tilde, w, mask, cfg);
        p.data()[i] = keep - eps;
        const auto fm = forward(s.y_tilde, w, mask, cfg);
        p.data()[i] = keep;
        if (kinked && (pattern(fp) != p0 || pattern(fm) != p0)) {
          skipped[t] += 1.0;
          continue;
        }
        const double num = (dir.dot(fp.z_hat) - dir.dot(fm.z_hat)) / (2.0 * eps);
        const double an = ga.data()[i];
        diff2 += (num - an) * (num - an);
        an2 += an * an;
        nu2 += num * num;
      }
      const double denom = std::max(std::sqrt(an2), std::sqrt(nu2)) + 1e-10;
      worst[t] = std::max(worst[t], std::sqrt(diff2) / denom);
    }
  });
  merge_max(r, worst);
  double sk = 0.0;
  for (double v : skipped) sk += v;
  r.details.push_back({"entries_skipped_at_kinks", sk});
  r.finalize();
  return r;
}

VerificationReport check_frobenius_contraction(const ECCTConfig& cfg, const ParityCheckMatrix& h,
                                               const MaskMatrix& mask, std::size_t trials, std::uint64_t seed) {
  cfg.validate();
  VerificationReport r;
  r.name = "frobenius_contraction";
  r.trials = trials;
  r.threshold = 1e-10;
  r.max_violation = -std::numeric_limits<double>::infinity();
  const auto model = NoiseModel::from_ebn0(2.0, h.rate());
  const auto gen = derive_generator(h);
  std::vector<double> worst(trials, -std::numeric_limits<double>::infinity());
  parallel_for(trials, [&](std::size_t t) {
    auto rng = make_rng(seed, t);
    const auto w = random_weights(cfg, derive_seed(seed, t, 1), kGain);
    const auto s = draw_sample(h, gen, model, rng);
    const auto fc = forward(s.y_tilde, w, mask, cfg, LogitCoverage::all_pairs);
    const auto g = backward(fc, w, mask, cfg, random_direction(fc.z_hat.size(), rng));
    for (std::size_t l = 0; l < g.d_u.size(); ++l) {
      double a2 = 0.0;
      for (std::size_t i = 0; i < mask.size(); ++i)
        for (auto j : mask.row(i)) a2 += g.d_a[l](static_cast<Eigen::Index>(i), j) * g.d_a[l](static_cast<Eigen::Index>(i), j);
      worst[t] = std::max(worst[t], g.d_u[l].norm() - std::sqrt(a2));
    }
  });
  merge_max(r, worst);
  r.finalize();
  return r;
}

namespace {

ParityCheckMatrix single_check_code() { return ParityCheckMatrix(1, 2, Bits{1, 1}, "repetition2"); }

ECCTConfig small_cfg(const ParityCheckMatrix& h, std::size_t d, std::size_t T, bool masked) {
  auto c = ECCTConfig::for_code(h, d, 1, T);
  c.masked = masked;
  return c;
}

VerificationReport tag(VerificationReport r, const std::string& suffix) {
  r.name += "[" + suffix + "]";
  return r;
}

}  // namespace

std::vector<VerificationReport> run_verification_suite(const SuiteOptions& opt) {
  const auto ham = hamming_7_4();
  const auto reg = random_regular_code(24, 12, 3, 1);
  const std::size_t sparsity_trials = opt.quick ? 10 : 50;
  const std::size_t lemma_samples = opt.quick ? 2000 : 10000;
  const std::size_t lip_trials = opt.quick ? 40 : 200;
  const std::size_t frob_trials = opt.quick ? 20 : 100;
  std::uint64_t salt = 0;
  const auto next = [&] { return derive_seed(opt.seed, ++salt); };
  std::vector<VerificationReport> out;

  for (const auto* h : {&ham, &reg})
    for (std::size_t T = 1; T <= 3; ++T) {
      const auto cfg = small_cfg(*h, 8, T, true);
      out.push_back(tag(check_gradient_sparsity(cfg, *h, sparsity_trials, next()), h->name() + ",T=" + std::to_string(T)));
    }
  out.push_back(tag(check_gradient_sparsity(small_cfg(ham, 8, 1, false), ham, sparsity_trials, next()), "hamming74"));
  {
    const auto cfg = small_cfg(ham, 8, 2, true);
    const auto diag = MaskMatrix::identity(cfg.L());
    auto r = check_gradient_sparsity(cfg, ham, diag, diag, sparsity_trials, next());
    r.name = "gradient_sparsity_diagonal";
    out.push_back(std::move(r));
  }

  {
    const auto cfg = small_cfg(ham, 8, 1, true);
    const auto mask = effective_mask(ham, cfg);
    const auto w = init_weights(cfg, next());
    LemmaOptions zero;
    zero.random_codewords = false;
    out.push_back(tag(check_lemma_equivalence(w, ham, mask, cfg, lemma_samples, next(), zero), "all-zero"));
    out.push_back(tag(check_lemma_equivalence(w, ham, mask, cfg, lemma_samples, next()), "random-codeword"));
    LemmaOptions flip;
    flip.force_flip_all = true;
    out.push_back(tag(check_lemma_equivalence(w, ham, mask, cfg, 1000, next(), flip), "flip-all"));
  }

  {
    const auto tiny = single_check_code();
    const std::size_t each = opt.quick ? 2 : 5;
    const auto fd = [&](const ParityCheckMatrix& h, ECCTConfig cfg, const std::string& label) {
      out.push_back(tag(check_finite_difference(cfg, h, effective_mask(h, cfg), each, 1e-6, next()), label));
    };
    fd(tiny, small_cfg(tiny, 2, 1, true), "n=2,d=2,T=1");
    fd(ham, small_cfg(ham, 8, 1, true), "hamming74,T=1");
    fd(ham, small_cfg(ham, 8, 2, false), "hamming74,T=2,unmasked");
    fd(ham, small_cfg(ham, 8, 3, true), "hamming74,T=3");
  }

  for (std::size_t T : {1, 2}) {
    const auto cfg = small_cfg(ham, 8, T, true);
    const auto mask = effective_mask(ham, cfg);
    const auto w = init_weights(cfg, next());
    LipschitzCheckOptions lo;
    lo.trials = lip_trials;
    out.push_back(tag(check_lipschitz_empirical(w, ham, mask, cfg, next(), lo), "hamming74,T=" + std::to_string(T)));
  }

  for (bool masked : {true, false}) {
    const auto cfg = small_cfg(ham, 8, 2, masked);
    out.push_back(tag(check_frobenius_contraction(cfg, ham, effective_mask(ham, cfg), frob_trials, next()),
                      masked ? "masked" : "unmasked"));
  }
  return out;
}

std::string reports_to_json(const std::vector<VerificationReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  bool all_ok = true;
  for (const auto& r : reports) {
    nlohmann::json d = nlohmann::json::object();
    for (const auto& det : r.details) d[det.label] = std::isfinite(det.value) ? nlohmann::json(det.value) : nlohmann::json(nullptr);
    arr.push_back({{"name", r.name},
                   {"trials", r.trials},
                   {"max_violation", r.max_violation},
                   {"threshold", r.threshold},
                   {"passed", r.passed},
                   {"control", r.control},
                   {"ok", r.ok()},
                   {"details", d}});
    all_ok = all_ok && r.ok();
  }
  return nlohmann::json{{"checks", arr}, {"all_ok", all_ok}}.dump(2);
}

}  // namespace ecct
