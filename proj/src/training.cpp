#include "ecct/training.hpp"

#include "ecct/parallel.hpp"
#include "ecct/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace ecct {

namespace {

// Samples per gradient partial sum. Fixed so the summation order never
// depends on the number of worker threads.
constexpr std::size_t kChunk = 16;

void add_scaled(ECCTWeights& acc, const ECCTWeights& g, double a) {
  auto dst = acc.tensors();
  const auto src = g.tensors();
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].second += a * *src[i].second;
}

}  // namespace

void TrainConfig::validate() const {
  if (m < 1 || batch_size < 1 || batch_size > m)
    throw std::invalid_argument("train config: need m >= batch_size >= 1");
  if (!(learning_rate > 0)) throw std::invalid_argument("train config: learning rate must be positive");
}

std::vector<ChannelSample> make_dataset(const ParityCheckMatrix& h, std::size_t m, double ebn0_db,
                                        std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("make_dataset: m must be >= 1");
  const auto model = NoiseModel::from_ebn0(ebn0_db, h.rate());
  std::vector<ChannelSample> out(m);
  parallel_for(m, [&](std::size_t i) {
    auto rng = make_rng(seed, i);
    out[i] = make_sample(h, Bits(h.cols(), 0), model, rng);
  });
  return out;
}

BceResult bce_loss(const Vec& z_hat, const Vec& target) {
  if (z_hat.size() != target.size()) throw std::invalid_argument("bce_loss: length mismatch");
  const double n = static_cast<double>(z_hat.size());
  BceResult r;
  r.grad.resize(z_hat.size());
  for (Eigen::Index j = 0; j < z_hat.size(); ++j) {
    const double z = z_hat[j];
    const double e = target[j];
    // -[e log s(z) + (1 - e) log(1 - s(z))] = softplus(z) - e z
    const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    r.loss += softplus - e * z;
    r.grad[j] = (sigmoid(z) - e) / n;
  }
  r.loss /= n;
  return r;
}

BceResult bce_loss(const Vec& z_hat, std::span<const std::uint8_t> target) {
  Vec t(static_cast<Eigen::Index>(target.size()));
  for (std::size_t j = 0; j < target.size(); ++j) t[static_cast<Eigen::Index>(j)] = target[j];
  return bce_loss(z_hat, t);
}

double ber_loss(const Vec& x_hat_s, const Vec& x_s) {
  if (x_hat_s.size() != x_s.size()) throw std::invalid_argument("ber_loss: length mismatch");
  std::size_t errors = 0;
  for (Eigen::Index j = 0; j < x_s.size(); ++j) errors += x_hat_s[j] != x_s[j];
  return static_cast<double>(errors) / static_cast<double>(x_s.size());
}

void adam_step(std::span<Mat* const> weights, std::span<const Mat* const> grads, AdamState& state,
               const AdamParams& p) {
  if (weights.size() != grads.size()) throw std::invalid_argument("adam_step: tensor count mismatch");
  if (state.m.empty()) {
    for (const auto* w : weights) {
      state.m.push_back(Mat::Zero(w->rows(), w->cols()));
      state.v.push_back(Mat::Zero(w->rows(), w->cols()));
    }
  }
  if (state.m.size() != weights.size()) throw std::invalid_argument("adam_step: state does not match weights");
  ++state.t;
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < weights.size(); ++k) {
    Mat& w = *weights[k];
    const Mat& g = *grads[k];
    if (w.rows() != g.rows() || w.cols() != g.cols() || state.m[k].rows() != w.rows() ||
        state.m[k].cols() != w.cols())
      throw std::invalid_argument("adam_step: shape mismatch");
    Mat& m = state.m[k];
    Mat& v = state.v[k];
    m = p.beta1 * m + (1.0 - p.beta1) * g;
    v = p.beta2 * v + (1.0 - p.beta2) * g.cwiseProduct(g);
    w.array() -= p.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + p.eps);
  }
}

void adam_step(ECCTWeights& weights, const ECCTWeights& grads, AdamState& state, const AdamParams& p) {
  std::vector<Mat*> ws;
  std::vector<const Mat*> gs;
  for (auto& [name, m] : weights.tensors()) ws.push_back(m);
  for (const auto& [name, m] : grads.tensors()) gs.push_back(m);
  adam_step(std::span<Mat* const>(ws), std::span<const Mat* const>(gs), state, p);
}

TrainResult train_on(std::span<const ChannelSample> data, const MaskMatrix& mask, const ECCTConfig& cfg,
                     const TrainConfig& tcfg) {
  cfg.validate();
  tcfg.validate();
  if (data.size() < tcfg.batch_size) throw std::invalid_argument("train: dataset smaller than a batch");

  TrainResult result;
  result.weights = init_weights(cfg, derive_seed(tcfg.seed, 1));
  const AdamParams adam{tcfg.learning_rate, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps};
  AdamState state;
  Rng order_rng(derive_seed(tcfg.seed, 2));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t steps = data.size() / tcfg.batch_size;
  const double n_bits = static_cast<double>(cfg.n);

  for (std::size_t epoch = 0; epoch < tcfg.epochs && !result.aborted; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    std::size_t errors = 0, seen = 0;
    for (std::size_t step = 0; step < steps; ++step) {
      const std::size_t begin = step * tcfg.batch_size;
      const std::size_t chunks = (tcfg.batch_size + kChunk - 1) / kChunk;
      std::vector<ECCTWeights> partial(chunks);
      std::vector<double> chunk_loss(chunks, 0.0);
      std::vector<std::size_t> chunk_err(chunks, 0);
      std::optional<std::string> failure;
      try {
        parallel_for(chunks, [&](std::size_t c) {
          partial[c] = ECCTWeights::zeros(cfg);
          const std::size_t lo = begin + c * kChunk;
          const std::size_t hi = std::min(begin + tcfg.batch_size, lo + kChunk);
          for (std::size_t k = lo; k < hi; ++k) {
            const auto& s = data[order[k]];
            const auto fc = forward(s.y_tilde, result.weights, mask, cfg, LogitCoverage::support_only);
            const auto bce = bce_loss(fc.z_hat, s.target);
            if (!std::isfinite(bce.loss)) throw NumericError("non-finite loss", -1);
            chunk_loss[c] += bce.loss;
            const Vec zs = noise_sign(fc.z_hat);
            for (Eigen::Index j = 0; j < zs.size(); ++j)
              chunk_err[c] += (zs[j] < 0) != (s.target[static_cast<std::size_t>(j)] != 0);
            const auto g = backward(fc, result.weights, mask, cfg, bce.grad, {.keep_attention_grads = false});
            add_scaled(partial[c], g.weights, 1.0);
          }
        });
      } catch (const NumericError& e) {
        failure = e.what();
      }
      ECCTWeights grad = ECCTWeights::zeros(cfg);
      if (!failure) {
        for (std::size_t c = 0; c < chunks; ++c) add_scaled(grad, partial[c], 1.0 / static_cast<double>(tcfg.batch_size));
        for (const auto& [name, m] : grad.tensors())
          if (!m->allFinite()) failure = "non-finite gradient in " + name;
      }
      if (failure) {
        result.aborted = true;
        result.abort_reason = "epoch " + std::to_string(epoch + 1) + ", step " + std::to_string(step + 1) + ": " + *failure;
        break;
      }
      const ECCTWeights before = result.weights;
      adam_step(result.weights, grad, state, adam);
      bool finite = true;
      for (const auto& [name, m] : result.weights.tensors()) finite = finite && m->allFinite();
      if (!finite) {
        result.weights = before;
        result.aborted = true;
        result.abort_reason = "non-finite weights after step " + std::to_string(step + 1);
        break;
      }
      for (std::size_t c = 0; c < chunks; ++c) {
        loss_sum += chunk_loss[c];
        errors += chunk_err[c];
      }
      seen += tcfg.batch_size;
    }
    if (seen > 0) {
      result.history.push_back({epoch + 1, loss_sum / static_cast<double>(seen),
                                static_cast<double>(errors) / (n_bits * static_cast<double>(seen))});
    }
  }
  return result;
}

TrainResult train(const ParityCheckMatrix& h, const MaskMatrix& mask, const ECCTConfig& cfg,
                  const TrainConfig& tcfg) {
  tcfg.validate();
  const auto data = make_dataset(h, tcfg.m, tcfg.ebn0_db, derive_seed(tcfg.seed, 0));
  return train_on(data, mask, cfg, tcfg);
}

double dataset_ber(const ECCTWeights& w, const MaskMatrix& mask, const ECCTConfig& cfg,
                   std::span<const ChannelSample> data) {
  if (data.empty()) throw std::invalid_argument("dataset_ber: empty dataset");
  const std::size_t chunks = (data.size() + kChunk - 1) / kChunk;
  std::vector<std::size_t> errs(chunks, 0);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t hi = std::min(data.size(), (c + 1) * kChunk);
    for (std::size_t k = c * kChunk; k < hi; ++k) {
      const auto& s = data[k];
      const auto fc = forward(s.y_tilde, w, mask, cfg, LogitCoverage::support_only);
      const Vec xh = decide(s.y, fc.z_hat);
      for (Eigen::Index j = 0; j < xh.size(); ++j) errs[c] += xh[j] != s.xs[j];
    }
  });
  const auto total = std::accumulate(errs.begin(), errs.end(), std::size_t{0});
  return static_cast<double>(total) / (static_cast<double>(cfg.n) * static_cast<double>(data.size()));
}

double evaluate(const ECCTWeights& w, const ParityCheckMatrix& h, const MaskMatrix& mask,
                const ECCTConfig& cfg, std::size_t n_samples, double ebn0_db, std::uint64_t seed,
                CodewordSource source) {
  if (n_samples < 1) throw std::invalid_argument("evaluate: n_samples must be >= 1");
  std::optional<GeneratorMatrix> gen;
  if (source == CodewordSource::random_codeword) gen = derive_generator(h);
  const auto model = NoiseModel::from_ebn0(ebn0_db, h.rate());
  const std::size_t chunks = (n_samples + kChunk - 1) / kChunk;
  std::vector<std::size_t> errs(chunks, 0);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t hi = std::min(n_samples, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < hi; ++i) {
      auto rng = make_rng(seed, i);
      Bits cw(h.cols(), 0);
      if (gen) {
        Bits msg(gen->k);
        for (auto& b : msg) b = static_cast<std::uint8_t>(rng() & 1u);
        cw = gen->encode(msg);
      }
      const auto s = make_sample(h, std::move(cw), model, rng);
      const auto fc = forward(s.y_tilde, w, mask, cfg, LogitCoverage::support_only);
      const Vec xh = decide(s.y, fc.z_hat);
      for (Eigen::Index j = 0; j < xh.size(); ++j) errs[c] += xh[j] != s.xs[j];
    }
  });
  const auto total = std::accumulate(errs.begin(), errs.end(), std::size_t{0});
  return static_cast<double>(total) / (static_cast<double>(cfg.n) * static_cast<double>(n_samples));
}

GapFields generalization_gap(double train_ber, double test_ber) {
  GapFields g;
  g.gap = test_ber - train_ber;
  g.normalized_gap = g.gap / std::max(train_ber, kGapDivisorFloor);
  return g;
}

void write_history_csv(std::ostream& out, std::span<const EpochStats> history) {
  out << "epoch,loss,train_ber\n";
  out.precision(17);
  for (const auto& e : history) out << e.epoch << ',' << e.loss << ',' << e.train_ber << '\n';
}

}  // namespace ecct
