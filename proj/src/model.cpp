#include "ecct/model.hpp"

#include "ecct/linalg.hpp"
#include "ecct/rng.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ecct {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::gelu: return "gelu";
    case Activation::identity: return "identity";
  }
  return "relu";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "gelu") return Activation::gelu;
  if (s == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

double activation_lipschitz(Activation a) { return a == Activation::gelu ? 1.13 : 1.0; }

void ECCTConfig::validate() const {
  if (n < 2 || r < 1) throw std::invalid_argument("config: need n >= 2 and r >= 1");
  if (d < 1 || u < 1 || T < 1) throw std::invalid_argument("config: need d, u, T >= 1");
}

ECCTConfig ECCTConfig::for_code(const ParityCheckMatrix& h, std::size_t d, std::size_t u, std::size_t T) {
  ECCTConfig c;
  c.n = h.cols();
  c.r = h.rows();
  c.d = d;
  c.u = u;
  c.T = T;
  return c;
}

ECCTWeights ECCTWeights::zeros(const ECCTConfig& cfg) {
  cfg.validate();
  const auto L = static_cast<Eigen::Index>(cfg.L());
  const auto d = static_cast<Eigen::Index>(cfg.d);
  const auto h = static_cast<Eigen::Index>(cfg.u * cfg.d);
  ECCTWeights w;
  w.emb = Mat::Zero(L, d);
  w.layers.resize(cfg.T);
  for (auto& l : w.layers) {
    l.qk = Mat::Zero(d, d);
    l.v = Mat::Zero(d, d);
    l.f1 = Mat::Zero(d, h);
    l.f2 = Mat::Zero(h, d);
  }
  w.o1 = Mat::Zero(d, 1);
  w.o2 = Mat::Zero(L, static_cast<Eigen::Index>(cfg.n));
  return w;
}

std::vector<std::pair<std::string, Mat*>> ECCTWeights::tensors() {
  std::vector<std::pair<std::string, Mat*>> out;
  out.emplace_back("emb", &emb);
  for (std::size_t t = 0; t < layers.size(); ++t) {
    const auto s = std::to_string(t + 1);
    out.emplace_back("qk" + s, &layers[t].qk);
    out.emplace_back("v" + s, &layers[t].v);
    out.emplace_back("f1_" + s, &layers[t].f1);
    out.emplace_back("f2_" + s, &layers[t].f2);
  }
  out.emplace_back("o1", &o1);
  out.emplace_back("o2", &o2);
  return out;
}

std::vector<std::pair<std::string, const Mat*>> ECCTWeights::tensors() const {
  auto mut = const_cast<ECCTWeights*>(this)->tensors();
  std::vector<std::pair<std::string, const Mat*>> out;
  out.reserve(mut.size());
  for (auto& [name, m] : mut) out.emplace_back(name, m);
  return out;
}

std::size_t ECCTWeights::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, m] : tensors()) total += static_cast<std::size_t>(m->size());
  return total;
}

void ECCTWeights::check(const ECCTConfig& cfg) const {
  const auto ref = zeros(cfg);
  const auto mine = tensors();
  const auto want = ref.tensors();
  if (mine.size() != want.size()) throw std::invalid_argument("weights: layer count does not match config");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].second->rows() != want[i].second->rows() || mine[i].second->cols() != want[i].second->cols())
      throw std::invalid_argument("weights: tensor '" + mine[i].first + "' has the wrong shape");
    if (!mine[i].second->allFinite())
      throw std::invalid_argument("weights: tensor '" + mine[i].first + "' is not finite");
  }
}

bool operator==(const ECCTWeights& a, const ECCTWeights& b) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    const Mat& x = *ta[i].second;
    const Mat& y = *tb[i].second;
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (!std::equal(x.data(), x.data() + x.size(), y.data())) return false;
  }
  return true;
}

NormBudget NormBudget::unit() {
  NormBudget nb;
  nb.b_x = nb.B_qk = nb.B_v = nb.B_f1 = nb.B_f2 = nb.B_emb = 1.0;
  nb.b_o1 = nb.b_o2 = nb.w = 1.0;
  nb.L_sigma = nb.L_sm = 1.0;
  return nb;
}

ECCTWeights init_weights(const ECCTConfig& cfg, std::uint64_t seed) {
  auto w = ECCTWeights::zeros(cfg);
  Rng rng(derive_seed(seed, 0x1417));
  const double a = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  const double b = 1.0 / std::sqrt(static_cast<double>(cfg.L()));
  for (auto& [name, m] : w.tensors()) {
    const double lim = name == "o2" ? b : a;
    std::uniform_real_distribution<double> dist(-lim, lim);
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = dist(rng);
  }
  return w;
}

Mat embed(const Vec& y_tilde, const Mat& w_emb) {
  if (y_tilde.size() != w_emb.rows()) throw std::invalid_argument("embed: length mismatch");
  return y_tilde.asDiagonal() * w_emb;
}

MaskMatrix effective_mask(const ParityCheckMatrix& h, const ECCTConfig& cfg) {
  return cfg.masked ? build_mask(h) : MaskMatrix::full(h.seq_len());
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

double act(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0 ? x : 0.0;
    case Activation::gelu: return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    case Activation::identity: return x;
  }
  return x;
}

double act_grad(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0 ? 1.0 : 0.0;
    case Activation::gelu: {
      const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
      const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
      return cdf + x * pdf;
    }
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

double logit_scale(const ECCTConfig& cfg) {
  return cfg.softmax_scale ? 1.0 / std::sqrt(static_cast<double>(cfg.d)) : 1.0;
}

void require_finite(const Mat& m, const char* what, int layer) {
  if (!m.allFinite())
    throw NumericError(std::string("non-finite ") + what + " in layer " + std::to_string(layer), layer);
}

}  // namespace

LayerCache attention_layer(const Mat& x_in, const LayerWeights& w, const MaskMatrix& support,
                           const ECCTConfig& cfg, LogitCoverage coverage) {
  const auto L = x_in.rows();
  if (static_cast<std::size_t>(L) != support.size()) throw std::invalid_argument("attention_layer: mask size mismatch");
  const double s = logit_scale(cfg);

  LayerCache c;
  c.x_in = x_in;
  c.xw = x_in * w.qk;
  c.u = Mat::Zero(L, L);
  c.a = Mat::Zero(L, L);
  c.h_att = Mat::Zero(L, x_in.cols());
  for (Eigen::Index i = 0; i < L; ++i) {
    const auto row = support.row(static_cast<std::size_t>(i));
    if (row.empty()) throw std::logic_error("attention_layer: empty attention support");
    if (coverage == LogitCoverage::all_pairs) {
      for (Eigen::Index j = 0; j < L; ++j) c.u(i, j) = s * c.xw.row(i).dot(x_in.row(j));
    } else {
      for (auto j : row) c.u(i, j) = s * c.xw.row(i).dot(x_in.row(j));
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (auto j : row) mx = std::max(mx, c.u(i, j));
    double sum = 0.0;
    for (auto j : row) {
      const double e = std::exp(c.u(i, j) - mx);
      c.a(i, j) = e;
      sum += e;
    }
    for (auto j : row) {
      c.a(i, j) /= sum;
      c.h_att.row(i) += c.a(i, j) * x_in.row(j);
    }
  }
  c.h_v = c.h_att * w.v;
  c.h_f1 = c.h_v * w.f1;
  c.h_sigma = c.h_f1.unaryExpr([a = cfg.activation](double x) { return act(a, x); });
  c.x_out = c.h_sigma * w.f2;
  return c;
}

ForwardCache forward(const Vec& y_tilde, const ECCTWeights& w, const MaskMatrix& support,
                     const ECCTConfig& cfg, LogitCoverage coverage) {
  if (static_cast<std::size_t>(y_tilde.size()) != cfg.L()) throw std::invalid_argument("forward: input length != L");
  if (w.layers.size() != cfg.T) throw std::invalid_argument("forward: weights have the wrong depth");
  ForwardCache fc;
  fc.coverage = coverage;
  fc.y_tilde = y_tilde;
  Mat x = embed(y_tilde, w.emb);
  require_finite(x, "embedding", 0);
  fc.layers.reserve(cfg.T);
  for (std::size_t t = 0; t < cfg.T; ++t) {
    fc.layers.push_back(attention_layer(x, w.layers[t], support, cfg, coverage));
    // relu maps NaN to 0, so the attention output is checked separately.
    require_finite(fc.layers.back().h_att, "attention", static_cast<int>(t + 1));
    require_finite(fc.layers.back().x_out, "activations", static_cast<int>(t + 1));
    x = fc.layers.back().x_out;
  }
  fc.x_final = std::move(x);
  fc.h_o1 = fc.x_final * w.o1;
  fc.z_hat = w.o2.transpose() * fc.h_o1;
  if (!fc.z_hat.allFinite()) throw NumericError("non-finite output logits", -1);
  return fc;
}

Vec noise_sign(const Vec& z_hat) {
  Vec s(z_hat.size());
  for (Eigen::Index j = 0; j < z_hat.size(); ++j) s[j] = sigmoid(z_hat[j]) >= 0.5 ? -1.0 : 1.0;
  return s;
}

Vec decide(const Vec& y, const Vec& z_hat) {
  if (y.size() != z_hat.size()) throw std::invalid_argument("decide: length mismatch");
  const Vec zs = noise_sign(z_hat);
  Vec x(y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) x[j] = (y[j] < 0 ? -1.0 : 1.0) * zs[j];
  return x;
}

GradientSet backward(const ForwardCache& cache, const ECCTWeights& w, const MaskMatrix& support,
                     const ECCTConfig& cfg, const Vec& dl_dzhat, const BackwardOptions& opt) {
  if (cache.layers.size() != w.layers.size() || cache.h_o1.size() != w.o2.rows() ||
      dl_dzhat.size() != w.o2.cols())
    throw std::invalid_argument("backward: cache does not match weights");
  const auto L = cache.h_o1.size();
  const double s = logit_scale(cfg);
  const bool all_pairs = cache.coverage == LogitCoverage::all_pairs;

  GradientSet g;
  g.weights.layers.resize(w.layers.size());
  g.weights.o2 = cache.h_o1 * dl_dzhat.transpose();
  const Vec dh = w.o2 * dl_dzhat;
  g.weights.o1 = cache.x_final.transpose() * dh;
  Mat dx = dh * w.o1.transpose();
  if (opt.keep_attention_grads) {
    g.d_u.resize(w.layers.size());
    g.d_a.resize(w.layers.size());
  }

  for (std::size_t tt = w.layers.size(); tt-- > 0;) {
    const auto& c = cache.layers[tt];
    const auto& lw = w.layers[tt];
    auto& lg = g.weights.layers[tt];

    lg.f2 = c.h_sigma.transpose() * dx;
    Mat d_pre = dx * lw.f2.transpose();
    for (Eigen::Index i = 0; i < d_pre.size(); ++i)
      d_pre.data()[i] *= act_grad(cfg.activation, c.h_f1.data()[i]);
    lg.f1 = c.h_v.transpose() * d_pre;
    const Mat d_v = d_pre * lw.f1.transpose();
    lg.v = c.h_att.transpose() * d_v;
    const Mat d_h = d_v * lw.v.transpose();

    const auto& x = c.x_in;
    const bool dense_grads = all_pairs || opt.keep_attention_grads;
    Mat d_a = dense_grads ? Mat::Zero(L, L) : Mat();
    Mat d_u = dense_grads ? Mat::Zero(L, L) : Mat();
    Mat dx_in = Mat::Zero(L, x.cols());
    Mat g_row = Mat::Zero(L, x.cols());  // dU * X
    Mat g_col = Mat::Zero(L, x.cols());  // dU^T * X
    std::vector<double> da_row, du_row;
    for (Eigen::Index i = 0; i < L; ++i) {
      const auto row = support.row(static_cast<std::size_t>(i));
      if (all_pairs) {
        for (Eigen::Index j = 0; j < L; ++j) d_a(i, j) = d_h.row(i).dot(x.row(j));
        // Softmax Jacobian: dU_ij = A_ij (dA_ij - sum_l A_il dA_il).
        double centre = 0.0;
        for (auto j : row) centre += c.a(i, j) * d_a(i, j);
        for (Eigen::Index j = 0; j < L; ++j) d_u(i, j) = c.a(i, j) * (d_a(i, j) - centre);
        for (Eigen::Index j = 0; j < L; ++j) {
          dx_in.row(j) += c.a(i, j) * d_h.row(i);
          g_row.row(i) += d_u(i, j) * x.row(j);
          g_col.row(j) += d_u(i, j) * x.row(i);
        }
        continue;
      }
      da_row.resize(row.size());
      du_row.resize(row.size());
      double centre = 0.0;
      for (std::size_t k = 0; k < row.size(); ++k) {
        da_row[k] = d_h.row(i).dot(x.row(row[k]));
        centre += c.a(i, row[k]) * da_row[k];
      }
      for (std::size_t k = 0; k < row.size(); ++k) {
        const auto j = row[k];
        du_row[k] = c.a(i, j) * (da_row[k] - centre);
        dx_in.row(j) += c.a(i, j) * d_h.row(i);
        g_row.row(i) += du_row[k] * x.row(j);
        g_col.row(j) += du_row[k] * x.row(i);
        if (dense_grads) {
          d_a(i, j) = da_row[k];
          d_u(i, j) = du_row[k];
        }
      }
    }
#ifndef NDEBUG
    if (dense_grads) assert(d_u.norm() <= d_a.norm() * (1.0 + 1e-12) + 1e-10);
#endif
    lg.qk = s * (x.transpose() * g_row);
    dx = dx_in + s * (g_row * lw.qk.transpose() + g_col * lw.qk);
    if (opt.keep_attention_grads) {
      g.d_u[tt] = std::move(d_u);
      g.d_a[tt] = std::move(d_a);
    }
  }
  g.weights.emb = cache.y_tilde.asDiagonal() * dx;
  g.d_x0 = std::move(dx);
  return g;
}

NormBudget measure_norm_budget(const ECCTWeights& w, std::span<const Vec> y_tildes,
                               const MaskMatrix& support, const ECCTConfig& cfg) {
  if (y_tildes.empty()) throw std::invalid_argument("measure_norm_budget: empty sample");
  NormBudget nb;
  nb.L_sigma = activation_lipschitz(cfg.activation);
  nb.L_sm = 1.0;
  nb.B_emb = spectral_norm(w.emb);
  for (const auto& l : w.layers) {
    nb.B_qk = std::max(nb.B_qk, spectral_norm(l.qk));
    nb.B_v = std::max(nb.B_v, spectral_norm(l.v));
    nb.B_f1 = std::max(nb.B_f1, spectral_norm(l.f1));
    nb.B_f2 = std::max(nb.B_f2, spectral_norm(l.f2));
  }
  nb.b_o1 = w.o1.norm();
  nb.b_o2 = w.o2.colwise().norm().maxCoeff();
  for (const auto& [name, m] : w.tensors()) nb.w = std::max(nb.w, m->cwiseAbs().maxCoeff());
  for (const auto& yt : y_tildes) {
    const auto fc = forward(yt, w, support, cfg, LogitCoverage::support_only);
    for (std::size_t t = 0; t < cfg.T; ++t)
      nb.b_x = std::max(nb.b_x, fc.layers[t].x_in.rowwise().norm().maxCoeff());
  }
  return nb;
}

}  // namespace ecct
