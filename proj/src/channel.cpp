#include "ecct/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ecct {

NoiseModel NoiseModel::from_ebn0(double ebn0_db, double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("code rate must lie in (0, 1]");
  NoiseModel m;
  m.ebn0_db = ebn0_db;
  m.rate = rate;
  m.sigma = std::sqrt(1.0 / (2.0 * rate * std::pow(10.0, ebn0_db / 10.0)));
  return m;
}

Vec bpsk_modulate(std::span<const std::uint8_t> bits) {
  Vec xs(static_cast<Eigen::Index>(bits.size()));
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] > 1) throw std::invalid_argument("bpsk_modulate: bits must be 0 or 1");
    xs[static_cast<Eigen::Index>(j)] = bits[j] ? -1.0 : 1.0;
  }
  return xs;
}

Vec transmit(const Vec& xs, const NoiseModel& model, Rng& rng) {
  if (!(model.sigma > 0.0)) throw std::invalid_argument("transmit: sigma must be positive");
  std::normal_distribution<double> noise(0.0, model.sigma);
  Vec y(xs.size());
  for (Eigen::Index j = 0; j < xs.size(); ++j) y[j] = xs[j] + noise(rng);
  return y;
}

Bits hard_decision(const Vec& y) {
  Bits b(static_cast<std::size_t>(y.size()));
  for (Eigen::Index j = 0; j < y.size(); ++j) b[static_cast<std::size_t>(j)] = y[j] < 0.0 ? 1 : 0;
  return b;
}

Vec preprocess(const Vec& y, const ParityCheckMatrix& h, SyndromeEmbedding embedding) {
  if (static_cast<std::size_t>(y.size()) != h.cols())
    throw std::invalid_argument("preprocess: received vector length does not match n");
  const auto n = static_cast<Eigen::Index>(h.cols());
  const auto s = syndrome(h, hard_decision(y));
  Vec yt(static_cast<Eigen::Index>(h.seq_len()));
  yt.head(n) = y.cwiseAbs();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v = embedding == SyndromeEmbedding::plus_minus_one ? (s[i] ? -1.0 : 1.0) : double(s[i]);
    yt[n + static_cast<Eigen::Index>(i)] = v;
  }
  return yt;
}

ChannelSample make_sample(const ParityCheckMatrix& h, Bits codeword, const NoiseModel& model,
                          Rng& rng) {
  ChannelSample s;
  s.xs = bpsk_modulate(codeword);
  s.x = std::move(codeword);
  s.y = transmit(s.xs, model, rng);
  s.z = s.y.cwiseProduct(s.xs);
  s.y_tilde = preprocess(s.y, h);
  s.target = hard_decision(s.z);
  return s;
}

double q_function(double t) { return 0.5 * std::erfc(t / std::sqrt(2.0)); }

double tail_probability(double b_x, double b_emb, double rho, std::size_t n) {
  if (!(b_x > 0.0) || !(b_emb > 0.0) || !(rho > 0.0))
    throw std::invalid_argument("tail_probability: b_x, B_emb and rho must be positive");
  const double tau = b_x / b_emb;
  const double p = static_cast<double>(n) * (q_function((tau - 1.0) / rho) + q_function((tau + 1.0) / rho));
  return std::clamp(p, 0.0, 1.0);
}

void write_samples_csv(std::ostream& out, std::span<const ChannelSample> samples) {
  if (samples.empty()) return;
  const auto n = samples.front().y.size();
  out << "index";
  for (Eigen::Index j = 0; j < n; ++j) out << ",y" << j;
  for (Eigen::Index j = 0; j < n; ++j) out << ",z" << j;
  for (Eigen::Index j = 0; j < n; ++j) out << ",target" << j;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    out << i;
    for (Eigen::Index j = 0; j < n; ++j) out << ',' << s.y[j];
    for (Eigen::Index j = 0; j < n; ++j) out << ',' << s.z[j];
    for (auto t : s.target) out << ',' << int(t);
    out << '\n';
  }
}

}  // namespace ecct
