#include "ecct/channel.hpp"
#include "ecct/codes.hpp"
#include "ecct/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace ecct;

namespace {

// Gaussian upper tail by composite Simpson integration of the density.
double q_simpson(double t) {
  const double hi = t + 40.0;
  const int n = 200000;
  const double h = (hi - t) / n;
  const auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); };
  double s = phi(t) + phi(hi);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * phi(t + i * h);
  return s * h / 3.0;
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_CASE("bpsk mapping") {
  CHECK(bpsk_modulate(Bits{0, 0, 0}) == Vec::Ones(3));
  Vec v(2);
  v << -1, 1;
  CHECK(bpsk_modulate(Bits{1, 0}) == v);
  auto rng = make_rng(1, 0);
  for (int t = 0; t < 100; ++t) {
    Bits a(9), b(9), c(9);
    for (int i = 0; i < 9; ++i) {
      a[i] = rng() & 1u;
      b[i] = rng() & 1u;
      c[i] = a[i] ^ b[i];
    }
    CHECK(bpsk_modulate(c) == bpsk_modulate(a).cwiseProduct(bpsk_modulate(b)));
  }
}

TEST_CASE("noise model") {
  const auto m = NoiseModel::from_ebn0(2.0, 4.0 / 7.0);
  CHECK(m.sigma * m.sigma == doctest::Approx(1.0 / (2.0 * (4.0 / 7.0) * std::pow(10.0, 0.2))).epsilon(1e-14));
  const auto h = hamming_7_4();
  CHECK(h.rate() == doctest::Approx(4.0 / 7.0));
}

TEST_CASE("transmit statistics") {
  NoiseModel m{0.0, 1.0, 0.7};
  auto rng = make_rng(11, 0);
  const int N = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < N; ++i) {
    const Vec y = transmit(Vec::Ones(1), m, rng);
    const double w = y[0] - 1.0;
    sum += w;
    sq += w * w;
  }
  const double mean = sum / N;
  CHECK(std::abs(mean) <= 4.0 * m.sigma / std::sqrt(double(N)));
  const double var = sq / N - mean * mean;
  CHECK(std::abs(var / (m.sigma * m.sigma) - 1.0) < 0.05);

  NoiseModel quiet{0.0, 1.0, 1e-300};
  auto r2 = make_rng(1, 1);
  Vec xs(3);
  xs << 1, -1, 1;
  CHECK((transmit(xs, quiet, r2) - xs).cwiseAbs().maxCoeff() < 1e-290);
}

TEST_CASE("preprocess layout") {
  const auto h = hamming_7_4();
  const Vec clean = Vec::Ones(7);
  const Vec yt = preprocess(clean, h, SyndromeEmbedding::plus_minus_one);
  CHECK(yt.size() == 10);
  CHECK(yt == Vec::Ones(10));
  for (int j = 0; j < 7; ++j) {
    Vec y = Vec::Constant(7, 0.8);
    y[j] = -0.3;
    const Vec t = preprocess(y, h, SyndromeEmbedding::plus_minus_one);
    CHECK(t[j] == doctest::Approx(0.3));
    for (int i = 0; i < 3; ++i) CHECK(t[7 + i] == (h(i, j) ? -1.0 : 1.0));
    const Vec z = preprocess(y, h, SyndromeEmbedding::zero_one);
    for (int i = 0; i < 3; ++i) CHECK(z[7 + i] == (h(i, j) ? 1.0 : 0.0));
  }
  const auto g = derive_generator(h);
  for (unsigned msg = 0; msg < 16; ++msg) {
    Bits u(4);
    for (int i = 0; i < 4; ++i) u[i] = (msg >> i) & 1u;
    const Vec t = preprocess(bpsk_modulate(g.encode(u)), h, SyndromeEmbedding::plus_minus_one);
    CHECK(t.tail(3) == Vec::Ones(3));
  }
  CHECK_THROWS(preprocess(Vec::Ones(6), h, SyndromeEmbedding::plus_minus_one));
  // Ties at exactly zero decide to bit 0.
  CHECK(hard_decision(Vec::Zero(2)) == Bits{0, 0});
}

TEST_CASE("sample invariants") {
  const auto h = random_regular_code(24, 12, 3, 1);
  const auto g = derive_generator(h);
  const auto m = NoiseModel::from_ebn0(1.0, h.rate());
  for (std::uint64_t i = 0; i < 200; ++i) {
    auto rng = make_rng(5, i);
    Bits u(g.k);
    for (auto& b : u) b = rng() & 1u;
    const auto s = make_sample(h, g.encode(u), m, rng);
    CHECK((s.y - s.xs.cwiseProduct(s.z)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.y_tilde.size() == 36);
    CHECK(s.y_tilde.head(24).minCoeff() >= 0.0);
    for (int k = 24; k < 36; ++k) CHECK(std::abs(s.y_tilde[k]) == 1.0);
    for (int j = 0; j < 24; ++j) {
      const double sy = s.y[j] < 0 ? -1.0 : 1.0, sz = s.z[j] < 0 ? -1.0 : 1.0;
      CHECK(sy * sz == s.xs[j]);
      CHECK(s.target[j] == (s.z[j] < 0 ? 1 : 0));
    }
  }
}

TEST_CASE("all-zero trick symmetry") {
  const auto h = hamming_7_4();
  const auto g = derive_generator(h);
  const auto m = NoiseModel::from_ebn0(2.0, h.rate());
  const Bits fixed = g.encode(Bits{1, 0, 1, 1});
  const int N = 10000;
  std::vector<double> a, b;
  std::vector<int> ta(7, 0), tb(7, 0);
  for (int i = 0; i < N; ++i) {
    auto r1 = make_rng(21, i), r2 = make_rng(22, i);
    const auto s0 = make_sample(h, Bits(7, 0), m, r1);
    const auto s1 = make_sample(h, fixed, m, r2);
    for (int j = 0; j < 7; ++j) {
      a.push_back(s0.y_tilde[j]);
      b.push_back(s1.y_tilde[j]);
      ta[j] += s0.target[j];
      tb[j] += s1.target[j];
    }
  }
  // KS critical value at significance 0.01.
  const double n = a.size();
  CHECK(ks_statistic(a, b) < 1.628 * std::sqrt(2.0 / n));
  for (int j = 0; j < 7; ++j) {
    const double p1 = double(ta[j]) / N, p2 = double(tb[j]) / N, p = 0.5 * (p1 + p2);
    const double z = (p1 - p2) / std::sqrt(p * (1 - p) * 2.0 / N);
    CHECK(std::abs(z) < 2.576);
  }
}

TEST_CASE("q function") {
  CHECK(q_function(0.0) == 0.5);
  for (double t : {0.3, 1.0, 2.5, 4.0}) CHECK(q_function(-t) + q_function(t) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(q_function(1.2816) - 0.1) < 1e-4);
  for (double t : {-1.0, 0.0, 0.5, 1.2816, 2.0, 3.0}) CHECK(q_function(t) == doctest::Approx(q_simpson(t)).epsilon(1e-9));
}

TEST_CASE("tail probability") {
  CHECK(tail_probability(1.0, 1.0, 1.0, 1) == doctest::Approx(0.5 + q_function(2.0)).epsilon(1e-15));
  CHECK(tail_probability(1e6, 1.0, 0.5, 7) == 0.0);
  CHECK(tail_probability(0.01, 1.0, 0.5, 7) == 1.0);
  CHECK_THROWS(tail_probability(0.0, 1.0, 1.0, 1));
  CHECK_THROWS(tail_probability(1.0, -1.0, 1.0, 1));
  CHECK_THROWS(tail_probability(1.0, 1.0, 0.0, 1));

  const double rho = 0.6, tau = 1.5;
  auto rng = make_rng(9, 0);
  std::normal_distribution<double> normal(0.0, rho);
  const int N = 1000000;
  int hits = 0;
  for (int i = 0; i < N; ++i) hits += std::abs(1.0 + normal(rng)) > tau;
  const double p = tail_probability(tau, 1.0, rho, 1);
  CHECK(std::abs(double(hits) / N - p) <= 3.0 * std::sqrt(p * (1 - p) / N));
}

TEST_CASE("sample csv") {
  const auto h = hamming_7_4();
  auto rng = make_rng(1, 0);
  std::vector<ChannelSample> s{make_sample(h, Bits(7, 0), NoiseModel::from_ebn0(2.0, h.rate()), rng)};
  std::ostringstream out;
  write_samples_csv(out, s);
  const auto text = out.str();
  CHECK(text.rfind("index,y0,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
}
