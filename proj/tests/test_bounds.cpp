#include "ecct/bounds.hpp"
#include "ecct/channel.hpp"
#include "ecct/rng.hpp"
#include "bound_reference.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace ecct;
using reference::HP;

namespace {

NormBudget unit() { return NormBudget::unit(); }

NormBudget random_budget(Rng& rng, double lo = 0.5, double hi = 2.0) {
  std::uniform_real_distribution<double> U(std::log(lo), std::log(hi));
  NormBudget nb;
  for (double* v : {&nb.b_x, &nb.B_qk, &nb.B_v, &nb.B_f1, &nb.B_f2, &nb.b_o1, &nb.b_o2, &nb.w, &nb.L_sigma})
    *v = std::exp(U(rng));
  nb.B_emb = 1.0;
  return nb;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

BoundInputs inputs(std::size_t m, std::size_t L, std::size_t d, std::size_t u, std::size_t T, std::size_t P,
                   const NormBudget& nb) {
  BoundInputs in;
  in.m = m;
  in.dims = {L, d, u, T};
  in.P = P;
  in.nb = nb;
  return in;
}

}  // namespace

TEST_CASE("dense per-weight constants") {
  const auto s = lipschitz_dense(unit(), 10);
  CHECK(s.o2 == 10.0);
  CHECK(s.qk == 100.0);
  CHECK(s.v == 10.0);
  auto nb = unit();
  nb.b_x = 2.0;
  CHECK(lipschitz_dense(nb, 10).qk == 800.0);

  auto rng = make_rng(31, 0);
  for (int t = 0; t < 50; ++t) {
    const auto b = random_budget(rng);
    const std::size_t L = 5 + rng() % 200;
    const auto x = lipschitz_dense(b, L);
    const HP l = L, core = HP(b.B_f2) * b.L_sigma * b.B_f1 * b.B_v;
    CHECK(rel(x.o2, double(HP(b.b_o1) * core * l * b.b_x)) <= 1e-14);
    CHECK(rel(x.o1, double(HP(b.b_o2) * core * l * b.b_x)) <= 1e-14);
    CHECK(rel(x.f2, double(HP(b.b_o1) * b.b_o2 * b.L_sigma * b.B_f1 * b.B_v * l * b.b_x)) <= 1e-14);
    CHECK(rel(x.f1, double(HP(b.b_o1) * b.b_o2 * b.L_sigma * b.B_f2 * b.B_v * l * b.b_x)) <= 1e-14);
    CHECK(rel(x.v, double(HP(b.b_o1) * b.b_o2 * b.L_sigma * b.B_f2 * b.B_f1 * l * b.b_x)) <= 1e-14);
    CHECK(rel(x.qk, double(HP(b.b_o1) * core * l * l * pow(HP(b.b_x), 3) * b.w)) <= 1e-14);
  }
  nb.w = -1.0;
  CHECK_THROWS(lipschitz_dense(nb, 10));
}

TEST_CASE("sparse query-key constant") {
  CHECK(lipschitz_qk_sparse(unit(), 16, 4) == doctest::Approx(128.0).epsilon(1e-15));
  CHECK_THROWS(lipschitz_qk_sparse(unit(), 16, 17));
  CHECK_THROWS(lipschitz_qk_sparse(unit(), 16, 0));
  auto rng = make_rng(32, 0);
  for (int t = 0; t < 50; ++t) {
    const auto b = random_budget(rng);
    const std::size_t L = 2 + rng() % 500, P = 1 + rng() % L;
    const double dense = lipschitz_dense(b, L).qk;
    CHECK(rel(lipschitz_qk_sparse(b, L, L), dense) <= 1e-12);
    CHECK(rel(lipschitz_qk_sparse(b, L, P) / dense, std::sqrt(double(P) / L)) <= 1e-12);
    CHECK(lipschitz_qk_sparse(b, L, P) <= dense * (1 + 1e-12));
    const auto s = lipschitz_sparse(b, L, P);
    CHECK(s.variant == LipschitzVariant::sparse);
    CHECK(s.v == lipschitz_dense(b, L).v);
  }
}

TEST_CASE("layer sensitivity") {
  CHECK(alpha_t(unit(), 1) == 3.0);
  CHECK(alpha_t(unit(), 16) == doctest::Approx(12.0));
  auto rng = make_rng(33, 0);
  for (int t = 0; t < 50; ++t) {
    const auto b = random_budget(rng);
    const std::size_t P = 1 + rng() % 100;
    const HP ref = sqrt(HP(P)) * b.L_sigma * b.B_v * b.B_f1 * b.B_f2 * (1 + 2 * HP(b.B_qk) * b.b_x * b.b_x);
    CHECK(rel(alpha_t(b, P), double(ref)) <= 1e-14);
    CHECK(rel(alpha_t(b, 4 * P), 2.0 * alpha_t(b, P)) <= 1e-14);
  }
}

TEST_CASE("stacked global constant") {
  const double expect = std::log(std::pow(10.0, 1.5) * std::sqrt(10.0) * std::sqrt(10.0) * 3.0);
  CHECK(log_lambda_T(unit(), 10, 10, 2) == doctest::Approx(expect).epsilon(1e-15));
  CHECK(log_lambda_T(unit(), 10, 10, 2) == doctest::Approx(std::log(100.0 * 3.0 * std::sqrt(10.0))).epsilon(1e-15));
  double prev = -1e300;
  for (std::size_t T = 1; T <= 8; ++T) {
    const double v = log_lambda_T(unit(), 10, 4, T);
    CHECK(v > prev);
    prev = v;
  }
  auto rng = make_rng(34, 0);
  for (int t = 0; t < 50; ++t) {
    const auto b = random_budget(rng);
    const std::size_t L = 10 + rng() % 300, P = 1 + rng() % L, T = 1 + rng() % 12;
    CHECK(rel(log_lambda_T(b, L, P, T), double(log(reference::lambda_T(b, L, P, T)))) <= 1e-12);
    if (T > 1) {
      const double step = std::log(std::sqrt(double(P)) * b.B_v * b.B_f1 * b.B_f2 * (1 + 2 * b.B_qk * b.b_x * b.b_x));
      CHECK(std::abs(log_lambda_T(b, L, P, T) - log_lambda_T(b, L, P, T - 1) - step) <= 1e-12 * (1 + std::abs(step)));
    }
    // A single layer equals the sparse constant B L^1.5 sqrt(P) up to the differing prefix bookkeeping.
    CHECK(rel(log_lambda_T(b, L, P, 1),
              std::log(lipschitz_qk_sparse(b, L, P))) <= 1e-12);
  }
  auto z = unit();
  z.B_v = 0.0;
  CHECK(log_lambda_T(z, 10, 4, 3) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("bound totals against a high-precision transcription") {
  const auto in = inputs(100, 10, 2, 1, 1, 10, unit());
  const auto r = gen_bound(Theorem::T1, in);
  const double ref = double(reference::total(18, reference::B(unit()) * 100, 10 + 4 * 4, 100, 0.05, 2));
  CHECK(rel(r.total, ref) <= 1e-12);
  CHECK(r.total == doctest::Approx(r.terms.statistical + r.terms.confidence + r.terms.complexity + r.terms.tail));
  CHECK(r.exponent == 26.0);

  auto rng = make_rng(35, 0);
  for (int t = 0; t < 40; ++t) {
    const auto b = random_budget(rng);
    const std::size_t L = 8 + rng() % 200, P = 1 + rng() % L, T = 1 + rng() % 6, d = 1 + rng() % 16, u = 1 + rng() % 4;
    const std::size_t m = 2 + rng() % 100000;
    auto bi = inputs(m, L, d, u, T, P, b);
    bi.delta = 0.01 + 0.9 * double(rng() % 1000) / 1000.0;
    const HP e1 = HP(L) + (2 * u + 2) * HP(d * d);
    const auto r1 = gen_bound(Theorem::T1, bi);
    const auto r2 = gen_bound(Theorem::T2, bi);
    const auto r3 = gen_bound(Theorem::T3, bi);
    const HP Lh = L;
    const double ref1 = double(reference::total(18, reference::B(b) * Lh * Lh, e1, m, bi.delta, d));
    const double ref2 = double(reference::total(18, reference::B(b) * pow(Lh, HP(1.5)) * sqrt(HP(P)), e1, m, bi.delta, d));
    const double ref3 = double(reference::total(6, reference::lambda_T(b, L, P, T), HP(L) + (2 * u + 2) * HP(d * d) * T, m, bi.delta, d));
    if (!r1.vacuous) CHECK(rel(r1.total, ref1) <= 1e-12);
    if (!r2.vacuous) CHECK(rel(r2.total, ref2) <= 1e-12);
    if (!r3.vacuous) CHECK(rel(r3.total, ref3) <= 1e-12);
    CHECK(r3.depth_warning == (10 * T > L));
  }
}

TEST_CASE("bound term properties") {
  auto in = inputs(1000, 64, 8, 1, 1, 16, unit());
  in.delta = 1.0;
  CHECK(gen_bound(Theorem::T1, in).terms.confidence == 0.0);
  in.delta = 0.05;
  CHECK(gen_bound(Theorem::T2, in).total <= gen_bound(Theorem::T1, in).total);
  CHECK(gen_bound(Theorem::T2, in).eta == doctest::Approx(0.5));
  in.P = 64;
  CHECK(rel(gen_bound(Theorem::T2, in).total, gen_bound(Theorem::T1, in).total) <= 1e-12);

  in.m = 1;
  CHECK_THROWS(gen_bound(Theorem::T1, in));
  in.m = 100;
  in.delta = 0.0;
  CHECK_THROWS(gen_bound(Theorem::T1, in));
  in.delta = 0.05;
  in.P = 65;
  CHECK_THROWS(gen_bound(Theorem::T3, in));
}

TEST_CASE("vacuous reporting") {
  auto nb = unit();
  nb.w = 1e-12;
  const auto r = gen_bound(Theorem::T3, inputs(100, 10, 2, 1, 1, 4, nb));
  CHECK(r.vacuous);
  CHECK(std::isinf(r.total));
  CHECK(bound_to_json(r).find("\"total\": \"inf\"") != std::string::npos);
}

TEST_CASE("monotonicity grids") {
  auto rng = make_rng(36, 0);
  const auto b = random_budget(rng, 1.0, 3.0);
  const auto total = [&](Theorem th, std::size_t m, std::size_t L, std::size_t T, const NormBudget& nb) {
    return gen_bound(th, inputs(m, L, 4, 1, T, 8, nb)).total;
  };
  for (auto th : {Theorem::T1, Theorem::T2, Theorem::T3}) {
    double prev = 0;
    for (std::size_t L : {16, 32, 64, 128, 256, 512}) {
      const double v = total(th, 1000, L, 1, b);
      CHECK(v > prev);
      prev = v;
    }
    prev = 1e300;
    for (std::size_t m : {10, 100, 1000, 10000, 100000, 1000000}) {
      const double v = total(th, m, 64, 1, b);
      CHECK(v < prev);
      prev = v;
    }
  }
  double prev = 0;
  for (std::size_t T = 1; T <= 6; ++T) {
    const double v = total(Theorem::T3, 1000, 256, T, b);
    CHECK(v > prev);
    prev = v;
  }
  for (double NormBudget::*field : {&NormBudget::b_x, &NormBudget::B_qk, &NormBudget::B_v, &NormBudget::B_f1,
                                     &NormBudget::B_f2, &NormBudget::b_o1, &NormBudget::w, &NormBudget::L_sigma}) {
    for (auto th : {Theorem::T1, Theorem::T2, Theorem::T3}) {
      if (th == Theorem::T3 && field == &NormBudget::B_qk) continue;  // enters only through T > 1
      double last = 0;
      for (double s : {1.0, 1.5, 2.0, 3.0, 5.0}) {
        auto nb = b;
        nb.*field *= s;
        const double v = total(th, 1000, 64, 1, nb);
        if (s > 1.0) CHECK(v > last);
        last = v;
      }
    }
    double last = 0;
    for (double s : {1.0, 1.5, 2.0, 3.0, 5.0}) {
      auto nb = b;
      nb.*field *= s;
      const double v = total(Theorem::T3, 1000, 256, 3, nb);
      if (s > 1.0) CHECK(v > last);
      last = v;
    }
  }
}

TEST_CASE("log-domain finiteness") {
  auto rng = make_rng(37, 0);
  for (int t = 0; t < 300; ++t) {
    const auto b = random_budget(rng, 1e-6, 1e6);
    const std::size_t L = 2 + rng() % 10000, P = 1 + rng() % L, T = 1 + rng() % 64;
    const std::size_t m = 2 + rng() % 1000000000000ULL;
    const auto in = inputs(m, L, 32, 2, T, P, b);
    for (auto th : {Theorem::T1, Theorem::T2, Theorem::T3}) {
      const auto r = gen_bound(th, in);
      CHECK(std::isfinite(r.log_lambda));
      CHECK(std::isfinite(r.terms.statistical));
      CHECK(std::isfinite(r.terms.confidence));
      CHECK((r.vacuous || std::isfinite(r.total)));
    }
  }
}

TEST_CASE("covering numbers") {
  const Dims dims{10, 4, 1, 1};
  const auto ls = lipschitz_dense(unit(), 10);
  CHECK(log_covering_number(1e300, ls, dims, unit()) < 1e-280);
  double prev = 1e300;
  for (double eps : {1e-6, 1e-4, 1e-2, 1.0, 1e2}) {
    const double v = log_covering_number(eps, ls, dims, unit());
    CHECK(v < prev);
    prev = v;
  }
  CHECK_THROWS(log_covering_number(0.0, ls, dims, unit()));
  CHECK_THROWS(log_covering_aggregate(-1.0, 0.0, 1.0, 6.0, 4));

  // With unit norms every per-weight radius is at least the aggregated one, so
  // the product bound lies below the aggregated form once o1's d exponent is counted.
  for (double eps : {1e-3, 0.1, 10.0}) {
    for (std::size_t d : {2, 4, 8}) {
      for (std::size_t u : {1, 2}) {
        const Dims dd{10, d, u, 1};
        const double per = log_covering_number(eps, ls, dd, unit());
        const double exponent = 10.0 + (2.0 * u + 2.0) * d * d;
        const double agg = log_covering_aggregate(eps, std::log(100.0), exponent + d, 6.0 * 2.0, d);
        CHECK(per <= agg * (1 + 1e-12));
        // Cross-check the aggregate expression directly.
        CHECK(rel(log_covering_aggregate(eps, std::log(100.0), exponent, 12.0, d),
                  exponent * std::log(1 + 12.0 * std::sqrt(double(d)) * 100.0 / eps)) <= 1e-12);
      }
    }
  }

  for (std::size_t T = 1; T <= 4; ++T) {
    const Dims dt{36, 4, 1, T};
    const auto layers = lipschitz_layers(unit(), 36, 9, T);
    CHECK(layers.front().qk == doctest::Approx(std::exp(log_lambda_T(unit(), 36, 9, T))));
    const double exponent = 36.0 + 4.0 * 16.0 * T + 4.0;
    const double t = 4.0 * T + 2.0;
    for (double eps : {1e-2, 1.0}) {
      const double per = log_covering_number(eps, layers, dt, unit());
      CHECK(per <= log_covering_aggregate(eps, log_lambda_T(unit(), 36, 9, T), exponent, 2.0 * t, 4) * (1 + 1e-12));
      CHECK(per > 0.0);
    }
  }
}

TEST_CASE("unbounded-input bound search") {
  BoundInputs in = inputs(1000000000000ULL, 10, 2, 1, 1, 6, unit());
  in.rho = 0.5;
  in.B_emb = 1.0;
  in.n = 7;
  const SearchSpec spec{200, 80};
  const auto r = gen_bound_awgn(in, spec);
  CHECK(r.theorem == Theorem::T4);
  CHECK(r.terms.tail > 0.0);
  CHECK(r.total == doctest::Approx(r.terms.statistical + r.terms.confidence + r.terms.complexity + r.terms.tail));

  const double lo = std::max(0.0, 1.0 - 5.0 * 0.5) + 1e-6, hi = 1.0 + 10.0 * 0.5;
  const auto objective = [&](double bx) {
    auto at = in;
    at.nb.b_x = bx;
    return gen_bound(Theorem::T3, at).total + tail_probability(bx, 1.0, 0.5, 7);
  };
  const double cell = (std::log(hi) - std::log(lo)) / 199.0;
  for (int i = 0; i < 200; ++i) CHECK(r.total <= objective(std::exp(std::log(lo) + cell * i)) + 1e-15);

  double best = 1e300, arg = 0;
  const int dense = 2000;
  for (int i = 0; i < dense; ++i) {
    const double x = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (dense - 1.0));
    const double v = objective(x);
    if (v < best) {
      best = v;
      arg = x;
    }
  }
  CHECK(std::abs(std::log(r.bx_star) - std::log(arg)) <= cell);
  CHECK(r.total <= best + 1e-15);

  in.rho = 1e-4;
  const auto q = gen_bound_awgn(in, spec);
  CHECK(q.bx_star >= 1.0);
  CHECK(q.bx_star <= 1.0 + 10.0 * 1e-4 + 1e-12);
  CHECK(q.terms.tail < 1e-6);

  CHECK_THROWS(gen_bound_awgn(in, SearchSpec{100, 10}));
  in.rho = 0.0;
  CHECK_THROWS(gen_bound_awgn(in, spec));
}

TEST_CASE("contraction delegate and names") {
  CHECK(eta(4, 16, 2) == 0.25);
  CHECK(eta(10, 10, 3) == 1.0);
  CHECK_THROWS(eta(11, 10, 1));
  CHECK(parse_theorem("3") == Theorem::T3);
  CHECK(parse_theorem("T4") == Theorem::T4);
  CHECK_THROWS(parse_theorem("T5"));
  const auto table = bound_to_table(gen_bound(Theorem::T1, inputs(100, 10, 2, 1, 1, 10, unit())));
  CHECK(table.rfind("theorem", 0) == 0);
}
