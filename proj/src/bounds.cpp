#include "ecct/bounds.hpp"

#include "ecct/channel.hpp"
#include "ecct/masking.hpp"

#include <json.hpp>

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ecct {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_nonnegative(const NormBudget& nb) {
  for (double v : {nb.b_x, nb.B_qk, nb.B_v, nb.B_f1, nb.B_f2, nb.B_emb, nb.b_o1, nb.b_o2, nb.w, nb.L_sigma, nb.L_sm})
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("norm budget entries must be finite and >= 0");
}

// log(1 + e^a) without overflow; a may be -inf.
double log1p_exp(double a) {
  if (a == -kInf) return 0.0;
  return a > 30.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

double lg(double x) { return x > 0.0 ? std::log(x) : -kInf; }

double log_step(const NormBudget& nb, std::size_t P) {
  return 0.5 * lg(static_cast<double>(P)) + lg(nb.B_v) + lg(nb.B_f1) + lg(nb.B_f2) +
         log1p_exp(std::log(2.0) + lg(nb.B_qk) + 2.0 * lg(nb.b_x));
}

// n * log(1 + 2 scale t L_i / eps)
double cover_term(double exponent, double scale, double t_factor, double lip, double eps) {
  return exponent * log1p_exp(std::log(2.0 * t_factor) + lg(scale) + lg(lip) - std::log(eps));
}

void check_dims(const Dims& dims) {
  if (dims.L < 1 || dims.d < 1 || dims.u < 1 || dims.T < 1) throw std::invalid_argument("L, d, u, T must be >= 1");
}

}  // namespace

LipschitzSet lipschitz_dense(const NormBudget& nb, std::size_t L) {
  require_nonnegative(nb);
  const double l = static_cast<double>(L);
  LipschitzSet s;
  s.variant = LipschitzVariant::dense;
  const double core = nb.B_f2 * nb.L_sigma * nb.B_f1 * nb.B_v;
  s.o2 = nb.b_o1 * core * l * nb.b_x;
  s.o1 = nb.b_o2 * core * l * nb.b_x;
  s.f2 = nb.b_o1 * nb.b_o2 * nb.L_sigma * nb.B_f1 * nb.B_v * l * nb.b_x;
  s.f1 = nb.b_o1 * nb.b_o2 * nb.L_sigma * nb.B_f2 * nb.B_v * l * nb.b_x;
  s.v = nb.b_o1 * nb.b_o2 * nb.L_sigma * nb.B_f2 * nb.B_f1 * l * nb.b_x;
  s.qk = nb.b_o1 * nb.L_sigma * nb.B_f2 * nb.B_f1 * nb.B_v * l * l * nb.b_x * nb.b_x * nb.b_x * nb.w;
  return s;
}

double lipschitz_qk_sparse(const NormBudget& nb, std::size_t L, std::size_t P) {
  require_nonnegative(nb);
  if (P < 1 || P > L) throw std::invalid_argument("lipschitz_qk_sparse: need 1 <= P <= L");
  const double k = nb.b_o1 * nb.L_sigma * nb.B_f2 * nb.B_f1 * nb.B_v;
  const double l = static_cast<double>(L);
  return std::pow(l, 1.5) * std::sqrt(static_cast<double>(P)) * nb.b_x * nb.b_x * nb.b_x * nb.w * k;
}

LipschitzSet lipschitz_sparse(const NormBudget& nb, std::size_t L, std::size_t P) {
  auto s = lipschitz_dense(nb, L);
  s.qk = lipschitz_qk_sparse(nb, L, P);
  s.variant = LipschitzVariant::sparse;
  return s;
}

double alpha_t(const NormBudget& nb, std::size_t P) {
  require_nonnegative(nb);
  if (P < 1) throw std::invalid_argument("alpha_t: P must be >= 1");
  return std::sqrt(static_cast<double>(P)) * nb.L_sigma * nb.B_v * nb.B_f1 * nb.B_f2 *
         (1.0 + 2.0 * nb.B_qk * nb.b_x * nb.b_x);
}

std::vector<LipschitzSet> lipschitz_layers(const NormBudget& nb, std::size_t L, std::size_t P, std::size_t T) {
  if (T < 1) throw std::invalid_argument("lipschitz_layers: T must be >= 1");
  const auto base = lipschitz_sparse(nb, L, P);
  const double a = alpha_t(nb, P);
  std::vector<LipschitzSet> out(T, base);
  double tail = 1.0;
  for (std::size_t i = T; i-- > 0;) {
    out[i].qk = base.qk * tail;
    out[i].v = base.v * tail;
    out[i].f1 = base.f1 * tail;
    out[i].f2 = base.f2 * tail;
    tail *= a;
  }
  return out;
}

double log_lambda_T(const NormBudget& nb, std::size_t L, std::size_t P, std::size_t T) {
  require_nonnegative(nb);
  if (T < 1) throw std::invalid_argument("log_lambda_T: T must be >= 1");
  if (P < 1 || P > L) throw std::invalid_argument("log_lambda_T: need 1 <= P <= L");
  double r = lg(nb.b_o1) + lg(nb.L_sigma) + lg(nb.B_v) + lg(nb.B_f1) + lg(nb.B_f2) + 3.0 * lg(nb.b_x) + lg(nb.w) +
             1.5 * std::log(static_cast<double>(L)) + 0.5 * std::log(static_cast<double>(P));
  if (T > 1) r += static_cast<double>(T - 1) * log_step(nb, P);
  return r;
}

double log_B(const NormBudget& nb) {
  require_nonnegative(nb);
  return 2.0 * lg(nb.b_o1) + lg(nb.L_sigma) + 2.0 * lg(nb.B_f1) + 2.0 * lg(nb.B_f2) + 2.0 * lg(nb.B_v) +
         lg(nb.B_qk) + 3.0 * lg(nb.b_x) + 2.0 * lg(nb.w);
}

double log_covering_number(double eps, const LipschitzSet& ls, const Dims& dims, const NormBudget& nb) {
  if (!(eps > 0.0)) throw std::invalid_argument("log_covering_number: eps must be positive");
  check_dims(dims);
  const double d = static_cast<double>(dims.d);
  const double u = static_cast<double>(dims.u);
  const double sd = std::sqrt(d);
  const double t = 6.0;
  return cover_term(d * d, sd * nb.B_qk, t, ls.qk, eps) + cover_term(d * d, sd * nb.B_v, t, ls.v, eps) +
         cover_term(u * d * d, sd * nb.B_f1, t, ls.f1, eps) + cover_term(u * d * d, sd * nb.B_f2, t, ls.f2, eps) +
         cover_term(d, nb.b_o1, t, ls.o1, eps) + cover_term(static_cast<double>(dims.L), nb.b_o2, t, ls.o2, eps);
}

double log_covering_number(double eps, const std::vector<LipschitzSet>& layers, const Dims& dims,
                           const NormBudget& nb) {
  if (!(eps > 0.0)) throw std::invalid_argument("log_covering_number: eps must be positive");
  check_dims(dims);
  if (layers.size() != dims.T) throw std::invalid_argument("log_covering_number: need one set per layer");
  const double d = static_cast<double>(dims.d);
  const double u = static_cast<double>(dims.u);
  const double sd = std::sqrt(d);
  const double t = 4.0 * static_cast<double>(dims.T) + 2.0;
  double r = cover_term(d, nb.b_o1, t, layers.back().o1, eps) +
             cover_term(static_cast<double>(dims.L), nb.b_o2, t, layers.back().o2, eps);
  for (const auto& ls : layers) {
    r += cover_term(d * d, sd * nb.B_qk, t, ls.qk, eps) + cover_term(d * d, sd * nb.B_v, t, ls.v, eps) +
         cover_term(u * d * d, sd * nb.B_f1, t, ls.f1, eps) + cover_term(u * d * d, sd * nb.B_f2, t, ls.f2, eps);
  }
  return r;
}

double log_covering_aggregate(double eps, double log_lambda, double exponent, double t_factor, std::size_t d) {
  if (!(eps > 0.0)) throw std::invalid_argument("log_covering_aggregate: eps must be positive");
  return exponent * log1p_exp(std::log(t_factor) + 0.5 * std::log(static_cast<double>(d)) + log_lambda - std::log(eps));
}

std::string to_string(Theorem t) {
  switch (t) {
    case Theorem::T1: return "T1";
    case Theorem::T2: return "T2";
    case Theorem::T3: return "T3";
    case Theorem::T4: return "T4";
  }
  return "?";
}

Theorem parse_theorem(const std::string& s) {
  if (s == "T1" || s == "1") return Theorem::T1;
  if (s == "T2" || s == "2") return Theorem::T2;
  if (s == "T3" || s == "3") return Theorem::T3;
  if (s == "T4" || s == "4") return Theorem::T4;
  throw std::invalid_argument("unknown theorem '" + s + "' (expected T1, T2, T3 or T4)");
}

BoundReport gen_bound(Theorem theorem, const BoundInputs& in) {
  check_dims(in.dims);
  require_nonnegative(in.nb);
  if (in.m < 2) throw std::invalid_argument("gen_bound: m must be >= 2");
  if (!(in.delta > 0.0 && in.delta <= 1.0)) throw std::invalid_argument("gen_bound: delta must lie in (0, 1]");
  const std::size_t L = in.dims.L;
  const double d = static_cast<double>(in.dims.d);
  const double u = static_cast<double>(in.dims.u);
  const double m = static_cast<double>(in.m);
  if (theorem != Theorem::T1 && (in.P < 1 || in.P > L)) throw std::invalid_argument("gen_bound: need 1 <= P <= L");

  BoundReport r;
  r.theorem = theorem;
  r.inputs = in;
  double t_eff = 1.0;
  switch (theorem) {
    case Theorem::T1:
      r.log_lambda = log_B(in.nb) + 2.0 * std::log(static_cast<double>(L));
      r.log_constant = std::log(18.0);
      r.eta = 1.0;
      break;
    case Theorem::T2:
      r.log_lambda = log_B(in.nb) + 1.5 * std::log(static_cast<double>(L)) + 0.5 * std::log(static_cast<double>(in.P));
      r.log_constant = std::log(18.0);
      r.eta = eta(in.P, L, 1);
      break;
    case Theorem::T3:
    case Theorem::T4:
      r.log_lambda = log_lambda_T(in.nb, L, in.P, in.dims.T);
      r.log_constant = std::log(6.0);
      r.eta = eta(in.P, L, in.dims.T);
      t_eff = static_cast<double>(in.dims.T);
      r.depth_warning = 10 * in.dims.T > L;
      break;
  }
  r.exponent = static_cast<double>(L) + (2.0 * u + 2.0) * d * d * t_eff;
  r.terms.statistical = 4.0 / std::sqrt(m);
  r.terms.confidence = std::sqrt(-std::log(in.delta) / (2.0 * m));
  const double log_arg = r.log_constant + 0.5 * (std::log(m) + std::log(d)) + r.log_lambda;
  if (!(log_arg > 0.0)) {
    r.vacuous = true;
    r.terms.complexity = kInf;
    r.total = kInf;
    return r;
  }
  r.terms.complexity = 12.0 * std::sqrt(r.exponent * log_arg / m);
  r.total = r.terms.statistical + r.terms.confidence + r.terms.complexity + r.terms.tail;
  return r;
}

BoundReport gen_bound_awgn(const BoundInputs& in, const SearchSpec& search) {
  if (!(in.rho > 0.0) || !(in.B_emb > 0.0)) throw std::invalid_argument("gen_bound_awgn: rho and B_emb must be positive");
  if (in.n < 1) throw std::invalid_argument("gen_bound_awgn: n must be >= 1");
  if (search.grid_points < 200) throw std::invalid_argument("gen_bound_awgn: grid needs at least 200 points");

  const auto objective = [&](double bx) {
    BoundInputs at = in;
    at.nb.b_x = bx;
    auto r = gen_bound(Theorem::T3, at);
    r.theorem = Theorem::T4;
    r.terms.tail = tail_probability(bx, in.B_emb, in.rho, in.n);
    r.total = r.vacuous ? kInf : r.terms.statistical + r.terms.confidence + r.terms.complexity + r.terms.tail;
    r.bx_star = bx;
    return r;
  };

  const double lo = std::max(0.0, in.B_emb * (1.0 - 5.0 * in.rho)) + 1e-6 * in.B_emb;
  double hi = in.B_emb * (1.0 + 10.0 * in.rho);
  if (hi <= lo) hi = lo * (1.0 + 1e-3);
  const double a = std::log(lo), b = std::log(hi);
  const std::size_t n = search.grid_points;
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);

  std::size_t best = 0;
  BoundReport best_r = objective(std::exp(grid[0]));
  for (std::size_t i = 1; i < n; ++i) {
    auto r = objective(std::exp(grid[i]));
    if (r.total < best_r.total) {
      best_r = r;
      best = i;
    }
  }

  double x0 = grid[best > 0 ? best - 1 : 0];
  double x3 = grid[best + 1 < n ? best + 1 : n - 1];
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = x3 - g * (x3 - x0), x2 = x0 + g * (x3 - x0);
  auto r1 = objective(std::exp(x1)), r2 = objective(std::exp(x2));
  for (std::size_t it = 0; it < search.golden_iterations; ++it) {
    if (r1.total <= r2.total) {
      x3 = x2;
      x2 = x1;
      r2 = r1;
      x1 = x3 - g * (x3 - x0);
      r1 = objective(std::exp(x1));
    } else {
      x0 = x1;
      x1 = x2;
      r1 = r2;
      x2 = x0 + g * (x3 - x0);
      r2 = objective(std::exp(x2));
    }
  }
  for (const auto* r : {&r1, &r2})
    if (r->total < best_r.total) best_r = *r;
  best_r.inputs = in;
  return best_r;
}

double eta(std::size_t P, std::size_t L, std::size_t T) { return contraction_factor(P, L, T); }

namespace {

nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

}  // namespace

std::string bound_to_json(const BoundReport& r) {
  const auto& nb = r.inputs.nb;
  nlohmann::json j;
  j["theorem"] = to_string(r.theorem);
  j["inputs"] = {{"m", r.inputs.m},
                 {"delta", r.inputs.delta},
                 {"L", r.inputs.dims.L},
                 {"d", r.inputs.dims.d},
                 {"u", r.inputs.dims.u},
                 {"T", r.inputs.dims.T},
                 {"P", r.inputs.P},
                 {"norm_budget",
                  {{"b_x", nb.b_x}, {"B_qk", nb.B_qk}, {"B_v", nb.B_v}, {"B_f1", nb.B_f1}, {"B_f2", nb.B_f2},
                   {"B_emb", nb.B_emb}, {"b_o1", nb.b_o1}, {"b_o2", nb.b_o2}, {"w", nb.w},
                   {"L_sigma", nb.L_sigma}, {"L_sm", nb.L_sm}}}};
  if (r.theorem == Theorem::T4) {
    j["inputs"]["rho"] = r.inputs.rho;
    j["inputs"]["B_emb"] = r.inputs.B_emb;
    j["inputs"]["n"] = r.inputs.n;
  }
  j["log_lambda"] = num(r.log_lambda);
  j["log_constant"] = r.log_constant;
  j["exponent"] = r.exponent;
  j["eta"] = r.eta;
  j["terms"] = {{"statistical", r.terms.statistical},
                {"confidence", r.terms.confidence},
                {"complexity", num(r.terms.complexity)},
                {"tail", r.terms.tail}};
  j["total"] = num(r.total);
  if (r.theorem == Theorem::T4) j["bx_star"] = r.bx_star;
  j["vacuous"] = r.vacuous;
  j["depth_warning"] = r.depth_warning;
  return j.dump(2);
}

std::string bound_to_table(const BoundReport& r) {
  std::ostringstream o;
  o << std::setprecision(10);
  const auto row = [&](const char* k, auto v) { o << std::left << std::setw(14) << k << v << '\n'; };
  row("theorem", to_string(r.theorem));
  row("m", r.inputs.m);
  row("delta", r.inputs.delta);
  row("L", r.inputs.dims.L);
  row("d", r.inputs.dims.d);
  row("u", r.inputs.dims.u);
  row("T", r.inputs.dims.T);
  row("P", r.inputs.P);
  row("log_lambda", r.log_lambda);
  row("eta", r.eta);
  row("statistical", r.terms.statistical);
  row("confidence", r.terms.confidence);
  row("complexity", r.terms.complexity);
  row("tail", r.terms.tail);
  if (r.theorem == Theorem::T4) row("bx_star", r.bx_star);
  row("total", r.total);
  std::string flags;
  if (r.vacuous) flags += "vacuous ";
  if (r.depth_warning) flags += "depth>L/10 ";
  row("flags", flags.empty() ? std::string("none") : flags);
  return o.str();
}

}  // namespace ecct
