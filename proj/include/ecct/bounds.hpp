#pragma once

#include "ecct/model.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace ecct {

enum class LipschitzVariant { dense, sparse };

/// Per-weight Lipschitz constants of the decoder output.
struct LipschitzSet {
  double o2 = 0, o1 = 0, f2 = 0, f1 = 0, v = 0, qk = 0;
  LipschitzVariant variant = LipschitzVariant::dense;
};

LipschitzSet lipschitz_dense(const NormBudget& nb, std::size_t L);
/// L^1.5 sqrt(P) b_x^3 w K with K = b_o1 L_sigma B_F2 B_F1 B_V.
double lipschitz_qk_sparse(const NormBudget& nb, std::size_t L, std::size_t P);
/// Dense constants with L_QK replaced by its sparse form.
LipschitzSet lipschitz_sparse(const NormBudget& nb, std::size_t L, std::size_t P);
/// Per-layer input sensitivity sqrt(P) L_sigma B_V B_F1 B_F2 (1 + 2 B_QK b_x^2).
double alpha_t(const NormBudget& nb, std::size_t P);
/// Constants for layers 1..T of a stacked decoder: the attention-layer entries
/// of layer i carry the product of alpha over layers i+1..T. QK uses the sparse form.
std::vector<LipschitzSet> lipschitz_layers(const NormBudget& nb, std::size_t L, std::size_t P, std::size_t T);

/// log of the global Lipschitz bound of a T-layer decoder. -inf when a factor is zero.
double log_lambda_T(const NormBudget& nb, std::size_t L, std::size_t P, std::size_t T);
/// log B for the single-layer dense constant.
double log_B(const NormBudget& nb);

struct Dims {
  std::size_t L = 0, d = 0, u = 1, T = 1;
};

/// log N for one layer with radius eps / (6 L_i).
double log_covering_number(double eps, const LipschitzSet& ls, const Dims& dims, const NormBudget& nb);
/// log N for a stack; layers[i] holds the constants of layer i+1, radius eps / ((4T+2) L_i).
double log_covering_number(double eps, const std::vector<LipschitzSet>& layers, const Dims& dims,
                           const NormBudget& nb);
/// exponent * log(1 + t_factor sqrt(d) Lambda / eps), the aggregated single-expression form.
double log_covering_aggregate(double eps, double log_lambda, double exponent, double t_factor, std::size_t d);

enum class Theorem { T1, T2, T3, T4 };
std::string to_string(Theorem t);
Theorem parse_theorem(const std::string& s);

struct BoundTerms {
  double statistical = 0;
  double confidence = 0;
  double complexity = 0;
  double tail = 0;
};

struct BoundInputs {
  std::size_t m = 0;
  double delta = 0.05;
  Dims dims;
  std::size_t P = 0;
  NormBudget nb;
  double rho = 0;    // noise std relative to B_emb, T4 only
  double B_emb = 0;  // T4 only
  std::size_t n = 0; // code length, T4 only
};

struct BoundReport {
  Theorem theorem = Theorem::T1;
  BoundInputs inputs;
  double log_lambda = 0;
  double log_constant = 0;    // log C
  double exponent = 0;        // L + (2u+2) d^2 T_eff
  double eta = 1;
  BoundTerms terms;
  double total = 0;
  double bx_star = 0;
  bool vacuous = false;       // log argument <= 1, complexity and total are +inf
  bool depth_warning = false; // T > L / 10
};

/// Dense (T1), sparse (T2) or sparse-and-normalized (T3) bound from the measured budget.
BoundReport gen_bound(Theorem theorem, const BoundInputs& in);

struct SearchSpec {
  std::size_t grid_points = 200;
  std::size_t golden_iterations = 80;
};

/// Stacked bound plus input-norm tail, minimized over the clipping radius b_x.
BoundReport gen_bound_awgn(const BoundInputs& in, const SearchSpec& search = {});

/// (P/L)^(T/2).
double eta(std::size_t P, std::size_t L, std::size_t T);

std::string bound_to_json(const BoundReport& r);
/// Fixed-order two-column table.
std::string bound_to_table(const BoundReport& r);

}  // namespace ecct
