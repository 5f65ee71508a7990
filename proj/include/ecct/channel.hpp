#pragma once

#include "ecct/codes.hpp"
#include "ecct/rng.hpp"
#include "ecct/types.hpp"

#include <ostream>
#include <span>

namespace ecct {

/// BPSK over AWGN with unit symbol energy: sigma^2 = 1 / (2 R 10^(EbN0/10)).
struct NoiseModel {
  double ebn0_db = 0.0;
  double rate = 1.0;
  double sigma = 1.0;

  static NoiseModel from_ebn0(double ebn0_db, double rate);
};

/// How syndrome bits enter the ECCT input.
enum class SyndromeEmbedding { plus_minus_one, zero_one };

struct ChannelSample {
  Bits x;       // codeword bits
  Vec xs;       // BPSK symbols
  Vec y;        // received
  Vec z;        // multiplicative noise y * xs
  Vec y_tilde;  // [|y|, syndrome]
  Bits target;  // 1 where z < 0
};

Vec bpsk_modulate(std::span<const std::uint8_t> bits);

Vec transmit(const Vec& xs, const NoiseModel& model, Rng& rng);

/// Hard decision: y < 0 -> 1, y >= 0 -> 0.
Bits hard_decision(const Vec& y);

Vec preprocess(const Vec& y, const ParityCheckMatrix& h,
               SyndromeEmbedding embedding = SyndromeEmbedding::plus_minus_one);

ChannelSample make_sample(const ParityCheckMatrix& h, Bits codeword, const NoiseModel& model,
                          Rng& rng);

/// Upper Gaussian tail P(N(0,1) > t).
double q_function(double t);

/// n [Q((tau-1)/rho) + Q((tau+1)/rho)] with tau = b_x / B_emb, clamped to [0, 1].
/// Union bound on some |y_i| * B_emb exceeding b_x under BPSK/AWGN.
double tail_probability(double b_x, double b_emb, double rho, std::size_t n);

/// CSV dump: index, y[0..n), z[0..n), target[0..n).
void write_samples_csv(std::ostream& out, std::span<const ChannelSample> samples);

}  // namespace ecct
