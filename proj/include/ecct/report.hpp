#pragma once

#include "ecct/bounds.hpp"
#include "ecct/codes.hpp"
#include "ecct/model.hpp"
#include "ecct/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ecct {

enum class SweepAxis { T, L, m };
std::string to_string(SweepAxis a);
SweepAxis parse_axis(const std::string& s);

struct SweepConfig {
  SweepAxis axis = SweepAxis::T;
  std::vector<std::size_t> values;
  std::size_t trials = 5;
  std::string code = "hamming74";  // code for the T and m axes
  std::size_t col_weight = 3;      // L axis: random_regular_code(n, n/2, col_weight, seed)
  std::uint64_t code_seed = 1;
  ECCTConfig model;
  TrainConfig train;
  double delta = 0.05;
  bool omit_timing = false;  // write wall_time_s = 0 so reruns are byte-identical
};

/// Resolved configuration as JSON text (the snapshot written next to outputs).
std::string sweep_config_json(const SweepConfig& cfg);
/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string config_hash(const std::string& text);

struct ExperimentOutcome {
  ExperimentRecord record;
  bool aborted = false;
  std::string error;
};

/// Train one model on m fresh samples, evaluate on eval_size fresh samples and
/// attach the bound of `theorem` at the measured budget.
ExperimentOutcome run_experiment(const ParityCheckMatrix& h, const ECCTConfig& model, const TrainConfig& train,
                                 Theorem theorem, double delta, bool omit_timing);

struct SummaryRow {
  std::size_t value = 0;
  std::size_t count = 0;
  double median = 0, q1 = 0, q3 = 0;  // of normalized_gap
  double median_bound = 0;
  double median_train_ber = 0, median_test_ber = 0;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::T;
  std::vector<std::size_t> points;
  std::vector<std::vector<ExperimentRecord>> records;  // per point, one per successful trial
  std::vector<SummaryRow> summary;
  std::size_t failures = 0;
  bool numeric_abort = false;
};

/// Per-trial seed for (base, value index, trial index).
std::uint64_t trial_seed(std::uint64_t base, std::size_t value_index, std::size_t trial);

SweepResult run_sweep(const SweepConfig& cfg, std::ostream* log = nullptr);

/// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
double quantile(std::vector<double> v, double q);
std::vector<SummaryRow> summarize(std::span<const std::size_t> points,
                                  const std::vector<std::vector<ExperimentRecord>>& records);
/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

void write_records_csv(std::ostream& out, const std::vector<std::vector<ExperimentRecord>>& records,
                       const std::string& hash);
std::vector<ExperimentRecord> read_records_csv(std::istream& in);
void write_summary_csv(std::ostream& out, SweepAxis axis, std::span<const SummaryRow> rows);
/// Median with quartile boxes against the axis, with the bound medians on a second scale.
std::string render_svg(SweepAxis axis, std::span<const SummaryRow> rows, const std::string& bound_label);

/// Writes records.csv, summary.csv, sweep.svg and config.json into dir.
void write_sweep_outputs(const std::filesystem::path& dir, const SweepConfig& cfg, const SweepResult& result);
/// Rebuilds summary.csv and sweep.svg from records.csv in dir.
std::vector<SummaryRow> rebuild_report(const std::filesystem::path& dir);

}  // namespace ecct
