#include "ecct/report.hpp"

#include "ecct/masking.hpp"
#include "ecct/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ecct {

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::T: return "T";
    case SweepAxis::L: return "L";
    case SweepAxis::m: return "m";
  }
  return "?";
}

SweepAxis parse_axis(const std::string& s) {
  if (s == "T") return SweepAxis::T;
  if (s == "L") return SweepAxis::L;
  if (s == "m") return SweepAxis::m;
  throw std::invalid_argument("unknown sweep axis '" + s + "' (expected T, L or m)");
}

std::string sweep_config_json(const SweepConfig& cfg) {
  const auto& t = cfg.train;
  nlohmann::json j;
  j["axis"] = to_string(cfg.axis);
  j["values"] = cfg.values;
  j["trials"] = cfg.trials;
  j["code"] = cfg.axis == SweepAxis::L ? "regular" : cfg.code;
  j["col_weight"] = cfg.col_weight;
  j["code_seed"] = cfg.code_seed;
  j["model"] = {{"d", cfg.model.d},
                {"u", cfg.model.u},
                {"T", cfg.model.T},
                {"activation", to_string(cfg.model.activation)},
                {"masked", cfg.model.masked},
                {"softmax_scale", cfg.model.softmax_scale}};
  j["train"] = {{"m", t.m},
                {"ebn0_db", t.ebn0_db},
                {"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"learning_rate", t.learning_rate},
                {"adam_beta1", t.adam_beta1},
                {"adam_beta2", t.adam_beta2},
                {"adam_eps", t.adam_eps},
                {"seed", t.seed},
                {"eval_size", t.resolved_eval_size()}};
  j["delta"] = cfg.delta;
  j["omit_timing"] = cfg.omit_timing;
  return j.dump(2);
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentOutcome run_experiment(const ParityCheckMatrix& h, const ECCTConfig& model, const TrainConfig& train,
                                 Theorem theorem, double delta, bool omit_timing) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentOutcome out;
  auto& rec = out.record;
  const auto mask = effective_mask(h, model);
  rec.code = h.name();
  rec.n = h.cols();
  rec.r = h.rows();
  rec.L = model.L();
  rec.d = model.d;
  rec.u = model.u;
  rec.T = model.T;
  rec.P = sparsity(mask).P;
  rec.masked = model.masked;
  rec.m = train.m;
  rec.ebn0_db = train.ebn0_db;
  rec.seed = train.seed;

  const auto data = make_dataset(h, train.m, train.ebn0_db, derive_seed(train.seed, 0));
  const auto res = train_on(data, mask, model, train);
  if (res.aborted) {
    out.aborted = true;
    out.error = res.abort_reason;
    return out;
  }
  rec.train_ber = dataset_ber(res.weights, mask, model, data);
  rec.test_ber = evaluate(res.weights, h, mask, model, train.resolved_eval_size(), train.ebn0_db,
                          derive_seed(train.seed, 3));
  const auto gap = generalization_gap(rec.train_ber, rec.test_ber);
  rec.gap = gap.gap;
  rec.normalized_gap = gap.normalized_gap;

  std::vector<Vec> inputs;
  inputs.reserve(data.size());
  for (const auto& s : data) inputs.push_back(s.y_tilde);
  BoundInputs bi;
  bi.m = train.m;
  bi.delta = delta;
  bi.dims = {model.L(), model.d, model.u, model.T};
  bi.P = rec.P;
  bi.nb = measure_norm_budget(res.weights, inputs, mask, model);
  const auto br = gen_bound(theorem, bi);
  rec.log_lambda = br.log_lambda;
  rec.bound_total = br.total;
  if (!omit_timing)
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::uint64_t trial_seed(std::uint64_t base, std::size_t value_index, std::size_t trial) {
  return derive_seed(base, value_index, trial);
}

SweepResult run_sweep(const SweepConfig& cfg, std::ostream* log) {
  if (cfg.values.empty()) throw std::invalid_argument("sweep: no axis values");
  if (cfg.trials < 1) throw std::invalid_argument("sweep: trials must be >= 1");
  SweepResult result;
  result.axis = cfg.axis;
  result.points = cfg.values;
  result.records.resize(cfg.values.size());
  const Theorem theorem = cfg.axis == SweepAxis::L ? Theorem::T2 : Theorem::T3;
  const std::optional<ParityCheckMatrix> fixed =
      cfg.axis == SweepAxis::L ? std::nullopt : std::optional<ParityCheckMatrix>(load_code(cfg.code));

  for (std::size_t vi = 0; vi < cfg.values.size(); ++vi) {
    const std::size_t v = cfg.values[vi];
    const ParityCheckMatrix h = fixed ? *fixed : random_regular_code(v, v / 2, cfg.col_weight, cfg.code_seed);
    ECCTConfig model = cfg.model;
    TrainConfig train = cfg.train;
    if (cfg.axis == SweepAxis::T) model.T = v;
    if (cfg.axis == SweepAxis::m) train.m = v;
    model.n = h.cols();
    model.r = h.rows();
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      train.seed = trial_seed(cfg.train.seed, vi, t);
      ExperimentOutcome o;
      try {
        o = run_experiment(h, model, train, theorem, cfg.delta, cfg.omit_timing);
      } catch (const NumericError& e) {
        o.aborted = true;
        o.error = e.what();
      } catch (const std::exception& e) {
        o.error = e.what();
      }
      if (o.aborted || !o.error.empty()) {
        ++result.failures;
        result.numeric_abort = result.numeric_abort || o.aborted;
        if (log) *log << to_string(cfg.axis) << "=" << v << " trial " << t << " failed: " << o.error << '\n';
        continue;
      }
      if (log)
        *log << to_string(cfg.axis) << "=" << v << " trial " << t << ": train_ber=" << o.record.train_ber
             << " test_ber=" << o.record.test_ber << " normalized_gap=" << o.record.normalized_gap << '\n';
      result.records[vi].push_back(o.record);
    }
  }
  result.summary = summarize(result.points, result.records);
  return result;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<SummaryRow> summarize(std::span<const std::size_t> points,
                                  const std::vector<std::vector<ExperimentRecord>>& records) {
  if (points.size() != records.size()) throw std::invalid_argument("summarize: point/record count mismatch");
  std::vector<SummaryRow> rows;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::vector<double> g, b, tr, te;
    for (const auto& r : records[i]) {
      g.push_back(r.normalized_gap);
      b.push_back(r.bound_total);
      tr.push_back(r.train_ber);
      te.push_back(r.test_ber);
    }
    SummaryRow row;
    row.value = points[i];
    row.count = records[i].size();
    row.median = quantile(g, 0.5);
    row.q1 = quantile(g, 0.25);
    row.q3 = quantile(g, 0.75);
    row.median_bound = quantile(b, 0.5);
    row.median_train_ber = quantile(tr, 0.5);
    row.median_test_ber = quantile(te, 0.5);
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_num(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

const char* kRecordColumns =
    "code,n,r,L,d,u,T,P,masked,m,ebn0_db,seed,train_ber,test_ber,gap,normalized_gap,log_lambda,bound_total,"
    "wall_time_s,config_hash";

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal-length samples");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

void write_records_csv(std::ostream& out, const std::vector<std::vector<ExperimentRecord>>& records,
                       const std::string& hash) {
  out << kRecordColumns << '\n';
  for (const auto& point : records)
    for (const auto& r : point)
      out << r.code << ',' << r.n << ',' << r.r << ',' << r.L << ',' << r.d << ',' << r.u << ',' << r.T << ','
          << r.P << ',' << (r.masked ? 1 : 0) << ',' << r.m << ',' << fmt(r.ebn0_db) << ',' << r.seed << ','
          << fmt(r.train_ber) << ',' << fmt(r.test_ber) << ',' << fmt(r.gap) << ',' << fmt(r.normalized_gap) << ','
          << fmt(r.log_lambda) << ',' << fmt(r.bound_total) << ',' << fmt(r.wall_time_s) << ',' << hash << '\n';
}

std::vector<ExperimentRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("records: empty file");
  const auto header = split(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"code", "n", "r", "L", "d", "u", "T", "P", "masked", "m", "ebn0_db", "seed", "train_ber",
                           "test_ber", "gap", "normalized_gap", "log_lambda", "bound_total", "wall_time_s"})
    if (!col.count(need)) throw std::runtime_error(std::string("records: missing column ") + need);
  std::vector<ExperimentRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() < header.size()) throw std::runtime_error("records: line " + std::to_string(lineno) + " is short");
    const auto u = [&](const char* k) { return static_cast<std::size_t>(std::stoull(c[col[k]])); };
    const auto f = [&](const char* k) { return parse_num(c[col[k]]); };
    ExperimentRecord r;
    r.code = c[col["code"]];
    r.n = u("n");
    r.r = u("r");
    r.L = u("L");
    r.d = u("d");
    r.u = u("u");
    r.T = u("T");
    r.P = u("P");
    r.masked = u("masked") != 0;
    r.m = u("m");
    r.ebn0_db = f("ebn0_db");
    r.seed = std::stoull(c[col["seed"]]);
    r.train_ber = f("train_ber");
    r.test_ber = f("test_ber");
    r.gap = f("gap");
    r.normalized_gap = f("normalized_gap");
    r.log_lambda = f("log_lambda");
    r.bound_total = f("bound_total");
    r.wall_time_s = f("wall_time_s");
    out.push_back(r);
  }
  return out;
}

void write_summary_csv(std::ostream& out, SweepAxis axis, std::span<const SummaryRow> rows) {
  out << to_string(axis) << ",count,median_normalized_gap,q1,q3,median_bound_total,median_train_ber,median_test_ber\n";
  for (const auto& r : rows)
    out << r.value << ',' << r.count << ',' << fmt(r.median) << ',' << fmt(r.q1) << ',' << fmt(r.q3) << ','
        << fmt(r.median_bound) << ',' << fmt(r.median_train_ber) << ',' << fmt(r.median_test_ber) << '\n';
}

std::string render_svg(SweepAxis axis, std::span<const SummaryRow> rows, const std::string& bound_label) {
  const double W = 640, H = 400, ml = 70, mr = 70, mt = 30, mb = 50;
  const double pw = W - ml - mr, ph = H - mt - mb;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  double blo = lo, bhi = -lo;
  for (const auto& r : rows) {
    if (std::isfinite(r.q1)) lo = std::min(lo, r.q1);
    if (std::isfinite(r.q3)) hi = std::max(hi, r.q3);
    if (std::isfinite(r.median_bound)) {
      blo = std::min(blo, r.median_bound);
      bhi = std::max(bhi, r.median_bound);
    }
  }
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi <= lo) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  if (std::isfinite(blo) && bhi <= blo) bhi = blo + 1.0;
  const std::size_t n = rows.size();
  const auto xpos = [&](std::size_t i) { return ml + pw * (static_cast<double>(i) + 0.5) / static_cast<double>(n); };
  const auto ypos = [&](double v) { return mt + ph * (1.0 - (v - lo) / (hi - lo)); };
  const auto bpos = [&](double v) { return mt + ph * (1.0 - (v - blo) / (bhi - blo)); };

  std::ostringstream s;
  s.precision(6);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    s << "<text x=\"" << ml - 6 << "\" y=\"" << ypos(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
  }
  s << "<text x=\"16\" y=\"" << mt + ph / 2 << "\" transform=\"rotate(-90 16 " << mt + ph / 2
    << ")\" text-anchor=\"middle\">normalized gap</text>\n";
  s << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << to_string(axis) << "</text>\n";
  const double bw = std::min(40.0, pw / static_cast<double>(n) / 3.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = rows[i];
    const double x = xpos(i);
    s << "<text x=\"" << x << "\" y=\"" << mt + ph + 18 << "\" text-anchor=\"middle\">" << r.value << "</text>\n";
    if (!std::isfinite(r.median)) continue;
    s << "<rect x=\"" << x - bw / 2 << "\" y=\"" << ypos(r.q3) << "\" width=\"" << bw << "\" height=\""
      << std::max(1.0, ypos(r.q1) - ypos(r.q3)) << "\" fill=\"#9ecae1\" stroke=\"#3182bd\"/>\n";
    s << "<line x1=\"" << x - bw / 2 << "\" y1=\"" << ypos(r.median) << "\" x2=\"" << x + bw / 2 << "\" y2=\""
      << ypos(r.median) << "\" stroke=\"#08306b\" stroke-width=\"2\"/>\n";
  }
  if (std::isfinite(blo)) {
    s << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-dasharray=\"4 3\" points=\"";
    for (std::size_t i = 0; i < n; ++i)
      if (std::isfinite(rows[i].median_bound)) s << xpos(i) << ',' << bpos(rows[i].median_bound) << ' ';
    s << "\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double v = blo + (bhi - blo) * k / 4.0;
      s << "<text x=\"" << ml + pw + 6 << "\" y=\"" << bpos(v) + 4 << "\" fill=\"#d62728\">" << v << "</text>\n";
    }
    s << "<text x=\"" << ml + pw << "\" y=\"" << mt - 10 << "\" text-anchor=\"end\" fill=\"#d62728\">" << bound_label
      << " (right axis)</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

namespace {

std::string bound_label(SweepAxis axis) { return axis == SweepAxis::L ? "sparse single-layer bound" : "stacked bound"; }

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

}  // namespace

void write_sweep_outputs(const std::filesystem::path& dir, const SweepConfig& cfg, const SweepResult& result) {
  std::filesystem::create_directories(dir);
  const auto cfg_text = sweep_config_json(cfg) + "\n";
  write_file(dir / "config.json", cfg_text);
  std::ostringstream rec, sum;
  write_records_csv(rec, result.records, config_hash(cfg_text));
  write_file(dir / "records.csv", rec.str());
  write_summary_csv(sum, result.axis, result.summary);
  write_file(dir / "summary.csv", sum.str());
  write_file(dir / "sweep.svg", render_svg(result.axis, result.summary, bound_label(result.axis)));
}

std::vector<SummaryRow> rebuild_report(const std::filesystem::path& dir) {
  std::ifstream cf(dir / "config.json");
  if (!cf) throw std::runtime_error("missing " + (dir / "config.json").string());
  const auto cfg = nlohmann::json::parse(cf);
  const SweepAxis axis = parse_axis(cfg.at("axis").get<std::string>());
  std::ifstream rf(dir / "records.csv");
  if (!rf) throw std::runtime_error("missing " + (dir / "records.csv").string());
  const auto recs = read_records_csv(rf);
  std::vector<std::size_t> points;
  std::vector<std::vector<ExperimentRecord>> grouped;
  for (const auto v : cfg.at("values").get<std::vector<std::size_t>>()) {
    points.push_back(v);
    grouped.emplace_back();
  }
  for (const auto& r : recs) {
    const std::size_t key = axis == SweepAxis::T ? r.T : axis == SweepAxis::m ? r.m : r.n;
    const auto it = std::find(points.begin(), points.end(), key);
    if (it == points.end()) throw std::runtime_error("records: row outside the configured axis values");
    grouped[static_cast<std::size_t>(it - points.begin())].push_back(r);
  }
  const auto rows = summarize(points, grouped);
  std::ostringstream sum;
  write_summary_csv(sum, axis, rows);
  write_file(dir / "summary.csv", sum.str());
  write_file(dir / "sweep.svg", render_svg(axis, rows, bound_label(axis)));
  return rows;
}

}  // namespace ecct
