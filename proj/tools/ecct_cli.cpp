// Command-line front end: mask, train, eval, bound, verify, sweep, report.
// Exit codes: 0 success, 1 check failure, 2 usage error, 3 numeric abort.

#include "ecct/allocator.hpp"
#include "ecct/bounds.hpp"
#include "ecct/channel.hpp"
#include "ecct/checkpoint.hpp"
#include "ecct/codes.hpp"
#include "ecct/masking.hpp"
#include "ecct/model.hpp"
#include "ecct/report.hpp"
#include "ecct/rng.hpp"
#include "ecct/training.hpp"
#include "ecct/verification.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kUsage = 2, kNumeric = 3 };

struct ModelOpts {
  std::string code = "hamming74";
  std::string format = "auto";
  std::size_t d = 32, u = 1, T = 1;
  std::string activation = "relu";
  bool unmasked = false;
  bool softmax_scale = false;
};

// JSON config keys use the long flag names with dashes replaced by underscores.
void apply_config(const json& j, ModelOpts& mo, ecct::TrainConfig& tc) {
  mo.code = j.value("code", mo.code);
  mo.format = j.value("format", mo.format);
  mo.d = j.value("d", mo.d);
  mo.u = j.value("u", mo.u);
  mo.T = j.value("T", mo.T);
  mo.activation = j.value("activation", mo.activation);
  mo.unmasked = j.value("unmasked", mo.unmasked);
  mo.softmax_scale = j.value("softmax_scale", mo.softmax_scale);
  tc.m = j.value("m", tc.m);
  tc.ebn0_db = j.value("ebn0", tc.ebn0_db);
  tc.epochs = j.value("epochs", tc.epochs);
  tc.batch_size = j.value("batch", tc.batch_size);
  tc.learning_rate = j.value("lr", tc.learning_rate);
  tc.seed = j.value("seed", tc.seed);
  tc.eval_size = j.value("eval_size", tc.eval_size);
}

void add_model_opts(CLI::App* c, ModelOpts& mo) {
  c->add_option("--code", mo.code, "hamming74, regular:n:r:w:seed, or a .alist/dense file");
  c->add_option("--format", mo.format, "code file format: auto, alist, dense");
  c->add_option("--d", mo.d, "embedding width");
  c->add_option("--u", mo.u, "FFN width multiplier");
  c->add_option("--T", mo.T, "attention layers");
  c->add_option("--activation", mo.activation, "relu, gelu, identity");
  c->add_flag("--unmasked", mo.unmasked, "attend over all pairs");
  c->add_flag("--softmax-scale", mo.softmax_scale, "divide logits by sqrt(d)");
}

void add_train_opts(CLI::App* c, ecct::TrainConfig& tc) {
  c->add_option("--m", tc.m, "training samples");
  c->add_option("--ebn0", tc.ebn0_db, "Eb/N0 in dB");
  c->add_option("--epochs", tc.epochs);
  c->add_option("--batch", tc.batch_size);
  c->add_option("--lr", tc.learning_rate);
  c->add_option("--seed", tc.seed);
  c->add_option("--eval-size", tc.eval_size, "test samples (0 = 10 m)");
}

ecct::ECCTConfig model_config(const ecct::ParityCheckMatrix& h, const ModelOpts& mo) {
  auto cfg = ecct::ECCTConfig::for_code(h, mo.d, mo.u, mo.T);
  cfg.activation = ecct::parse_activation(mo.activation);
  cfg.masked = !mo.unmasked;
  cfg.softmax_scale = mo.softmax_scale;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << s;
}

json train_config_json(const ecct::TrainConfig& t) {
  return {{"m", t.m},           {"ebn0_db", t.ebn0_db},         {"epochs", t.epochs},
          {"batch_size", t.batch_size}, {"learning_rate", t.learning_rate}, {"seed", t.seed},
          {"eval_size", t.resolved_eval_size()}};
}

std::vector<ecct::Vec> sample_inputs(const ecct::ParityCheckMatrix& h, std::size_t count, double ebn0,
                                     std::uint64_t seed) {
  std::vector<ecct::Vec> out;
  for (const auto& s : ecct::make_dataset(h, count, ebn0, seed)) out.push_back(s.y_tilde);
  return out;
}

int cmd_mask(const ModelOpts& mo, bool dense, const std::string& out_dir) {
  const auto h = ecct::load_code(mo.code, ecct::parse_code_format(mo.format));
  const auto mask = dense ? ecct::MaskMatrix::full(h.seq_len()) : ecct::build_mask(h);
  const auto prof = ecct::sparsity(mask);
  fs::create_directories(out_dir);
  std::ofstream grid(fs::path(out_dir) / "mask_grid.txt"), pairs(fs::path(out_dir) / "mask_pairs.csv");
  ecct::write_mask_grid(grid, mask);
  ecct::write_mask_pairs(pairs, mask);
  const json j = {{"code", h.name()}, {"n", h.cols()}, {"r", h.rows()}, {"L", h.seq_len()}, {"dense", dense},
                  {"P", prof.P},      {"density", prof.density}, {"row_counts", prof.row_counts}};
  write_text(fs::path(out_dir) / "sparsity.json", j.dump(2) + "\n");
  std::cout << "code " << h.name() << "  L=" << h.seq_len() << "  P=" << prof.P << "  density=" << prof.density
            << "\nwrote " << out_dir << "/{mask_grid.txt,mask_pairs.csv,sparsity.json}\n";
  return kOk;
}

int cmd_train(const ModelOpts& mo, const ecct::TrainConfig& tc, const std::string& out_dir) {
  const auto h = ecct::load_code(mo.code, ecct::parse_code_format(mo.format));
  const auto cfg = model_config(h, mo);
  const auto mask = ecct::effective_mask(h, cfg);
  const auto data = ecct::make_dataset(h, tc.m, tc.ebn0_db, ecct::derive_seed(tc.seed, 0));
  const auto res = ecct::train_on(data, mask, cfg, tc);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  auto ck = ecct::checkpoint_to_json(cfg, res.weights);
  ck["code"] = mo.code;
  ck["train"] = train_config_json(tc);
  write_text(dir / "checkpoint.json", ck.dump() + "\n");
  std::ofstream hist(dir / "history.csv");
  ecct::write_history_csv(hist, res.history);
  const json snap = {{"code", mo.code}, {"model", ecct::config_to_json(cfg)}, {"train", train_config_json(tc)}};
  write_text(dir / "config.json", snap.dump(2) + "\n");
  for (const auto& e : res.history)
    std::cout << "epoch " << e.epoch << "  loss " << e.loss << "  train_ber " << e.train_ber << '\n';
  if (res.aborted) {
    std::cerr << "training aborted: " << res.abort_reason << " (last finite weights saved)\n";
    return kNumeric;
  }
  std::cout << "final train BER " << ecct::dataset_ber(res.weights, mask, cfg, data) << "\nwrote " << out_dir
            << "/{checkpoint.json,history.csv,config.json}\n";
  return kOk;
}

struct Loaded {
  ecct::ParityCheckMatrix h;
  ecct::ECCTConfig cfg;
  ecct::ECCTWeights w;
  json train;  // training settings recorded by `train`, may be null
};

Loaded load_model(const std::string& path, std::string code, const std::string& format) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  const auto j = json::parse(f);
  auto [cfg, w] = ecct::checkpoint_from_json(j);
  if (code.empty()) code = j.value("code", std::string());
  if (code.empty()) throw std::invalid_argument("checkpoint does not name its code; pass --code");
  auto h = ecct::load_code(code, ecct::parse_code_format(format));
  if (h.cols() != cfg.n || h.rows() != cfg.r) throw std::invalid_argument("code does not match the checkpoint shape");
  return {std::move(h), cfg, std::move(w), j.value("train", json())};
}

int cmd_eval(const std::string& ckpt, const std::string& code, const std::string& format, std::size_t samples,
             double ebn0, std::uint64_t seed, const std::string& source) {
  const auto m = load_model(ckpt, code, format);
  const auto mask = ecct::effective_mask(m.h, m.cfg);
  ecct::CodewordSource src;
  if (source == "zero") src = ecct::CodewordSource::all_zero;
  else if (source == "random") src = ecct::CodewordSource::random_codeword;
  else throw std::invalid_argument("--source must be zero or random");
  const double ber = ecct::evaluate(m.w, m.h, mask, m.cfg, samples, ebn0, seed, src);
  const json j = {{"code", m.h.name()}, {"samples", samples}, {"ebn0_db", ebn0}, {"seed", seed},
                  {"source", source},   {"ber", ber}};
  std::cout << j.dump(2) << '\n';
  return kOk;
}

struct BoundOpts {
  std::string theorem = "T1";
  std::string checkpoint;
  std::string code;
  std::string format = "auto";
  std::size_t samples = 1000;
  double ebn0 = 2.0;
  std::uint64_t seed = 1;
  bool unit = false;
  std::string budget_file;
  ecct::NormBudget nb;
  ecct::BoundInputs in;
  bool table = false;
  std::size_t grid = 200;
};

int cmd_bound(BoundOpts o, const CLI::App& sub) {
  const auto theorem = ecct::parse_theorem(o.theorem);
  auto& in = o.in;
  if (!o.checkpoint.empty()) {
    const auto m = load_model(o.checkpoint, o.code, o.format);
    if (m.train.is_object()) {
      if (!sub.count("--m")) in.m = m.train.value("m", in.m);
      if (!sub.count("--ebn0")) o.ebn0 = m.train.value("ebn0_db", o.ebn0);
    }
    const auto mask = ecct::effective_mask(m.h, m.cfg);
    const auto inputs = sample_inputs(m.h, o.samples, o.ebn0, o.seed);
    in.nb = ecct::measure_norm_budget(m.w, inputs, mask, m.cfg);
    in.dims = {m.cfg.L(), m.cfg.d, m.cfg.u, m.cfg.T};
    in.P = ecct::sparsity(mask).P;
    in.n = m.h.cols();
    if (!sub.count("--B-emb")) in.B_emb = in.nb.B_emb;
    if (!sub.count("--rho")) in.rho = ecct::NoiseModel::from_ebn0(o.ebn0, m.h.rate()).sigma;
  } else {
    if (o.unit) {
      in.nb = ecct::NormBudget::unit();
    } else if (!o.budget_file.empty()) {
      std::ifstream f(o.budget_file);
      if (!f) throw std::runtime_error("cannot open budget file '" + o.budget_file + "'");
      const auto j = json::parse(f);
      auto& nb = in.nb;
      nb.b_x = j.at("b_x"); nb.B_qk = j.at("B_qk"); nb.B_v = j.at("B_v"); nb.B_f1 = j.at("B_f1");
      nb.B_f2 = j.at("B_f2"); nb.b_o1 = j.at("b_o1"); nb.b_o2 = j.at("b_o2"); nb.w = j.at("w");
      nb.B_emb = j.value("B_emb", 0.0); nb.L_sigma = j.value("L_sigma", 1.0);
    } else {
      in.nb = o.nb;
    }
    if (in.dims.L == 0 || in.dims.d == 0) throw std::invalid_argument("pass --L and --d, or --from-checkpoint");
    if (in.P == 0) in.P = in.dims.L;
  }
  if (in.m == 0) throw std::invalid_argument("pass --m (training set size)");
  ecct::BoundReport r;
  if (theorem == ecct::Theorem::T4) {
    if (in.B_emb <= 0) in.B_emb = in.nb.B_emb;
    ecct::SearchSpec s;
    s.grid_points = o.grid;
    r = ecct::gen_bound_awgn(in, s);
  } else {
    r = ecct::gen_bound(theorem, in);
  }
  std::cout << (o.table ? ecct::bound_to_table(r) : ecct::bound_to_json(r) + "\n");
  return kOk;
}

int cmd_verify(bool quick, std::uint64_t seed, const std::string& out) {
  ecct::SuiteOptions opt;
  opt.quick = quick;
  opt.seed = seed;
  const auto reports = ecct::run_verification_suite(opt);
  bool ok = true;
  for (const auto& r : reports) {
    std::cout << (r.ok() ? "ok    " : "FAIL  ") << r.name << (r.control ? " (control, expected to fail)" : "")
              << "  max_violation=" << r.max_violation << "  threshold=" << r.threshold << "  trials=" << r.trials
              << '\n';
    ok = ok && r.ok();
  }
  if (!out.empty()) write_text(out, ecct::reports_to_json(reports) + "\n");
  return ok ? kOk : kCheckFailed;
}

int cmd_sweep(ecct::SweepConfig sc, const ModelOpts& mo, const std::string& axis, const std::string& out_dir) {
  sc.axis = ecct::parse_axis(axis);
  sc.code = mo.code;
  sc.model.d = mo.d;
  sc.model.u = mo.u;
  sc.model.T = mo.T;
  sc.model.activation = ecct::parse_activation(mo.activation);
  sc.model.masked = !mo.unmasked;
  sc.model.softmax_scale = mo.softmax_scale;
  const auto result = ecct::run_sweep(sc, &std::cerr);
  ecct::write_sweep_outputs(out_dir, sc, result);
  ecct::write_summary_csv(std::cout, result.axis, result.summary);
  if (result.numeric_abort) return kNumeric;
  return result.failures ? kCheckFailed : kOk;
}

int cmd_report(const std::string& dir) {
  const auto rows = ecct::rebuild_report(dir);
  const auto cfg = json::parse(std::ifstream(fs::path(dir) / "config.json"));
  ecct::write_summary_csv(std::cout, ecct::parse_axis(cfg.at("axis").get<std::string>()), rows);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  ecct::retain_freed_memory();
  CLI::App app{"ECCT decoder lab: training, bounds and verification"};
  app.require_subcommand(1);
  ModelOpts mo;
  ecct::TrainConfig tc;
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with defaults; flags override it");

  // The config file sets defaults before the flags are parsed.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      std::ifstream f(argv[i + 1]);
      if (!f) {
        std::cerr << "error: cannot open config '" << argv[i + 1] << "'\n";
        return kUsage;
      }
      try {
        apply_config(json::parse(f), mo, tc);
      } catch (const std::exception& e) {
        std::cerr << "error: bad config: " << e.what() << '\n';
        return kUsage;
      }
    }
  }

  auto* mask = app.add_subcommand("mask", "build the attention mask of a code");
  bool dense = false;
  std::string out_dir = ".";
  mask->add_option("--code", mo.code);
  mask->add_option("--format", mo.format, "auto, alist, dense");
  mask->add_flag("--dense", dense, "emit the unmasked (full) grid");
  mask->add_option("--out", out_dir, "output directory");

  auto* train = app.add_subcommand("train", "train a decoder");
  std::string train_out = "train_out";
  add_model_opts(train, mo);
  add_train_opts(train, tc);
  train->add_option("--out", train_out, "output directory");

  auto* eval = app.add_subcommand("eval", "Monte Carlo BER of a checkpoint");
  std::string ckpt, eval_code, eval_source = "zero";
  std::size_t eval_samples = 10000;
  double eval_ebn0 = 2.0;
  std::uint64_t eval_seed = 99;
  eval->add_option("--checkpoint", ckpt)->required();
  eval->add_option("--code", eval_code, "defaults to the code stored in the checkpoint");
  eval->add_option("--format", mo.format);
  eval->add_option("--samples", eval_samples);
  eval->add_option("--ebn0", eval_ebn0);
  eval->add_option("--seed", eval_seed);
  eval->add_option("--source", eval_source, "zero or random");

  auto* bound = app.add_subcommand("bound", "evaluate a generalization bound");
  BoundOpts bo;
  bound->add_option("--theorem", bo.theorem, "T1, T2, T3 or T4 (or 1..4)");
  bound->add_option("--from-checkpoint", bo.checkpoint, "measure the norm budget from a checkpoint");
  bound->add_option("--code", bo.code);
  bound->add_option("--format", bo.format);
  bound->add_option("--samples", bo.samples, "inputs used to measure b_x");
  bound->add_option("--ebn0", bo.ebn0);
  bound->add_option("--seed", bo.seed);
  bound->add_flag("--unit", bo.unit, "all budget entries 1");
  bound->add_option("--budget", bo.budget_file, "JSON norm budget");
  bound->add_option("--b-x", bo.nb.b_x);
  bound->add_option("--B-qk", bo.nb.B_qk);
  bound->add_option("--B-v", bo.nb.B_v);
  bound->add_option("--B-f1", bo.nb.B_f1);
  bound->add_option("--B-f2", bo.nb.B_f2);
  bound->add_option("--b-o1", bo.nb.b_o1);
  bound->add_option("--b-o2", bo.nb.b_o2);
  bound->add_option("--w", bo.nb.w);
  bound->add_option("--L-sigma", bo.nb.L_sigma);
  bound->add_option("--m", bo.in.m);
  bound->add_option("--delta", bo.in.delta);
  bound->add_option("--L", bo.in.dims.L);
  bound->add_option("--d", bo.in.dims.d);
  bound->add_option("--u", bo.in.dims.u);
  bound->add_option("--T", bo.in.dims.T);
  bound->add_option("--P", bo.in.P);
  bound->add_option("--rho", bo.in.rho, "AWGN standard deviation (T4)");
  bound->add_option("--B-emb", bo.in.B_emb, "embedding spectral norm (T4)");
  bound->add_option("--n", bo.in.n, "code length (T4)");
  bound->add_option("--grid", bo.grid, "T4 grid points (>= 200)");
  bound->add_flag("--table", bo.table, "fixed-order table instead of JSON");

  auto* verify = app.add_subcommand("verify", "run the verification suite");
  bool all = false, quick = false;
  std::uint64_t verify_seed = 7;
  std::string verify_out;
  verify->add_flag("--all", all, "run every check (default)");
  verify->add_flag("--quick", quick, "reduced trial counts");
  verify->add_option("--seed", verify_seed);
  verify->add_option("--out", verify_out, "write the JSON report here");

  auto* sweep = app.add_subcommand("sweep", "train across an axis and summarize the gap");
  ecct::SweepConfig sc;
  std::string axis = "T", sweep_out = "sweep_out";
  add_model_opts(sweep, mo);
  add_train_opts(sweep, tc);
  sweep->add_option("--axis", axis, "T, L or m")->required();
  sweep->add_option("--values", sc.values, "comma-separated axis values (n for the L axis)")
      ->required()
      ->delimiter(',');
  sweep->add_option("--trials", sc.trials);
  sweep->add_option("--col-weight", sc.col_weight, "column weight of the L-axis code family");
  sweep->add_option("--code-seed", sc.code_seed);
  sweep->add_option("--delta", sc.delta);
  sweep->add_flag("--omit-timing", sc.omit_timing, "write wall_time_s as 0 for byte-identical reruns");
  sweep->add_option("--out", sweep_out, "output directory");

  auto* report = app.add_subcommand("report", "rebuild summary and plot from records.csv");
  std::string report_dir;
  report->add_option("--dir", report_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*mask) return cmd_mask(mo, dense, out_dir);
    if (*train) return cmd_train(mo, tc, train_out);
    if (*eval) return cmd_eval(ckpt, eval_code, mo.format, eval_samples, eval_ebn0, eval_seed, eval_source);
    if (*bound) return cmd_bound(bo, *bound);
    if (*verify) return cmd_verify(quick, verify_seed, verify_out);
    if (*sweep) {
      sc.train = tc;
      return cmd_sweep(sc, mo, axis, sweep_out);
    }
    if (*report) return cmd_report(report_dir);
  } catch (const ecct::NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
