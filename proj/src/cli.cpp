#include "invsel/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "invsel/aggregate.hpp"
#include "invsel/experiment.hpp"
#include "invsel/invariants.hpp"
#include "invsel/io.hpp"
#include "invsel/lasso.hpp"
#include "invsel/search.hpp"

namespace invsel {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProblemOptions {
  std::string operator_spec = "exp";
  Index n = 128;
  std::string dictionary_spec = "paper";

  void add_to(CLI::App& cmd) {
    cmd.add_option("--operator", operator_spec, "Forward operator: exp or file:<path>");
    cmd.add_option("--n", n, "Grid size for the exp operator")->check(CLI::Range(2, 1 << 16));
    cmd.add_option("--dictionary", dictionary_spec, "Dictionary: paper or file:<path>");
  }

  std::unique_ptr<BenchContext> context() const {
    ForwardOperator op = make_operator(operator_spec, n);
    Dictionary dict = make_dictionary(dictionary_spec, op.cols());
    return std::make_unique<BenchContext>(std::move(op), std::move(dict));
  }
};

// Output goes to `path` when set, else to `fallback`.
void emit(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& body) {
  if (path.empty()) {
    body(fallback);
    return;
  }
  std::ofstream file(path);
  if (!file) throw Error(ErrorKind::Io, "cannot write " + path);
  body(file);
}

Model parse_model(const std::string& text, Index p) {
  std::vector<int> idx;
  std::string cleaned;
  for (char c : text) cleaned += (c == '{' || c == '}') ? ' ' : (c == ',' ? ' ' : c);
  std::istringstream in(cleaned);
  long v = 0;
  while (in >> v) {
    if (v < 1 || v > p) throw Error(ErrorKind::IndexOutOfRange, "model index " + std::to_string(v) + " outside 1.." + std::to_string(p));
    idx.push_back(static_cast<int>(v - 1));
  }
  if (!in.eof()) throw UsageError("cannot parse model '" + text + "'");
  return Model(std::move(idx));
}

struct DataOptions {
  std::string y_path;
  std::optional<double> sigma;
  std::string function;
  std::optional<double> snr;
  std::optional<std::uint64_t> seed;

  struct Data {
    Observation obs;
    std::optional<Vector> truth;
  };

  Data load(const BenchContext& ctx) const {
    Data d;
    if (!y_path.empty()) {
      if (!function.empty()) throw UsageError("give either --y or --function, not both");
      if (!sigma) throw UsageError("--y requires --sigma");
      d.obs = back_transform(ctx.op, io::read_vector(y_path), *sigma);
      return d;
    }
    if (function.empty()) throw UsageError("give --y with --sigma, or --function with --snr and --seed");
    if (!snr || !seed) throw UsageError("--function requires --snr and --seed");
    const TestFunction f = build_test_function(parse_function_id(function), ctx.dict);
    d.obs = synthesize_observation(ctx.op, f, *snr, *seed);
    d.truth = f.values;
    return d;
  }
};

int run_gen(const ProblemOptions& prob, const std::string& function, double snr, std::uint64_t seed,
            const std::string& out_dir, std::ostream& out) {
  const auto ctx = prob.context();
  const TestFunction f = build_test_function(parse_function_id(function), ctx->dict);
  const Observation obs = synthesize_observation(ctx->op, f, snr, seed);
  if (out_dir.empty()) {
    out << "# function " << function << " snr " << io::format_double(snr) << " sigma " << io::format_double(obs.sigma)
        << " seed " << seed << '\n';
    out << "# columns: y z f\n";
    for (Index i = 0; i < obs.y.size(); ++i) {
      out << io::format_double(obs.y[i]) << ' ' << (i < obs.z.size() ? io::format_double(obs.z[i]) : "nan") << ' '
          << (i < f.values.size() ? io::format_double(f.values[i]) : "nan") << '\n';
    }
    return kExitOk;
  }
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  io::write_vector(dir / "y.txt", obs.y);
  io::write_vector(dir / "z.txt", obs.z);
  io::write_vector(dir / "f.txt", f.values);
  out << "sigma " << io::format_double(obs.sigma) << '\n';
  return kExitOk;
}

struct FitOptions {
  std::string method = "sa";
  double lambda = 1.0;
  long r_max = 100'000;
  int tail = 50;
  int size_cap = 0;
  std::string model;
  std::string out_path;
};

int run_fit(const ProblemOptions& prob, const DataOptions& data, const FitOptions& opt, std::ostream& out) {
  const auto ctx = prob.context();
  const auto d = data.load(*ctx);
  const Observation& obs = d.obs;
  const PenaltyRule pen = PenaltyRule::make(obs.sigma, opt.lambda, ctx->dict.p());
  ModelSpace space{static_cast<int>(ctx->dict.p()), opt.size_cap > 0 ? opt.size_cap : static_cast<int>(ctx->dict.n() / 2),
                   std::nullopt};
  Vector estimate;
  std::function<void(std::ostream&)> body;

  if (opt.method == "projection") {
    if (opt.model.empty()) throw UsageError("--method projection requires --model");
    const ProjectionFit fit = fit_projection(obs, ctx->dict, ctx->dual, parse_model(opt.model, ctx->dict.p()), pen);
    estimate = fit.fitted;
    body = [fit](std::ostream& o) { io::write_record(o, fit); };
  } else if (opt.method == "sa" || opt.method == "qagg") {
    if (!data.seed) throw UsageError("--method " + opt.method + " requires --seed");
    const SelectionProblem problem(obs, ctx->dict, ctx->dual, pen);
    SAConfig cfg;
    cfg.r_max = opt.r_max;
    cfg.seed = *data.seed;
    cfg.record_tail = opt.tail;
    const SATrace trace = run_sa(problem, obs.y, space, cfg);
    const ProjectionFit best = problem.fit(trace.best_model);
    if (opt.method == "sa") {
      estimate = best.fitted;
      body = [trace, best](std::ostream& o) {
        io::write_record(o, trace);
        io::write_record(o, best);
      };
    } else {
      const CandidateSet cand = make_candidate_set(problem, trace.visited_tail);
      const SimplexWeights w = solve_weights(cand, obs.z);
      estimate = aggregate_estimate(cand, w);
      body = [trace, cand, w](std::ostream& o) {
        io::write_record(o, trace);
        io::write_record(o, cand, w);
      };
    }
  } else if (opt.method == "lasso") {
    const LassoFit fit = ctx->lasso.fit(ctx->lasso.correlations(obs.y), opt.lambda);
    estimate = fit.fitted;
    body = [fit](std::ostream& o) { io::write_record(o, fit); };
  } else {
    throw UsageError("unknown method '" + opt.method + "'");
  }

  emit(opt.out_path, out, [&](std::ostream& o) {
    o << "method " << opt.method << '\n';
    o << "sigma " << io::format_double(obs.sigma) << '\n';
    if (d.truth) o << "rel_error " << io::format_double(relative_error(*d.truth, estimate)) << '\n';
    body(o);
  });
  return kExitOk;
}

int run_oracle(const ProblemOptions& prob, const std::string& function, const std::string& truth_path,
               std::optional<double> sigma, std::optional<double> snr, int size_cap, std::ostream& out) {
  const auto ctx = prob.context();
  Vector truth;
  if (!truth_path.empty() == !function.empty()) throw UsageError("give exactly one of --truth and --function");
  if (!function.empty()) {
    truth = build_test_function(parse_function_id(function), ctx->dict).values;
  } else {
    truth = io::read_vector(truth_path);
  }
  if (sigma.has_value() == snr.has_value()) throw UsageError("give exactly one of --sigma and --snr");
  const double s = sigma ? *sigma : truth.norm() / *snr;
  const ModelSpace space{static_cast<int>(ctx->dict.p()), size_cap, std::nullopt};
  const auto [model, risk] = oracle_search(ctx->op, ctx->dict, truth, s, space);
  out << "model " << to_string(model) << '\n';
  out << "sigma " << io::format_double(s) << '\n';
  out << "bias_sq " << io::format_double(risk.bias_sq) << '\n';
  out << "variance " << io::format_double(risk.variance) << '\n';
  out << "total " << io::format_double(risk.total) << '\n';
  return kExitOk;
}

int run_check(std::uint64_t seed, const std::vector<int>& only, std::ostream& out) {
  using CheckFn = CheckResult (*)(std::uint64_t);
  const CheckFn checks[] = {check_exact_identities,
                            check_subadditivity,
                            check_risk_decomposition,
                            check_tail_bound,
                            check_selection_oracle_inequality,
                            check_aggregation_oracle_inequality,
                            check_sa_recovery,
                            check_q_solver,
                            check_lasso};
  bool all = true;
  for (int c = 1; c <= 9; ++c) {
    if (!only.empty() && std::find(only.begin(), only.end(), c) == only.end()) continue;
    const CheckResult r = checks[c - 1](seed);
    out << format_check(r) << '\n' << std::flush;
    all = all && r.passed;
  }
  return all ? kExitOk : kExitCheckFailed;
}

int run_bench(const std::string& config_path, const std::vector<std::pair<std::string, std::string>>& overrides,
              const std::string& out_path, bool quiet, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + config_path);
    cfg = parse_config(in);
  }
  for (const auto& [key, value] : overrides) apply_config_entry(cfg, key, value);
  LogSink log;
  if (!quiet) log = [&err](const std::string& line) { err << line << '\n' << std::flush; };
  const ExperimentResult result = run_experiment(cfg, log);
  for (const RunFailure& f : result.failures) {
    err << "run failed: " << to_string(f.function) << " snr=" << f.snr << ' ' << to_string(f.method)
        << " run=" << f.run_id << ": " << f.message << '\n';
  }
  emit(out_path, out, [&](std::ostream& o) { write_csv(o, result.records); });
  return kExitOk;
}

int report(std::ostream& err, int code, const std::string& kind, const std::string& message) {
  err << "ERROR " << code << ": " << kind << ": " << message << '\n';
  return code;
}

}  // namespace

int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse recovery for linear inverse problems over overcomplete dictionaries", "invsel"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  std::function<int()> action;

  // gen
  ProblemOptions gen_prob;
  std::string gen_function = "f1";
  double gen_snr = 10.0;
  std::uint64_t gen_seed = 0;
  std::string gen_out_dir;
  auto* gen = app.add_subcommand("gen", "Synthesize y = A f + sigma eps for a test function and print y, z, f");
  gen_prob.add_to(*gen);
  gen->add_option("--function", gen_function, "Test function f1..f4");
  gen->add_option("--snr", gen_snr, "Signal-to-noise ratio ||f|| / sigma")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Noise seed")->required();
  gen->add_option("--out-dir", gen_out_dir, "Write y.txt, z.txt, f.txt here instead of printing");
  gen->callback([&] { action = [&] { return run_gen(gen_prob, gen_function, gen_snr, gen_seed, gen_out_dir, out); }; });

  // fit
  ProblemOptions fit_prob;
  DataOptions fit_data;
  FitOptions fit_opt;
  auto* fit = app.add_subcommand("fit", "Fit one estimator to observed or synthesized data");
  fit_prob.add_to(*fit);
  fit->add_option("--method", fit_opt.method, "sa, qagg, lasso or projection")
      ->check(CLI::IsMember({"sa", "qagg", "lasso", "projection"}));
  fit->add_option("--y", fit_data.y_path, "Observation file (one value per line)");
  fit->add_option("--sigma", fit_data.sigma, "Noise level for --y")->check(CLI::NonNegativeNumber);
  fit->add_option("--function", fit_data.function, "Synthesize data from test function f1..f4");
  fit->add_option("--snr", fit_data.snr, "Signal-to-noise ratio for --function")->check(CLI::PositiveNumber);
  fit->add_option("--seed", fit_data.seed, "Seed for synthesized noise and the annealing chain");
  fit->add_option("--lambda", fit_opt.lambda, "Penalty multiplier")->check(CLI::PositiveNumber);
  fit->add_option("--rmax", fit_opt.r_max, "Annealing iterations")->check(CLI::PositiveNumber);
  fit->add_option("--tail", fit_opt.tail, "Distinct accepted models kept for aggregation")->check(CLI::PositiveNumber);
  fit->add_option("--size-cap", fit_opt.size_cap, "Largest admissible model (0: n/2)")->check(CLI::NonNegativeNumber);
  fit->add_option("--model", fit_opt.model, "1-based atom list for --method projection, e.g. 3,17");
  fit->add_option("--out", fit_opt.out_path, "Record file (default: standard output)");
  fit->callback([&] { action = [&] { return run_fit(fit_prob, fit_data, fit_opt, out); }; });

  // bench
  std::string bench_config;
  std::string bench_out;
  bool bench_quiet = false;
  std::uint64_t bench_seed = 0;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<std::string> bench_set;
  auto* bench = app.add_subcommand("bench", "Run the Monte Carlo experiment and write one CSV row per run");
  bench->add_option("--config", bench_config, "Config file of key = value lines")->check(CLI::ExistingFile);
  bench->add_option("--seed", bench_seed, "Master seed")->required();
  bench->add_option("--out", bench_out, "CSV path (default: standard output)");
  bench->add_flag("--quiet", bench_quiet, "No per-group log lines");
  struct Mapped {
    const char* flag;
    const char* key;
    const char* help;
  };
  const Mapped mapped[] = {
      {"--operator", "operator", "Forward operator: exp or file:<path> [exp]"},
      {"--n", "n", "Grid size [128]"},
      {"--dictionary", "dictionary", "Dictionary: paper or file:<path> [paper]"},
      {"--functions", "functions", "Comma list of f1..f4 [f1,f2,f3,f4]"},
      {"--snr", "snr_list", "Comma list of SNR values [10,7,5]"},
      {"--replicates", "replicates", "Evaluation runs per group [100]"},
      {"--methods", "methods", "Comma list of oracle,sa,qagg,lasso [all]"},
      {"--lambda-grid", "lambda_grid", "Selection penalty grid [0.5,1,1.5,2,3,4,6,8,12,16]"},
      {"--lasso-lambda-grid", "lasso_lambda_grid", "Lasso penalty grid [0.01,0.02,0.05,...,100,200]"},
      {"--lambda", "lambda", "Fixed selection penalty (skips tuning) [tuned]"},
      {"--lasso-lambda", "lasso_lambda", "Fixed lasso penalty (skips tuning) [tuned]"},
      {"--tuning-replicates", "tuning_replicates", "Tuning batch size [20]"},
      {"--rmax", "r_max", "Annealing iterations [100000]"},
      {"--tail", "record_tail", "Models aggregated from the chain tail [50]"},
      {"--size-cap", "size_cap", "Largest admissible model, 0 for n/2 [0]"},
      {"--jobs", "jobs", "Worker threads [1]"},
  };
  std::vector<std::pair<const char*, std::string>> mapped_values(std::size(mapped));
  for (std::size_t i = 0; i < std::size(mapped); ++i) {
    mapped_values[i].first = mapped[i].key;
    bench->add_option(mapped[i].flag, mapped_values[i].second, mapped[i].help)->capture_default_str();
  }
  bool record_timing = false;
  bench->add_flag("--record-timing", record_timing, "Fill wall_time_ms (otherwise 0, keeping output reproducible)");
  bench->add_option("--set", bench_set, "Extra config override key=value (repeatable)");
  bench->callback([&] {
    action = [&] {
      overrides.emplace_back("master_seed", std::to_string(bench_seed));
      for (std::size_t i = 0; i < std::size(mapped); ++i) {
        if (bench->count(mapped[i].flag) > 0) overrides.emplace_back(mapped[i].key, mapped_values[i].second);
      }
      for (const std::string& kv : bench_set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
        overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (record_timing) overrides.emplace_back("record_timing", "1");
      return run_bench(bench_config, overrides, bench_out, bench_quiet, out, err);
    };
  });

  // oracle
  ProblemOptions or_prob;
  std::string or_function;
  std::string or_truth;
  std::optional<double> or_sigma;
  std::optional<double> or_snr;
  int or_cap = 2;
  auto* oracle = app.add_subcommand("oracle", "Exhaustive search for the risk-minimizing model given the truth");
  or_prob.add_to(*oracle);
  oracle->add_option("--function", or_function, "Truth from test function f1..f4");
  oracle->add_option("--truth", or_truth, "Truth vector file");
  oracle->add_option("--sigma", or_sigma, "Noise level")->check(CLI::NonNegativeNumber);
  oracle->add_option("--snr", or_snr, "Noise level as ||f|| / sigma")->check(CLI::PositiveNumber);
  oracle->add_option("--size-cap", or_cap, "Largest model enumerated")->check(CLI::NonNegativeNumber);
  oracle->callback([&] {
    action = [&] { return run_oracle(or_prob, or_function, or_truth, or_sigma, or_snr, or_cap, out); };
  });

  // check
  std::uint64_t check_seed = 0;
  std::vector<int> check_only;
  auto* check = app.add_subcommand("check", "Run the invariant suite; exit 3 if any check fails");
  check->add_option("--seed", check_seed, "Seed for the random instances")->required();
  check->add_option("--criterion", check_only, "Run only these check numbers (1-9)")->check(CLI::Range(1, 9));
  check->callback([&] { action = [&] { return run_check(check_seed, check_only, out); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report(err, kExitUsage, "Usage", e.what());
    err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitUsage;
  }

  try {
    return action();
  } catch (const UsageError& e) {
    return report(err, kExitUsage, "Usage", e.what());
  } catch (const Error& e) {
    return report(err, e.numerical() ? kExitNumerical : kExitUsage, to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return report(err, kExitUsage, "Unexpected", e.what());
  }
}

}  // namespace invsel
