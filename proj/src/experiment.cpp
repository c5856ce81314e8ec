#include "invsel/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "invsel/aggregate.hpp"
#include "invsel/io.hpp"
#include "invsel/rng.hpp"

namespace invsel {

const char* to_string(Method m) {
  switch (m) {
    case Method::Oracle: return "oracle";
    case Method::SA: return "sa";
    case Method::QAgg: return "qagg";
    case Method::Lasso: return "lasso";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  for (Method m : {Method::Oracle, Method::SA, Method::QAgg, Method::Lasso}) {
    if (text == to_string(m)) return m;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown method '" + std::string(text) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = s.find(sep);
    out.push_back(trim(s.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

template <class Int>
Int parse_integer(std::string_view text, std::string_view key) {
  text = trim(text);
  Int value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::InvalidArgument, "bad integer for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view text, std::string_view key) {
  text = trim(text);
  if (text == "1" || text == "true" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "no") return false;
  throw Error(ErrorKind::InvalidArgument, "bad boolean for " + std::string(key));
}

std::vector<double> parse_positive_list(std::string_view text, std::string_view key) {
  std::vector<double> out;
  for (auto item : split(text, ',')) {
    const double v = io::parse_double(item);
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::InvalidArgument, std::string(key) + " values must be positive and finite");
    }
    out.push_back(v);
  }
  return out;
}

double parse_positive(std::string_view text, std::string_view key) {
  const auto v = parse_positive_list(text, key);
  if (v.size() != 1) throw Error(ErrorKind::InvalidArgument, std::string(key) + " takes one value");
  return v.front();
}

template <class Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
  if (jobs <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  const int workers = std::min(jobs, count);
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

ModelSpace model_space(const ExperimentConfig& cfg, const BenchContext& ctx) {
  ModelSpace space;
  space.p = static_cast<int>(ctx.dict.p());
  space.size_cap = cfg.size_cap > 0 ? cfg.size_cap : static_cast<int>(ctx.dict.n() / 2);
  return space;
}

SAConfig sa_config(const ExperimentConfig& cfg, std::uint64_t obs_seed) {
  SAConfig sc;
  sc.r_max = cfg.r_max;
  sc.seed = chain_seed(obs_seed);
  sc.init_size_cap = cfg.init_size_cap;
  sc.record_tail = cfg.record_tail;
  return sc;
}

struct SAOutcome {
  double sa_error = 0.0;
  int sa_size = 0;
  double qagg_error = 0.0;
  int qagg_size = 0;
  double sa_ms = 0.0;
  double qagg_ms = 0.0;
};

SAOutcome run_sa_methods(const ExperimentConfig& cfg, const BenchContext& ctx, const TestFunction& f,
                         const Observation& obs, double lambda, std::uint64_t obs_seed, bool with_qagg) {
  SAOutcome out;
  const auto start = Clock::now();
  const PenaltyRule pen = PenaltyRule::make(obs.sigma, lambda, ctx.dict.p());
  const SelectionProblem problem(obs, ctx.dict, ctx.dual, pen);
  const SATrace trace = run_sa(problem, obs.y, model_space(cfg, ctx), sa_config(cfg, obs_seed));
  const ProjectionFit best = problem.fit(trace.best_model);
  out.sa_error = relative_error(f.values, best.fitted);
  out.sa_size = best.model.size();
  out.sa_ms = elapsed_ms(start);
  if (with_qagg) {
    const CandidateSet cand = make_candidate_set(problem, trace.visited_tail);
    const SimplexWeights w = solve_weights(cand, obs.z);
    out.qagg_error = relative_error(f.values, aggregate_estimate(cand, w));
    std::set<int> atoms;
    for (std::size_t k = 0; k < cand.fits.size(); ++k) {
      if (w.weights[static_cast<Index>(k)] > 0.0) {
        atoms.insert(cand.fits[k].model.indices().begin(), cand.fits[k].model.indices().end());
      }
    }
    out.qagg_size = static_cast<int>(atoms.size());
    out.qagg_ms = elapsed_ms(start);
  }
  return out;
}

bool wants(const ExperimentConfig& cfg, Method m) {
  return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
}

}  // namespace

void apply_config_entry(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (key == "n") {
    cfg.n = parse_integer<Index>(value, key);
    if (cfg.n < 2) throw Error(ErrorKind::InvalidArgument, "n must be at least 2");
  } else if (key == "operator") {
    cfg.operator_spec = std::string(value);
  } else if (key == "dictionary") {
    cfg.dictionary_spec = std::string(value);
  } else if (key == "functions") {
    cfg.functions.clear();
    for (auto item : split(value, ',')) cfg.functions.push_back(parse_function_id(item));
  } else if (key == "snr_list") {
    cfg.snr_list = parse_positive_list(value, key);
  } else if (key == "replicates") {
    cfg.replicates = parse_integer<int>(value, key);
    if (cfg.replicates < 1) throw Error(ErrorKind::InvalidArgument, "replicates must be at least 1");
  } else if (key == "methods") {
    cfg.methods.clear();
    for (auto item : split(value, ',')) cfg.methods.push_back(parse_method(item));
  } else if (key == "lambda_grid") {
    cfg.lambda_grid = parse_positive_list(value, key);
  } else if (key == "lasso_lambda_grid") {
    cfg.lasso_lambda_grid = parse_positive_list(value, key);
  } else if (key == "lambda") {
    cfg.lambda = parse_positive(value, key);
  } else if (key == "lasso_lambda") {
    cfg.lasso_lambda = parse_positive(value, key);
  } else if (key == "tuning_replicates") {
    cfg.tuning_replicates = parse_integer<int>(value, key);
    if (cfg.tuning_replicates < 1) throw Error(ErrorKind::InvalidArgument, "tuning_replicates must be at least 1");
  } else if (key == "r_max") {
    cfg.r_max = parse_integer<long>(value, key);
    if (cfg.r_max < 1) throw Error(ErrorKind::InvalidArgument, "r_max must be at least 1");
  } else if (key == "record_tail") {
    cfg.record_tail = parse_integer<int>(value, key);
    if (cfg.record_tail < 1) throw Error(ErrorKind::InvalidArgument, "record_tail must be at least 1");
  } else if (key == "init_size_cap") {
    cfg.init_size_cap = parse_integer<int>(value, key);
    if (*cfg.init_size_cap < 1) throw Error(ErrorKind::InvalidArgument, "init_size_cap must be at least 1");
  } else if (key == "size_cap") {
    cfg.size_cap = parse_integer<int>(value, key);
    if (cfg.size_cap < 0) throw Error(ErrorKind::InvalidArgument, "size_cap must be nonnegative");
  } else if (key == "master_seed") {
    cfg.master_seed = parse_integer<std::uint64_t>(value, key);
  } else if (key == "record_timing") {
    cfg.record_timing = parse_bool(value, key);
  } else if (key == "jobs") {
    cfg.jobs = parse_integer<int>(value, key);
    if (cfg.jobs < 1) throw Error(ErrorKind::InvalidArgument, "jobs must be at least 1");
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown config key '" + std::string(key) + "'");
  }
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::InvalidArgument, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_config_entry(base, text.substr(0, eq), text.substr(eq + 1));
  }
  return base;
}

bool record_less(const RunRecord& a, const RunRecord& b) {
  return std::tie(a.function, a.snr, a.method, a.run_id) < std::tie(b.function, b.snr, b.method, b.run_id);
}

void write_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  out << kCsvHeader << '\n';
  for (const RunRecord& r : records) {
    out << r.run_id << ',' << to_string(r.method) << ',' << to_string(r.function) << ',' << io::format_double(r.snr)
        << ',' << io::format_double(r.lambda) << ',' << io::format_double(r.rel_error) << ',' << r.model_size << ','
        << r.seed << ',' << io::format_double(r.wall_time_ms) << '\n';
  }
}

std::vector<RunRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) throw Error(ErrorKind::Io, "missing or unexpected CSV header");
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 9) throw Error(ErrorKind::Io, "CSV row with " + std::to_string(f.size()) + " fields");
    RunRecord r;
    r.run_id = parse_integer<int>(f[0], "run_id");
    r.method = parse_method(f[1]);
    r.function = parse_function_id(f[2]);
    r.snr = io::parse_double(f[3]);
    r.lambda = io::parse_double(f[4]);
    r.rel_error = io::parse_double(f[5]);
    r.model_size = parse_integer<int>(f[6], "model_size");
    r.seed = parse_integer<std::uint64_t>(f[7], "seed");
    r.wall_time_ms = io::parse_double(f[8]);
    out.push_back(r);
  }
  return out;
}

BenchContext::BenchContext(ForwardOperator op_in, Dictionary dict_in)
    : op(std::move(op_in)), dict(std::move(dict_in)), dual(build_dual(dict, op)), lasso(dict, dual) {}

namespace {

std::optional<std::string> file_spec(const std::string& spec) {
  if (spec.rfind("file:", 0) == 0) return spec.substr(5);
  return std::nullopt;
}

}  // namespace

ForwardOperator make_operator(const std::string& spec, Index n) {
  if (spec == "exp") return build_exponential_operator(n);
  if (auto path = file_spec(spec)) return build_from_matrix(io::read_matrix(*path));
  throw Error(ErrorKind::InvalidArgument, "operator must be 'exp' or 'file:<path>'");
}

Dictionary make_dictionary(const std::string& spec, Index n) {
  if (spec == "paper") return build_paper_dictionary(n);
  if (auto path = file_spec(spec)) return build_custom_dictionary(io::read_matrix(*path));
  throw Error(ErrorKind::InvalidArgument, "dictionary must be 'paper' or 'file:<path>'");
}

std::unique_ptr<BenchContext> make_context(const ExperimentConfig& cfg) {
  ForwardOperator op = make_operator(cfg.operator_spec, cfg.n);
  Dictionary dict = make_dictionary(cfg.dictionary_spec, op.cols());
  return std::make_unique<BenchContext>(std::move(op), std::move(dict));
}

std::uint64_t observation_seed(std::uint64_t master, SeedPurpose purpose, FunctionId f, double snr, int replicate) {
  return derive_seed(master, {static_cast<std::uint64_t>(purpose), static_cast<std::uint64_t>(f),
                              std::bit_cast<std::uint64_t>(snr), static_cast<std::uint64_t>(replicate)});
}

std::uint64_t chain_seed(std::uint64_t obs_seed) { return derive_seed(obs_seed, {0x5a}); }

TuningResult tune_lambda(Method method, const ExperimentConfig& cfg, const BenchContext& ctx, const TestFunction& f,
                         double snr) {
  if (method == Method::Oracle) throw Error(ErrorKind::InvalidArgument, "the oracle has no tuning parameter");
  TuningResult out;
  out.grid = method == Method::Lasso ? cfg.lasso_lambda_grid : cfg.lambda_grid;
  if (out.grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty lambda grid");
  const int g = static_cast<int>(out.grid.size());
  const int reps = cfg.tuning_replicates;
  std::vector<double> err(static_cast<std::size_t>(g * reps), 0.0);

  if (method == Method::Lasso) {
    // Decreasing-lambda path with warm starts, one replicate per task.
    std::vector<int> order(static_cast<std::size_t>(g));
    for (int k = 0; k < g; ++k) order[static_cast<std::size_t>(k)] = k;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return out.grid[static_cast<std::size_t>(a)] > out.grid[static_cast<std::size_t>(b)];
    });
    parallel_for(reps, cfg.jobs, [&](int t) {
      const auto seed = observation_seed(cfg.master_seed, SeedPurpose::Tuning, f.id, snr, t);
      const Observation obs = synthesize_observation(ctx.op, f, snr, seed);
      const Vector b = ctx.lasso.correlations(obs.y);
      Vector warm = Vector::Zero(ctx.dict.p());
      for (int k : order) {
        const LassoFit fit = ctx.lasso.fit(b, out.grid[static_cast<std::size_t>(k)], 1e-8, 10'000, &warm);
        warm = fit.coefficients;
        err[static_cast<std::size_t>(k * reps + t)] = relative_error(f.values, fit.fitted);
      }
    });
  } else {
    parallel_for(g * reps, cfg.jobs, [&](int task) {
      const int k = task / reps;
      const int t = task % reps;
      const auto seed = observation_seed(cfg.master_seed, SeedPurpose::Tuning, f.id, snr, t);
      const Observation obs = synthesize_observation(ctx.op, f, snr, seed);
      const SAOutcome o =
          run_sa_methods(cfg, ctx, f, obs, out.grid[static_cast<std::size_t>(k)], seed, false);
      err[static_cast<std::size_t>(task)] = o.sa_error;
    });
  }

  out.mean_error.resize(static_cast<std::size_t>(g));
  std::size_t best = 0;
  for (int k = 0; k < g; ++k) {
    double sum = 0.0;
    for (int t = 0; t < reps; ++t) sum += err[static_cast<std::size_t>(k * reps + t)];
    out.mean_error[static_cast<std::size_t>(k)] = sum / reps;
    const double e = out.mean_error[static_cast<std::size_t>(k)];
    if (e < out.mean_error[best] || (e == out.mean_error[best] && out.grid[static_cast<std::size_t>(k)] > out.grid[best])) {
      best = static_cast<std::size_t>(k);
    }
  }
  out.lambda = out.grid[best];
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const LogSink& log) {
  if (cfg.replicates < 1) throw Error(ErrorKind::InvalidArgument, "replicates must be at least 1");
  if (cfg.snr_list.empty() || cfg.functions.empty() || cfg.methods.empty()) {
    throw Error(ErrorKind::InvalidArgument, "functions, snr_list and methods must be nonempty");
  }
  const auto ctx = make_context(cfg);
  ExperimentResult result;

  const bool any_sa = wants(cfg, Method::SA) || wants(cfg, Method::QAgg);
  const bool with_qagg = wants(cfg, Method::QAgg);

  for (FunctionId fid : cfg.functions) {
    const TestFunction f = build_test_function(fid, ctx->dict);
    for (double snr : cfg.snr_list) {
      double lambda_sa = 0.0;
      double lambda_lasso = 0.0;
      if (any_sa) lambda_sa = cfg.lambda ? *cfg.lambda : tune_lambda(Method::SA, cfg, *ctx, f, snr).lambda;
      if (wants(cfg, Method::Lasso)) {
        lambda_lasso = cfg.lasso_lambda ? *cfg.lasso_lambda : tune_lambda(Method::Lasso, cfg, *ctx, f, snr).lambda;
      }

      std::vector<std::vector<RunRecord>> per_rep(static_cast<std::size_t>(cfg.replicates));
      std::vector<std::vector<RunFailure>> per_rep_fail(static_cast<std::size_t>(cfg.replicates));
      parallel_for(cfg.replicates, cfg.jobs, [&](int rep) {
        auto& recs = per_rep[static_cast<std::size_t>(rep)];
        auto& fails = per_rep_fail[static_cast<std::size_t>(rep)];
        const int run_id = rep + 1;
        const auto seed = observation_seed(cfg.master_seed, SeedPurpose::Evaluation, fid, snr, rep);
        auto record = [&](Method m, double lambda, double err, int size, double ms) {
          recs.push_back({run_id, m, fid, snr, lambda, err, size, seed, cfg.record_timing ? ms : 0.0});
        };
        auto guarded = [&](Method m, auto&& body) {
          try {
            body();
          } catch (const Error& e) {
            fails.push_back({fid, snr, m, run_id, e.what()});
          }
        };
        const Observation obs = synthesize_observation(ctx->op, f, snr, seed);

        if (wants(cfg, Method::Oracle) && !f.analytic()) {
          guarded(Method::Oracle, [&] {
            const auto start = Clock::now();
            const PenaltyRule pen = PenaltyRule::make(obs.sigma, 1.0, ctx->dict.p());
            const ProjectionFit fit = fit_projection(obs, ctx->dict, ctx->dual, Model(f.atom_indices), pen);
            record(Method::Oracle, 0.0, relative_error(f.values, fit.fitted), fit.model.size(), elapsed_ms(start));
          });
        }
        if (any_sa) {
          guarded(wants(cfg, Method::SA) ? Method::SA : Method::QAgg, [&] {
            const SAOutcome o = run_sa_methods(cfg, *ctx, f, obs, lambda_sa, seed, with_qagg);
            if (wants(cfg, Method::SA)) record(Method::SA, lambda_sa, o.sa_error, o.sa_size, o.sa_ms);
            if (with_qagg) record(Method::QAgg, lambda_sa, o.qagg_error, o.qagg_size, o.qagg_ms);
          });
        }
        if (wants(cfg, Method::Lasso)) {
          guarded(Method::Lasso, [&] {
            const auto start = Clock::now();
            const LassoFit fit = ctx->lasso.fit(ctx->lasso.correlations(obs.y), lambda_lasso);
            record(Method::Lasso, lambda_lasso, relative_error(f.values, fit.fitted), support_size(fit),
                   elapsed_ms(start));
          });
        }
      });

      for (auto& recs : per_rep) {
        for (auto& r : recs) result.records.push_back(r);
      }
      for (auto& fails : per_rep_fail) {
        for (auto& e : fails) result.failures.push_back(std::move(e));
      }
      for (Method m : {Method::Oracle, Method::SA, Method::QAgg, Method::Lasso}) {
        std::vector<double> errs;
        std::vector<double> sizes;
        double lambda = 0.0;
        for (const RunRecord& r : result.records) {
          if (r.function == fid && r.snr == snr && r.method == m) {
            errs.push_back(r.rel_error);
            sizes.push_back(r.model_size);
            lambda = r.lambda;
          }
        }
        if (errs.empty()) continue;
        GroupSummary s{fid, snr, m, lambda, static_cast<int>(errs.size()), quantile(errs, 0.25), quantile(errs, 0.5),
                       quantile(errs, 0.75), quantile(sizes, 0.5)};
        result.summaries.push_back(s);
        if (log) {
          std::ostringstream line;
          line << to_string(fid) << " snr=" << snr << ' ' << to_string(m) << " lambda=" << lambda
               << " runs=" << s.count << " median_rel_error=" << s.median << " iqr=[" << s.q25 << ',' << s.q75
               << "] median_size=" << s.median_model_size;
          log(line.str());
        }
      }
    }
  }
  std::sort(result.records.begin(), result.records.end(), record_less);
  return result;
}

}  // namespace invsel
