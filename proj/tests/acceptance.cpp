// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Criterion 10 runs in fast mode unless --full is given.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "invsel/experiment.hpp"
#include "invsel/invariants.hpp"
#include "invsel/io.hpp"

using namespace invsel;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> column(const ExperimentResult& res, Method m, bool size) {
  std::vector<double> out;
  for (const RunRecord& r : res.records) {
    if (r.method == m) out.push_back(size ? r.model_size : r.rel_error);
  }
  return out;
}

CheckResult reproduction(bool full, int jobs) {
  CheckResult r;
  r.criterion = 10;
  r.name = full ? "f1 snr=10 ordering (full)" : "f1 snr=10 ordering (fast)";
  const auto start = Clock::now();

  ExperimentConfig cfg;
  cfg.functions = {FunctionId::F1};
  cfg.snr_list = {10.0};
  cfg.replicates = full ? 100 : 25;
  cfg.r_max = full ? 100'000 : 10'000;
  cfg.record_tail = 50;
  cfg.master_seed = 2024;
  cfg.jobs = jobs;
  const double margin = full ? 1.05 : 1.10;
  const double budget = full ? 7200.0 : 600.0;

  const ExperimentResult res = run_experiment(cfg);
  r.seconds = seconds_since(start);
  if (!res.failures.empty()) {
    r.detail = "run failure: " + res.failures.front().message;
    return r;
  }
  const double oracle = quantile(column(res, Method::Oracle, false), 0.5);
  const double sa = quantile(column(res, Method::SA, false), 0.5);
  const double qagg = quantile(column(res, Method::QAgg, false), 0.5);
  const double lasso = quantile(column(res, Method::Lasso, false), 0.5);
  const double sa_size = quantile(column(res, Method::SA, true), 0.5);
  const double lasso_size = quantile(column(res, Method::Lasso, true), 0.5);

  const bool ordering = oracle <= qagg && qagg <= sa * margin && sa < lasso;
  const bool sparser = sa_size <= lasso_size;
  const bool in_time = r.seconds <= budget;
  r.passed = ordering && sparser && in_time;
  r.measured = qagg / sa;
  r.threshold = margin;

  std::ostringstream d;
  d << "median rel_error oracle=" << io::format_double(oracle) << " qagg=" << io::format_double(qagg)
    << " sa=" << io::format_double(sa) << " lasso=" << io::format_double(lasso) << "; median size sa=" << sa_size
    << " lasso=" << lasso_size;
  for (const GroupSummary& s : res.summaries) {
    if (s.method != Method::Oracle) d << "; " << to_string(s.method) << " lambda=" << io::format_double(s.lambda);
  }
  if (!in_time) d << "; over the " << budget << " s budget";
  r.detail = d.str();
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

CheckResult determinism(const std::string& cli, const std::filesystem::path& workdir) {
  CheckResult r;
  r.criterion = 11;
  r.name = "bench CSV is byte-identical across runs";
  const auto start = Clock::now();
  std::filesystem::create_directories(workdir);
  const auto a = workdir / "determinism_a.csv";
  const auto b = workdir / "determinism_b.csv";
  std::filesystem::remove(a);
  std::filesystem::remove(b);
  const std::string args =
      " bench --seed 77 --functions f1,f4 --snr 10,5 --replicates 3 --rmax 2000 --tuning-replicates 3 "
      "--lambda-grid 4,8,16 --lasso-lambda-grid 0.5,2,8 --quiet";
  const int ra = std::system((cli + args + " --out " + a.string()).c_str());
  const int rb = std::system((cli + args + " --jobs 2 --out " + b.string()).c_str());
  r.seconds = seconds_since(start);
  if (ra != 0 || rb != 0) {
    r.detail = "bench exited with status " + std::to_string(ra) + "/" + std::to_string(rb);
    return r;
  }
  const std::string first = slurp(a);
  const std::string second = slurp(b);
  const auto rows = std::count(first.begin(), first.end(), '\n');
  r.passed = !first.empty() && first == second && rows > 1;
  r.measured = first == second ? 0.0 : 1.0;
  r.threshold = 0.0;
  r.detail = std::to_string(first.size()) + " bytes, " + std::to_string(rows) + " lines";
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string cli;
  std::string workdir = ".";
  bool full = false;
  std::uint64_t seed = 1;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--cli", cli, "Path to the command-line tool")->required();
  app.add_option("--workdir", workdir, "Scratch directory");
  app.add_flag("--full", full, "Criterion 10 at full scale");
  app.add_option("--seed", seed, "Seed for criteria 1-9");
  app.add_option("--jobs", jobs, "Worker threads for criterion 10");
  CLI11_PARSE(app, argc, argv);

  bool ok = true;
  auto report = [&](const CheckResult& r) {
    std::cout << format_check(r) << '\n' << std::flush;
    ok = ok && r.passed;
  };
  auto guarded = [&](int criterion, auto&& body) {
    try {
      report(body());
    } catch (const std::exception& e) {
      CheckResult r;
      r.criterion = criterion;
      r.name = "exception";
      r.detail = e.what();
      report(r);
    }
  };

  for (const CheckResult& r : invariant_suite(seed)) report(r);
  guarded(10, [&] { return reproduction(full, jobs); });
  guarded(11, [&] { return determinism(cli, std::filesystem::path(workdir)); });
  return ok ? 0 : 1;
}
