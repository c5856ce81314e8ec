#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "invsel/dictionary.hpp"
#include "invsel/lasso.hpp"
#include "invsel/operator.hpp"
#include "invsel/search.hpp"
#include "invsel/test_functions.hpp"

namespace invsel {

enum class Method { Oracle, SA, QAgg, Lasso };

const char* to_string(Method m);
Method parse_method(std::string_view text);

struct ExperimentConfig {
  Index n = 128;
  std::string operator_spec = "exp";       // exp | file:<path>
  std::string dictionary_spec = "paper";   // paper | file:<path>
  std::vector<FunctionId> functions{FunctionId::F1, FunctionId::F2, FunctionId::F3, FunctionId::F4};
  std::vector<double> snr_list{10.0, 7.0, 5.0};
  int replicates = 100;
  std::vector<Method> methods{Method::Oracle, Method::SA, Method::QAgg, Method::Lasso};
  /// Grid for the selection penalty multiplier; qagg reuses the SA choice.
  std::vector<double> lambda_grid{0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0};
  std::vector<double> lasso_lambda_grid{0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0};
  /// Fixed multipliers; when set, the grid is not searched.
  std::optional<double> lambda;
  std::optional<double> lasso_lambda;
  int tuning_replicates = 20;
  long r_max = 100'000;
  int record_tail = 50;
  std::optional<int> init_size_cap;
  /// Model size cap; 0 means floor(n / 2).
  int size_cap = 0;
  std::uint64_t master_seed = 0;
  bool record_timing = false;
  int jobs = 1;
};

/// Applies one `key = value` setting. Lists are comma separated. Throws
/// InvalidArgument on unknown keys or bad values.
void apply_config_entry(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Flat `key = value` text with '#' comments.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});

struct RunRecord {
  int run_id = 0;
  Method method = Method::SA;
  FunctionId function = FunctionId::F1;
  double snr = 0.0;
  double lambda = 0.0;
  double rel_error = 0.0;
  int model_size = 0;
  std::uint64_t seed = 0;
  double wall_time_ms = 0.0;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// Sort key (function, snr, method, run_id).
bool record_less(const RunRecord& a, const RunRecord& b);

inline constexpr std::string_view kCsvHeader = "run_id,method,function,snr,lambda,rel_error,model_size,seed,wall_time_ms";

void write_csv(std::ostream& out, const std::vector<RunRecord>& records);
std::vector<RunRecord> parse_csv(std::istream& in);

/// Operator, dictionary and dual shared by every run of an experiment.
struct BenchContext {
  ForwardOperator op;
  Dictionary dict;
  DualDictionary dual;
  LassoSolver lasso;

  BenchContext(ForwardOperator op, Dictionary dict);
  BenchContext(const BenchContext&) = delete;
  BenchContext& operator=(const BenchContext&) = delete;
};

ForwardOperator make_operator(const std::string& spec, Index n);
Dictionary make_dictionary(const std::string& spec, Index n);
std::unique_ptr<BenchContext> make_context(const ExperimentConfig& cfg);

struct TuningResult {
  double lambda = 0.0;
  std::vector<double> grid;
  /// Mean relative error over the tuning batch, per grid point.
  std::vector<double> mean_error;
};

/// Grid search on a tuning batch whose seeds are disjoint from evaluation
/// seeds. Method QAgg tunes like SA. Ties go to the larger lambda.
TuningResult tune_lambda(Method method, const ExperimentConfig& cfg, const BenchContext& ctx, const TestFunction& f,
                         double snr);

struct GroupSummary {
  FunctionId function;
  double snr;
  Method method;
  double lambda;
  int count;
  double q25, median, q75;
  double median_model_size;
};

struct RunFailure {
  FunctionId function;
  double snr;
  Method method;
  int run_id;
  std::string message;
};

struct ExperimentResult {
  std::vector<RunRecord> records;  // sorted by record_less
  std::vector<GroupSummary> summaries;
  std::vector<RunFailure> failures;
};

using LogSink = std::function<void(const std::string&)>;

/// Every (function, snr, replicate) shares one observation across methods;
/// SA runs once per replicate and feeds both sa and qagg. The oracle projects
/// onto the generating atoms and is skipped for f4.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const LogSink& log = {});

double quantile(std::vector<double> values, double q);

/// Seeds: observation, SA chain. `purpose` separates tuning from evaluation.
enum class SeedPurpose : std::uint64_t { Evaluation = 1, Tuning = 2 };
std::uint64_t observation_seed(std::uint64_t master, SeedPurpose purpose, FunctionId f, double snr, int replicate);
std::uint64_t chain_seed(std::uint64_t observation_seed);

}  // namespace invsel
