#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfm/dataset.hpp"
#include "lfm/influence.hpp"
#include "lfm/params.hpp"

namespace lfm {

/// Sample Pearson correlation. Throws Error(kConfig) on unequal lengths,
/// fewer than two points, or zero variance on either side.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// How a model is retrained from scratch.
struct TrainingRecipe {
  ModelKind kind = ModelKind::kMf;
  Hyperparams hp;
  NcfArchitecture arch;
};

/// Ground truth for dg by retraining. Repeat r (1-based) trains with seed
/// hp.seed + r both on the full set and on the set without z, and the
/// prediction differences are averaged. Full-set runs are cached, so one
/// oracle can answer many removals. Thread-safe.
class RetrainOracle {
 public:
  RetrainOracle(const Dataset& train, TrainingRecipe recipe, Index repeats);

  Index repeats() const { return repeats_; }
  const TrainingRecipe& recipe() const { return recipe_; }

  /// Full-set model for repeat r in [1, repeats].
  const ModelParams& full_model(Index r);

  /// Prediction change at tc for repeat r. An empty `z` retrains on the
  /// unchanged set (no-op removal).
  double delta_for_repeat(std::optional<Index> z, const TestCase& tc, Index r);

  double delta_true(std::optional<Index> z, const TestCase& tc);

 private:
  const Dataset& train_;
  TrainingRecipe recipe_;
  Index repeats_;
  std::vector<std::unique_ptr<std::once_flag>> once_;
  std::vector<std::optional<ModelParams>> full_;
};

double retrain_without(const Dataset& train, Index z, const TrainingRecipe& recipe, const TestCase& tc,
                       Index repeats);

struct CorrelationPair {
  double predicted = 0.0;
  double actual = 0.0;
  TestCase test;
  Index train_index = 0;
};

struct CorrelationReport {
  std::vector<CorrelationPair> pairs;
  double pearson_r = 0.0;
  nlohmann::json config = nlohmann::json::object();
};

/// Pearson r over the pairs; throws if fewer than two.
CorrelationReport make_correlation_report(std::vector<CorrelationPair> pairs, nlohmann::json config = {});

struct InfluenceMethod {
  InfluenceOptions options;
  bool basic = false;
  bool exact = false;
};

/// For every test case take the training point with the largest |dg|,
/// retrain without it, and correlate predicted against actual. Test cases
/// with no interacting records are skipped. Retraining runs on `jobs`
/// threads.
CorrelationReport correlation_study(const ModelParams& model, const Dataset& train,
                                    std::span<const TestCase> cases, const TrainingRecipe& recipe,
                                    const InfluenceMethod& method, Index repeats, Index jobs = 1);

nlohmann::json to_json(const CorrelationReport& report);
/// `predicted,actual` rows.
void write_scatter_csv(std::ostream& out, const CorrelationReport& report);

enum class BenchMethod { kFia, kIa };

struct BenchmarkModel {
  Index dim = 0;
  const ModelParams* params = nullptr;
};

struct BenchmarkRow {
  Index dim = 0;
  std::string method;  // FIA-MF, IA-MF, FIA-NCF, IA-NCF
  double mean_seconds = 0.0;
  Index test_cases = 0;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
  /// IA time / FIA time per (model, K), keyed by "MF" or "NCF".
  std::map<std::pair<std::string, Index>, double> speedup;
  nlohmann::json config = nlohmann::json::object();
};

/// Mean wall-clock seconds per test case to score all of R_t, on the
/// calling thread. Every K in `dims` needs a model in `models`.
BenchmarkReport benchmark(std::span<const BenchmarkModel> models, const Dataset& train,
                          std::span<const TestCase> cases, std::span<const Index> dims,
                          std::span<const BenchMethod> methods, const InfluenceOptions& options);

std::string method_label(BenchMethod method, ModelKind kind);
nlohmann::json to_json(const BenchmarkReport& report);
/// k,method,mean_seconds,test_cases,speedup
void write_benchmark_csv(std::ostream& out, const BenchmarkReport& report);
void write_benchmark_markdown(std::ostream& out, const BenchmarkReport& report);

}  // namespace lfm
