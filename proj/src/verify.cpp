#include "lfm/verify.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <iomanip>
#include <ostream>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "lfm/checkpoint.hpp"
#include "lfm/error.hpp"
#include "lfm/train.hpp"

namespace lfm {

using nlohmann::json;

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorKind::kConfig, "pearson: length mismatch");
  const Index n = xs.size();
  if (n < 2) throw Error(ErrorKind::kConfig, "pearson: need at least two points");
  double mx = 0.0;
  double my = 0.0;
  for (Index i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::kConfig, "pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

Hyperparams with_seed(Hyperparams hp, Index r) {
  hp.seed += r;
  return hp;
}

/// Runs fn(0..count-1) on up to `jobs` threads; rethrows the first failure.
void parallel_for(Index count, Index jobs, const std::function<void(Index)>& fn) {
  jobs = std::max<Index>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (Index j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (Index i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

RetrainOracle::RetrainOracle(const Dataset& train, TrainingRecipe recipe, Index repeats)
    : train_(train), recipe_(std::move(recipe)), repeats_(repeats), full_(repeats) {
  if (repeats < 1) throw Error(ErrorKind::kConfig, "repeats must be >= 1");
  for (Index r = 0; r < repeats; ++r) once_.push_back(std::make_unique<std::once_flag>());
}

const ModelParams& RetrainOracle::full_model(Index r) {
  if (r < 1 || r > repeats_) throw Error(ErrorKind::kConfig, "repeat out of range");
  std::call_once(*once_[r - 1], [&] {
    full_[r - 1] = train(recipe_.kind, train_, with_seed(recipe_.hp, r), recipe_.arch).params;
  });
  return *full_[r - 1];
}

double RetrainOracle::delta_for_repeat(std::optional<Index> z, const TestCase& tc, Index r) {
  const ModelParams& full = full_model(r);
  const Hyperparams hp = with_seed(recipe_.hp, r);
  const ModelParams reduced =
      z ? train(recipe_.kind, train_.without(*z), hp, recipe_.arch).params
        : train(recipe_.kind, train_, hp, recipe_.arch).params;
  return predict(reduced, tc.user, tc.item) - predict(full, tc.user, tc.item);
}

double RetrainOracle::delta_true(std::optional<Index> z, const TestCase& tc) {
  double sum = 0.0;
  for (Index r = 1; r <= repeats_; ++r) sum += delta_for_repeat(z, tc, r);
  return sum / static_cast<double>(repeats_);
}

double retrain_without(const Dataset& train, Index z, const TrainingRecipe& recipe, const TestCase& tc,
                       Index repeats) {
  if (z >= train.size()) throw Error(ErrorKind::kConfig, "training index out of range");
  RetrainOracle oracle(train, recipe, repeats);
  return oracle.delta_true(z, tc);
}

CorrelationReport make_correlation_report(std::vector<CorrelationPair> pairs, json config) {
  if (pairs.size() < 2) throw Error(ErrorKind::kConfig, "correlation needs at least two usable test cases");
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& p : pairs) {
    xs.push_back(p.predicted);
    ys.push_back(p.actual);
  }
  CorrelationReport report;
  report.pearson_r = pearson(xs, ys);
  report.pairs = std::move(pairs);
  report.config = config.is_null() ? json::object() : std::move(config);
  return report;
}

CorrelationReport correlation_study(const ModelParams& model, const Dataset& train, std::span<const TestCase> cases,
                                    const TrainingRecipe& recipe, const InfluenceMethod& method, Index repeats,
                                    Index jobs) {
  if (recipe.kind != model.kind()) throw Error(ErrorKind::kConfig, "recipe and model kinds differ");
  std::vector<CorrelationPair> pairs;
  for (const auto& tc : cases) {
    InfluenceResult res;
    try {
      res = compute_influence(tc, train, model, method.options, method.basic, method.exact);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kColdStart) throw;
      spdlog::warn("skipping test case ({}, {}): {}", tc.user, tc.item, e.what());
      continue;
    }
    const auto best = std::min_element(
        res.scores.begin(), res.scores.end(),
        [](const InfluenceScore& a, const InfluenceScore& b) {
          const double ma = std::abs(a.delta_g);
          const double mb = std::abs(b.delta_g);
          return ma != mb ? ma > mb : a.train_index < b.train_index;
        });
    pairs.push_back({best->delta_g, 0.0, tc, best->train_index});
  }
  if (pairs.size() < 2) throw Error(ErrorKind::kConfig, "correlation needs at least two usable test cases");

  RetrainOracle oracle(train, recipe, repeats);
  parallel_for(repeats, jobs, [&](Index r) { oracle.full_model(r + 1); });
  std::vector<double> deltas(pairs.size() * repeats);
  parallel_for(deltas.size(), jobs, [&](Index job) {
    const Index c = job / repeats;
    const Index r = job % repeats + 1;
    deltas[job] = oracle.delta_for_repeat(pairs[c].train_index, pairs[c].test, r);
    spdlog::info("retrain case {} repeat {}: dg_true {:.6g}", c, r, deltas[job]);
  });
  for (Index c = 0; c < pairs.size(); ++c) {
    double sum = 0.0;
    for (Index r = 0; r < repeats; ++r) sum += deltas[c * repeats + r];
    pairs[c].actual = sum / static_cast<double>(repeats);
  }

  json config{{"model", to_string(recipe.kind)},
              {"hyperparams", to_json(recipe.hp)},
              {"repeats", repeats},
              {"basic", method.basic},
              {"exact", method.exact},
              {"damping", method.options.cg.damping},
              {"cg_tolerance", method.options.cg.tolerance},
              {"cg_max_iterations", method.options.cg.max_iterations}};
  if (recipe.kind == ModelKind::kNcf) config["architecture"] = to_json(recipe.arch);
  return make_correlation_report(std::move(pairs), std::move(config));
}

json to_json(const CorrelationReport& report) {
  json pairs = json::array();
  for (const auto& p : report.pairs) {
    pairs.push_back({{"predicted", p.predicted},
                     {"actual", p.actual},
                     {"user", p.test.user},
                     {"item", p.test.item},
                     {"train_index", p.train_index}});
  }
  return json{{"pearson_r", report.pearson_r}, {"pairs", pairs}, {"config", report.config}};
}

void write_scatter_csv(std::ostream& out, const CorrelationReport& report) {
  out << "predicted,actual\n" << std::setprecision(17);
  for (const auto& p : report.pairs) out << p.predicted << ',' << p.actual << '\n';
}

std::string method_label(BenchMethod method, ModelKind kind) {
  return std::string(method == BenchMethod::kFia ? "FIA-" : "IA-") + (kind == ModelKind::kMf ? "MF" : "NCF");
}

BenchmarkReport benchmark(std::span<const BenchmarkModel> models, const Dataset& train,
                          std::span<const TestCase> cases, std::span<const Index> dims,
                          std::span<const BenchMethod> methods, const InfluenceOptions& options) {
  std::vector<Index> missing;
  for (Index k : dims) {
    if (std::none_of(models.begin(), models.end(), [&](const BenchmarkModel& m) { return m.dim == k && m.params; })) {
      missing.push_back(k);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (Index k : missing) list += (list.empty() ? "" : ", ") + std::to_string(k);
    throw Error(ErrorKind::kConfig, "missing checkpoint for K = " + list);
  }
  if (cases.empty()) throw Error(ErrorKind::kConfig, "benchmark needs at least one test case");

  BenchmarkReport report;
  std::map<std::pair<std::string, Index>, std::map<BenchMethod, double>> times;
  for (Index k : dims) {
    for (const auto& m : models) {
      if (m.dim != k || !m.params) continue;
      const ModelKind kind = m.params->kind();
      for (BenchMethod method : methods) {
        double total = 0.0;
        Index counted = 0;
        for (const auto& tc : cases) {
          const auto start = std::chrono::steady_clock::now();
          try {
            compute_influence(tc, train, *m.params, options, method == BenchMethod::kIa, false);
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::kColdStart) throw;
            continue;
          }
          total += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          ++counted;
        }
        if (counted == 0) throw Error(ErrorKind::kColdStart, "no benchmark test case has training history");
        const double mean = std::max(total / static_cast<double>(counted), 1e-9);
        report.rows.push_back({k, method_label(method, kind), mean, counted});
        times[{kind == ModelKind::kMf ? "MF" : "NCF", k}][method] = mean;
        spdlog::info("{} K={}: {:.6f} s per test case", method_label(method, kind), k, mean);
      }
    }
  }
  for (const auto& [key, by_method] : times) {
    auto fia = by_method.find(BenchMethod::kFia);
    auto ia = by_method.find(BenchMethod::kIa);
    if (fia != by_method.end() && ia != by_method.end()) report.speedup[key] = ia->second / fia->second;
  }
  report.config = json{{"test_cases", cases.size()}, {"train_size", train.size()}};
  return report;
}

json to_json(const BenchmarkReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"k", r.dim}, {"method", r.method}, {"mean_seconds", r.mean_seconds}, {"test_cases", r.test_cases}});
  }
  json speedups = json::array();
  for (const auto& [key, s] : report.speedup) speedups.push_back({{"model", key.first}, {"k", key.second}, {"speedup", s}});
  return json{{"rows", rows}, {"speedup", speedups}, {"config", report.config}};
}

namespace {

std::string family(const std::string& method) { return method.substr(method.find('-') + 1); }

}  // namespace

void write_benchmark_csv(std::ostream& out, const BenchmarkReport& report) {
  out << "k,method,mean_seconds,test_cases,speedup\n" << std::setprecision(17);
  for (const auto& r : report.rows) {
    out << r.dim << ',' << r.method << ',' << r.mean_seconds << ',' << r.test_cases << ',';
    if (auto it = report.speedup.find({family(r.method), r.dim}); it != report.speedup.end()) out << it->second;
    out << '\n';
  }
}

void write_benchmark_markdown(std::ostream& out, const BenchmarkReport& report) {
  std::set<Index> dims;
  std::vector<std::string> methods;
  for (const auto& r : report.rows) {
    dims.insert(r.dim);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  out << "| Method |";
  for (Index k : dims) out << " K=" << k << " |";
  out << "\n|---|";
  for (Index c = 0; c < dims.size(); ++c) out << "---|";
  out << '\n' << std::setprecision(4);
  for (const auto& m : methods) {
    out << "| " << m << " |";
    for (Index k : dims) {
      auto it = std::find_if(report.rows.begin(), report.rows.end(),
                             [&](const BenchmarkRow& r) { return r.method == m && r.dim == k; });
      if (it == report.rows.end()) {
        out << " - |";
      } else {
        out << ' ' << it->mean_seconds << "s |";
      }
    }
    out << '\n';
  }
  for (const std::string fam : {"MF", "NCF"}) {
    bool any = false;
    for (Index k : dims) any = any || report.speedup.count({fam, k});
    if (!any) continue;
    out << "| Speedup " << fam << " |";
    for (Index k : dims) {
      auto it = report.speedup.find({fam, k});
      if (it == report.speedup.end()) {
        out << " - |";
      } else {
        out << ' ' << it->second << "x |";
      }
    }
    out << '\n';
  }
}

}  // namespace lfm
