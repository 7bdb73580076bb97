#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "lfm/dataset.hpp"
#include "lfm/influence.hpp"

namespace lfm {

enum class ExplanationStyle {
  kItemBased,  // the test user's own ratings (R_{u_t})
  kUserBased,  // other users' ratings of the test item (R_{i_t})
};

struct ExplanationEntry {
  Index rank = 0;  // 1-based
  Index train_index = 0;
  IndexedRating record;
  double delta_g = 0.0;
};

struct Explanation {
  TestCase test;
  double predicted_rating = 0.0;
  ExplanationStyle style = ExplanationStyle::kItemBased;
  Index requested_k = 0;
  bool shortfall = false;  // fewer than requested_k candidates existed
  std::vector<ExplanationEntry> entries;
};

/// Total order used for ranking: |dg| descending, then dg descending, then
/// train index ascending.
bool influence_order(const InfluenceScore& a, const InfluenceScore& b);

Explanation explain_item_based(const TestCase& tc, double predicted, std::span<const InfluenceScore> scores,
                               const Dataset& train, Index k);
Explanation explain_user_based(const TestCase& tc, double predicted, std::span<const InfluenceScore> scores,
                               const Dataset& train, Index k);

/// JSON document with external ids, metadata where known, the signed
/// influence of every entry and a one-sentence narrative.
nlohmann::json render_explanation(const Explanation& expl, const IdMaps& ids, const MetadataMap& metadata);

struct InfluenceDistribution {
  struct Bin {
    double center = 0.0;
    Index count = 0;
    double lower = 0.0;
    double upper = 0.0;
  };
  std::vector<Bin> histogram;
  std::vector<std::pair<Index, double>> sorted_abs;  // (1-based rank, |dg|)
  std::vector<std::pair<double, double>> density;    // Gaussian KDE (x, f(x))
  double bandwidth = 0.0;

  /// Index of the bin whose [lower, upper) contains x (last bin is closed).
  std::optional<Index> bin_of(double x) const;
};

/// Fixed-width histogram over [min, max] with ceil(sqrt(N)) bins clamped to
/// [10, 100], sorted absolute values, and a Silverman-bandwidth KDE.
InfluenceDistribution influence_distribution(std::span<const InfluenceScore> scores);

void write_histogram_csv(std::ostream& out, const InfluenceDistribution& d);
void write_sorted_abs_csv(std::ostream& out, const InfluenceDistribution& d);
void write_density_csv(std::ostream& out, const InfluenceDistribution& d);

}  // namespace lfm
