#include "lfm/explain.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "lfm/error.hpp"

namespace lfm {

using nlohmann::json;

bool influence_order(const InfluenceScore& a, const InfluenceScore& b) {
  const double ma = std::abs(a.delta_g);
  const double mb = std::abs(b.delta_g);
  if (ma != mb) return ma > mb;
  if (a.delta_g != b.delta_g) return a.delta_g > b.delta_g;
  return a.train_index < b.train_index;
}

namespace {

Explanation explain(const TestCase& tc, double predicted, std::span<const InfluenceScore> scores,
                    const Dataset& train, Index k, ExplanationStyle style) {
  if (k < 1) throw Error(ErrorKind::kConfig, "k must be >= 1");
  const Side wanted = style == ExplanationStyle::kItemBased ? Side::kUser : Side::kItem;
  std::vector<InfluenceScore> pool;
  for (const auto& s : scores) {
    if (s.side == wanted || s.side == Side::kBoth) pool.push_back(s);
  }
  if (pool.empty()) {
    throw Error(ErrorKind::kColdStart, style == ExplanationStyle::kItemBased ? "user has no training history"
                                                                             : "item has no training history");
  }
  std::sort(pool.begin(), pool.end(), influence_order);

  Explanation out;
  out.test = tc;
  out.predicted_rating = predicted;
  out.style = style;
  out.requested_k = k;
  out.shortfall = pool.size() < k;
  const Index take = std::min<Index>(k, pool.size());
  for (Index r = 0; r < take; ++r) {
    out.entries.push_back({r + 1, pool[r].train_index, train.record(pool[r].train_index), pool[r].delta_g});
  }
  return out;
}

std::string significant(double v, int digits) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

std::string fixed2(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v;
  return s.str();
}

}  // namespace

Explanation explain_item_based(const TestCase& tc, double predicted, std::span<const InfluenceScore> scores,
                               const Dataset& train, Index k) {
  return explain(tc, predicted, scores, train, k, ExplanationStyle::kItemBased);
}

Explanation explain_user_based(const TestCase& tc, double predicted, std::span<const InfluenceScore> scores,
                               const Dataset& train, Index k) {
  return explain(tc, predicted, scores, train, k, ExplanationStyle::kUserBased);
}

json render_explanation(const Explanation& expl, const IdMaps& ids, const MetadataMap& metadata) {
  auto item_json = [&](Index item) {
    const std::string& ext = ids.items.external(item);
    json j{{"item", ext}};
    if (auto it = metadata.find(ext); it != metadata.end()) {
      j["title"] = it->second.title;
      j["genres"] = it->second.genres;
    }
    return j;
  };
  auto item_label = [&](Index item) {
    const std::string& ext = ids.items.external(item);
    auto it = metadata.find(ext);
    return it == metadata.end() ? ext : it->second.title;
  };

  const bool item_based = expl.style == ExplanationStyle::kItemBased;
  json doc;
  doc["user"] = ids.users.external(expl.test.user);
  doc["target"] = item_json(expl.test.item);
  doc["predicted_rating"] = expl.predicted_rating;
  doc["style"] = item_based ? "item" : "user";
  doc["k"] = expl.requested_k;
  doc["shortfall"] = expl.shortfall;
  json entries = json::array();
  for (const auto& e : expl.entries) {
    json j = item_json(e.record.item);
    j["rank"] = e.rank;
    j["user"] = ids.users.external(e.record.user);
    j["rating"] = e.record.rating;
    j["delta_g"] = e.delta_g;
    j["delta_g_display"] = significant(e.delta_g, 6);
    entries.push_back(std::move(j));
  }
  doc["entries"] = std::move(entries);
  if (!expl.entries.empty()) {
    const std::string head =
        "we predict your rating for " + item_label(expl.test.item) + " to be " + fixed2(expl.predicted_rating);
    const std::string n = std::to_string(expl.entries.size());
    doc["narrative"] = item_based ? head + ", mostly because of your previous ratings on the following " + n + " items"
                                  : head + ", mostly because of how the following " + n + " users rated it";
  }
  return doc;
}

std::optional<Index> InfluenceDistribution::bin_of(double x) const {
  for (Index b = 0; b < histogram.size(); ++b) {
    const bool last = b + 1 == histogram.size();
    if (x >= histogram[b].lower && (x < histogram[b].upper || (last && x <= histogram[b].upper))) return b;
  }
  return std::nullopt;
}

InfluenceDistribution influence_distribution(std::span<const InfluenceScore> scores) {
  if (scores.empty()) throw Error(ErrorKind::kConfig, "influence distribution needs at least one score");
  const Index n = scores.size();
  std::vector<double> values;
  values.reserve(n);
  for (const auto& s : scores) values.push_back(s.delta_g);

  InfluenceDistribution d;
  const auto bins = std::clamp<Index>(static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(n)))), 10, 100);
  auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it;
  double hi = *hi_it;
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  d.histogram.resize(bins);
  for (Index b = 0; b < bins; ++b) {
    d.histogram[b].lower = lo + width * static_cast<double>(b);
    d.histogram[b].upper = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
    d.histogram[b].center = 0.5 * (d.histogram[b].lower + d.histogram[b].upper);
  }
  for (double v : values) {
    auto b = static_cast<Index>(std::floor((v - lo) / width));
    ++d.histogram[std::min(b, bins - 1)].count;
  }

  std::vector<double> abs_values;
  abs_values.reserve(n);
  for (double v : values) abs_values.push_back(std::abs(v));
  std::sort(abs_values.begin(), abs_values.end(), std::greater<>());
  for (Index r = 0; r < n; ++r) d.sorted_abs.emplace_back(r + 1, abs_values[r]);

  // Silverman's rule: h = 0.9 min(sd, IQR / 1.34) n^(-1/5).
  if (n >= 2) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(n - 1));
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
      const double pos = q * static_cast<double>(n - 1);
      const auto i = static_cast<Index>(pos);
      const double frac = pos - static_cast<double>(i);
      return i + 1 < n ? sorted[i] * (1 - frac) + sorted[i + 1] * frac : sorted[i];
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    double spread = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
    if (spread > 0) {
      d.bandwidth = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
      const double h = d.bandwidth;
      const double from = sorted.front() - 3 * h;
      const double to = sorted.back() + 3 * h;
      constexpr int kPoints = 200;
      const double norm = 1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * std::numbers::pi));
      for (int p = 0; p < kPoints; ++p) {
        const double x = from + (to - from) * p / (kPoints - 1);
        double f = 0.0;
        for (double v : values) {
          const double u = (x - v) / h;
          f += std::exp(-0.5 * u * u);
        }
        d.density.emplace_back(x, f * norm);
      }
    }
  }
  return d;
}

void write_histogram_csv(std::ostream& out, const InfluenceDistribution& d) {
  out << "bin_center,count\n" << std::setprecision(17);
  for (const auto& b : d.histogram) out << b.center << ',' << b.count << '\n';
}

void write_sorted_abs_csv(std::ostream& out, const InfluenceDistribution& d) {
  out << "rank,abs_influence\n" << std::setprecision(17);
  for (auto [rank, v] : d.sorted_abs) out << rank << ',' << v << '\n';
}

void write_density_csv(std::ostream& out, const InfluenceDistribution& d) {
  out << "x,density\n" << std::setprecision(17);
  for (auto [x, f] : d.density) out << x << ',' << f << '\n';
}

}  // namespace lfm
