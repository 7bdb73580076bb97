#include "lfm/dataset.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "lfm/error.hpp"

namespace lfm {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::vector<std::string_view> split_on(std::string_view s, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + sep.size();
  }
}

double parse_rating(std::string_view field, std::size_t line) {
  field = trim(field);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(line, "non-numeric rating '" + std::string(field) + "'");
  }
  if (!std::isfinite(value)) throw ParseError(line, "rating is not finite");
  return value;
}

std::int64_t parse_timestamp(std::string_view field, std::size_t line) {
  field = trim(field);
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(line, "bad timestamp '" + std::string(field) + "'");
  }
  return value;
}

RatingRecord make_record(std::string_view user, std::string_view item, std::string_view rating,
                         const std::string_view* ts, std::size_t line) {
  RatingRecord r;
  r.user = std::string(trim(user));
  r.item = std::string(trim(item));
  if (r.user.empty() || r.item.empty()) throw ParseError(line, "empty user or item id");
  r.rating = parse_rating(rating, line);
  if (ts != nullptr && !trim(*ts).empty()) r.timestamp = parse_timestamp(*ts, line);
  return r;
}

}  // namespace

Index IdMap::intern(const std::string& external) {
  auto [it, inserted] = internal_.try_emplace(external, external_.size());
  if (inserted) external_.push_back(external);
  return it->second;
}

std::optional<Index> IdMap::find(const std::string& external) const {
  auto it = internal_.find(external);
  if (it == internal_.end()) return std::nullopt;
  return it->second;
}

Dataset::Dataset(std::shared_ptr<const IdMaps> ids, std::vector<IndexedRating> records)
    : ids_(std::move(ids)), records_(std::move(records)) {
  by_user_.resize(ids_->users.size());
  by_item_.resize(ids_->items.size());
  for (Index i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.user >= by_user_.size() || r.item >= by_item_.size()) {
      throw Error(ErrorKind::kInternal, "record " + std::to_string(i) + " out of id-map range");
    }
    by_user_[r.user].push_back(i);
    by_item_[r.item].push_back(i);
  }
}

RatingRecord Dataset::external(const IndexedRating& r) const {
  return RatingRecord{ids_->users.external(r.user), ids_->items.external(r.item), r.rating, {}};
}

Dataset Dataset::without(Index i) const {
  if (i >= records_.size()) throw Error(ErrorKind::kInternal, "record index out of range");
  std::vector<IndexedRating> kept;
  kept.reserve(records_.size() - 1);
  for (Index j = 0; j < records_.size(); ++j) {
    if (j != i) kept.push_back(records_[j]);
  }
  return Dataset(ids_, std::move(kept));
}

std::vector<RatingRecord> parse_ratings(std::istream& in, RatingFormat format) {
  std::vector<RatingRecord> out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = trim(line);
    if (view.empty()) continue;
    if (format == RatingFormat::kDat) {
      auto f = split_on(view, "::");
      if (f.size() != 3 && f.size() != 4) {
        throw ParseError(lineno, "expected UserID::ItemID::Rating::Timestamp");
      }
      out.push_back(make_record(f[0], f[1], f[2], f.size() == 4 ? &f[3] : nullptr, lineno));
    } else {
      auto f = split_on(view, ",");
      if (!header_seen) {
        header_seen = true;
        if (f.size() >= 3 && trim(f[0]) == "user" && trim(f[1]) == "item" && trim(f[2]) == "rating") {
          continue;
        }
        // Header-less input is tolerated; fall through and parse as data.
      }
      if (f.size() != 3 && f.size() != 4) throw ParseError(lineno, "expected user,item,rating[,timestamp]");
      out.push_back(make_record(f[0], f[1], f[2], f.size() == 4 ? &f[3] : nullptr, lineno));
    }
  }
  return out;
}

std::vector<RatingRecord> filter_min_interactions(const std::vector<RatingRecord>& records,
                                                  std::size_t min_count) {
  if (min_count == 0) throw Error(ErrorKind::kConfig, "minCount must be >= 1");
  std::vector<bool> alive(records.size(), true);
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string, std::size_t> user_count, item_count;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!alive[i]) continue;
      ++user_count[records[i].user];
      ++item_count[records[i].item];
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (alive[i] && (user_count[records[i].user] < min_count || item_count[records[i].item] < min_count)) {
        alive[i] = false;
        changed = true;
      }
    }
  }
  std::vector<RatingRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (alive[i]) out.push_back(records[i]);
  }
  return out;
}

Dataset build_index(const std::vector<RatingRecord>& records) {
  if (records.empty()) throw Error(ErrorKind::kConfig, "cannot index an empty rating set");
  auto ids = std::make_shared<IdMaps>();
  std::vector<IndexedRating> indexed;
  indexed.reserve(records.size());
  for (const auto& r : records) {
    indexed.push_back({ids->users.intern(r.user), ids->items.intern(r.item), r.rating});
  }
  return Dataset(std::move(ids), std::move(indexed));
}

Dataset index_with(std::shared_ptr<const IdMaps> ids, const std::vector<RatingRecord>& records) {
  std::vector<IndexedRating> indexed;
  indexed.reserve(records.size());
  for (const auto& r : records) {
    auto u = ids->users.find(r.user);
    auto i = ids->items.find(r.item);
    if (!u) throw Error(ErrorKind::kUnknownId, "unknown user id '" + r.user + "'");
    if (!i) throw Error(ErrorKind::kUnknownId, "unknown item id '" + r.item + "'");
    indexed.push_back({*u, *i, r.rating});
  }
  return Dataset(std::move(ids), std::move(indexed));
}

Split leave_one_out_split(const Dataset& ds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<bool> held_out(ds.size(), false);
  for (Index u = 0; u < ds.num_users(); ++u) {
    auto rows = ds.by_user(u);
    if (rows.empty()) continue;
    if (rows.size() < 2) {
      throw Error(ErrorKind::kConfig,
                  "user '" + ds.id_maps().users.external(u) + "' has only one rating; cannot hold one out");
    }
    std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
    held_out[rows[pick(rng)]] = true;
  }
  std::vector<IndexedRating> train, test;
  for (Index i = 0; i < ds.size(); ++i) {
    (held_out[i] ? test : train).push_back(ds.record(i));
  }
  return Split{Dataset(ds.shared_id_maps(), std::move(train)), std::move(test)};
}

MetadataMap load_item_metadata(std::istream& in) {
  MetadataMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = trim(line);
    if (view.empty()) continue;
    auto first = view.find("::");
    auto last = view.rfind("::");
    if (first == std::string_view::npos || first == last) {
      throw ParseError(lineno, "expected ItemID::Title::Genres");
    }
    ItemMetadata meta;
    meta.item = std::string(trim(view.substr(0, first)));
    meta.title = std::string(trim(view.substr(first + 2, last - first - 2)));
    if (meta.item.empty() || meta.title.empty()) throw ParseError(lineno, "empty item id or title");
    auto genres = trim(view.substr(last + 2));
    if (!genres.empty()) {
      for (auto g : split_on(genres, "|")) {
        if (!g.empty()) meta.genres.emplace_back(g);
      }
    }
    auto key = meta.item;
    if (out.contains(key)) spdlog::warn("duplicate metadata for item {} on line {}; keeping the later entry", key, lineno);
    out.insert_or_assign(key, std::move(meta));
  }
  return out;
}

void write_split_manifest(std::ostream& out, const Split& split) {
  const auto& ids = split.train.id_maps();
  auto row = [&](const IndexedRating& r, const char* role) {
    std::ostringstream rating;
    rating.precision(17);
    rating << r.rating;
    out << ids.users.external(r.user) << ',' << ids.items.external(r.item) << ',' << rating.str() << ','
        << role << '\n';
  };
  out << "user,item,rating,role\n";
  for (const auto& r : split.train.records()) row(r, "train");
  for (const auto& r : split.test) row(r, "test");
}

ManifestRows read_split_manifest(std::istream& in) {
  ManifestRows rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = trim(line);
    if (view.empty()) continue;
    if (lineno == 1 && view.starts_with("user,")) continue;
    auto f = split_on(view, ",");
    if (f.size() != 4) throw ParseError(lineno, "expected user,item,rating,role");
    auto rec = make_record(f[0], f[1], f[2], nullptr, lineno);
    auto role = trim(f[3]);
    if (role == "train") {
      rows.train.push_back(std::move(rec));
    } else if (role == "test") {
      rows.test.push_back(std::move(rec));
    } else {
      throw ParseError(lineno, "role must be train or test");
    }
  }
  return rows;
}

}  // namespace lfm
