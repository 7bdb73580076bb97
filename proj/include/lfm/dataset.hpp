#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lfm {

using Index = std::size_t;

/// One observed rating with external (file-level) identifiers.
struct RatingRecord {
  std::string user;
  std::string item;
  double rating = 0.0;
  std::optional<std::int64_t> timestamp;

  bool operator==(const RatingRecord&) const = default;
};

/// A rating re-indexed against an IdMaps instance.
struct IndexedRating {
  Index user = 0;
  Index item = 0;
  double rating = 0.0;

  bool operator==(const IndexedRating&) const = default;
};

enum class RatingFormat { kDat, kCsv };

/// Dense external <-> internal id map. Internal ids are assigned in
/// first-appearance order.
class IdMap {
 public:
  Index intern(const std::string& external);
  std::optional<Index> find(const std::string& external) const;
  const std::string& external(Index internal) const { return external_.at(internal); }
  Index size() const { return external_.size(); }
  const std::vector<std::string>& externals() const { return external_; }

 private:
  std::vector<std::string> external_;
  std::unordered_map<std::string, Index> internal_;
};

struct IdMaps {
  IdMap users;
  IdMap items;
};

/// Immutable indexed rating set with per-user and per-item inverted lists.
///
/// User and item counts come from the id maps, so a train split keeps the
/// dimensions of the dataset it was cut from even if some user or item ends
/// up with an empty list.
class Dataset {
 public:
  Dataset(std::shared_ptr<const IdMaps> ids, std::vector<IndexedRating> records);

  Index size() const { return records_.size(); }
  Index num_users() const { return ids_->users.size(); }
  Index num_items() const { return ids_->items.size(); }

  const std::vector<IndexedRating>& records() const { return records_; }
  const IndexedRating& record(Index i) const { return records_.at(i); }

  /// R_u: indices of the records of user `u`.
  std::span<const Index> by_user(Index u) const { return by_user_.at(u); }
  /// R_i: indices of the records of item `i`.
  std::span<const Index> by_item(Index i) const { return by_item_.at(i); }

  const IdMaps& id_maps() const { return *ids_; }
  std::shared_ptr<const IdMaps> shared_id_maps() const { return ids_; }

  RatingRecord external(const IndexedRating& r) const;
  RatingRecord external(Index i) const { return external(record(i)); }

  /// Same id maps, one record dropped. Record indices after `i` shift down.
  Dataset without(Index i) const;

 private:
  std::shared_ptr<const IdMaps> ids_;
  std::vector<IndexedRating> records_;
  std::vector<std::vector<Index>> by_user_;
  std::vector<std::vector<Index>> by_item_;
};

struct ItemMetadata {
  std::string item;
  std::string title;
  std::vector<std::string> genres;
};

using MetadataMap = std::unordered_map<std::string, ItemMetadata>;

struct Split {
  Dataset train;
  std::vector<IndexedRating> test;
};

/// `dat`: UserID::ItemID::Rating::Timestamp. `csv`: header
/// user,item,rating[,timestamp]. Blank lines are skipped.
std::vector<RatingRecord> parse_ratings(std::istream& in, RatingFormat format);

/// k-core filter: drops users and items with fewer than `min_count` records
/// until no violators remain. Input order is preserved.
std::vector<RatingRecord> filter_min_interactions(const std::vector<RatingRecord>& records,
                                                  std::size_t min_count);

Dataset build_index(const std::vector<RatingRecord>& records);

/// Re-index external records against existing id maps. Unknown ids throw.
Dataset index_with(std::shared_ptr<const IdMaps> ids, const std::vector<RatingRecord>& records);

/// Holds out one uniformly chosen record per user.
Split leave_one_out_split(const Dataset& ds, std::uint64_t seed);

/// ItemID::Title::Genre1|Genre2|...
MetadataMap load_item_metadata(std::istream& in);

/// CSV manifest: user,item,rating,role with role in {train,test}.
void write_split_manifest(std::ostream& out, const Split& split);

struct ManifestRows {
  std::vector<RatingRecord> train;
  std::vector<RatingRecord> test;
};
ManifestRows read_split_manifest(std::istream& in);

}  // namespace lfm
