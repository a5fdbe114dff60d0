#ifndef DCASR_DOMAIN_HPP
#define DCASR_DOMAIN_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dcasr/errors.hpp"

namespace dcasr {

using ItemId = std::int32_t;
using CatId = std::int32_t;

/// Dense item/category id spaces plus the total item -> category map.
/// Ids are remapped to 0..n-1 at ingestion; the original ids are kept so
/// reports can be written in the source vocabulary.
class ItemCatalog {
 public:
  static constexpr const char* kUnkCategory = "UNK";

  ItemCatalog() = default;
  ItemCatalog(std::vector<CatId> category_of, std::vector<std::string> item_names,
              std::vector<std::string> category_names);

  std::size_t num_items() const { return category_of_.size(); }
  std::size_t num_categories() const { return category_names_.size(); }

  CatId category(ItemId item) const {
    if (item < 0 || static_cast<std::size_t>(item) >= category_of_.size())
      throw ContractError("catalog: item id out of range: " + std::to_string(item));
    return category_of_[static_cast<std::size_t>(item)];
  }

  const std::vector<CatId>& category_of() const { return category_of_; }
  const std::string& item_name(ItemId i) const { return item_names_.at(static_cast<std::size_t>(i)); }
  const std::string& category_name(CatId c) const { return category_names_.at(static_cast<std::size_t>(c)); }
  const std::vector<std::string>& item_names() const { return item_names_; }
  const std::vector<std::string>& category_names() const { return category_names_; }

  /// Dense id of an original item id, if the item is in the catalog.
  std::optional<ItemId> find_item(const std::string& original) const;

 private:
  std::vector<CatId> category_of_;
  std::vector<std::string> item_names_;
  std::vector<std::string> category_names_;
  std::unordered_map<std::string, ItemId> item_index_;
};

/// Chronological item-id sequence for one anonymous user.
struct Session {
  std::string session_id;
  std::vector<ItemId> items;
  std::vector<std::int64_t> timestamps;  // epoch seconds; empty when absent

  bool has_timestamps() const { return !timestamps.empty(); }
  std::int64_t last_timestamp() const { return timestamps.back(); }
  void validate(const ItemCatalog& catalog) const;
};

/// One training example: a session prefix plus the next clicked item.
struct PrefixTarget {
  std::vector<ItemId> prefix;
  ItemId target = 0;
};

/// Top-N distinct items with non-increasing scores.
struct RecommendationList {
  std::vector<std::pair<ItemId, double>> entries;

  std::size_t size() const { return entries.size(); }
  ItemId item(std::size_t rank) const { return entries[rank].first; }
  void validate() const;
};

/// Normalized relevance scores over the full item space.
struct ScoreDistribution {
  std::vector<double> item_probs;

  void validate() const;
};

/// Build a catalog from raw (item, category) records. Ids are remapped to
/// dense integers in first-appearance order. An empty category string means
/// the item has no category information; those items are assigned the
/// reserved UNK category, which always takes the last index.
ItemCatalog validate_catalog(const std::vector<std::pair<std::string, std::string>>& raw_records);

/// Element-wise category lookup for a session.
std::vector<CatId> category_sequence(const Session& session, const ItemCatalog& catalog);

}  // namespace dcasr

#endif  // DCASR_DOMAIN_HPP
