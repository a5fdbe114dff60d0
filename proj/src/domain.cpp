#include "dcasr/domain.hpp"

#include <cmath>
#include <unordered_set>

namespace dcasr {

ItemCatalog::ItemCatalog(std::vector<CatId> category_of, std::vector<std::string> item_names,
                         std::vector<std::string> category_names)
    : category_of_(std::move(category_of)),
      item_names_(std::move(item_names)),
      category_names_(std::move(category_names)) {
  if (category_of_.empty()) throw ValidationError("catalog: no items");
  if (category_names_.empty()) throw ValidationError("catalog: no categories");
  if (item_names_.size() != category_of_.size())
    throw ValidationError("catalog: item name table size mismatch");
  for (std::size_t i = 0; i < category_of_.size(); ++i) {
    const CatId c = category_of_[i];
    if (c < 0 || static_cast<std::size_t>(c) >= category_names_.size())
      throw ValidationError("catalog: category id out of range for item " + std::to_string(i));
  }
  item_index_.reserve(item_names_.size());
  for (std::size_t i = 0; i < item_names_.size(); ++i) {
    if (!item_index_.emplace(item_names_[i], static_cast<ItemId>(i)).second)
      throw ValidationError("catalog: duplicate original item id: " + item_names_[i]);
  }
}

std::optional<ItemId> ItemCatalog::find_item(const std::string& original) const {
  const auto it = item_index_.find(original);
  if (it == item_index_.end()) return std::nullopt;
  return it->second;
}

void Session::validate(const ItemCatalog& catalog) const {
  if (items.empty()) throw ValidationError("session " + session_id + ": empty");
  if (!timestamps.empty()) {
    if (timestamps.size() != items.size())
      throw ValidationError("session " + session_id + ": timestamp count mismatch");
    for (std::size_t i = 1; i < timestamps.size(); ++i)
      if (timestamps[i] < timestamps[i - 1])
        throw ValidationError("session " + session_id + ": timestamps decrease");
  }
  for (const ItemId it : items)
    if (it < 0 || static_cast<std::size_t>(it) >= catalog.num_items())
      throw ValidationError("session " + session_id + ": unknown item " + std::to_string(it));
}

void RecommendationList::validate() const {
  if (entries.empty()) throw ValidationError("recommendation list: empty");
  std::unordered_set<ItemId> seen;
  double prev = entries.front().second;
  for (const auto& [item, score] : entries) {
    if (!seen.insert(item).second)
      throw ValidationError("recommendation list: duplicate item " + std::to_string(item));
    if (score > prev)
      throw ValidationError("recommendation list: scores must be non-increasing");
    prev = score;
  }
}

void ScoreDistribution::validate() const {
  double sum = 0.0;
  for (const double p : item_probs) {
    if (!(p >= 0.0)) throw ValidationError("score distribution: negative or NaN entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("score distribution: entries sum to " + std::to_string(sum));
}

ItemCatalog validate_catalog(const std::vector<std::pair<std::string, std::string>>& raw_records) {
  if (raw_records.empty()) throw ValidationError("catalog: empty input");

  std::unordered_map<std::string, std::string> cat_by_item;
  std::vector<std::string> item_order;
  std::vector<std::string> cat_order;
  std::unordered_set<std::string> cats_seen;
  bool has_unk = false;

  for (const auto& [item, cat] : raw_records) {
    const auto it = cat_by_item.find(item);
    if (it != cat_by_item.end()) {
      if (it->second != cat)
        throw ValidationError("catalog: item " + item + " has conflicting categories '" +
                              it->second + "' and '" + cat + "'");
      continue;
    }
    cat_by_item.emplace(item, cat);
    item_order.push_back(item);
    if (cat.empty()) {
      has_unk = true;
    } else if (cats_seen.insert(cat).second) {
      cat_order.push_back(cat);
    }
  }

  // UNK, when needed, is appended so it always takes the last index.
  std::unordered_map<std::string, CatId> cat_index;
  for (std::size_t i = 0; i < cat_order.size(); ++i)
    cat_index.emplace(cat_order[i], static_cast<CatId>(i));
  if (has_unk) {
    cat_index.emplace("", static_cast<CatId>(cat_order.size()));
    cat_order.emplace_back(ItemCatalog::kUnkCategory);
  }

  std::vector<CatId> category_of(item_order.size());
  for (std::size_t i = 0; i < item_order.size(); ++i)
    category_of[i] = cat_index.at(cat_by_item.at(item_order[i]));

  return ItemCatalog(std::move(category_of), std::move(item_order), std::move(cat_order));
}

std::vector<CatId> category_sequence(const Session& session, const ItemCatalog& catalog) {
  std::vector<CatId> out;
  out.reserve(session.items.size());
  for (const ItemId item : session.items) out.push_back(catalog.category(item));
  return out;
}

}  // namespace dcasr
