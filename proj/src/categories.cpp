#include "streamscene/categories.hpp"

#include <algorithm>
#include <cctype>

#include "streamscene/errors.hpp"

namespace streamscene {

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

CategoryVocabulary::CategoryVocabulary(const std::vector<std::string>& names) {
  for (const auto& n : names) add(n);
}

const CategoryVocabulary& CategoryVocabulary::standard() {
  static const CategoryVocabulary vocab({"chair", "table", "computer", "curtain", "sink",
                                         "bed", "bookcase", "sofa", "toilet", "tub"});
  return vocab;
}

CategoryId CategoryVocabulary::add(std::string_view name) {
  if (auto id = find(name)) return *id;
  if (name.empty()) throw ContractError("category name must not be empty");
  if (names_.size() >= 0xFFFE) throw ContractError("category vocabulary is full");
  names_.push_back(to_lower(name));
  return static_cast<CategoryId>(names_.size());
}

std::optional<CategoryId> CategoryVocabulary::find(std::string_view name) const {
  const std::string key = to_lower(name);
  auto it = std::find(names_.begin(), names_.end(), key);
  if (it == names_.end()) return std::nullopt;
  return static_cast<CategoryId>(it - names_.begin() + 1);
}

CategoryId CategoryVocabulary::id_of(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw UnknownLabelError(std::string(name));
}

const std::string& CategoryVocabulary::name_of(CategoryId id) const {
  if (id == kBackground || id > names_.size()) {
    throw UnknownLabelError("#" + std::to_string(id));
  }
  return names_[id - 1];
}

}  // namespace streamscene
