#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace streamscene {

using CategoryId = std::uint16_t;

// Id 0 is reserved for background / unlabeled pixels.
inline constexpr CategoryId kBackground = 0;

// Ordered category vocabulary. Ids are 1-based positions in the list.
// Lookups are case-insensitive; names are stored in lower case.
class CategoryVocabulary {
 public:
  CategoryVocabulary() = default;
  explicit CategoryVocabulary(const std::vector<std::string>& names);

  // chair, table, computer, curtain, sink, bed, bookcase, sofa, toilet, tub.
  static const CategoryVocabulary& standard();

  // Appends a category (extension hook). Returns the existing id if the name
  // is already present.
  CategoryId add(std::string_view name);

  std::optional<CategoryId> find(std::string_view name) const;
  CategoryId id_of(std::string_view name) const;  // throws UnknownLabelError
  const std::string& name_of(CategoryId id) const;
  bool contains(std::string_view name) const { return find(name).has_value(); }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
};

std::string to_lower(std::string_view s);

}  // namespace streamscene
