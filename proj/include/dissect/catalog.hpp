#ifndef DISSECT_CATALOG_HPP_
#define DISSECT_CATALOG_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dissect {

using ConceptId = std::uint32_t;

enum class Category { Scene, Color, Part, Object, Other };

const char* to_string(Category category);
std::optional<Category> parse_category(std::string_view text);

struct ConceptEntry {
  ConceptId id = 0;
  std::string name;
  Category category = Category::Other;
  std::uint32_t support = 0;  // images with a nonempty mask
  bool searchable = true;     // false once removed by filter_concepts

  friend bool operator==(const ConceptEntry&, const ConceptEntry&) = default;
};

/// Concept table with dense ids 0..size()-1 and unique names.
class ConceptCatalog {
 public:
  ConceptCatalog() = default;

  /// Appends a concept with the next dense id.
  ConceptId add(std::string name, Category category);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(ConceptId id) const { return id < entries_.size(); }

  const ConceptEntry& at(ConceptId id) const;
  ConceptEntry& at(ConceptId id);
  const std::string& name(ConceptId id) const { return at(id).name; }
  std::optional<ConceptId> find(std::string_view name) const;

  const std::vector<ConceptEntry>& entries() const { return entries_; }
  /// Ids still in the search space, ascending.
  std::vector<ConceptId> searchable_ids() const;

  friend bool operator==(const ConceptCatalog& a, const ConceptCatalog& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<ConceptEntry> entries_;
  std::unordered_map<std::string, ConceptId> by_name_;
};

/// True when `name` is usable as a logical-form leaf.
bool valid_concept_name(std::string_view name);

/// Reads `concept_id,name,category` CSV. `source` names the input in errors.
ConceptCatalog read_catalog(std::istream& in, const std::string& source = "<catalog>");
ConceptCatalog load_catalog(const std::string& path);
void write_catalog(const ConceptCatalog& catalog, std::ostream& out);
void save_catalog(const ConceptCatalog& catalog, const std::string& path);

}  // namespace dissect

#endif  // DISSECT_CATALOG_HPP_
