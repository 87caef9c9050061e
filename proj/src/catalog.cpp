#include "dissect/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dissect/errors.hpp"

namespace dissect {

const char* to_string(Category category) {
  switch (category) {
    case Category::Scene: return "scene";
    case Category::Color: return "color";
    case Category::Part: return "part";
    case Category::Object: return "object";
    case Category::Other: return "other";
  }
  return "other";
}

std::optional<Category> parse_category(std::string_view text) {
  for (auto c : {Category::Scene, Category::Color, Category::Part, Category::Object, Category::Other})
    if (text == to_string(c)) return c;
  return std::nullopt;
}

bool valid_concept_name(std::string_view name) {
  if (name.empty() || name == "AND" || name == "OR" || name == "NOT") return false;
  return std::all_of(name.begin(), name.end(), [](char ch) {
    return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
           ch == '_' || ch == '-';
  });
}

ConceptId ConceptCatalog::add(std::string name, Category category) {
  if (!valid_concept_name(name))
    throw Error(ErrorKind::ParseError, "invalid concept name '" + name + "'");
  if (by_name_.count(name)) throw Error(ErrorKind::DuplicateName, "duplicate concept name '" + name + "'");
  auto id = static_cast<ConceptId>(entries_.size());
  by_name_.emplace(name, id);
  entries_.push_back(ConceptEntry{id, std::move(name), category, 0, true});
  return id;
}

const ConceptEntry& ConceptCatalog::at(ConceptId id) const {
  if (!contains(id)) throw Error(ErrorKind::UnknownConcept, "unknown concept id " + std::to_string(id));
  return entries_[id];
}

ConceptEntry& ConceptCatalog::at(ConceptId id) {
  if (!contains(id)) throw Error(ErrorKind::UnknownConcept, "unknown concept id " + std::to_string(id));
  return entries_[id];
}

std::optional<ConceptId> ConceptCatalog::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::vector<ConceptId> ConceptCatalog::searchable_ids() const {
  std::vector<ConceptId> ids;
  for (const auto& e : entries_)
    if (e.searchable) ids.push_back(e.id);
  return ids;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

ConceptCatalog read_catalog(std::istream& in, const std::string& source) {
  auto fail = [&](std::size_t line_no, const std::string& what) {
    return Error(ErrorKind::ParseError, source + ":" + std::to_string(line_no) + ": " + what);
  };

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw fail(1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "concept_id,name,category")
    throw fail(line_no, "expected header 'concept_id,name,category'");

  struct Row {
    ConceptId id;
    std::string name;
    Category category;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != 3) throw fail(line_no, "expected 3 fields, got " + std::to_string(fields.size()));
    const auto& id_text = fields[0];
    if (id_text.empty() || !std::all_of(id_text.begin(), id_text.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
        id_text.size() > 9)
      throw fail(line_no, "bad concept_id '" + id_text + "'");
    auto category = parse_category(fields[2]);
    if (!category) throw fail(line_no, "unknown category '" + fields[2] + "'");
    if (!valid_concept_name(fields[1])) throw fail(line_no, "invalid concept name '" + fields[1] + "'");
    rows.push_back(Row{static_cast<ConceptId>(std::stoul(id_text)), fields[1], *category});
  }

  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].id != i)
      throw Error(ErrorKind::NonDenseIds,
                  source + ": concept ids must be exactly 0.." + std::to_string(rows.size() - 1) +
                      " (problem at id " + std::to_string(rows[i].id) + ")");

  ConceptCatalog catalog;
  for (auto& row : rows) {
    if (catalog.find(row.name))
      throw Error(ErrorKind::DuplicateName, source + ": duplicate concept name '" + row.name + "'");
    catalog.add(std::move(row.name), row.category);
  }
  return catalog;
}

ConceptCatalog load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open catalog '" + path + "'");
  return read_catalog(in, path);
}

void write_catalog(const ConceptCatalog& catalog, std::ostream& out) {
  out << "concept_id,name,category\n";
  for (const auto& e : catalog.entries()) out << e.id << ',' << e.name << ',' << to_string(e.category) << '\n';
}

void save_catalog(const ConceptCatalog& catalog, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write catalog '" + path + "'");
  write_catalog(catalog, out);
  if (!out) throw Error(ErrorKind::Io, "failed writing catalog '" + path + "'");
}

}  // namespace dissect
