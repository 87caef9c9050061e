#ifndef DISSECT_FORMS_HPP_
#define DISSECT_FORMS_HPP_

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "dissect/catalog.hpp"
#include "dissect/masks.hpp"

namespace dissect {

/// Immutable AND/OR/NOT expression over concept leaves.
///
/// Copies share structure, so a form can be extended (`F AND c`) without
/// copying F. Equality is structural; no logical simplification is ever
/// applied.
class LogicalForm {
 public:
  enum class Kind : std::uint8_t { Leaf, Not, And, Or };

  static LogicalForm leaf(ConceptId id);
  static LogicalForm negation(LogicalForm child);
  static LogicalForm conjunction(LogicalForm left, LogicalForm right);
  static LogicalForm disjunction(LogicalForm left, LogicalForm right);

  Kind kind() const;
  ConceptId concept_id() const;      // Leaf only
  const LogicalForm& child() const;  // Not only
  const LogicalForm& left() const;   // And/Or only
  const LogicalForm& right() const;  // And/Or only

  /// Number of Leaf nodes; negation does not add length.
  int length() const;

  friend bool operator==(const LogicalForm& a, const LogicalForm& b);

 private:
  struct Node;
  LogicalForm() = default;
  explicit LogicalForm(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

inline int form_length(const LogicalForm& f) { return f.length(); }

/// Precedence NOT > AND > OR, binary operators left-associative.
LogicalForm parse_form(std::string_view text, const ConceptCatalog& catalog);

/// Canonical text: every binary operation and every negation parenthesized.
std::string print_form(const LogicalForm& form, const ConceptCatalog& catalog);

/// Lookup of a concept's mask on one image; null means not annotated there.
using MaskLookup = std::function<const BitMask*(ConceptId)>;

/// G_E for one image. Unannotated concepts evaluate to the empty mask.
BitMask eval_form(const LogicalForm& form, const MaskLookup& masks, Frame frame);
BitMask eval_form(const LogicalForm& form, const std::map<ConceptId, BitMask>& masks, Frame frame);

}  // namespace dissect

#endif  // DISSECT_FORMS_HPP_
