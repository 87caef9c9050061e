#include "dissect/forms.hpp"

#include <cassert>
#include <string>

#include "dissect/errors.hpp"

namespace dissect {

struct LogicalForm::Node {
  Kind kind = Kind::Leaf;
  ConceptId id = 0;
  int length = 1;
  LogicalForm a;
  LogicalForm b;
};

LogicalForm LogicalForm::leaf(ConceptId id) {
  auto node = std::make_shared<Node>();
  node->kind = Kind::Leaf;
  node->id = id;
  return LogicalForm(std::move(node));
}

LogicalForm LogicalForm::negation(LogicalForm child) {
  auto node = std::make_shared<Node>();
  node->kind = Kind::Not;
  node->length = child.length();
  node->a = std::move(child);
  return LogicalForm(std::move(node));
}

LogicalForm LogicalForm::conjunction(LogicalForm left, LogicalForm right) {
  auto node = std::make_shared<Node>();
  node->kind = Kind::And;
  node->length = left.length() + right.length();
  node->a = std::move(left);
  node->b = std::move(right);
  return LogicalForm(std::move(node));
}

LogicalForm LogicalForm::disjunction(LogicalForm left, LogicalForm right) {
  auto node = std::make_shared<Node>();
  node->kind = Kind::Or;
  node->length = left.length() + right.length();
  node->a = std::move(left);
  node->b = std::move(right);
  return LogicalForm(std::move(node));
}

LogicalForm::Kind LogicalForm::kind() const { return node_->kind; }

ConceptId LogicalForm::concept_id() const {
  assert(node_->kind == Kind::Leaf);
  return node_->id;
}

const LogicalForm& LogicalForm::child() const {
  assert(node_->kind == Kind::Not);
  return node_->a;
}

const LogicalForm& LogicalForm::left() const {
  assert(node_->kind == Kind::And || node_->kind == Kind::Or);
  return node_->a;
}

const LogicalForm& LogicalForm::right() const {
  assert(node_->kind == Kind::And || node_->kind == Kind::Or);
  return node_->b;
}

int LogicalForm::length() const { return node_->length; }

bool operator==(const LogicalForm& x, const LogicalForm& y) {
  if (x.node_ == y.node_) return true;
  const auto& a = *x.node_;
  const auto& b = *y.node_;
  if (a.kind != b.kind || a.length != b.length) return false;
  switch (a.kind) {
    case LogicalForm::Kind::Leaf: return a.id == b.id;
    case LogicalForm::Kind::Not: return a.a == b.a;
    default: return a.a == b.a && a.b == b.b;
  }
}

// ---------------------------------------------------------------------------
// Parser

namespace {

bool ident_char(char ch) {
  return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
         ch == '_' || ch == '-';
}

struct Token {
  enum Type { Ident, And, Or, Not, LParen, RParen, End } type;
  std::string_view text;
  std::size_t pos;
};

std::string describe(const Token& t) {
  if (t.type == Token::End) return "end of input";
  return "'" + std::string(t.text) + "'";
}

class Parser {
 public:
  Parser(std::string_view text, const ConceptCatalog& catalog) : text_(text), catalog_(catalog) {
    advance();
  }

  LogicalForm parse() {
    if (current_.type == Token::End) throw SyntaxError(current_.pos, "concept or '('", "end of input");
    auto form = parse_or();
    if (current_.type != Token::End) throw SyntaxError(current_.pos, "AND, OR or end of input", describe(current_));
    return form;
  }

 private:
  LogicalForm parse_or() {
    auto form = parse_and();
    while (current_.type == Token::Or) {
      advance();
      form = LogicalForm::disjunction(std::move(form), parse_and());
    }
    return form;
  }

  LogicalForm parse_and() {
    auto form = parse_not();
    while (current_.type == Token::And) {
      advance();
      form = LogicalForm::conjunction(std::move(form), parse_not());
    }
    return form;
  }

  LogicalForm parse_not() {
    if (current_.type == Token::Not) {
      advance();
      return LogicalForm::negation(parse_not());
    }
    return parse_atom();
  }

  LogicalForm parse_atom() {
    if (current_.type == Token::Ident) {
      auto id = catalog_.find(current_.text);
      if (!id) throw Error(ErrorKind::UnknownConcept, "unknown concept '" + std::string(current_.text) + "'");
      advance();
      return LogicalForm::leaf(*id);
    }
    if (current_.type == Token::LParen) {
      advance();
      auto form = parse_or();
      if (current_.type != Token::RParen) throw SyntaxError(current_.pos, "')'", describe(current_));
      advance();
      return form;
    }
    throw SyntaxError(current_.pos, "concept, NOT or '('", describe(current_));
  }

  void advance() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r'))
      ++pos_;
    if (pos_ >= text_.size()) {
      current_ = Token{Token::End, {}, pos_};
      return;
    }
    std::size_t start = pos_;
    char ch = text_[pos_];
    if (ch == '(' || ch == ')') {
      ++pos_;
      current_ = Token{ch == '(' ? Token::LParen : Token::RParen, text_.substr(start, 1), start};
      return;
    }
    if (!ident_char(ch)) throw SyntaxError(start, "concept, operator or parenthesis", "'" + std::string(1, ch) + "'");
    while (pos_ < text_.size() && ident_char(text_[pos_])) ++pos_;
    auto word = text_.substr(start, pos_ - start);
    Token::Type type = Token::Ident;
    if (word == "AND")
      type = Token::And;
    else if (word == "OR")
      type = Token::Or;
    else if (word == "NOT")
      type = Token::Not;
    current_ = Token{type, word, start};
  }

  std::string_view text_;
  const ConceptCatalog& catalog_;
  std::size_t pos_ = 0;
  Token current_{Token::End, {}, 0};
};

void print_into(const LogicalForm& f, const ConceptCatalog& catalog, std::string& out) {
  switch (f.kind()) {
    case LogicalForm::Kind::Leaf:
      out += catalog.name(f.concept_id());
      return;
    case LogicalForm::Kind::Not:
      out += "(NOT ";
      print_into(f.child(), catalog, out);
      out += ')';
      return;
    case LogicalForm::Kind::And:
    case LogicalForm::Kind::Or:
      out += '(';
      print_into(f.left(), catalog, out);
      out += f.kind() == LogicalForm::Kind::And ? " AND " : " OR ";
      print_into(f.right(), catalog, out);
      out += ')';
      return;
  }
}

}  // namespace

LogicalForm parse_form(std::string_view text, const ConceptCatalog& catalog) {
  return Parser(text, catalog).parse();
}

std::string print_form(const LogicalForm& form, const ConceptCatalog& catalog) {
  std::string out;
  print_into(form, catalog, out);
  return out;
}

BitMask eval_form(const LogicalForm& form, const MaskLookup& masks, Frame frame) {
  switch (form.kind()) {
    case LogicalForm::Kind::Leaf: {
      const BitMask* m = masks(form.concept_id());
      if (m == nullptr) return BitMask::zeros(frame);
      if (m->frame() != frame)
        throw Error(ErrorKind::DimensionMismatch,
                    "annotation for concept " + std::to_string(form.concept_id()) + " does not match the image frame");
      return *m;
    }
    case LogicalForm::Kind::Not:
      return mask_not(eval_form(form.child(), masks, frame));
    case LogicalForm::Kind::And:
      return mask_and(eval_form(form.left(), masks, frame), eval_form(form.right(), masks, frame));
    case LogicalForm::Kind::Or:
      return mask_or(eval_form(form.left(), masks, frame), eval_form(form.right(), masks, frame));
  }
  return BitMask::zeros(frame);
}

BitMask eval_form(const LogicalForm& form, const std::map<ConceptId, BitMask>& masks, Frame frame) {
  return eval_form(
      form,
      [&masks](ConceptId id) -> const BitMask* {
        auto it = masks.find(id);
        return it == masks.end() ? nullptr : &it->second;
      },
      frame);
}

}  // namespace dissect
