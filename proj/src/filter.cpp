#include "midway/filter.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "midway/error.hpp"

namespace midway {

enum class Op { Eq, Ne, Lt, Le, Gt, Ge };

struct StratumFilter::Node {
  enum Kind { Const, And, Or, Not, Compare, In } kind = Const;
  bool value = true;
  std::shared_ptr<const Node> lhs, rhs;
  std::size_t column = 0;
  bool is_id = false;
  Op op = Op::Eq;
  double operand = 0;
  std::string text_operand;
  std::vector<double> set;
  std::vector<std::string> text_set;
};

namespace {

using NodePtr = std::shared_ptr<const StratumFilter::Node>;
using Node = StratumFilter::Node;

struct Token {
  enum Kind { Ident, Number, String, Sym, End } kind = End;
  std::string text;
  int column = 1;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    const int col = static_cast<int>(i) + 1;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < s.size() && ident_char(s[j])) ++j;
      out.push_back({Token::Ident, std::string(s.substr(i, j - i)), col});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
        ((c == '-' || c == '+') && i + 1 < s.size() &&
         (std::isdigit(static_cast<unsigned char>(s[i + 1])) || s[i + 1] == '.'))) {
      std::size_t j = i + 1;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '.' ||
                              ((s[j] == '-' || s[j] == '+') && (s[j - 1] == 'e' || s[j - 1] == 'E')))) {
        ++j;
      }
      out.push_back({Token::Number, std::string(s.substr(i, j - i)), col});
      i = j;
      continue;
    }
    if (c == '"') {
      std::string text;
      std::size_t j = i + 1;
      while (j < s.size() && s[j] != '"') text += s[j++];
      if (j >= s.size()) throw SyntaxError("unterminated string literal", 1, col);
      out.push_back({Token::String, text, col});
      i = j + 1;
      continue;
    }
    static const char* two[] = {"==", "!=", "<=", ">="};
    bool matched = false;
    for (const char* t : two) {
      if (s.substr(i, 2) == t) {
        out.push_back({Token::Sym, t, col});
        i += 2;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (std::string_view("<>=(){},").find(c) != std::string_view::npos) {
      out.push_back({Token::Sym, std::string(1, c == '=' ? '=' : c), col});
      if (c == '=') out.back().text = "==";
      ++i;
      continue;
    }
    throw SyntaxError(std::string("unexpected character '") + c + "'", 1, col);
  }
  out.push_back({Token::End, "", static_cast<int>(s.size()) + 1});
  return out;
}

bool is_keyword(const Token& t, std::string_view kw) {
  if (t.kind != Token::Ident) return false;
  if (t.text == kw) return true;
  std::string upper(kw);
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return t.text == upper;
}

class Parser {
 public:
  Parser(std::string_view text, const Schema& schema)
      : tokens_(lex(text)), schema_(schema) {}

  NodePtr parse() {
    auto n = parse_or();
    if (peek().kind != Token::End) fail("unexpected '" + peek().text + "'");
    return n;
  }

  std::set<std::size_t> referenced;

 private:
  const Token& peek() const { return tokens_[pos_]; }
  Token take() { return tokens_[pos_++]; }
  [[noreturn]] void fail(const std::string& msg) const {
    const auto& t = peek();
    throw SyntaxError(t.kind == Token::End ? msg + " (end of input)" : msg, 1, t.column);
  }
  void expect_sym(std::string_view s) {
    if (peek().kind != Token::Sym || peek().text != s) fail("expected '" + std::string(s) + "'");
    ++pos_;
  }

  NodePtr parse_or() {
    auto lhs = parse_and();
    while (is_keyword(peek(), "or")) {
      ++pos_;
      auto n = std::make_shared<Node>();
      n->kind = Node::Or;
      n->lhs = lhs;
      n->rhs = parse_and();
      lhs = n;
    }
    return lhs;
  }

  NodePtr parse_and() {
    auto lhs = parse_not();
    while (is_keyword(peek(), "and")) {
      ++pos_;
      auto n = std::make_shared<Node>();
      n->kind = Node::And;
      n->lhs = lhs;
      n->rhs = parse_not();
      lhs = n;
    }
    return lhs;
  }

  NodePtr parse_not() {
    if (is_keyword(peek(), "not")) {
      ++pos_;
      auto n = std::make_shared<Node>();
      n->kind = Node::Not;
      n->lhs = parse_not();
      return n;
    }
    return parse_primary();
  }

  NodePtr parse_primary() {
    const Token& t = peek();
    if (t.kind == Token::Sym && t.text == "(") {
      ++pos_;
      auto n = parse_or();
      expect_sym(")");
      return n;
    }
    if (is_keyword(t, "true") || is_keyword(t, "false")) {
      ++pos_;
      auto n = std::make_shared<Node>();
      n->kind = Node::Const;
      n->value = is_keyword(t, "true");
      return n;
    }
    if (t.kind != Token::Ident) fail("expected a column name");
    const Token col_tok = take();
    const auto col = schema_.find(col_tok.text);
    if (!col) throw Error(ErrorKind::Schema, "unknown column '" + col_tok.text + "' in filter");
    referenced.insert(*col);
    const auto& spec = schema_[*col];

    auto n = std::make_shared<Node>();
    n->column = *col;
    n->is_id = spec.type == ColumnType::Id;
    if (is_keyword(peek(), "in")) {
      ++pos_;
      n->kind = Node::In;
      expect_sym("{");
      for (;;) {
        const Token lit = literal();
        if (n->is_id) {
          n->text_set.push_back(lit.text);
        } else {
          n->set.push_back(resolve(spec, lit));
        }
        if (peek().kind == Token::Sym && peek().text == ",") {
          ++pos_;
          continue;
        }
        expect_sym("}");
        break;
      }
      return n;
    }
    if (peek().kind != Token::Sym) fail("expected a comparison operator");
    const std::string op = peek().text;
    if (op == "==") n->op = Op::Eq;
    else if (op == "!=") n->op = Op::Ne;
    else if (op == "<") n->op = Op::Lt;
    else if (op == "<=") n->op = Op::Le;
    else if (op == ">") n->op = Op::Gt;
    else if (op == ">=") n->op = Op::Ge;
    else fail("expected a comparison operator");
    ++pos_;
    n->kind = Node::Compare;
    const bool ordering = n->op != Op::Eq && n->op != Op::Ne;
    if (ordering && (spec.type == ColumnType::Categorical || spec.type == ColumnType::Id)) {
      throw Error(ErrorKind::Schema, "ordering comparison on unordered column '" + spec.name + "'");
    }
    const Token lit = literal();
    if (n->is_id) {
      n->text_operand = lit.text;
    } else {
      n->operand = resolve(spec, lit);
    }
    return n;
  }

  Token literal() {
    const Token& t = peek();
    if (t.kind == Token::Number || t.kind == Token::String || t.kind == Token::Ident) return take();
    fail("expected a literal value");
  }

  static std::optional<double> number(const std::string& s) {
    double v = 0;
    std::string_view sv(s);
    if (!sv.empty() && sv.front() == '+') sv.remove_prefix(1);
    const auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (ec != std::errc() || p != sv.data() + sv.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  }

  double resolve(const ColumnSpec& spec, const Token& lit) const {
    auto mismatch = [&] {
      return Error(ErrorKind::Schema, "type mismatch: '" + lit.text + "' is not a valid " +
                                          to_string(spec.type) + " value for column '" +
                                          spec.name + "'");
    };
    switch (spec.type) {
      case ColumnType::Real: {
        if (lit.kind != Token::Number) throw mismatch();
        auto v = number(lit.text);
        if (!v) throw mismatch();
        return *v;
      }
      case ColumnType::Binary: {
        if (lit.text == "1" || is_keyword(lit, "true")) return 1.0;
        if (lit.text == "0" || is_keyword(lit, "false")) return 0.0;
        throw mismatch();
      }
      case ColumnType::Ordered:
      case ColumnType::Categorical: {
        if (auto idx = spec.level_index(lit.text)) return static_cast<double>(*idx);
        if (auto v = number(lit.text)) {
          for (std::size_t i = 0; i < spec.levels.size(); ++i) {
            auto lv = number(spec.levels[i]);
            if (lv && *lv == *v) return static_cast<double>(i);
          }
        }
        throw mismatch();
      }
      case ColumnType::Id: break;
    }
    throw mismatch();
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  const Schema& schema_;
};

bool eval(const Node& n, const PatientTable& t, std::size_t row) {
  switch (n.kind) {
    case Node::Const: return n.value;
    case Node::And: return eval(*n.lhs, t, row) && eval(*n.rhs, t, row);
    case Node::Or: return eval(*n.lhs, t, row) || eval(*n.rhs, t, row);
    case Node::Not: return !eval(*n.lhs, t, row);
    case Node::In:
      if (n.is_id) {
        return std::find(n.text_set.begin(), n.text_set.end(), t.ids()[row]) != n.text_set.end();
      }
      return std::find(n.set.begin(), n.set.end(), t.cell(row, n.column)) != n.set.end();
    case Node::Compare: {
      if (n.is_id) {
        const bool eq = t.ids()[row] == n.text_operand;
        return n.op == Op::Eq ? eq : !eq;
      }
      const double v = t.cell(row, n.column);
      switch (n.op) {
        case Op::Eq: return v == n.operand;
        case Op::Ne: return v != n.operand;
        case Op::Lt: return v < n.operand;
        case Op::Le: return v <= n.operand;
        case Op::Gt: return v > n.operand;
        case Op::Ge: return v >= n.operand;
      }
    }
  }
  return false;
}

}  // namespace

StratumFilter parse_filter(std::string_view text, const Schema& schema) {
  Parser p(text, schema);
  StratumFilter f;
  f.root_ = p.parse();
  f.source_ = std::string(text);
  for (auto c : p.referenced) f.column_index_.push_back(c);
  for (auto c : f.column_index_) f.columns_.push_back(schema[c].name);
  std::vector<std::size_t> order(f.columns_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return f.columns_[a] < f.columns_[b]; });
  std::vector<std::string> names;
  std::vector<std::size_t> idx;
  for (auto i : order) {
    names.push_back(f.columns_[i]);
    idx.push_back(f.column_index_[i]);
  }
  f.columns_ = std::move(names);
  f.column_index_ = std::move(idx);
  return f;
}

bool StratumFilter::evaluate(const PatientTable& t, std::size_t row) const {
  return root_ ? eval(*root_, t, row) : true;
}

StratumResult apply_stratum(const PatientTable& t, const StratumFilter& f) {
  StratumResult out;
  out.input_rows = t.rows();
  std::vector<std::size_t> cols;
  for (const auto& name : f.columns()) cols.push_back(t.schema().require(name));
  std::vector<std::size_t> miss(cols.size(), 0);
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    bool any_missing = false;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (t.missing(r, cols[k])) {
        ++miss[k];
        any_missing = true;
      }
    }
    if (any_missing) {
      ++out.excluded_missing;
    } else if (f.evaluate(t, r)) {
      keep.push_back(r);
    } else {
      ++out.not_matching;
    }
  }
  for (std::size_t k = 0; k < cols.size(); ++k) out.missing_by_column.emplace_back(f.columns()[k], miss[k]);
  out.table = t.select_rows(keep);
  return out;
}

}  // namespace midway
