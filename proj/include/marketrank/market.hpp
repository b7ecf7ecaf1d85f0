#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "marketrank/process.hpp"
#include "marketrank/tree.hpp"

namespace marketrank {

// ---------------------------------------------------------------------
// Expressions over the node state: t, W[1..m], named definitions, the 0/1
// indicator ind(...), arithmetic and comparisons.  Everything an expression
// can read is known at the cell, so predictability is syntactic.

enum class BinOp { Add, Sub, Mul, Div, Eq, Ne, Lt, Le, Gt, Ge };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { Number, Time, Driver, Name, Neg, Ind, Binary };
  Kind kind = Kind::Number;
  double number = 0.0;   // Number
  int driver = 0;        // Driver, 1-based
  std::string name;      // Name
  BinOp op = BinOp::Add; // Binary
  ExprPtr a, b;          // operands; Neg and Ind use a only
  int line = 0, col = 0; // source location of the head token
};

struct MarketSpec {
  int m = 0;
  int T = 0;
  double dt = 1.0;
  std::optional<Eigen::VectorXd> probs;
  std::vector<std::pair<std::string, ExprPtr>> lets;
  struct Asset {
    std::string name;
    std::vector<ExprPtr> row;  // m entries
  };
  std::vector<Asset> assets;
};

namespace detail {

struct Token {
  enum class Kind {
    Ident, Number, LParen, RParen, LBracket, RBracket, Comma,
    Plus, Minus, Star, Slash, Assign, EqEq, Ne, Lt, Le, Gt, Ge, End
  };
  Kind kind = Kind::End;
  std::string text;
  double number = 0.0;
  int line = 0, col = 0;
};

inline bool ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
inline bool digit(char c) { return c >= '0' && c <= '9'; }

inline std::vector<Token> tokenize_line(const std::string& s, int line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == ' ' || c == '\t' || c == '\r') { ++i; continue; }
    if (c == '#') break;
    Token t;
    t.line = line_no;
    t.col = static_cast<int>(i) + 1;
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < s.size() && ident_char(s[j])) ++j;
      t.kind = Token::Kind::Ident;
      t.text = s.substr(i, j - i);
      i = j;
    } else if (digit(c) || (c == '.' && i + 1 < s.size() && digit(s[i + 1]))) {
      std::size_t j = i;
      while (j < s.size() && digit(s[j])) ++j;
      if (j < s.size() && s[j] == '.') {
        ++j;
        while (j < s.size() && digit(s[j])) ++j;
      }
      if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && digit(s[k])) {
          while (k < s.size() && digit(s[k])) ++k;
          j = k;
        }
      }
      t.kind = Token::Kind::Number;
      t.text = s.substr(i, j - i);
      const auto res =
          std::from_chars(s.data() + i, s.data() + j, t.number);
      if (res.ec != std::errc())
        throw SyntaxError("malformed number '" + t.text + "'", line_no, t.col);
      i = j;
    } else {
      switch (c) {
        case '(': t.kind = Token::Kind::LParen; ++i; break;
        case ')': t.kind = Token::Kind::RParen; ++i; break;
        case '[': t.kind = Token::Kind::LBracket; ++i; break;
        case ']': t.kind = Token::Kind::RBracket; ++i; break;
        case ',': t.kind = Token::Kind::Comma; ++i; break;
        case '+': t.kind = Token::Kind::Plus; ++i; break;
        case '-': t.kind = Token::Kind::Minus; ++i; break;
        case '*': t.kind = Token::Kind::Star; ++i; break;
        case '/': t.kind = Token::Kind::Slash; ++i; break;
        case '=':
          if (i + 1 < s.size() && s[i + 1] == '=') { t.kind = Token::Kind::EqEq; i += 2; }
          else { t.kind = Token::Kind::Assign; ++i; }
          break;
        case '!':
          if (i + 1 < s.size() && s[i + 1] == '=') { t.kind = Token::Kind::Ne; i += 2; }
          else throw SyntaxError("stray '!'", line_no, t.col);
          break;
        case '<':
          if (i + 1 < s.size() && s[i + 1] == '=') { t.kind = Token::Kind::Le; i += 2; }
          else { t.kind = Token::Kind::Lt; ++i; }
          break;
        case '>':
          if (i + 1 < s.size() && s[i + 1] == '=') { t.kind = Token::Kind::Ge; i += 2; }
          else { t.kind = Token::Kind::Gt; ++i; }
          break;
        default:
          throw SyntaxError(std::string("unexpected character '") + c + "'",
                            line_no, t.col);
      }
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Token::Kind::End;
  end.line = line_no;
  end.col = static_cast<int>(s.size()) + 1;
  out.push_back(end);
  return out;
}

class ExprParser {
 public:
  ExprParser(const std::vector<Token>& toks, std::size_t pos) : toks_(toks), pos_(pos) {}

  ExprPtr parse() { return comparison(); }
  std::size_t position() const { return pos_; }

 private:
  const Token& peek() const { return toks_[pos_]; }
  Token take() { return toks_[pos_++]; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw SyntaxError(msg, peek().line, peek().col);
  }

  ExprPtr make(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

  ExprPtr comparison() {
    ExprPtr lhs = additive();
    BinOp op;
    switch (peek().kind) {
      case Token::Kind::EqEq: op = BinOp::Eq; break;
      case Token::Kind::Ne:   op = BinOp::Ne; break;
      case Token::Kind::Lt:   op = BinOp::Lt; break;
      case Token::Kind::Le:   op = BinOp::Le; break;
      case Token::Kind::Gt:   op = BinOp::Gt; break;
      case Token::Kind::Ge:   op = BinOp::Ge; break;
      default: return lhs;
    }
    const Token t = take();
    Expr e;
    e.kind = Expr::Kind::Binary;
    e.op = op;
    e.a = lhs;
    e.b = additive();
    e.line = t.line;
    e.col = t.col;
    return make(std::move(e));
  }

  ExprPtr additive() {
    ExprPtr lhs = multiplicative();
    while (peek().kind == Token::Kind::Plus || peek().kind == Token::Kind::Minus) {
      const Token t = take();
      Expr e;
      e.kind = Expr::Kind::Binary;
      e.op = t.kind == Token::Kind::Plus ? BinOp::Add : BinOp::Sub;
      e.a = lhs;
      e.b = multiplicative();
      e.line = t.line;
      e.col = t.col;
      lhs = make(std::move(e));
    }
    return lhs;
  }

  ExprPtr multiplicative() {
    ExprPtr lhs = unary();
    while (peek().kind == Token::Kind::Star || peek().kind == Token::Kind::Slash) {
      const Token t = take();
      Expr e;
      e.kind = Expr::Kind::Binary;
      e.op = t.kind == Token::Kind::Star ? BinOp::Mul : BinOp::Div;
      e.a = lhs;
      e.b = unary();
      e.line = t.line;
      e.col = t.col;
      lhs = make(std::move(e));
    }
    return lhs;
  }

  ExprPtr unary() {
    if (peek().kind == Token::Kind::Minus) {
      const Token t = take();
      Expr e;
      e.kind = Expr::Kind::Neg;
      e.a = unary();
      e.line = t.line;
      e.col = t.col;
      return make(std::move(e));
    }
    return primary();
  }

  ExprPtr primary() {
    const Token t = peek();
    switch (t.kind) {
      case Token::Kind::Number: {
        take();
        Expr e;
        e.kind = Expr::Kind::Number;
        e.number = t.number;
        e.line = t.line;
        e.col = t.col;
        return make(std::move(e));
      }
      case Token::Kind::LParen: {
        take();
        ExprPtr inner = comparison();
        if (peek().kind != Token::Kind::RParen) fail("expected ')'");
        take();
        return inner;
      }
      case Token::Kind::Ident: {
        take();
        Expr e;
        e.line = t.line;
        e.col = t.col;
        if (t.text == "t") {
          e.kind = Expr::Kind::Time;
          return make(std::move(e));
        }
        if (t.text == "W") {
          if (peek().kind != Token::Kind::LBracket) fail("expected '[' after W");
          take();
          if (peek().kind != Token::Kind::Number) fail("expected driver index");
          const Token idx = take();
          const double k = idx.number;
          if (k != std::floor(k) || k < 1)
            throw SyntaxError("driver index must be a positive integer",
                              idx.line, idx.col);
          if (peek().kind != Token::Kind::RBracket) fail("expected ']'");
          take();
          e.kind = Expr::Kind::Driver;
          e.driver = static_cast<int>(k);
          e.line = idx.line;
          e.col = idx.col;
          return make(std::move(e));
        }
        if (t.text == "ind") {
          if (peek().kind != Token::Kind::LParen) fail("expected '(' after ind");
          take();
          e.kind = Expr::Kind::Ind;
          e.a = comparison();
          if (peek().kind != Token::Kind::RParen) fail("expected ')'");
          take();
          return make(std::move(e));
        }
        e.kind = Expr::Kind::Name;
        e.name = t.text;
        return make(std::move(e));
      }
      default:
        fail("expected expression");
    }
  }

  const std::vector<Token>& toks_;
  std::size_t pos_;
};

inline const char* op_text(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Eq:  return "==";
    case BinOp::Ne:  return "!=";
    case BinOp::Lt:  return "<";
    case BinOp::Le:  return "<=";
    case BinOp::Gt:  return ">";
    case BinOp::Ge:  return ">=";
  }
  return "?";
}

inline std::string format_number(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline void print_expr(const ExprPtr& e, std::string& out) {
  switch (e->kind) {
    case Expr::Kind::Number: out += format_number(e->number); return;
    case Expr::Kind::Time:   out += "t"; return;
    case Expr::Kind::Driver: out += "W[" + std::to_string(e->driver) + "]"; return;
    case Expr::Kind::Name:   out += e->name; return;
    case Expr::Kind::Neg:
      out += "(-";
      print_expr(e->a, out);
      out += ")";
      return;
    case Expr::Kind::Ind:
      out += "ind(";
      print_expr(e->a, out);
      out += ")";
      return;
    case Expr::Kind::Binary:
      out += "(";
      print_expr(e->a, out);
      out += " ";
      out += op_text(e->op);
      out += " ";
      print_expr(e->b, out);
      out += ")";
      return;
  }
}

inline bool reserved_name(const std::string& s) {
  return s == "m" || s == "T" || s == "dt" || s == "probs" || s == "let" ||
         s == "asset" || s == "t" || s == "W" || s == "ind";
}

// Checks name references against the definitions visible so far and driver
// indices against m.
inline void validate_expr(const ExprPtr& e,
                          const std::map<std::string, ExprPtr>& defs, int m) {
  switch (e->kind) {
    case Expr::Kind::Name:
      if (!defs.count(e->name))
        throw UnknownIdentifier("unknown name '" + e->name + "'", e->line, e->col);
      return;
    case Expr::Kind::Driver:
      if (e->driver < 1 || e->driver > m)
        throw UnknownIdentifier("W[" + std::to_string(e->driver) +
                                    "] is out of range for m=" + std::to_string(m),
                                e->line, e->col);
      return;
    case Expr::Kind::Neg:
    case Expr::Kind::Ind:
      validate_expr(e->a, defs, m);
      return;
    case Expr::Kind::Binary:
      validate_expr(e->a, defs, m);
      validate_expr(e->b, defs, m);
      return;
    default:
      return;
  }
}

}  // namespace detail

struct EvalContext {
  int t = 0;
  Eigen::RowVectorXd w;  // driver value at the node
  const std::map<std::string, ExprPtr>* defs = nullptr;
};

inline double evaluate(const ExprPtr& e, const EvalContext& ctx) {
  switch (e->kind) {
    case Expr::Kind::Number: return e->number;
    case Expr::Kind::Time:   return static_cast<double>(ctx.t);
    case Expr::Kind::Driver: return ctx.w(e->driver - 1);
    case Expr::Kind::Name:   return evaluate(ctx.defs->at(e->name), ctx);
    case Expr::Kind::Neg:    return -evaluate(e->a, ctx);
    case Expr::Kind::Ind:    return evaluate(e->a, ctx) != 0.0 ? 1.0 : 0.0;
    case Expr::Kind::Binary: {
      const double x = evaluate(e->a, ctx);
      const double y = evaluate(e->b, ctx);
      switch (e->op) {
        case BinOp::Add: return x + y;
        case BinOp::Sub: return x - y;
        case BinOp::Mul: return x * y;
        case BinOp::Div: return x / y;
        case BinOp::Eq:  return x == y ? 1.0 : 0.0;
        case BinOp::Ne:  return x != y ? 1.0 : 0.0;
        case BinOp::Lt:  return x < y ? 1.0 : 0.0;
        case BinOp::Le:  return x <= y ? 1.0 : 0.0;
        case BinOp::Gt:  return x > y ? 1.0 : 0.0;
        case BinOp::Ge:  return x >= y ? 1.0 : 0.0;
      }
      return 0.0;
    }
  }
  return 0.0;
}

inline std::map<std::string, ExprPtr> definitions(const MarketSpec& spec) {
  std::map<std::string, ExprPtr> defs;
  for (const auto& [name, expr] : spec.lets) defs.emplace(name, expr);
  return defs;
}

// Parses the line-oriented market format:
//
//   m = 2            # declarations may come in any order, each once
//   T = 2
//   dt = 1
//   probs = 0.5 0.25 0.25        # optional, m+1 entries
//   let F = (t == 0)             # named expressions, no forward references
//   asset S1 = [ind(t == 0), 0]  # one row of m entries per asset
//
// '#' starts a comment; expressions do not span lines.
inline MarketSpec parse_market(const std::string& text) {
  using detail::Token;
  MarketSpec spec;
  bool have_m = false, have_T = false, have_dt = false;
  // Expressions are parsed structurally first; name and driver validation
  // runs after the whole file is read, in declaration order.
  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      lines.push_back(text.substr(start, end - start));
      start = end + 1;
    }
  }
  auto expect = [](const std::vector<Token>& toks, std::size_t i,
                   Token::Kind k, const char* what) {
    if (toks[i].kind != k)
      throw SyntaxError(std::string("expected ") + what, toks[i].line, toks[i].col);
  };
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const int line_no = static_cast<int>(li) + 1;
    std::vector<Token> toks = detail::tokenize_line(lines[li], line_no);
    if (toks.front().kind == Token::Kind::End) continue;
    if (toks.front().kind != Token::Kind::Ident)
      throw SyntaxError("expected a declaration", toks.front().line, toks.front().col);
    const std::string head = toks.front().text;
    if (head == "m" || head == "T") {
      expect(toks, 1, Token::Kind::Assign, "'='");
      expect(toks, 2, Token::Kind::Number, "an integer");
      const double v = toks[2].number;
      if (v != std::floor(v))
        throw SyntaxError("expected an integer", toks[2].line, toks[2].col);
      expect(toks, 3, Token::Kind::End, "end of line");
      bool& have = head == "m" ? have_m : have_T;
      if (have)
        throw SyntaxError("duplicate declaration of " + head, toks[0].line, toks[0].col);
      have = true;
      (head == "m" ? spec.m : spec.T) = static_cast<int>(v);
    } else if (head == "dt") {
      expect(toks, 1, Token::Kind::Assign, "'='");
      expect(toks, 2, Token::Kind::Number, "a number");
      expect(toks, 3, Token::Kind::End, "end of line");
      if (have_dt)
        throw SyntaxError("duplicate declaration of dt", toks[0].line, toks[0].col);
      have_dt = true;
      spec.dt = toks[2].number;
    } else if (head == "probs") {
      expect(toks, 1, Token::Kind::Assign, "'='");
      if (spec.probs)
        throw SyntaxError("duplicate declaration of probs", toks[0].line, toks[0].col);
      std::vector<double> vals;
      std::size_t i = 2;
      while (toks[i].kind == Token::Kind::Number) {
        vals.push_back(toks[i].number);
        ++i;
      }
      expect(toks, i, Token::Kind::End, "a number or end of line");
      if (vals.empty())
        throw SyntaxError("probs needs at least one entry", toks[1].line, toks[1].col);
      Eigen::VectorXd p(static_cast<Eigen::Index>(vals.size()));
      for (std::size_t k = 0; k < vals.size(); ++k)
        p(static_cast<Eigen::Index>(k)) = vals[k];
      spec.probs = std::move(p);
    } else if (head == "let") {
      expect(toks, 1, Token::Kind::Ident, "a name");
      const std::string name = toks[1].text;
      if (detail::reserved_name(name))
        throw SyntaxError("'" + name + "' is reserved", toks[1].line, toks[1].col);
      for (const auto& let : spec.lets) {
        if (let.first == name)
          throw SyntaxError("duplicate definition of '" + name + "'",
                            toks[1].line, toks[1].col);
      }
      expect(toks, 2, Token::Kind::Assign, "'='");
      detail::ExprParser p(toks, 3);
      ExprPtr e = p.parse();
      expect(toks, p.position(), Token::Kind::End, "end of line");
      spec.lets.emplace_back(name, std::move(e));
    } else if (head == "asset") {
      expect(toks, 1, Token::Kind::Ident, "a name");
      const std::string name = toks[1].text;
      if (detail::reserved_name(name))
        throw SyntaxError("'" + name + "' is reserved", toks[1].line, toks[1].col);
      for (const auto& a : spec.assets) {
        if (a.name == name)
          throw SyntaxError("duplicate asset '" + name + "'", toks[1].line,
                            toks[1].col);
      }
      expect(toks, 2, Token::Kind::Assign, "'='");
      expect(toks, 3, Token::Kind::LBracket, "'['");
      MarketSpec::Asset asset;
      asset.name = name;
      std::size_t i = 4;
      while (true) {
        detail::ExprParser p(toks, i);
        asset.row.push_back(p.parse());
        i = p.position();
        if (toks[i].kind == Token::Kind::Comma) {
          ++i;
          continue;
        }
        break;
      }
      expect(toks, i, Token::Kind::RBracket, "']'");
      expect(toks, i + 1, Token::Kind::End, "end of line");
      spec.assets.push_back(std::move(asset));
    } else {
      throw SyntaxError("unknown declaration '" + head + "'", toks[0].line,
                        toks[0].col);
    }
  }
  if (!have_m) throw ShapeError("market must declare m");
  if (!have_T) throw ShapeError("market must declare T");
  if (spec.m < 1) throw ShapeError("m must be at least 1");
  if (spec.T < 1) throw ShapeError("T must be at least 1");
  if (!(spec.dt > 0.0)) throw ShapeError("dt must be positive");
  if (spec.probs && spec.probs->size() != spec.m + 1)
    throw ShapeError("probs must have m+1 entries");
  if (spec.assets.empty()) throw ShapeError("market must declare at least one asset");
  std::map<std::string, ExprPtr> defs;
  for (const auto& [name, expr] : spec.lets) {
    detail::validate_expr(expr, defs, spec.m);
    defs.emplace(name, expr);
  }
  for (const auto& asset : spec.assets) {
    if (static_cast<int>(asset.row.size()) != spec.m)
      throw ShapeError("asset '" + asset.name + "' must have exactly m entries");
    for (const auto& e : asset.row) detail::validate_expr(e, defs, spec.m);
  }
  return spec;
}

// Canonical text for a spec; parsing it back yields an identical spec.
inline std::string print_market(const MarketSpec& spec) {
  std::string out;
  out += "m = " + std::to_string(spec.m) + "\n";
  out += "T = " + std::to_string(spec.T) + "\n";
  out += "dt = " + detail::format_number(spec.dt) + "\n";
  if (spec.probs) {
    out += "probs =";
    for (Eigen::Index i = 0; i < spec.probs->size(); ++i)
      out += " " + detail::format_number((*spec.probs)(i));
    out += "\n";
  }
  for (const auto& [name, expr] : spec.lets) {
    out += "let " + name + " = ";
    detail::print_expr(expr, out);
    out += "\n";
  }
  for (const auto& asset : spec.assets) {
    out += "asset " + asset.name + " = [";
    for (std::size_t i = 0; i < asset.row.size(); ++i) {
      if (i) out += ", ";
      detail::print_expr(asset.row[i], out);
    }
    out += "]\n";
  }
  return out;
}

inline TreePtr build_market_tree(const MarketSpec& spec) {
  return build_tree(spec.m, spec.T, spec.dt, spec.probs);
}

// Evaluates the asset rows at every cell.
inline IntegrandField build_integrand(const MarketSpec& spec, TreePtr tree) {
  const std::map<std::string, ExprPtr> defs = definitions(spec);
  IntegrandField theta = make_integrand(tree, static_cast<int>(spec.assets.size()));
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    EvalContext ctx;
    ctx.t = tree->time_of(c);
    ctx.w = tree->driver().row(c);
    ctx.defs = &defs;
    for (std::size_t i = 0; i < spec.assets.size(); ++i) {
      for (int j = 0; j < spec.m; ++j) {
        const double v = evaluate(spec.assets[i].row[static_cast<std::size_t>(j)], ctx);
        if (!std::isfinite(v))
          throw ShapeError("asset '" + spec.assets[i].name +
                           "' evaluates to a non-finite entry at cell " +
                           std::to_string(c));
        theta.at(c)(static_cast<Eigen::Index>(i), j) = v;
      }
    }
  }
  return theta;
}

// Parses and validates a standalone claim expression against the spec's
// definitions.
inline ExprPtr parse_claim(const std::string& text, const MarketSpec& spec) {
  std::vector<detail::Token> toks = detail::tokenize_line(text, 1);
  detail::ExprParser p(toks, 0);
  ExprPtr e = p.parse();
  if (toks[p.position()].kind != detail::Token::Kind::End)
    throw SyntaxError("trailing input after expression", toks[p.position()].line,
                      toks[p.position()].col);
  detail::validate_expr(e, definitions(spec), spec.m);
  return e;
}

// Claim value at every terminal node (t = T in the evaluation context).
inline Eigen::VectorXd evaluate_claim(const ExprPtr& claim, const MarketSpec& spec,
                                      const FilteredTree& tree) {
  const std::map<std::string, ExprPtr> defs = definitions(spec);
  const int T = tree.num_steps();
  Eigen::VectorXd out(tree.level_size(T));
  for (NodeId k = 0; k < tree.level_size(T); ++k) {
    EvalContext ctx;
    ctx.t = T;
    ctx.w = tree.driver().row(tree.level_offset(T) + k);
    ctx.defs = &defs;
    const double v = evaluate(claim, ctx);
    if (!std::isfinite(v))
      throw ShapeError("claim evaluates to a non-finite value at a terminal node");
    out(k) = v;
  }
  return out;
}

}  // namespace marketrank
