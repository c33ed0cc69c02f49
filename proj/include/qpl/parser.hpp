#pragma once

#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qpl/ast.hpp"
#include "qpl/common.hpp"

// Concrete surface syntax: lexer, parser, desugaring to the core AST, and a
// pretty-printer whose output parses back to the same core term.
//
// The surface language is the core term grammar plus sugar:
//   if b then { M } [else { N }]        bit literals tt / ff
//   Nat literals zero / s(e)            list literals nil / e :: e
//   case patterns nil | x :: xs and zero | s(n)
//   type aliases bit, Nat, List(A), ListQ
// Line comments start with --.

namespace qpl {

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class Tok {
  ident,
  number,
  kw_new,
  kw_unit,
  kw_qbit,
  kw_discard,
  kw_skip,
  kw_while,
  kw_do,
  kw_if,
  kw_then,
  kw_else,
  kw_case,
  kw_of,
  kw_proc,
  kw_measure,
  kw_copy,
  kw_left,
  kw_right,
  kw_fold,
  kw_unfold,
  kw_nil,
  kw_zero,
  kw_tt,
  kw_ff,
  kw_mu,
  kw_I,
  kw_bit,
  kw_Nat,
  kw_List,
  kw_ListQ,
  semicolon,
  comma,
  lparen,
  rparen,
  lbrace,
  rbrace,
  lbracket,
  rbracket,
  colon,
  coloncolon,
  equals,
  star_equals,
  arrow,
  pipe,
  plus,
  star,
  dot,
  caret,
  end_of_input,
};

struct Token {
  Tok kind;
  std::string text;
  SourcePos pos;
};

inline const char* tok_name(Tok t) {
  switch (t) {
    case Tok::ident: return "identifier";
    case Tok::number: return "number";
    case Tok::semicolon: return "';'";
    case Tok::comma: return "','";
    case Tok::lparen: return "'('";
    case Tok::rparen: return "')'";
    case Tok::lbrace: return "'{'";
    case Tok::rbrace: return "'}'";
    case Tok::lbracket: return "'['";
    case Tok::rbracket: return "']'";
    case Tok::colon: return "':'";
    case Tok::coloncolon: return "'::'";
    case Tok::equals: return "'='";
    case Tok::star_equals: return "'*='";
    case Tok::arrow: return "'->'";
    case Tok::pipe: return "'|'";
    case Tok::plus: return "'+'";
    case Tok::star: return "'*'";
    case Tok::dot: return "'.'";
    case Tok::caret: return "'^'";
    case Tok::end_of_input: return "end of input";
    default: return "keyword";
  }
}

inline std::vector<Token> lex(const std::string& src) {
  static const std::map<std::string, Tok> keywords = {
      {"new", Tok::kw_new},         {"unit", Tok::kw_unit},
      {"qbit", Tok::kw_qbit},       {"discard", Tok::kw_discard},
      {"skip", Tok::kw_skip},       {"while", Tok::kw_while},
      {"do", Tok::kw_do},           {"if", Tok::kw_if},
      {"then", Tok::kw_then},       {"else", Tok::kw_else},
      {"case", Tok::kw_case},       {"of", Tok::kw_of},
      {"proc", Tok::kw_proc},       {"measure", Tok::kw_measure},
      {"copy", Tok::kw_copy},       {"left", Tok::kw_left},
      {"right", Tok::kw_right},     {"fold", Tok::kw_fold},
      {"unfold", Tok::kw_unfold},   {"nil", Tok::kw_nil},
      {"zero", Tok::kw_zero},       {"tt", Tok::kw_tt},
      {"ff", Tok::kw_ff},           {"mu", Tok::kw_mu},
      {"I", Tok::kw_I},             {"bit", Tok::kw_bit},
      {"Nat", Tok::kw_Nat},         {"List", Tok::kw_List},
      {"ListQ", Tok::kw_ListQ}};

  std::vector<Token> out;
  size_t i = 0;
  int line = 1, col = 1;
  auto pos = [&]() { return SourcePos{line, col}; };
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (src[i + k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    i += n;
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }
    if (c == '-' && i + 1 < src.size() && src[i + 1] == '-') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    SourcePos p = pos();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) ||
              src[j] == '_' || src[j] == '\'' || src[j] == '#'))
        ++j;
      std::string word = src.substr(i, j - i);
      auto kw = keywords.find(word);
      out.push_back(
          {kw == keywords.end() ? Tok::ident : kw->second, word, p});
      advance(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j])))
        ++j;
      out.push_back({Tok::number, src.substr(i, j - i), p});
      advance(j - i);
      continue;
    }
    auto two = [&](char a, char b) {
      return c == a && i + 1 < src.size() && src[i + 1] == b;
    };
    if (two(':', ':')) {
      out.push_back({Tok::coloncolon, "::", p});
      advance(2);
      continue;
    }
    if (two('*', '=')) {
      out.push_back({Tok::star_equals, "*=", p});
      advance(2);
      continue;
    }
    if (two('-', '>')) {
      out.push_back({Tok::arrow, "->", p});
      advance(2);
      continue;
    }
    Tok kind;
    switch (c) {
      case ';': kind = Tok::semicolon; break;
      case ',': kind = Tok::comma; break;
      case '(': kind = Tok::lparen; break;
      case ')': kind = Tok::rparen; break;
      case '{': kind = Tok::lbrace; break;
      case '}': kind = Tok::rbrace; break;
      case '[': kind = Tok::lbracket; break;
      case ']': kind = Tok::rbracket; break;
      case ':': kind = Tok::colon; break;
      case '=': kind = Tok::equals; break;
      case '|': kind = Tok::pipe; break;
      case '+': kind = Tok::plus; break;
      case '*': kind = Tok::star; break;
      case '.': kind = Tok::dot; break;
      case '^': kind = Tok::caret; break;
      default:
        fail_at(Errc::syntax_error, p,
                std::string("unexpected character '") + c + "'");
    }
    out.push_back({kind, std::string(1, c), p});
    advance(1);
  }
  out.push_back({Tok::end_of_input, "", pos()});
  return out;
}

// ---------------------------------------------------------------------------
// Surface AST
// ---------------------------------------------------------------------------

struct SExpr;
using SExprRef = std::shared_ptr<const SExpr>;
struct STerm;
using STermRef = std::shared_ptr<const STerm>;

struct SVar {
  std::string name;
};
struct SBitLit {
  bool value;  // tt / ff
};
struct SZeroLit {};
struct SSucc {
  SExprRef inner;
};
struct SNil {
  std::optional<TypeRef> elem;  // nil[A] carries the element type
};
struct SCons {
  SExprRef head, tail;
};
struct SPairE {
  SExprRef fst, snd;
};
struct SInjE {
  bool left;
  TypeRef left_type, right_type;
  SExprRef inner;
};
struct SFoldE {
  TypeRef mu_type;
  SExprRef inner;
};
struct SUnfoldE {
  SExprRef inner;
};
struct SCallE {
  std::string name;
  std::optional<long> bound;
  SExprRef arg;
};

using SExprNode = std::variant<SVar, SBitLit, SZeroLit, SSucc, SNil, SCons,
                               SPairE, SInjE, SFoldE, SUnfoldE, SCallE>;

struct SExpr {
  SExprNode node;
  SourcePos pos;
};

enum class PatKind { inj_left, inj_right, list_nil, list_cons, nat_zero, nat_succ };

struct SPattern {
  PatKind kind;
  std::string var1, var2;  // cons binds two
};

struct SBranch {
  SPattern pattern;
  STermRef body;
};

struct SNewUnit {
  std::string var;
};
struct SNewQbit {
  std::string var;
};
struct SDiscard {
  std::string var;
};
struct SSkip {};
struct SSeq {
  STermRef first, rest;
};
struct SWhile {
  std::optional<long> bound;
  std::string cond;
  STermRef body;
};
struct SIf {
  std::string cond;
  STermRef then_body;
  STermRef else_body;  // null when absent
};
struct SCase {
  std::string scrutinee;
  std::vector<SBranch> branches;
};
struct SProc {
  std::string name;
  std::optional<long> bound;
  std::string in_var;
  TypeRef in_type;
  std::string out_var;
  TypeRef out_type;
  STermRef body;
};
struct SGateApp {
  std::string gate;
  std::vector<std::string> targets;
};
struct SUnpair {
  std::string fst, snd, src;
};
struct SMeasureSt {
  std::string dst, src;
};
struct SCopySt {
  std::string dst, src;
};
struct SAssign {
  std::string dst;
  SExprRef expr;
};
struct SZeroSt {
  VarCtx input, output;
};

using STermNode =
    std::variant<SNewUnit, SNewQbit, SDiscard, SSkip, SSeq, SWhile, SIf, SCase,
                 SProc, SGateApp, SUnpair, SMeasureSt, SCopySt, SAssign,
                 SZeroSt>;

struct STerm {
  STermNode node;
  SourcePos pos;
};

template <typename T, typename... Args>
SExprRef mk_sexpr(SourcePos pos, Args&&... args) {
  return std::make_shared<SExpr>(SExpr{T{std::forward<Args>(args)...}, pos});
}

template <typename T, typename... Args>
STermRef mk_sterm(SourcePos pos, Args&&... args) {
  return std::make_shared<STerm>(STerm{T{std::forward<Args>(args)...}, pos});
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class Parser {
 public:
  explicit Parser(std::string src) : tokens_(lex(std::move(src))) {}

  STermRef parse_program() {
    STermRef t = parse_term();
    expect(Tok::end_of_input);
    return t;
  }

  TypeRef parse_type_only() {
    TypeRef t = parse_type();
    expect(Tok::end_of_input);
    return t;
  }

 private:
  const Token& peek(int ahead = 0) const {
    size_t i = pos_ + ahead;
    return i < tokens_.size() ? tokens_[i] : tokens_.back();
  }
  const Token& next() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }
  bool accept(Tok k) {
    if (peek().kind == k) {
      next();
      return true;
    }
    return false;
  }
  Token expect(Tok k) {
    if (peek().kind != k)
      fail_at(Errc::syntax_error, peek().pos,
              std::string("expected ") + tok_name(k) + ", found '" +
                  (peek().kind == Tok::end_of_input ? "<eof>" : peek().text) +
                  "'");
    return next();
  }

  bool at_term_end() const {
    Tok k = peek().kind;
    return k == Tok::end_of_input || k == Tok::rbrace || k == Tok::pipe;
  }

  // term := stmt (';' term)?   with ';' right-associative. A statement that
  // ends in '}' (proc, while, braced case, if) may be followed by the next
  // statement without a ';', as in the usual program layout.
  STermRef parse_term() {
    STermRef first = parse_stmt();
    bool block_end = pos_ > 0 && tokens_[pos_ - 1].kind == Tok::rbrace;
    if (accept(Tok::semicolon)) {
      if (at_term_end()) return first;  // tolerate a trailing ';'
      STermRef rest = parse_term();
      return mk_sterm<SSeq>(first->pos, first, rest);
    }
    if (block_end && !at_term_end() && peek().kind != Tok::kw_else) {
      STermRef rest = parse_term();
      return mk_sterm<SSeq>(first->pos, first, rest);
    }
    return first;
  }

  std::optional<long> parse_bound_suffix() {
    if (accept(Tok::caret)) {
      Token n = expect(Tok::number);
      return std::stol(n.text);
    }
    return std::nullopt;
  }

  STermRef parse_stmt() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::kw_new: {
        next();
        if (accept(Tok::kw_unit)) {
          Token v = expect(Tok::ident);
          return mk_sterm<SNewUnit>(t.pos, v.text);
        }
        expect(Tok::kw_qbit);
        Token v = expect(Tok::ident);
        return mk_sterm<SNewQbit>(t.pos, v.text);
      }
      case Tok::kw_discard: {
        next();
        Token v = expect(Tok::ident);
        return mk_sterm<SDiscard>(t.pos, v.text);
      }
      case Tok::kw_skip:
        next();
        return mk_sterm<SSkip>(t.pos);
      case Tok::kw_while: {
        next();
        std::optional<long> bound = parse_bound_suffix();
        Token b = expect(Tok::ident);
        expect(Tok::kw_do);
        expect(Tok::lbrace);
        STermRef body = parse_term();
        expect(Tok::rbrace);
        return mk_sterm<SWhile>(t.pos, bound, b.text, body);
      }
      case Tok::kw_if: {
        next();
        Token b = expect(Tok::ident);
        expect(Tok::kw_then);
        expect(Tok::lbrace);
        STermRef then_body = parse_term();
        expect(Tok::rbrace);
        STermRef else_body;
        if (accept(Tok::kw_else)) {
          expect(Tok::lbrace);
          else_body = parse_term();
          expect(Tok::rbrace);
        }
        return mk_sterm<SIf>(t.pos, b.text, then_body, else_body);
      }
      case Tok::kw_case:
        return parse_case();
      case Tok::kw_proc: {
        next();
        Token name = expect(Tok::ident);
        std::optional<long> bound = parse_bound_suffix();
        expect(Tok::coloncolon);
        Token in = expect(Tok::ident);
        expect(Tok::colon);
        TypeRef in_type = parse_type();
        expect(Tok::arrow);
        Token out = expect(Tok::ident);
        expect(Tok::colon);
        TypeRef out_type = parse_type();
        expect(Tok::lbrace);
        STermRef body = parse_term();
        expect(Tok::rbrace);
        return mk_sterm<SProc>(t.pos, name.text, bound, in.text, in_type,
                               out.text, out_type, body);
      }
      case Tok::number: {
        // 0[Gamma ; Sigma]
        if (t.text != "0")
          fail_at(Errc::syntax_error, t.pos, "expected a statement");
        next();
        expect(Tok::lbracket);
        VarCtx input = parse_ctx_list();
        expect(Tok::semicolon);
        VarCtx output = parse_ctx_list();
        expect(Tok::rbracket);
        return mk_sterm<SZeroSt>(t.pos, input, output);
      }
      case Tok::lparen: {
        // (x1, x2) = x
        next();
        Token x1 = expect(Tok::ident);
        expect(Tok::comma);
        Token x2 = expect(Tok::ident);
        expect(Tok::rparen);
        expect(Tok::equals);
        Token src = expect(Tok::ident);
        return mk_sterm<SUnpair>(t.pos, x1.text, x2.text, src.text);
      }
      case Tok::ident: {
        // gate application `q1, q2 *= G` or assignment `x = rhs`
        std::vector<std::string> vars;
        vars.push_back(next().text);
        while (accept(Tok::comma)) vars.push_back(expect(Tok::ident).text);
        if (peek().kind == Tok::star_equals) {
          next();
          // gate names are identifiers, except the identity gate I whose
          // name collides with the unit type keyword
          std::string gate;
          if (peek().kind == Tok::kw_I) {
            next();
            gate = "I";
          } else {
            gate = expect(Tok::ident).text;
          }
          return mk_sterm<SGateApp>(t.pos, gate, vars);
        }
        if (vars.size() != 1)
          fail_at(Errc::syntax_error, peek().pos,
                  "expected '*=' after qubit list");
        expect(Tok::equals);
        if (peek().kind == Tok::kw_measure) {
          next();
          Token q = expect(Tok::ident);
          return mk_sterm<SMeasureSt>(t.pos, vars[0], q.text);
        }
        if (peek().kind == Tok::kw_copy) {
          next();
          Token x = expect(Tok::ident);
          return mk_sterm<SCopySt>(t.pos, vars[0], x.text);
        }
        SExprRef e = parse_expr();
        return mk_sterm<SAssign>(t.pos, vars[0], e);
      }
      default:
        fail_at(Errc::syntax_error, t.pos,
                std::string("expected a statement, found '") + t.text + "'");
    }
  }

  STermRef parse_case() {
    Token t = expect(Tok::kw_case);
    Token scrut = expect(Tok::ident);
    expect(Tok::kw_of);
    bool braced = accept(Tok::lbrace);
    std::vector<SBranch> branches;
    do {
      branches.push_back(parse_branch());
    } while (accept(Tok::pipe));
    if (braced) expect(Tok::rbrace);
    if (branches.size() != 2)
      fail_at(Errc::syntax_error, t.pos, "case needs exactly two branches");
    return mk_sterm<SCase>(t.pos, scrut.text, branches);
  }

  SBranch parse_branch() {
    SPattern p;
    const Token& t = peek();
    switch (t.kind) {
      case Tok::kw_left:
        next();
        p = {PatKind::inj_left, expect(Tok::ident).text, ""};
        break;
      case Tok::kw_right:
        next();
        p = {PatKind::inj_right, expect(Tok::ident).text, ""};
        break;
      case Tok::kw_nil:
        next();
        p = {PatKind::list_nil, "", ""};
        break;
      case Tok::kw_zero:
        next();
        p = {PatKind::nat_zero, "", ""};
        break;
      case Tok::ident: {
        if (t.text == "s" && peek(1).kind == Tok::lparen) {
          next();
          next();
          p = {PatKind::nat_succ, expect(Tok::ident).text, ""};
          expect(Tok::rparen);
          break;
        }
        std::string head = next().text;
        expect(Tok::coloncolon);
        std::string tail = expect(Tok::ident).text;
        p = {PatKind::list_cons, head, tail};
        break;
      }
      default:
        fail_at(Errc::syntax_error, t.pos, "expected a case pattern");
    }
    expect(Tok::arrow);
    STermRef body = parse_term();
    return SBranch{p, body};
  }

  // expr := base ('::' expr)?    right-associative cons
  SExprRef parse_expr() {
    SExprRef head = parse_base_expr();
    if (accept(Tok::coloncolon)) {
      SExprRef tail = parse_expr();
      return mk_sexpr<SCons>(head->pos, head, tail);
    }
    return head;
  }

  SExprRef parse_base_expr() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::kw_tt:
        next();
        return mk_sexpr<SBitLit>(t.pos, true);
      case Tok::kw_ff:
        next();
        return mk_sexpr<SBitLit>(t.pos, false);
      case Tok::kw_zero:
        next();
        return mk_sexpr<SZeroLit>(t.pos);
      case Tok::kw_nil: {
        next();
        std::optional<TypeRef> elem;
        if (accept(Tok::lbracket)) {
          elem = parse_type();
          expect(Tok::rbracket);
        }
        return mk_sexpr<SNil>(t.pos, elem);
      }
      case Tok::kw_left:
      case Tok::kw_right: {
        bool is_left = t.kind == Tok::kw_left;
        next();
        expect(Tok::lbracket);
        TypeRef a = parse_type();
        expect(Tok::comma);
        TypeRef b = parse_type();
        expect(Tok::rbracket);
        SExprRef inner = parse_base_expr();
        return mk_sexpr<SInjE>(t.pos, is_left, a, b, inner);
      }
      case Tok::kw_fold: {
        next();
        expect(Tok::lbracket);
        TypeRef mu = parse_type();
        expect(Tok::rbracket);
        SExprRef inner = parse_base_expr();
        return mk_sexpr<SFoldE>(t.pos, mu, inner);
      }
      case Tok::kw_unfold: {
        next();
        SExprRef inner = parse_base_expr();
        return mk_sexpr<SUnfoldE>(t.pos, inner);
      }
      case Tok::lparen: {
        next();
        SExprRef fst = parse_expr();
        if (accept(Tok::comma)) {
          SExprRef snd = parse_expr();
          expect(Tok::rparen);
          return mk_sexpr<SPairE>(t.pos, fst, snd);
        }
        expect(Tok::rparen);
        return fst;
      }
      case Tok::ident: {
        if (t.text == "s" && peek(1).kind == Tok::lparen) {
          next();
          next();
          SExprRef inner = parse_expr();
          expect(Tok::rparen);
          return mk_sexpr<SSucc>(t.pos, inner);
        }
        std::string name = next().text;
        std::optional<long> bound;
        if (peek().kind == Tok::caret && peek(1).kind == Tok::number) {
          next();
          bound = std::stol(next().text);
        }
        if (accept(Tok::lparen)) {
          SExprRef arg = parse_expr();
          expect(Tok::rparen);
          return mk_sexpr<SCallE>(t.pos, name, bound, arg);
        }
        if (bound)
          fail_at(Errc::syntax_error, peek().pos,
                  "indexed name must be a procedure call");
        return mk_sexpr<SVar>(t.pos, name);
      }
      default:
        fail_at(Errc::syntax_error, t.pos,
                std::string("expected an expression, found '") + t.text + "'");
    }
  }

  VarCtx parse_ctx_list() {
    VarCtx ctx;
    if (peek().kind != Tok::ident) return ctx;
    do {
      Token v = expect(Tok::ident);
      expect(Tok::colon);
      TypeRef ty = parse_type();
      if (!ctx.emplace(v.text, ty).second)
        fail_at(Errc::syntax_error, v.pos, "duplicate variable " + v.text);
    } while (accept(Tok::comma));
    return ctx;
  }

  // type := 'mu' X '.' type | sum;  '+' and '*' right-associative,
  // '*' binds tighter
  TypeRef parse_type() {
    if (peek().kind == Tok::kw_mu) {
      next();
      Token binder = expect(Tok::ident);
      expect(Tok::dot);
      TypeRef body = parse_type();
      return Type::mu(binder.text, body);
    }
    return parse_sum_type();
  }

  TypeRef parse_sum_type() {
    TypeRef a = parse_tensor_type();
    if (accept(Tok::plus)) {
      TypeRef b = parse_sum_type();
      return Type::sum(a, b);
    }
    return a;
  }

  TypeRef parse_tensor_type() {
    TypeRef a = parse_atom_type();
    if (accept(Tok::star)) {
      TypeRef b = parse_tensor_type();
      return Type::tensor(a, b);
    }
    return a;
  }

  TypeRef parse_atom_type() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::kw_qbit:
        next();
        return Type::qbit();
      case Tok::kw_I:
        next();
        return Type::unit();
      case Tok::kw_bit:
        next();
        return bit_type();
      case Tok::kw_Nat:
        next();
        return nat_type();
      case Tok::kw_ListQ:
        next();
        return list_type(Type::qbit());
      case Tok::kw_List: {
        next();
        expect(Tok::lparen);
        TypeRef elem = parse_type();
        expect(Tok::rparen);
        return list_type(elem);
      }
      case Tok::ident:
        next();
        return Type::var(t.text);
      case Tok::lparen: {
        next();
        TypeRef inner = parse_type();
        expect(Tok::rparen);
        return inner;
      }
      default:
        fail_at(Errc::syntax_error, t.pos,
                std::string("expected a type, found '") + t.text + "'");
    }
  }

  std::vector<Token> tokens_;
  size_t pos_ = 0;
};

inline STermRef parse(const std::string& src) {
  return Parser(src).parse_program();
}

inline TypeRef parse_type_string(const std::string& src) {
  return Parser(src).parse_type_only();
}

// ---------------------------------------------------------------------------
// Desugaring
// ---------------------------------------------------------------------------

namespace detail {

inline void collect_surface_names(const STermRef& t, std::set<std::string>& out);

inline void collect_expr_names(const SExprRef& e, std::set<std::string>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, SVar>) out.insert(n.name);
        else if constexpr (std::is_same_v<T, SSucc>) collect_expr_names(n.inner, out);
        else if constexpr (std::is_same_v<T, SCons>) {
          collect_expr_names(n.head, out);
          collect_expr_names(n.tail, out);
        } else if constexpr (std::is_same_v<T, SPairE>) {
          collect_expr_names(n.fst, out);
          collect_expr_names(n.snd, out);
        } else if constexpr (std::is_same_v<T, SInjE> ||
                             std::is_same_v<T, SFoldE> ||
                             std::is_same_v<T, SUnfoldE>) {
          collect_expr_names(n.inner, out);
        } else if constexpr (std::is_same_v<T, SCallE>) {
          collect_expr_names(n.arg, out);
        }
      },
      e->node);
}

inline void collect_surface_names(const STermRef& t, std::set<std::string>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, SNewUnit> || std::is_same_v<T, SNewQbit> ||
                      std::is_same_v<T, SDiscard>) {
          out.insert(n.var);
        } else if constexpr (std::is_same_v<T, SSeq>) {
          collect_surface_names(n.first, out);
          collect_surface_names(n.rest, out);
        } else if constexpr (std::is_same_v<T, SWhile>) {
          out.insert(n.cond);
          collect_surface_names(n.body, out);
        } else if constexpr (std::is_same_v<T, SIf>) {
          out.insert(n.cond);
          collect_surface_names(n.then_body, out);
          if (n.else_body) collect_surface_names(n.else_body, out);
        } else if constexpr (std::is_same_v<T, SCase>) {
          out.insert(n.scrutinee);
          for (const auto& br : n.branches) {
            if (!br.pattern.var1.empty()) out.insert(br.pattern.var1);
            if (!br.pattern.var2.empty()) out.insert(br.pattern.var2);
            collect_surface_names(br.body, out);
          }
        } else if constexpr (std::is_same_v<T, SProc>) {
          out.insert(n.in_var);
          out.insert(n.out_var);
          collect_surface_names(n.body, out);
        } else if constexpr (std::is_same_v<T, SGateApp>) {
          for (const auto& v : n.targets) out.insert(v);
        } else if constexpr (std::is_same_v<T, SUnpair>) {
          out.insert(n.fst);
          out.insert(n.snd);
          out.insert(n.src);
        } else if constexpr (std::is_same_v<T, SMeasureSt> ||
                             std::is_same_v<T, SCopySt>) {
          out.insert(n.dst);
          out.insert(n.src);
        } else if constexpr (std::is_same_v<T, SAssign>) {
          out.insert(n.dst);
          collect_expr_names(n.expr, out);
        } else if constexpr (std::is_same_v<T, SZeroSt>) {
          for (const auto& [v, ty] : n.input) out.insert(v);
          for (const auto& [v, ty] : n.output) out.insert(v);
        }
      },
      t->node);
}

}  // namespace detail

// Desugaring threads a best-effort typing environment: statement shapes are
// mirrored so that list-literal element types can be inferred from context.
// Inference failures raise DesugarError; full checking happens later in the
// typecheck module.
class Desugarer {
 public:
  explicit Desugarer(const STermRef& program) {
    detail::collect_surface_names(program, used_names_);
  }

  TermRef desugar(const STermRef& t) {
    std::map<std::string, std::optional<TypeRef>> env;
    std::map<std::string, ProcSig> procs;
    return desugar_term(t, env, procs, std::nullopt);
  }

 private:
  using Env = std::map<std::string, std::optional<TypeRef>>;
  using Procs = std::map<std::string, ProcSig>;
  using Hint = std::optional<std::pair<std::string, TypeRef>>;

  std::string fresh() {
    for (;;) {
      std::string name = "_t" + std::to_string(counter_++);
      if (!used_names_.count(name)) return name;
    }
  }

  static std::optional<TypeRef> list_elem(const TypeRef& t) {
    // List(A) = mu Y. I + A * Y
    if (t->kind != TypeKind::mu) return std::nullopt;
    const TypeRef& body = t->child_a;
    if (body->kind != TypeKind::sum || body->child_a->kind != TypeKind::unit)
      return std::nullopt;
    const TypeRef& cell = body->child_b;
    if (cell->kind != TypeKind::tensor || cell->child_b->kind != TypeKind::var ||
        cell->child_b->name != t->name)
      return std::nullopt;
    return cell->child_a;
  }

  std::optional<TypeRef> expr_type(const SExprRef& e, const Env& env,
                                   const Procs& procs,
                                   const std::optional<TypeRef>& expected) {
    return std::visit(
        [&](const auto& n) -> std::optional<TypeRef> {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, SVar>) {
            auto it = env.find(n.name);
            if (it != env.end()) return it->second;
            return std::nullopt;
          } else if constexpr (std::is_same_v<T, SBitLit>) {
            return bit_type();
          } else if constexpr (std::is_same_v<T, SZeroLit> ||
                               std::is_same_v<T, SSucc>) {
            return nat_type();
          } else if constexpr (std::is_same_v<T, SNil>) {
            if (n.elem) return list_type(*n.elem);
            if (expected && list_elem(*expected)) return *expected;
            return std::nullopt;
          } else if constexpr (std::is_same_v<T, SCons>) {
            auto head = expr_type(n.head, env, procs, std::nullopt);
            if (head) return list_type(*head);
            if (expected && list_elem(*expected)) return *expected;
            return std::nullopt;
          } else if constexpr (std::is_same_v<T, SPairE>) {
            auto a = expr_type(n.fst, env, procs, std::nullopt);
            auto b = expr_type(n.snd, env, procs, std::nullopt);
            if (a && b) return Type::tensor(*a, *b);
            return std::nullopt;
          } else if constexpr (std::is_same_v<T, SInjE>) {
            return Type::sum(n.left_type, n.right_type);
          } else if constexpr (std::is_same_v<T, SFoldE>) {
            return n.mu_type;
          } else if constexpr (std::is_same_v<T, SUnfoldE>) {
            auto inner = expr_type(n.inner, env, procs, std::nullopt);
            if (inner && (*inner)->kind == TypeKind::mu)
              return unroll_mu(*inner);
            return std::nullopt;
          } else {  // SCallE
            auto it = procs.find(n.name);
            if (it != procs.end()) return it->second.out_type;
            return std::nullopt;
          }
        },
        e->node);
  }

  // Emits code computing `expr` into a variable; returns the variable name.
  // Plain variables are used in place, everything else goes through a fresh
  // temporary.
  std::string expr_to_var(const SExprRef& e, const std::optional<TypeRef>& expected,
                          Env& env, const Procs& procs,
                          std::vector<TermRef>& code) {
    if (const auto* v = std::get_if<SVar>(&e->node)) return v->name;
    std::string tmp = fresh();
    assign_expr(tmp, e, expected, env, procs, code);
    return tmp;
  }

  // Emits code ending with a binding of `dst` to the value of `expr`.
  void assign_expr(const std::string& dst, const SExprRef& e,
                   const std::optional<TypeRef>& expected, Env& env,
                   const Procs& procs, std::vector<TermRef>& code) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, SVar>) {
            fail_at(Errc::desugar_error, e->pos,
                    "plain variable renaming '" + dst + " = " + n.name +
                        "' has no core form");
          } else if constexpr (std::is_same_v<T, SBitLit>) {
            std::string u = fresh();
            code.push_back(mk<NewUnit>(u));
            if (n.value)
              code.push_back(mk<InjRight>(dst, u, Type::unit(), Type::unit()));
            else
              code.push_back(mk<InjLeft>(dst, u, Type::unit(), Type::unit()));
            env[dst] = bit_type();
          } else if constexpr (std::is_same_v<T, SZeroLit>) {
            std::string u = fresh();
            std::string l = fresh();
            code.push_back(mk<NewUnit>(u));
            code.push_back(mk<InjLeft>(l, u, Type::unit(), nat_type()));
            code.push_back(mk<FoldTerm>(dst, l, nat_type()));
            env[dst] = nat_type();
          } else if constexpr (std::is_same_v<T, SSucc>) {
            std::string v = expr_to_var(n.inner, nat_type(), env, procs, code);
            std::string r = fresh();
            code.push_back(mk<InjRight>(r, v, Type::unit(), nat_type()));
            code.push_back(mk<FoldTerm>(dst, r, nat_type()));
            env.erase(v);
            env[dst] = nat_type();
          } else if constexpr (std::is_same_v<T, SNil>) {
            TypeRef lt;
            if (n.elem) {
              lt = list_type(*n.elem);
            } else if (expected && list_elem(*expected)) {
              lt = *expected;
            } else {
              fail_at(Errc::desugar_error, e->pos,
                      "cannot infer the element type of nil; write nil[A]");
            }
            TypeRef elem = *list_elem(lt);
            std::string u = fresh();
            std::string l = fresh();
            code.push_back(mk<NewUnit>(u));
            code.push_back(
                mk<InjLeft>(l, u, Type::unit(), Type::tensor(elem, lt)));
            code.push_back(mk<FoldTerm>(dst, l, lt));
            env[dst] = lt;
          } else if constexpr (std::is_same_v<T, SCons>) {
            std::optional<TypeRef> head_ty =
                expr_type(n.head, env, procs, std::nullopt);
            TypeRef lt;
            if (head_ty) {
              lt = list_type(*head_ty);
            } else if (expected && list_elem(*expected)) {
              lt = *expected;
            } else {
              fail_at(Errc::desugar_error, e->pos,
                      "cannot infer the element type of '::'");
            }
            TypeRef elem = *list_elem(lt);
            std::string hv = expr_to_var(n.head, elem, env, procs, code);
            std::string tv = expr_to_var(n.tail, lt, env, procs, code);
            std::string p = fresh();
            std::string r = fresh();
            code.push_back(mk<MakePair>(p, hv, tv));
            code.push_back(
                mk<InjRight>(r, p, Type::unit(), Type::tensor(elem, lt)));
            code.push_back(mk<FoldTerm>(dst, r, lt));
            env.erase(hv);
            env.erase(tv);
            env[dst] = lt;
          } else if constexpr (std::is_same_v<T, SPairE>) {
            std::string a = expr_to_var(n.fst, std::nullopt, env, procs, code);
            std::string b = expr_to_var(n.snd, std::nullopt, env, procs, code);
            auto ta = env.count(a) ? env[a] : std::nullopt;
            auto tb = env.count(b) ? env[b] : std::nullopt;
            code.push_back(mk<MakePair>(dst, a, b));
            env.erase(a);
            env.erase(b);
            env[dst] = (ta && tb) ? std::optional<TypeRef>(Type::tensor(*ta, *tb))
                                  : std::nullopt;
          } else if constexpr (std::is_same_v<T, SInjE>) {
            std::string v = expr_to_var(
                n.inner, n.left ? n.left_type : n.right_type, env, procs, code);
            if (n.left)
              code.push_back(mk<InjLeft>(dst, v, n.left_type, n.right_type));
            else
              code.push_back(mk<InjRight>(dst, v, n.left_type, n.right_type));
            env.erase(v);
            env[dst] = Type::sum(n.left_type, n.right_type);
          } else if constexpr (std::is_same_v<T, SFoldE>) {
            if (n.mu_type->kind != TypeKind::mu)
              fail_at(Errc::desugar_error, e->pos,
                      "fold annotation must be a mu type");
            std::string v =
                expr_to_var(n.inner, unroll_mu(n.mu_type), env, procs, code);
            code.push_back(mk<FoldTerm>(dst, v, n.mu_type));
            env.erase(v);
            env[dst] = n.mu_type;
          } else if constexpr (std::is_same_v<T, SUnfoldE>) {
            std::string v = expr_to_var(n.inner, std::nullopt, env, procs, code);
            auto tv = env.count(v) ? env[v] : std::nullopt;
            code.push_back(mk<UnfoldTerm>(dst, v));
            env.erase(v);
            env[dst] = (tv && (*tv)->kind == TypeKind::mu)
                           ? std::optional<TypeRef>(unroll_mu(*tv))
                           : std::nullopt;
          } else {  // SCallE
            auto it = procs.find(n.name);
            std::optional<TypeRef> in_ty, out_ty;
            if (it != procs.end()) {
              in_ty = it->second.in_type;
              out_ty = it->second.out_type;
            }
            std::string v = expr_to_var(n.arg, in_ty, env, procs, code);
            code.push_back(mk<CallProc>(dst, n.name, n.bound, v));
            env.erase(v);
            env[dst] = out_ty;
          }
        },
        e->node);
  }

  // Right-nested sequencing, matching the grammar's associativity.
  static TermRef seq_append(const TermRef& first, const TermRef& rest) {
    if (const auto* s = term_as<Seq>(first))
      return mk_seq(s->first, seq_append(s->rest, rest));
    return mk_seq(first, rest);
  }

  static TermRef seq_of(std::vector<TermRef> code) {
    if (code.empty()) return mk_skip();
    TermRef out = code.back();
    for (size_t i = code.size() - 1; i-- > 0;) out = seq_append(code[i], out);
    return out;
  }

  TermRef desugar_term(const STermRef& t, Env& env, Procs& procs,
                       const Hint& hint) {
    return std::visit(
        [&](const auto& n) -> TermRef {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, SNewUnit>) {
            env[n.var] = Type::unit();
            return mk<NewUnit>(n.var);
          } else if constexpr (std::is_same_v<T, SNewQbit>) {
            env[n.var] = Type::qbit();
            return mk<NewQbit>(n.var);
          } else if constexpr (std::is_same_v<T, SDiscard>) {
            env.erase(n.var);
            return mk<Discard>(n.var);
          } else if constexpr (std::is_same_v<T, SSkip>) {
            return mk_skip();
          } else if constexpr (std::is_same_v<T, SSeq>) {
            TermRef first = desugar_term(n.first, env, procs, hint);
            TermRef rest = desugar_term(n.rest, env, procs, hint);
            return seq_append(first, rest);
          } else if constexpr (std::is_same_v<T, SWhile>) {
            Env body_env = env;
            TermRef body = desugar_term(n.body, body_env, procs, hint);
            return mk<While>(n.bound, n.cond, body);
          } else if constexpr (std::is_same_v<T, SIf>) {
            // if b then {M}           expands per the standard sugar;
            // if b then {M} else {N}  runs N on the ff branch.
            std::string u = fresh();
            Env then_env = env;
            Env else_env = env;
            TermRef m = desugar_term(n.then_body, then_env, procs, hint);
            TermRef reset_tt =
                mk<InjRight>(n.cond, u, Type::unit(), Type::unit());
            TermRef right_body = mk_seq(reset_tt, m);
            TermRef reset_ff =
                mk<InjLeft>(n.cond, u, Type::unit(), Type::unit());
            TermRef left_body = reset_ff;
            if (n.else_body) {
              TermRef e = desugar_term(n.else_body, else_env, procs, hint);
              left_body = mk_seq(reset_ff, e);
            }
            merge_env(env, then_env, else_env);
            return mk<CaseOf>(n.cond, u, left_body, u, right_body);
          } else if constexpr (std::is_same_v<T, SCase>) {
            return desugar_case(n, env, procs, hint);
          } else if constexpr (std::is_same_v<T, SProc>) {
            Env body_env;
            body_env[n.in_var] = n.in_type;
            Procs body_procs = procs;
            body_procs[n.name] = ProcSig{n.in_type, n.out_type, n.bound};
            Hint body_hint = std::make_pair(n.out_var, n.out_type);
            TermRef body = desugar_term(n.body, body_env, body_procs, body_hint);
            procs[n.name] = ProcSig{n.in_type, n.out_type, n.bound};
            return mk<ProcDef>(n.name, n.bound, n.in_var, n.in_type, n.out_var,
                               n.out_type, body);
          } else if constexpr (std::is_same_v<T, SGateApp>) {
            return mk<ApplyUnitary>(n.gate, n.targets);
          } else if constexpr (std::is_same_v<T, SUnpair>) {
            auto src_ty = env.count(n.src) ? env[n.src] : std::nullopt;
            env.erase(n.src);
            if (src_ty && (*src_ty)->kind == TypeKind::tensor) {
              env[n.fst] = (*src_ty)->child_a;
              env[n.snd] = (*src_ty)->child_b;
            } else {
              env[n.fst] = std::nullopt;
              env[n.snd] = std::nullopt;
            }
            return mk<SplitPair>(n.fst, n.snd, n.src);
          } else if constexpr (std::is_same_v<T, SMeasureSt>) {
            env.erase(n.src);
            env[n.dst] = bit_type();
            return mk<Measure>(n.dst, n.src);
          } else if constexpr (std::is_same_v<T, SCopySt>) {
            env[n.dst] = env.count(n.src) ? env[n.src] : std::nullopt;
            return mk<Copy>(n.dst, n.src);
          } else if constexpr (std::is_same_v<T, SAssign>) {
            std::optional<TypeRef> expected;
            if (hint && hint->first == n.dst) expected = hint->second;
            std::vector<TermRef> code;
            assign_expr(n.dst, n.expr, expected, env, procs, code);
            return seq_of(std::move(code));
          } else {  // SZeroSt
            env.clear();
            for (const auto& [v, ty] : n.output) env[v] = ty;
            return mk<ZeroTerm>(n.input, n.output);
          }
        },
        t->node);
  }

  TermRef desugar_case(const SCase& c, Env& env, Procs& procs,
                       const Hint& hint) {
    auto scrut_ty = env.count(c.scrutinee) ? env[c.scrutinee] : std::nullopt;
    env.erase(c.scrutinee);
    const SBranch* left_br = nullptr;
    const SBranch* right_br = nullptr;
    bool needs_unfold = false;
    for (const auto& br : c.branches) {
      switch (br.pattern.kind) {
        case PatKind::inj_left:
          left_br = &br;
          break;
        case PatKind::inj_right:
          right_br = &br;
          break;
        case PatKind::list_nil:
        case PatKind::nat_zero:
          left_br = &br;
          needs_unfold = true;
          break;
        case PatKind::list_cons:
        case PatKind::nat_succ:
          right_br = &br;
          needs_unfold = true;
          break;
      }
    }
    if (!left_br || !right_br)
      fail_at(Errc::desugar_error, SourcePos{},
              "case needs one left/nil/zero and one right/cons/s branch");

    std::string scrut = c.scrutinee;
    std::vector<TermRef> prelude;
    std::optional<TypeRef> unrolled;
    if (needs_unfold) {
      std::string u = fresh();
      prelude.push_back(mk<UnfoldTerm>(u, scrut));
      if (scrut_ty && (*scrut_ty)->kind == TypeKind::mu)
        unrolled = unroll_mu(*scrut_ty);
      scrut = u;
    } else if (scrut_ty && (*scrut_ty)->kind == TypeKind::sum) {
      unrolled = scrut_ty;
    }

    auto component = [&](bool left) -> std::optional<TypeRef> {
      if (!unrolled || (*unrolled)->kind != TypeKind::sum) return std::nullopt;
      return left ? (*unrolled)->child_a : (*unrolled)->child_b;
    };

    // Left side: `left x ->` binds x; `nil ->`/`zero ->` bind and discard a
    // fresh unit variable.
    Env left_env = env;
    std::string left_var;
    TermRef left_body;
    if (left_br->pattern.kind == PatKind::inj_left) {
      left_var = left_br->pattern.var1;
      left_env[left_var] = component(true);
      left_body = desugar_term(left_br->body, left_env, procs, hint);
    } else {
      left_var = fresh();
      Env inner = env;
      TermRef rest = desugar_term(left_br->body, inner, procs, hint);
      left_body = mk_seq(mk<Discard>(left_var), rest);
      left_env = inner;
    }

    // Right side: `right x ->` binds x; `s(n') ->` binds n'; `h :: t ->`
    // unpairs a fresh pair variable.
    Env right_env = env;
    std::string right_var;
    TermRef right_body;
    if (right_br->pattern.kind == PatKind::inj_right) {
      right_var = right_br->pattern.var1;
      right_env[right_var] = component(false);
      right_body = desugar_term(right_br->body, right_env, procs, hint);
    } else if (right_br->pattern.kind == PatKind::nat_succ) {
      right_var = right_br->pattern.var1;
      right_env[right_var] = component(false);
      right_body = desugar_term(right_br->body, right_env, procs, hint);
    } else {  // list_cons
      right_var = fresh();
      Env inner = env;
      auto comp = component(false);
      if (comp && (*comp)->kind == TypeKind::tensor) {
        inner[right_br->pattern.var1] = (*comp)->child_a;
        inner[right_br->pattern.var2] = (*comp)->child_b;
      } else {
        inner[right_br->pattern.var1] = std::nullopt;
        inner[right_br->pattern.var2] = std::nullopt;
      }
      TermRef rest = desugar_term(right_br->body, inner, procs, hint);
      right_body = mk_seq(
          mk<SplitPair>(right_br->pattern.var1, right_br->pattern.var2,
                        right_var),
          rest);
      right_env = inner;
    }

    merge_env(env, left_env, right_env);
    TermRef case_term =
        mk<CaseOf>(scrut, left_var, left_body, right_var, right_body);
    prelude.push_back(case_term);
    return seq_of(std::move(prelude));
  }

  // After a branch point, keep only bindings both sides agree on.
  static void merge_env(Env& out, const Env& a, const Env& b) {
    out.clear();
    for (const auto& [name, ty] : a) {
      auto it = b.find(name);
      if (it == b.end()) continue;
      if (ty && it->second && type_equal(*ty, *it->second))
        out[name] = ty;
      else
        out[name] = std::nullopt;
    }
  }

  std::set<std::string> used_names_;
  long counter_ = 0;
};

inline TermRef desugar(const STermRef& surface) {
  return Desugarer(surface).desugar(surface);
}

inline TermRef parse_and_desugar(const std::string& src) {
  STermRef s = parse(src);
  return desugar(s);
}

// ---------------------------------------------------------------------------
// Pretty-printer: core terms to parseable surface syntax
// ---------------------------------------------------------------------------

inline std::string pretty_print(const TermRef& t) {
  return std::visit(
      [&](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, NewUnit>) {
          return "new unit " + n.var;
        } else if constexpr (std::is_same_v<T, Discard>) {
          return "discard " + n.var;
        } else if constexpr (std::is_same_v<T, Copy>) {
          return n.dst + " = copy " + n.src;
        } else if constexpr (std::is_same_v<T, NewQbit>) {
          return "new qbit " + n.var;
        } else if constexpr (std::is_same_v<T, Measure>) {
          return n.dst + " = measure " + n.src;
        } else if constexpr (std::is_same_v<T, ApplyUnitary>) {
          std::string s;
          for (const auto& q : n.targets) {
            if (!s.empty()) s += ", ";
            s += q;
          }
          return s + " *= " + n.gate;
        } else if constexpr (std::is_same_v<T, Seq>) {
          return pretty_print(n.first) + "; " + pretty_print(n.rest);
        } else if constexpr (std::is_same_v<T, Skip>) {
          return "skip";
        } else if constexpr (std::is_same_v<T, While>) {
          std::string head = "while";
          if (n.bound) head += "^" + std::to_string(*n.bound);
          return head + " " + n.cond + " do { " + pretty_print(n.body) + " }";
        } else if constexpr (std::is_same_v<T, InjLeft>) {
          return n.dst + " = left[" + type_to_string(n.left_type) + ", " +
                 type_to_string(n.right_type) + "] " + n.src;
        } else if constexpr (std::is_same_v<T, InjRight>) {
          return n.dst + " = right[" + type_to_string(n.left_type) + ", " +
                 type_to_string(n.right_type) + "] " + n.src;
        } else if constexpr (std::is_same_v<T, CaseOf>) {
          return "case " + n.scrutinee + " of { left " + n.left_var + " -> " +
                 pretty_print(n.left_body) + " | right " + n.right_var +
                 " -> " + pretty_print(n.right_body) + " }";
        } else if constexpr (std::is_same_v<T, MakePair>) {
          return n.dst + " = (" + n.fst + ", " + n.snd + ")";
        } else if constexpr (std::is_same_v<T, SplitPair>) {
          return "(" + n.fst + ", " + n.snd + ") = " + n.src;
        } else if constexpr (std::is_same_v<T, FoldTerm>) {
          return n.dst + " = fold[" + type_to_string(n.mu_type) + "] " + n.src;
        } else if constexpr (std::is_same_v<T, UnfoldTerm>) {
          return n.dst + " = unfold " + n.src;
        } else if constexpr (std::is_same_v<T, ProcDef>) {
          std::string head = "proc " + n.name;
          if (n.bound) head += "^" + std::to_string(*n.bound);
          return head + " :: " + n.in_var + " : " + type_to_string(n.in_type) +
                 " -> " + n.out_var + " : " + type_to_string(n.out_type) +
                 " { " + pretty_print(n.body) + " }";
        } else if constexpr (std::is_same_v<T, CallProc>) {
          std::string f = n.name;
          if (n.bound) f += "^" + std::to_string(*n.bound);
          return n.dst + " = " + f + "(" + n.arg + ")";
        } else {  // ZeroTerm
          return "0[" + var_ctx_to_string(n.input) + " ; " +
                 var_ctx_to_string(n.output) + "]";
        }
      },
      t->node);
}

}  // namespace qpl
