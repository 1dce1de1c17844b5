#include <probt/syntax.hpp>

#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace probt {

// ---------------------------------------------------------------------------
// Hash mixing (splitmix64-style; stability across runs is all we need)

static uint64_t mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

static uint64_t mix2(uint64_t a, uint64_t b) { return mix(a ^ (b * 0xff51afd7ed558ccdULL)); }

// ---------------------------------------------------------------------------
// Types

TypePtr ty_nat() {
  static TypePtr nat = [] {
    auto t = std::make_shared<Type>();
    t->kind = TypeKind::Nat;
    t->hash = mix(1);
    return TypePtr(t);
  }();
  return nat;
}

TypePtr ty_arrow(TypePtr dom, TypePtr cod) {
  auto t = std::make_shared<Type>();
  t->kind = TypeKind::Arrow;
  t->a = std::move(dom);
  t->b = std::move(cod);
  t->hash = mix2(mix(2) ^ t->a->hash, t->b->hash);
  return t;
}

TypePtr ty_prod(TypePtr fst, TypePtr snd) {
  auto t = std::make_shared<Type>();
  t->kind = TypeKind::Prod;
  t->a = std::move(fst);
  t->b = std::move(snd);
  t->hash = mix2(mix(3) ^ t->a->hash, t->b->hash);
  return t;
}

bool type_eq(const TypePtr& s, const TypePtr& t) {
  if (s.get() == t.get()) return true;
  if (!s || !t) return false;
  if (s->hash != t->hash || s->kind != t->kind) return false;
  switch (s->kind) {
    case TypeKind::Nat: return true;
    default: return type_eq(s->a, t->a) && type_eq(s->b, t->b);
  }
}

namespace {
enum class TyCtx { Top, ArrowDom, ProdL, ProdR };

void print_type_rec(const TypePtr& t, TyCtx ctx, std::string& out) {
  switch (t->kind) {
    case TypeKind::Nat:
      out += "Nat";
      return;
    case TypeKind::Arrow: {
      bool parens = ctx != TyCtx::Top;
      if (parens) out += "(";
      print_type_rec(t->a, TyCtx::ArrowDom, out);
      out += " -> ";
      print_type_rec(t->b, TyCtx::Top, out);
      if (parens) out += ")";
      return;
    }
    case TypeKind::Prod: {
      bool parens = ctx == TyCtx::ProdL;
      if (parens) out += "(";
      print_type_rec(t->a, TyCtx::ProdL, out);
      out += "*";
      print_type_rec(t->b, TyCtx::ProdR, out);
      if (parens) out += ")";
      return;
    }
  }
}
}  // namespace

std::string print_type(const TypePtr& t) {
  std::string out;
  print_type_rec(t, TyCtx::Top, out);
  return out;
}

// ---------------------------------------------------------------------------
// Term constructors

static TermPtr make_const(TermKind k, uint64_t tag) {
  auto t = std::make_shared<Term>();
  t->kind = k;
  t->has_prob = k == TermKind::Rand || k == TermKind::FixRan ||
                k == TermKind::SRand;
  t->value_bit = k == TermKind::Succ || k == TermKind::Proj1 ||
                 k == TermKind::Proj2 || k == TermKind::Rec ||
                 k == TermKind::FixRan;
  t->hash = mix(tag);
  return t;
}

TermPtr mk_succ() {
  static TermPtr c = make_const(TermKind::Succ, 101);
  return c;
}
TermPtr mk_proj1() {
  static TermPtr c = make_const(TermKind::Proj1, 102);
  return c;
}
TermPtr mk_proj2() {
  static TermPtr c = make_const(TermKind::Proj2, 103);
  return c;
}
TermPtr mk_rec() {
  static TermPtr c = make_const(TermKind::Rec, 104);
  return c;
}
TermPtr mk_rand() {
  static TermPtr c = make_const(TermKind::Rand, 105);
  return c;
}
TermPtr mk_fixran() {
  static TermPtr c = make_const(TermKind::FixRan, 106);
  return c;
}
TermPtr mk_srand() {
  static TermPtr c = make_const(TermKind::SRand, 107);
  return c;
}

TermPtr mk_bvar(uint64_t index) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::BVar;
  t->index = index;
  t->dangling = static_cast<uint32_t>(index) + 1;
  t->hash = mix2(mix(10), index);
  return t;
}

TermPtr mk_fvar(const std::string& name) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::FVar;
  t->name = name;
  t->has_fvar = true;
  t->hash = mix2(mix(11), std::hash<std::string>{}(name));
  return t;
}

TermPtr mk_nat(const Int& n) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::NatLit;
  t->value_bit = true;
  t->nat = n;
  t->hash = mix2(mix(12), mpz_getlimbn(n.get_mpz_t(), 0) ^
                              (uint64_t)mpz_size(n.get_mpz_t()));
  return t;
}

TermPtr mk_nat(unsigned long n) { return mk_nat(Int(n)); }

TermPtr mk_lam(TypePtr annot, TermPtr body) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Lam;
  t->value_bit = true;
  t->annot = std::move(annot);
  t->a = std::move(body);
  t->dangling = t->a->dangling > 0 ? t->a->dangling - 1 : 0;
  t->has_fvar = t->a->has_fvar;
  t->has_prob = t->a->has_prob;
  t->hash = mix2(mix(13) ^ t->annot->hash, t->a->hash);
  return t;
}

static TermPtr mk_node(TermKind k, uint64_t tag, TermPtr a, TermPtr b) {
  auto t = std::make_shared<Term>();
  t->kind = k;
  t->a = std::move(a);
  t->b = std::move(b);
  t->dangling = std::max(t->a->dangling, t->b->dangling);
  t->has_fvar = t->a->has_fvar || t->b->has_fvar;
  t->has_prob = t->a->has_prob || t->b->has_prob || k == TermKind::Choice;
  if (k == TermKind::Pair)
    t->value_bit = t->a->value_bit && t->b->value_bit;
  else if (k == TermKind::App)  // S V (post-canonicalization leftovers)
    t->value_bit = t->a->kind == TermKind::Succ && t->b->value_bit;
  t->hash = mix2(mix(tag) ^ t->a->hash, t->b->hash);
  return t;
}

TermPtr mk_app(TermPtr f, TermPtr arg) {
  // Canonical numerals: S applied to a numeral is the next numeral.
  if (f->kind == TermKind::Succ && arg->kind == TermKind::NatLit)
    return mk_nat(Int(arg->nat + 1));
  return mk_node(TermKind::App, 14, std::move(f), std::move(arg));
}

TermPtr mk_pair(TermPtr fst, TermPtr snd) {
  return mk_node(TermKind::Pair, 15, std::move(fst), std::move(snd));
}

TermPtr mk_choice(TermPtr l, TermPtr r) {
  return mk_node(TermKind::Choice, 16, std::move(l), std::move(r));
}

// ---------------------------------------------------------------------------
// Equality

bool term_eq(const TermPtr& s, const TermPtr& t) {
  if (s.get() == t.get()) return true;
  if (!s || !t) return false;
  if (s->hash != t->hash || s->kind != t->kind) return false;
  switch (s->kind) {
    case TermKind::BVar: return s->index == t->index;
    case TermKind::FVar: return s->name == t->name;
    case TermKind::NatLit: return s->nat == t->nat;
    case TermKind::Lam:
      return type_eq(s->annot, t->annot) && term_eq(s->a, t->a);
    case TermKind::App:
    case TermKind::Pair:
    case TermKind::Choice:
      return term_eq(s->a, t->a) && term_eq(s->b, t->b);
    default: return true;  // constants
  }
}

// ---------------------------------------------------------------------------
// Values and numerals

bool is_value(const TermPtr& t) { return t->value_bit; }

std::optional<Int> as_nat(const TermPtr& t) {
  if (t->kind == TermKind::NatLit) return t->nat;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Substitution

static TermPtr subst_fvar(const TermPtr& t, const std::string& var,
                          const TermPtr& value) {
  if (!t->has_fvar) return t;
  switch (t->kind) {
    case TermKind::FVar:
      return t->name == var ? value : t;
    case TermKind::Lam: {
      TermPtr body = subst_fvar(t->a, var, value);
      return body.get() == t->a.get() ? t : mk_lam(t->annot, body);
    }
    case TermKind::App:
    case TermKind::Pair:
    case TermKind::Choice: {
      TermPtr a = subst_fvar(t->a, var, value);
      TermPtr b = subst_fvar(t->b, var, value);
      if (a.get() == t->a.get() && b.get() == t->b.get()) return t;
      if (t->kind == TermKind::App) return mk_app(a, b);
      if (t->kind == TermKind::Pair) return mk_pair(a, b);
      return mk_choice(a, b);
    }
    default:
      return t;
  }
}

TermPtr substitute(const TermPtr& body, const std::string& var,
                   const TermPtr& value) {
  if (value->dangling != 0)
    throw std::invalid_argument(
        "substitute: replacement term has loose bound variables");
  return subst_fvar(body, var, value);
}

// Replaces loose index `depth` with `value` (locally closed) and shifts the
// loose indices above it down by one.
static TermPtr open_rec(const TermPtr& t, uint64_t depth, const TermPtr& value) {
  if (t->dangling <= depth) return t;  // nothing loose at or above `depth`
  switch (t->kind) {
    case TermKind::BVar:
      if (t->index == depth) return value;
      return t->index > depth ? mk_bvar(t->index - 1) : t;
    case TermKind::Lam:
      return mk_lam(t->annot, open_rec(t->a, depth + 1, value));
    case TermKind::App:
      return mk_app(open_rec(t->a, depth, value), open_rec(t->b, depth, value));
    case TermKind::Pair:
      return mk_pair(open_rec(t->a, depth, value), open_rec(t->b, depth, value));
    case TermKind::Choice:
      return mk_choice(open_rec(t->a, depth, value),
                       open_rec(t->b, depth, value));
    default:
      return t;
  }
}

TermPtr open0(const TermPtr& body, const TermPtr& value) {
  if (value->dangling != 0)
    throw std::invalid_argument("open0: value has loose bound variables");
  return open_rec(body, 0, value);
}

static TermPtr shift_rec(const TermPtr& t, int64_t delta, uint64_t cutoff) {
  if (t->dangling <= cutoff) return t;
  switch (t->kind) {
    case TermKind::BVar: {
      if (t->index < cutoff) return t;
      int64_t idx = static_cast<int64_t>(t->index) + delta;
      if (idx < 0) throw std::invalid_argument("shift: index underflow");
      return mk_bvar(static_cast<uint64_t>(idx));
    }
    case TermKind::Lam:
      return mk_lam(t->annot, shift_rec(t->a, delta, cutoff + 1));
    case TermKind::App:
      return mk_app(shift_rec(t->a, delta, cutoff),
                    shift_rec(t->b, delta, cutoff));
    case TermKind::Pair:
      return mk_pair(shift_rec(t->a, delta, cutoff),
                     shift_rec(t->b, delta, cutoff));
    case TermKind::Choice:
      return mk_choice(shift_rec(t->a, delta, cutoff),
                       shift_rec(t->b, delta, cutoff));
    default:
      return t;
  }
}

TermPtr shift(const TermPtr& t, int64_t delta, uint64_t cutoff) {
  if (delta == 0) return t;
  return shift_rec(t, delta, cutoff);
}

// ---------------------------------------------------------------------------
// Printing

namespace {

enum class TmCtx { Top, ChoiceL, AppF, AppA };

void collect_fvars(const TermPtr& t, std::unordered_set<std::string>& out) {
  if (!t->has_fvar) return;
  if (t->kind == TermKind::FVar) {
    out.insert(t->name);
    return;
  }
  if (t->a) collect_fvars(t->a, out);
  if (t->b) collect_fvars(t->b, out);
}

struct Printer {
  const std::unordered_set<std::string>& avoid;
  std::vector<std::string> binders;  // innermost last

  std::string fresh_name() {
    size_t depth = binders.size();
    std::string base = "x" + std::to_string(depth);
    std::string name = base;
    while (avoid.count(name)) name = "_" + name;
    return name;
  }

  void print(const TermPtr& t, TmCtx ctx, std::string& out) {
    switch (t->kind) {
      case TermKind::BVar: {
        if (t->index < binders.size())
          out += binders[binders.size() - 1 - t->index];
        else  // loose index (open term being debugged)
          out += "?" + std::to_string(t->index);
        return;
      }
      case TermKind::FVar: out += t->name; return;
      case TermKind::NatLit: out += t->nat.get_str(); return;
      case TermKind::Succ: out += "S"; return;
      case TermKind::Proj1: out += "p1"; return;
      case TermKind::Proj2: out += "p2"; return;
      case TermKind::Rec: out += "rec"; return;
      case TermKind::Rand: out += "rand"; return;
      case TermKind::FixRan: out += "fixr"; return;
      case TermKind::SRand: out += "srand"; return;
      case TermKind::Lam: {
        bool parens = ctx != TmCtx::Top;
        if (parens) out += "(";
        std::string name = fresh_name();
        out += "\\" + name + ":" + print_type(t->annot) + ". ";
        binders.push_back(name);
        print(t->a, TmCtx::Top, out);
        binders.pop_back();
        if (parens) out += ")";
        return;
      }
      case TermKind::Choice: {
        bool parens = ctx != TmCtx::Top;
        if (parens) out += "(";
        print(t->a, TmCtx::ChoiceL, out);
        out += " (+) ";
        print(t->b, TmCtx::Top, out);
        if (parens) out += ")";
        return;
      }
      case TermKind::App: {
        bool parens = ctx == TmCtx::AppA;
        if (parens) out += "(";
        print(t->a, TmCtx::AppF, out);
        out += " ";
        print(t->b, TmCtx::AppA, out);
        if (parens) out += ")";
        return;
      }
      case TermKind::Pair: {
        out += "<";
        const Term* cur = t.get();
        // flatten right-nested tuples for readability; reparses identically
        while (true) {
          print(cur->a, TmCtx::Top, out);
          out += ", ";
          if (cur->b->kind == TermKind::Pair) {
            cur = cur->b.get();
          } else {
            print(cur->b, TmCtx::Top, out);
            break;
          }
        }
        out += ">";
        return;
      }
    }
  }
};

}  // namespace

std::string print_term(const TermPtr& t) {
  std::unordered_set<std::string> avoid;
  collect_fvars(t, avoid);
  Printer p{avoid, {}};
  std::string out;
  p.print(t, TmCtx::Top, out);
  return out;
}

int term_cmp_canonical(const TermPtr& s, const TermPtr& t) {
  auto sn = as_nat(s), tn = as_nat(t);
  if (sn && tn) return cmp(*sn, *tn);
  if (sn) return -1;
  if (tn) return 1;
  std::string sp = print_term(s), tp = print_term(t);
  return sp.compare(tp);
}

// ---------------------------------------------------------------------------
// Lexer / parser

namespace {

enum class Tok {
  LParen, RParen, LAngle, RAngle, Comma, Lambda, Colon, Dot, Arrow, Star,
  OPlus, Ident, Nat, KwNat, KwRec, KwP1, KwP2, KwS, KwRand, KwFixr, End,
};

struct Lexer {
  const std::string& src;
  size_t pos = 0, line = 1, col = 1;

  Tok tok = Tok::End;
  std::string text;      // Ident payload
  Int nat;               // Nat payload
  size_t tline = 1, tcol = 1;

  explicit Lexer(const std::string& s) : src(s) { advance(); }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, tline, tcol);
  }

  char peek(size_t off = 0) const {
    return pos + off < src.size() ? src[pos + off] : '\0';
  }

  void bump() {
    if (peek() == '\n') { line++; col = 1; } else { col++; }
    pos++;
  }

  void skip_trivia() {
    while (pos < src.size()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        bump();
      } else if (c == '-' && peek(1) == '-') {
        while (pos < src.size() && peek() != '\n') bump();
      } else {
        break;
      }
    }
  }

  void advance() {
    skip_trivia();
    tline = line;
    tcol = col;
    if (pos >= src.size()) { tok = Tok::End; return; }
    char c = peek();
    if (c == '(') {
      if (peek(1) == '+' && peek(2) == ')') {
        bump(); bump(); bump();
        tok = Tok::OPlus;
      } else {
        bump();
        tok = Tok::LParen;
      }
      return;
    }
    switch (c) {
      case ')': bump(); tok = Tok::RParen; return;
      case '<': bump(); tok = Tok::LAngle; return;
      case '>': bump(); tok = Tok::RAngle; return;
      case ',': bump(); tok = Tok::Comma; return;
      case '\\': bump(); tok = Tok::Lambda; return;
      case ':': bump(); tok = Tok::Colon; return;
      case '.': bump(); tok = Tok::Dot; return;
      case '*': bump(); tok = Tok::Star; return;
      case '-':
        if (peek(1) == '>') { bump(); bump(); tok = Tok::Arrow; return; }
        throw ParseError("stray '-'", line, col);
      default: break;
    }
    if (c >= '0' && c <= '9') {
      std::string digits;
      while (peek() >= '0' && peek() <= '9') { digits += peek(); bump(); }
      nat = Int(digits);
      tok = Tok::Nat;
      return;
    }
    if (isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string id;
      while (isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
             peek() == '\'') {
        id += peek();
        bump();
      }
      if (id == "Nat") tok = Tok::KwNat;
      else if (id == "rec") tok = Tok::KwRec;
      else if (id == "p1") tok = Tok::KwP1;
      else if (id == "p2") tok = Tok::KwP2;
      else if (id == "S") tok = Tok::KwS;
      else if (id == "rand") tok = Tok::KwRand;
      else if (id == "fixr") tok = Tok::KwFixr;
      else if (id == "srand")
        throw ParseError("'srand' is internal to the staged semantics and has "
                         "no surface syntax", tline, tcol);
      else { tok = Tok::Ident; text = id; }
      return;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", line, col);
  }

  bool eat(Tok t) {
    if (tok != t) return false;
    advance();
    return true;
  }

  void expect(Tok t, const char* what) {
    if (tok != t) fail(std::string("expected ") + what);
    advance();
  }
};

struct Parser {
  Lexer lx;
  std::vector<std::string> binders;

  explicit Parser(const std::string& src) : lx(src) {}

  TypePtr parse_type_top() {
    TypePtr left = parse_type_prod();
    if (lx.eat(Tok::Arrow)) return ty_arrow(left, parse_type_top());
    return left;
  }

  TypePtr parse_type_prod() {
    TypePtr left = parse_type_atom();
    if (lx.eat(Tok::Star)) return ty_prod(left, parse_type_prod());
    return left;
  }

  TypePtr parse_type_atom() {
    if (lx.eat(Tok::KwNat)) return ty_nat();
    if (lx.eat(Tok::LParen)) {
      TypePtr t = parse_type_top();
      lx.expect(Tok::RParen, "')'");
      return t;
    }
    lx.fail("expected a type");
  }

  TermPtr parse_term_top() {
    if (lx.tok == Tok::Lambda) {
      lx.advance();
      if (lx.tok != Tok::Ident) lx.fail("expected a variable name after '\\'");
      std::string name = lx.text;
      lx.advance();
      lx.expect(Tok::Colon, "':' (binders are annotated)");
      TypePtr ann = parse_type_top();
      lx.expect(Tok::Dot, "'.'");
      binders.push_back(name);
      TermPtr body = parse_term_top();
      binders.pop_back();
      return mk_lam(ann, body);
    }
    TermPtr left = parse_app();
    if (lx.eat(Tok::OPlus)) return mk_choice(left, parse_term_top());
    return left;
  }

  TermPtr parse_app() {
    TermPtr head = parse_atom_required();
    while (true) {
      std::optional<TermPtr> arg = parse_atom_optional();
      if (!arg) return head;
      head = mk_app(head, *arg);
    }
  }

  TermPtr parse_atom_required() {
    auto a = parse_atom_optional();
    if (!a) lx.fail("expected a term");
    return *a;
  }

  std::optional<TermPtr> parse_atom_optional() {
    switch (lx.tok) {
      case Tok::Ident: {
        std::string name = lx.text;
        lx.advance();
        for (size_t i = 0; i < binders.size(); i++)
          if (binders[binders.size() - 1 - i] == name) return mk_bvar(i);
        return mk_fvar(name);
      }
      case Tok::Nat: {
        Int n = lx.nat;
        lx.advance();
        return mk_nat(n);
      }
      case Tok::KwS: lx.advance(); return mk_succ();
      case Tok::KwP1: lx.advance(); return mk_proj1();
      case Tok::KwP2: lx.advance(); return mk_proj2();
      case Tok::KwRec: lx.advance(); return mk_rec();
      case Tok::KwRand: lx.advance(); return mk_rand();
      case Tok::KwFixr: lx.advance(); return mk_fixran();
      case Tok::LParen: {
        lx.advance();
        TermPtr t = parse_term_top();
        lx.expect(Tok::RParen, "')'");
        return t;
      }
      case Tok::LAngle: {
        lx.advance();
        std::vector<TermPtr> parts;
        parts.push_back(parse_term_top());
        lx.expect(Tok::Comma, "',' (pairs have at least two components)");
        parts.push_back(parse_term_top());
        while (lx.eat(Tok::Comma)) parts.push_back(parse_term_top());
        lx.expect(Tok::RAngle, "'>'");
        // <a, b, c> is sugar for <a, <b, c>>
        TermPtr t = parts.back();
        for (size_t i = parts.size() - 1; i-- > 0;) t = mk_pair(parts[i], t);
        return t;
      }
      default:
        return std::nullopt;
    }
  }
};

}  // namespace

TermPtr parse_term(const std::string& src) {
  Parser p(src);
  TermPtr t = p.parse_term_top();
  if (p.lx.tok != Tok::End) p.lx.fail("trailing input after term");
  return t;
}

TypePtr parse_type(const std::string& src) {
  Parser p(src);
  TypePtr t = p.parse_type_top();
  if (p.lx.tok != Tok::End) p.lx.fail("trailing input after type");
  return t;
}

TermPtr parse_term_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open term file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_term(ss.str());
}

}  // namespace probt
