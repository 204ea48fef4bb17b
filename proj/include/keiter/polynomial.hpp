#pragma once

// Homogeneous multivariate polynomials with complex coefficients: parsing,
// evaluation, gradients, and linear coordinate substitution. Degrees and
// variable counts stay tiny (hypersurfaces in P^2..P^5), so representations
// favour clarity over asymptotics.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "keiter/common.hpp"

namespace kei {

using Expo = std::vector<int>;

struct Term {
  Expo e;
  cplx c;
};

inline int expo_degree(const Expo& e) {
  int d = 0;
  for (int v : e) d += v;
  return d;
}

// Graded-lex with var 0 strongest; inputs here are always same-degree, so this
// reduces to plain lex on the exponent vector.
inline bool grlex_less(const Expo& a, const Expo& b) {
  int da = expo_degree(a), db = expo_degree(b);
  if (da != db) return da < db;
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

inline bool expo_divides(const Expo& div, const Expo& e) {
  for (std::size_t i = 0; i < div.size(); ++i)
    if (e[i] < div[i]) return false;
  return true;
}

// All exponent vectors of total degree k in nvars variables, graded-lex descending.
inline std::vector<Expo> monomials_of_degree(int nvars, int k) {
  std::vector<Expo> out;
  Expo cur(static_cast<std::size_t>(nvars), 0);
  std::function<void(int, int)> rec = [&](int var, int rem) {
    if (var == nvars - 1) {
      cur[static_cast<std::size_t>(var)] = rem;
      out.push_back(cur);
      return;
    }
    for (int e = rem; e >= 0; --e) {
      cur[static_cast<std::size_t>(var)] = e;
      rec(var + 1, rem - e);
    }
    cur[static_cast<std::size_t>(var)] = 0;
  };
  if (k < 0) return out;
  rec(0, k);
  return out;
}

class HomPoly {
public:
  HomPoly() = default;

  static HomPoly from_terms(int nvars, std::vector<Term> terms, bool allow_zero = false) {
    std::map<Expo, cplx> acc;
    int degree = -1;
    for (auto& t : terms) {
      if (static_cast<int>(t.e.size()) != nvars) fail_validation("polynomial term has wrong variable count");
      int d = expo_degree(t.e);
      for (int v : t.e)
        if (v < 0) fail_validation("negative exponent in polynomial term");
      if (degree < 0) degree = d;
      if (d != degree) fail_validation("polynomial is not homogeneous");
      acc[t.e] += t.c;
    }
    HomPoly p;
    p.nvars_ = nvars;
    p.degree_ = std::max(degree, 0);
    for (auto& [e, c] : acc)
      if (c != cplx(0.0, 0.0)) p.terms_.push_back({e, c});
    // grlex descending, so the first term is the pivot monomial.
    std::sort(p.terms_.begin(), p.terms_.end(), [](const Term& a, const Term& b) { return grlex_less(b.e, a.e); });
    if (p.terms_.empty() && !allow_zero) fail_validation("polynomial is identically zero");
    return p;
  }

  int nvars() const { return nvars_; }
  int degree() const { return degree_; }
  bool is_zero() const { return terms_.empty(); }
  const std::vector<Term>& terms() const { return terms_; }

  const Term& pivot() const {
    if (terms_.empty()) fail_validation("zero polynomial has no pivot monomial");
    return terms_.front();
  }

  double coef_scale() const {
    double s = 0.0;
    for (const auto& t : terms_) s += std::abs(t.c);
    return s;
  }

  cplx eval(const VecC& z) const {
    cplx acc(0.0, 0.0);
    for (const auto& t : terms_) {
      cplx m = t.c;
      for (int v = 0; v < nvars_; ++v) {
        cplx zv = z[v];
        for (int k = 0; k < t.e[static_cast<std::size_t>(v)]; ++k) m *= zv;
      }
      acc += m;
    }
    return acc;
  }

  HomPoly partial(int var) const {
    std::vector<Term> out;
    for (const auto& t : terms_) {
      int e = t.e[static_cast<std::size_t>(var)];
      if (e == 0) continue;
      Term d = t;
      d.c *= static_cast<double>(e);
      d.e[static_cast<std::size_t>(var)] = e - 1;
      out.push_back(std::move(d));
    }
    return from_terms(nvars_, std::move(out), /*allow_zero=*/true);
  }

  // F(A z): substitute each variable by the corresponding row of A applied to
  // the new variables. Used by the generic-coordinate-change fallback.
  HomPoly compose_linear(const MatC& A) const {
    if (A.rows() != nvars_ || A.cols() != nvars_) fail_validation("coordinate change has wrong shape");
    using PMap = std::map<Expo, cplx>;
    auto mul = [this](const PMap& a, const PMap& b) {
      PMap r;
      for (const auto& [ea, ca] : a)
        for (const auto& [eb, cb] : b) {
          Expo e(ea);
          for (std::size_t i = 0; i < e.size(); ++i) e[i] += eb[i];
          r[e] += ca * cb;
        }
      return r;
    };
    std::vector<PMap> linears(static_cast<std::size_t>(nvars_));
    for (int i = 0; i < nvars_; ++i) {
      for (int j = 0; j < nvars_; ++j) {
        if (A(i, j) == cplx(0.0, 0.0)) continue;
        Expo e(static_cast<std::size_t>(nvars_), 0);
        e[static_cast<std::size_t>(j)] = 1;
        linears[static_cast<std::size_t>(i)][e] = A(i, j);
      }
    }
    PMap total;
    for (const auto& t : terms_) {
      PMap term;
      term[Expo(static_cast<std::size_t>(nvars_), 0)] = t.c;
      for (int v = 0; v < nvars_; ++v)
        for (int k = 0; k < t.e[static_cast<std::size_t>(v)]; ++k) term = mul(term, linears[static_cast<std::size_t>(v)]);
      for (const auto& [e, c] : term) total[e] += c;
    }
    std::vector<Term> out;
    for (const auto& [e, c] : total) out.push_back({e, c});
    return from_terms(nvars_, std::move(out));
  }

private:
  int nvars_ = 0;
  int degree_ = 0;
  std::vector<Term> terms_;
};

// ---------------------------------------------------------------------------
// Text parser. Variables are single letters x,y,z,w,v,u (indices 0..5);
// exponents accept both ^k and Unicode superscripts; coefficients accept
// decimals, i, and parenthesised complex numbers like (1+2i).

namespace detail {

struct PolyLexer {
  enum class Kind { num, imag, var, pow, mul, plus, minus, lparen, rparen, super, end };
  struct Tok {
    Kind kind;
    double num = 0.0;
    int ivalue = 0;
  };

  explicit PolyLexer(const std::string& s) : s_(s) {}

  Tok next() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ >= s_.size()) return {Kind::end};
    char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      pos_ += static_cast<std::size_t>(end - begin);
      return {Kind::num, v};
    }
    if (auto sup = read_superscript()) return {Kind::super, 0.0, *sup};
    ++pos_;
    switch (c) {
      case '+': return {Kind::plus};
      case '-': return {Kind::minus};
      case '*': return {Kind::mul};
      case '^': return {Kind::pow};
      case '(': return {Kind::lparen};
      case ')': return {Kind::rparen};
      case 'i': case 'I': return {Kind::imag};
      default: break;
    }
    static const std::string vars = "xyzwvu";
    auto idx = vars.find(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (idx != std::string::npos) return {Kind::var, 0.0, static_cast<int>(idx)};
    fail_validation(std::string("unexpected character '") + c + "' in polynomial");
  }

private:
  // Returns the integer spelled by a run of Unicode superscript digits, if any.
  std::optional<int> read_superscript() {
    int value = 0;
    bool any = false;
    while (pos_ < s_.size()) {
      int d = -1;
      unsigned char b0 = static_cast<unsigned char>(s_[pos_]);
      if (b0 == 0xC2 && pos_ + 1 < s_.size()) {
        unsigned char b1 = static_cast<unsigned char>(s_[pos_ + 1]);
        if (b1 == 0xB9) d = 1;
        else if (b1 == 0xB2) d = 2;
        else if (b1 == 0xB3) d = 3;
        if (d >= 0) pos_ += 2;
      } else if (b0 == 0xE2 && pos_ + 2 < s_.size() && static_cast<unsigned char>(s_[pos_ + 1]) == 0x81) {
        unsigned char b2 = static_cast<unsigned char>(s_[pos_ + 2]);
        if (b2 == 0xB0 || (b2 >= 0xB4 && b2 <= 0xB9)) {
          d = (b2 == 0xB0) ? 0 : static_cast<int>(b2 - 0xB0);
          pos_ += 3;
        }
      }
      if (d < 0) break;
      value = value * 10 + d;
      any = true;
    }
    if (!any) return std::nullopt;
    return value;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline HomPoly parse_polynomial(const std::string& text, std::optional<int> nvars_override = std::nullopt) {
  using Lex = detail::PolyLexer;
  Lex lex(text);
  Lex::Tok tok = lex.next();

  auto expect_int = [&]() {
    if (tok.kind != Lex::Kind::num || tok.num != static_cast<double>(static_cast<int>(tok.num)))
      fail_validation("expected integer exponent in polynomial");
    int v = static_cast<int>(tok.num);
    tok = lex.next();
    return v;
  };

  // Parenthesised complex constant: (a), (a+bi), (a-bi), (bi).
  auto parse_complex_paren = [&]() {
    cplx acc(0.0, 0.0);
    double sign = 1.0;
    bool done = false;
    while (!done) {
      switch (tok.kind) {
        case Lex::Kind::plus: sign = 1.0; tok = lex.next(); break;
        case Lex::Kind::minus: sign = -sign; tok = lex.next(); break;
        case Lex::Kind::num: {
          double v = sign * tok.num;
          tok = lex.next();
          if (tok.kind == Lex::Kind::imag) {
            acc += cplx(0.0, v);
            tok = lex.next();
          } else {
            acc += cplx(v, 0.0);
          }
          sign = 1.0;
          break;
        }
        case Lex::Kind::imag: acc += cplx(0.0, sign); sign = 1.0; tok = lex.next(); break;
        case Lex::Kind::rparen: done = true; tok = lex.next(); break;
        default: fail_validation("malformed complex coefficient in polynomial");
      }
    }
    return acc;
  };

  std::vector<Term> terms;
  int max_var = -1;
  double sign = 1.0;

  Expo e(6, 0);
  cplx coef(1.0, 0.0);
  bool term_open = false;

  auto flush_term = [&]() {
    if (!term_open) return;
    Term t;
    t.e = e;
    t.c = coef * sign;
    terms.push_back(std::move(t));
    e.assign(6, 0);
    coef = cplx(1.0, 0.0);
    term_open = false;
  };

  while (tok.kind != Lex::Kind::end) {
    switch (tok.kind) {
      case Lex::Kind::plus: {
        bool had_term = term_open;
        flush_term();
        if (had_term) sign = 1.0;
        tok = lex.next();
        break;
      }
      case Lex::Kind::minus: {
        bool had_term = term_open;
        flush_term();
        sign = had_term ? -1.0 : -sign;
        tok = lex.next();
        break;
      }
      case Lex::Kind::mul:
        tok = lex.next();
        break;
      case Lex::Kind::num:
        coef *= tok.num;
        term_open = true;
        tok = lex.next();
        break;
      case Lex::Kind::imag:
        coef *= cplx(0.0, 1.0);
        term_open = true;
        tok = lex.next();
        break;
      case Lex::Kind::lparen:
        tok = lex.next();
        coef *= parse_complex_paren();
        term_open = true;
        break;
      case Lex::Kind::var: {
        int v = tok.ivalue;
        max_var = std::max(max_var, v);
        tok = lex.next();
        int exp = 1;
        if (tok.kind == Lex::Kind::pow) {
          tok = lex.next();
          exp = expect_int();
        } else if (tok.kind == Lex::Kind::super) {
          exp = tok.ivalue;
          tok = lex.next();
        }
        e[static_cast<std::size_t>(v)] += exp;
        term_open = true;
        break;
      }
      case Lex::Kind::super:
        fail_validation("superscript exponent without a variable");
      case Lex::Kind::rparen:
        fail_validation("unmatched ')' in polynomial");
      case Lex::Kind::pow:
        fail_validation("'^' without a variable in polynomial");
      case Lex::Kind::end:
        break;
    }
  }
  flush_term();

  if (max_var < 0) fail_validation("polynomial has no variables");
  int nvars = max_var + 1;
  if (nvars_override) {
    if (*nvars_override < nvars) fail_validation("ambient dimension smaller than variables used");
    nvars = *nvars_override;
  }
  for (auto& t : terms) t.e.resize(static_cast<std::size_t>(nvars), 0);
  return HomPoly::from_terms(nvars, std::move(terms));
}

}  // namespace kei
