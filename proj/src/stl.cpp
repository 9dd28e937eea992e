#include "toggle/stl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <sstream>

namespace toggle {

double AffineExpr::eval(const InferenceSignal& sigma, int t) const {
  double v = constant;
  for (const auto& [name, coeff] : terms) {
    int idx = sigma.channel_index(name);
    if (idx < 0) throw StlError("unknown channel '" + name + "' in signal '" + sigma.prompt_id + "'");
    v += coeff * sigma.at(t, idx);
  }
  return v;
}

std::string AffineExpr::to_string() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& [name, coeff] : terms) {
    if (!first) out << (coeff < 0 ? " - " : " + ");
    else if (coeff < 0) out << "-";
    first = false;
    double a = std::abs(coeff);
    if (a != 1.0) out << a << "*";
    out << name;
  }
  if (constant != 0.0 || first) {
    if (!first) out << (constant < 0 ? " - " : " + ");
    out << std::abs(constant);
  }
  return out.str();
}

FormulaPtr predicate(AffineExpr expr) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::Predicate;
  f->expr = std::move(expr);
  return f;
}

FormulaPtr negation(FormulaPtr inner) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::Not;
  f->lhs = std::move(inner);
  return f;
}

FormulaPtr conjunction(FormulaPtr a, FormulaPtr b) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::And;
  f->lhs = std::move(a);
  f->rhs = std::move(b);
  return f;
}

FormulaPtr disjunction(FormulaPtr a, FormulaPtr b) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::Or;
  f->lhs = std::move(a);
  f->rhs = std::move(b);
  return f;
}

FormulaPtr always(int begin, int end, FormulaPtr inner) {
  if (begin < 1) throw StlError("always interval must start at step >= 1");
  if (end != Formula::kHorizonEnd && end < begin)
    throw StlError("always interval bounds must satisfy a <= b");
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::Always;
  f->begin = begin;
  f->end = end;
  f->lhs = std::move(inner);
  return f;
}

static void collect_channels_into(const FormulaPtr& f, std::set<std::string>& out) {
  if (!f) return;
  if (f->kind == Formula::Kind::Predicate)
    for (const auto& [name, _] : f->expr.terms) out.insert(name);
  collect_channels_into(f->lhs, out);
  collect_channels_into(f->rhs, out);
}

std::set<std::string> collect_channels(const FormulaPtr& f) {
  std::set<std::string> out;
  collect_channels_into(f, out);
  return out;
}

void validate_thresholds(const PredicateThresholds& th) {
  auto check = [](double v, const char* name) {
    if (!(v > 0.0 && v <= 1.0))
      throw StlError(std::string("threshold ") + name + " must lie in (0, 1]");
  };
  check(th.epsilon, "epsilon");
  check(th.delta, "delta");
  check(th.gamma, "gamma");
  check(th.tau, "tau");
}

RobustnessValue robustness_with_argmin(const FormulaPtr& phi, const InferenceSignal& sigma, int t) {
  if (!phi) throw StlError("null formula");
  if (t < 1 || t > sigma.horizon())
    throw StlError("evaluation step " + std::to_string(t) + " outside [1, T']");
  switch (phi->kind) {
    case Formula::Kind::Predicate:
      return {phi->expr.eval(sigma, t), t};
    case Formula::Kind::Not: {
      RobustnessValue v = robustness_with_argmin(phi->lhs, sigma, t);
      return {-v.rho, v.argmin_step};
    }
    case Formula::Kind::And: {
      RobustnessValue a = robustness_with_argmin(phi->lhs, sigma, t);
      RobustnessValue b = robustness_with_argmin(phi->rhs, sigma, t);
      if (b.rho < a.rho || (b.rho == a.rho && b.argmin_step < a.argmin_step)) return b;
      return a;
    }
    case Formula::Kind::Or: {
      RobustnessValue a = robustness_with_argmin(phi->lhs, sigma, t);
      RobustnessValue b = robustness_with_argmin(phi->rhs, sigma, t);
      if (b.rho > a.rho || (b.rho == a.rho && b.argmin_step < a.argmin_step)) return b;
      return a;
    }
    case Formula::Kind::Always: {
      int end = phi->end == Formula::kHorizonEnd ? sigma.horizon() : phi->end;
      int lo = t - 1 + phi->begin;
      int hi = t - 1 + end;
      if (lo < 1 || hi > sigma.horizon())
        throw StlError("always window [" + std::to_string(lo) + "," + std::to_string(hi) +
                       "] exceeds signal horizon " + std::to_string(sigma.horizon()));
      RobustnessValue best;
      bool first = true;
      for (int s = lo; s <= hi; ++s) {
        RobustnessValue v = robustness_with_argmin(phi->lhs, sigma, s);
        if (first || v.rho < best.rho) {
          best = v;
          first = false;
        }
      }
      return best;
    }
  }
  throw StlError("unreachable formula kind");
}

double robustness(const FormulaPtr& phi, const InferenceSignal& sigma, int t) {
  return robustness_with_argmin(phi, sigma, t).rho;
}

FormulaPtr build_phi1(const PredicateThresholds& th, int horizon) {
  AffineExpr e;
  e.constant = th.epsilon;
  e.terms = {{"jsd", -1.0}};
  return always(1, horizon, predicate(std::move(e)));
}

FormulaPtr build_phi2(const PredicateThresholds& th, int horizon, int n_layers) {
  if (n_layers < 1) throw StlError("build_phi2 requires n_layers >= 1");
  FormulaPtr acc;
  for (int l = 1; l <= n_layers; ++l) {
    AffineExpr e;
    e.constant = -th.delta;
    e.terms = {{"attn_sim_" + std::to_string(l), 1.0}};
    FormulaPtr layer = always(1, horizon, predicate(std::move(e)));
    acc = acc ? conjunction(acc, layer) : layer;
  }
  return acc;
}

FormulaPtr build_phi3(const PredicateThresholds& th, int horizon) {
  AffineExpr e;
  e.constant = -th.gamma;
  e.terms = {{"emb_sim", 1.0}};
  return always(1, horizon, predicate(std::move(e)));
}

FormulaPtr build_phi4(const PredicateThresholds& th, int horizon) {
  AffineExpr e;
  e.constant = -th.tau;
  e.terms = {{"fact_ratio", 1.0}};
  return always(1, horizon, predicate(std::move(e)));
}

double min_robustness_over_dataset(const FormulaPtr& phi, const SignalBundle& bundle) {
  if (bundle.signals.empty()) throw StlError("empty signal bundle");
  double best = 0.0;
  bool first = true;
  for (const auto& sigma : bundle.signals) {
    double rho = robustness(phi, sigma, 1);
    if (first || rho < best) {
      best = rho;
      first = false;
    }
  }
  return best;
}

bool check_feasibility(const std::vector<double>& rho_min, const std::vector<double>& rho_th) {
  if (rho_min.size() != rho_th.size())
    throw StlError("feasibility check: property index sets differ (" +
                   std::to_string(rho_min.size()) + " vs " + std::to_string(rho_th.size()) + ")");
  for (size_t i = 0; i < rho_min.size(); ++i)
    if (!(rho_min[i] >= rho_th[i])) return false;
  return true;
}

std::vector<std::string> SpecSet::property_names() const {
  std::vector<std::string> names = {"phi1_seq_coh", "phi2_long_dep", "phi3_ctx_cons",
                                    "phi4_fact_acc"};
  for (const auto& [name, _] : extras) names.push_back(name);
  return names;
}

std::vector<double> SpecSet::rho_th_vector() const {
  return std::vector<double>(static_cast<size_t>(n_properties()), rho_th_scalar);
}

std::vector<FormulaPtr> SpecSet::formulas(int n_layers) const {
  // kHorizonEnd makes each Always adapt to the signal's own horizon.
  std::vector<FormulaPtr> out;
  out.push_back(build_phi1(thresholds, 1));
  out.push_back(build_phi2(thresholds, 1, n_layers));
  out.push_back(build_phi3(thresholds, 1));
  out.push_back(build_phi4(thresholds, 1));
  for (auto& f : out) {
    // rebuild the Always ends as horizon-adaptive
    std::function<FormulaPtr(const FormulaPtr&)> adapt = [&](const FormulaPtr& g) -> FormulaPtr {
      auto h = std::make_shared<Formula>(*g);
      if (h->lhs) h->lhs = adapt(h->lhs);
      if (h->rhs) h->rhs = adapt(h->rhs);
      if (h->kind == Formula::Kind::Always) h->end = Formula::kHorizonEnd;
      return h;
    };
    f = adapt(f);
  }
  for (const auto& [_, f] : extras) out.push_back(f);
  return out;
}

// ---------------------------------------------------------------------------
// Spec grammar parser

namespace {

struct Token {
  enum class Kind { Ident, Number, String, Symbol, End };
  Kind kind = Kind::End;
  std::string text;
  double number = 0.0;
  int line = 0;
};

class Lexer {
public:
  explicit Lexer(const std::string& text) : text_(text) {}

  Token next() {
    skip_ws();
    Token tok;
    tok.line = line_;
    if (pos_ >= text_.size()) return tok;
    char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' ||
              text_[pos_] == '\''))
        ++pos_;
      tok.kind = Token::Kind::Ident;
      tok.text = text_.substr(start, pos_ - start);
      return tok;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < text_.size() &&
         std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
      size_t used = 0;
      tok.number = std::stod(text_.substr(pos_), &used);
      tok.kind = Token::Kind::Number;
      tok.text = text_.substr(pos_, used);
      pos_ += used;
      return tok;
    }
    if (c == '"') {
      size_t end = text_.find('"', pos_ + 1);
      if (end == std::string::npos) throw StlError(err("unterminated string literal"));
      tok.kind = Token::Kind::String;
      tok.text = text_.substr(pos_ + 1, end - pos_ - 1);
      pos_ = end + 1;
      return tok;
    }
    if (c == '>' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '=') {
      tok.kind = Token::Kind::Symbol;
      tok.text = ">=";
      pos_ += 2;
      return tok;
    }
    if (std::string("{}=[](),+-*").find(c) != std::string::npos) {
      tok.kind = Token::Kind::Symbol;
      tok.text = std::string(1, c);
      ++pos_;
      return tok;
    }
    throw StlError(err(std::string("unexpected character '") + c + "'"));
  }

  std::string err(const std::string& msg) const {
    return "spec line " + std::to_string(line_) + ": " + msg;
  }

private:
  void skip_ws() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& text_;
  size_t pos_ = 0;
  int line_ = 1;
};

class Parser {
public:
  explicit Parser(const std::string& text) : lex_(text) { advance(); }

  SpecSet parse() {
    SpecSet spec;
    bool saw_thresholds = false;
    while (cur_.kind != Token::Kind::End) {
      if (cur_.kind == Token::Kind::Ident && cur_.text == "thresholds") {
        advance();
        parse_thresholds(spec);
        saw_thresholds = true;
      } else if (cur_.kind == Token::Kind::Ident && cur_.text == "property") {
        advance();
        parse_property(spec);
      } else {
        throw StlError(error("expected 'thresholds' or 'property', got '" + cur_.text + "'"));
      }
    }
    if (!saw_thresholds) throw StlError("spec is missing a 'thresholds { ... }' block");
    validate_thresholds(spec.thresholds);
    if (spec.rho_th_scalar < 0.0) throw StlError("rho_th must be non-negative");
    return spec;
  }

  FormulaPtr parse_formula_only() {
    FormulaPtr f = parse_formula();
    if (cur_.kind != Token::Kind::End) throw StlError(error("trailing input after formula"));
    return f;
  }

private:
  void advance() { cur_ = lex_.next(); }

  std::string error(const std::string& msg) const {
    return "spec line " + std::to_string(cur_.line) + ": " + msg;
  }

  void expect_symbol(const std::string& s) {
    if (cur_.kind != Token::Kind::Symbol || cur_.text != s)
      throw StlError(error("expected '" + s + "', got '" + cur_.text + "'"));
    advance();
  }

  double expect_number() {
    bool neg = false;
    if (cur_.kind == Token::Kind::Symbol && cur_.text == "-") {
      neg = true;
      advance();
    }
    if (cur_.kind != Token::Kind::Number)
      throw StlError(error("expected a number, got '" + cur_.text + "'"));
    double v = cur_.number;
    advance();
    return neg ? -v : v;
  }

  void parse_thresholds(SpecSet& spec) {
    expect_symbol("{");
    while (!(cur_.kind == Token::Kind::Symbol && cur_.text == "}")) {
      if (cur_.kind != Token::Kind::Ident)
        throw StlError(error("expected threshold name, got '" + cur_.text + "'"));
      std::string key = cur_.text;
      advance();
      expect_symbol("=");
      double v = expect_number();
      if (key == "epsilon") spec.thresholds.epsilon = v;
      else if (key == "delta") spec.thresholds.delta = v;
      else if (key == "gamma") spec.thresholds.gamma = v;
      else if (key == "tau") spec.thresholds.tau = v;
      else if (key == "rho_th") spec.rho_th_scalar = v;
      else throw StlError(error("unknown threshold '" + key + "'"));
    }
    advance();  // '}'
  }

  void parse_property(SpecSet& spec) {
    if (cur_.kind != Token::Kind::String)
      throw StlError(error("expected property name string"));
    std::string name = cur_.text;
    advance();
    expect_symbol("=");
    spec.extras.emplace_back(name, parse_formula());
  }

  FormulaPtr parse_formula() {
    if (cur_.kind != Token::Kind::Ident || cur_.text != "always")
      throw StlError(error("expected 'always[a,b]( ... )', got '" + cur_.text + "'"));
    advance();
    expect_symbol("[");
    double a = expect_number();
    expect_symbol(",");
    int end = 0;
    if (cur_.kind == Token::Kind::Ident && cur_.text == "T'") {
      end = Formula::kHorizonEnd;
      advance();
    } else {
      end = static_cast<int>(expect_number());
    }
    expect_symbol("]");
    expect_symbol("(");
    AffineExpr expr = parse_affine();
    expect_symbol(">=");
    double rhs = expect_number();
    if (rhs != 0.0) throw StlError(error("predicate comparisons must be '>= 0'"));
    expect_symbol(")");
    return always(static_cast<int>(a), end, predicate(std::move(expr)));
  }

  AffineExpr parse_affine() {
    AffineExpr expr;
    double sign = 1.0;
    bool first = true;
    while (true) {
      if (!first) {
        if (cur_.kind == Token::Kind::Symbol && cur_.text == "+") {
          sign = 1.0;
          advance();
        } else if (cur_.kind == Token::Kind::Symbol && cur_.text == "-") {
          sign = -1.0;
          advance();
        } else {
          break;
        }
      } else if (cur_.kind == Token::Kind::Symbol && cur_.text == "-") {
        sign = -1.0;
        advance();
      }
      first = false;

      if (cur_.kind == Token::Kind::Number) {
        double v = cur_.number;
        advance();
        if (cur_.kind == Token::Kind::Symbol && cur_.text == "*") {
          advance();
          if (cur_.kind != Token::Kind::Ident)
            throw StlError(error("expected channel name after '*'"));
          expr.terms.emplace_back(cur_.text, sign * v);
          advance();
        } else {
          expr.constant += sign * v;
        }
      } else if (cur_.kind == Token::Kind::Ident) {
        std::string name = cur_.text;
        advance();
        double coeff = 1.0;
        if (cur_.kind == Token::Kind::Symbol && cur_.text == "*") {
          advance();
          if (cur_.kind != Token::Kind::Number)
            throw StlError(error("expected number after '*'"));
          coeff = cur_.number;
          advance();
        }
        expr.terms.emplace_back(name, sign * coeff);
      } else {
        throw StlError(error("expected a term, got '" + cur_.text + "'"));
      }
      sign = 1.0;
    }
    return expr;
  }

  Lexer lex_;
  Token cur_;
};

}  // namespace

SpecSet parse_spec(const std::string& text) { return Parser(text).parse(); }

FormulaPtr parse_property_formula(const std::string& text) {
  return Parser(text).parse_formula_only();
}

}  // namespace toggle
