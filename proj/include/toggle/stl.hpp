#pragma once

#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "toggle/signal.hpp"

namespace toggle {

struct StlError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Affine combination of signal channels plus a constant; the atomic
// predicate is expr >= 0 and its robustness is the expression's value.
struct AffineExpr {
  double constant = 0.0;
  std::vector<std::pair<std::string, double>> terms;  // (channel, coefficient)

  double eval(const InferenceSignal& sigma, int t) const;
  std::string to_string() const;
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

// Interval end equal to kHorizonEnd means "T' of the signal under evaluation".
struct Formula {
  enum class Kind { Predicate, Not, And, Or, Always };
  static constexpr int kHorizonEnd = -1;

  Kind kind = Kind::Predicate;
  AffineExpr expr;        // Predicate
  FormulaPtr lhs, rhs;    // Not uses lhs; And/Or use both
  int begin = 1;          // Always
  int end = 1;            // Always; may be kHorizonEnd
};

FormulaPtr predicate(AffineExpr expr);
FormulaPtr negation(FormulaPtr f);
FormulaPtr conjunction(FormulaPtr a, FormulaPtr b);
FormulaPtr disjunction(FormulaPtr a, FormulaPtr b);
FormulaPtr always(int begin, int end, FormulaPtr f);

std::set<std::string> collect_channels(const FormulaPtr& f);

// Per-property predicate performance thresholds, each in (0, 1].
struct PredicateThresholds {
  double epsilon = 0.25;  // JSD tolerance
  double delta = 0.70;    // attention-similarity floor
  double gamma = 0.70;    // embedding-similarity floor
  double tau = 0.70;      // factual-ratio floor
};

void validate_thresholds(const PredicateThresholds& th);

struct RobustnessThresholds {
  std::vector<double> rho_th;  // one non-negative entry per property
};

struct RobustnessValue {
  double rho = 0.0;
  int argmin_step = 1;  // earliest step attaining the critical value
};

// Quantitative semantics: min for And/window, max for Or, negation for Not;
// a predicate's robustness at t is its expression value at t. Always windows
// are absolute 1-based steps when evaluated at t = 1 (general t shifts the
// window by t - 1).
RobustnessValue robustness_with_argmin(const FormulaPtr& phi, const InferenceSignal& sigma, int t);
double robustness(const FormulaPtr& phi, const InferenceSignal& sigma, int t);

// Built-in linguistic-property formulas.
FormulaPtr build_phi1(const PredicateThresholds& th, int horizon);                // jsd
FormulaPtr build_phi2(const PredicateThresholds& th, int horizon, int n_layers);  // attn_sim_l
FormulaPtr build_phi3(const PredicateThresholds& th, int horizon);                // emb_sim
FormulaPtr build_phi4(const PredicateThresholds& th, int horizon);                // fact_ratio

double min_robustness_over_dataset(const FormulaPtr& phi, const SignalBundle& bundle);

bool check_feasibility(const std::vector<double>& rho_min, const std::vector<double>& rho_th);

// A parsed STL specification: thresholds, per-property robustness thresholds
// and optional user-defined extra formulas. Formula instantiation is deferred
// so per-prompt horizons are supported (extras may reference T').
struct SpecSet {
  PredicateThresholds thresholds;
  double rho_th_scalar = 0.0;
  std::vector<std::pair<std::string, FormulaPtr>> extras;  // (name, formula)

  int n_properties() const { return 4 + static_cast<int>(extras.size()); }
  std::vector<std::string> property_names() const;
  std::vector<double> rho_th_vector() const;

  // phi1..phi4 followed by extras, with Always ends resolved lazily
  // (kHorizonEnd) so they adapt to each signal's horizon.
  std::vector<FormulaPtr> formulas(int n_layers) const;
};

// Grammar:
//   thresholds { epsilon=0.25 delta=0.70 gamma=0.70 tau=0.70 rho_th=0 }
//   property "<name>" = always[a,b]( <affine-expr> >= 0 )
// where b may be the literal T' and affine-expr uses channel names, numeric
// literals and + - *.
SpecSet parse_spec(const std::string& text);

// Parses just the affine-expression / always form on the right of a
// property declaration (shared with the run-config parser).
FormulaPtr parse_property_formula(const std::string& text);

}  // namespace toggle
