#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "toggle/rng.hpp"
#include "toggle/stl.hpp"

using namespace toggle;

namespace {

InferenceSignal channel_signal(const std::vector<std::string>& names,
                               const std::vector<std::vector<double>>& per_channel) {
  InferenceSignal s;
  s.prompt_id = "p";
  s.channels = names;
  size_t horizon = per_channel.at(0).size();
  s.values.assign(horizon, std::vector<double>(names.size(), 0.0));
  for (size_t c = 0; c < names.size(); ++c)
    for (size_t t = 0; t < horizon; ++t) s.values[t][c] = per_channel[c][t];
  return s;
}

AffineExpr channel_expr(const std::string& name, double coeff = 1.0, double constant = 0.0) {
  AffineExpr e;
  e.constant = constant;
  e.terms = {{name, coeff}};
  return e;
}

// Independent recursive evaluator used as the oracle.
double brute_force(const FormulaPtr& phi, const InferenceSignal& sigma, int t) {
  switch (phi->kind) {
    case Formula::Kind::Predicate:
      return phi->expr.eval(sigma, t);
    case Formula::Kind::Not:
      return -brute_force(phi->lhs, sigma, t);
    case Formula::Kind::And:
      return std::min(brute_force(phi->lhs, sigma, t), brute_force(phi->rhs, sigma, t));
    case Formula::Kind::Or:
      return std::max(brute_force(phi->lhs, sigma, t), brute_force(phi->rhs, sigma, t));
    case Formula::Kind::Always: {
      int end = phi->end == Formula::kHorizonEnd ? sigma.horizon() : phi->end;
      double best = std::numeric_limits<double>::infinity();
      for (int u = t - 1 + phi->begin; u <= t - 1 + end; ++u)
        best = std::min(best, brute_force(phi->lhs, sigma, u));
      return best;
    }
  }
  return 0.0;
}

FormulaPtr random_formula(Rng& rng, int depth, const std::vector<std::string>& channels,
                          int horizon) {
  int kind = depth == 0 ? 0 : rng.uniform_int(5);
  switch (kind) {
    case 1:
      return negation(random_formula(rng, depth - 1, channels, horizon));
    case 2:
      return conjunction(random_formula(rng, depth - 1, channels, horizon),
                         random_formula(rng, depth - 1, channels, horizon));
    case 3:
      return disjunction(random_formula(rng, depth - 1, channels, horizon),
                         random_formula(rng, depth - 1, channels, horizon));
    case 4: {
      int a = 1 + rng.uniform_int(horizon);
      int b = a + rng.uniform_int(horizon - a + 1);
      // Nested temporal operators would shift sub-windows past the horizon,
      // so the body of a random Always is a plain predicate.
      AffineExpr e;
      e.constant = rng.uniform() * 2 - 1;
      e.terms = {{channels[static_cast<size_t>(rng.uniform_int(static_cast<int>(channels.size())))],
                  rng.uniform() * 2 - 1}};
      return always(a, b, predicate(e));
    }
    default: {
      AffineExpr e;
      e.constant = rng.uniform() * 2 - 1;
      int n_terms = 1 + rng.uniform_int(3);
      for (int i = 0; i < n_terms; ++i)
        e.terms.emplace_back(
            channels[static_cast<size_t>(rng.uniform_int(static_cast<int>(channels.size())))],
            rng.uniform() * 2 - 1);
      return predicate(e);
    }
  }
}

}  // namespace

TEST_CASE("always window minimum") {
  auto sig = channel_signal({"x"}, {{0.5, 0.2, 0.7}});
  auto phi = always(1, 3, predicate(channel_expr("x")));
  CHECK(robustness(phi, sig, 1) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("marginal predicate gives zero robustness") {
  auto sig = channel_signal({"x"}, {{0.0}});
  CHECK(robustness(predicate(channel_expr("x")), sig, 1) == 0.0);
}

TEST_CASE("conjunction of two windows") {
  auto sig = channel_signal({"x", "y"}, {{0.4, 0.1}, {0.3, 0.5}});
  auto phi = conjunction(always(1, 2, predicate(channel_expr("x"))),
                         always(1, 2, predicate(channel_expr("y"))));
  CHECK(robustness(phi, sig, 1) == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("engine matches the brute-force oracle on random formulas") {
  Rng rng(20240801);
  std::vector<std::string> channels = {"c0", "c1", "c2", "c3", "c4", "c5"};
  for (int trial = 0; trial < 300; ++trial) {
    int horizon = 1 + rng.uniform_int(20);
    std::vector<std::vector<double>> per_channel(channels.size());
    for (auto& col : per_channel)
      for (int t = 0; t < horizon; ++t) col.push_back(rng.uniform() * 4 - 2);
    auto sig = channel_signal(channels, per_channel);
    auto phi = random_formula(rng, 4, channels, horizon);
    CHECK(std::abs(robustness(phi, sig, 1) - brute_force(phi, sig, 1)) <= 1e-12);
  }
}

TEST_CASE("sign soundness: positive robustness implies boolean satisfaction") {
  // For Always(pred) the boolean check is per-step threshold comparison.
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    int horizon = 1 + rng.uniform_int(10);
    std::vector<double> xs;
    for (int t = 0; t < horizon; ++t) xs.push_back(rng.uniform() * 2 - 1);
    auto sig = channel_signal({"x"}, {xs});
    auto phi = always(1, Formula::kHorizonEnd, predicate(channel_expr("x")));
    double rho = robustness(phi, sig, 1);
    bool all_nonneg = std::all_of(xs.begin(), xs.end(), [](double v) { return v >= 0; });
    bool any_neg = std::any_of(xs.begin(), xs.end(), [](double v) { return v < 0; });
    if (rho > 0) CHECK(all_nonneg);
    if (rho < 0) CHECK(any_neg);
  }
}

TEST_CASE("monotonicity: raising a channel never lowers positive-coefficient robustness") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    int horizon = 1 + rng.uniform_int(8);
    std::vector<double> xs, ys;
    for (int t = 0; t < horizon; ++t) {
      xs.push_back(rng.uniform() * 2 - 1);
      ys.push_back(xs.back() + rng.uniform());  // pointwise >=
    }
    auto phi = always(1, Formula::kHorizonEnd, predicate(channel_expr("x", 1.0, -0.25)));
    double lo = robustness(phi, channel_signal({"x"}, {xs}), 1);
    double hi = robustness(phi, channel_signal({"x"}, {ys}), 1);
    CHECK(hi >= lo);
  }
}

TEST_CASE("window restriction: shrinking the window never lowers the minimum") {
  auto sig = channel_signal({"x"}, {{0.5, -0.3, 0.9, 0.1}});
  double full = robustness(always(1, 4, predicate(channel_expr("x"))), sig, 1);
  double part = robustness(always(3, 4, predicate(channel_expr("x"))), sig, 1);
  CHECK(part >= full);
  CHECK(full == doctest::Approx(-0.3));
  CHECK(part == doctest::Approx(0.1));
}

TEST_CASE("argmin step is the earliest critical step") {
  auto sig = channel_signal({"x"}, {{0.5, 0.2, 0.2, 0.7}});
  auto rv = robustness_with_argmin(always(1, 4, predicate(channel_expr("x"))), sig, 1);
  CHECK(rv.rho == doctest::Approx(0.2));
  CHECK(rv.argmin_step == 2);
}

TEST_CASE("unknown channel raises an error") {
  auto sig = channel_signal({"x"}, {{0.5}});
  CHECK_THROWS_AS(robustness(predicate(channel_expr("missing")), sig, 1), StlError);
}

TEST_CASE("phi1 examples") {
  PredicateThresholds th;  // epsilon = 0.25
  SUBCASE("identical distributions") {
    auto sig = channel_signal({"jsd"}, {{0.0, 0.0, 0.0}});
    CHECK(robustness(build_phi1(th, 3), sig, 1) == doctest::Approx(0.25));
  }
  SUBCASE("violation") {
    auto sig = channel_signal({"jsd"}, {{0.1, 0.3}});
    CHECK(robustness(build_phi1(th, 2), sig, 1) == doctest::Approx(-0.05));
  }
  SUBCASE("boundary") {
    auto sig = channel_signal({"jsd"}, {{0.25}});
    CHECK(robustness(build_phi1(th, 1), sig, 1) == doctest::Approx(0.0));
  }
}

TEST_CASE("phi2 examples") {
  PredicateThresholds th;  // delta = 0.70
  SUBCASE("self similarity") {
    auto sig = channel_signal({"attn_sim_1"}, {{1.0, 1.0}});
    CHECK(robustness(build_phi2(th, 2, 1), sig, 1) == doctest::Approx(0.30));
  }
  SUBCASE("two-layer minima") {
    auto sig = channel_signal({"attn_sim_1", "attn_sim_2"}, {{0.9, 0.95}, {0.8, 0.75}});
    CHECK(robustness(build_phi2(th, 2, 2), sig, 1) == doctest::Approx(0.05));
  }
  SUBCASE("violating layer dominates the conjunction") {
    auto sig = channel_signal({"attn_sim_1", "attn_sim_2"}, {{0.9, 0.9}, {0.60, 0.9}});
    CHECK(robustness(build_phi2(th, 2, 2), sig, 1) == doctest::Approx(-0.10));
  }
}

TEST_CASE("phi3 examples") {
  PredicateThresholds th;  // gamma = 0.70
  auto phi = [&](int h) { return build_phi3(th, h); };
  CHECK(robustness(phi(2), channel_signal({"emb_sim"}, {{1.0, 1.0}}), 1) == doctest::Approx(0.30));
  CHECK(robustness(phi(3), channel_signal({"emb_sim"}, {{0.8, 0.72, 0.95}}), 1) ==
        doctest::Approx(0.02));
  CHECK(robustness(phi(1), channel_signal({"emb_sim"}, {{0.70}}), 1) == doctest::Approx(0.0));
}

TEST_CASE("phi4 examples") {
  PredicateThresholds th;  // tau = 0.70
  auto phi = [&](int h) { return build_phi4(th, h); };
  CHECK(robustness(phi(2), channel_signal({"fact_ratio"}, {{1.0, 1.0}}), 1) ==
        doctest::Approx(0.30));
  CHECK(robustness(phi(2), channel_signal({"fact_ratio"}, {{0.9, 0.65}}), 1) ==
        doctest::Approx(-0.05));
  CHECK(robustness(phi(1), channel_signal({"fact_ratio"}, {{0.70}}), 1) == doctest::Approx(0.0));
}

TEST_CASE("dataset minimum robustness") {
  PredicateThresholds th;
  auto phi = build_phi3(th, Formula::kHorizonEnd);
  SignalBundle bundle;
  bundle.max_context = 4;
  bundle.signals = {channel_signal({"emb_sim"}, {{0.9, 0.95}}),    // rho = 0.2
                    channel_signal({"emb_sim"}, {{0.8, 0.60}})};   // rho = -0.1
  bundle.signals[1].prompt_id = "q";
  CHECK(min_robustness_over_dataset(phi, bundle) == doctest::Approx(-0.1));

  SignalBundle single;
  single.max_context = 4;
  single.signals = {bundle.signals[0]};
  CHECK(min_robustness_over_dataset(phi, single) == doctest::Approx(0.2));
}

TEST_CASE("feasibility check") {
  CHECK(check_feasibility({0.01, 0.0, 0.2, 0.05}, {0, 0, 0, 0}));
  CHECK_FALSE(check_feasibility({0.01, -1e-9, 0.2, 0.05}, {0, 0, 0, 0}));
  CHECK(check_feasibility({0.15, 1, 1, 1}, {0.1, 0, 0, 0}));
  CHECK_THROWS_AS(check_feasibility({0.1}, {0, 0}), StlError);
}

TEST_CASE("threshold validation rejects values outside (0,1]") {
  PredicateThresholds th;
  th.tau = 1.5;
  CHECK_THROWS_AS(validate_thresholds(th), StlError);
  th.tau = 0.7;
  th.epsilon = 0.0;
  CHECK_THROWS_AS(validate_thresholds(th), StlError);
}

TEST_CASE("spec parsing: defaults and built-in formulas") {
  SpecSet spec = parse_spec(
      "thresholds { epsilon=0.25 delta=0.70 gamma=0.70 tau=0.70 rho_th=0 }\n");
  CHECK(spec.n_properties() == 4);
  CHECK(spec.thresholds.delta == doctest::Approx(0.70));
  auto formulas = spec.formulas(2);
  REQUIRE(formulas.size() == 4);
  // identity-like signals satisfy all four
  auto sig = channel_signal({"jsd", "attn_sim_1", "attn_sim_2", "emb_sim", "fact_ratio"},
                            {{0.0, 0.0}, {1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}});
  CHECK(robustness(formulas[0], sig, 1) == doctest::Approx(0.25));
  CHECK(robustness(formulas[1], sig, 1) == doctest::Approx(0.30));
  CHECK(robustness(formulas[2], sig, 1) == doctest::Approx(0.30));
  CHECK(robustness(formulas[3], sig, 1) == doctest::Approx(0.30));
}

TEST_CASE("spec parsing: out-of-range threshold is an error") {
  CHECK_THROWS_AS(parse_spec("thresholds { tau=1.5 }\n"), StlError);
}

TEST_CASE("spec parsing: extra property extends the formula list") {
  SpecSet spec = parse_spec(
      "thresholds { epsilon=0.25 delta=0.7 gamma=0.7 tau=0.7 rho_th=0 }\n"
      "property \"my_prop\" = always[1,T'](my_channel - 0.5 >= 0)\n");
  CHECK(spec.n_properties() == 5);
  auto formulas = spec.formulas(1);
  REQUIRE(formulas.size() == 5);
  auto sig = channel_signal({"my_channel"}, {{0.9, 0.6, 0.8}});
  CHECK(robustness(formulas[4], sig, 1) == doctest::Approx(0.1));
  CHECK(spec.property_names()[4] == "my_prop");
}

TEST_CASE("property formula parser handles affine expressions") {
  auto phi = parse_property_formula("always[2,3](2*x - y + 0.5 >= 0)");
  auto sig = channel_signal({"x", "y"}, {{9.0, 0.1, 0.3}, {0.0, 0.4, 0.2}});
  // steps 2,3: 2*0.1-0.4+0.5 = 0.3 ; 2*0.3-0.2+0.5 = 0.9 -> min 0.3
  CHECK(robustness(phi, sig, 1) == doctest::Approx(0.3));
}
