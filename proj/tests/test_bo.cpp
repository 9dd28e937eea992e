#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "toggle/bo.hpp"

using namespace toggle;

namespace {

ModelArchitecture one_layer_arch() {
  ModelArchitecture arch;
  arch.style = ArchStyle::GptLike;
  arch.n_layers = 1;
  arch.hidden_dim = 16;
  arch.n_heads = 2;
  arch.vocab_size = 32;
  arch.max_context = 16;
  return arch;
}

SearchSpace small_space(std::vector<int> bits, std::vector<double> prune) {
  SearchSpace space;
  space.arch = one_layer_arch();
  space.bits = std::move(bits);
  space.prune = std::move(prune);
  return space;
}

SpecSet default_spec() { return SpecSet{}; }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

EvaluationRecord fake_record(int id, const CompressionConfig& kappa, double cost, double rho,
                             bool feasible) {
  EvaluationRecord rec;
  rec.id = id;
  rec.kappa = kappa;
  rec.cost = cost;
  rec.rho_min = {rho};
  rec.feasible = feasible;
  rec.avg_pp = 90.0;
  rec.ps_bar = {0.9};
  return rec;
}

}  // namespace

TEST_CASE("search space enumeration and encoding") {
  SearchSpace space = small_space({8, 16}, {0.0, 0.5});
  CHECK(space.n_slots() == 3);
  CHECK(space.config_count() == doctest::Approx(64.0));

  std::set<std::string> keys;
  for (unsigned long long i = 0; i < 64; ++i) keys.insert(config_key(space.config_at(i)));
  CHECK(keys.size() == 64);

  CompressionConfig kappa = space.config_at(37);
  CHECK(space.decode(space.encode(kappa)) == kappa);

  CompressionConfig ident = space.identity_config();
  for (const auto& e : ident.entries) {
    CHECK(e.bits == 16);
    CHECK(e.prune == 0.0);
  }
}

TEST_CASE("neighbors differ in exactly one coordinate step") {
  SearchSpace space = small_space({4, 8, 16}, {0.0, 0.25, 0.5});
  CompressionConfig center;
  center.entries.assign(3, {8, 0.25});
  auto nbrs = space.neighbors(center);
  CHECK(nbrs.size() == 12);  // 3 slots x 2 dims x 2 directions
  for (const auto& n : nbrs) {
    int diffs = 0;
    for (size_t s = 0; s < n.entries.size(); ++s) {
      if (n.entries[s].bits != center.entries[s].bits) ++diffs;
      if (n.entries[s].prune != center.entries[s].prune) ++diffs;
    }
    CHECK(diffs == 1);
  }
}

TEST_CASE("kappa JSON round trip") {
  SearchSpace space = small_space({2, 8, 16}, {0.0, 0.3});
  CompressionConfig kappa = space.config_at(11);
  auto j = kappa_to_json(space.arch, kappa);
  CHECK(kappa_from_json(space.arch, j) == kappa);
  CHECK(j.contains("0.attn_qkv"));
}

TEST_CASE("record JSON round trip") {
  SearchSpace space = small_space({8, 16}, {0.0});
  EvaluationRecord rec = fake_record(3, space.config_at(5), 123.5, 0.07, true);
  EvaluationRecord back = record_from_json(space.arch, record_to_json(space.arch, rec));
  CHECK(back.id == rec.id);
  CHECK(back.kappa == rec.kappa);
  CHECK(back.cost == rec.cost);
  CHECK(back.rho_min == rec.rho_min);
  CHECK(back.feasible == rec.feasible);
  CHECK(back.avg_pp == rec.avg_pp);
  CHECK(back.ps_bar == rec.ps_bar);
}

TEST_CASE("initial design is distinct, anchored and deterministic") {
  SearchSpace space = small_space({8, 16}, {0.0, 0.5});
  auto design = initial_design(space, 8, 42);
  REQUIRE(design.size() == 8);
  std::set<std::string> keys;
  for (const auto& k : design) keys.insert(config_key(k));
  CHECK(keys.size() == 8);
  CHECK(keys.count(config_key(space.identity_config())) == 1);

  auto again = initial_design(space, 8, 42);
  REQUIRE(again.size() == 8);
  for (size_t i = 0; i < design.size(); ++i) CHECK(design[i] == again[i]);

  auto other = initial_design(space, 8, 43);
  bool all_same = true;
  for (size_t i = 0; i < design.size(); ++i) all_same = all_same && design[i] == other[i];
  CHECK_FALSE(all_same);
}

TEST_CASE("initial design larger than the space is an error") {
  SearchSpace space = small_space({8, 16}, {0.0});  // 8 configs
  CHECK_THROWS_AS(initial_design(space, 9, 1), BoError);
  auto full = initial_design(space, 8, 1);
  CHECK(full.size() == 8);
}

TEST_CASE("acquisition closed form") {
  Eigen::MatrixXd X(3, 2);
  X << 0, 0, 0.5, 0.5, 1, 1;
  Eigen::VectorXd cost_y(3), rho_y(3);
  cost_y << 10, 6, 3;
  rho_y << 0.3, 0.1, -0.2;
  GpSurrogate cost_gp = GpSurrogate::fit(X, cost_y);
  GpSurrogate rho_gp = GpSurrogate::fit(X, rho_y);

  Eigen::VectorXd x(2);
  x << 0.25, 0.75;
  std::vector<double> rho_th = {0.0};

  auto rho_post = rho_gp.predict_standardized(x);
  double prob = normal_cdf((rho_post.mean - rho_gp.standardize(0.0)) / std::sqrt(rho_post.var));

  SUBCASE("without an incumbent the gate alone is returned") {
    double a = acquisition(cost_gp, {rho_gp}, x, std::nullopt, rho_th);
    CHECK(a == doctest::Approx(prob).epsilon(1e-12));
  }
  SUBCASE("with an incumbent EI multiplies the gate") {
    auto cost_post = cost_gp.predict_standardized(x);
    double ei = expected_improvement(cost_post.mean, cost_post.var, cost_gp.standardize(6.0));
    double a = acquisition(cost_gp, {rho_gp}, x, 6.0, rho_th);
    CHECK(a == doctest::Approx(ei * prob).epsilon(1e-12));
  }
  SUBCASE("impossible constraint zeroes the acquisition") {
    double a = acquisition(cost_gp, {rho_gp}, x, 6.0, {1e9});
    CHECK(a == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("acquisition at the incumbent is near zero") {
  Eigen::MatrixXd X(3, 2);
  X << 0, 0, 0.5, 0.5, 1, 1;
  Eigen::VectorXd cost_y(3), rho_y(3);
  cost_y << 10, 6, 3;
  rho_y << 0.5, 0.5, 0.5;
  GpSurrogate cost_gp = GpSurrogate::fit(X, cost_y);
  GpSurrogate rho_gp = GpSurrogate::fit(X, rho_y);
  Eigen::VectorXd best(2);
  best << 1, 1;
  double a = acquisition(cost_gp, {rho_gp}, best, 3.0, {0.0});
  CHECK(a <= 0.05);
}

TEST_CASE("propose_next forces the last unevaluated configuration") {
  SearchSpace space = small_space({8, 16}, {0.0});  // 8 configs
  OptimizerState state;
  state.space = space;
  state.rho_th = {0.0};
  for (unsigned long long i = 0; i < 7; ++i)
    state.records.push_back(
        fake_record(static_cast<int>(i), space.config_at(i), 10.0 - static_cast<double>(i),
                    0.1, true));
  CompressionConfig proposal = propose_next(state, 5);
  CHECK(config_key(proposal) == config_key(space.config_at(7)));

  CompressionConfig again = propose_next(state, 5);
  CHECK(config_key(again) == config_key(proposal));

  state.records.push_back(fake_record(7, space.config_at(7), 1.0, 0.1, true));
  CHECK_THROWS_AS(propose_next(state, 5), BoError);
}

TEST_CASE("evaluate_config on the identity and at extreme compression") {
  ModelArchitecture arch = one_layer_arch();
  ReferenceModel base = build_model(arch, 1);
  EvaluationCorpus corpus = build_corpus(base, 2, 3, 4, 2);
  SpecSet spec = default_spec();
  CostParams cost;

  EvaluationRecord ident = evaluate_config(CompressionConfig::identity(arch), base, corpus,
                                           spec, cost);
  CHECK(ident.feasible);
  REQUIRE(ident.rho_min.size() == 4);
  CHECK(ident.rho_min[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(ident.rho_min[1] == doctest::Approx(0.30).epsilon(1e-6));
  CHECK(ident.rho_min[2] == doctest::Approx(0.30).epsilon(1e-6));
  CHECK(ident.rho_min[3] == doctest::Approx(0.30).epsilon(1e-6));
  CHECK(ident.avg_pp == doctest::Approx(100.0).epsilon(1e-4));
  CHECK(ident.cost == doctest::Approx(flops_base(base, cost)));

  CompressionConfig crushed;
  crushed.entries.assign(static_cast<size_t>(arch.n_slots()), {2, 0.5});
  EvaluationRecord rec = evaluate_config(crushed, base, corpus, spec, cost);
  CHECK(std::isfinite(rec.cost));
  CHECK(std::isfinite(rec.avg_pp));
  for (double r : rec.rho_min) CHECK(std::isfinite(r));

  EvaluationRecord rec2 = evaluate_config(crushed, base, corpus, spec, cost);
  CHECK(rec.cost == rec2.cost);
  CHECK(rec.rho_min == rec2.rho_min);
  CHECK(rec.avg_pp == rec2.avg_pp);
}

TEST_CASE("run_search with budget equal to the space enumerates it") {
  ModelArchitecture arch = one_layer_arch();
  ReferenceModel base = build_model(arch, 1);
  EvaluationCorpus corpus = build_corpus(base, 2, 3, 4, 2);

  SearchSetup setup;
  setup.base = &base;
  setup.corpus = &corpus;
  setup.spec = default_spec();
  setup.space = small_space({8, 16}, {0.0});
  setup.budget = 8;
  setup.n_init = 4;
  setup.seed = 3;

  auto records = run_search(setup);
  REQUIRE(records.size() == 8);
  std::set<std::string> keys;
  for (const auto& rec : records) keys.insert(config_key(rec.kappa));
  CHECK(keys.size() == 8);

  // best feasible cost equals the exhaustive optimum
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (unsigned long long i = 0; i < 8; ++i) {
    EvaluationRecord rec =
        evaluate_config(setup.space.config_at(i), base, corpus, setup.spec, setup.cost);
    if (rec.feasible) {
      any = true;
      best = std::min(best, rec.cost);
    }
  }
  double found = std::numeric_limits<double>::infinity();
  bool found_any = false;
  for (const auto& rec : records)
    if (rec.feasible) {
      found_any = true;
      found = std::min(found, rec.cost);
    }
  CHECK(found_any == any);
  if (any) CHECK(found == doctest::Approx(best));
}

TEST_CASE("budget equal to n_init returns only the initial design") {
  ModelArchitecture arch = one_layer_arch();
  ReferenceModel base = build_model(arch, 1);
  EvaluationCorpus corpus = build_corpus(base, 2, 3, 4, 2);

  SearchSetup setup;
  setup.base = &base;
  setup.corpus = &corpus;
  setup.spec = default_spec();
  setup.space = small_space({8, 16}, {0.0, 0.5});
  setup.budget = 6;
  setup.n_init = 6;
  setup.seed = 3;

  auto records = run_search(setup);
  auto design = initial_design(setup.space, 6, 3);
  REQUIRE(records.size() == 6);
  for (size_t i = 0; i < records.size(); ++i)
    CHECK(config_key(records[i].kappa) == config_key(design[i]));
}

TEST_CASE("record logs make runs resumable and byte identical") {
  ModelArchitecture arch = one_layer_arch();
  ReferenceModel base = build_model(arch, 1);
  EvaluationCorpus corpus = build_corpus(base, 2, 3, 4, 2);

  auto dir = std::filesystem::temp_directory_path() / "toggle_bo_resume_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  SearchSetup setup;
  setup.base = &base;
  setup.corpus = &corpus;
  setup.spec = default_spec();
  setup.space = small_space({4, 8, 16}, {0.0, 0.5});
  setup.budget = 10;
  setup.n_init = 4;
  setup.seed = 9;
  setup.log_path = dir / "full.jsonl";

  run_search(setup);
  std::string full = read_file(setup.log_path);

  // interrupt after 5 evaluations: keep the first 5 lines only
  std::istringstream lines(full);
  std::string line, partial;
  for (int i = 0; i < 5 && std::getline(lines, line); ++i) partial += line + "\n";
  setup.log_path = dir / "resumed.jsonl";
  {
    std::ofstream out(setup.log_path, std::ios::binary);
    out << partial;
  }
  run_search(setup);
  CHECK(read_file(setup.log_path) == full);

  // rerunning a completed log adds nothing
  run_search(setup);
  CHECK(read_file(setup.log_path) == full);

  std::filesystem::remove_all(dir);
}

TEST_CASE("pareto front dominance") {
  SearchSpace space = small_space({8, 16}, {0.0});
  auto k = [&](int i) { return space.config_at(static_cast<unsigned long long>(i)); };

  SUBCASE("dominated point removed") {
    std::vector<EvaluationRecord> recs = {fake_record(0, k(0), 10, 0.1, true),
                                          fake_record(1, k(1), 20, 0.05, true)};
    auto front = pareto_front(recs, true);
    REQUIRE(front.size() == 1);
    CHECK(front[0].record.id == 0);
  }
  SUBCASE("singleton") {
    std::vector<EvaluationRecord> recs = {fake_record(0, k(0), 10, 0.1, true)};
    CHECK(pareto_front(recs, true).size() == 1);
  }
  SUBCASE("incomparable points both kept, sorted by cost") {
    std::vector<EvaluationRecord> recs = {fake_record(0, k(0), 20, 0.1, true),
                                          fake_record(1, k(1), 10, 0.05, true)};
    auto front = pareto_front(recs, true);
    REQUIRE(front.size() == 2);
    CHECK(front[0].record.id == 1);
    CHECK(front[1].record.id == 0);
  }
  SUBCASE("infeasible points can be filtered") {
    std::vector<EvaluationRecord> recs = {fake_record(0, k(0), 10, -0.1, false),
                                          fake_record(1, k(1), 20, 0.05, true)};
    CHECK(pareto_front(recs, true).size() == 1);
    CHECK(pareto_front(recs, false).size() == 2);
  }
}
