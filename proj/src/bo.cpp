#include "toggle/bo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "toggle/rng.hpp"

namespace toggle {

namespace {

// Spaces up to this size are handled exhaustively: the acquisition pool is
// the whole grid, and once the remaining budget covers every unevaluated
// configuration the loop enumerates them directly instead of fitting GPs.
constexpr unsigned long long kEnumLimit = 4096;

int nearest_index(const std::vector<double>& grid, double value) {
  int best = 0;
  double best_d = std::abs(grid[0] - value);
  for (size_t i = 1; i < grid.size(); ++i) {
    double d = std::abs(grid[i] - value);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

void SearchSpace::validate() const {
  arch.validate();
  if (bits.empty()) throw BoError("bit-width set is empty");
  if (prune.empty()) throw BoError("pruning-ratio set is empty");
  for (int b : bits)
    if (b < 2 || b > 16) throw BoError("bit-width " + std::to_string(b) + " outside [2, 16]");
  for (double p : prune)
    if (p < 0.0 || p > 1.0) throw BoError("pruning ratio outside [0, 1]");
  if (!std::is_sorted(bits.begin(), bits.end()) ||
      std::adjacent_find(bits.begin(), bits.end()) != bits.end())
    throw BoError("bit-width set must be strictly increasing");
  if (!std::is_sorted(prune.begin(), prune.end()) ||
      std::adjacent_find(prune.begin(), prune.end()) != prune.end())
    throw BoError("pruning-ratio set must be strictly increasing");
}

double SearchSpace::config_count() const {
  double count = 1.0;
  for (int s = 0; s < n_slots(); ++s) {
    count *= static_cast<double>(options_per_slot());
    if (count > 1e18) return 1e18;
  }
  return count;
}

Eigen::VectorXd SearchSpace::encode(const CompressionConfig& kappa) const {
  if (static_cast<int>(kappa.entries.size()) != n_slots())
    throw BoError("configuration does not cover the search space slots");
  const double b_lo = bits.front(), b_hi = bits.back();
  const double p_hi = prune.back();
  Eigen::VectorXd x(n_dims());
  for (int s = 0; s < n_slots(); ++s) {
    const auto& e = kappa.entries[s];
    x[2 * s] = b_hi > b_lo ? (e.bits - b_lo) / (b_hi - b_lo) : 0.0;
    x[2 * s + 1] = p_hi > 0.0 ? e.prune / p_hi : 0.0;
  }
  return x;
}

CompressionConfig SearchSpace::decode(const Eigen::VectorXd& encoding) const {
  if (encoding.size() != n_dims()) throw BoError("encoding has wrong dimension");
  const double b_lo = bits.front(), b_hi = bits.back();
  const double p_hi = prune.back();
  std::vector<double> bit_enc, prune_enc;
  for (int b : bits) bit_enc.push_back(b_hi > b_lo ? (b - b_lo) / (b_hi - b_lo) : 0.0);
  for (double p : prune) prune_enc.push_back(p_hi > 0.0 ? p / p_hi : 0.0);

  CompressionConfig kappa;
  for (int s = 0; s < n_slots(); ++s) {
    CompressionConfig::Entry e;
    e.bits = bits[nearest_index(bit_enc, encoding[2 * s])];
    e.prune = prune[nearest_index(prune_enc, encoding[2 * s + 1])];
    kappa.entries.push_back(e);
  }
  return kappa;
}

CompressionConfig SearchSpace::config_at(unsigned long long canonical_index) const {
  const unsigned long long opts = static_cast<unsigned long long>(options_per_slot());
  CompressionConfig kappa;
  for (int s = 0; s < n_slots(); ++s) {
    unsigned long long opt = canonical_index % opts;
    canonical_index /= opts;
    CompressionConfig::Entry e;
    e.bits = bits[opt / prune.size()];
    e.prune = prune[opt % prune.size()];
    kappa.entries.push_back(e);
  }
  return kappa;
}

CompressionConfig SearchSpace::random_config(uint64_t seed) const {
  Rng rng(seed);
  CompressionConfig kappa;
  for (int s = 0; s < n_slots(); ++s) {
    CompressionConfig::Entry e;
    e.bits = bits[rng.uniform_int(bits.size())];
    e.prune = prune[rng.uniform_int(prune.size())];
    kappa.entries.push_back(e);
  }
  return kappa;
}

std::vector<CompressionConfig> SearchSpace::neighbors(const CompressionConfig& kappa) const {
  std::vector<CompressionConfig> out;
  for (int s = 0; s < n_slots(); ++s) {
    const auto& e = kappa.entries[s];
    int bi = static_cast<int>(std::find(bits.begin(), bits.end(), e.bits) - bits.begin());
    int pi = static_cast<int>(std::find(prune.begin(), prune.end(), e.prune) - prune.begin());
    auto push_with = [&](int nbi, int npi) {
      CompressionConfig n = kappa;
      n.entries[s].bits = bits[nbi];
      n.entries[s].prune = prune[npi];
      out.push_back(std::move(n));
    };
    if (bi > 0) push_with(bi - 1, pi);
    if (bi + 1 < static_cast<int>(bits.size())) push_with(bi + 1, pi);
    if (pi > 0) push_with(bi, pi - 1);
    if (pi + 1 < static_cast<int>(prune.size())) push_with(bi, pi + 1);
  }
  return out;
}

CompressionConfig SearchSpace::identity_config() const {
  CompressionConfig kappa;
  CompressionConfig::Entry e;
  e.bits = bits.back();
  e.prune = prune.front();
  kappa.entries.assign(static_cast<size_t>(n_slots()), e);
  return kappa;
}

std::string config_key(const CompressionConfig& kappa) {
  std::ostringstream out;
  char buf[48];
  for (const auto& e : kappa.entries) {
    std::snprintf(buf, sizeof(buf), "%d:%.17g|", e.bits, e.prune);
    out << buf;
  }
  return out.str();
}

nlohmann::ordered_json kappa_to_json(const ModelArchitecture& arch,
                                     const CompressionConfig& kappa) {
  nlohmann::ordered_json j;
  auto names = arch.component_names();
  for (int l = 0; l < arch.n_layers; ++l)
    for (const auto& name : names) {
      const auto& e = kappa.entries[slot_index(arch, l, name)];
      j[std::to_string(l) + "." + name] = {e.bits, e.prune};
    }
  return j;
}

CompressionConfig kappa_from_json(const ModelArchitecture& arch, const nlohmann::json& j) {
  CompressionConfig kappa;
  kappa.entries.assign(static_cast<size_t>(arch.n_slots()), CompressionConfig::Entry{});
  std::set<int> seen;
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::string key = it.key();
    auto dot = key.find('.');
    if (dot == std::string::npos) throw BoError("bad kappa key '" + key + "'");
    int layer = std::stoi(key.substr(0, dot));
    int slot = slot_index(arch, layer, key.substr(dot + 1));
    if (!seen.insert(slot).second) throw BoError("duplicate kappa key '" + key + "'");
    kappa.entries[slot].bits = it.value().at(0).get<int>();
    kappa.entries[slot].prune = it.value().at(1).get<double>();
  }
  if (static_cast<int>(seen.size()) != arch.n_slots())
    throw BoError("kappa covers " + std::to_string(seen.size()) + " of " +
                  std::to_string(arch.n_slots()) + " slots");
  return kappa;
}

nlohmann::ordered_json record_to_json(const ModelArchitecture& arch,
                                      const EvaluationRecord& rec) {
  nlohmann::ordered_json j;
  j["id"] = rec.id;
  j["kappa"] = kappa_to_json(arch, rec.kappa);
  j["cost"] = rec.cost;
  j["rho_min"] = rec.rho_min;
  j["feasible"] = rec.feasible;
  j["avg_pp"] = rec.avg_pp;
  j["ps_bar"] = rec.ps_bar;
  return j;
}

EvaluationRecord record_from_json(const ModelArchitecture& arch, const nlohmann::json& j) {
  EvaluationRecord rec;
  rec.id = j.at("id").get<int>();
  rec.kappa = kappa_from_json(arch, j.at("kappa"));
  rec.cost = j.at("cost").get<double>();
  rec.rho_min = j.at("rho_min").get<std::vector<double>>();
  rec.feasible = j.at("feasible").get<bool>();
  rec.avg_pp = j.at("avg_pp").get<double>();
  rec.ps_bar = j.at("ps_bar").get<std::vector<double>>();
  return rec;
}

std::vector<CompressionConfig> initial_design(const SearchSpace& space, int n_init,
                                              uint64_t seed) {
  space.validate();
  if (n_init < 2) throw BoError("initial design requires n_init >= 2");
  double count = space.config_count();
  if (static_cast<double>(n_init) > count)
    throw BoError("initial design of " + std::to_string(n_init) +
                  " exceeds the configuration space size");

  std::vector<CompressionConfig> design;
  std::set<std::string> keys;
  auto try_add = [&](const CompressionConfig& kappa) {
    if (keys.insert(config_key(kappa)).second) {
      design.push_back(kappa);
      return true;
    }
    return false;
  };

  try_add(space.identity_config());

  // Latin hypercube on the encoding, one stratum per remaining sample.
  const int n_samples = n_init - 1;
  if (n_samples > 0) {
    Rng rng(mix_seed(seed, 0xD351));
    const int dims = space.n_dims();
    std::vector<std::vector<int>> perms(dims);
    for (int d = 0; d < dims; ++d) {
      auto& perm = perms[d];
      perm.resize(n_samples);
      for (int i = 0; i < n_samples; ++i) perm[i] = i;
      for (int i = n_samples - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.uniform_int(static_cast<uint64_t>(i + 1))]);
    }
    for (int i = 0; i < n_samples; ++i) {
      Eigen::VectorXd x(dims);
      for (int d = 0; d < dims; ++d)
        x[d] = (perms[d][i] + 0.5) / static_cast<double>(n_samples);
      try_add(space.decode(x));
    }
  }

  // Snapping can collapse strata; top up deterministically.
  if (count <= kEnumLimit) {
    for (unsigned long long i = 0;
         static_cast<int>(design.size()) < n_init && i < static_cast<unsigned long long>(count);
         ++i)
      try_add(space.config_at(i));
  } else {
    uint64_t stream = 1;
    while (static_cast<int>(design.size()) < n_init)
      try_add(space.random_config(mix_seed(seed, 0xF111 + stream++)));
  }
  if (static_cast<int>(design.size()) != n_init)
    throw BoError("could not build a distinct initial design");
  return design;
}

double acquisition(const GpSurrogate& cost_gp, const std::vector<GpSurrogate>& constraint_gps,
                   const Eigen::VectorXd& candidate, std::optional<double> best_feasible_cost,
                   const std::vector<double>& rho_th) {
  if (constraint_gps.size() != rho_th.size())
    throw BoError("one constraint surrogate per robustness threshold required");
  double prob = 1.0;
  for (size_t i = 0; i < constraint_gps.size(); ++i) {
    auto post = constraint_gps[i].predict_standardized(candidate);
    double th = constraint_gps[i].standardize(rho_th[i]);
    prob *= normal_cdf((post.mean - th) / std::sqrt(post.var));
  }
  if (!best_feasible_cost) return prob;
  auto post = cost_gp.predict_standardized(candidate);
  double best = cost_gp.standardize(*best_feasible_cost);
  return expected_improvement(post.mean, post.var, best) * prob;
}

CompressionConfig propose_next(const OptimizerState& state, uint64_t seed) {
  const SearchSpace& space = state.space;
  const auto& records = state.records;
  if (records.size() < 2) throw BoError("propose_next requires at least 2 observations");

  std::set<std::string> evaluated;
  for (const auto& rec : records) evaluated.insert(config_key(rec.kappa));

  // candidate pool
  std::vector<CompressionConfig> pool;
  double count = space.config_count();
  if (count <= static_cast<double>(kEnumLimit)) {
    for (unsigned long long i = 0; i < static_cast<unsigned long long>(count); ++i)
      pool.push_back(space.config_at(i));
  } else {
    for (uint64_t i = 0; i < 1024; ++i)
      pool.push_back(space.random_config(mix_seed(seed, i)));
    // one-coordinate neighbors of the incumbent
    const EvaluationRecord* incumbent = nullptr;
    for (const auto& rec : records) {
      if (!incumbent) {
        incumbent = &rec;
        continue;
      }
      bool better = rec.feasible != incumbent->feasible
                        ? rec.feasible
                        : (rec.feasible ? rec.cost < incumbent->cost
                                        : rec.rho_overall() > incumbent->rho_overall());
      if (better) incumbent = &rec;
    }
    for (auto& n : space.neighbors(incumbent->kappa)) pool.push_back(std::move(n));
  }

  std::vector<const CompressionConfig*> fresh;
  std::set<std::string> pooled;
  for (const auto& kappa : pool) {
    std::string key = config_key(kappa);
    if (evaluated.count(key) || !pooled.insert(key).second) continue;
    fresh.push_back(&kappa);
  }
  if (fresh.empty()) throw BoError("candidate pool exhausted: every configuration evaluated");

  // surrogates
  const long n = static_cast<long>(records.size());
  Eigen::MatrixXd X(n, space.n_dims());
  Eigen::VectorXd cost(n);
  const size_t n_props = records.front().rho_min.size();
  std::vector<Eigen::VectorXd> rho(n_props, Eigen::VectorXd(n));
  for (long k = 0; k < n; ++k) {
    X.row(k) = space.encode(records[k].kappa);
    cost[k] = records[k].cost;
    for (size_t i = 0; i < n_props; ++i) rho[i][k] = records[k].rho_min[i];
  }
  GpSurrogate cost_gp = GpSurrogate::fit(X, cost);
  std::vector<GpSurrogate> constraint_gps;
  constraint_gps.reserve(n_props);
  for (size_t i = 0; i < n_props; ++i) constraint_gps.push_back(GpSurrogate::fit(X, rho[i]));

  std::optional<double> best_feasible;
  for (const auto& rec : records)
    if (rec.feasible && (!best_feasible || rec.cost < *best_feasible)) best_feasible = rec.cost;

  const CompressionConfig* best = nullptr;
  double best_acq = -1.0;
  for (const auto* kappa : fresh) {
    double a = acquisition(cost_gp, constraint_gps, space.encode(*kappa), best_feasible,
                           state.rho_th);
    if (a > best_acq) {
      best_acq = a;
      best = kappa;
    }
  }
  return *best;
}

EvaluationRecord evaluate_config(const CompressionConfig& kappa, const ReferenceModel& base,
                                 const EvaluationCorpus& corpus, const SpecSet& spec,
                                 const CostParams& cost_params) {
  ReferenceModel compressed = apply_config(base, kappa);
  SignalBundle bundle = generate_signals(base, compressed, corpus);
  auto formulas = spec.formulas(base.arch.n_layers);

  EvaluationRecord rec;
  rec.kappa = kappa;
  for (const auto& phi : formulas) rec.rho_min.push_back(min_robustness_over_dataset(phi, bundle));
  rec.feasible = check_feasibility(rec.rho_min, spec.rho_th_vector());
  PreservationScores ps = preservation_scores(bundle, spec.thresholds);
  rec.avg_pp = ps.avg_pp;
  rec.ps_bar = ps.per_property_mean;
  rec.cost = flops_compressed(base, kappa, cost_params);
  return rec;
}

std::vector<EvaluationRecord> load_record_log(const ModelArchitecture& arch,
                                              const std::filesystem::path& path) {
  std::vector<EvaluationRecord> records;
  std::ifstream in(path);
  if (!in) return records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(record_from_json(arch, nlohmann::json::parse(line)));
  }
  return records;
}

std::vector<EvaluationRecord> run_search(const SearchSetup& setup) {
  if (!setup.base || !setup.corpus) throw BoError("search setup is missing model or corpus");
  setup.space.validate();
  double count = setup.space.config_count();
  int n_init = std::min(setup.n_init, static_cast<int>(std::min(count, 1e9)));
  if (setup.budget < n_init)
    throw BoError("budget must be >= the initial design size (" + std::to_string(n_init) + ")");
  if (static_cast<double>(setup.budget) > count)
    throw BoError("budget exceeds the size of the configuration space");

  std::vector<EvaluationRecord> records;
  if (!setup.log_path.empty() && std::filesystem::exists(setup.log_path))
    records = load_record_log(setup.base->arch, setup.log_path);
  if (static_cast<int>(records.size()) > setup.budget)
    throw BoError("record log already holds more evaluations than the budget");

  std::ofstream log;
  if (!setup.log_path.empty()) {
    log.open(setup.log_path, std::ios::app);
    if (!log) throw BoError("cannot open record log: " + setup.log_path.string());
  }

  std::set<std::string> evaluated;
  for (const auto& rec : records) evaluated.insert(config_key(rec.kappa));

  auto design = initial_design(setup.space, n_init, setup.seed);

  while (static_cast<int>(records.size()) < setup.budget) {
    const int k = static_cast<int>(records.size());
    CompressionConfig kappa;
    if (k < static_cast<int>(design.size())) {
      kappa = design[k];
    } else {
      bool enumerable = count <= static_cast<double>(kEnumLimit);
      bool shortcut = false;
      if (enumerable) {
        unsigned long long total = static_cast<unsigned long long>(count);
        unsigned long long remaining_configs = total - evaluated.size();
        if (static_cast<unsigned long long>(setup.budget - k) >= remaining_configs) {
          for (unsigned long long i = 0; i < total; ++i) {
            CompressionConfig c = setup.space.config_at(i);
            if (!evaluated.count(config_key(c))) {
              kappa = std::move(c);
              shortcut = true;
              break;
            }
          }
        }
      }
      if (!shortcut) {
        OptimizerState state{setup.space, setup.spec.rho_th_vector(), records};
        kappa = propose_next(state, mix_seed(setup.seed, static_cast<uint64_t>(k)));
      }
    }

    EvaluationRecord rec = evaluate_config(kappa, *setup.base, *setup.corpus, setup.spec,
                                           setup.cost);
    rec.id = k;
    evaluated.insert(config_key(rec.kappa));
    if (log.is_open()) {
      log << record_to_json(setup.base->arch, rec).dump() << "\n";
      log.flush();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<ParetoPoint> pareto_front(const std::vector<EvaluationRecord>& records,
                                      bool feasible_only) {
  std::vector<ParetoPoint> pts;
  for (const auto& rec : records) {
    if (feasible_only && !rec.feasible) continue;
    pts.push_back({rec, rec.rho_overall()});
  }
  std::vector<ParetoPoint> front;
  for (const auto& a : pts) {
    bool dominated = false;
    for (const auto& b : pts) {
      if (b.record.cost <= a.record.cost && b.rho_overall >= a.rho_overall &&
          (b.record.cost < a.record.cost || b.rho_overall > a.rho_overall)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(a);
  }
  std::sort(front.begin(), front.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (a.record.cost != b.record.cost) return a.record.cost < b.record.cost;
    if (a.rho_overall != b.rho_overall) return a.rho_overall > b.rho_overall;
    return a.record.id < b.record.id;
  });
  return front;
}

}  // namespace toggle
