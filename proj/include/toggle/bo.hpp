#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "toggle/cost.hpp"
#include "toggle/gp.hpp"
#include "toggle/modes.hpp"
#include "toggle/stl.hpp"

#include <json.hpp>

namespace toggle {

struct BoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Discrete per-component grid of bit-widths and pruning ratios. Encodings
// normalize bits to [0,1] via (b - min B) / (max B - min B) and pruning via
// p / P_max, two dimensions per slot.
struct SearchSpace {
  ModelArchitecture arch;
  std::vector<int> bits = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
  std::vector<double> prune = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};

  void validate() const;
  int n_slots() const { return arch.n_slots(); }
  int n_dims() const { return 2 * n_slots(); }
  int options_per_slot() const { return static_cast<int>(bits.size() * prune.size()); }
  // total |C-hat|, saturating at 1e18
  double config_count() const;

  Eigen::VectorXd encode(const CompressionConfig& kappa) const;
  CompressionConfig decode(const Eigen::VectorXd& encoding) const;  // nearest grid point

  CompressionConfig config_at(unsigned long long canonical_index) const;
  CompressionConfig random_config(uint64_t seed) const;
  std::vector<CompressionConfig> neighbors(const CompressionConfig& kappa) const;
  CompressionConfig identity_config() const;  // b = max B, p = min P
};

std::string config_key(const CompressionConfig& kappa);

nlohmann::ordered_json kappa_to_json(const ModelArchitecture& arch, const CompressionConfig& kappa);
CompressionConfig kappa_from_json(const ModelArchitecture& arch, const nlohmann::json& j);

nlohmann::ordered_json record_to_json(const ModelArchitecture& arch, const EvaluationRecord& rec);
EvaluationRecord record_from_json(const ModelArchitecture& arch, const nlohmann::json& j);

// Latin-hypercube sample snapped to the grid, de-duplicated, with the
// identity configuration always included as an anchor.
std::vector<CompressionConfig> initial_design(const SearchSpace& space, int n_init, uint64_t seed);

// Expected improvement under constraints: EI toward lower cost, gated by the
// posterior probability that every robustness constraint holds. Without a
// feasible incumbent the feasibility probability alone is returned.
double acquisition(const GpSurrogate& cost_gp, const std::vector<GpSurrogate>& constraint_gps,
                   const Eigen::VectorXd& candidate, std::optional<double> best_feasible_cost,
                   const std::vector<double>& rho_th);

struct OptimizerState {
  SearchSpace space;
  std::vector<double> rho_th;
  std::vector<EvaluationRecord> records;
};

// Argmax of the acquisition over a deterministic candidate pool, never
// re-proposing an evaluated configuration.
CompressionConfig propose_next(const OptimizerState& state, uint64_t seed);

EvaluationRecord evaluate_config(const CompressionConfig& kappa, const ReferenceModel& base,
                                 const EvaluationCorpus& corpus, const SpecSet& spec,
                                 const CostParams& cost_params);

struct SearchSetup {
  const ReferenceModel* base = nullptr;
  const EvaluationCorpus* corpus = nullptr;
  SpecSet spec;
  CostParams cost;
  SearchSpace space;
  int budget = 200;
  int n_init = 16;
  uint64_t seed = 0;
  std::filesystem::path log_path;  // empty: in-memory only; else appended per evaluation
};

// Exactly `budget` evaluations (initial design included). With an existing
// record log the completed evaluations are loaded and skipped, so an
// interrupted run resumes to the identical final log.
std::vector<EvaluationRecord> run_search(const SearchSetup& setup);

std::vector<EvaluationRecord> load_record_log(const ModelArchitecture& arch,
                                              const std::filesystem::path& path);

struct ParetoPoint {
  EvaluationRecord record;
  double rho_overall = 0.0;
};

// Non-dominated set under (minimize cost, maximize overall robustness),
// sorted by cost ascending.
std::vector<ParetoPoint> pareto_front(const std::vector<EvaluationRecord>& records,
                                      bool feasible_only);

}  // namespace toggle
