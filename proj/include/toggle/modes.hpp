#pragma once

#include <optional>
#include <string>
#include <vector>

#include "toggle/cost.hpp"
#include "toggle/stl.hpp"

namespace toggle {

inline constexpr double kEpsNorm = 1e-9;

struct PreservationScores {
  // per_prompt[i][d]: property i, prompt d; all in [0, 1]
  std::vector<std::vector<double>> per_prompt;
  std::vector<double> per_property_mean;  // PS-bar_i
  double avg_pp = 0.0;                    // percent
};

// Per-prompt representative metric is the mean over steps. phi1 normalizes
// JSD against the epsilon tolerance (the base model's own JSD is identically
// zero); phi2..phi4 normalize similarity/ratio means against 1.
PreservationScores preservation_scores(const SignalBundle& bundle,
                                       const PredicateThresholds& thresholds);

// One BO observation: configuration, cost, per-property minimum robustness
// and preservation summary.
struct EvaluationRecord {
  int id = 0;
  CompressionConfig kappa;
  double cost = 0.0;
  std::vector<double> rho_min;
  bool feasible = false;
  double avg_pp = 0.0;
  std::vector<double> ps_bar;

  double rho_overall() const;
};

struct OperatingMode {
  std::string name;
  double target = 0.0;  // AvgPP percentage
  std::optional<EvaluationRecord> selected;
};

// Lowest-cost feasible record with avg_pp >= target; ties on cost broken by
// higher avg_pp, then lower record id.
OperatingMode select_mode(const std::vector<EvaluationRecord>& records, double target,
                          const std::string& name = "");

struct ModeReportRow {
  std::string mode_name;
  double target = 0.0;
  bool has_selection = false;
  int config_id = -1;
  double avg_bits = 0.0;
  double avg_prun_pct = 0.0;
  double compression_ratio = 0.0;
  double flops_reduction = 1.0;
  double size_base_mb = 0.0;
  double size_compressed_mb = 0.0;
  double gflops_per_token_base = 0.0;
  double gflops_per_token_compressed = 0.0;
  double avg_pp = 0.0;
};

struct ModeReport {
  std::vector<ModeReportRow> rows;
  std::string render_table() const;
};

std::string default_mode_name(double target);

ModeReport mode_report(const std::vector<EvaluationRecord>& records,
                       const ComponentCounts& counts, const CostParams& params,
                       const std::vector<double>& targets);

}  // namespace toggle
