#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "toggle/bo.hpp"
#include "toggle/runconfig.hpp"

namespace toggle {

struct SearchOutputs {
  std::vector<EvaluationRecord> records;
  std::vector<ParetoPoint> front;
  ModeReport modes;
};

// Full search pipeline: record log (resumable), Pareto table, mode report and
// baseline-vs-selected trace bundles, all written under out_dir.
SearchOutputs run_search_pipeline(const RunConfig& config, const std::filesystem::path& out_dir);

struct SensitivityRow {
  std::string threshold;  // epsilon | delta | gamma | tau
  double value = 0.0;
  bool has_feasible = false;
  double flops_reduction = 0.0;
  double compression_ratio = 0.0;
};

// One reduced-budget search per cell, varying one predicate threshold at a
// time; the unvaried-baseline cell is computed once and shared.
std::vector<SensitivityRow> sensitivity_sweep(const RunConfig& config);
std::string render_sensitivity_table(const std::vector<SensitivityRow>& rows);

// Scatter rows (id, cost, overall robustness, feasible) plus per-mode
// per-property mean preservation bars for plotting.
std::string plot_scatter_csv(const std::vector<EvaluationRecord>& records);
std::string plot_mode_ps_csv(const std::vector<EvaluationRecord>& records,
                             const std::vector<double>& targets,
                             const std::vector<std::string>& property_names);

std::string pareto_csv(const std::vector<ParetoPoint>& front);

void write_text_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace toggle
