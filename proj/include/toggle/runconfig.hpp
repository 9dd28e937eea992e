#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "toggle/bo.hpp"
#include "toggle/cost.hpp"
#include "toggle/model.hpp"
#include "toggle/stl.hpp"

namespace toggle {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Full run description; defaults mirror the framework's reference
// experimental settings.
struct RunConfig {
  ModelArchitecture arch;
  uint64_t model_seed = 1;

  int n_prompts = 4;
  int prompt_len = 4;
  int horizon = 8;
  uint64_t corpus_seed = 2;

  SpecSet spec;

  std::vector<int> bits = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
  std::vector<double> prune = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  int budget = 200;
  int n_init = 16;
  uint64_t search_seed = 3;

  CostParams cost;

  std::vector<double> mode_targets = {99.0, 95.0, 85.0};

  int sensitivity_budget = 50;

  // Every violation, as "section.field: message"; empty means valid.
  std::vector<std::string> validate() const;

  SearchSpace search_space() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

// Applies "model=5", "corpus=7" or "search=9" style seed overrides.
void apply_seed_override(RunConfig& config, const std::string& spec);

}  // namespace toggle
