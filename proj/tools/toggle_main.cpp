#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "toggle/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

toggle::RunConfig load_config_or_exit(const std::string& path,
                                      const std::vector<std::string>& seed_overrides,
                                      int budget_override) {
  toggle::RunConfig config = toggle::load_run_config(path);
  for (const auto& ov : seed_overrides) toggle::apply_seed_override(config, ov);
  if (budget_override > 0) config.budget = budget_override;
  auto issues = config.validate();
  if (!issues.empty()) {
    std::cerr << "invalid configuration:\n";
    for (const auto& issue : issues) std::cerr << "  " << issue << "\n";
    std::exit(kExitValidation);
  }
  return config;
}

int cmd_validate(const std::string& config_path) {
  toggle::RunConfig config = toggle::load_run_config(config_path);
  auto issues = config.validate();
  if (issues.empty()) {
    std::cout << "configuration is valid\n";
    return kExitOk;
  }
  for (const auto& issue : issues) std::cout << issue << "\n";
  return kExitValidation;
}

int cmd_search(const toggle::RunConfig& config, const std::string& out_dir) {
  toggle::SearchOutputs outputs = toggle::run_search_pipeline(config, out_dir);
  int feasible = 0;
  for (const auto& rec : outputs.records) feasible += rec.feasible ? 1 : 0;
  std::cout << "evaluations: " << outputs.records.size() << " (" << feasible << " feasible)\n";
  std::cout << "pareto points: " << outputs.front.size() << "\n\n";
  std::cout << outputs.modes.render_table();
  std::cout << "\noutputs written to " << out_dir << "\n";
  return kExitOk;
}

int cmd_evaluate(const toggle::RunConfig& config, const std::string& kappa_path,
                 const std::string& trace_out) {
  toggle::ReferenceModel base = toggle::build_model(config.arch, config.model_seed);
  toggle::EvaluationCorpus corpus = toggle::build_corpus(
      base, config.n_prompts, config.prompt_len, config.horizon, config.corpus_seed);

  toggle::CompressionConfig kappa;
  if (kappa_path == "identity") {
    kappa = toggle::CompressionConfig::identity(config.arch);
  } else {
    std::ifstream in(kappa_path);
    if (!in) throw toggle::ConfigError("cannot open kappa file: " + kappa_path);
    kappa = toggle::kappa_from_json(config.arch, nlohmann::json::parse(in));
  }

  toggle::EvaluationRecord rec =
      toggle::evaluate_config(kappa, base, corpus, config.spec, config.cost);
  auto names = config.spec.property_names();

  toggle::CostReport cost = toggle::cost_report(base, kappa, config.cost);
  std::cout << "cost (FLOPs): " << rec.cost << "\n";
  std::cout << "flops reduction: " << cost.flops_reduction << "x\n";
  std::cout << "feasible: " << (rec.feasible ? "yes" : "no") << "\n";
  std::cout << "avg_pp: " << rec.avg_pp << "%\n";
  for (size_t i = 0; i < rec.rho_min.size(); ++i)
    std::cout << "rho_min[" << names[i] << "]: " << rec.rho_min[i] << "\n";

  if (!trace_out.empty()) {
    toggle::SignalBundle bundle =
        toggle::generate_signals(base, toggle::apply_config(base, kappa), corpus);
    toggle::write_trace(bundle, trace_out);
    std::cout << "trace written to " << trace_out << "\n";
  }
  return kExitOk;
}

int cmd_sensitivity(const toggle::RunConfig& config, const std::string& out_dir) {
  auto rows = toggle::sensitivity_sweep(config);
  std::string table = toggle::render_sensitivity_table(rows);
  std::filesystem::create_directories(out_dir);
  toggle::write_text_file_atomic(std::filesystem::path(out_dir) / "sensitivity.txt", table);
  std::cout << table;
  return kExitOk;
}

int cmd_plot_data(const toggle::RunConfig& config, const std::string& log_path,
                  const std::string& out_dir) {
  auto records = toggle::load_record_log(config.arch, log_path);
  if (records.empty()) throw toggle::ConfigError("record log is empty or missing: " + log_path);
  std::filesystem::create_directories(out_dir);
  toggle::write_text_file_atomic(std::filesystem::path(out_dir) / "pareto_scatter.csv",
                                 toggle::plot_scatter_csv(records));
  toggle::write_text_file_atomic(
      std::filesystem::path(out_dir) / "mode_ps.csv",
      toggle::plot_mode_ps_csv(records, config.mode_targets, config.spec.property_names()));
  std::cout << "plot data written to " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toggle: STL-constrained quantization/pruning search"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", kappa_path, log_path, trace_out;
  std::vector<std::string> seed_overrides;
  int budget_override = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
    auto* opt = cmd->add_option("--config", config_path, "run configuration file");
    if (needs_config) opt->required();
    cmd->add_option("--seed-override", seed_overrides,
                    "override a seed, e.g. model=5, corpus=5, search=5");
    cmd->add_option("--budget", budget_override, "override the search budget");
  };

  auto* validate = app.add_subcommand("validate", "check a run configuration");
  add_common(validate);

  auto* search = app.add_subcommand("search", "run the full constrained search");
  add_common(search);
  search->add_option("--out", out_dir, "output directory");

  auto* evaluate = app.add_subcommand("evaluate", "evaluate one configuration");
  add_common(evaluate);
  evaluate->add_option("--kappa", kappa_path, "kappa JSON file, or 'identity'")->required();
  evaluate->add_option("--trace-out", trace_out, "write the signal trace here");

  auto* sensitivity = app.add_subcommand("sensitivity", "threshold sensitivity sweep");
  add_common(sensitivity);
  sensitivity->add_option("--out", out_dir, "output directory");

  auto* plot = app.add_subcommand("plot-data", "emit plot tables from a record log");
  add_common(plot);
  plot->add_option("--log", log_path, "record log (records.jsonl)")->required();
  plot->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(validate)) return cmd_validate(config_path);
    toggle::RunConfig config = load_config_or_exit(config_path, seed_overrides, budget_override);
    if (app.got_subcommand(search)) return cmd_search(config, out_dir);
    if (app.got_subcommand(evaluate)) return cmd_evaluate(config, kappa_path, trace_out);
    if (app.got_subcommand(sensitivity)) return cmd_sensitivity(config, out_dir);
    if (app.got_subcommand(plot)) return cmd_plot_data(config, log_path, out_dir);
  } catch (const toggle::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
