#include "toggle/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace toggle {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_text_file_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open for writing: " + tmp.string());
    out << text;
    if (!out) throw ConfigError("write failure: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string pareto_csv(const std::vector<ParetoPoint>& front) {
  std::ostringstream out;
  out << "config_id,cost,rho_overall,avg_pp\n";
  for (const auto& p : front)
    out << p.record.id << "," << fmt(p.record.cost) << "," << fmt(p.rho_overall) << ","
        << fmt(p.record.avg_pp) << "\n";
  return out.str();
}

std::string plot_scatter_csv(const std::vector<EvaluationRecord>& records) {
  std::ostringstream out;
  out << "config_id,cost,rho_overall,feasible\n";
  for (const auto& rec : records)
    out << rec.id << "," << fmt(rec.cost) << "," << fmt(rec.rho_overall()) << ","
        << (rec.feasible ? 1 : 0) << "\n";
  return out.str();
}

std::string plot_mode_ps_csv(const std::vector<EvaluationRecord>& records,
                             const std::vector<double>& targets,
                             const std::vector<std::string>& property_names) {
  std::ostringstream out;
  out << "mode,target,property,ps_percent\n";
  for (double target : targets) {
    OperatingMode mode = select_mode(records, target);
    if (!mode.selected) continue;
    const auto& ps = mode.selected->ps_bar;
    for (size_t i = 0; i < ps.size(); ++i) {
      std::string name = i < property_names.size() ? property_names[i]
                                                   : "property_" + std::to_string(i + 1);
      out << mode.name << "," << fmt(target) << "," << name << "," << fmt(100.0 * ps[i]) << "\n";
    }
  }
  return out.str();
}

SearchOutputs run_search_pipeline(const RunConfig& config, const std::filesystem::path& out_dir) {
  auto issues = config.validate();
  if (!issues.empty()) {
    std::ostringstream msg;
    msg << "invalid run configuration:";
    for (const auto& issue : issues) msg << "\n  " << issue;
    throw ConfigError(msg.str());
  }
  std::filesystem::create_directories(out_dir);

  ReferenceModel base = build_model(config.arch, config.model_seed);
  EvaluationCorpus corpus =
      build_corpus(base, config.n_prompts, config.prompt_len, config.horizon, config.corpus_seed);

  SearchSetup setup;
  setup.base = &base;
  setup.corpus = &corpus;
  setup.spec = config.spec;
  setup.cost = config.cost;
  setup.space = config.search_space();
  setup.budget = config.budget;
  setup.n_init = config.n_init;
  setup.seed = config.search_seed;
  setup.log_path = out_dir / "records.jsonl";

  SearchOutputs outputs;
  outputs.records = run_search(setup);
  outputs.front = pareto_front(outputs.records, true);
  ComponentCounts counts = component_counts(base);
  outputs.modes = mode_report(outputs.records, counts, config.cost, config.mode_targets);

  write_text_file_atomic(out_dir / "pareto.csv", pareto_csv(outputs.front));
  write_text_file_atomic(out_dir / "modes.txt", outputs.modes.render_table());
  {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& row : outputs.modes.rows) {
      nlohmann::ordered_json r;
      r["mode"] = row.mode_name;
      r["target"] = row.target;
      r["selected"] = row.has_selection;
      if (row.has_selection) {
        r["config_id"] = row.config_id;
        r["avg_bits"] = row.avg_bits;
        r["avg_prun_pct"] = row.avg_prun_pct;
        r["compression_ratio_pct"] = row.compression_ratio;
        r["flops_reduction"] = row.flops_reduction;
        r["size_base_mb"] = row.size_base_mb;
        r["size_compressed_mb"] = row.size_compressed_mb;
        r["gflops_per_token_base"] = row.gflops_per_token_base;
        r["gflops_per_token_compressed"] = row.gflops_per_token_compressed;
        r["avg_pp"] = row.avg_pp;
      }
      j.push_back(std::move(r));
    }
    write_text_file_atomic(out_dir / "modes.json", j.dump(2) + "\n");
  }

  // baseline-vs-selected traces
  {
    CompressionConfig identity = CompressionConfig::identity(config.arch);
    SignalBundle baseline = generate_signals(base, apply_config(base, identity), corpus);
    write_trace(baseline, out_dir / "trace_baseline.trace");
    for (const auto& row : outputs.modes.rows) {
      if (!row.has_selection) continue;
      for (const auto& rec : outputs.records) {
        if (rec.id != row.config_id) continue;
        SignalBundle bundle = generate_signals(base, apply_config(base, rec.kappa), corpus);
        std::string name = row.mode_name;
        for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        write_trace(bundle, out_dir / ("trace_" + name + ".trace"));
        break;
      }
    }
  }
  return outputs;
}

std::vector<SensitivityRow> sensitivity_sweep(const RunConfig& config) {
  auto issues = config.validate();
  if (!issues.empty()) throw ConfigError("invalid run configuration: " + issues.front());

  ReferenceModel base = build_model(config.arch, config.model_seed);
  EvaluationCorpus corpus =
      build_corpus(base, config.n_prompts, config.prompt_len, config.horizon, config.corpus_seed);
  ComponentCounts counts = component_counts(base);
  SearchSpace space = config.search_space();

  auto run_cell = [&](const PredicateThresholds& th) -> SensitivityRow {
    SpecSet spec = config.spec;
    spec.thresholds = th;
    SearchSetup setup;
    setup.base = &base;
    setup.corpus = &corpus;
    setup.spec = spec;
    setup.cost = config.cost;
    setup.space = space;
    setup.budget = static_cast<int>(
        std::min(static_cast<double>(config.sensitivity_budget), space.config_count()));
    setup.n_init = std::min(config.n_init, setup.budget);
    setup.seed = config.search_seed;
    auto records = run_search(setup);

    SensitivityRow row;
    const EvaluationRecord* best = nullptr;
    for (const auto& rec : records)
      if (rec.feasible && (!best || rec.cost < best->cost)) best = &rec;
    if (best) {
      row.has_feasible = true;
      CostReport report = cost_report(counts, best->kappa, config.cost);
      row.flops_reduction = report.flops_reduction;
      row.compression_ratio = report.compression_ratio;
    }
    return row;
  };

  const std::vector<double> eps_values = {0.15, 0.20, 0.25, 0.30, 0.35};
  const std::vector<double> sim_values = {0.5, 0.6, 0.7, 0.8, 0.9};

  std::map<std::string, SensitivityRow> cache;
  auto cell_for = [&](const PredicateThresholds& th) {
    std::ostringstream key;
    key << th.epsilon << "/" << th.delta << "/" << th.gamma << "/" << th.tau;
    auto it = cache.find(key.str());
    if (it == cache.end()) it = cache.emplace(key.str(), run_cell(th)).first;
    return it->second;
  };

  std::vector<SensitivityRow> rows;
  auto sweep = [&](const std::string& name, const std::vector<double>& values,
                   double PredicateThresholds::*field) {
    for (double v : values) {
      PredicateThresholds th = config.spec.thresholds;
      th.*field = v;
      SensitivityRow row = cell_for(th);
      row.threshold = name;
      row.value = v;
      rows.push_back(row);
    }
  };
  sweep("epsilon", eps_values, &PredicateThresholds::epsilon);
  sweep("delta", sim_values, &PredicateThresholds::delta);
  sweep("gamma", sim_values, &PredicateThresholds::gamma);
  sweep("tau", sim_values, &PredicateThresholds::tau);
  return rows;
}

std::string render_sensitivity_table(const std::vector<SensitivityRow>& rows) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-10s %8s %8s %8s\n", "threshold", "value", "FRx", "CR%");
  out << line;
  for (const auto& row : rows) {
    if (row.has_feasible)
      std::snprintf(line, sizeof(line), "%-10s %8.2f %8.2f %8.2f\n", row.threshold.c_str(),
                    row.value, row.flops_reduction, row.compression_ratio);
    else
      std::snprintf(line, sizeof(line), "%-10s %8.2f  no feasible configuration\n",
                    row.threshold.c_str(), row.value);
    out << line;
  }
  return out.str();
}

}  // namespace toggle
