#include "toggle/modes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace toggle {

PreservationScores preservation_scores(const SignalBundle& bundle,
                                       const PredicateThresholds& thresholds) {
  if (bundle.signals.empty()) throw StlError("empty signal bundle");
  PreservationScores scores;
  scores.per_prompt.assign(4, {});

  for (const auto& sig : bundle.signals) {
    int jsd_idx = sig.channel_index("jsd");
    int emb_idx = sig.channel_index("emb_sim");
    int fact_idx = sig.channel_index("fact_ratio");
    std::vector<int> attn_idx;
    for (size_t c = 0; c < sig.channels.size(); ++c)
      if (sig.channels[c].rfind("attn_sim_", 0) == 0) attn_idx.push_back(static_cast<int>(c));
    if (jsd_idx < 0 || emb_idx < 0 || fact_idx < 0 || attn_idx.empty())
      throw StlError("bundle is missing required channels for preservation scoring");

    double mean_jsd = 0.0, mean_attn = 0.0, mean_emb = 0.0, mean_fact = 0.0;
    for (int t = 1; t <= sig.horizon(); ++t) {
      mean_jsd += sig.at(t, jsd_idx);
      double layer_avg = 0.0;
      for (int idx : attn_idx) layer_avg += sig.at(t, idx);
      mean_attn += layer_avg / static_cast<double>(attn_idx.size());
      mean_emb += sig.at(t, emb_idx);
      mean_fact += sig.at(t, fact_idx);
    }
    double steps = static_cast<double>(sig.horizon());
    mean_jsd /= steps;
    mean_attn /= steps;
    mean_emb /= steps;
    mean_fact /= steps;

    auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
    scores.per_prompt[0].push_back(
        std::max(0.0, 1.0 - mean_jsd / (thresholds.epsilon + kEpsNorm)));
    scores.per_prompt[1].push_back(clamp01(mean_attn / (1.0 + kEpsNorm)));
    scores.per_prompt[2].push_back(clamp01(mean_emb / (1.0 + kEpsNorm)));
    scores.per_prompt[3].push_back(clamp01(mean_fact / (1.0 + kEpsNorm)));
  }

  double sum = 0.0;
  for (const auto& per_prompt : scores.per_prompt) {
    double mean = 0.0;
    for (double v : per_prompt) mean += v;
    mean /= static_cast<double>(per_prompt.size());
    scores.per_property_mean.push_back(mean);
    sum += mean;
  }
  scores.avg_pp = 100.0 * sum / static_cast<double>(scores.per_property_mean.size());
  return scores;
}

double EvaluationRecord::rho_overall() const {
  double m = 0.0;
  bool first = true;
  for (double r : rho_min) {
    if (first || r < m) {
      m = r;
      first = false;
    }
  }
  return m;
}

OperatingMode select_mode(const std::vector<EvaluationRecord>& records, double target,
                          const std::string& name) {
  OperatingMode mode;
  mode.name = name.empty() ? default_mode_name(target) : name;
  mode.target = target;
  const EvaluationRecord* best = nullptr;
  for (const auto& rec : records) {
    if (!rec.feasible || rec.avg_pp < target) continue;
    if (!best || rec.cost < best->cost ||
        (rec.cost == best->cost &&
         (rec.avg_pp > best->avg_pp || (rec.avg_pp == best->avg_pp && rec.id < best->id))))
      best = &rec;
  }
  if (best) mode.selected = *best;
  return mode;
}

std::string default_mode_name(double target) {
  if (target == 99.0) return "Strict";
  if (target == 95.0) return "Optimal";
  if (target == 85.0) return "Relaxed";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "Custom(%g)", target);
  return buf;
}

ModeReport mode_report(const std::vector<EvaluationRecord>& records,
                       const ComponentCounts& counts, const CostParams& params,
                       const std::vector<double>& targets) {
  ModeReport report;
  for (double target : targets) {
    OperatingMode mode = select_mode(records, target);
    ModeReportRow row;
    row.mode_name = mode.name;
    row.target = target;
    if (mode.selected) {
      const auto& rec = *mode.selected;
      row.has_selection = true;
      row.config_id = rec.id;
      double bits = 0.0, prun = 0.0;
      for (const auto& e : rec.kappa.entries) {
        bits += e.bits;
        prun += e.prune;
      }
      double n = static_cast<double>(rec.kappa.entries.size());
      row.avg_bits = bits / n;
      row.avg_prun_pct = 100.0 * prun / n;
      CostReport cost = cost_report(counts, rec.kappa, params);
      row.compression_ratio = cost.compression_ratio;
      row.flops_reduction = cost.flops_reduction;
      row.size_base_mb = cost.size_base_bytes / 1e6;
      row.size_compressed_mb = cost.size_compressed_bytes / 1e6;
      row.gflops_per_token_base =
          cost.flops_base / (static_cast<double>(params.seq_len) * 1e9);
      row.gflops_per_token_compressed = cost.gflops_per_token(params.seq_len);
      row.avg_pp = rec.avg_pp;
    }
    report.rows.push_back(row);
  }
  return report;
}

std::string ModeReport::render_table() const {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %8s %8s %10s %8s %8s %10s %10s %12s %12s %8s\n",
                "Mode", "Target", "AvgBits", "AvgPrun%", "CR%", "FRx", "BMS(MB)", "CMS(MB)",
                "BF/T(GF)", "CF/T(GF)", "AvgPP");
  out << line;
  for (const auto& row : rows) {
    if (!row.has_selection) {
      std::snprintf(line, sizeof(line), "%-10s %8.1f  no configuration meets target\n",
                    row.mode_name.c_str(), row.target);
    } else {
      std::snprintf(line, sizeof(line),
                    "%-10s %8.1f %8.2f %10.1f %8.2f %8.2f %10.3f %10.3f %12.6f %12.6f %8.2f\n",
                    row.mode_name.c_str(), row.target, row.avg_bits, row.avg_prun_pct,
                    row.compression_ratio, row.flops_reduction, row.size_base_mb,
                    row.size_compressed_mb, row.gflops_per_token_base,
                    row.gflops_per_token_compressed, row.avg_pp);
    }
    out << line;
  }
  return out.str();
}

}  // namespace toggle
