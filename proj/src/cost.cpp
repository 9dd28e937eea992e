#include "toggle/cost.hpp"

namespace toggle {

namespace {

void check_coverage(const ComponentCounts& counts, const CompressionConfig& kappa) {
  if (kappa.entries.size() != counts.per_slot.size())
    throw CostError("configuration covers " + std::to_string(kappa.entries.size()) +
                    " slots, model has " + std::to_string(counts.per_slot.size()));
}

}  // namespace

ComponentCounts component_counts(const ReferenceModel& model) {
  ComponentCounts counts;
  auto names = model.arch.component_names();
  for (int l = 0; l < model.arch.n_layers; ++l)
    for (const auto& name : names) counts.per_slot.push_back(model.component_param_count(l, name));
  counts.exempt = model.exempt_param_count();
  return counts;
}

double flops_base(const ComponentCounts& counts, const CostParams& params) {
  params.validate();
  double total = 0.0;
  for (long w : counts.per_slot) total += static_cast<double>(w);
  return params.mac_factor * total * static_cast<double>(params.seq_len);
}

double flops_compressed(const ComponentCounts& counts, const CompressionConfig& kappa,
                        const CostParams& params) {
  params.validate();
  check_coverage(counts, kappa);
  double total = 0.0;
  for (size_t i = 0; i < counts.per_slot.size(); ++i) {
    const auto& e = kappa.entries[i];
    total += (1.0 - e.prune) * static_cast<double>(counts.per_slot[i]) *
             (static_cast<double>(e.bits) / static_cast<double>(params.b_ref));
  }
  return params.mac_factor * total * static_cast<double>(params.seq_len);
}

double model_size_bytes(const ComponentCounts& counts,
                        const std::optional<CompressionConfig>& kappa, const CostParams& params) {
  params.validate();
  double bytes =
      static_cast<double>(counts.exempt) * static_cast<double>(params.b_ref) / 8.0;
  if (kappa) {
    check_coverage(counts, *kappa);
    for (size_t i = 0; i < counts.per_slot.size(); ++i) {
      const auto& e = kappa->entries[i];
      bytes += (1.0 - e.prune) * static_cast<double>(counts.per_slot[i]) *
               static_cast<double>(e.bits) / 8.0;
    }
  } else {
    for (long w : counts.per_slot)
      bytes += static_cast<double>(w) * static_cast<double>(params.b_ref) / 8.0;
  }
  return bytes;
}

CostReport cost_report(const ComponentCounts& counts, const CompressionConfig& kappa,
                       const CostParams& params) {
  CostReport report;
  report.flops_base = flops_base(counts, params);
  report.flops_compressed = flops_compressed(counts, kappa, params);
  report.size_base_bytes = model_size_bytes(counts, std::nullopt, params);
  report.size_compressed_bytes = model_size_bytes(counts, kappa, params);
  if (report.flops_compressed == 0.0)
    throw CostError("compressed FLOPs are zero; cannot form a reduction factor");
  report.flops_reduction = report.flops_base / report.flops_compressed;
  report.compression_ratio =
      report.size_base_bytes == 0.0
          ? 0.0
          : 100.0 * (1.0 - report.size_compressed_bytes / report.size_base_bytes);
  return report;
}

double flops_base(const ReferenceModel& model, const CostParams& params) {
  return flops_base(component_counts(model), params);
}

double flops_compressed(const ReferenceModel& model, const CompressionConfig& kappa,
                        const CostParams& params) {
  return flops_compressed(component_counts(model), kappa, params);
}

double model_size_bytes(const ReferenceModel& model,
                        const std::optional<CompressionConfig>& kappa, const CostParams& params) {
  return model_size_bytes(component_counts(model), kappa, params);
}

CostReport cost_report(const ReferenceModel& model, const CompressionConfig& kappa,
                       const CostParams& params) {
  return cost_report(component_counts(model), kappa, params);
}

}  // namespace toggle
