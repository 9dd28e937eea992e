#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "toggle/model.hpp"

namespace toggle {

struct CostError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CostParams {
  long seq_len = 128;    // S
  int b_ref = 16;        // reference bit-width
  double mac_factor = 2; // multiply-accumulate constant C

  void validate() const {
    if (seq_len < 1) throw CostError("seq_len must be >= 1");
    if (b_ref < 1) throw CostError("b_ref must be >= 1");
    if (!(mac_factor > 0)) throw CostError("mac_factor must be > 0");
  }
};

// Parameter counts are all the cost model needs; extracted from a model or
// synthesized directly (e.g. to reproduce published size arithmetic).
struct ComponentCounts {
  std::vector<long> per_slot;  // |W^{l,c}| in canonical slot order
  long exempt = 0;             // embeddings, norms, head: sized at b_ref, never pruned
};

ComponentCounts component_counts(const ReferenceModel& model);

struct CostReport {
  double flops_base = 0.0;
  double flops_compressed = 0.0;
  double size_base_bytes = 0.0;
  double size_compressed_bytes = 0.0;
  double flops_reduction = 1.0;    // FR = F_base / F_compressed
  double compression_ratio = 0.0;  // CR = 100 * (1 - size_c / size_b)

  double gflops_per_token(long seq_len) const {
    return flops_compressed / (static_cast<double>(seq_len) * 1e9);
  }
};

double flops_base(const ComponentCounts& counts, const CostParams& params);
double flops_compressed(const ComponentCounts& counts, const CompressionConfig& kappa,
                        const CostParams& params);

// Compressed size, or baseline (b = b_ref, p = 0 everywhere) when kappa is
// absent. Exempt parameters always count at b_ref with zero pruning.
double model_size_bytes(const ComponentCounts& counts, const std::optional<CompressionConfig>& kappa,
                        const CostParams& params);

CostReport cost_report(const ComponentCounts& counts, const CompressionConfig& kappa,
                       const CostParams& params);

// Convenience overloads on the model itself.
double flops_base(const ReferenceModel& model, const CostParams& params);
double flops_compressed(const ReferenceModel& model, const CompressionConfig& kappa,
                        const CostParams& params);
double model_size_bytes(const ReferenceModel& model, const std::optional<CompressionConfig>& kappa,
                        const CostParams& params);
CostReport cost_report(const ReferenceModel& model, const CompressionConfig& kappa,
                       const CostParams& params);

}  // namespace toggle
