#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "toggle/signal.hpp"

namespace toggle {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ArchStyle { GptLike, LlamaLike };

std::string to_string(ArchStyle style);
ArchStyle arch_style_from_string(const std::string& s);

struct ModelArchitecture {
  ArchStyle style = ArchStyle::GptLike;
  int n_layers = 2;
  int hidden_dim = 32;
  int n_heads = 4;
  int vocab_size = 64;
  int max_context = 64;

  std::vector<std::string> component_names() const;
  int n_components_per_layer() const { return static_cast<int>(component_names().size()); }
  int n_slots() const { return n_layers * n_components_per_layer(); }
  int ffn_dim() const { return 4 * hidden_dim; }

  void validate() const;
};

// A compressible parameter group: one or more matrices treated as a single
// flat tensor for pruning/quantization and for |W^{l,c}| accounting.
struct ComponentWeights {
  std::vector<Eigen::MatrixXd> mats;

  long param_count() const {
    long n = 0;
    for (const auto& m : mats) n += static_cast<long>(m.size());
    return n;
  }
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);
};

struct ReferenceModel {
  ModelArchitecture arch;
  uint64_t seed = 0;

  Eigen::MatrixXd token_emb;  // vocab x d (exempt; head is tied to this)
  Eigen::MatrixXd pos_emb;    // T x d (exempt)
  // per layer: norm parameters (exempt) and compressible components
  std::vector<Eigen::VectorXd> norm1_gamma, norm1_beta, norm2_gamma, norm2_beta;
  Eigen::VectorXd final_gamma, final_beta;
  std::vector<std::map<std::string, ComponentWeights>> layers;

  long component_param_count(int layer, const std::string& component) const;
  long compressible_param_count() const;
  long exempt_param_count() const;
  long total_param_count() const { return compressible_param_count() + exempt_param_count(); }
};

// Per-(layer, component) bit-width and pruning ratio; slots follow the
// canonical order (layer-major, component order per architecture style).
struct CompressionConfig {
  struct Entry {
    int bits = 16;
    double prune = 0.0;
  };
  std::vector<Entry> entries;  // size == arch.n_slots()

  static CompressionConfig identity(const ModelArchitecture& arch);
  bool operator==(const CompressionConfig& o) const;
};

int slot_index(const ModelArchitecture& arch, int layer, const std::string& component);

struct Prompt {
  std::string id;
  std::vector<int> tokens;     // x_{1:prompt_len}
  std::vector<int> y_correct;  // one correct token per evaluation step
  int horizon() const { return static_cast<int>(y_correct.size()); }
};

struct EvaluationCorpus {
  uint64_t seed = 0;
  std::vector<Prompt> prompts;
};

ReferenceModel build_model(const ModelArchitecture& arch, uint64_t seed);

// Prompts drawn uniformly over the vocabulary; correct tokens are the base
// model's greedy continuations, giving fact_ratio a meaningful reference.
EvaluationCorpus build_corpus(const ReferenceModel& base, int n_prompts, int prompt_len,
                              int horizon, uint64_t seed);

// b = 16 is reference precision (identity). b >= 3: symmetric uniform
// quantization with step size picked from a 64-point geometric MSE grid.
// b = 2: stretched-elastic 4-level grid {-1, -1/3, 1/3, 1} * s.
Eigen::VectorXd quantize_component(const Eigen::VectorXd& weights, int bits);

// Zeroes exactly floor(ratio * n) entries of smallest magnitude
// (index order breaks ties); all other entries are unchanged.
Eigen::VectorXd prune_component(const Eigen::VectorXd& weights, double ratio);

// Prune then quantize, per component. The base model is unmodified.
ReferenceModel apply_config(const ReferenceModel& model, const CompressionConfig& kappa);

// Full-sequence causal forward pass; row t (0-based) holds the state after
// consuming tokens[0..t].
struct ForwardTrace {
  Eigen::MatrixXd probs;               // len x vocab, next-token distributions
  std::vector<Eigen::MatrixXd> attn;   // per layer, head-averaged len x len
  Eigen::MatrixXd hidden;              // len x d, final normed hidden states
};

ForwardTrace forward(const ReferenceModel& model, const std::vector<int>& tokens);

inline constexpr double kEpsDiv = 1e-9;
inline constexpr double kFactRatioMax = 10.0;

// Paired teacher-forced inference; emits channels jsd, attn_sim_1..n,
// emb_sim, fact_ratio per step.
SignalBundle generate_signals(const ReferenceModel& base, const ReferenceModel& compressed,
                              const EvaluationCorpus& corpus);

// Base-2 Jensen-Shannon divergence, clamped to [0, 1].
double jensen_shannon_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace toggle
