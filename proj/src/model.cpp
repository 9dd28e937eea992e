#include "toggle/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "toggle/rng.hpp"

namespace toggle {

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kInitStd = 0.02;

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = kInitStd * rng.normal();
  return m;
}

Eigen::VectorXd layer_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& gamma,
                           const Eigen::VectorXd& beta) {
  double mean = x.mean();
  double var = (x.array() - mean).square().mean();
  return (((x.array() - mean) / std::sqrt(var + kNormEps)) * gamma.array() + beta.array())
      .matrix();
}

Eigen::VectorXd rms_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& gamma) {
  double rms = std::sqrt(x.array().square().mean() + kNormEps);
  return ((x.array() / rms) * gamma.array()).matrix();
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(0.7978845608028654 * (x + 0.044715 * x * x * x)));
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd z = (logits.array() - logits.maxCoeff()).exp().matrix();
  return z / z.sum();
}

}  // namespace

std::string to_string(ArchStyle style) {
  return style == ArchStyle::GptLike ? "gpt-like" : "llama-like";
}

ArchStyle arch_style_from_string(const std::string& s) {
  if (s == "gpt-like") return ArchStyle::GptLike;
  if (s == "llama-like") return ArchStyle::LlamaLike;
  throw ModelError("unknown architecture style '" + s + "'");
}

std::vector<std::string> ModelArchitecture::component_names() const {
  if (style == ArchStyle::GptLike) return {"attn_qkv", "attn_out", "ffn"};
  return {"q_proj", "k_proj", "v_proj", "attn_out", "ffn_gate", "ffn_up", "ffn_down"};
}

void ModelArchitecture::validate() const {
  if (n_layers < 1) throw ModelError("n_layers must be >= 1");
  if (hidden_dim < 1) throw ModelError("hidden_dim must be >= 1");
  if (n_heads < 1 || hidden_dim % n_heads != 0)
    throw ModelError("hidden_dim must be divisible by n_heads");
  if (vocab_size < 2) throw ModelError("vocab_size must be >= 2");
  if (max_context < 1) throw ModelError("max_context must be >= 1");
}

Eigen::VectorXd ComponentWeights::flatten() const {
  Eigen::VectorXd flat(param_count());
  long off = 0;
  for (const auto& m : mats) {
    flat.segment(off, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    off += m.size();
  }
  return flat;
}

void ComponentWeights::unflatten(const Eigen::VectorXd& flat) {
  long off = 0;
  for (auto& m : mats) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(off, m.size());
    off += m.size();
  }
}

long ReferenceModel::component_param_count(int layer, const std::string& component) const {
  return layers.at(layer).at(component).param_count();
}

long ReferenceModel::compressible_param_count() const {
  long n = 0;
  for (const auto& layer : layers)
    for (const auto& [_, comp] : layer) n += comp.param_count();
  return n;
}

long ReferenceModel::exempt_param_count() const {
  long n = static_cast<long>(token_emb.size()) + static_cast<long>(pos_emb.size());
  for (const auto& v : norm1_gamma) n += v.size();
  for (const auto& v : norm1_beta) n += v.size();
  for (const auto& v : norm2_gamma) n += v.size();
  for (const auto& v : norm2_beta) n += v.size();
  n += final_gamma.size() + final_beta.size();
  return n;
}

CompressionConfig CompressionConfig::identity(const ModelArchitecture& arch) {
  CompressionConfig kappa;
  kappa.entries.assign(static_cast<size_t>(arch.n_slots()), Entry{16, 0.0});
  return kappa;
}

bool CompressionConfig::operator==(const CompressionConfig& o) const {
  if (entries.size() != o.entries.size()) return false;
  for (size_t i = 0; i < entries.size(); ++i)
    if (entries[i].bits != o.entries[i].bits || entries[i].prune != o.entries[i].prune)
      return false;
  return true;
}

int slot_index(const ModelArchitecture& arch, int layer, const std::string& component) {
  auto names = arch.component_names();
  auto it = std::find(names.begin(), names.end(), component);
  if (layer < 0 || layer >= arch.n_layers || it == names.end())
    throw ModelError("unknown (layer, component): (" + std::to_string(layer) + ", " + component +
                     ")");
  return layer * static_cast<int>(names.size()) +
         static_cast<int>(std::distance(names.begin(), it));
}

ReferenceModel build_model(const ModelArchitecture& arch, uint64_t seed) {
  arch.validate();
  ReferenceModel model;
  model.arch = arch;
  model.seed = seed;
  Rng rng(seed);

  const int d = arch.hidden_dim;
  const int f = arch.ffn_dim();
  model.token_emb = random_matrix(arch.vocab_size, d, rng);
  model.pos_emb = random_matrix(arch.max_context, d, rng);
  model.final_gamma = Eigen::VectorXd::Ones(d);
  model.final_beta = Eigen::VectorXd::Zero(d);

  for (int l = 0; l < arch.n_layers; ++l) {
    model.norm1_gamma.push_back(Eigen::VectorXd::Ones(d));
    model.norm1_beta.push_back(Eigen::VectorXd::Zero(d));
    model.norm2_gamma.push_back(Eigen::VectorXd::Ones(d));
    model.norm2_beta.push_back(Eigen::VectorXd::Zero(d));
    std::map<std::string, ComponentWeights> comps;
    if (arch.style == ArchStyle::GptLike) {
      comps["attn_qkv"].mats = {random_matrix(d, 3 * d, rng)};
      comps["attn_out"].mats = {random_matrix(d, d, rng)};
      comps["ffn"].mats = {random_matrix(d, f, rng), random_matrix(f, d, rng)};
    } else {
      comps["q_proj"].mats = {random_matrix(d, d, rng)};
      comps["k_proj"].mats = {random_matrix(d, d, rng)};
      comps["v_proj"].mats = {random_matrix(d, d, rng)};
      comps["attn_out"].mats = {random_matrix(d, d, rng)};
      comps["ffn_gate"].mats = {random_matrix(d, f, rng)};
      comps["ffn_up"].mats = {random_matrix(d, f, rng)};
      comps["ffn_down"].mats = {random_matrix(f, d, rng)};
    }
    model.layers.push_back(std::move(comps));
  }
  return model;
}

Eigen::VectorXd quantize_component(const Eigen::VectorXd& weights, int bits) {
  if (bits < 2 || bits > 16) throw ModelError("bit-width must lie in [2, 16]");
  if (bits == 16) return weights;
  const double max_abs = weights.cwiseAbs().maxCoeff();
  if (weights.size() == 0 || max_abs == 0.0) return weights;

  constexpr int kGridPoints = 64;
  const double s_lo = max_abs / std::pow(2.0, bits);
  const double s_hi = max_abs;
  const double ratio = std::pow(s_hi / s_lo, 1.0 / (kGridPoints - 1));

  auto quantize_with_scale = [&](double s, Eigen::VectorXd& out) -> double {
    double mse = 0.0;
    if (bits == 2) {
      // stretched-elastic 4-level grid {-1, -1/3, 1/3, 1} * s
      const double inner = s / 3.0;
      const double split = 2.0 * s / 3.0;
      for (long i = 0; i < weights.size(); ++i) {
        double w = weights[i];
        double mag = std::abs(w) <= split ? inner : s;
        double q = std::copysign(mag, w);
        out[i] = q;
        mse += (w - q) * (w - q);
      }
    } else {
      const double q_max = static_cast<double>((1 << (bits - 1)) - 1);
      for (long i = 0; i < weights.size(); ++i) {
        double w = weights[i];
        double q = std::round(w / s);
        q = std::clamp(q, -q_max, q_max);
        double v = q * s;
        out[i] = v;
        mse += (w - v) * (w - v);
      }
    }
    return mse;
  };

  Eigen::VectorXd candidate(weights.size());
  Eigen::VectorXd best(weights.size());
  double best_mse = std::numeric_limits<double>::infinity();
  double s = s_lo;
  for (int g = 0; g < kGridPoints; ++g, s *= ratio) {
    double mse = quantize_with_scale(s, candidate);
    if (mse < best_mse) {
      best_mse = mse;
      best = candidate;
    }
  }
  return best;
}

Eigen::VectorXd prune_component(const Eigen::VectorXd& weights, double ratio) {
  if (ratio < 0.0 || ratio > 1.0) throw ModelError("pruning ratio must lie in [0, 1]");
  const long n = weights.size();
  const long k = static_cast<long>(std::floor(ratio * static_cast<double>(n)));
  if (k == 0) return weights;
  std::vector<long> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](long a, long b) {
    double ma = std::abs(weights[a]), mb = std::abs(weights[b]);
    return ma != mb ? ma < mb : a < b;
  });
  Eigen::VectorXd out = weights;
  for (long i = 0; i < k; ++i) out[idx[i]] = 0.0;
  return out;
}

ReferenceModel apply_config(const ReferenceModel& model, const CompressionConfig& kappa) {
  if (static_cast<int>(kappa.entries.size()) != model.arch.n_slots())
    throw ModelError("configuration does not cover the model's components (" +
                     std::to_string(kappa.entries.size()) + " entries for " +
                     std::to_string(model.arch.n_slots()) + " slots)");
  ReferenceModel out = model;
  auto names = model.arch.component_names();
  for (int l = 0; l < model.arch.n_layers; ++l) {
    for (const auto& name : names) {
      const auto& entry = kappa.entries[slot_index(model.arch, l, name)];
      if (entry.bits == 16 && entry.prune == 0.0) continue;
      ComponentWeights& comp = out.layers[l][name];
      Eigen::VectorXd flat = comp.flatten();
      flat = prune_component(flat, entry.prune);
      flat = quantize_component(flat, entry.bits);
      comp.unflatten(flat);
    }
  }
  return out;
}

ForwardTrace forward(const ReferenceModel& model, const std::vector<int>& tokens) {
  const auto& arch = model.arch;
  const int len = static_cast<int>(tokens.size());
  if (len < 1) throw ModelError("forward requires at least one token");
  if (len > arch.max_context) throw ModelError("sequence exceeds max_context");
  for (int tok : tokens)
    if (tok < 0 || tok >= arch.vocab_size) throw ModelError("token outside vocabulary");

  const int d = arch.hidden_dim;
  const int h = arch.n_heads;
  const int hd = d / h;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const bool gpt = arch.style == ArchStyle::GptLike;

  Eigen::MatrixXd x(len, d);
  for (int i = 0; i < len; ++i)
    x.row(i) = model.token_emb.row(tokens[i]) + model.pos_emb.row(i);

  ForwardTrace trace;
  trace.attn.reserve(arch.n_layers);

  for (int l = 0; l < arch.n_layers; ++l) {
    const auto& comps = model.layers[l];
    Eigen::MatrixXd normed(len, d);
    for (int i = 0; i < len; ++i)
      normed.row(i) = gpt ? layer_norm(x.row(i), model.norm1_gamma[l], model.norm1_beta[l])
                          : rms_norm(x.row(i), model.norm1_gamma[l]);

    Eigen::MatrixXd q, k, v;
    if (gpt) {
      Eigen::MatrixXd qkv = normed * comps.at("attn_qkv").mats[0];
      q = qkv.leftCols(d);
      k = qkv.middleCols(d, d);
      v = qkv.rightCols(d);
    } else {
      q = normed * comps.at("q_proj").mats[0];
      k = normed * comps.at("k_proj").mats[0];
      v = normed * comps.at("v_proj").mats[0];
    }

    Eigen::MatrixXd attn_avg = Eigen::MatrixXd::Zero(len, len);
    Eigen::MatrixXd ctx(len, d);
    for (int head = 0; head < h; ++head) {
      Eigen::MatrixXd qh = q.middleCols(head * hd, hd);
      Eigen::MatrixXd kh = k.middleCols(head * hd, hd);
      Eigen::MatrixXd vh = v.middleCols(head * hd, hd);
      Eigen::MatrixXd scores = qh * kh.transpose() * scale;
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(len, len);
      for (int i = 0; i < len; ++i) {
        Eigen::VectorXd row = softmax(scores.row(i).head(i + 1));
        a.row(i).head(i + 1) = row;
      }
      attn_avg += a;
      ctx.middleCols(head * hd, hd) = a * vh;
    }
    attn_avg /= static_cast<double>(h);
    trace.attn.push_back(attn_avg);

    x += ctx * comps.at("attn_out").mats[0];

    Eigen::MatrixXd normed2(len, d);
    for (int i = 0; i < len; ++i)
      normed2.row(i) = gpt ? layer_norm(x.row(i), model.norm2_gamma[l], model.norm2_beta[l])
                           : rms_norm(x.row(i), model.norm2_gamma[l]);

    if (gpt) {
      Eigen::MatrixXd hpre = normed2 * comps.at("ffn").mats[0];
      hpre = hpre.unaryExpr([](double z) { return gelu(z); });
      x += hpre * comps.at("ffn").mats[1];
    } else {
      Eigen::MatrixXd gate = normed2 * comps.at("ffn_gate").mats[0];
      Eigen::MatrixXd up = normed2 * comps.at("ffn_up").mats[0];
      gate = gate.unaryExpr([](double z) { return silu(z); });
      x += (gate.array() * up.array()).matrix() * comps.at("ffn_down").mats[0];
    }
  }

  trace.hidden.resize(len, d);
  for (int i = 0; i < len; ++i)
    trace.hidden.row(i) = gpt ? layer_norm(x.row(i), model.final_gamma, model.final_beta)
                              : rms_norm(x.row(i), model.final_gamma);

  Eigen::MatrixXd logits = trace.hidden * model.token_emb.transpose();
  trace.probs.resize(len, arch.vocab_size);
  for (int i = 0; i < len; ++i) trace.probs.row(i) = softmax(logits.row(i));
  return trace;
}

EvaluationCorpus build_corpus(const ReferenceModel& base, int n_prompts, int prompt_len,
                              int horizon, uint64_t seed) {
  if (n_prompts < 1 || prompt_len < 1 || horizon < 1)
    throw ModelError("corpus requires n_prompts, prompt_len, horizon >= 1");
  if (prompt_len + horizon - 1 > base.arch.max_context)
    throw ModelError("prompt_len + horizon - 1 exceeds max_context");
  EvaluationCorpus corpus;
  corpus.seed = seed;
  for (int p = 0; p < n_prompts; ++p) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(p)));
    Prompt prompt;
    prompt.id = "p" + std::to_string(p);
    for (int i = 0; i < prompt_len; ++i)
      prompt.tokens.push_back(
          static_cast<int>(rng.uniform_int(static_cast<uint64_t>(base.arch.vocab_size))));
    std::vector<int> ctx = prompt.tokens;
    for (int t = 0; t < horizon; ++t) {
      ForwardTrace tr = forward(base, ctx);
      Eigen::Index greedy = 0;
      tr.probs.row(tr.probs.rows() - 1).maxCoeff(&greedy);
      prompt.y_correct.push_back(static_cast<int>(greedy));
      if (t + 1 < horizon) ctx.push_back(static_cast<int>(greedy));
    }
    corpus.prompts.push_back(std::move(prompt));
  }
  return corpus;
}

double jensen_shannon_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  double jsd = 0.0;
  for (long i = 0; i < p.size(); ++i) {
    double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) jsd += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) jsd += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return std::clamp(jsd, 0.0, 1.0);
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double denom = a.norm() * b.norm();
  if (denom == 0.0) return 0.0;
  return std::clamp(a.dot(b) / denom, -1.0, 1.0);
}

SignalBundle generate_signals(const ReferenceModel& base, const ReferenceModel& compressed,
                              const EvaluationCorpus& corpus) {
  if (base.arch.n_slots() != compressed.arch.n_slots() ||
      base.arch.vocab_size != compressed.arch.vocab_size ||
      base.arch.hidden_dim != compressed.arch.hidden_dim)
    throw ModelError("base and compressed models must share an architecture");
  if (corpus.prompts.empty()) throw ModelError("empty evaluation corpus");

  const int n_layers = base.arch.n_layers;
  SignalBundle bundle;
  bundle.dataset_id = "corpus-" + std::to_string(corpus.seed);
  bundle.max_context = base.arch.max_context;

  std::vector<std::string> channels = {"jsd"};
  for (int l = 1; l <= n_layers; ++l) channels.push_back("attn_sim_" + std::to_string(l));
  channels.push_back("emb_sim");
  channels.push_back("fact_ratio");

  for (const auto& prompt : corpus.prompts) {
    const int plen = static_cast<int>(prompt.tokens.size());
    const int horizon = prompt.horizon();
    if (plen + horizon - 1 > base.arch.max_context)
      throw ModelError("prompt '" + prompt.id + "' horizon exceeds max_context");

    std::vector<int> seq = prompt.tokens;
    seq.insert(seq.end(), prompt.y_correct.begin(), prompt.y_correct.end() - 1);

    ForwardTrace tr_base = forward(base, seq);
    ForwardTrace tr_comp = forward(compressed, seq);

    InferenceSignal sig;
    sig.prompt_id = prompt.id;
    sig.channels = channels;
    for (int t = 1; t <= horizon; ++t) {
      const int row = plen + t - 2;
      const int n_ctx = std::min(plen + t - 1, base.arch.max_context);
      std::vector<double> step;
      step.reserve(channels.size());

      Eigen::VectorXd pb = tr_base.probs.row(row);
      Eigen::VectorXd pc = tr_comp.probs.row(row);
      step.push_back(jensen_shannon_divergence(pb, pc));

      for (int l = 0; l < n_layers; ++l) {
        Eigen::MatrixXd ab = tr_base.attn[l].topLeftCorner(n_ctx, n_ctx);
        Eigen::MatrixXd ac = tr_comp.attn[l].topLeftCorner(n_ctx, n_ctx);
        step.push_back(cosine_similarity(Eigen::Map<Eigen::VectorXd>(ab.data(), ab.size()),
                                         Eigen::Map<Eigen::VectorXd>(ac.data(), ac.size())));
      }

      step.push_back(cosine_similarity(tr_base.hidden.row(row), tr_comp.hidden.row(row)));

      const int y = prompt.y_correct[t - 1];
      double ratio = pc[y] / (pb[y] + kEpsDiv);
      step.push_back(std::min(kFactRatioMax, ratio));

      sig.values.push_back(std::move(step));
    }
    bundle.signals.push_back(std::move(sig));
  }

  std::sort(bundle.signals.begin(), bundle.signals.end(),
            [](const InferenceSignal& a, const InferenceSignal& b) {
              return a.prompt_id < b.prompt_id;
            });
  validate_bundle(bundle);
  return bundle;
}

}  // namespace toggle
