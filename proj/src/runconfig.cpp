#include "toggle/runconfig.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace toggle {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

long parse_long(const std::string& field, const std::string& value) {
  try {
    size_t used = 0;
    long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(field + ": expected an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& field, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(field + ": expected a number, got '" + value + "'");
  }
}

// "2..16" or "2,4,8"
std::vector<int> parse_bits_set(const std::string& value) {
  std::vector<int> out;
  auto dots = value.find("..");
  if (dots != std::string::npos) {
    int lo = static_cast<int>(parse_long("search.bits", trim(value.substr(0, dots))));
    int hi = static_cast<int>(parse_long("search.bits", trim(value.substr(dots + 2))));
    for (int b = lo; b <= hi; ++b) out.push_back(b);
  } else {
    for (const auto& tok : split(value, ','))
      out.push_back(static_cast<int>(parse_long("search.bits", tok)));
  }
  return out;
}

// "0.0:0.1:0.5" (lo:step:hi) or "0.0,0.25,0.5"
std::vector<double> parse_prune_set(const std::string& value) {
  std::vector<double> out;
  auto parts = split(value, ':');
  if (parts.size() == 3) {
    double lo = parse_double("search.prune", parts[0]);
    double step = parse_double("search.prune", parts[1]);
    double hi = parse_double("search.prune", parts[2]);
    if (step <= 0) throw ConfigError("search.prune: step must be positive");
    for (double p = lo; p <= hi + 1e-12; p += step) out.push_back(std::round(p * 1e9) / 1e9);
  } else {
    for (const auto& tok : split(value, ','))
      out.push_back(parse_double("search.prune", tok));
  }
  return out;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;

  auto fail = [&](const std::string& msg) -> ConfigError {
    return ConfigError("config line " + std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.back() == '{') {
      if (!section.empty()) throw fail("nested section");
      section = trim(line.substr(0, line.size() - 1));
      if (section.empty()) throw fail("section name missing before '{'");
      continue;
    }
    if (line == "}") {
      if (section.empty()) throw fail("'}' outside a section");
      section.clear();
      continue;
    }
    if (section.empty()) throw fail("key outside a section: '" + line + "'");

    if (section == "spec" && line.rfind("property", 0) == 0) {
      // property "<name>" = always[a,b]( expr >= 0 )
      auto q1 = line.find('"');
      auto q2 = line.find('"', q1 + 1);
      auto eq = line.find('=', q2 + 1);
      if (q1 == std::string::npos || q2 == std::string::npos || eq == std::string::npos)
        throw fail("malformed property declaration");
      std::string name = line.substr(q1 + 1, q2 - q1 - 1);
      cfg.spec.extras.emplace_back(name, parse_property_formula(trim(line.substr(eq + 1))));
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string::npos) throw fail("expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    std::string field = section + "." + key;

    if (section == "architecture") {
      if (key == "style") cfg.arch.style = arch_style_from_string(value);
      else if (key == "n_layers") cfg.arch.n_layers = static_cast<int>(parse_long(field, value));
      else if (key == "hidden_dim") cfg.arch.hidden_dim = static_cast<int>(parse_long(field, value));
      else if (key == "n_heads") cfg.arch.n_heads = static_cast<int>(parse_long(field, value));
      else if (key == "vocab_size") cfg.arch.vocab_size = static_cast<int>(parse_long(field, value));
      else if (key == "max_context") cfg.arch.max_context = static_cast<int>(parse_long(field, value));
      else if (key == "seed") cfg.model_seed = static_cast<uint64_t>(parse_long(field, value));
      else throw fail("unknown key '" + field + "'");
    } else if (section == "corpus") {
      if (key == "n_prompts") cfg.n_prompts = static_cast<int>(parse_long(field, value));
      else if (key == "prompt_len") cfg.prompt_len = static_cast<int>(parse_long(field, value));
      else if (key == "horizon") cfg.horizon = static_cast<int>(parse_long(field, value));
      else if (key == "seed") cfg.corpus_seed = static_cast<uint64_t>(parse_long(field, value));
      else throw fail("unknown key '" + field + "'");
    } else if (section == "spec") {
      if (key == "epsilon") cfg.spec.thresholds.epsilon = parse_double(field, value);
      else if (key == "delta") cfg.spec.thresholds.delta = parse_double(field, value);
      else if (key == "gamma") cfg.spec.thresholds.gamma = parse_double(field, value);
      else if (key == "tau") cfg.spec.thresholds.tau = parse_double(field, value);
      else if (key == "rho_th") cfg.spec.rho_th_scalar = parse_double(field, value);
      else throw fail("unknown key '" + field + "'");
    } else if (section == "search") {
      if (key == "bits") cfg.bits = parse_bits_set(value);
      else if (key == "prune") cfg.prune = parse_prune_set(value);
      else if (key == "budget") cfg.budget = static_cast<int>(parse_long(field, value));
      else if (key == "n_init") cfg.n_init = static_cast<int>(parse_long(field, value));
      else if (key == "seed") cfg.search_seed = static_cast<uint64_t>(parse_long(field, value));
      else throw fail("unknown key '" + field + "'");
    } else if (section == "cost") {
      if (key == "seq_len") cfg.cost.seq_len = parse_long(field, value);
      else if (key == "b_ref") cfg.cost.b_ref = static_cast<int>(parse_long(field, value));
      else if (key == "mac_factor") cfg.cost.mac_factor = parse_double(field, value);
      else throw fail("unknown key '" + field + "'");
    } else if (section == "modes") {
      if (key == "targets") {
        cfg.mode_targets.clear();
        for (const auto& tok : split(value, ','))
          cfg.mode_targets.push_back(parse_double(field, tok));
      } else throw fail("unknown key '" + field + "'");
    } else if (section == "sensitivity") {
      if (key == "budget") cfg.sensitivity_budget = static_cast<int>(parse_long(field, value));
      else throw fail("unknown key '" + field + "'");
    } else {
      throw fail("unknown section '" + section + "'");
    }
  }
  if (!section.empty()) throw ConfigError("config: unterminated section '" + section + "'");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::vector<std::string> RunConfig::validate() const {
  std::vector<std::string> issues;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) issues.push_back(msg);
  };

  check(arch.n_layers >= 1, "architecture.n_layers: must be >= 1");
  check(arch.hidden_dim >= 1, "architecture.hidden_dim: must be >= 1");
  check(arch.n_heads >= 1 && (arch.n_heads < 1 || arch.hidden_dim % arch.n_heads == 0),
        "architecture.n_heads: hidden_dim must be divisible by n_heads");
  check(arch.vocab_size >= 2, "architecture.vocab_size: must be >= 2");
  check(arch.max_context >= 1, "architecture.max_context: must be >= 1");

  check(n_prompts >= 1, "corpus.n_prompts: must be >= 1");
  check(prompt_len >= 1, "corpus.prompt_len: must be >= 1");
  check(horizon >= 1, "corpus.horizon: must be >= 1");
  check(prompt_len + horizon - 1 <= arch.max_context,
        "corpus.horizon: prompt_len + horizon - 1 exceeds architecture.max_context");

  auto range = [&](double v, const std::string& name) {
    check(v > 0.0 && v <= 1.0, "spec." + name + ": must lie in (0, 1]");
  };
  range(spec.thresholds.epsilon, "epsilon");
  range(spec.thresholds.delta, "delta");
  range(spec.thresholds.gamma, "gamma");
  range(spec.thresholds.tau, "tau");
  check(spec.rho_th_scalar >= 0.0, "spec.rho_th: must be non-negative");

  check(!bits.empty(), "search.bits: must be non-empty");
  for (int b : bits)
    check(b >= 2 && b <= 16, "search.bits: value " + std::to_string(b) + " outside [2, 16]");
  check(!prune.empty(), "search.prune: must be non-empty");
  for (double p : prune) {
    std::ostringstream v;
    v << p;
    check(p >= 0.0 && p <= 0.5, "search.prune: value " + v.str() + " outside [0, 0.5]");
  }
  check(n_init >= 2, "search.n_init: must be >= 2");
  check(budget >= n_init, "search.budget: must be >= search.n_init");

  check(cost.seq_len >= 1, "cost.seq_len: must be >= 1");
  check(cost.b_ref >= 1, "cost.b_ref: must be >= 1");
  check(cost.mac_factor > 0, "cost.mac_factor: must be > 0");

  check(!mode_targets.empty(), "modes.targets: must be non-empty");
  for (double t : mode_targets)
    check(t > 0.0 && t <= 100.0, "modes.targets: values must lie in (0, 100]");
  check(sensitivity_budget >= 2, "sensitivity.budget: must be >= 2");
  return issues;
}

SearchSpace RunConfig::search_space() const {
  SearchSpace space;
  space.arch = arch;
  space.bits = bits;
  space.prune = prune;
  return space;
}

void apply_seed_override(RunConfig& config, const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw ConfigError("seed override must look like model=5, corpus=5 or search=5");
  std::string key = trim(spec.substr(0, eq));
  uint64_t value = static_cast<uint64_t>(parse_long("seed-override", trim(spec.substr(eq + 1))));
  if (key == "model") config.model_seed = value;
  else if (key == "corpus") config.corpus_seed = value;
  else if (key == "search") config.search_seed = value;
  else throw ConfigError("unknown seed override '" + key + "'");
}

}  // namespace toggle
