#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace toggle {

struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inclusive step window {start, ..., start + lookahead}, 1-based.
struct TimeWindow {
  int start = 1;
  int lookahead = 0;

  bool contains(int t) const { return t >= start && t <= start + lookahead; }
};

inline bool window_contains(const TimeWindow& w, int t) { return w.contains(t); }

// Discrete-time multivariate trace of per-step metrics for one prompt.
// Steps are 1-based; values[s][c] holds channel c at step s+1.
struct InferenceSignal {
  std::string prompt_id;
  std::vector<std::string> channels;
  std::vector<std::vector<double>> values;

  int horizon() const { return static_cast<int>(values.size()); }

  int channel_index(const std::string& name) const {
    for (size_t i = 0; i < channels.size(); ++i)
      if (channels[i] == name) return static_cast<int>(i);
    return -1;
  }

  double at(int t, int channel) const { return values[t - 1][channel]; }

  bool operator==(const InferenceSignal& o) const {
    return prompt_id == o.prompt_id && channels == o.channels && values == o.values;
  }
};

struct SignalBundle {
  std::string dataset_id;
  int max_context = 0;  // T declared in the trace header
  std::vector<InferenceSignal> signals;

  // dataset_id is not part of the persisted format and is excluded here.
  bool operator==(const SignalBundle& o) const {
    return max_context == o.max_context && signals == o.signals;
  }
};

// Throws TraceError if the bundle violates any invariant (finiteness,
// unique channels, shared schema, horizon bounds, clean prompt ids).
void validate_bundle(const SignalBundle& bundle);

// Line-oriented text format:
//   #toggle-trace v1 T=<int>
//   prompt_id,step,<channel>,...
//   <prompt_id>,<step>,<v1>,...,<vm>
// Steps per prompt are contiguous from 1. Reals use 17 significant digits.
SignalBundle read_trace(const std::filesystem::path& path);
void write_trace(const SignalBundle& bundle, const std::filesystem::path& path);

std::string format_trace(const SignalBundle& bundle);
SignalBundle parse_trace(const std::string& text);

}  // namespace toggle
