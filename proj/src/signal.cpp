#include "toggle/signal.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace toggle {

namespace {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void validate_bundle(const SignalBundle& bundle) {
  if (bundle.max_context < 1) throw TraceError("max context T must be >= 1");
  const std::vector<std::string>* schema = nullptr;
  for (const auto& sig : bundle.signals) {
    if (sig.prompt_id.empty()) throw TraceError("empty prompt id");
    for (char ch : sig.prompt_id)
      if (ch == ',' || std::isspace(static_cast<unsigned char>(ch)))
        throw TraceError("prompt id '" + sig.prompt_id + "' contains ',' or whitespace");
    if (schema == nullptr) {
      schema = &sig.channels;
      std::set<std::string> seen(sig.channels.begin(), sig.channels.end());
      if (seen.size() != sig.channels.size())
        throw TraceError("duplicate channel name in schema");
    } else if (sig.channels != *schema) {
      throw TraceError("signal '" + sig.prompt_id + "' does not share the bundle channel schema");
    }
    if (sig.horizon() < 1 || sig.horizon() > bundle.max_context)
      throw TraceError("signal '" + sig.prompt_id + "' horizon outside [1, T]");
    for (const auto& row : sig.values) {
      if (row.size() != sig.channels.size())
        throw TraceError("signal '" + sig.prompt_id + "' has a step with wrong channel count");
      for (double v : row)
        if (!std::isfinite(v))
          throw TraceError("non-finite value in signal '" + sig.prompt_id + "'");
    }
  }
}

std::string format_trace(const SignalBundle& bundle) {
  validate_bundle(bundle);
  std::ostringstream out;
  out << "#toggle-trace v1 T=" << bundle.max_context << "\n";
  out << "prompt_id,step";
  const std::vector<std::string>* schema =
      bundle.signals.empty() ? nullptr : &bundle.signals.front().channels;
  if (schema)
    for (const auto& name : *schema) out << "," << name;
  out << "\n";
  for (const auto& sig : bundle.signals) {
    for (int t = 1; t <= sig.horizon(); ++t) {
      out << sig.prompt_id << "," << t;
      for (double v : sig.values[t - 1]) out << "," << format_real(v);
      out << "\n";
    }
  }
  return out.str();
}

SignalBundle parse_trace(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;

  auto fail = [&](const std::string& msg) -> TraceError {
    return TraceError("trace line " + std::to_string(line_no) + ": " + msg);
  };

  if (!std::getline(in, line)) throw TraceError("empty trace file");
  line_no = 1;
  SignalBundle bundle;
  {
    int t_max = 0;
    if (std::sscanf(line.c_str(), "#toggle-trace v1 T=%d", &t_max) != 1)
      throw fail("expected header '#toggle-trace v1 T=<int>'");
    bundle.max_context = t_max;
  }

  if (!std::getline(in, line)) throw TraceError("missing channel header line");
  line_no = 2;
  auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "prompt_id" || header[1] != "step")
    throw fail("channel header must start with 'prompt_id,step'");
  std::vector<std::string> channels(header.begin() + 2, header.end());

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != channels.size() + 2)
      throw fail("expected " + std::to_string(channels.size() + 2) + " fields, got " +
                 std::to_string(fields.size()));
    const std::string& pid = fields[0];
    int step = 0;
    try {
      size_t used = 0;
      step = std::stoi(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw fail("bad step index '" + fields[1] + "'");
    }

    if (bundle.signals.empty() || bundle.signals.back().prompt_id != pid) {
      for (const auto& sig : bundle.signals)
        if (sig.prompt_id == pid) throw fail("prompt '" + pid + "' rows are not contiguous");
      InferenceSignal sig;
      sig.prompt_id = pid;
      sig.channels = channels;
      bundle.signals.push_back(std::move(sig));
    }
    InferenceSignal& sig = bundle.signals.back();
    if (step != sig.horizon() + 1)
      throw fail("steps for prompt '" + pid + "' must be contiguous from 1 (got " +
                 std::to_string(step) + ")");
    std::vector<double> row;
    row.reserve(channels.size());
    for (size_t i = 2; i < fields.size(); ++i) {
      double v = 0.0;
      try {
        size_t used = 0;
        v = std::stod(fields[i], &used);
        if (used != fields[i].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw fail("bad real value '" + fields[i] + "'");
      }
      if (!std::isfinite(v))
        throw fail("non-finite value in channel '" + channels[i - 2] + "'");
      row.push_back(v);
    }
    sig.values.push_back(std::move(row));
  }

  validate_bundle(bundle);
  return bundle;
}

SignalBundle read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot open trace file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str());
}

void write_trace(const SignalBundle& bundle, const std::filesystem::path& path) {
  std::string text = format_trace(bundle);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw TraceError("cannot open for writing: " + tmp.string());
    out << text;
    if (!out) throw TraceError("write failure: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace toggle
