#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "toggle/pipeline.hpp"

namespace py = pybind11;

namespace {

// Records cross the boundary as plain dicts via their JSON form.
py::object record_to_py(const toggle::ModelArchitecture& arch,
                        const toggle::EvaluationRecord& rec) {
  py::module json = py::module::import("json");
  return json.attr("loads")(toggle::record_to_json(arch, rec).dump());
}

toggle::InferenceSignal signal_from_channels(const std::map<std::string, std::vector<double>>& channels) {
  toggle::InferenceSignal sig;
  sig.prompt_id = "py";
  size_t horizon = 0;
  for (const auto& [name, values] : channels) {
    sig.channels.push_back(name);
    if (horizon == 0) horizon = values.size();
    if (values.size() != horizon)
      throw toggle::StlError("all channels must have the same length");
  }
  if (horizon == 0) throw toggle::StlError("signal needs at least one step");
  sig.values.assign(horizon, std::vector<double>(sig.channels.size(), 0.0));
  size_t c = 0;
  for (const auto& [name, values] : channels) {
    for (size_t t = 0; t < horizon; ++t) sig.values[t][c] = values[t];
    ++c;
  }
  return sig;
}

}  // namespace

PYBIND11_MODULE(_toggle, m) {
  m.doc() = "STL-constrained transformer compression search";

  py::class_<toggle::RunConfig>(m, "RunConfig")
      .def_static("parse", &toggle::parse_run_config, py::arg("text"))
      .def_static("load", &toggle::load_run_config, py::arg("path"))
      .def("validate", &toggle::RunConfig::validate)
      .def_property_readonly("budget", [](const toggle::RunConfig& c) { return c.budget; })
      .def_property_readonly("n_layers",
                             [](const toggle::RunConfig& c) { return c.arch.n_layers; });

  m.def("default_run_config", [] { return toggle::RunConfig{}; });

  m.def(
      "quantize",
      [](const std::vector<double>& weights, int bits) {
        Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(weights.data(), weights.size());
        Eigen::VectorXd q = toggle::quantize_component(w, bits);
        return std::vector<double>(q.data(), q.data() + q.size());
      },
      py::arg("weights"), py::arg("bits"));

  m.def(
      "prune",
      [](const std::vector<double>& weights, double ratio) {
        Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(weights.data(), weights.size());
        Eigen::VectorXd p = toggle::prune_component(w, ratio);
        return std::vector<double>(p.data(), p.data() + p.size());
      },
      py::arg("weights"), py::arg("ratio"));

  m.def(
      "robustness",
      [](const std::map<std::string, std::vector<double>>& channels,
         const std::string& formula) {
        toggle::InferenceSignal sig = signal_from_channels(channels);
        return toggle::robustness(toggle::parse_property_formula(formula), sig, 1);
      },
      py::arg("channels"), py::arg("formula"),
      "Robustness of 'always[a,b]( expr >= 0 )' over per-channel value lists.");

  m.def(
      "evaluate",
      [](const toggle::RunConfig& config, const std::string& kappa_json) {
        toggle::ReferenceModel base = toggle::build_model(config.arch, config.model_seed);
        toggle::EvaluationCorpus corpus = toggle::build_corpus(
            base, config.n_prompts, config.prompt_len, config.horizon, config.corpus_seed);
        toggle::CompressionConfig kappa =
            kappa_json == "identity"
                ? toggle::CompressionConfig::identity(config.arch)
                : toggle::kappa_from_json(config.arch, nlohmann::json::parse(kappa_json));
        toggle::EvaluationRecord rec =
            toggle::evaluate_config(kappa, base, corpus, config.spec, config.cost);
        return record_to_py(config.arch, rec);
      },
      py::arg("config"), py::arg("kappa_json"),
      "Evaluate one configuration; pass 'identity' or a kappa JSON string.");

  m.def(
      "search",
      [](const toggle::RunConfig& config, const std::string& out_dir) {
        toggle::SearchOutputs outputs = toggle::run_search_pipeline(config, out_dir);
        py::list records;
        for (const auto& rec : outputs.records) records.append(record_to_py(config.arch, rec));
        return records;
      },
      py::arg("config"), py::arg("out_dir"),
      "Run the full search pipeline; returns the evaluation records.");

  m.def(
      "pareto_front",
      [](const toggle::RunConfig& config, const std::string& log_path) {
        auto records = toggle::load_record_log(config.arch, log_path);
        py::list out;
        for (const auto& p : toggle::pareto_front(records, true)) {
          py::dict d;
          d["config_id"] = p.record.id;
          d["cost"] = p.record.cost;
          d["rho_overall"] = p.rho_overall;
          d["avg_pp"] = p.record.avg_pp;
          out.append(d);
        }
        return out;
      },
      py::arg("config"), py::arg("log_path"));
}
