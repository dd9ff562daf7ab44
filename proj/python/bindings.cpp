#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "prefalign/bench/bandit.hpp"
#include "prefalign/bench/gap_experiment.hpp"
#include "prefalign/cli/config.hpp"
#include "prefalign/cli/pipeline.hpp"
#include "prefalign/common/error.hpp"
#include "prefalign/common/log.hpp"
#include "prefalign/corpus/toy.hpp"
#include "prefalign/eval/metrics.hpp"
#include "prefalign/pairgen/classify.hpp"

namespace py = pybind11;
using namespace prefalign;

namespace {

bench::TabularPolicy to_policy(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows[0].empty()) throw ValidationError("policy table is empty");
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != rows[0].size()) throw ValidationError("policy rows differ in length");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return bench::TabularPolicy(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()), flat);
}

std::vector<double> flatten(const std::vector<std::vector<double>>& rows) {
  std::vector<double> out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

std::vector<std::vector<double>> unflatten(const bench::TabularPolicy& p) {
  std::vector<std::vector<double>> out;
  for (int x = 0; x < p.n_contexts; ++x) out.emplace_back(p.row(x).begin(), p.row(x).end());
  return out;
}

cli::RunConfig build_config(const std::string& config, const std::map<std::string, std::string>& overrides) {
  cli::RunConfig cfg = config.empty() ? cli::RunConfig{} : cli::load_config(config);
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  return cfg;
}

py::dict to_dict(const eval::BertScore& s) {
  py::dict d;
  d["recall"] = s.recall;
  d["precision"] = s.precision;
  d["f1"] = s.f1;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "prefalign native core";
  // later registrations are tried first
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  m.def("set_log_level", [](const std::string& level) {
    if (level == "off") set_log_level(LogLevel::Off);
    else if (level == "warn") set_log_level(LogLevel::Warn);
    else if (level == "info") set_log_level(LogLevel::Info);
    else if (level == "debug") set_log_level(LogLevel::Debug);
    else throw ValidationError("log level must be off, warn, info or debug");
  });

  m.def("make_toy_corpus", [](int n, std::uint64_t seed) {
    const auto toy = corpus::make_toy_corpus(n, seed);
    std::vector<std::string> lines;
    for (const auto& r : toy.records) {
      auto j = corpus::to_json(r);
      j["intended_type"] = toy.intended_type.at(r.id);
      lines.push_back(j.dump());
    }
    return lines;
  }, py::arg("n_reviews"), py::arg("seed"), "JSON line per synthetic review (with its intended type).");

  m.def("classify_negative", [](int du, int pu, int iu) -> std::optional<std::string> {
    auto t = pairgen::classify_negative(pairgen::scores_from_sums(du, pu, iu));
    if (!t) return std::nullopt;
    return pairgen::to_string(*t);
  }, py::arg("distributive"), py::arg("procedural"), py::arg("interactional"));

  m.def("classify_positive", [](const std::vector<bool>& answers) -> std::optional<std::string> {
    std::optional<pairgen::PositiveType> t;
    try {
      t = pairgen::classify_positive(answers);
    } catch (const pairgen::InconsistentAnnotation& e) {
      throw ValidationError(e.what());
    }
    if (!t) return std::nullopt;
    return pairgen::to_string(*t);
  }, py::arg("answers"));

  m.def("bertscore", [](const eval::Matrix& cand, const eval::Matrix& ref, double baseline) {
    return to_dict(eval::bertscore(cand, ref, baseline));
  }, py::arg("candidate"), py::arg("reference"), py::arg("baseline") = 0.0,
        "Rows must be unit vectors.");

  m.def("bertscore_text", [](const std::string& cand, const std::string& ref, int dim, std::uint64_t seed,
                             double baseline) {
    eval::HashEmbedding emb(dim, seed);
    return to_dict(eval::bertscore_text(cand, ref, emb, baseline));
  }, py::arg("candidate"), py::arg("reference"), py::arg("dim") = 64, py::arg("seed") = 0, py::arg("baseline") = 0.0);

  m.def("dpo_closed_form", [](const std::vector<std::vector<double>>& r, const std::vector<std::vector<double>>& ref,
                              double beta) {
    return unflatten(bench::dpo_closed_form(flatten(r), to_policy(ref), beta));
  }, py::arg("r_hat"), py::arg("pi_ref"), py::arg("beta"));

  m.def("optimize_objective", [](const std::vector<std::vector<double>>& r, const std::vector<std::vector<double>>& ref,
                                 const std::vector<double>& rho, double beta, double lambda) {
    return unflatten(bench::optimize_theoretical_objective(flatten(r), to_policy(ref), rho, beta, lambda).policy);
  }, py::arg("r_hat"), py::arg("pi_ref"), py::arg("rho"), py::arg("beta"), py::arg("lambda_"));

  m.def("config_values", [](const std::string& config, const std::map<std::string, std::string>& overrides) {
    return build_config(config, overrides).values();
  }, py::arg("config") = "", py::arg("overrides") = std::map<std::string, std::string>{});

  m.def("run_pipeline", [](const std::string& config, const std::string& stages,
                           const std::map<std::string, std::string>& overrides) {
    auto cfg = build_config(config, overrides);
    py::gil_scoped_release release;
    return cli::run_pipeline(cfg, cli::parse_stage_list(stages));
  }, py::arg("config") = "", py::arg("stages") = "all",
        py::arg("overrides") = std::map<std::string, std::string>{},
        "Returns 0 on success, 1 when a stage failed (the error is logged).");

  m.def("theorybench", [](const std::string& config, const std::map<std::string, std::string>& overrides) {
    auto cfg = build_config(config, overrides);
    py::gil_scoped_release release;
    return cli::theorybench_cmd(cfg);
  }, py::arg("config") = "", py::arg("overrides") = std::map<std::string, std::string>{});

  m.def("pipeline_stages", &cli::pipeline_stages);
}
