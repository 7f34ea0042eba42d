#include <optional>

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dfac/cli/verify.hpp"
#include "dfac/dist/distributions.hpp"
#include "dfac/envs/matrix_game.hpp"
#include "dfac/error.hpp"
#include "dfac/eval/metrics.hpp"
#include "dfac/mixers/mix.hpp"
#include "dfac/training/learner.hpp"

namespace py = pybind11;
using namespace dfac;

namespace {

// JSON crosses the boundary as text; the Python side parses it.
envs::MatrixGameSpec spec_or_default(const std::string& text) {
  if (text.empty()) return envs::table1_spec();
  return envs::spec_from_json(nlohmann::json::parse(text));
}

std::string train_json(const std::string& config, const std::string& spec_text) {
  const auto spec = spec_or_default(spec_text);
  const auto c = training::train_config_from_json(nlohmann::json::parse(config));
  std::optional<training::TrainResult> res;
  {
    py::gil_scoped_release release;
    res.emplace(training::train(c, spec));
  }
  const auto& r = *res;
  nlohmann::json log = nlohmann::json::array();
  for (const auto& row : r.log)
    log.push_back({{"episode", row.episode}, {"loss", row.loss}, {"return", row.ret}, {"qdist", row.qdist},
                   {"wdist", row.wdist}});
  nlohmann::json digm = nlohmann::json::array();
  for (const auto& d : r.digm) digm.push_back({{"episode", d.episode}, {"holds", d.holds}});
  nlohmann::json ckpt = training::checkpoint_json(c, r.model);
  ckpt["spec"] = envs::spec_to_json(spec);
  return nlohmann::json{{"metrics", eval::to_json(r.final_metrics, spec)},
                        {"log", log},
                        {"digm", digm},
                        {"steps", r.steps},
                        {"checkpoint", ckpt}}
      .dump();
}

envs::MatrixGameSpec checkpoint_spec(const nlohmann::json& ckpt, const std::string& spec_text) {
  if (!spec_text.empty()) return spec_or_default(spec_text);
  if (ckpt.contains("spec")) return envs::spec_from_json(ckpt["spec"], "checkpoint spec");
  return envs::table1_spec();
}

std::string evaluate_json(const std::string& checkpoint, const std::string& spec_text, std::size_t grid) {
  const auto ckpt = nlohmann::json::parse(checkpoint);
  const auto spec = checkpoint_spec(ckpt, spec_text);
  training::TrainConfig config;
  const auto model = training::load_checkpoint(ckpt, spec, &config);
  const auto report = eval::evaluate_metrics(model, spec, {grid, config.n_eval_quantiles});
  auto j = eval::to_json(report, spec);
  j["digm_holds"] = eval::audit_digm(model, spec, config.n_eval_quantiles).holds;
  return j.dump();
}

std::string export_json(const std::string& checkpoint, const std::string& action, const std::string& spec_text,
                        std::size_t grid) {
  const auto ckpt = nlohmann::json::parse(checkpoint);
  const auto spec = checkpoint_spec(ckpt, spec_text);
  const auto model = training::load_checkpoint(ckpt, spec);
  return eval::export_factorization(model, spec, spec.parse_joint_action(action), grid).dump();
}

}  // namespace

PYBIND11_MODULE(_dfac, m) {
  m.doc() = "Distributional value function factorization on cooperative matrix games";

  static py::exception<Error> base(m, "DfacError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());

  m.def("table1_spec", [] { return envs::spec_to_json(envs::table1_spec()).dump(); });
  m.def("ground_truth_q", [](const std::string& spec) { return envs::ground_truth(spec_or_default(spec)).q; },
        py::arg("spec") = "");

  m.def(
      "convolve_pmf",
      [](std::vector<double> a_atoms, std::vector<double> a_probs, std::vector<double> b_atoms,
         std::vector<double> b_probs) {
        const auto r = dist::convolve_pmf({std::move(a_atoms), std::move(a_probs)}, {std::move(b_atoms), std::move(b_probs)});
        return std::make_pair(r.atoms, r.probs);
      },
      py::arg("a_atoms"), py::arg("a_probs"), py::arg("b_atoms"), py::arg("b_probs"));
  m.def(
      "project_categorical",
      [](const std::vector<double>& atoms, const std::vector<double>& probs, double vmin, double vmax, std::size_t n) {
        return dist::project_categorical(atoms, probs, dist::UniformSupport{vmin, vmax, n}).probs;
      },
      py::arg("atoms"), py::arg("probs"), py::arg("vmin"), py::arg("vmax"), py::arg("n"));
  m.def("convolve_direct", [](const std::vector<double>& a, const std::vector<double>& b) { return dist::convolve_direct(a, b); });
  m.def("convolve_fft", [](const std::vector<double>& a, const std::vector<double>& b) { return dist::convolve_fft(a, b); });
  m.def(
      "shape_sum",
      [](const std::vector<double>& levels, const std::vector<std::vector<double>>& values) {
        std::vector<dist::QuantileBatch> z;
        std::vector<double> q;
        for (const auto& v : values) {
          z.push_back({levels, v});
          q.push_back(dist::expectation(z.back()));
        }
        return mixers::shape_sum(z, q).values;
      },
      py::arg("levels"), py::arg("values"));
  m.def(
      "check_digm",
      [](const std::vector<std::vector<double>>& agent_q,
         const std::function<double(std::vector<std::size_t>)>& joint_expectation) {
        const auto v = mixers::check_digm(agent_q, [&](std::span<const std::size_t> u) {
          return joint_expectation(std::vector<std::size_t>(u.begin(), u.end()));
        });
        return py::dict(py::arg("holds") = v.holds, py::arg("joint_argmax") = v.joint_argmax,
                        py::arg("agent_argmax") = v.agent_argmax);
      },
      py::arg("agent_q"), py::arg("joint_expectation"));

  m.def("train", &train_json, py::arg("config"), py::arg("spec") = "");
  m.def("evaluate", &evaluate_json, py::arg("checkpoint"), py::arg("spec") = "", py::arg("grid") = 10000);
  m.def("export", &export_json, py::arg("checkpoint"), py::arg("action"), py::arg("spec") = "", py::arg("grid") = 10000);
  m.def(
      "verify",
      [](std::uint64_t seed) {
        std::vector<std::tuple<std::string, bool, std::string>> out;
        for (const auto& r : cli::run_verify(seed)) out.emplace_back(r.name, r.passed, r.detail);
        return out;
      },
      py::arg("seed") = 0);
}
