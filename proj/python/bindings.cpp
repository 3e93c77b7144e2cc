// Python bindings. Structured values cross the boundary as JSON text (the
// same documents the CLI reads and writes); matrices cross as numpy arrays.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "abkb/charact.hpp"
#include "abkb/corpus.hpp"
#include "abkb/errors.hpp"
#include "abkb/eval.hpp"
#include "abkb/fitts.hpp"
#include "abkb/hexgeom.hpp"
#include "abkb/layout.hpp"
#include "abkb/qap.hpp"

namespace py = pybind11;
using namespace abkb;
using nlohmann::json;

namespace {

json parse(const std::string& text) { return json::parse(text); }

DirectionalFittsModel model_or_generic(const std::optional<std::string>& model) {
    return model ? model_from_json(parse(*model)) : generic_model(130.0);
}

std::vector<MovementSample> samples_from_json(const json& doc) {
    std::vector<MovementSample> out;
    for (const auto& s : doc) {
        MovementSample m;
        m.distance = s.at("distance").get<double>();
        if (s.contains("angle") && !s.at("angle").is_null()) m.angle = s.at("angle").get<double>();
        m.movement_time = s.at("movement_time").get<double>();
        m.demanded_bin = s.value("demanded_bin", 0);
        m.distance_class = s.value("distance_class", 0);
        out.push_back(m);
    }
    return out;
}

py::tuple assignment(const Assignment& a) { return py::make_tuple(a.mapping, a.objective); }

}  // namespace

PYBIND11_MODULE(_abkb, m) {
    m.doc() = "Ability-based keyboard personalization core";

    // Translators run newest first, so the base class goes in first.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<EmptyCorpus>(m, "EmptyCorpus", PyExc_ValueError);
    py::register_exception<SizeGuard>(m, "SizeGuard", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    m.def("build_grid", [](int rows, int cols, double w) { return grid_to_json(build_grid(rows, cols, w)).dump(); },
          py::arg("rows") = 9, py::arg("cols") = 9, py::arg("key_width") = 130.0);
    m.def("angle_bin", &angle_bin, py::arg("angle"));

    m.def("generic_model", [](double w) { return model_to_json(generic_model(w)).dump(); }, py::arg("key_width") = 130.0);
    m.def("anisotropic_model",
          [](double a, double b_vertical, double ratio, double w) {
              return model_to_json(anisotropic_model(w, a, b_vertical, ratio)).dump();
          },
          py::arg("a"), py::arg("b_vertical"), py::arg("horizontal_ratio"), py::arg("key_width") = 130.0);
    m.def("fit_bins",
          [](const std::string& samples, double w) {
              const auto s = samples_from_json(parse(samples));
              return model_to_json(fit_bins(s, w)).dump();
          },
          py::arg("samples"), py::arg("key_width") = 130.0);
    m.def("predict_mt",
          [](const std::string& model, std::optional<double> angle, double distance) {
              return predict_mt(model_from_json(parse(model)), angle, distance);
          },
          py::arg("model"), py::arg("angle"), py::arg("distance"));

    m.def("digraphs", [](const std::vector<std::string>& lines) { return digraphs_to_json(ingest_phrases(lines)).dump(); },
          py::arg("lines"));
    m.def("joint_probabilities",
          [](const std::vector<std::string>& lines) {
              const auto p = joint_probabilities(ingest_phrases(lines));
              Matrix out(kAlphabetSize, kAlphabetSize);
              for (int i = 0; i < kAlphabetSize; ++i)
                  for (int j = 0; j < kAlphabetSize; ++j) out(i, j) = p[i][j];
              return out;
          },
          py::arg("lines"));

    m.def("solve_lap",
          [](const Matrix& cost) {
              const auto s = solve_lap(cost);
              return py::make_tuple(s.assignment, s.objective);
          },
          py::arg("cost"));
    m.def("objective", [](const Matrix& flow, const Matrix& cost, const std::vector<int>& mapping) {
        return objective({flow, cost}, mapping);
    });
    m.def("brute_force", [](const Matrix& flow, const Matrix& cost) { return assignment(brute_force({flow, cost})); },
          py::arg("flow"), py::arg("cost"));
    m.def("solve_faq",
          [](const Matrix& flow, const Matrix& cost, int restarts, int max_iters, double tol, std::uint64_t seed) {
              FaqOptions o;
              o.restarts = restarts;
              o.max_iters = max_iters;
              o.tol = tol;
              o.seed = seed;
              Assignment a;
              {
                  py::gil_scoped_release release;
                  a = solve_faq({flow, cost}, o);
              }
              return assignment(a);
          },
          py::arg("flow"), py::arg("cost"), py::arg("restarts") = 10, py::arg("max_iters") = 30, py::arg("tol") = 1e-6,
          py::arg("seed") = 0);

    m.def("generate_layout",
          [](const std::string& kind, const std::optional<std::string>& model, const std::vector<std::string>& lines,
             std::uint64_t seed, int restarts, int max_iters, double tol) {
              SolverParams p{restarts, max_iters, tol};
              const auto digraphs = ingest_phrases(lines);
              const auto mdl = model_or_generic(model);
              const LayoutKind k = layout_kind_from_string(kind);
              py::gil_scoped_release release;
              return layout_to_json(generate_layout(k, mdl, digraphs, standard_grid(), p, seed)).dump();
          },
          py::arg("kind"), py::arg("model"), py::arg("lines"), py::arg("seed"), py::arg("restarts") = 10,
          py::arg("max_iters") = 30, py::arg("tol") = 1e-6);
    m.def("qwerty_layout", [] { return layout_to_json(qwerty_layout()).dump(); });
    m.def("flip_vertical",
          [](const std::string& layout) { return layout_to_json(flip_vertical(layout_from_json(parse(layout)))).dump(); },
          py::arg("layout"));
    m.def("energy",
          [](const std::string& layout, const std::vector<std::string>& lines, const std::optional<std::string>& model) {
              return fitts_digraph_energy(layout_from_json(parse(layout)), ingest_phrases(lines), model_or_generic(model));
          },
          py::arg("layout"), py::arg("lines"), py::arg("model") = py::none());

    m.def("wolpaw_itr", &wolpaw_itr, py::arg("n_targets"), py::arg("p"), py::arg("selections_per_minute"));
    m.def("simulate_characterization",
          [](const std::string& user, std::uint64_t seed) {
              const auto s = simulate_characterization(user_from_json(parse(user)), standard_grid(), seed);
              return py::make_tuple(model_to_json(s.model()).dump(), export_log(s));
          },
          py::arg("user"), py::arg("seed"));
    m.def("replay_log", [](const std::string& log) { return model_to_json(import_log(log).model()).dump(); },
          py::arg("log"));
    m.def("evaluate",
          [](const std::string& layout, const std::string& user, const std::vector<std::string>& prompts) {
              const auto l = layout_from_json(parse(layout));
              const auto u = user_from_json(parse(user));
              auto report = compute_metrics(simulate_transcription(u, l, prompts), l);
              report.user_ref = u.name;
              return report_to_json(report).dump();
          },
          py::arg("layout"), py::arg("user"), py::arg("prompts"));
}
