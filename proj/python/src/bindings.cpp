// SPDX-License-Identifier: Apache-2.0
// Python bindings: recall metric, two-gate helpers and the control-plane service.
#include <care/benchmark.hpp>
#include <care/error.hpp>
#include <care/service.hpp>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using nlohmann::json;
using namespace care;

namespace
{

py::object to_python(const json& value)
{
    return py::module_::import("json").attr("loads")(value.dump());
}

json from_python(const py::handle& value)
{
    return json::parse(py::module_::import("json").attr("dumps")(value).cast<std::string>());
}

py::object to_fraction(const bench::Rational& r)
{
    return py::module_::import("fractions").attr("Fraction")(r.num(), r.den());
}

control::Caller caller(const std::string& role, const std::string& actor)
{
    return { role_from_string(role), actor.empty() ? role : actor };
}

/// Runs a service call without the GIL and converts the JSON result.
template <typename Fn>
py::object call(Fn&& fn)
{
    json result;
    {
        py::gil_scoped_release release;
        result = fn();
    }
    return to_python(result);
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "CARE workbench core: stage-gated agent design and two-gate evaluation";

    // CareError(code, message, details)
    PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> careError;
    careError.call_once_and_store_result([&] { return py::exception<Error>(m, "CareError"); });
    py::register_exception_translator([](std::exception_ptr p) {
        try
        {
            if (p)
                std::rethrow_exception(p);
        }
        catch (const Error& e)
        {
            auto const args = py::make_tuple(std::string(to_string(e.code())), std::string(e.what()),
                                             to_python(e.details()));
            py::set_error(careError.get_stored(), args);
        }
    });

    m.def(
        "recall_at_k",
        [](const std::set<std::string>& expected, const std::vector<std::string>& ranked, int k) {
            return to_fraction(bench::recall_at_k(expected, ranked, k));
        },
        py::arg("expected"), py::arg("ranked"), py::arg("k"),
        "|expected ∩ ranked[:k]| / |expected| as a fractions.Fraction.");

    m.def(
        "percent",
        [](std::int64_t num, std::int64_t den) { return bench::Rational(num, den).percent(); }, py::arg("num"),
        py::arg("den"), "One-decimal percentage, rounded half up.");

    m.def(
        "render_runs",
        [](const py::object& synthetic, const py::object& gold) {
            std::optional<json> g;
            if (!gold.is_none())
                g = from_python(gold);
            return control::render_runs(from_python(synthetic), g);
        },
        py::arg("synthetic_run"), py::arg("gold_run") = py::none(), "Tab-separated results table of stored runs.");

    py::class_<control::Service>(m, "Service")
        .def(py::init([](const std::filesystem::path& root, const std::string& transport,
                         const std::optional<std::string>& cmr, std::optional<std::uint64_t> idSeed) {
                 control::ServiceConfig config;
                 config.root = root;
                 config.transport = transport;
                 config.cmr = cmr;
                 config.idSeed = idSeed;
                 return std::make_unique<control::Service>(std::move(config));
             }),
             py::arg("root"), py::arg("transport") = "offline", py::arg("cmr") = py::none(),
             py::arg("id_seed") = py::none())
        .def("create_project",
             [](control::Service& s, const std::string& id, const py::object& options) {
                 auto const o = options.is_none() ? json::object() : from_python(options);
                 return call([&] { return s.create_project(id, o); });
             },
             py::arg("project_id"), py::arg("options") = py::none())
        .def("list_projects", [](control::Service& s) { return call([&] { return s.list_projects(); }); })
        .def("get_project", [](control::Service& s, const std::string& p) { return call([&] { return s.get_project(p); }); })
        .def("gate_status", [](control::Service& s, const std::string& p) { return call([&] { return s.gate_status(p); }); })
        .def("list_artifacts",
             [](control::Service& s, const std::string& p) { return call([&] { return s.list_artifacts(p); }); })
        .def("get_artifact", [](control::Service& s, const std::string& p,
                                const std::string& a) { return call([&] { return s.get_artifact(p, a); }); })
        .def("create_session",
             [](control::Service& s, const std::string& p, const std::optional<std::string>& phase) {
                 std::optional<PhaseId> ph;
                 if (phase)
                     ph = phase_from_string(*phase);
                 return call([&] { return s.create_session(p, ph); });
             },
             py::arg("project_id"), py::arg("phase") = py::none())
        .def("next_questions", [](control::Service& s, const std::string& p,
                                  const std::string& session) { return call([&] { return s.next_questions(p, session); }); })
        .def("answer",
             [](control::Service& s, const std::string& p, const std::string& session, const std::string& question,
                const std::string& text, const std::string& role, const std::string& actor) {
                 auto const c = caller(role, actor);
                 return call([&] { return s.answer(p, session, question, text, c); });
             },
             py::arg("project_id"), py::arg("session_id"), py::arg("question_id"), py::arg("text"),
             py::arg("role") = "sme", py::arg("actor") = "")
        .def("draft",
             [](control::Service& s, const std::string& p, const std::string& session) {
                 return call([&] { return s.draft(p, session); });
             },
             py::arg("project_id"), py::arg("session_id"))
        .def("approve",
             [](control::Service& s, const std::string& p, const std::string& artifact, int version,
                const std::string& role, const std::string& actor, const std::string& verdict, const std::string& note) {
                 auto const c = caller(role, actor);
                 auto const v = verdict_from_string(verdict);
                 return call([&] { return s.approve(p, artifact, version, v, note, c); });
             },
             py::arg("project_id"), py::arg("artifact_id"), py::arg("version"), py::arg("role"), py::arg("actor") = "",
             py::arg("verdict") = "approve", py::arg("note") = "")
        .def("advance", [](control::Service& s, const std::string& p) { return call([&] { return s.advance(p); }); })
        .def("revisit",
             [](control::Service& s, const std::string& p, const std::string& to) {
                 auto const target = phase_from_string(to);
                 return call([&] { return s.revisit(p, target); });
             },
             py::arg("project_id"), py::arg("to"))
        .def("generate_benchmark",
             [](control::Service& s, const std::string& p, const std::filesystem::path& corpus, const std::string& name,
                int maxAttempts) {
                 return call([&] { return s.generate_benchmark(p, bench::load_corpus(corpus), name, maxAttempts); });
             },
             py::arg("project_id"), py::arg("corpus_path"), py::arg("name") = "synthetic", py::arg("max_attempts") = 5)
        .def("import_benchmark",
             [](control::Service& s, const std::string& p, const std::filesystem::path& path) {
                 return call([&] { return s.put_benchmark(p, bench::load_benchmark(path)); });
             },
             py::arg("project_id"), py::arg("path"))
        .def("run",
             [](control::Service& s, const std::string& p, const std::string& benchmark,
                const std::vector<std::string>& agents, const std::vector<int>& ks) {
                 return call([&] { return s.run(p, benchmark, agents, ks); });
             },
             py::arg("project_id"), py::arg("benchmark"), py::arg("agents") = std::vector<std::string> {},
             py::arg("ks") = std::vector<int> { 1, 3, 5 })
        .def("two_gate",
             [](control::Service& s, const std::string& p, const std::string& synthetic,
                const std::optional<std::string>& gold) { return call([&] { return s.two_gate(p, synthetic, gold); }); },
             py::arg("project_id"), py::arg("synthetic_run"), py::arg("gold_run") = py::none());
}
