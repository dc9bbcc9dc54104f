// SPDX-License-Identifier: Apache-2.0
// Same httplib configuration as http_clients.cpp (one definition of its types).
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <care/api_server.hpp>
#include <care/error.hpp>

#include <fstream>

namespace care::control
{

using nlohmann::json;

std::vector<TokenGrant> load_tokens(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::not_found, "cannot read token file " + path.string());
    auto const j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("tokens") || !j["tokens"].is_array())
        throw Error(ErrorCode::invalid_argument, "token file needs a \"tokens\" array");
    std::vector<TokenGrant> out;
    for (const auto& t: j["tokens"])
    {
        TokenGrant g { t.at("token").get<std::string>(), role_from_string(t.at("role").get<std::string>()),
                       t.value("actor", std::string()) };
        if (g.token.size() < 8)
            throw Error(ErrorCode::invalid_argument, "tokens must be at least 8 characters");
        if (g.actor.empty())
            g.actor = std::string(to_string(g.role));
        out.push_back(std::move(g));
    }
    return out;
}

struct ApiServer::Impl
{
    Service& service;
    std::vector<TokenGrant> tokens;
    httplib::Server server;

    using Handler = std::function<json(const httplib::Request&, const Caller&)>;

    Caller authenticate(const httplib::Request& req) const
    {
        auto const header = req.get_header_value("Authorization");
        static constexpr std::string_view prefix = "Bearer ";
        if (header.rfind(prefix, 0) == 0)
        {
            auto const token = header.substr(prefix.size());
            for (const auto& g: tokens)
                if (g.token == token)
                    return { g.role, g.actor };
        }
        throw Error(ErrorCode::unauthorized, "missing or unknown bearer token");
    }

    static void send_error(httplib::Response& res, const Error& e)
    {
        res.status = http_status(e.code());
        res.set_content(e.to_json().dump(), "application/json");
    }

    void route(const char* method, const std::string& pattern, Handler handler, int okStatus = 200)
    {
        auto wrapped = [this, handler = std::move(handler), okStatus](const httplib::Request& req,
                                                                        httplib::Response& res) {
            try
            {
                auto const caller = authenticate(req);
                auto const body = handler(req, caller);
                res.status = okStatus;
                if (!body.is_null())
                    res.set_content(body.dump(), "application/json");
            }
            catch (const Error& e)
            {
                send_error(res, e);
            }
            catch (const json::exception& e)
            {
                send_error(res, Error(ErrorCode::invalid_argument, std::string("bad request body: ") + e.what()));
            }
            catch (const std::exception& e)
            {
                send_error(res, Error(ErrorCode::io_error, e.what()));
            }
        };
        auto const full = "/api/v1" + pattern;
        if (std::string_view(method) == "GET")
            server.Get(full, wrapped);
        else if (std::string_view(method) == "POST")
            server.Post(full, wrapped);
        else
            server.Delete(full, wrapped);
    }

    Impl(Service& s, std::vector<TokenGrant> t): service(s), tokens(std::move(t)) { install(); }

    void install();
};

namespace
{

json body_of(const httplib::Request& req)
{
    if (req.body.empty())
        return json::object();
    auto j = json::parse(req.body);
    if (!j.is_object())
        throw Error(ErrorCode::invalid_argument, "request body must be a JSON object");
    return j;
}

std::optional<std::string> idempotency_key(const httplib::Request& req, const json& body)
{
    if (req.has_header("Idempotency-Key"))
        return req.get_header_value("Idempotency-Key");
    if (body.contains("idempotency_key") && body["idempotency_key"].is_string())
        return body["idempotency_key"].get<std::string>();
    return std::nullopt;
}

std::string str(const json& body, const char* key)
{
    if (!body.contains(key) || !body[key].is_string())
        throw Error(ErrorCode::invalid_argument, std::string("missing string field ") + key);
    return body[key].get<std::string>();
}

int integer(const json& body, const char* key)
{
    if (!body.contains(key) || !body[key].is_number_integer())
        throw Error(ErrorCode::invalid_argument, std::string("missing integer field ") + key);
    return body[key].get<int>();
}

std::string m(const httplib::Request& req, std::size_t i)
{
    return req.matches[static_cast<int>(i)].str();
}

} // namespace

void ApiServer::Impl::install()
{
    constexpr const char* id = "([A-Za-z0-9._-]+)";
    auto const P = std::string("/projects/") + id;
    auto& s = service;

    server.Get("/api/v1/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"status":"ok"})", "application/json");
    });
    route("GET", "/whoami", [](const auto&, const Caller& c) {
        return json { { "role", to_string(c.role) }, { "actor", c.actor } };
    });

    // projects
    route("GET", "/projects", [&s](const auto&, const Caller&) { return s.list_projects(); });
    route(
        "POST", "/projects",
        [&s](const httplib::Request& req, const Caller&) {
            auto const b = body_of(req);
            return s.create_project(str(b, "project_id"), b);
        },
        201);
    route("GET", P, [&s](const httplib::Request& req, const Caller&) { return s.get_project(m(req, 1)); });
    route(
        "DELETE", P,
        [&s](const httplib::Request& req, const Caller&) {
            s.delete_project(m(req, 1));
            return json();
        },
        204);

    // artifacts
    route("GET", P + "/artifacts", [&s](const httplib::Request& req, const Caller&) { return s.list_artifacts(m(req, 1)); });
    route(
        "POST", P + "/artifacts",
        [&s](const httplib::Request& req, const Caller& c) {
            auto const b = body_of(req);
            auto const kind = kind_from_string(str(b, "kind"));
            auto const phase = b.contains("phase") ? phase_from_string(str(b, "phase")) : phase_of(kind);
            return s.create_artifact(m(req, 1), phase, kind, str(b, "content"), c);
        },
        201);
    route("GET", P + "/artifacts/" + id,
          [&s](const httplib::Request& req, const Caller&) { return s.get_artifact(m(req, 1), m(req, 2)); });
    route("GET", P + "/artifacts/" + id + "/lineage",
          [&s](const httplib::Request& req, const Caller&) { return s.artifact_lineage(m(req, 1), m(req, 2)); });

    // revisions
    route("GET", P + "/revisions", [&s](const httplib::Request& req, const Caller&) { return s.list_revisions(m(req, 1)); });
    route(
        "POST", P + "/revisions",
        [&s](const httplib::Request& req, const Caller& c) {
            auto const b = body_of(req);
            return s.propose_revision(m(req, 1), str(b, "artifact_id"), integer(b, "base_version"), str(b, "diff"),
                                      b.value("rationale", std::string()), c);
        },
        201);
    route("GET", P + "/revisions/" + id,
          [&s](const httplib::Request& req, const Caller&) { return s.get_revision(m(req, 1), m(req, 2)); });
    route("POST", P + "/revisions/" + id + "/apply", [&s](const httplib::Request& req, const Caller&) {
        auto const b = body_of(req);
        if (!b.contains("accept") || !b["accept"].is_boolean())
            throw Error(ErrorCode::invalid_argument, "missing boolean field accept");
        return s.apply_revision(m(req, 1), m(req, 2), b["accept"].get<bool>());
    });

    // approvals and gates
    route(
        "POST", P + "/approvals",
        [&s](const httplib::Request& req, const Caller& c) {
            auto const b = body_of(req);
            auto const verdict = verdict_from_string(b.value("verdict", std::string("approve")));
            return s.approve(m(req, 1), str(b, "artifact_id"), integer(b, "version"), verdict,
                             b.value("note", std::string()), c);
        },
        201);
    route("GET", P + "/gate-status", [&s](const httplib::Request& req, const Caller&) { return s.gate_status(m(req, 1)); });
    route("POST", P + "/advance", [&s](const httplib::Request& req, const Caller&) {
        auto const b = body_of(req);
        return s.advance(m(req, 1), idempotency_key(req, b));
    });
    route("POST", P + "/revisit", [&s](const httplib::Request& req, const Caller&) {
        auto const b = body_of(req);
        return s.revisit(m(req, 1), phase_from_string(str(b, "to")), idempotency_key(req, b));
    });

    // elicitation
    route("GET", P + "/sessions", [&s](const httplib::Request& req, const Caller&) { return s.list_sessions(m(req, 1)); });
    route(
        "POST", P + "/sessions",
        [&s](const httplib::Request& req, const Caller&) {
            auto const b = body_of(req);
            std::optional<PhaseId> phase;
            if (b.contains("phase"))
                phase = phase_from_string(str(b, "phase"));
            return s.create_session(m(req, 1), phase);
        },
        201);
    route("GET", P + "/sessions/" + id,
          [&s](const httplib::Request& req, const Caller&) { return s.get_session(m(req, 1), m(req, 2)); });
    route("GET", P + "/sessions/" + id + "/next-questions",
          [&s](const httplib::Request& req, const Caller&) { return s.next_questions(m(req, 1), m(req, 2)); });
    route(
        "POST", P + "/sessions/" + id + "/answers",
        [&s](const httplib::Request& req, const Caller& c) {
            auto const b = body_of(req);
            return s.answer(m(req, 1), m(req, 2), str(b, "question_id"), str(b, "text"), c);
        },
        201);
    route("POST", P + "/sessions/" + id + "/summary",
          [&s](const httplib::Request& req, const Caller&) { return s.summarize(m(req, 1), m(req, 2)); });
    route(
        "POST", P + "/draft",
        [&s](const httplib::Request& req, const Caller&) {
            auto const b = body_of(req);
            std::optional<ArtifactKind> kind;
            if (b.contains("kind"))
                kind = kind_from_string(str(b, "kind"));
            return s.draft(m(req, 1), str(b, "session_id"), kind);
        },
        201);

    // benchmarks and runs
    route("GET", P + "/benchmarks", [&s](const httplib::Request& req, const Caller&) { return s.list_benchmarks(m(req, 1)); });
    route(
        "POST", P + "/benchmarks",
        [&s](const httplib::Request& req, const Caller&) { return s.put_benchmark(m(req, 1), bench::benchmark_from_json(body_of(req))); },
        201);
    route("GET", P + "/benchmarks/" + id,
          [&s](const httplib::Request& req, const Caller&) { return bench::to_json(s.get_benchmark(m(req, 1), m(req, 2))); });
    route(
        "POST", P + "/benchmarks/generate",
        [&s](const httplib::Request& req, const Caller&) {
            auto const b = body_of(req);
            std::vector<bench::CorpusDocument> docs;
            for (const auto& d: b.at("documents"))
            {
                bench::CorpusDocument doc { str(d, "doc_id"), str(d, "text"), {} };
                for (const auto& c: d.value("cited_ids", json::array()))
                    doc.citedIds.insert(c.get<std::string>());
                docs.push_back(std::move(doc));
            }
            return s.generate_benchmark(m(req, 1), docs, b.value("name", std::string("synthetic")),
                                        b.value("max_attempts", 5));
        },
        201);
    route("GET", P + "/runs", [&s](const httplib::Request& req, const Caller&) { return s.list_runs(m(req, 1)); });
    route(
        "POST", P + "/runs",
        [&s](const httplib::Request& req, const Caller&) {
            auto const b = body_of(req);
            auto const agents = b.value("agents", std::vector<std::string> {});
            auto const ks = b.value("ks", std::vector<int> { 1, 3, 5 });
            return s.run(m(req, 1), str(b, "benchmark"), agents, ks);
        },
        201);
    route("GET", P + "/runs/two-gate", [&s](const httplib::Request& req, const Caller&) {
        if (!req.has_param("synthetic"))
            throw Error(ErrorCode::invalid_argument, "query parameter synthetic is required");
        std::optional<std::string> gold;
        if (req.has_param("gold"))
            gold = req.get_param_value("gold");
        return s.two_gate(m(req, 1), req.get_param_value("synthetic"), gold);
    });
    route("GET", P + "/runs/" + id + "/report",
          [&s](const httplib::Request& req, const Caller&) { return s.get_report(m(req, 1), m(req, 2)); });

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty() && res.status == 404)
            res.set_content(Error(ErrorCode::not_found, "no such route").to_json().dump(), "application/json");
    });
}

ApiServer::ApiServer(Service& service, std::vector<TokenGrant> tokens):
    _impl(std::make_unique<Impl>(service, std::move(tokens)))
{
}

ApiServer::~ApiServer()
{
    stop();
}

int ApiServer::bind(const std::string& host, int port)
{
    if (port == 0)
    {
        auto const bound = _impl->server.bind_to_any_port(host);
        if (bound < 0)
            throw Error(ErrorCode::io_error, "cannot bind " + host);
        return bound;
    }
    if (!_impl->server.bind_to_port(host, port))
        throw Error(ErrorCode::io_error, "cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void ApiServer::listen()
{
    _impl->server.listen_after_bind();
}

int ApiServer::start(const std::string& host, int port)
{
    auto const bound = bind(host, port);
    _thread = std::thread([this] { listen(); });
    _impl->server.wait_until_ready();
    return bound;
}

void ApiServer::stop()
{
    _impl->server.stop();
    if (_thread.joinable())
        _thread.join();
}

} // namespace care::control
