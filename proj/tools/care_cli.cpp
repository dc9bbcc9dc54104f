// SPDX-License-Identifier: Apache-2.0
// care: command-line front end of the control plane.
#include <care/api_server.hpp>
#include <care/error.hpp>
#include <care/service.hpp>

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using care::Error;
using care::ErrorCode;
using nlohmann::json;
using namespace care::control;

namespace
{

std::string env_or(const char* name, std::string fallback)
{
    const char* value = std::getenv(name);
    return value && *value ? std::string(value) : fallback;
}

struct Globals
{
    std::string root = env_or("CARE_ROOT", "care-data");
    std::string project = env_or("CARE_PROJECT", "");
    std::string transport = env_or("CARE_TRANSPORT", "offline");
    std::string cmr = env_or("CARE_CMR", "");
    std::string actor = env_or("CARE_ACTOR", "");
    bool json = false;
};

Service make_service(const Globals& g)
{
    ServiceConfig config;
    config.root = g.root;
    config.transport = g.transport;
    if (!g.cmr.empty())
        config.cmr = g.cmr;
    return Service(std::move(config));
}

const std::string& require_project(const Globals& g)
{
    if (g.project.empty())
        throw Error(ErrorCode::invalid_argument, "no project given (use --project or CARE_PROJECT)");
    return g.project;
}

void print(const json& value)
{
    std::cout << value.dump(2) << '\n';
}

void print_gate(const json& status)
{
    std::cout << "phase " << status["current_phase"].get<std::string>() << ": gate "
              << (status["satisfied"].get<bool>() ? "satisfied" : "not satisfied") << '\n';
    for (const auto& g: status["gates"])
    {
        if (g["satisfied"].get<bool>())
            continue;
        for (const auto& missing: g["missing"])
            std::cout << "  " << g["phase"].get<std::string>() << " missing " << missing["kind"].get<std::string>()
                      << " (" << missing["reason"].get<std::string>() << ")\n";
    }
}

json read_json(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::not_found, "cannot read " + path.string());
    return json::parse(in);
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out)
        throw Error(ErrorCode::io_error, "cannot write " + path.string());
}

/// Answers for open questions, keyed by dimension id: a string or a list of
/// strings (each becomes one answer).
std::map<std::string, std::vector<std::string>> load_answers(const fs::path& path, const std::string& phase)
{
    auto j = read_json(path);
    if (j.contains(phase))
        j = j[phase];
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& [dim, value]: j.items())
    {
        if (value.is_string())
            out[dim].push_back(value.get<std::string>());
        else if (value.is_array())
            for (const auto& v: value)
                out[dim].push_back(v.get<std::string>());
    }
    return out;
}

std::string latest_session(Service& service, const std::string& project, const std::string& phase)
{
    std::string found;
    for (const auto& s: service.list_sessions(project))
        if (s["phase"] == phase)
            found = s["session_id"].get<std::string>();
    return found;
}

std::string resolve_artifact(Service& service, const std::string& project, const std::string& artifact,
                             const std::string& kind)
{
    if (!artifact.empty())
        return artifact;
    if (kind.empty())
        throw Error(ErrorCode::invalid_argument, "pass --artifact or --kind");
    std::string found;
    for (const auto& a: service.list_artifacts(project))
        if (a["kind"] == kind)
            found = a["artifact_id"].get<std::string>();
    if (found.empty())
        throw Error(ErrorCode::not_found, "no " + kind + " artifact");
    return found;
}

std::vector<int> parse_ks(const std::string& text)
{
    std::vector<int> ks;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ','))
        ks.push_back(std::stoi(item));
    return ks;
}

ApiServer* activeServer = nullptr;

void on_signal(int)
{
    if (activeServer)
        activeServer->stop();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "CARE workbench: stage-gated agent design with helper agents and two-gate evaluation" };
    app.require_subcommand(1);
    Globals g;
    app.add_option("--root", g.root, "Data directory (env CARE_ROOT)");
    app.add_option("-p,--project", g.project, "Project id (env CARE_PROJECT)");
    app.add_option("--transport", g.transport, "offline | replay:<file> | record:<file> | http (env CARE_TRANSPORT)");
    app.add_option("--cmr", g.cmr, "fixture:<file> | live | replay:<file> | record:<file> (env CARE_CMR)");
    app.add_flag("--json", g.json, "Print JSON responses");

    // init
    auto* init = app.add_subcommand("init", "Create a project");
    std::string initId;
    int smeQuorum = 1;
    int devQuorum = 1;
    bool merge = false;
    init->add_option("project", initId, "Project id");
    init->add_option("--sme-quorum", smeQuorum);
    init->add_option("--developer-quorum", devQuorum);
    init->add_flag("--merge-subphases", merge);

    // elicit
    auto* elicit = app.add_subcommand("elicit", "Ask the helper agent for questions and record answers");
    std::string elicitPhase;
    std::string elicitSession;
    std::string answersFile;
    std::string answerRole = "sme";
    elicit->add_option("--phase", elicitPhase, "Phase (default: current)");
    elicit->add_option("--session", elicitSession, "Continue this session");
    elicit->add_option("--answers", answersFile, "JSON answers keyed by dimension id");
    elicit->add_option("--role", answerRole, "Role answering (sme | developer)");

    // draft
    auto* draft = app.add_subcommand("draft", "Draft the phase artifact from the latest session");
    std::string draftPhase;
    std::string draftSession;
    std::string draftKind;
    draft->add_option("--phase", draftPhase);
    draft->add_option("--session", draftSession);
    draft->add_option("--kind", draftKind);

    // gate
    auto* gate = app.add_subcommand("gate", "Gate status and approvals");
    gate->require_subcommand(1);
    auto* gateStatus = gate->add_subcommand("status", "Show the current gate");
    auto* gateApprove = gate->add_subcommand("approve", "Record an approval");
    std::string approveRole;
    std::string approveArtifact;
    std::string approveKind;
    int approveVersion = 0;
    bool reject = false;
    std::string note;
    gateApprove->add_option("--role", approveRole, "sme | developer")->required();
    gateApprove->add_option("--artifact", approveArtifact);
    gateApprove->add_option("--kind", approveKind);
    gateApprove->add_option("--version", approveVersion, "Default: head");
    gateApprove->add_flag("--reject", reject);
    gateApprove->add_option("--note", note);

    // advance / revisit
    auto* advance = app.add_subcommand("advance", "Advance past the current gate");
    std::string advanceKey;
    advance->add_option("--idempotency-key", advanceKey);
    auto* revisit = app.add_subcommand("revisit", "Return to an earlier phase");
    std::string revisitTo;
    std::string revisitKey;
    revisit->add_option("--to", revisitTo)->required();
    revisit->add_option("--idempotency-key", revisitKey);

    // artifacts and revisions
    auto* artifacts = app.add_subcommand("artifacts", "List artifacts or show one");
    std::string showArtifact;
    artifacts->add_option("artifact", showArtifact);
    auto* revisions = app.add_subcommand("revisions", "List revision proposals or apply one");
    std::string applyProposal;
    bool applyAccept = false;
    bool applyReject = false;
    revisions->add_option("--apply", applyProposal);
    revisions->add_flag("--accept", applyAccept);
    revisions->add_flag("--reject", applyReject);

    // bench
    auto* bench = app.add_subcommand("bench", "Benchmarks and evaluation runs");
    bench->require_subcommand(1);
    auto* generate = bench->add_subcommand("generate", "Generate a synthetic benchmark from a corpus");
    std::string corpusFile;
    std::string genName = "synthetic";
    std::string genOut;
    std::string fixture;
    int maxAttempts = 5;
    generate->add_option("--corpus", corpusFile)->required();
    generate->add_option("--name", genName);
    generate->add_option("--out", genOut, "Also write the benchmark here");
    generate->add_option("--fixture", fixture, "Fixture CMR catalog");
    generate->add_option("--max-attempts", maxAttempts);

    auto* runCmd = bench->add_subcommand("run", "Evaluate agents on a benchmark");
    std::vector<std::string> runAgents;
    std::string benchmarkArg;
    std::string cassette;
    bool record = false;
    std::string runOut;
    std::string ksText = "1,3,5";
    runCmd->add_option("--agent", runAgents, "cmr_care_v1 | cmr_simple (repeatable; default both)");
    runCmd->add_option("--benchmark", benchmarkArg, "Benchmark file or stored benchmark name")->required();
    runCmd->add_option("--fixture", fixture, "Fixture CMR catalog");
    runCmd->add_option("--cassette", cassette, "Model cassette to replay");
    runCmd->add_flag("--record", record, "Record the cassette instead of replaying it");
    runCmd->add_option("--out", runOut, "Write report.json and report.txt here");
    runCmd->add_option("--ks", ksText);

    auto* report = bench->add_subcommand("report", "Print the results table of runs");
    std::string reportRun;
    std::string reportGold;
    report->add_option("--run", reportRun, "Run id or report.json")->required();
    report->add_option("--gold", reportGold, "Gold run id or report.json");

    auto* twoGate = bench->add_subcommand("two-gate", "Apply the two-gate decision to stored runs");
    std::string synRun;
    std::string goldRun;
    twoGate->add_option("--synthetic", synRun)->required();
    twoGate->add_option("--gold", goldRun);

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    std::string bindAddr = env_or("CARE_BIND", "127.0.0.1:8080");
    std::string tokenFile = env_or("CARE_TOKENS", "");
    serve->add_option("--bind", bindAddr, "host:port (env CARE_BIND)");
    serve->add_option("--tokens", tokenFile, "Token file (env CARE_TOKENS)");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (!fixture.empty())
            g.cmr = "fixture:" + fixture;
        if (!cassette.empty())
            g.transport = (record ? "record:" : "replay:") + cassette;
        auto service = make_service(g);
        auto emit = [&](const json& value, const std::function<void()>& text) {
            if (g.json)
                print(value);
            else
                text();
        };

        if (*init)
        {
            auto const id = initId.empty() ? require_project(g) : initId;
            auto const created = service.create_project(
                id, { { "gate_policy",
                        { { "sme_quorum", smeQuorum }, { "developer_quorum", devQuorum }, { "merge_subphases", merge } } } });
            emit(created, [&] {
                std::cout << "created project " << id << '\n';
                print_gate(created["gate"]);
            });
        }
        else if (*elicit)
        {
            auto const& p = require_project(g);
            auto phase = elicitPhase.empty() ? service.get_project(p)["current_phase"].get<std::string>()
                                             : std::string(care::to_string(care::phase_from_string(elicitPhase)));
            auto session = elicitSession.empty() ? latest_session(service, p, phase) : elicitSession;
            if (session.empty())
                session = service.create_session(p, care::phase_from_string(phase))["session_id"].get<std::string>();
            auto questions = service.next_questions(p, session);
            if (!answersFile.empty())
            {
                auto answers = load_answers(answersFile, phase);
                Caller caller { care::role_from_string(answerRole), g.actor.empty() ? answerRole : g.actor };
                for (const auto& q: questions["questions"])
                {
                    auto it = answers.find(q["dimension_id"].get<std::string>());
                    if (it == answers.end())
                        continue;
                    for (const auto& text: it->second)
                        service.answer(p, session, q["entry_id"].get<std::string>(), text, caller);
                }
                questions = service.next_questions(p, session);
            }
            emit(questions, [&] {
                std::cout << "session " << session << " (" << phase << ")\n";
                for (const auto& q: questions["questions"])
                    std::cout << "  [" << q["entry_id"].get<std::string>() << "] (" << q["dimension_id"].get<std::string>()
                              << ") " << q["text"].get<std::string>() << '\n';
                std::cout << "unanswered: " << questions["unanswered_dimensions"].size() << '\n';
            });
        }
        else if (*draft)
        {
            auto const& p = require_project(g);
            auto phase = draftPhase.empty() ? service.get_project(p)["current_phase"].get<std::string>()
                                            : std::string(care::to_string(care::phase_from_string(draftPhase)));
            auto session = draftSession.empty() ? latest_session(service, p, phase) : draftSession;
            if (session.empty())
                throw Error(ErrorCode::not_found, "no elicitation session for " + phase);
            std::optional<care::ArtifactKind> kind;
            if (!draftKind.empty())
                kind = care::kind_from_string(draftKind);
            auto const result = service.draft(p, session, kind);
            emit(result, [&] {
                if (!result["artifact"].is_null())
                    std::cout << "created " << result["kind"].get<std::string>() << " "
                              << result["artifact"]["artifact_id"].get<std::string>() << " v1\n";
                else
                    std::cout << "proposed revision " << result["proposal"]["proposal_id"].get<std::string>() << '\n';
                for (const auto& v: result["violations"])
                    std::cout << "  faithfulness: " << v["kind"].get<std::string>() << " " << v["subject"].get<std::string>()
                              << '\n';
            });
        }
        else if (*gateStatus)
        {
            auto const status = service.gate_status(require_project(g));
            emit(status, [&] { print_gate(status); });
        }
        else if (*gateApprove)
        {
            auto const& p = require_project(g);
            auto const id = resolve_artifact(service, p, approveArtifact, approveKind);
            auto const version = approveVersion > 0 ? approveVersion : service.get_artifact(p, id)["version"].get<int>();
            Caller caller { care::role_from_string(approveRole), g.actor.empty() ? approveRole : g.actor };
            auto const result = service.approve(p, id, version, reject ? care::Verdict::reject : care::Verdict::approve,
                                                note, caller);
            emit(result, [&] {
                std::cout << (reject ? "rejected " : "approved ") << id << " v" << version << " as " << approveRole << '\n';
                print_gate(result["gate"]);
            });
        }
        else if (*advance)
        {
            auto const state = service.advance(require_project(g), advanceKey.empty() ? std::nullopt
                                                                                      : std::optional(advanceKey));
            emit(state, [&] { std::cout << "now in " << state["current_phase"].get<std::string>() << '\n'; });
        }
        else if (*revisit)
        {
            auto const state = service.revisit(require_project(g), care::phase_from_string(revisitTo),
                                               revisitKey.empty() ? std::nullopt : std::optional(revisitKey));
            emit(state, [&] {
                std::cout << "now in " << state["current_phase"].get<std::string>() << '\n';
                std::cout << "stale: " << state["history"].back()["staled"].dump() << '\n';
            });
        }
        else if (*artifacts)
        {
            auto const& p = require_project(g);
            if (!showArtifact.empty())
            {
                auto const a = service.get_artifact(p, showArtifact);
                emit(a, [&] { std::cout << a["content"].get<std::string>(); });
            }
            else
            {
                auto const list = service.list_artifacts(p);
                emit(list, [&] {
                    for (const auto& a: list)
                        std::cout << a["artifact_id"].get<std::string>() << "  " << a["kind"].get<std::string>() << "  v"
                                  << a["version"].get<int>() << "  " << a["status"].get<std::string>() << '\n';
                });
            }
        }
        else if (*revisions)
        {
            auto const& p = require_project(g);
            if (!applyProposal.empty())
            {
                if (applyAccept == applyReject)
                    throw Error(ErrorCode::invalid_argument, "pass exactly one of --accept and --reject");
                print(service.apply_revision(p, applyProposal, applyAccept));
            }
            else
                print(service.list_revisions(p));
        }
        else if (*generate)
        {
            auto const corpus = care::bench::load_corpus(corpusFile);
            care::bench::GenerationOptions options;
            options.name = genName;
            options.maxAttempts = maxAttempts;
            json result;
            if (!g.project.empty())
            {
                result = service.generate_benchmark(g.project, corpus, genName, maxAttempts);
                if (!genOut.empty())
                    care::bench::save_benchmark(service.get_benchmark(g.project, genName), genOut);
            }
            else
            {
                if (genOut.empty())
                    throw Error(ErrorCode::invalid_argument, "pass --out or a project");
                auto const generated = care::bench::generate_synthetic(corpus, service.transport(), service.cmr(), options);
                care::bench::save_benchmark(generated.benchmark, genOut);
                auto const discardsPath = fs::path(genOut).replace_extension(".discards.jsonl");
                care::bench::write_discards(generated.discards, discardsPath);
                json discards = json::array();
                for (const auto& d: generated.discards)
                    discards.push_back(d.to_json());
                result = { { "name", genName },
                           { "gate", "synthetic" },
                           { "queries", generated.benchmark.queries.size() },
                           { "discards", discards } };
            }
            emit(result, [&] {
                std::cout << "generated " << result["queries"].get<int>() << " queries, "
                          << result["discards"].size() << " discarded\n";
                for (const auto& d: result["discards"])
                    std::cout << "  discard " << d["doc_id"].get<std::string>() << " " << d["cited_id"].get<std::string>()
                              << ": " << d["reason"].get<std::string>() << '\n';
            });
        }
        else if (*runCmd)
        {
            auto const ks = parse_ks(ksText);
            json record;
            bool const isFile = fs::exists(benchmarkArg);
            if (!g.project.empty())
            {
                auto name = benchmarkArg;
                if (isFile)
                {
                    auto const b = care::bench::load_benchmark(benchmarkArg);
                    service.put_benchmark(g.project, b);
                    name = b.name;
                }
                record = service.run(g.project, name, runAgents, ks);
            }
            else
            {
                if (!isFile)
                    throw Error(ErrorCode::not_found, "benchmark file " + benchmarkArg + " not found");
                auto const b = care::bench::load_benchmark(benchmarkArg);
                auto names = runAgents.empty() ? std::vector<std::string> { "cmr_simple" } : runAgents;
                std::vector<care::bench::EvaluationReport> reports;
                care::bench::EvaluateOptions options;
                options.ks = ks;
                for (const auto& n: names)
                    reports.push_back(care::bench::evaluate(service.agent_spec(std::nullopt, n), b, service.transport(),
                                                            service.cmr(), options));
                record = run_record("standalone", b, reports);
            }
            std::string table;
            if (record.contains("table"))
                table = record["table"].get<std::string>();
            else
                for (const auto& [name, r]: record["reports"].items())
                {
                    auto const rep = care::bench::EvaluationReport::from_json(r);
                    table += "Gate\tAgent";
                    for (int k: rep.ks)
                        table += "\tRecall@" + std::to_string(k);
                    table += "\n" + care::bench::gate_label(rep) + "\t" + name;
                    for (int k: rep.ks)
                        table += "\t" + rep.meanRecall.at(k).percent() + "%";
                    table += "\n";
                }
            if (!runOut.empty())
            {
                write_text(fs::path(runOut) / "report.json", record.dump(2) + "\n");
                write_text(fs::path(runOut) / "report.txt", table);
            }
            emit(record, [&] {
                std::cout << "run " << record["run_id"].get<std::string>() << '\n' << table;
            });
        }
        else if (*report)
        {
            auto load = [&](const std::string& ref) {
                return fs::exists(ref) ? read_json(ref) : service.get_report(require_project(g), ref);
            };
            auto const syn = load(reportRun);
            std::optional<json> gold;
            if (!reportGold.empty())
                gold = load(reportGold);
            std::cout << render_runs(syn, gold);
        }
        else if (*twoGate)
        {
            auto const decision = service.two_gate(require_project(g), synRun,
                                                   goldRun.empty() ? std::nullopt : std::optional(goldRun));
            emit(decision, [&] {
                std::cout << decision["table"].get<std::string>();
                std::cout << "synthetic gate: " << decision["synthetic_outcome"].get<std::string>() << '\n';
                if (!decision["gold_outcome"].is_null())
                    std::cout << "gold gate (Recall@" << decision["gold_outcome"]["primary_metric"].get<int>()
                              << "): " << (decision["gold_outcome"]["care_better"].get<bool>() ? "care_better" : "baseline_not_beaten")
                              << '\n';
            });
        }
        else if (*serve)
        {
            if (tokenFile.empty())
                throw Error(ErrorCode::invalid_argument, "serve needs a token file (--tokens or CARE_TOKENS)");
            auto const colon = bindAddr.rfind(':');
            if (colon == std::string::npos)
                throw Error(ErrorCode::invalid_argument, "bind address must be host:port");
            ApiServer server(service, load_tokens(tokenFile));
            auto const port = server.bind(bindAddr.substr(0, colon), std::stoi(bindAddr.substr(colon + 1)));
            activeServer = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on " << bindAddr.substr(0, colon) << ":" << port << '\n';
            server.listen();
            activeServer = nullptr;
        }
        return 0;
    }
    catch (const Error& e)
    {
        std::cerr << "error: " << care::to_string(e.code()) << ": " << e.what() << '\n';
        if (!e.details().empty())
            std::cerr << e.details().dump() << '\n';
        return 1;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: io_error: " << e.what() << '\n';
        return 1;
    }
}
