// SPDX-License-Identifier: Apache-2.0
#include <care/service.hpp>

#include <care/error.hpp>
#include <care/offline_model.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace care::control
{

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{

std::string env_or(const char* name, std::string fallback)
{
    const char* value = std::getenv(name);
    return value && *value ? std::string(value) : fallback;
}

std::shared_ptr<ModelTransport> http_model()
{
    HttpChatTransport::Config c;
    c.baseUrl = env_or("CARE_MODEL_URL", "");
    c.model = env_or("CARE_MODEL_NAME", "");
    c.apiKey = env_or("CARE_API_KEY", "");
    if (c.baseUrl.empty() || c.model.empty())
        throw Error(ErrorCode::invalid_argument, "http transport needs CARE_MODEL_URL and CARE_MODEL_NAME");
    return std::make_shared<HttpChatTransport>(c);
}

std::pair<std::string, std::string> split_spec(const std::string& spec)
{
    auto const colon = spec.find(':');
    if (colon == std::string::npos)
        return { spec, {} };
    return { spec.substr(0, colon), spec.substr(colon + 1) };
}

std::string sequence_id(const std::string& prefix, std::size_t n)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", n);
    return prefix + buf;
}

json read_json_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::not_found, "missing " + path.filename().string());
    return json::parse(in);
}

void write_json_file(const fs::path& path, const json& value)
{
    fs::create_directories(path.parent_path());
    auto const tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << value.dump(2) << '\n';
        if (!out)
            throw Error(ErrorCode::io_error, "cannot write " + path.string());
    }
    fs::rename(tmp, path);
}

void check_name(const std::string& name, const char* what)
{
    bool ok = !name.empty() && name.size() <= 64 && name.front() != '.';
    for (char c: name)
        ok = ok && (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.');
    if (!ok)
        throw Error(ErrorCode::invalid_argument, std::string("invalid ") + what + ": " + name);
}

json question_json(const TranscriptEntry& e)
{
    return { { "entry_id", e.entryId }, { "dimension_id", e.dimensionId.value_or("") }, { "text", e.text } };
}

json unanswered(const ElicitationSession& session)
{
    json out = json::array();
    auto const answered = session.answered_dimensions();
    for (const auto& d: dimension_checklist(session.phase()))
        if (!answered.contains(d.dimensionId))
            out.push_back(d.dimensionId);
    return out;
}

json gate_json(const std::vector<GateStatus>& gates, const ProjectState& state)
{
    json list = json::array();
    bool satisfied = true;
    for (const auto& g: gates)
    {
        list.push_back(to_json(g));
        satisfied = satisfied && g.satisfied;
    }
    return { { "project_id", state.projectId },
             { "current_phase", to_string(state.currentPhase) },
             { "satisfied", satisfied },
             { "gates", list } };
}

} // namespace

std::shared_ptr<ModelTransport> make_transport(const std::string& spec)
{
    auto const [scheme, arg] = split_spec(spec);
    if (scheme == "offline")
        return std::make_shared<OfflineModel>();
    if (scheme == "http")
        return http_model();
    if (scheme == "replay" && !arg.empty())
        return CassetteTransport::replay(arg);
    if (scheme == "record" && !arg.empty())
    {
        std::shared_ptr<ModelTransport> inner = std::getenv("CARE_MODEL_URL") ? http_model()
                                                                              : std::make_shared<OfflineModel>();
        return CassetteTransport::record(inner, arg);
    }
    throw Error(ErrorCode::invalid_argument, "unknown transport: " + spec);
}

std::shared_ptr<cmr::CollectionSearch> make_cmr(const std::string& spec)
{
    auto const [scheme, arg] = split_spec(spec);
    if (scheme == "fixture" && !arg.empty())
        return cmr::FixtureCatalog::load(arg);
    if (scheme == "live")
        return std::make_shared<cmr::LiveCmr>(cmr::LiveCmr::Config {});
    if (scheme == "replay" && !arg.empty())
        return std::make_shared<cmr::LiveCmr>(cmr::LiveCmr::Config {}, cmr::HttpCassette::replay(arg)->getter());
    if (scheme == "record" && !arg.empty())
    {
        cmr::LiveCmr::Config config;
        auto cassette = cmr::HttpCassette::record(cmr::make_https_getter(config.baseUrl, config.timeout), arg);
        return std::make_shared<cmr::LiveCmr>(config, cassette->getter());
    }
    throw Error(ErrorCode::invalid_argument, "unknown CMR backend: " + spec);
}

Service::Service(ServiceConfig config):
    _config(std::move(config)),
    _store(ArtifactStore::Options { _config.root, _config.clock, _config.idSeed }),
    _engine(_store),
    _transport(make_transport(_config.transport))
{
    if (_config.cmr)
        _cmr = make_cmr(*_config.cmr);
    HelperAgent::Options options;
    options.sleeper = _config.sleeper;
    _helper = std::make_unique<HelperAgent>(_transport, options);
}

const cmr::CollectionSearch& Service::cmr() const
{
    if (!_cmr)
        throw Error(ErrorCode::invalid_argument, "no CMR backend configured (set CARE_CMR or pass --fixture)");
    return *_cmr;
}

fs::path Service::project_dir(const std::string& projectId) const
{
    if (!_store.has_project(projectId))
        throw Error(ErrorCode::not_found, "project " + projectId + " not found");
    return _config.root / projectId;
}

std::mutex& Service::project_mutex(const std::string& projectId)
{
    auto lock = std::scoped_lock(_mutexesGuard);
    auto& m = _mutexes[projectId];
    if (!m)
        m = std::make_unique<std::mutex>();
    return *m;
}

// ---------------------------------------------------------------------------
// projects

json Service::create_project(const std::string& projectId, const json& options)
{
    ProjectConfig config;
    if (options.is_object() && options.contains("gate_policy"))
    {
        const auto& g = options["gate_policy"];
        config.gate.smeQuorum = g.value("sme_quorum", 1);
        config.gate.developerQuorum = g.value("developer_quorum", 1);
        config.gate.mergeSubphases = g.value("merge_subphases", false);
    }
    _store.create_project(projectId, config);
    return get_project(projectId);
}

json Service::list_projects() const
{
    json out = json::array();
    for (const auto& id: _store.project_ids())
    {
        auto const state = _store.project_state(id);
        out.push_back({ { "project_id", id }, { "current_phase", to_string(state.currentPhase) } });
    }
    return out;
}

json Service::get_project(const std::string& projectId) const
{
    auto const state = _engine.state(projectId);
    json j = to_json(state);
    _store.read(projectId, [&](const Project& p) {
        j["created_at"] = p.createdAt;
        j["gate_policy"] = { { "sme_quorum", p.config.gate.smeQuorum },
                             { "developer_quorum", p.config.gate.developerQuorum },
                             { "merge_subphases", p.config.gate.mergeSubphases } };
    });
    j["gate"] = gate_status(projectId);
    return j;
}

void Service::delete_project(const std::string& projectId)
{
    auto lock = std::scoped_lock(project_mutex(projectId));
    _store.delete_project(projectId);
}

// ---------------------------------------------------------------------------
// artifacts

json Service::list_artifacts(const std::string& projectId) const
{
    json out = json::array();
    for (const auto& a: _store.list_artifacts(projectId))
        out.push_back(to_json(a));
    return out;
}

json Service::get_artifact(const std::string& projectId, const std::string& artifactId) const
{
    json j = to_json(_store.get_artifact(projectId, artifactId));
    _store.read(projectId, [&](const Project& p) {
        const auto& head = p.artifact(artifactId).head();
        json approvals = json::array();
        for (const auto& a: head.approvals)
            approvals.push_back(to_json(a));
        j["approvals"] = approvals;
        j["approval_round"] = head.approvalRound;
        j["diff"] = head.diff;
    });
    return j;
}

json Service::artifact_lineage(const std::string& projectId, const std::string& artifactId) const
{
    json out = json::array();
    for (const auto& e: _store.artifact_lineage(projectId, artifactId))
        out.push_back(to_json(e));
    return out;
}

json Service::create_artifact(const std::string& projectId, PhaseId phase, ArtifactKind kind,
                              const std::string& content, const Caller& caller)
{
    return to_json(_store.create_artifact(projectId, phase, kind, content, caller.role));
}

json Service::list_revisions(const std::string& projectId) const
{
    json out = json::array();
    _store.read(projectId, [&](const Project& p) {
        for (const auto& [id, proposal]: p.proposals)
            out.push_back(to_json(proposal));
    });
    return out;
}

json Service::get_revision(const std::string& projectId, const std::string& proposalId) const
{
    return to_json(_store.get_proposal(projectId, proposalId));
}

json Service::propose_revision(const std::string& projectId, const std::string& artifactId, int baseVersion,
                               const std::string& diff, const std::string& rationale, const Caller& caller)
{
    return to_json(_store.propose_revision(projectId, artifactId, baseVersion, diff, rationale, caller.role));
}

json Service::apply_revision(const std::string& projectId, const std::string& proposalId, bool accept)
{
    auto const artifact = _store.apply_revision(projectId, proposalId, accept);
    return { { "proposal", to_json(_store.get_proposal(projectId, proposalId)) }, { "artifact", to_json(artifact) } };
}

json Service::approve(const std::string& projectId, const std::string& artifactId, int version, Verdict verdict,
                      const std::string& note, const Caller& caller)
{
    if (caller.role == Role::helper_agent)
        throw Error(ErrorCode::helper_agent_cannot_approve, "the helper_agent role cannot record approvals");
    auto const record = _store.record_approval(projectId, artifactId, version, caller.role, caller.actor, verdict, note);
    return { { "approval", to_json(record) },
             { "artifact", to_json(_store.get_artifact(projectId, artifactId)) },
             { "gate", gate_status(projectId) } };
}

// ---------------------------------------------------------------------------
// gates

json Service::gate_status(const std::string& projectId) const
{
    return gate_json(_engine.current_gate(projectId), _engine.state(projectId));
}

json Service::advance(const std::string& projectId, const std::optional<std::string>& idempotencyKey)
{
    return to_json(_engine.advance(projectId, idempotencyKey));
}

json Service::revisit(const std::string& projectId, PhaseId target, const std::optional<std::string>& idempotencyKey)
{
    return to_json(_engine.revisit(projectId, target, idempotencyKey));
}

// ---------------------------------------------------------------------------
// elicitation

ElicitationSession Service::load(const std::string& projectId, const std::string& sessionId) const
{
    project_dir(projectId);
    check_name(sessionId, "session id");
    return load_session(_config.root, projectId, sessionId);
}

json Service::create_session(const std::string& projectId, std::optional<PhaseId> phase)
{
    project_dir(projectId);
    auto lock = std::scoped_lock(project_mutex(projectId));
    auto const sessionId = sequence_id("s-", care::list_sessions(_config.root, projectId).size() + 1);
    ElicitationSession session(sessionId, projectId, phase.value_or(_store.project_state(projectId).currentPhase));
    save_session(_config.root, session);
    return session.to_json();
}

json Service::list_sessions(const std::string& projectId) const
{
    project_dir(projectId);
    json out = json::array();
    for (const auto& id: care::list_sessions(_config.root, projectId))
    {
        auto const s = load_session(_config.root, projectId, id);
        out.push_back({ { "session_id", id }, { "phase", to_string(s.phase()) }, { "unanswered_dimensions", unanswered(s) } });
    }
    return out;
}

json Service::get_session(const std::string& projectId, const std::string& sessionId) const
{
    auto const s = load(projectId, sessionId);
    json j = s.to_json();
    j["unanswered_dimensions"] = unanswered(s);
    return j;
}

json Service::next_questions(const std::string& projectId, const std::string& sessionId)
{
    auto lock = std::scoped_lock(project_mutex(projectId));
    auto session = load(projectId, sessionId);
    if (session.open_questions().empty() && !unanswered(session).empty())
    {
        auto const questions =
            _helper->generate_questions(session.phase(), _store.approved_context(projectId, session.phase()), session);
        for (const auto& q: questions)
            session.add_question(q.dimensionId, q.text);
        save_session(_config.root, session);
    }
    json questions = json::array();
    for (const auto* q: session.open_questions())
        questions.push_back(question_json(*q));
    return { { "session_id", sessionId },
             { "phase", to_string(session.phase()) },
             { "questions", questions },
             { "unanswered_dimensions", unanswered(session) } };
}

json Service::answer(const std::string& projectId, const std::string& sessionId, const std::string& questionId,
                     const std::string& text, const Caller& caller)
{
    if (caller.role == Role::helper_agent)
        throw Error(ErrorCode::forbidden, "answers must come from a person");
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw Error(ErrorCode::empty_content, "answer text is empty");
    auto lock = std::scoped_lock(project_mutex(projectId));
    auto session = load(projectId, sessionId);
    auto const entry = session.add_answer(questionId, text, caller.role);
    save_session(_config.root, session);
    return { { "entry_id", entry.entryId },
             { "dimension_id", entry.dimensionId.value_or("") },
             { "answers", entry.answers.value_or("") },
             { "unanswered_dimensions", unanswered(session) } };
}

json Service::summarize(const std::string& projectId, const std::string& sessionId)
{
    auto lock = std::scoped_lock(project_mutex(projectId));
    auto session = load(projectId, sessionId);
    auto const summary = _helper->summarize_intent(session);
    auto const markdown = summary.markdown();
    std::string entryId;
    if (!summary.bullets.empty())
    {
        entryId = session.add_summary(markdown).entryId;
        save_session(_config.root, session);
    }
    json bullets = json::array();
    for (const auto& b: summary.bullets)
        bullets.push_back({ { "text", b.text }, { "entry_ids", b.entryIds } });
    return { { "entry_id", entryId }, { "markdown", markdown }, { "bullets", bullets }, { "rejected", summary.rejected } };
}

json Service::draft(const std::string& projectId, const std::string& sessionId, std::optional<ArtifactKind> kind)
{
    auto lock = std::scoped_lock(project_mutex(projectId));
    auto const session = load(projectId, sessionId);
    auto const required = required_artifacts(session.phase());
    if (!kind && required.empty())
        throw Error(ErrorCode::invalid_argument, "phase has no artifact kind to draft");
    auto const k = kind.value_or(required.front());
    auto const draft = _helper->draft_artifact(k, session, _store.approved_context(projectId, session.phase()));
    auto const violations = check_faithfulness(draft, session);
    auto const submission = _helper->submit_draft(_store, projectId, draft, "Drafted from elicitation session " + sessionId);

    json v = json::array();
    for (const auto& violation: violations)
        v.push_back({ { "kind", to_string(violation.kind) }, { "subject", violation.subject }, { "line", violation.line } });
    json out = { { "kind", to_string(k) }, { "content", draft.content }, { "violations", v } };
    out["artifact"] = submission.created ? to_json(*submission.created) : json(nullptr);
    out["proposal"] = submission.proposal ? to_json(*submission.proposal) : json(nullptr);
    return out;
}

// ---------------------------------------------------------------------------
// benchmarks

json Service::generate_benchmark(const std::string& projectId, const std::vector<bench::CorpusDocument>& corpus,
                                 const std::string& name, int maxAttempts)
{
    check_name(name, "benchmark name");
    auto const dir = project_dir(projectId);
    bench::GenerationOptions options;
    options.name = name;
    options.maxAttempts = maxAttempts;
    options.concurrency = _config.concurrency;
    auto const result = bench::generate_synthetic(corpus, *_transport, cmr(), options);
    put_benchmark(projectId, result.benchmark);
    bench::write_discards(result.discards, dir / "benchmarks" / (name + ".discards.jsonl"));
    json discards = json::array();
    for (const auto& d: result.discards)
        discards.push_back(d.to_json());
    return { { "name", name },
             { "gate", "synthetic" },
             { "queries", result.benchmark.queries.size() },
             { "discards", discards } };
}

json Service::put_benchmark(const std::string& projectId, const bench::Benchmark& benchmark)
{
    check_name(benchmark.name, "benchmark name");
    auto const dir = project_dir(projectId);
    bench::save_benchmark(benchmark, dir / "benchmarks" / (benchmark.name + ".jsonl"));
    return { { "name", benchmark.name }, { "gate", to_string(benchmark.gate) }, { "queries", benchmark.queries.size() } };
}

json Service::list_benchmarks(const std::string& projectId) const
{
    auto const dir = project_dir(projectId) / "benchmarks";
    json out = json::array();
    if (!fs::exists(dir))
        return out;
    std::vector<fs::path> files;
    for (const auto& e: fs::directory_iterator(dir))
    {
        auto const name = e.path().filename().string();
        if (e.path().extension() == ".jsonl" && name.find(".discards.") == std::string::npos)
            files.push_back(e.path());
    }
    std::ranges::sort(files);
    for (const auto& f: files)
    {
        auto const b = bench::load_benchmark(f);
        out.push_back({ { "name", b.name }, { "gate", to_string(b.gate) }, { "queries", b.queries.size() } });
    }
    return out;
}

bench::Benchmark Service::get_benchmark(const std::string& projectId, const std::string& name) const
{
    check_name(name, "benchmark name");
    auto const path = project_dir(projectId) / "benchmarks" / (name + ".jsonl");
    if (!fs::exists(path))
        throw Error(ErrorCode::not_found, "benchmark " + name + " not found");
    return bench::load_benchmark(path);
}

agent::AgentSpec Service::agent_spec(const std::optional<std::string>& projectId, const std::string& name) const
{
    if (name == agent::kBaselineAgentName)
        return agent::baseline_agent();
    if (name == agent::kCareAgentName)
    {
        if (!projectId)
            throw Error(ErrorCode::invalid_argument, "the CARE agent is assembled from a project; pass a project");
        return agent::care_agent(agent::assemble_care_prompt(_store, *projectId));
    }
    throw Error(ErrorCode::invalid_argument, "unknown agent " + name,
                { { "known", { agent::kCareAgentName, agent::kBaselineAgentName } } });
}

json run_record(const std::string& runId, const bench::Benchmark& benchmark,
                const std::vector<bench::EvaluationReport>& reports)
{
    json r = json::object();
    std::vector<std::string> order;
    for (const auto& report: reports)
    {
        r[report.agentName] = report.to_json();
        order.push_back(report.agentName);
    }
    json record = { { "run_id", runId },
                    { "benchmark", benchmark.name },
                    { "gate", to_string(benchmark.gate) },
                    { "agents", order },
                    { "reports", r } };
    if (reports.size() == 2)
        record["table"] = bench::render_two_gate_table(reports[0], reports[1]);
    return record;
}

json Service::run(const std::string& projectId, const std::string& benchmarkName, const std::vector<std::string>& agents,
                  const std::vector<int>& ks)
{
    auto const dir = project_dir(projectId);
    auto const benchmark = get_benchmark(projectId, benchmarkName);
    auto names = agents;
    if (names.empty())
        names = { std::string(agent::kCareAgentName), std::string(agent::kBaselineAgentName) };
    if (names.size() > 2 || (names.size() == 2 && names[0] == names[1]))
        throw Error(ErrorCode::invalid_argument, "a run evaluates one agent or a CARE/baseline pair");
    std::vector<agent::AgentSpec> specs;
    for (const auto& n: names)
        specs.push_back(agent_spec(projectId, n));

    bool preGate = false;
    _store.read(projectId, [&](const Project& p) { preGate = !evaluate_gate(p, PhaseId::P5_benchmark).satisfied; });

    std::string runId;
    {
        auto lock = std::scoped_lock(project_mutex(projectId));
        std::size_t n = 1;
        while (fs::exists(dir / "runs" / sequence_id("run-", n)))
            ++n;
        runId = sequence_id("run-", n);
        fs::create_directories(dir / "runs" / runId);
    }

    bench::EvaluateOptions options;
    options.ks = ks;
    options.concurrency = _config.concurrency;
    options.preGate = preGate;
    options.traceRoot = dir;
    options.runId = runId;
    std::vector<bench::EvaluationReport> reports;
    for (const auto& spec: specs)
        if (spec.name == agent::kCareAgentName)
            agent::save_agent_spec(_config.root, projectId, spec);
    if (specs.size() == 2)
    {
        auto pair = bench::evaluate_pair(specs[0], specs[1], benchmark, *_transport, *_transport, cmr(), options);
        reports = { std::move(pair.care), std::move(pair.baseline) };
    }
    else
    {
        options.runId = runId + "/" + specs[0].name;
        reports = { bench::evaluate(specs[0], benchmark, *_transport, cmr(), options) };
    }
    auto const record = run_record(runId, benchmark, reports);
    write_json_file(dir / "runs" / runId / "report.json", record);
    return record;
}

json Service::list_runs(const std::string& projectId) const
{
    auto const dir = project_dir(projectId) / "runs";
    json out = json::array();
    if (!fs::exists(dir))
        return out;
    std::vector<fs::path> runs;
    for (const auto& e: fs::directory_iterator(dir))
        if (fs::exists(e.path() / "report.json"))
            runs.push_back(e.path());
    std::ranges::sort(runs);
    for (const auto& r: runs)
    {
        auto const record = read_json_file(r / "report.json");
        out.push_back({ { "run_id", record["run_id"] },
                        { "benchmark", record["benchmark"] },
                        { "gate", record["gate"] },
                        { "agents", record["agents"] } });
    }
    return out;
}

json Service::get_report(const std::string& projectId, const std::string& runId) const
{
    check_name(runId, "run id");
    auto const path = project_dir(projectId) / "runs" / runId / "report.json";
    if (!fs::exists(path))
        throw Error(ErrorCode::not_found, "run " + runId + " not found");
    return read_json_file(path);
}

namespace
{

std::pair<bench::EvaluationReport, bench::EvaluationReport> pair_of(const json& record)
{
    const auto& reports = record.at("reports");
    auto const care = std::string(agent::kCareAgentName);
    auto const base = std::string(agent::kBaselineAgentName);
    if (!reports.contains(care) || !reports.contains(base))
        throw Error(ErrorCode::invalid_argument,
                    "run " + record.value("run_id", "") + " does not contain both " + care + " and " + base);
    return { bench::EvaluationReport::from_json(reports[care]), bench::EvaluationReport::from_json(reports[base]) };
}

} // namespace

std::string render_runs(const json& syntheticRun, const std::optional<json>& goldRun)
{
    auto const [care, base] = pair_of(syntheticRun);
    if (!goldRun)
        return bench::render_two_gate_table(care, base);
    auto const [careGold, baseGold] = pair_of(*goldRun);
    return bench::render_two_gate_table(care, base, careGold, baseGold);
}

json Service::two_gate(const std::string& projectId, const std::string& syntheticRunId,
                       const std::optional<std::string>& goldRunId) const
{
    auto const synthetic = get_report(projectId, syntheticRunId);
    std::optional<json> gold;
    if (goldRunId)
        gold = get_report(projectId, *goldRunId);
    auto const [care, base] = pair_of(synthetic);
    if (care.gate != bench::Gate::synthetic)
        throw Error(ErrorCode::invalid_argument, "run " + syntheticRunId + " is not on a synthetic benchmark");
    std::optional<bench::EvaluationReport> careGold;
    std::optional<bench::EvaluationReport> baseGold;
    if (gold)
    {
        auto [c, b] = pair_of(*gold);
        if (c.gate != bench::Gate::gold)
            throw Error(ErrorCode::invalid_argument, "run " + *goldRunId + " is not on a gold benchmark");
        careGold = std::move(c);
        baseGold = std::move(b);
    }
    auto const decision = bench::two_gate(care, base, careGold, baseGold);
    json out = decision.to_json();
    out["table"] = bench::render_two_gate_table(care, base, careGold, baseGold);
    out["synthetic_run"] = syntheticRunId;
    out["gold_run"] = goldRunId ? json(*goldRunId) : json(nullptr);
    return out;
}

} // namespace care::control
