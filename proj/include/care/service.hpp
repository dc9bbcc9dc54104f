// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <care/agent_runtime.hpp>
#include <care/artifact_store.hpp>
#include <care/benchmark.hpp>
#include <care/cmr_client.hpp>
#include <care/elicitation.hpp>
#include <care/helper_agent.hpp>
#include <care/phase_engine.hpp>
#include <care/transport.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace care::control
{

/// `offline`, `replay:<cassette>`, `record:<cassette>` (records the offline
/// model, or the HTTP model when CARE_MODEL_URL is set) or `http` (reads
/// CARE_MODEL_URL, CARE_MODEL_NAME, CARE_API_KEY).
std::shared_ptr<ModelTransport> make_transport(const std::string& spec);

/// `fixture:<catalog.jsonl>`, `live`, `replay:<cassette>` or `record:<cassette>`.
std::shared_ptr<cmr::CollectionSearch> make_cmr(const std::string& spec);

struct ServiceConfig
{
    std::filesystem::path root;
    std::string transport = "offline";
    /// CMR backend; operations that search fail with invalid_argument when unset.
    std::optional<std::string> cmr;
    Clock clock = system_clock();
    std::optional<std::uint64_t> idSeed;
    unsigned concurrency = 4;
    /// Backoff between helper retries; tests pass a no-op.
    RetryingTransport::Sleeper sleeper {};
};

/// Authenticated principal of an API call or CLI invocation.
struct Caller
{
    Role role = Role::developer;
    std::string actor;
};

/// The operations behind both the HTTP API and the CLI. Every call returns
/// the JSON body the API sends and throws care::Error on failure.
class Service
{
public:
    explicit Service(ServiceConfig config);

    [[nodiscard]] const ServiceConfig& config() const noexcept { return _config; }
    [[nodiscard]] ArtifactStore& store() noexcept { return _store; }

    // projects
    nlohmann::json create_project(const std::string& projectId, const nlohmann::json& options = {});
    nlohmann::json list_projects() const;
    nlohmann::json get_project(const std::string& projectId) const;
    void delete_project(const std::string& projectId);

    // artifacts and reviews
    nlohmann::json list_artifacts(const std::string& projectId) const;
    nlohmann::json get_artifact(const std::string& projectId, const std::string& artifactId) const;
    nlohmann::json artifact_lineage(const std::string& projectId, const std::string& artifactId) const;
    nlohmann::json create_artifact(const std::string& projectId, PhaseId phase, ArtifactKind kind,
                                   const std::string& content, const Caller& caller);
    nlohmann::json list_revisions(const std::string& projectId) const;
    nlohmann::json get_revision(const std::string& projectId, const std::string& proposalId) const;
    nlohmann::json propose_revision(const std::string& projectId, const std::string& artifactId, int baseVersion,
                                    const std::string& diff, const std::string& rationale, const Caller& caller);
    nlohmann::json apply_revision(const std::string& projectId, const std::string& proposalId, bool accept);
    nlohmann::json approve(const std::string& projectId, const std::string& artifactId, int version, Verdict verdict,
                           const std::string& note, const Caller& caller);

    // gates
    nlohmann::json gate_status(const std::string& projectId) const;
    nlohmann::json advance(const std::string& projectId, const std::optional<std::string>& idempotencyKey = {});
    nlohmann::json revisit(const std::string& projectId, PhaseId target,
                           const std::optional<std::string>& idempotencyKey = {});

    // elicitation
    nlohmann::json create_session(const std::string& projectId, std::optional<PhaseId> phase = {});
    nlohmann::json list_sessions(const std::string& projectId) const;
    nlohmann::json get_session(const std::string& projectId, const std::string& sessionId) const;
    /// Open questions of the session; when none are open, asks the helper for
    /// questions on the dimensions still unanswered and records them.
    nlohmann::json next_questions(const std::string& projectId, const std::string& sessionId);
    nlohmann::json answer(const std::string& projectId, const std::string& sessionId, const std::string& questionId,
                          const std::string& text, const Caller& caller);
    nlohmann::json summarize(const std::string& projectId, const std::string& sessionId);
    /// Drafts the phase artifact from the session, checks faithfulness and
    /// files it (new artifact or revision proposal).
    nlohmann::json draft(const std::string& projectId, const std::string& sessionId,
                         std::optional<ArtifactKind> kind = {});

    // benchmarks and runs
    nlohmann::json generate_benchmark(const std::string& projectId, const std::vector<bench::CorpusDocument>& corpus,
                                      const std::string& name, int maxAttempts = 5);
    nlohmann::json put_benchmark(const std::string& projectId, const bench::Benchmark& benchmark);
    nlohmann::json list_benchmarks(const std::string& projectId) const;
    bench::Benchmark get_benchmark(const std::string& projectId, const std::string& name) const;

    /// Evaluates the named built-in agents (both by default, CARE first) on a
    /// stored benchmark and stores the run as `runs/<run_id>/report.json`.
    nlohmann::json run(const std::string& projectId, const std::string& benchmarkName,
                       const std::vector<std::string>& agents = {}, const std::vector<int>& ks = { 1, 3, 5 });
    nlohmann::json list_runs(const std::string& projectId) const;
    nlohmann::json get_report(const std::string& projectId, const std::string& runId) const;
    nlohmann::json two_gate(const std::string& projectId, const std::string& syntheticRunId,
                            const std::optional<std::string>& goldRunId = {}) const;

    /// Agent spec used for runs: the baseline, or the CARE agent assembled
    /// from the project's approved phase 4 artifacts.
    agent::AgentSpec agent_spec(const std::optional<std::string>& projectId, const std::string& name) const;

    [[nodiscard]] ModelTransport& transport() const { return *_transport; }
    [[nodiscard]] const cmr::CollectionSearch& cmr() const;

private:
    std::filesystem::path project_dir(const std::string& projectId) const;
    std::mutex& project_mutex(const std::string& projectId);
    ElicitationSession load(const std::string& projectId, const std::string& sessionId) const;

    ServiceConfig _config;
    ArtifactStore _store;
    PhaseEngine _engine;
    std::shared_ptr<ModelTransport> _transport;
    std::shared_ptr<cmr::CollectionSearch> _cmr;
    std::unique_ptr<HelperAgent> _helper;
    std::mutex _mutexesGuard;
    std::map<std::string, std::unique_ptr<std::mutex>> _mutexes;
};

/// Run record written by `Service::run` and by standalone CLI runs.
nlohmann::json run_record(const std::string& runId, const bench::Benchmark& benchmark,
                          const std::vector<bench::EvaluationReport>& reports);

/// Tab-separated table for a stored run (and optionally the gold run).
std::string render_runs(const nlohmann::json& syntheticRun, const std::optional<nlohmann::json>& goldRun = {});

} // namespace care::control
