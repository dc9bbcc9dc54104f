// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <care/clock.hpp>
#include <care/ids.hpp>
#include <care/phases.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace care
{

struct ApprovalRecord
{
    std::string artifactId;
    int version = 0;
    Role role = Role::sme;
    std::string actor;
    Verdict verdict = Verdict::approve;
    std::string note;
    std::string timestamp; // RFC 3339 UTC
    /// Approval round of the version; staleness opens a new round and earlier
    /// approvals stop counting toward the gate.
    int round = 0;
};

struct VersionRecord
{
    int number = 0;
    std::string content;
    std::string digest; // sha256 of content
    /// Diff from the parent version (empty for v1).
    std::string diff;
    Role authoredBy = Role::helper_agent;
    std::optional<int> parentVersion;
    std::optional<std::string> fromProposal;
    std::string createdAt;
    /// Status ignoring pending proposals (never under_review).
    ArtifactStatus baseStatus = ArtifactStatus::draft;
    int pendingProposals = 0;
    int approvalRound = 0;
    std::vector<ApprovalRecord> approvals;

    [[nodiscard]] ArtifactStatus status() const noexcept;
    [[nodiscard]] int count_approvals(Role role) const noexcept;
};

struct ArtifactRecord
{
    std::string artifactId;
    std::string projectId;
    PhaseId phase = PhaseId::P1_scope;
    ArtifactKind kind = ArtifactKind::scope_spec;
    std::vector<VersionRecord> versions;

    [[nodiscard]] const VersionRecord& head() const { return versions.back(); }
    [[nodiscard]] VersionRecord& head() { return versions.back(); }
};

/// Snapshot of an artifact's head version.
struct Artifact
{
    std::string artifactId;
    std::string projectId;
    PhaseId phase = PhaseId::P1_scope;
    ArtifactKind kind = ArtifactKind::scope_spec;
    int version = 1;
    std::string content;
    ArtifactStatus status = ArtifactStatus::draft;
    Role authoredBy = Role::helper_agent;
    std::optional<int> parentVersion;

    static Artifact from(const ArtifactRecord& record);
};

enum class ProposalState : std::uint8_t
{
    pending,
    accepted,
    rejected,
};

struct RevisionProposal
{
    std::string proposalId;
    std::string artifactId;
    int baseVersion = 0;
    std::string diff;
    std::string rationale;
    Role proposedBy = Role::helper_agent;
    ProposalState state = ProposalState::pending;
    std::string createdAt;
};

enum class TransitionCause : std::uint8_t
{
    advance,
    revisit,
};

struct Transition
{
    PhaseId from = PhaseId::P1_scope;
    PhaseId to = PhaseId::P1_scope;
    TransitionCause cause = TransitionCause::advance;
    std::string timestamp;
    /// Artifact ids whose approved heads were marked stale (revisit only).
    std::vector<std::string> staled;
    /// Gate snapshot at transition time (advance only): phases checked.
    std::vector<PhaseId> gatedPhases;
};

struct ProjectState
{
    std::string projectId;
    PhaseId currentPhase = PhaseId::P1_scope;
    std::vector<Transition> history;
};

struct ProjectConfig
{
    GatePolicy gate;
};

struct LineageEntry
{
    int version = 0;
    std::string content;
    ArtifactStatus status = ArtifactStatus::draft;
    std::vector<ApprovalRecord> approvals;
};

/// Everything the store knows about one project. Read through
/// `ArtifactStore::read`, which holds the project's shared lock.
struct Project
{
    std::string projectId;
    std::string createdAt;
    ProjectConfig config;
    std::map<std::string, ArtifactRecord> artifacts; // ULIDs: map order == creation order
    std::map<std::string, RevisionProposal> proposals;
    ProjectState state;
    std::map<std::string, nlohmann::json> idempotency;
    std::string lastTimestamp;

    [[nodiscard]] const ArtifactRecord& artifact(const std::string& artifactId) const;
    /// Artifacts for `kind`, oldest first.
    [[nodiscard]] std::vector<const ArtifactRecord*> artifacts_of(ArtifactKind kind) const;
};

std::string to_string(ProposalState state);
std::string to_string(TransitionCause cause);

nlohmann::json to_json(const Artifact& artifact);
nlohmann::json to_json(const RevisionProposal& proposal);
nlohmann::json to_json(const ApprovalRecord& record);
nlohmann::json to_json(const ProjectState& state);
nlohmann::json to_json(const LineageEntry& entry);

/// Fixed metadata block followed by the content, as written to `v<N>.md`.
std::string render_artifact_document(const ArtifactRecord& record, const VersionRecord& version);

/// Versioned CARE artifacts with diff-based revisions and role-attributed
/// approvals.
///
/// All state changes are events appended to a per-project log; when a root
/// directory is given the log is persisted as `<root>/<project>/log.jsonl`
/// together with immutable `artifacts/<id>/v<N>.md` snapshots, and reopening
/// the store replays the log. Mutations of one project are serialized; reads
/// share the lock.
class ArtifactStore
{
public:
    struct Options
    {
        std::optional<std::filesystem::path> root;
        Clock clock = system_clock();
        std::optional<std::uint64_t> idSeed;
    };

    ArtifactStore();
    explicit ArtifactStore(Options options);
    ~ArtifactStore();

    ArtifactStore(const ArtifactStore&) = delete;
    ArtifactStore& operator=(const ArtifactStore&) = delete;

    [[nodiscard]] const std::optional<std::filesystem::path>& root() const noexcept;

    // projects

    ProjectState create_project(const std::string& projectId, ProjectConfig config = {});
    [[nodiscard]] bool has_project(const std::string& projectId) const;
    [[nodiscard]] std::vector<std::string> project_ids() const;
    void delete_project(const std::string& projectId);

    // artifacts

    Artifact create_artifact(const std::string& projectId, PhaseId phase, ArtifactKind kind,
                             const std::string& content, Role authoredBy);

    RevisionProposal propose_revision(const std::string& projectId, const std::string& artifactId, int baseVersion,
                                      const std::string& diff, const std::string& rationale, Role proposedBy);

    Artifact apply_revision(const std::string& projectId, const std::string& proposalId, bool accept);

    ApprovalRecord record_approval(const std::string& projectId, const std::string& artifactId, int version,
                                   Role role, const std::string& actor, Verdict verdict, const std::string& note);

    [[nodiscard]] Artifact get_artifact(const std::string& projectId, const std::string& artifactId) const;
    [[nodiscard]] std::vector<Artifact> list_artifacts(const std::string& projectId) const;
    [[nodiscard]] RevisionProposal get_proposal(const std::string& projectId, const std::string& proposalId) const;

    /// Every version of the artifact, content rebuilt from v1 plus the chain
    /// of accepted diffs.
    [[nodiscard]] std::vector<LineageEntry> artifact_lineage(const std::string& projectId,
                                                             const std::string& artifactId) const;

    /// Approved heads of every artifact from phases <= upToPhase, ordered by
    /// phase then artifact id.
    [[nodiscard]] std::vector<Artifact> approved_context(const std::string& projectId, PhaseId upToPhase) const;

    // phase state (used by PhaseEngine)

    [[nodiscard]] ProjectState project_state(const std::string& projectId) const;

    /// Runs `fn` under the project's shared lock.
    void read(const std::string& projectId, const std::function<void(const Project&)>& fn) const;

    /// Atomically decides and commits a phase transition: `decide` runs under
    /// the exclusive project lock and returns the transition to record (or
    /// throws). The transition's timestamp and stale set are filled in here.
    ProjectState commit_transition(const std::string& projectId,
                                   const std::function<Transition(const Project&)>& decide,
                                   const std::optional<std::string>& idempotencyKey = std::nullopt);

private:
    struct ProjectSlot;

    ProjectSlot& slot(const std::string& projectId) const;
    void load_from_disk();
    void load_project(const std::filesystem::path& dir);

    Options _options;
    UlidGenerator _ids;
    mutable std::shared_mutex _projectsMutex;
    std::map<std::string, std::unique_ptr<ProjectSlot>> _projects;
};

} // namespace care
