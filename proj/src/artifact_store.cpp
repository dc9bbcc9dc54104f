// SPDX-License-Identifier: Apache-2.0
#include <care/artifact_store.hpp>
#include <care/digest.hpp>
#include <care/error.hpp>
#include <care/unified_diff.hpp>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

namespace care
{

using nlohmann::json;
namespace fs = std::filesystem;

struct ArtifactStore::ProjectSlot
{
    mutable std::shared_mutex mutex;
    Project project;
};

// ---------------------------------------------------------------------------
// value helpers

ArtifactStatus VersionRecord::status() const noexcept
{
    if (pendingProposals > 0 && baseStatus != ArtifactStatus::superseded)
        return ArtifactStatus::under_review;
    return baseStatus;
}

int VersionRecord::count_approvals(Role role) const noexcept
{
    return static_cast<int>(std::ranges::count_if(approvals, [&](const ApprovalRecord& a) {
        return a.role == role && a.verdict == Verdict::approve && a.round == approvalRound;
    }));
}

Artifact Artifact::from(const ArtifactRecord& record)
{
    const auto& head = record.head();
    return Artifact {
        .artifactId = record.artifactId,
        .projectId = record.projectId,
        .phase = record.phase,
        .kind = record.kind,
        .version = head.number,
        .content = head.content,
        .status = head.status(),
        .authoredBy = head.authoredBy,
        .parentVersion = head.parentVersion,
    };
}

const ArtifactRecord& Project::artifact(const std::string& artifactId) const
{
    auto it = artifacts.find(artifactId);
    if (it == artifacts.end())
        throw Error(ErrorCode::not_found, "no artifact " + artifactId + " in project " + projectId);
    return it->second;
}

std::vector<const ArtifactRecord*> Project::artifacts_of(ArtifactKind kind) const
{
    std::vector<const ArtifactRecord*> out;
    for (const auto& [id, record]: artifacts)
        if (record.kind == kind)
            out.push_back(&record);
    return out;
}

std::string to_string(ProposalState state)
{
    switch (state)
    {
        case ProposalState::pending: return "pending";
        case ProposalState::accepted: return "accepted";
        case ProposalState::rejected: return "rejected";
    }
    return "pending";
}

std::string to_string(TransitionCause cause)
{
    return cause == TransitionCause::advance ? "advance" : "revisit";
}

json to_json(const Artifact& artifact)
{
    json j = {
        { "artifact_id", artifact.artifactId },
        { "project_id", artifact.projectId },
        { "phase", to_string(artifact.phase) },
        { "kind", to_string(artifact.kind) },
        { "version", artifact.version },
        { "content", artifact.content },
        { "status", to_string(artifact.status) },
        { "authored_by", to_string(artifact.authoredBy) },
        { "parent_version", nullptr },
    };
    if (artifact.parentVersion)
        j["parent_version"] = *artifact.parentVersion;
    return j;
}

json to_json(const RevisionProposal& p)
{
    return {
        { "proposal_id", p.proposalId },     { "artifact_id", p.artifactId },
        { "base_version", p.baseVersion },   { "diff", p.diff },
        { "rationale", p.rationale },        { "proposed_by", to_string(p.proposedBy) },
        { "state", to_string(p.state) },     { "created_at", p.createdAt },
    };
}

json to_json(const ApprovalRecord& r)
{
    return {
        { "artifact_id", r.artifactId },       { "version", r.version }, { "role", to_string(r.role) },
        { "actor", r.actor },                  { "verdict", to_string(r.verdict) },
        { "note", r.note },                    { "timestamp", r.timestamp },
        { "round", r.round },
    };
}

json to_json(const ProjectState& state)
{
    json history = json::array();
    for (const auto& t: state.history)
    {
        json gated = json::array();
        for (auto p: t.gatedPhases)
            gated.push_back(to_string(p));
        history.push_back({
            { "from_phase", to_string(t.from) },
            { "to_phase", to_string(t.to) },
            { "cause", to_string(t.cause) },
            { "timestamp", t.timestamp },
            { "staled", t.staled },
            { "gated_phases", gated },
        });
    }
    return { { "project_id", state.projectId }, { "current_phase", to_string(state.currentPhase) },
             { "history", history } };
}

json to_json(const LineageEntry& entry)
{
    json approvals = json::array();
    for (const auto& a: entry.approvals)
        approvals.push_back(to_json(a));
    return { { "version", entry.version },
             { "content", entry.content },
             { "status", to_string(entry.status) },
             { "approvals", approvals } };
}

std::string render_artifact_document(const ArtifactRecord& record, const VersionRecord& version)
{
    std::ostringstream out;
    out << "---\n";
    out << "artifact_id: " << record.artifactId << '\n';
    out << "kind: " << to_string(record.kind) << '\n';
    out << "phase: " << to_string(record.phase) << '\n';
    out << "version: " << version.number << '\n';
    out << "authored_by: " << to_string(version.authoredBy) << '\n';
    out << "digest: " << version.digest << '\n';
    out << "---\n";
    out << version.content;
    return out.str();
}

namespace
{

// ---------------------------------------------------------------------------
// event application (shared by live mutations and log replay)

std::optional<std::string> optional_string(const json& j, const char* key)
{
    if (auto it = j.find(key); it != j.end() && it->is_string())
        return it->get<std::string>();
    return std::nullopt;
}

void apply_event(Project& project, const json& event)
{
    auto const type = event.at("type").get<std::string>();
    auto const timestamp = event.at("timestamp").get<std::string>();
    project.lastTimestamp = std::max(project.lastTimestamp, timestamp);

    if (type == "project_created")
    {
        project.projectId = event.at("project_id").get<std::string>();
        project.createdAt = timestamp;
        const auto& cfg = event.at("config");
        project.config.gate.smeQuorum = cfg.value("sme_quorum", 1);
        project.config.gate.developerQuorum = cfg.value("developer_quorum", 1);
        project.config.gate.mergeSubphases = cfg.value("merge_subphases", false);
        project.state.projectId = project.projectId;
        project.state.currentPhase = PhaseId::P1_scope;
    }
    else if (type == "create")
    {
        ArtifactRecord record;
        record.artifactId = event.at("artifact_id").get<std::string>();
        record.projectId = project.projectId;
        record.phase = phase_from_string(event.at("phase").get<std::string>());
        record.kind = kind_from_string(event.at("kind").get<std::string>());
        VersionRecord v1;
        v1.number = 1;
        v1.content = event.at("content").get<std::string>();
        v1.digest = sha256_hex(v1.content);
        v1.authoredBy = role_from_string(event.at("authored_by").get<std::string>());
        v1.createdAt = timestamp;
        record.versions.push_back(std::move(v1));
        project.artifacts.emplace(record.artifactId, std::move(record));
    }
    else if (type == "propose")
    {
        RevisionProposal p;
        p.proposalId = event.at("proposal_id").get<std::string>();
        p.artifactId = event.at("artifact_id").get<std::string>();
        p.baseVersion = event.at("base_version").get<int>();
        p.diff = event.at("diff").get<std::string>();
        p.rationale = event.at("rationale").get<std::string>();
        p.proposedBy = role_from_string(event.at("proposed_by").get<std::string>());
        p.createdAt = timestamp;
        project.artifacts.at(p.artifactId).head().pendingProposals += 1;
        project.proposals.emplace(p.proposalId, std::move(p));
    }
    else if (type == "apply")
    {
        auto& proposal = project.proposals.at(event.at("proposal_id").get<std::string>());
        auto& record = project.artifacts.at(proposal.artifactId);
        auto const accept = event.at("decision").get<std::string>() == "accept";

        // The proposal only counts as pending on the version it was made against.
        auto& base = record.versions.at(static_cast<std::size_t>(proposal.baseVersion - 1));
        base.pendingProposals = std::max(0, base.pendingProposals - 1);

        if (accept)
        {
            auto& oldHead = record.head();
            VersionRecord next;
            next.number = oldHead.number + 1;
            next.content = diff::apply_unified_diff(oldHead.content, proposal.diff);
            next.digest = sha256_hex(next.content);
            next.diff = proposal.diff;
            next.authoredBy = proposal.proposedBy;
            next.parentVersion = oldHead.number;
            next.fromProposal = proposal.proposalId;
            next.createdAt = timestamp;
            oldHead.baseStatus = ArtifactStatus::superseded;
            if (auto digest = optional_string(event, "digest"); digest && *digest != next.digest)
                throw Error(ErrorCode::io_error, "log digest mismatch for " + record.artifactId);
            record.versions.push_back(std::move(next));
            proposal.state = ProposalState::accepted;
        }
        else
            proposal.state = ProposalState::rejected;
    }
    else if (type == "approve")
    {
        auto& record = project.artifacts.at(event.at("artifact_id").get<std::string>());
        auto& head = record.head();
        ApprovalRecord a;
        a.artifactId = record.artifactId;
        a.version = event.at("version").get<int>();
        a.role = role_from_string(event.at("role").get<std::string>());
        a.actor = event.at("actor").get<std::string>();
        a.verdict = verdict_from_string(event.at("verdict").get<std::string>());
        a.note = event.value("note", "");
        a.timestamp = timestamp;
        a.round = head.approvalRound;
        head.approvals.push_back(a);

        if (a.verdict == Verdict::reject)
            head.baseStatus = ArtifactStatus::rejected;
        else if (head.baseStatus == ArtifactStatus::draft || head.baseStatus == ArtifactStatus::stale)
        {
            auto const& gate = project.config.gate;
            if (head.count_approvals(Role::sme) >= gate.smeQuorum
                && head.count_approvals(Role::developer) >= gate.developerQuorum)
                head.baseStatus = ArtifactStatus::approved;
        }
    }
    else if (type == "advance" || type == "revisit")
    {
        Transition t;
        t.from = phase_from_string(event.at("from").get<std::string>());
        t.to = phase_from_string(event.at("to").get<std::string>());
        t.cause = type == "advance" ? TransitionCause::advance : TransitionCause::revisit;
        t.timestamp = timestamp;
        for (const auto& p: event.value("gated_phases", json::array()))
            t.gatedPhases.push_back(phase_from_string(p.get<std::string>()));
        for (const auto& id: event.value("staled", json::array()))
        {
            auto& head = project.artifacts.at(id.get<std::string>()).head();
            head.baseStatus = ArtifactStatus::stale;
            head.approvalRound += 1;
            t.staled.push_back(id.get<std::string>());
        }
        project.state.currentPhase = t.to;
        project.state.history.push_back(std::move(t));
        if (auto key = optional_string(event, "idempotency_key"))
            project.idempotency[*key] = to_json(project.state);
    }
    else
        throw Error(ErrorCode::io_error, "unknown log event type: " + type);
}

ProjectState project_state_from_json(const json& j)
{
    ProjectState state;
    state.projectId = j.at("project_id").get<std::string>();
    state.currentPhase = phase_from_string(j.at("current_phase").get<std::string>());
    for (const auto& h: j.at("history"))
    {
        Transition t;
        t.from = phase_from_string(h.at("from_phase").get<std::string>());
        t.to = phase_from_string(h.at("to_phase").get<std::string>());
        t.cause = h.at("cause") == "advance" ? TransitionCause::advance : TransitionCause::revisit;
        t.timestamp = h.at("timestamp").get<std::string>();
        t.staled = h.at("staled").get<std::vector<std::string>>();
        for (const auto& p: h.at("gated_phases"))
            t.gatedPhases.push_back(phase_from_string(p.get<std::string>()));
        state.history.push_back(std::move(t));
    }
    return state;
}

void validate_project_id(const std::string& id)
{
    if (id.empty() || id.size() > 128 || id.front() == '.'
        || !std::ranges::all_of(id, [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'; }))
        throw Error(ErrorCode::invalid_argument, "invalid project id: '" + id + "'");
}

void write_file(const fs::path& path, const std::string& bytes)
{
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << bytes;
    if (!out)
        throw Error(ErrorCode::io_error, "cannot write " + path.string());
}

} // namespace

// ---------------------------------------------------------------------------
// store

ArtifactStore::ArtifactStore(): ArtifactStore(Options {})
{
}

ArtifactStore::ArtifactStore(Options options):
    _options(std::move(options)), _ids(_options.clock, _options.idSeed)
{
    if (_options.root)
        load_from_disk();
}

ArtifactStore::~ArtifactStore() = default;

const std::optional<fs::path>& ArtifactStore::root() const noexcept
{
    return _options.root;
}

ArtifactStore::ProjectSlot& ArtifactStore::slot(const std::string& projectId) const
{
    auto lock = std::shared_lock(_projectsMutex);
    auto it = _projects.find(projectId);
    if (it == _projects.end())
        throw Error(ErrorCode::not_found, "no project " + projectId);
    return *it->second;
}

void ArtifactStore::load_from_disk()
{
    if (!fs::exists(*_options.root))
        return;
    std::vector<fs::path> dirs;
    for (const auto& entry: fs::directory_iterator(*_options.root))
        if (entry.is_directory() && fs::exists(entry.path() / "log.jsonl"))
            dirs.push_back(entry.path());
    std::ranges::sort(dirs);
    for (const auto& dir: dirs)
        load_project(dir);
}

void ArtifactStore::load_project(const fs::path& dir)
{
    auto slotPtr = std::make_unique<ProjectSlot>();
    std::ifstream in(dir / "log.jsonl");
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line))
    {
        ++lineNo;
        if (line.empty())
            continue;
        try
        {
            apply_event(slotPtr->project, json::parse(line));
        }
        catch (const json::exception& e)
        {
            throw Error(ErrorCode::io_error, (dir / "log.jsonl").string() + ":" + std::to_string(lineNo) + ": " + e.what());
        }
    }

    // snapshots must agree with the log
    for (const auto& [id, record]: slotPtr->project.artifacts)
        for (const auto& v: record.versions)
        {
            auto const path = dir / "artifacts" / id / ("v" + std::to_string(v.number) + ".md");
            std::ifstream file(path, std::ios::binary);
            std::stringstream buf;
            buf << file.rdbuf();
            if (!file || buf.str() != render_artifact_document(record, v))
                throw Error(ErrorCode::io_error, "snapshot does not match log: " + path.string());
        }

    auto id = slotPtr->project.projectId;
    _projects.emplace(std::move(id), std::move(slotPtr));
}

namespace
{

// Stamps, applies and persists one event. Caller holds the exclusive lock.
json commit(const ArtifactStore::Options& options, Project& project, json event)
{
    auto ts = format_rfc3339(options.clock());
    if (ts < project.lastTimestamp)
        ts = project.lastTimestamp;
    event["timestamp"] = ts;
    apply_event(project, event);

    if (options.root)
    {
        auto const dir = *options.root / project.projectId;
        fs::create_directories(dir);
        auto const type = event.at("type").get<std::string>();
        if (type == "create" || (type == "apply" && event.at("decision") == "accept"))
        {
            const auto& record = project.artifacts.at(event.at("artifact_id").get<std::string>());
            const auto& head = record.head();
            write_file(dir / "artifacts" / record.artifactId / ("v" + std::to_string(head.number) + ".md"),
                       render_artifact_document(record, head));
        }
        std::ofstream log(dir / "log.jsonl", std::ios::app | std::ios::binary);
        log << event.dump() << '\n';
        if (!log)
            throw Error(ErrorCode::io_error, "cannot append to log of " + project.projectId);
    }
    return event;
}

} // namespace

ProjectState ArtifactStore::create_project(const std::string& projectId, ProjectConfig config)
{
    validate_project_id(projectId);
    if (config.gate.smeQuorum < 1 || config.gate.developerQuorum < 1)
        throw Error(ErrorCode::invalid_argument, "gate quorum must be at least 1 per role");

    auto lock = std::unique_lock(_projectsMutex);
    if (_projects.contains(projectId))
        throw Error(ErrorCode::already_exists, "project " + projectId + " already exists");

    auto slotPtr = std::make_unique<ProjectSlot>();
    commit(_options, slotPtr->project,
           { { "type", "project_created" },
             { "project_id", projectId },
             { "config",
               { { "sme_quorum", config.gate.smeQuorum },
                 { "developer_quorum", config.gate.developerQuorum },
                 { "merge_subphases", config.gate.mergeSubphases } } } });
    auto state = slotPtr->project.state;
    _projects.emplace(projectId, std::move(slotPtr));
    return state;
}

bool ArtifactStore::has_project(const std::string& projectId) const
{
    auto lock = std::shared_lock(_projectsMutex);
    return _projects.contains(projectId);
}

std::vector<std::string> ArtifactStore::project_ids() const
{
    auto lock = std::shared_lock(_projectsMutex);
    std::vector<std::string> ids;
    for (const auto& [id, _]: _projects)
        ids.push_back(id);
    return ids;
}

void ArtifactStore::delete_project(const std::string& projectId)
{
    auto lock = std::unique_lock(_projectsMutex);
    auto it = _projects.find(projectId);
    if (it == _projects.end())
        throw Error(ErrorCode::not_found, "no project " + projectId);
    {
        auto projectLock = std::unique_lock(it->second->mutex);
        if (_options.root)
            fs::remove_all(*_options.root / projectId);
    }
    _projects.erase(it);
}

Artifact ArtifactStore::create_artifact(const std::string& projectId, PhaseId phase, ArtifactKind kind,
                                        const std::string& content, Role authoredBy)
{
    if (!kind_legal_for_phase(kind, phase))
        throw Error(ErrorCode::illegal_kind_for_phase,
                    std::string(to_string(kind)) + " is not produced in phase " + std::string(to_string(phase)),
                    { { "phase", to_string(phase) }, { "kind", to_string(kind) } });
    if (content.find_first_not_of(" \t\r\n") == std::string::npos)
        throw Error(ErrorCode::empty_content, "artifact content is empty");

    auto& s = slot(projectId);
    auto lock = std::unique_lock(s.mutex);
    auto const id = _ids.next();
    commit(_options, s.project,
           { { "type", "create" },
             { "artifact_id", id },
             { "phase", to_string(phase) },
             { "kind", to_string(kind) },
             { "version", 1 },
             { "content", content },
             { "digest", sha256_hex(content) },
             { "authored_by", to_string(authoredBy) } });
    return Artifact::from(s.project.artifacts.at(id));
}

RevisionProposal ArtifactStore::propose_revision(const std::string& projectId, const std::string& artifactId,
                                                 int baseVersion, const std::string& diffText,
                                                 const std::string& rationale, Role proposedBy)
{
    auto& s = slot(projectId);
    auto lock = std::unique_lock(s.mutex);
    const auto& record = s.project.artifact(artifactId);
    if (baseVersion != record.head().number)
        throw Error(ErrorCode::stale_base,
                    "base version " + std::to_string(baseVersion) + " is not the head ("
                        + std::to_string(record.head().number) + ")",
                    { { "head_version", record.head().number } });

    if (diff::parse_unified_diff(diffText).hunks.empty())
        throw Error(ErrorCode::malformed_diff, "diff contains no hunks");
    std::string revised;
    try
    {
        revised = diff::apply_unified_diff(record.head().content, diffText);
    }
    catch (const Error& e)
    {
        throw Error(ErrorCode::malformed_diff, std::string("diff does not apply to base version: ") + e.what());
    }
    if (revised.find_first_not_of(" \t\r\n") == std::string::npos)
        throw Error(ErrorCode::malformed_diff, "diff would leave the artifact empty");

    auto const id = _ids.next();
    commit(_options, s.project,
           { { "type", "propose" },
             { "proposal_id", id },
             { "artifact_id", artifactId },
             { "base_version", baseVersion },
             { "diff", diffText },
             { "rationale", rationale },
             { "proposed_by", to_string(proposedBy) } });
    return s.project.proposals.at(id);
}

Artifact ArtifactStore::apply_revision(const std::string& projectId, const std::string& proposalId, bool accept)
{
    auto& s = slot(projectId);
    auto lock = std::unique_lock(s.mutex);
    auto it = s.project.proposals.find(proposalId);
    if (it == s.project.proposals.end())
        throw Error(ErrorCode::not_found, "no proposal " + proposalId);
    const auto& proposal = it->second;
    if (proposal.state != ProposalState::pending)
        throw Error(ErrorCode::proposal_not_pending, "proposal " + proposalId + " is " + to_string(proposal.state));

    const auto& record = s.project.artifact(proposal.artifactId);
    json event = { { "type", "apply" },
                   { "proposal_id", proposalId },
                   { "artifact_id", proposal.artifactId },
                   { "decision", accept ? "accept" : "reject" } };
    if (accept)
    {
        if (proposal.baseVersion != record.head().number)
            throw Error(ErrorCode::stale_base,
                        "proposal is based on v" + std::to_string(proposal.baseVersion) + " but head is v"
                            + std::to_string(record.head().number),
                        { { "head_version", record.head().number } });
        auto const revised = diff::apply_unified_diff(record.head().content, proposal.diff);
        event["new_version"] = record.head().number + 1;
        event["digest"] = sha256_hex(revised);
    }
    commit(_options, s.project, std::move(event));
    return Artifact::from(record);
}

ApprovalRecord ArtifactStore::record_approval(const std::string& projectId, const std::string& artifactId,
                                              int version, Role role, const std::string& actor, Verdict verdict,
                                              const std::string& note)
{
    if (role == Role::helper_agent)
        throw Error(ErrorCode::helper_agent_cannot_approve, "helper agents cannot record gate verdicts");
    if (actor.empty())
        throw Error(ErrorCode::invalid_argument, "approval requires an actor");

    auto& s = slot(projectId);
    auto lock = std::unique_lock(s.mutex);
    const auto& record = s.project.artifact(artifactId);
    const auto& head = record.head();
    if (version != head.number)
        throw Error(ErrorCode::version_not_head,
                    "v" + std::to_string(version) + " is not the head (v" + std::to_string(head.number) + ")",
                    { { "head_version", head.number } });
    if (head.baseStatus == ArtifactStatus::rejected)
        throw Error(ErrorCode::artifact_rejected,
                    "v" + std::to_string(version) + " was rejected; a new revision is required");

    commit(_options, s.project,
           { { "type", "approve" },
             { "artifact_id", artifactId },
             { "version", version },
             { "role", to_string(role) },
             { "actor", actor },
             { "verdict", to_string(verdict) },
             { "note", note } });
    return head.approvals.back();
}

Artifact ArtifactStore::get_artifact(const std::string& projectId, const std::string& artifactId) const
{
    auto& s = slot(projectId);
    auto lock = std::shared_lock(s.mutex);
    return Artifact::from(s.project.artifact(artifactId));
}

std::vector<Artifact> ArtifactStore::list_artifacts(const std::string& projectId) const
{
    auto& s = slot(projectId);
    auto lock = std::shared_lock(s.mutex);
    std::vector<Artifact> out;
    for (const auto& [id, record]: s.project.artifacts)
        out.push_back(Artifact::from(record));
    std::ranges::stable_sort(out, {}, [](const Artifact& a) { return phase_index(a.phase); });
    return out;
}

RevisionProposal ArtifactStore::get_proposal(const std::string& projectId, const std::string& proposalId) const
{
    auto& s = slot(projectId);
    auto lock = std::shared_lock(s.mutex);
    auto it = s.project.proposals.find(proposalId);
    if (it == s.project.proposals.end())
        throw Error(ErrorCode::not_found, "no proposal " + proposalId);
    return it->second;
}

std::vector<LineageEntry> ArtifactStore::artifact_lineage(const std::string& projectId,
                                                          const std::string& artifactId) const
{
    auto& s = slot(projectId);
    auto lock = std::shared_lock(s.mutex);
    const auto& record = s.project.artifact(artifactId);

    std::vector<LineageEntry> out;
    std::string content;
    for (const auto& v: record.versions)
    {
        content = v.number == 1 ? v.content : diff::apply_unified_diff(content, v.diff);
        if (sha256_hex(content) != v.digest)
            throw Error(ErrorCode::io_error, "lineage replay diverged at v" + std::to_string(v.number));
        out.push_back({ v.number, content, v.status(), v.approvals });
    }
    return out;
}

std::vector<Artifact> ArtifactStore::approved_context(const std::string& projectId, PhaseId upToPhase) const
{
    auto& s = slot(projectId);
    auto lock = std::shared_lock(s.mutex);
    std::vector<Artifact> out;
    for (const auto& [id, record]: s.project.artifacts)
        if (phase_index(record.phase) <= phase_index(upToPhase) && record.head().status() == ArtifactStatus::approved)
            out.push_back(Artifact::from(record));
    std::ranges::stable_sort(out, {}, [](const Artifact& a) { return phase_index(a.phase); });
    return out;
}

ProjectState ArtifactStore::project_state(const std::string& projectId) const
{
    auto& s = slot(projectId);
    auto lock = std::shared_lock(s.mutex);
    return s.project.state;
}

void ArtifactStore::read(const std::string& projectId, const std::function<void(const Project&)>& fn) const
{
    auto& s = slot(projectId);
    auto lock = std::shared_lock(s.mutex);
    fn(s.project);
}

ProjectState ArtifactStore::commit_transition(const std::string& projectId,
                                              const std::function<Transition(const Project&)>& decide,
                                              const std::optional<std::string>& idempotencyKey)
{
    auto& s = slot(projectId);
    auto lock = std::unique_lock(s.mutex);
    if (idempotencyKey)
        if (auto it = s.project.idempotency.find(*idempotencyKey); it != s.project.idempotency.end())
        {
            return project_state_from_json(it->second); // replayed request
        }

    auto const t = decide(s.project);
    json event = { { "type", to_string(t.cause) }, { "from", to_string(t.from) }, { "to", to_string(t.to) } };

    if (t.cause == TransitionCause::advance)
    {
        json gated = json::array();
        for (auto p: t.gatedPhases)
            gated.push_back(to_string(p));
        event["gated_phases"] = gated;
    }
    else
    {
        auto const upper = gate_group(t.from, s.project.config.gate).back();
        json staled = json::array();
        for (const auto& [id, record]: s.project.artifacts)
            if (phase_index(record.phase) > phase_index(t.to) && phase_index(record.phase) <= phase_index(upper)
                && record.head().baseStatus == ArtifactStatus::approved)
                staled.push_back(id);
        event["staled"] = staled;
    }
    if (idempotencyKey)
        event["idempotency_key"] = *idempotencyKey;

    commit(_options, s.project, std::move(event));
    return s.project.state;
}

} // namespace care
