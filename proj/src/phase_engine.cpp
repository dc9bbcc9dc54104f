// SPDX-License-Identifier: Apache-2.0
#include <care/error.hpp>
#include <care/phase_engine.hpp>

namespace care
{

std::string_view to_string(MissingReason reason)
{
    switch (reason)
    {
        case MissingReason::no_artifact: return "no_artifact";
        case MissingReason::not_approved: return "not_approved";
        case MissingReason::stale: return "stale";
    }
    return "no_artifact";
}

nlohmann::json to_json(const GateStatus& status)
{
    nlohmann::json required = nlohmann::json::array();
    for (auto kind: status.required)
        required.push_back(to_string(kind));
    nlohmann::json missing = nlohmann::json::array();
    for (const auto& m: status.missing)
        missing.push_back({ { "kind", to_string(m.kind) }, { "reason", to_string(m.reason) } });
    return { { "phase", to_string(status.phase) },
             { "required", required },
             { "satisfied", status.satisfied },
             { "missing", missing } };
}

GateStatus evaluate_gate(const Project& project, PhaseId phase)
{
    GateStatus status;
    status.phase = phase;
    status.required = required_artifacts(phase);
    const auto& policy = project.config.gate;

    for (auto kind: status.required)
    {
        auto const candidates = project.artifacts_of(kind);
        if (candidates.empty())
        {
            status.missing.push_back({ kind, MissingReason::no_artifact });
            continue;
        }
        // Any artifact of the kind may carry the gate; report the best reason otherwise.
        bool ok = false;
        bool anyStale = false;
        for (const auto* record: candidates)
        {
            const auto& head = record->head();
            if (head.status() == ArtifactStatus::approved && head.count_approvals(Role::sme) >= policy.smeQuorum
                && head.count_approvals(Role::developer) >= policy.developerQuorum)
                ok = true;
            anyStale = anyStale || head.status() == ArtifactStatus::stale;
        }
        if (!ok)
            status.missing.push_back({ kind, anyStale ? MissingReason::stale : MissingReason::not_approved });
    }
    status.satisfied = status.missing.empty();
    return status;
}

PhaseEngine::PhaseEngine(ArtifactStore& store): _store(store)
{
}

GateStatus PhaseEngine::gate_status(const std::string& projectId, PhaseId phase) const
{
    GateStatus status;
    _store.read(projectId, [&](const Project& project) { status = evaluate_gate(project, phase); });
    return status;
}

std::vector<GateStatus> PhaseEngine::current_gate(const std::string& projectId) const
{
    std::vector<GateStatus> out;
    _store.read(projectId, [&](const Project& project) {
        for (auto phase: gate_group(project.state.currentPhase, project.config.gate))
            out.push_back(evaluate_gate(project, phase));
    });
    return out;
}

ProjectState PhaseEngine::advance(const std::string& projectId, const std::optional<std::string>& idempotencyKey)
{
    return _store.commit_transition(
        projectId,
        [](const Project& project) {
            auto const current = project.state.currentPhase;
            auto const next = next_gate_phase(current, project.config.gate);
            if (!next)
                throw Error(ErrorCode::already_at_final_phase, "project is already at the final phase");

            Transition t;
            t.from = current;
            t.to = *next;
            t.cause = TransitionCause::advance;

            nlohmann::json missing = nlohmann::json::array();
            for (auto phase: gate_group(current, project.config.gate))
            {
                auto const gate = evaluate_gate(project, phase);
                t.gatedPhases.push_back(phase);
                for (const auto& m: gate.missing)
                    missing.push_back({ { "phase", to_string(phase) },
                                        { "kind", to_string(m.kind) },
                                        { "reason", to_string(m.reason) } });
            }
            if (!missing.empty())
                throw Error(ErrorCode::gate_not_satisfied,
                            "gate for " + std::string(to_string(current)) + " is not satisfied",
                            { { "missing", missing } });
            return t;
        },
        idempotencyKey);
}

ProjectState PhaseEngine::revisit(const std::string& projectId, PhaseId target,
                                  const std::optional<std::string>& idempotencyKey)
{
    return _store.commit_transition(
        projectId,
        [target](const Project& project) {
            auto const current = project.state.currentPhase;
            auto const to = gate_group(target, project.config.gate).front();
            if (phase_index(to) >= phase_index(current))
                throw Error(ErrorCode::not_an_earlier_phase,
                            std::string(to_string(target)) + " is not earlier than "
                                + std::string(to_string(current)));
            Transition t;
            t.from = current;
            t.to = to;
            t.cause = TransitionCause::revisit;
            return t;
        },
        idempotencyKey);
}

ProjectState PhaseEngine::state(const std::string& projectId) const
{
    return _store.project_state(projectId);
}

} // namespace care
