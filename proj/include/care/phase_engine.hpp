// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <care/artifact_store.hpp>

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace care
{

enum class MissingReason : std::uint8_t
{
    no_artifact,
    not_approved,
    stale,
};

std::string_view to_string(MissingReason reason);

struct MissingArtifact
{
    ArtifactKind kind;
    MissingReason reason;

    bool operator==(const MissingArtifact&) const = default;
};

struct GateStatus
{
    PhaseId phase = PhaseId::P1_scope;
    std::vector<ArtifactKind> required;
    bool satisfied = false;
    std::vector<MissingArtifact> missing;
};

nlohmann::json to_json(const GateStatus& status);

/// Gate of a single phase evaluated against a project snapshot. Pure.
///
/// A required kind is satisfied when its newest artifact's head is approved
/// (not stale, not under review) with the policy's quorum of sme and
/// developer approvals in the current approval round.
GateStatus evaluate_gate(const Project& project, PhaseId phase);

/// Stage-gate state machine over an ArtifactStore.
class PhaseEngine
{
public:
    explicit PhaseEngine(ArtifactStore& store);

    [[nodiscard]] GateStatus gate_status(const std::string& projectId, PhaseId phase) const;
    /// Gate status of the current phase's whole gate group.
    [[nodiscard]] std::vector<GateStatus> current_gate(const std::string& projectId) const;

    /// Throws gate_not_satisfied (details carry the missing list) or
    /// already_at_final_phase.
    ProjectState advance(const std::string& projectId, const std::optional<std::string>& idempotencyKey = std::nullopt);

    /// Moves back to `target` and marks approved heads of phases in
    /// (target, current] stale. Throws not_an_earlier_phase.
    ProjectState revisit(const std::string& projectId, PhaseId target,
                         const std::optional<std::string>& idempotencyKey = std::nullopt);

    [[nodiscard]] ProjectState state(const std::string& projectId) const;

private:
    ArtifactStore& _store;
};

} // namespace care
