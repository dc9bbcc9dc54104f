// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace care
{

/// Engineering phases in their fixed total order. Phases 2 and 3 are split
/// into separately gated sub-phases.
enum class PhaseId : std::uint8_t
{
    P1_scope,
    P2_1_tools,
    P2_2_context,
    P2_3_output,
    P3_1_guardrails,
    P3_2_reasoning,
    P4_prompt,
    P5_benchmark,
};

inline constexpr std::array allPhases {
    PhaseId::P1_scope,        PhaseId::P2_1_tools,     PhaseId::P2_2_context, PhaseId::P2_3_output,
    PhaseId::P3_1_guardrails, PhaseId::P3_2_reasoning, PhaseId::P4_prompt,    PhaseId::P5_benchmark,
};

enum class ArtifactKind : std::uint8_t
{
    scope_spec,
    tools_spec,
    context_spec,
    output_format_spec,
    guardrails_spec,
    reasoning_policy,
    prompt_architecture,
    benchmark_requirements,
};

inline constexpr std::array allArtifactKinds {
    ArtifactKind::scope_spec,      ArtifactKind::tools_spec,       ArtifactKind::context_spec,
    ArtifactKind::output_format_spec, ArtifactKind::guardrails_spec, ArtifactKind::reasoning_policy,
    ArtifactKind::prompt_architecture, ArtifactKind::benchmark_requirements,
};

enum class Role : std::uint8_t
{
    sme,
    developer,
    helper_agent,
};

enum class ArtifactStatus : std::uint8_t
{
    draft,
    under_review,
    approved,
    rejected,
    superseded,
    stale,
};

enum class Verdict : std::uint8_t
{
    approve,
    reject,
};

std::string_view to_string(PhaseId phase);
std::string_view to_string(ArtifactKind kind);
std::string_view to_string(Role role);
std::string_view to_string(ArtifactStatus status);
std::string_view to_string(Verdict verdict);

/// Accepts the canonical token (`P2_1_tools`) and the short form (`P2_1`).
PhaseId phase_from_string(std::string_view text);
ArtifactKind kind_from_string(std::string_view text);
Role role_from_string(std::string_view text);
ArtifactStatus status_from_string(std::string_view text);
Verdict verdict_from_string(std::string_view text);

constexpr int phase_index(PhaseId phase) noexcept
{
    return static_cast<int>(phase);
}

std::optional<PhaseId> next_phase(PhaseId phase) noexcept;

/// The fixed phase -> artifact-kind map. One kind per (sub-)phase.
std::vector<ArtifactKind> required_artifacts(PhaseId phase);

/// The phase that owns `kind`.
PhaseId phase_of(ArtifactKind kind) noexcept;

bool kind_legal_for_phase(ArtifactKind kind, PhaseId phase) noexcept;

/// Approval quorum per required artifact head plus gate granularity.
struct GatePolicy
{
    int smeQuorum = 1;
    int developerQuorum = 1;
    /// Merge 2.1-2.3 and 3.1-3.2 into two composite gates.
    bool mergeSubphases = false;

    bool operator==(const GatePolicy&) const = default;
};

/// Phases gated together with `phase` (a singleton unless sub-phases are merged).
std::vector<PhaseId> gate_group(PhaseId phase, const GatePolicy& policy);

/// First phase after the gate group of `phase`, or nullopt at the final gate.
std::optional<PhaseId> next_gate_phase(PhaseId phase, const GatePolicy& policy);

} // namespace care
