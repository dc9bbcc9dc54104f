// SPDX-License-Identifier: Apache-2.0
#include <care/error.hpp>
#include <care/phases.hpp>

#include <algorithm>

namespace care
{

namespace
{

constexpr std::array<std::string_view, 8> phaseNames {
    "P1_scope",        "P2_1_tools",     "P2_2_context", "P2_3_output",
    "P3_1_guardrails", "P3_2_reasoning", "P4_prompt",    "P5_benchmark",
};
constexpr std::array<std::string_view, 8> phaseShortNames {
    "P1", "P2_1", "P2_2", "P2_3", "P3_1", "P3_2", "P4", "P5",
};
constexpr std::array<std::string_view, 8> kindNames {
    "scope_spec",      "tools_spec",       "context_spec",        "output_format_spec",
    "guardrails_spec", "reasoning_policy", "prompt_architecture", "benchmark_requirements",
};
constexpr std::array<std::string_view, 3> roleNames { "sme", "developer", "helper_agent" };
constexpr std::array<std::string_view, 6> statusNames {
    "draft", "under_review", "approved", "rejected", "superseded", "stale",
};
constexpr std::array<std::string_view, 2> verdictNames { "approve", "reject" };

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::array<std::string_view, N>& names, std::string_view what)
{
    auto it = std::ranges::find(names, text);
    if (it == names.end())
        throw Error(ErrorCode::invalid_argument, "unknown " + std::string(what) + ": " + std::string(text));
    return static_cast<Enum>(std::distance(names.begin(), it));
}

} // namespace

std::string_view to_string(PhaseId phase)
{
    return phaseNames.at(static_cast<std::size_t>(phase));
}

std::string_view to_string(ArtifactKind kind)
{
    return kindNames.at(static_cast<std::size_t>(kind));
}

std::string_view to_string(Role role)
{
    return roleNames.at(static_cast<std::size_t>(role));
}

std::string_view to_string(ArtifactStatus status)
{
    return statusNames.at(static_cast<std::size_t>(status));
}

std::string_view to_string(Verdict verdict)
{
    return verdictNames.at(static_cast<std::size_t>(verdict));
}

PhaseId phase_from_string(std::string_view text)
{
    if (auto it = std::ranges::find(phaseShortNames, text); it != phaseShortNames.end())
        return static_cast<PhaseId>(std::distance(phaseShortNames.begin(), it));
    return parse_enum<PhaseId>(text, phaseNames, "phase");
}

ArtifactKind kind_from_string(std::string_view text)
{
    return parse_enum<ArtifactKind>(text, kindNames, "artifact kind");
}

Role role_from_string(std::string_view text)
{
    return parse_enum<Role>(text, roleNames, "role");
}

ArtifactStatus status_from_string(std::string_view text)
{
    return parse_enum<ArtifactStatus>(text, statusNames, "artifact status");
}

Verdict verdict_from_string(std::string_view text)
{
    return parse_enum<Verdict>(text, verdictNames, "verdict");
}

std::optional<PhaseId> next_phase(PhaseId phase) noexcept
{
    if (phase == PhaseId::P5_benchmark)
        return std::nullopt;
    return static_cast<PhaseId>(phase_index(phase) + 1);
}

std::vector<ArtifactKind> required_artifacts(PhaseId phase)
{
    return { static_cast<ArtifactKind>(phase_index(phase)) };
}

PhaseId phase_of(ArtifactKind kind) noexcept
{
    return static_cast<PhaseId>(static_cast<int>(kind));
}

bool kind_legal_for_phase(ArtifactKind kind, PhaseId phase) noexcept
{
    return phase_of(kind) == phase;
}

std::vector<PhaseId> gate_group(PhaseId phase, const GatePolicy& policy)
{
    if (policy.mergeSubphases)
    {
        auto const i = phase_index(phase);
        if (i >= phase_index(PhaseId::P2_1_tools) && i <= phase_index(PhaseId::P2_3_output))
            return { PhaseId::P2_1_tools, PhaseId::P2_2_context, PhaseId::P2_3_output };
        if (i >= phase_index(PhaseId::P3_1_guardrails) && i <= phase_index(PhaseId::P3_2_reasoning))
            return { PhaseId::P3_1_guardrails, PhaseId::P3_2_reasoning };
    }
    return { phase };
}

std::optional<PhaseId> next_gate_phase(PhaseId phase, const GatePolicy& policy)
{
    return next_phase(gate_group(phase, policy).back());
}

} // namespace care
