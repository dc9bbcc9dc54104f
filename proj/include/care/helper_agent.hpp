// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <care/artifact_store.hpp>
#include <care/elicitation.hpp>
#include <care/templates.hpp>
#include <care/transport.hpp>

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace care
{

/// Versioned instruction text sent as the system prompt of helper-agent calls.
struct PromptModule
{
    std::string name;
    int version = 1;
    std::string text;

    [[nodiscard]] std::string system_text() const;
};

const std::vector<PromptModule>& helper_prompt_modules();
const PromptModule& helper_prompt_module(std::string_view name);

/// Writes every module to `<root>/_helper_prompts/<name>/v<N>.md`.
void export_prompt_modules(const std::filesystem::path& root);

struct ElicitationQuestion
{
    std::string dimensionId;
    std::string text;

    bool operator==(const ElicitationQuestion&) const = default;
};

struct SummaryBullet
{
    std::string text;
    std::vector<std::string> entryIds;
};

struct IntentSummary
{
    std::vector<SummaryBullet> bullets;
    /// Bullets the model produced without a resolvable transcript reference.
    std::vector<std::string> rejected;

    [[nodiscard]] std::string markdown() const;
};

struct DraftProposal
{
    ArtifactKind kind = ArtifactKind::scope_spec;
    std::string content;
    /// bullet text -> transcript entry ids / artifact refs
    std::vector<std::pair<std::string, std::vector<std::string>>> provenance;
    /// Approved artifacts offered to the model as context (valid `art:` refs).
    std::vector<std::string> contextArtifactIds;
};

enum class ViolationKind : std::uint8_t
{
    introduced_requirement,
    omitted_constraint,
};

std::string_view to_string(ViolationKind kind);

struct FaithfulnessViolation
{
    ViolationKind kind;
    /// Bullet text for introduced requirements, dimension id for omissions.
    std::string subject;
    int line = 0;

    bool operator==(const FaithfulnessViolation&) const = default;
};

/// Structural faithfulness check of a draft against its session. Pure; never
/// calls a model.
///
/// Reports every bullet whose provenance resolves to nothing (introduced
/// requirement) and every answered dimension that no bullet traces back to
/// (omitted constraint).
std::vector<FaithfulnessViolation> check_faithfulness(const DraftProposal& draft, const ElicitationSession& session);

/// Approved heads of phases <= `phase`, ordered by phase then artifact id,
/// wrapped in section markers. Byte-stable for a fixed store state.
std::string assemble_prompt_context(const ArtifactStore& store, const std::string& projectId, PhaseId phase);
std::string render_context_bundle(const std::vector<Artifact>& artifacts);

struct DraftSubmission
{
    /// Set when the draft became version 1 of a new artifact.
    std::optional<Artifact> created;
    /// Set when the draft was filed as a revision of the existing head.
    std::optional<RevisionProposal> proposal;
};

/// LLM-backed facilitator: phase-aligned questions, intent summaries,
/// template drafts and revision diffs. All model calls go through the
/// configured transport with temperature 0 and a fixed seed by default, and
/// are retried per RetryingTransport::Policy. The helper never records
/// approvals.
class HelperAgent
{
public:
    struct Options
    {
        double temperature = 0.0;
        std::int64_t seed = 0;
        RetryingTransport::Policy retry {};
        RetryingTransport::Sleeper sleeper {};
    };

    explicit HelperAgent(std::shared_ptr<ModelTransport> transport);
    HelperAgent(std::shared_ptr<ModelTransport> transport, Options options);

    /// At least one question for every checklist dimension of `phase` that
    /// has no answer in `session`, in checklist order.
    std::vector<ElicitationQuestion> generate_questions(PhaseId phase, const std::vector<Artifact>& priorArtifacts,
                                                        const ElicitationSession& session);

    IntentSummary summarize_intent(const ElicitationSession& session);

    /// Throws illegal_kind_for_phase or template_violation.
    DraftProposal draft_artifact(ArtifactKind kind, const ElicitationSession& session,
                                 const std::vector<Artifact>& priorArtifacts);

    /// Files a draft: version 1 of a new artifact, or a revision proposal
    /// against the newest artifact of the same kind.
    DraftSubmission submit_draft(ArtifactStore& store, const std::string& projectId, const DraftProposal& draft,
                                 const std::string& rationale);

    RevisionProposal propose_diff(ArtifactStore& store, const Artifact& artifact, const std::string& feedback);

    [[nodiscard]] const ModelTransport& transport() const noexcept { return *_transport; }

private:
    std::string call(const PromptModule& module, const std::string& instructions, const nlohmann::json& payload);

    std::shared_ptr<ModelTransport> _transport;
    Options _options;
};

/// Extracts the JSON payload a helper request carries (the fenced ```json
/// block of the latest user message that has one), or null.
nlohmann::json task_payload(const ModelRequest& request);

} // namespace care
