// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <care/phases.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace care
{

struct ElicitationDimension
{
    PhaseId phase;
    std::string dimensionId;
    /// Section heading used for this dimension in the phase's artifact template.
    std::string heading;
    std::string description;
    /// Fallback question asked when the model does not cover the dimension.
    std::string defaultQuestion;
};

/// Built-in information-gathering checklist of a phase.
const std::vector<ElicitationDimension>& dimension_checklist(PhaseId phase);
const ElicitationDimension* find_dimension(PhaseId phase, std::string_view dimensionId);

enum class EntryKind : std::uint8_t
{
    question,
    answer,
    summary,
};

std::string_view to_string(EntryKind kind);

struct TranscriptEntry
{
    std::string entryId; // e-0001, e-0002, ... (session scoped)
    EntryKind kind = EntryKind::question;
    std::optional<std::string> dimensionId; // questions always; answers inherit from their question
    std::optional<std::string> answers;     // answer -> question entry id
    std::string text;
    Role author = Role::helper_agent;
};

/// Phase-aligned question/answer transcript between the helper agent and the
/// humans of a project.
class ElicitationSession
{
public:
    ElicitationSession() = default;
    ElicitationSession(std::string sessionId, std::string projectId, PhaseId phase);

    [[nodiscard]] const std::string& session_id() const noexcept { return _sessionId; }
    [[nodiscard]] const std::string& project_id() const noexcept { return _projectId; }
    [[nodiscard]] PhaseId phase() const noexcept { return _phase; }
    [[nodiscard]] const std::vector<TranscriptEntry>& transcript() const noexcept { return _entries; }

    /// Throws invalid_argument for dimensions outside the phase checklist.
    const TranscriptEntry& add_question(const std::string& dimensionId, const std::string& text);
    /// Throws not_found / invalid_argument when `questionEntryId` is not a question.
    const TranscriptEntry& add_answer(const std::string& questionEntryId, const std::string& text, Role author);
    const TranscriptEntry& add_summary(const std::string& text);

    [[nodiscard]] const TranscriptEntry* find(std::string_view entryId) const;
    /// Dimension ids with at least one answer.
    [[nodiscard]] std::set<std::string> answered_dimensions() const;
    /// Questions (in order) that have no answer yet.
    [[nodiscard]] std::vector<const TranscriptEntry*> open_questions() const;

    [[nodiscard]] nlohmann::json to_json() const;
    static ElicitationSession from_json(const nlohmann::json& j);

private:
    std::string next_entry_id() const;

    std::string _sessionId;
    std::string _projectId;
    PhaseId _phase = PhaseId::P1_scope;
    std::vector<TranscriptEntry> _entries;
};

/// JSON files under `<root>/<project>/sessions/<session>.json`.
void save_session(const std::filesystem::path& root, const ElicitationSession& session);
ElicitationSession load_session(const std::filesystem::path& root, const std::string& projectId,
                                const std::string& sessionId);
std::vector<std::string> list_sessions(const std::filesystem::path& root, const std::string& projectId);

} // namespace care
