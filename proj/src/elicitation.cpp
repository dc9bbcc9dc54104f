// SPDX-License-Identifier: Apache-2.0
#include <care/elicitation.hpp>
#include <care/error.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

namespace care
{

namespace
{

using D = ElicitationDimension;

const std::map<PhaseId, std::vector<ElicitationDimension>>& checklists()
{
    static const std::map<PhaseId, std::vector<ElicitationDimension>> table {
        { PhaseId::P1_scope,
          {
              D { PhaseId::P1_scope, "user_role_expertise", "Users and Expertise",
                  "who the users are: role, expertise, constraints",
                  "Who will use the agent, what is their role and expertise, and what constraints do they work under?" },
              D { PhaseId::P1_scope, "tasks", "Tasks", "tasks the users want to accomplish",
                  "Which tasks should the agent help these users accomplish?" },
              D { PhaseId::P1_scope, "workflow_steps", "Workflow", "steps the users follow today",
                  "Walk through the steps you follow today for this task, from start to finish." },
              D { PhaseId::P1_scope, "pain_points", "Pain Points", "where the current workflow breaks down",
                  "Where does the current workflow cost the most time or go wrong?" },
              D { PhaseId::P1_scope, "non_delegable_decisions", "Non-Delegable Decisions",
                  "decisions that must stay with a human",
                  "Which decisions must always stay with a person and never be made by the agent?" },
              D { PhaseId::P1_scope, "outcomes_success", "Outcomes and Success Criteria",
                  "desired outcomes and how success is judged",
                  "What outcome would make this agent a success, and how would you measure it?" },
          } },
        { PhaseId::P2_1_tools,
          {
              D { PhaseId::P2_1_tools, "tools_apis_datasets", "Tools, APIs and Datasets",
                  "tools, APIs, datasets and other resources the agent may use",
                  "Which tools, APIs, datasets or other resources should the agent be able to use?" },
              D { PhaseId::P2_1_tools, "io_schemas", "Input and Output Schemas", "input and output schemas of each tool",
                  "What inputs does each tool accept and what does it return?" },
              D { PhaseId::P2_1_tools, "limits_quotas_permissions", "Limits, Quotas and Permissions",
                  "rate limits, quotas and access permissions",
                  "What rate limits, quotas or permission requirements apply to these tools?" },
              D { PhaseId::P2_1_tools, "provenance_metadata", "Provenance and Metadata",
                  "provenance and metadata the agent must capture or report",
                  "What provenance or metadata must be captured for every result?" },
              D { PhaseId::P2_1_tools, "policy_security_governance", "Policy, Security and Governance",
                  "policy, security and governance constraints on tool use",
                  "Are there policy, security or governance rules that restrict how the tools may be used?" },
          } },
        { PhaseId::P2_2_context,
          {
              D { PhaseId::P2_2_context, "context_access", "Context Access", "what context the agent can access",
                  "What background material or state should the agent have access to?" },
              D { PhaseId::P2_2_context, "retrieval_strategy", "Retrieval Strategy",
                  "metadata search, vector search or a hybrid",
                  "Should context be found through metadata search, vector search, or a combination?" },
              D { PhaseId::P2_2_context, "summarization_rules", "Summarization Rules",
                  "how retrieved material is condensed",
                  "How should long retrieved material be summarized before the agent uses it?" },
              D { PhaseId::P2_2_context, "memory_boundaries", "Memory Boundaries",
                  "what is kept across turns and sessions",
                  "What may the agent remember across turns or sessions, and what must it forget?" },
          } },
        { PhaseId::P2_3_output,
          {
              D { PhaseId::P2_3_output, "output_templates", "Output Templates", "structured templates for answers",
                  "What structure should the agent's answers follow?" },
              D { PhaseId::P2_3_output, "citation_provenance", "Citations and Provenance",
                  "citation and provenance expectations",
                  "How should the agent cite sources and show where each result came from?" },
              D { PhaseId::P2_3_output, "deferral_rules", "Deferral Rules",
                  "when to hold back a final answer and hand the question back to the user",
                  "When should the agent hold back a final answer and ask the user to decide instead?" },
              D { PhaseId::P2_3_output, "degradation_behavior", "Degradation Behavior",
                  "behavior when data is incomplete",
                  "What should the agent do when the available data is incomplete?" },
              D { PhaseId::P2_3_output, "output_styles", "Output Styles",
                  "supported styles such as narrative, table or JSON",
                  "Which output styles (narrative, table, JSON, ...) must be supported?" },
          } },
        { PhaseId::P3_1_guardrails,
          {
              D { PhaseId::P3_1_guardrails, "forbidden_actions", "Forbidden Actions", "actions the agent must never take",
                  "Which actions must the agent never take?" },
              D { PhaseId::P3_1_guardrails, "sensitive_domains", "Sensitive Domains",
                  "embargoed data, human subjects, interpretation limits",
                  "Which data or topics are sensitive (embargoed data, human subjects, interpretation limits)?" },
              D { PhaseId::P3_1_guardrails, "never_guess", "Never Guess", "facts the agent must not invent",
                  "What must the agent never guess or make up?" },
              D { PhaseId::P3_1_guardrails, "review_escalation", "Review and Escalation",
                  "review and escalation requirements",
                  "Which outputs need human review, and to whom should the agent escalate?" },
              D { PhaseId::P3_1_guardrails, "norms", "Norms", "ethical, organizational and scientific norms",
                  "Which ethical, organizational or scientific norms must the agent respect?" },
          } },
        { PhaseId::P3_2_reasoning,
          {
              D { PhaseId::P3_2_reasoning, "decomposition_logic", "Task Decomposition",
                  "how a request is broken into steps",
                  "How should the agent break a request into steps?" },
              D { PhaseId::P3_2_reasoning, "when_to_ask", "When to Ask", "when the agent asks the user questions",
                  "In which situations should the agent stop and ask the user a question?" },
              D { PhaseId::P3_2_reasoning, "retrieve_compare_critique_synthesize", "Retrieve, Compare, Critique, Synthesize",
                  "how results are retrieved, compared, critiqued and synthesized",
                  "How should the agent retrieve, compare, critique and combine candidate results?" },
              D { PhaseId::P3_2_reasoning, "uncertainty_handling", "Uncertainty Handling",
                  "how uncertainty is detected and communicated",
                  "How should the agent handle and communicate uncertainty?" },
              D { PhaseId::P3_2_reasoning, "tool_selection_criteria", "Tool Selection Criteria",
                  "criteria for choosing a tool", "How should the agent decide which tool to call and with what arguments?" },
              D { PhaseId::P3_2_reasoning, "escalation_rules", "Escalation Rules",
                  "abstain, ask the user, or flag an error",
                  "When should the agent abstain, ask the user, or flag an error?" },
          } },
        { PhaseId::P4_prompt,
          {
              D { PhaseId::P4_prompt, "persona", "Persona", "persona the agent adopts",
                  "What persona and voice should the agent adopt?" },
              D { PhaseId::P4_prompt, "flipped_interaction", "Flipped Interaction",
                  "when the agent interviews the user before acting",
                  "When should the agent ask the user questions before searching?" },
              D { PhaseId::P4_prompt, "planning", "Planning", "planning instructions before tool use",
                  "How should the agent plan its searches before calling tools?" },
              D { PhaseId::P4_prompt, "critique_verification", "Critique and Verification",
                  "how candidate answers are checked",
                  "How should the agent check its candidate results before answering?" },
              D { PhaseId::P4_prompt, "output_patterns", "Output Format", "answer layout and formatting templates",
                  "What exact layout should the final answer use?" },
              D { PhaseId::P4_prompt, "tool_use_scaffolding", "Tool Use", "tool-use scaffolding and retry policy",
                  "What instructions should frame tool calls, retries and search strategy?" },
              D { PhaseId::P4_prompt, "self_check", "Self-Check", "reflection before the final answer",
                  "What should the agent re-check about its own answer before returning it?" },
          } },
        { PhaseId::P5_benchmark,
          {
              D { PhaseId::P5_benchmark, "scenario_tasks", "Scenario Tasks", "scenario-based tasks to test",
                  "Which realistic scenarios should the benchmark cover?" },
              D { PhaseId::P5_benchmark, "test_prompts", "Test Prompts", "concrete test prompts",
                  "Can you give example prompts a real user would send?" },
              D { PhaseId::P5_benchmark, "expected_outputs", "Expected Outputs", "expected answers for the prompts",
                  "What answer do you expect for each of these prompts?" },
              D { PhaseId::P5_benchmark, "rubrics", "Rubrics", "human-scored rubrics",
                  "How should a person score answers (correctness, clarity, safety)?" },
              D { PhaseId::P5_benchmark, "failure_modes", "Failure Modes", "catalog of known failure modes",
                  "Which failure modes must the benchmark be able to detect?" },
              D { PhaseId::P5_benchmark, "acceptance_criteria", "Acceptance Criteria",
                  "pass/fail thresholds", "What thresholds decide whether the agent passes?" },
          } },
    };
    return table;
}

} // namespace

const std::vector<ElicitationDimension>& dimension_checklist(PhaseId phase)
{
    return checklists().at(phase);
}

const ElicitationDimension* find_dimension(PhaseId phase, std::string_view dimensionId)
{
    for (const auto& d: dimension_checklist(phase))
        if (d.dimensionId == dimensionId)
            return &d;
    return nullptr;
}

std::string_view to_string(EntryKind kind)
{
    switch (kind)
    {
        case EntryKind::question: return "question";
        case EntryKind::answer: return "answer";
        case EntryKind::summary: return "summary";
    }
    return "question";
}

namespace
{

EntryKind entry_kind_from_string(std::string_view text)
{
    if (text == "question")
        return EntryKind::question;
    if (text == "answer")
        return EntryKind::answer;
    if (text == "summary")
        return EntryKind::summary;
    throw Error(ErrorCode::invalid_argument, "unknown transcript entry kind: " + std::string(text));
}

} // namespace

ElicitationSession::ElicitationSession(std::string sessionId, std::string projectId, PhaseId phase):
    _sessionId(std::move(sessionId)), _projectId(std::move(projectId)), _phase(phase)
{
}

std::string ElicitationSession::next_entry_id() const
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "e-%04zu", _entries.size() + 1);
    return buf;
}

const TranscriptEntry& ElicitationSession::add_question(const std::string& dimensionId, const std::string& text)
{
    if (!find_dimension(_phase, dimensionId))
        throw Error(ErrorCode::invalid_argument,
                    "dimension " + dimensionId + " is not on the " + std::string(to_string(_phase)) + " checklist");
    _entries.push_back({ next_entry_id(), EntryKind::question, dimensionId, std::nullopt, text, Role::helper_agent });
    return _entries.back();
}

const TranscriptEntry& ElicitationSession::add_answer(const std::string& questionEntryId, const std::string& text,
                                                      Role author)
{
    const auto* question = find(questionEntryId);
    if (!question)
        throw Error(ErrorCode::not_found, "no transcript entry " + questionEntryId);
    if (question->kind != EntryKind::question)
        throw Error(ErrorCode::invalid_argument, questionEntryId + " is not a question");
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw Error(ErrorCode::empty_content, "answer text is empty");
    auto const dimension = question->dimensionId;
    _entries.push_back({ next_entry_id(), EntryKind::answer, dimension, questionEntryId, text, author });
    return _entries.back();
}

const TranscriptEntry& ElicitationSession::add_summary(const std::string& text)
{
    _entries.push_back({ next_entry_id(), EntryKind::summary, std::nullopt, std::nullopt, text, Role::helper_agent });
    return _entries.back();
}

const TranscriptEntry* ElicitationSession::find(std::string_view entryId) const
{
    auto it = std::ranges::find(_entries, entryId, &TranscriptEntry::entryId);
    return it == _entries.end() ? nullptr : &*it;
}

std::set<std::string> ElicitationSession::answered_dimensions() const
{
    std::set<std::string> out;
    for (const auto& e: _entries)
        if (e.kind == EntryKind::answer && e.dimensionId)
            out.insert(*e.dimensionId);
    return out;
}

std::vector<const TranscriptEntry*> ElicitationSession::open_questions() const
{
    std::set<std::string> answered;
    for (const auto& e: _entries)
        if (e.kind == EntryKind::answer && e.answers)
            answered.insert(*e.answers);
    std::vector<const TranscriptEntry*> out;
    for (const auto& e: _entries)
        if (e.kind == EntryKind::question && !answered.contains(e.entryId))
            out.push_back(&e);
    return out;
}

nlohmann::json ElicitationSession::to_json() const
{
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e: _entries)
    {
        nlohmann::json j = { { "entry_id", e.entryId },
                             { "kind", to_string(e.kind) },
                             { "text", e.text },
                             { "author", to_string(e.author) } };
        j["dimension_id"] = e.dimensionId ? nlohmann::json(*e.dimensionId) : nlohmann::json(nullptr);
        j["answers"] = e.answers ? nlohmann::json(*e.answers) : nlohmann::json(nullptr);
        entries.push_back(std::move(j));
    }
    return { { "session_id", _sessionId },
             { "project_id", _projectId },
             { "phase", to_string(_phase) },
             { "transcript", entries } };
}

ElicitationSession ElicitationSession::from_json(const nlohmann::json& j)
{
    ElicitationSession s(j.at("session_id").get<std::string>(), j.at("project_id").get<std::string>(),
                         phase_from_string(j.at("phase").get<std::string>()));
    for (const auto& e: j.at("transcript"))
    {
        TranscriptEntry entry;
        entry.entryId = e.at("entry_id").get<std::string>();
        entry.kind = entry_kind_from_string(e.at("kind").get<std::string>());
        entry.text = e.at("text").get<std::string>();
        entry.author = role_from_string(e.at("author").get<std::string>());
        if (!e.at("dimension_id").is_null())
            entry.dimensionId = e["dimension_id"].get<std::string>();
        if (!e.at("answers").is_null())
            entry.answers = e["answers"].get<std::string>();
        s._entries.push_back(std::move(entry));
    }
    return s;
}

void save_session(const std::filesystem::path& root, const ElicitationSession& session)
{
    auto const dir = root / session.project_id() / "sessions";
    std::filesystem::create_directories(dir);
    auto const tmp = dir / (session.session_id() + ".json.tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << session.to_json().dump(2) << '\n';
        if (!out)
            throw Error(ErrorCode::io_error, "cannot write session " + session.session_id());
    }
    std::filesystem::rename(tmp, dir / (session.session_id() + ".json"));
}

ElicitationSession load_session(const std::filesystem::path& root, const std::string& projectId,
                                const std::string& sessionId)
{
    auto const path = root / projectId / "sessions" / (sessionId + ".json");
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::not_found, "no session " + sessionId + " in project " + projectId);
    return ElicitationSession::from_json(nlohmann::json::parse(in));
}

std::vector<std::string> list_sessions(const std::filesystem::path& root, const std::string& projectId)
{
    std::vector<std::string> out;
    auto const dir = root / projectId / "sessions";
    if (!std::filesystem::exists(dir))
        return out;
    for (const auto& entry: std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".json")
            out.push_back(entry.path().stem().string());
    std::ranges::sort(out);
    return out;
}

} // namespace care
