// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <care/artifact_store.hpp>
#include <care/cmr_client.hpp>
#include <care/transport.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace care::agent
{

inline constexpr std::string_view kCareAgentName = "cmr_care_v1";
inline constexpr std::string_view kBaselineAgentName = "cmr_simple";

struct ToolParameter
{
    std::string name;
    std::string semanticType;
    std::string description;
    bool required = false;
};

struct ToolSchema
{
    std::string toolName;
    std::string description;
    std::vector<ToolParameter> parameters;

    [[nodiscard]] nlohmann::json to_json() const;
    static ToolSchema from_json(const nlohmann::json& j);
};

/// The single tool of the case study: CMR collection search.
const ToolSchema& collection_search_tool();

enum class OnExhaustion : std::uint8_t
{
    return_partial,
    fail,
};

struct Orchestration
{
    int maxToolCalls = 8;
    int retriesPerCall = 2;
    OnExhaustion onExhaustion = OnExhaustion::return_partial;

    [[nodiscard]] nlohmann::json to_json() const;
    static Orchestration from_json(const nlohmann::json& j);
};

struct AgentSpec
{
    std::string name;
    std::string systemPrompt;
    std::vector<ToolSchema> toolSchemas;
    Orchestration orchestration;

    [[nodiscard]] nlohmann::json to_json() const;
    static AgentSpec from_json(const nlohmann::json& j);
};

/// Fixed minimal prompt of the baseline agent; no project artifacts.
const std::string& baseline_prompt();

AgentSpec baseline_agent();
AgentSpec care_agent(std::string systemPrompt);

/// System prompt of the CARE agent: the sections of the approved
/// prompt_architecture artifact in template order, provenance annotations
/// removed, with `{{context_spec}}` and `{{guardrails_spec}}` slots replaced by
/// the bodies of the approved heads of those kinds.
///
/// Throws gate_not_satisfied (phase 4 gate, or a slot whose artifact has no
/// approved head) and template_violation.
std::string assemble_care_prompt(const ArtifactStore& store, const std::string& projectId);

/// Agent specs are kept next to project artifacts as
/// `<root>/<project>/agents/<name>/v<N>.json`; returns N.
int save_agent_spec(const std::filesystem::path& root, const std::string& projectId, const AgentSpec& spec);
AgentSpec load_agent_spec(const std::filesystem::path& root, const std::string& projectId, const std::string& name,
                          std::optional<int> version = std::nullopt);

struct ParsedAnswer
{
    std::vector<std::string> ids;           // valid concept ids, first appearance order, no duplicates
    std::vector<std::string> invalidTokens; // id-shaped tokens that failed validation
};

/// Extracts concept ids in order of first appearance from free text, lists or
/// fenced blocks. Tokens that contain `-` and only id characters but are not
/// valid concept ids are reported as invalid.
ParsedAnswer parse_final_answer(std::string_view modelText);

struct TraceStep
{
    int turn = 0;
    std::string modelTurnDigest;
    nlohmann::json toolCall;      // null for the final turn
    std::string toolResultDigest; // empty when no tool ran
    std::string note;

    [[nodiscard]] nlohmann::json to_json() const;
};

struct RetrievalResult
{
    std::string queryId;
    std::string agentName;
    std::vector<std::string> rankedIds;
    std::vector<TraceStep> trace;
    std::vector<std::string> notes;
    bool partial = false;
    int toolCalls = 0;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Everything that must be equal for two agents to have "identical model and
/// tool access". The system prompt and agent name are deliberately excluded.
struct RunConfig
{
    std::string transportIdentity;
    std::string toolBackendIdentity;
    nlohmann::json toolSchemas;
    int k = 5;
    nlohmann::json orchestration;

    [[nodiscard]] nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    [[nodiscard]] std::string hash() const;
};

RunConfig run_config(const AgentSpec& agent, const ModelTransport& transport, const cmr::CollectionSearch& cmr, int k);

/// Throws fairness_violation naming the differing fields.
void check_fairness(const RunConfig& care, const RunConfig& baseline);

/// Runs the agent loop for one query. Throws invalid_argument (bad k or
/// empty query), transport_failure, and tool_failure when a tool keeps failing
/// and the orchestration says `fail`.
RetrievalResult run_query(const AgentSpec& agent, const std::string& queryId, const std::string& query, int k,
                          ModelTransport& transport, const cmr::CollectionSearch& cmr);

/// Writes `runs/<run_id>/<query_id>.jsonl` under `root`: one line per trace
/// step, then a result line.
std::filesystem::path write_trace(const std::filesystem::path& root, const std::string& runId,
                                  const RetrievalResult& result);

/// Wire format of tool calls inside model text.
std::vector<nlohmann::json> parse_tool_calls(std::string_view modelText);

} // namespace care::agent
