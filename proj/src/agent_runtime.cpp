// SPDX-License-Identifier: Apache-2.0
#include <care/agent_runtime.hpp>
#include <care/digest.hpp>
#include <care/error.hpp>
#include <care/phase_engine.hpp>
#include <care/templates.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

namespace care::agent
{

using nlohmann::json;

// ---------------------------------------------------------------------------
// specs

json ToolSchema::to_json() const
{
    json params = json::array();
    for (const auto& p: parameters)
        params.push_back({ { "name", p.name },
                           { "type", p.semanticType },
                           { "description", p.description },
                           { "required", p.required } });
    return { { "name", toolName }, { "description", description }, { "parameters", params } };
}

ToolSchema ToolSchema::from_json(const json& j)
{
    ToolSchema t { j.at("name").get<std::string>(), j.value("description", ""), {} };
    for (const auto& p: j.at("parameters"))
        t.parameters.push_back({ p.at("name").get<std::string>(), p.value("type", "text"), p.value("description", ""),
                                 p.value("required", false) });
    return t;
}

const ToolSchema& collection_search_tool()
{
    static const ToolSchema tool {
        "search_collections",
        "Search NASA's Common Metadata Repository for dataset collections. Returns ranked collection records "
        "with concept ids.",
        {
            { "keyword", "text", "free-text keywords matched against collection metadata", true },
            { "provider", "text", "data provider id, e.g. PODAAC or ORNL_DAAC", false },
            { "temporal", "date range", "\"start,end\" in ISO 8601", false },
            { "page_size", "integer", "number of records to return (1-2000)", false },
        },
    };
    return tool;
}

json Orchestration::to_json() const
{
    return { { "max_tool_calls", maxToolCalls },
             { "retries_per_call", retriesPerCall },
             { "on_exhaustion", onExhaustion == OnExhaustion::fail ? "fail" : "return_partial" } };
}

Orchestration Orchestration::from_json(const json& j)
{
    Orchestration o;
    o.maxToolCalls = j.value("max_tool_calls", o.maxToolCalls);
    o.retriesPerCall = j.value("retries_per_call", o.retriesPerCall);
    o.onExhaustion = j.value("on_exhaustion", "return_partial") == "fail" ? OnExhaustion::fail
                                                                           : OnExhaustion::return_partial;
    return o;
}

json AgentSpec::to_json() const
{
    json tools = json::array();
    for (const auto& t: toolSchemas)
        tools.push_back(t.to_json());
    return { { "name", name },
             { "system_prompt", systemPrompt },
             { "tool_schemas", tools },
             { "orchestration", orchestration.to_json() },
             { "output_contract", "ranked concept-ID list" } };
}

AgentSpec AgentSpec::from_json(const json& j)
{
    AgentSpec a;
    a.name = j.at("name").get<std::string>();
    a.systemPrompt = j.at("system_prompt").get<std::string>();
    for (const auto& t: j.at("tool_schemas"))
        a.toolSchemas.push_back(ToolSchema::from_json(t));
    a.orchestration = Orchestration::from_json(j.value("orchestration", json::object()));
    return a;
}

const std::string& baseline_prompt()
{
    static const std::string prompt =
        "You are a dataset search assistant for NASA Earth science data.\n"
        "Use the search_collections tool to find collections that match the user's request.\n"
        "Answer with a ranked list of CMR collection concept IDs, most relevant first.\n";
    return prompt;
}

AgentSpec baseline_agent()
{
    return { std::string(kBaselineAgentName), baseline_prompt(), { collection_search_tool() }, {} };
}

AgentSpec care_agent(std::string systemPrompt)
{
    return { std::string(kCareAgentName), std::move(systemPrompt), { collection_search_tool() }, {} };
}

// ---------------------------------------------------------------------------
// CARE prompt assembly

namespace
{

std::string strip_annotations(std::string_view body)
{
    std::string out;
    std::size_t pos = 0;
    while (pos < body.size())
    {
        auto end = body.find('\n', pos);
        auto const line = body.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        std::string stripped;
        if (parse_provenance_annotation(line, &stripped))
            out += stripped;
        else
            out += line;
        if (end == std::string_view::npos)
            break;
        out += '\n';
        pos = end + 1;
    }
    return out;
}

std::string trim(std::string text)
{
    auto const first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos)
        return {};
    auto const last = text.find_last_not_of(" \t\r\n");
    return text.substr(first, last - first + 1);
}

/// Body of an artifact without its `# ` title line.
std::string artifact_body(const std::string& content)
{
    std::string out;
    bool titleSkipped = false;
    std::size_t pos = 0;
    while (pos < content.size())
    {
        auto end = content.find('\n', pos);
        auto line = content.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        if (!titleSkipped && line.starts_with("# "))
            titleSkipped = true;
        else
            out += line + "\n";
        if (end == std::string::npos)
            break;
        pos = end + 1;
    }
    return trim(strip_annotations(out));
}

const VersionRecord* approved_head(const Project& project, ArtifactKind kind)
{
    auto const records = project.artifacts_of(kind);
    if (records.empty() || records.back()->head().status() != ArtifactStatus::approved)
        return nullptr;
    return &records.back()->head();
}

} // namespace

std::string assemble_care_prompt(const ArtifactStore& store, const std::string& projectId)
{
    std::string prompt;
    store.read(projectId, [&](const Project& project) {
        auto const gate = evaluate_gate(project, PhaseId::P4_prompt);
        if (!gate.satisfied)
            throw Error(ErrorCode::gate_not_satisfied, "phase 4 gate is not satisfied", to_json(gate));

        const auto* head = approved_head(project, ArtifactKind::prompt_architecture);
        auto const content = head->content;
        if (auto const missing = missing_sections(ArtifactKind::prompt_architecture, content); !missing.empty())
            throw Error(ErrorCode::template_violation, "prompt architecture is missing sections",
                        { { "missing_sections", missing } });

        auto const sections = split_sections(content);
        for (const auto& heading: template_sections(ArtifactKind::prompt_architecture))
        {
            auto body = trim(strip_annotations(sections.at(heading)));
            prompt += "## " + heading + "\n";
            if (!body.empty())
                prompt += body + "\n";
            prompt += "\n";
        }

        for (auto const kind: { ArtifactKind::context_spec, ArtifactKind::guardrails_spec })
        {
            auto const slot = "{{" + std::string(to_string(kind)) + "}}";
            if (prompt.find(slot) == std::string::npos)
                continue;
            const auto* source = approved_head(project, kind);
            if (!source)
                throw Error(ErrorCode::gate_not_satisfied,
                            "prompt slot " + slot + " needs an approved " + std::string(to_string(kind)),
                            { { "missing", json::array({ { { "kind", to_string(kind) }, { "reason", "not_approved" } } }) } });
            auto const body = artifact_body(source->content);
            for (auto at = prompt.find(slot); at != std::string::npos; at = prompt.find(slot, at + body.size()))
                prompt.replace(at, slot.size(), body);
        }
    });
    while (prompt.ends_with("\n\n"))
        prompt.pop_back();
    return prompt;
}

// ---------------------------------------------------------------------------
// spec persistence

int save_agent_spec(const std::filesystem::path& root, const std::string& projectId, const AgentSpec& spec)
{
    auto const dir = root / projectId / "agents" / spec.name;
    std::filesystem::create_directories(dir);
    int version = 1;
    while (std::filesystem::exists(dir / ("v" + std::to_string(version) + ".json")))
        ++version;
    std::ofstream out(dir / ("v" + std::to_string(version) + ".json"), std::ios::binary);
    out << spec.to_json().dump(2) << '\n';
    if (!out)
        throw Error(ErrorCode::io_error, "cannot write agent spec " + spec.name);
    return version;
}

AgentSpec load_agent_spec(const std::filesystem::path& root, const std::string& projectId, const std::string& name,
                          std::optional<int> version)
{
    auto const dir = root / projectId / "agents" / name;
    if (!version)
    {
        int v = 0;
        while (std::filesystem::exists(dir / ("v" + std::to_string(v + 1) + ".json")))
            ++v;
        if (v == 0)
            throw Error(ErrorCode::not_found, "no agent spec " + name + " in project " + projectId);
        version = v;
    }
    std::ifstream in(dir / ("v" + std::to_string(*version) + ".json"));
    if (!in)
        throw Error(ErrorCode::not_found, "no agent spec " + name + " v" + std::to_string(*version));
    return AgentSpec::from_json(json::parse(in));
}

// ---------------------------------------------------------------------------
// answer parsing

ParsedAnswer parse_final_answer(std::string_view modelText)
{
    ParsedAnswer out;
    std::set<std::string> seen;
    auto is_token_char = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    };
    std::size_t i = 0;
    while (i < modelText.size())
    {
        if (!is_token_char(modelText[i]))
        {
            ++i;
            continue;
        }
        auto const start = i;
        while (i < modelText.size() && is_token_char(modelText[i]))
            ++i;
        auto token = std::string(modelText.substr(start, i - start));
        while (!token.empty() && (token.back() == '-' || token.back() == '_'))
            token.pop_back();
        if (token.empty())
            continue;
        if (cmr::validate_concept_id(token))
        {
            if (seen.insert(token).second)
                out.ids.push_back(token);
        }
        else if (token.find('-') != std::string::npos && std::isalpha(static_cast<unsigned char>(token[0])))
            out.invalidTokens.push_back(token);
    }
    return out;
}

std::vector<json> parse_tool_calls(std::string_view modelText)
{
    static constexpr std::string_view open = "<tool_call>";
    static constexpr std::string_view close = "</tool_call>";
    std::vector<json> calls;
    for (auto at = modelText.find(open); at != std::string_view::npos; at = modelText.find(open, at + 1))
    {
        auto const end = modelText.find(close, at);
        if (end == std::string_view::npos)
            break;
        auto const body = modelText.substr(at + open.size(), end - at - open.size());
        auto parsed = json::parse(body, nullptr, false);
        calls.push_back(parsed.is_discarded() ? json { { "_malformed", std::string(body) } } : std::move(parsed));
    }
    return calls;
}

// ---------------------------------------------------------------------------
// fairness

json RunConfig::to_json() const
{
    return { { "transport", transportIdentity },
             { "tool_backend", toolBackendIdentity },
             { "tool_schemas", toolSchemas },
             { "k", k },
             { "orchestration", orchestration } };
}

RunConfig RunConfig::from_json(const json& j)
{
    return { j.at("transport").get<std::string>(), j.at("tool_backend").get<std::string>(), j.at("tool_schemas"),
             j.at("k").get<int>(), j.at("orchestration") };
}

std::string RunConfig::hash() const
{
    return sha256_hex(to_json().dump());
}

RunConfig run_config(const AgentSpec& agent, const ModelTransport& transport, const cmr::CollectionSearch& cmr, int k)
{
    json tools = json::array();
    for (const auto& t: agent.toolSchemas)
        tools.push_back(t.to_json());
    return { transport.identity(), cmr.identity(), tools, k, agent.orchestration.to_json() };
}

void check_fairness(const RunConfig& care, const RunConfig& baseline)
{
    auto const a = care.to_json();
    auto const b = baseline.to_json();
    json differing = json::array();
    for (const auto& [key, value]: a.items())
        if (b.at(key) != value)
            differing.push_back(key);
    if (!differing.empty())
        throw Error(ErrorCode::fairness_violation, "agents do not share identical model and tool access",
                    { { "differing", differing }, { "care", a }, { "baseline", b } });
}

// ---------------------------------------------------------------------------
// agent loop

namespace
{

std::string tool_instructions(const std::vector<ToolSchema>& tools)
{
    json schemas = json::array();
    for (const auto& t: tools)
        schemas.push_back(t.to_json());
    return "Available tools (JSON schema):\n" + schemas.dump(2)
           + "\nTo call a tool, reply with <tool_call>{\"name\": \"<tool>\", \"arguments\": {...}}</tool_call>. "
             "Tool results arrive as the next message. When you are done, reply with your final answer and no tool "
             "call.\n";
}

cmr::CollectionQuery query_from_arguments(const json& arguments)
{
    if (!arguments.is_object())
        throw Error(ErrorCode::invalid_query, "tool arguments must be an object");
    auto q = cmr::CollectionQuery::from_json(arguments);
    q.validate();
    return q;
}

json records_json(const std::vector<cmr::CollectionRecord>& records)
{
    json out = json::array();
    for (const auto& r: records)
        out.push_back({ { "concept_id", r.conceptId },
                        { "short_name", r.shortName },
                        { "title", r.title },
                        { "provider", r.provider } });
    return out;
}

} // namespace

json TraceStep::to_json() const
{
    json j = { { "turn", turn }, { "model_turn_digest", modelTurnDigest }, { "tool_call", toolCall } };
    j["tool_result_digest"] = toolResultDigest.empty() ? json(nullptr) : json(toolResultDigest);
    if (!note.empty())
        j["note"] = note;
    return j;
}

json RetrievalResult::to_json() const
{
    json steps = json::array();
    for (const auto& s: trace)
        steps.push_back(s.to_json());
    return { { "query_id", queryId }, { "agent_name", agentName }, { "ranked_ids", rankedIds },
             { "partial", partial },  { "tool_calls", toolCalls }, { "notes", notes },
             { "trace", steps } };
}

RetrievalResult run_query(const AgentSpec& agent, const std::string& queryId, const std::string& query, int k,
                          ModelTransport& transport, const cmr::CollectionSearch& cmr)
{
    if (k < 1)
        throw Error(ErrorCode::invalid_argument, "k must be >= 1", { { "k", k } });
    if (query.find_first_not_of(" \t\r\n") == std::string::npos)
        throw Error(ErrorCode::invalid_argument, "query is empty");

    RetrievalResult result;
    result.queryId = queryId;
    result.agentName = agent.name;

    ModelRequest request;
    request.systemText = agent.systemPrompt + "\n\n" + tool_instructions(agent.toolSchemas);
    request.messages.push_back({ "user", query });

    std::vector<std::string> gathered; // ids seen in successful tool results, for partial answers
    auto const& orchestration = agent.orchestration;
    std::string finalText;
    bool exhausted = false;

    for (int turn = 0; !exhausted; ++turn)
    {
        auto const text = transport.complete(request);
        request.messages.push_back({ "assistant", text });
        auto const calls = parse_tool_calls(text);
        if (calls.empty())
        {
            result.trace.push_back({ turn, sha256_hex(text), nullptr, {}, {} });
            finalText = text;
            break;
        }

        for (const auto& call: calls)
        {
            TraceStep step { turn, sha256_hex(text), call, {}, {} };
            if (result.toolCalls >= orchestration.maxToolCalls)
            {
                step.note = "tool call budget exhausted";
                result.trace.push_back(std::move(step));
                exhausted = true;
                break;
            }
            ++result.toolCalls;

            json toolMessage;
            auto const name = call.value("name", "");
            if (call.contains("_malformed") || name != "search_collections")
                toolMessage = { { "name", name }, { "error", "unknown tool or malformed call" } };
            else
            {
                std::optional<cmr::CollectionQuery> q;
                try
                {
                    q = query_from_arguments(call.value("arguments", json::object()));
                }
                catch (const Error& e)
                {
                    toolMessage = { { "name", name }, { "error", e.what() } };
                }
                if (q)
                {
                    std::string lastError;
                    for (int attempt = 0; attempt <= orchestration.retriesPerCall && toolMessage.is_null(); ++attempt)
                    {
                        try
                        {
                            auto const records = cmr.search(*q);
                            for (const auto& r: records)
                                if (std::ranges::find(gathered, r.conceptId) == gathered.end())
                                    gathered.push_back(r.conceptId);
                            toolMessage = { { "name", name }, { "results", records_json(records) } };
                        }
                        catch (const std::exception& e)
                        {
                            lastError = e.what();
                        }
                    }
                    if (toolMessage.is_null())
                    {
                        step.note = "tool failed after " + std::to_string(orchestration.retriesPerCall + 1)
                                    + " attempts: " + lastError;
                        result.trace.push_back(std::move(step));
                        if (orchestration.onExhaustion == OnExhaustion::fail)
                            throw Error(ErrorCode::tool_failure, result.trace.back().note,
                                        { { "query_id", queryId }, { "agent", agent.name } });
                        exhausted = true;
                        break;
                    }
                }
            }
            auto const toolText = toolMessage.dump();
            step.toolResultDigest = sha256_hex(toolText);
            result.trace.push_back(std::move(step));
            request.messages.push_back({ "tool", toolText });
        }
    }

    std::vector<std::string> ids;
    if (exhausted)
    {
        if (orchestration.onExhaustion == OnExhaustion::fail)
            throw Error(ErrorCode::tool_failure, "tool call budget exhausted",
                        { { "query_id", queryId }, { "agent", agent.name } });
        result.partial = true;
        result.notes.push_back(result.trace.back().note);
        ids = gathered;
    }
    else
    {
        auto parsed = parse_final_answer(finalText);
        for (const auto& token: parsed.invalidTokens)
            result.notes.push_back("dropped invalid concept id: " + token);
        if (!parsed.invalidTokens.empty())
            result.trace.back().note = "dropped " + std::to_string(parsed.invalidTokens.size()) + " invalid token(s)";
        ids = std::move(parsed.ids);
    }
    if (ids.size() > static_cast<std::size_t>(k))
        ids.resize(static_cast<std::size_t>(k));
    result.rankedIds = std::move(ids);
    return result;
}

std::filesystem::path write_trace(const std::filesystem::path& root, const std::string& runId,
                                  const RetrievalResult& result)
{
    auto const dir = root / "runs" / runId;
    std::filesystem::create_directories(dir);
    auto const path = dir / (result.queryId + ".jsonl");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& step: result.trace)
        out << step.to_json().dump() << '\n';
    out << json { { "query_id", result.queryId },
                  { "agent_name", result.agentName },
                  { "ranked_ids", result.rankedIds },
                  { "partial", result.partial },
                  { "notes", result.notes } }
               .dump()
        << '\n';
    if (!out)
        throw Error(ErrorCode::io_error, "cannot write trace " + path.string());
    return path;
}

} // namespace care::agent
