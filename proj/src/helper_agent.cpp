// SPDX-License-Identifier: Apache-2.0
#include <care/error.hpp>
#include <care/helper_agent.hpp>
#include <care/unified_diff.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

namespace care
{

using nlohmann::json;

// ---------------------------------------------------------------------------
// prompt modules

std::string PromptModule::system_text() const
{
    return "module: " + name + "@v" + std::to_string(version) + "\n\n" + text;
}

const std::vector<PromptModule>& helper_prompt_modules()
{
    static const std::vector<PromptModule> modules {
        { "generate_questions", 1,
          "You facilitate requirements elicitation for an AI agent project.\n"
          "Ask short, concrete clarification questions for the listed dimensions only.\n"
          "Write one question per line as `[dimension_id] question`.\n"
          "Do not answer the questions and do not invent requirements.\n" },
        { "summarize_intent", 1,
          "Summarize what the experts said, without adding anything they did not say.\n"
          "Write one Markdown bullet per point and end every bullet with the transcript entry ids it\n"
          "rests on, e.g. `- Only public collections are in scope [e-0002]`.\n" },
        { "draft_artifact", 1,
          "Draft the requested Markdown artifact using exactly the given template headings.\n"
          "Every bullet must end with the transcript entry ids or `art:<id>` references it is based on.\n"
          "Leave a section empty rather than guessing. Return only the Markdown document.\n" },
        { "revise_artifact", 1,
          "Revise the artifact to address the reviewer feedback. Change as little as possible,\n"
          "keep the template headings and provenance annotations, and return the full revised document.\n" },
        { "draft_query", 1,
          "Write one natural-language data request a scientist reading this document might send to a\n"
          "dataset search assistant, grounded in the document. Return only the request.\n" },
        { "reformulate_query", 1,
          "The previous request did not retrieve the intended dataset. Rewrite it, staying grounded in\n"
          "the document. Return only the new request.\n" },
    };
    return modules;
}

const PromptModule& helper_prompt_module(std::string_view name)
{
    for (const auto& m: helper_prompt_modules())
        if (m.name == name)
            return m;
    throw Error(ErrorCode::not_found, "no prompt module " + std::string(name));
}

void export_prompt_modules(const std::filesystem::path& root)
{
    for (const auto& m: helper_prompt_modules())
    {
        auto const dir = root / "_helper_prompts" / m.name;
        std::filesystem::create_directories(dir);
        std::ofstream out(dir / ("v" + std::to_string(m.version) + ".md"), std::ios::binary | std::ios::trunc);
        out << m.system_text();
    }
}

json task_payload(const ModelRequest& request)
{
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it)
    {
        if (it->role != "user")
            continue;
        auto const open = it->text.find("```json\n");
        if (open == std::string::npos)
            continue;
        auto const close = it->text.find("\n```", open + 8);
        if (close == std::string::npos)
            continue;
        return json::parse(it->text.substr(open + 8, close - open - 8), nullptr, false);
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// pure helpers

std::string_view to_string(ViolationKind kind)
{
    return kind == ViolationKind::introduced_requirement ? "introduced_requirement" : "omitted_constraint";
}

std::string IntentSummary::markdown() const
{
    std::string out;
    for (const auto& b: bullets)
        out += "- " + b.text + " " + format_provenance(b.entryIds) + "\n";
    return out;
}

std::vector<FaithfulnessViolation> check_faithfulness(const DraftProposal& draft, const ElicitationSession& session)
{
    std::vector<FaithfulnessViolation> violations;
    std::set<std::string> covered;
    std::set<std::string> const context(draft.contextArtifactIds.begin(), draft.contextArtifactIds.end());

    for (const auto& bullet: parse_bullets(draft.content))
    {
        bool grounded = false;
        for (const auto& ref: bullet.refs)
        {
            if (is_artifact_ref(ref) && context.contains(ref.substr(4)))
                grounded = true;
            else if (const auto* entry = session.find(ref))
            {
                grounded = true;
                if (entry->dimensionId)
                    covered.insert(*entry->dimensionId);
            }
        }
        if (!grounded)
            violations.push_back({ ViolationKind::introduced_requirement, bullet.text, bullet.line });
    }

    for (const auto& d: dimension_checklist(session.phase()))
        if (session.answered_dimensions().contains(d.dimensionId) && !covered.contains(d.dimensionId))
            violations.push_back({ ViolationKind::omitted_constraint, d.dimensionId, 0 });
    return violations;
}

std::string render_context_bundle(const std::vector<Artifact>& artifacts)
{
    std::string out;
    for (const auto& a: artifacts)
    {
        out += "=== BEGIN ARTIFACT kind=" + std::string(to_string(a.kind)) + " phase=" + std::string(to_string(a.phase))
               + " id=" + a.artifactId + " version=" + std::to_string(a.version) + " ===\n";
        out += a.content;
        if (!a.content.ends_with('\n'))
            out += '\n';
        out += "=== END ARTIFACT ===\n";
    }
    return out;
}

std::string assemble_prompt_context(const ArtifactStore& store, const std::string& projectId, PhaseId phase)
{
    return render_context_bundle(store.approved_context(projectId, phase));
}

// ---------------------------------------------------------------------------
// helper agent

namespace
{

json transcript_json(const ElicitationSession& session)
{
    return session.to_json().at("transcript");
}

json context_json(const std::vector<Artifact>& artifacts)
{
    json out = json::array();
    for (const auto& a: artifacts)
        out.push_back({ { "ref", "art:" + a.artifactId }, { "kind", to_string(a.kind) }, { "content", a.content } });
    return out;
}

std::string strip_code_fence(std::string text)
{
    auto const first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos)
        return {};
    if (text.compare(first, 3, "```") == 0)
    {
        auto const bodyStart = text.find('\n', first);
        auto const close = text.rfind("```");
        if (bodyStart != std::string::npos && close > bodyStart)
            text = text.substr(bodyStart + 1, close - bodyStart - 1);
    }
    return text;
}

} // namespace

HelperAgent::HelperAgent(std::shared_ptr<ModelTransport> transport): HelperAgent(std::move(transport), Options {})
{
}

HelperAgent::HelperAgent(std::shared_ptr<ModelTransport> transport, Options options):
    _transport(std::make_shared<RetryingTransport>(std::move(transport), options.retry, options.sleeper)),
    _options(std::move(options))
{
}

std::string HelperAgent::call(const PromptModule& module, const std::string& instructions, const json& payload)
{
    ModelRequest request;
    request.systemText = module.system_text();
    request.messages.push_back({ "user", instructions + "\n\n```json\n" + payload.dump(2) + "\n```\n" });
    request.temperature = _options.temperature;
    request.seed = _options.seed;
    return _transport->complete(request);
}

std::vector<ElicitationQuestion> HelperAgent::generate_questions(PhaseId phase,
                                                                 const std::vector<Artifact>& priorArtifacts,
                                                                 const ElicitationSession& session)
{
    const auto& checklist = dimension_checklist(phase);
    auto const answered = session.answered_dimensions();

    json dimensions = json::array();
    for (const auto& d: checklist)
        if (!answered.contains(d.dimensionId))
            dimensions.push_back({ { "id", d.dimensionId }, { "description", d.description } });
    if (dimensions.empty())
        return {};

    auto const response = call(helper_prompt_module("generate_questions"),
                               "Generate clarification questions for phase " + std::string(to_string(phase)) + ".",
                               { { "task", "generate_questions" },
                                 { "phase", to_string(phase) },
                                 { "dimensions", dimensions },
                                 { "transcript", transcript_json(session) },
                                 { "context_artifacts", context_json(priorArtifacts) } });

    std::map<std::string, std::vector<std::string>> byDimension;
    for (const auto& line: diff::split_lines(response))
    {
        auto t = std::string_view(line);
        while (!t.empty() && (t.front() == ' ' || t.front() == '-' || t.front() == '*'))
            t.remove_prefix(1);
        if (!t.starts_with('['))
            continue;
        auto const close = t.find(']');
        if (close == std::string_view::npos)
            continue;
        auto const id = std::string(t.substr(1, close - 1));
        auto text = std::string(t.substr(close + 1));
        text.erase(0, text.find_first_not_of(' '));
        while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' '))
            text.pop_back();
        if (!text.empty() && find_dimension(phase, id) && !answered.contains(id))
            byDimension[id].push_back(std::move(text));
    }

    std::vector<ElicitationQuestion> out;
    for (const auto& d: checklist)
    {
        if (answered.contains(d.dimensionId))
            continue;
        auto it = byDimension.find(d.dimensionId);
        if (it == byDimension.end() || it->second.empty())
            out.push_back({ d.dimensionId, d.defaultQuestion }); // model skipped it
        else
            for (auto& text: it->second)
                out.push_back({ d.dimensionId, std::move(text) });
    }
    return out;
}

IntentSummary HelperAgent::summarize_intent(const ElicitationSession& session)
{
    auto const response = call(helper_prompt_module("summarize_intent"), "Summarize the expert answers.",
                               { { "task", "summarize_intent" },
                                 { "phase", to_string(session.phase()) },
                                 { "transcript", transcript_json(session) } });

    IntentSummary summary;
    for (const auto& line: diff::split_lines(response))
    {
        auto t = std::string_view(line);
        auto const first = t.find_first_not_of(" \t");
        if (first == std::string_view::npos || (t[first] != '-' && t[first] != '*'))
            continue;
        t.remove_prefix(first + 1);
        std::string text;
        std::vector<std::string> refs;
        if (auto parsed = parse_provenance_annotation(t, &text))
            for (auto& ref: *parsed)
                if (session.find(ref))
                    refs.push_back(std::move(ref));
        if (text.empty())
        {
            text = std::string(t);
            text.erase(0, text.find_first_not_of(' '));
            while (!text.empty() && (text.back() == '\n' || text.back() == ' '))
                text.pop_back();
        }
        if (refs.empty())
            summary.rejected.push_back(std::move(text));
        else
            summary.bullets.push_back({ std::move(text), std::move(refs) });
    }
    return summary;
}

DraftProposal HelperAgent::draft_artifact(ArtifactKind kind, const ElicitationSession& session,
                                          const std::vector<Artifact>& priorArtifacts)
{
    if (!kind_legal_for_phase(kind, session.phase()))
        throw Error(ErrorCode::illegal_kind_for_phase,
                    std::string(to_string(kind)) + " is not produced in phase " + std::string(to_string(session.phase())));

    json sections = json::array();
    for (const auto& d: dimension_checklist(phase_of(kind)))
        sections.push_back({ { "heading", d.heading }, { "dimension_id", d.dimensionId } });

    auto content = strip_code_fence(call(helper_prompt_module("draft_artifact"),
                                         "Draft the " + std::string(to_string(kind)) + " artifact.",
                                         { { "task", "draft_artifact" },
                                           { "kind", to_string(kind) },
                                           { "title", template_title(kind) },
                                           { "sections", sections },
                                           { "transcript", transcript_json(session) },
                                           { "context_artifacts", context_json(priorArtifacts) } }));

    if (auto const missing = missing_sections(kind, content); !missing.empty())
        throw Error(ErrorCode::template_violation, "draft is missing template sections",
                    { { "missing_sections", missing } });

    DraftProposal draft;
    draft.kind = kind;
    draft.content = std::move(content);
    for (const auto& bullet: parse_bullets(draft.content))
        draft.provenance.emplace_back(bullet.text, bullet.refs);
    for (const auto& a: priorArtifacts)
        draft.contextArtifactIds.push_back(a.artifactId);
    return draft;
}

DraftSubmission HelperAgent::submit_draft(ArtifactStore& store, const std::string& projectId,
                                          const DraftProposal& draft, const std::string& rationale)
{
    std::optional<Artifact> existing;
    store.read(projectId, [&](const Project& project) {
        if (auto const same = project.artifacts_of(draft.kind); !same.empty())
            existing = Artifact::from(*same.back());
    });

    DraftSubmission out;
    if (!existing)
    {
        out.created = store.create_artifact(projectId, phase_of(draft.kind), draft.kind, draft.content,
                                            Role::helper_agent);
        return out;
    }
    auto const diffText = diff::make_unified_diff(existing->content, draft.content,
                                                  std::string(to_string(draft.kind)) + ".md");
    if (diffText.empty())
        throw Error(ErrorCode::malformed_diff, "draft is identical to the current head",
                    { { "artifact_id", existing->artifactId }, { "version", existing->version } });
    out.proposal = store.propose_revision(projectId, existing->artifactId, existing->version, diffText, rationale,
                                          Role::helper_agent);
    return out;
}

RevisionProposal HelperAgent::propose_diff(ArtifactStore& store, const Artifact& artifact, const std::string& feedback)
{
    auto revised = strip_code_fence(call(helper_prompt_module("revise_artifact"), "Revise the artifact.",
                                         { { "task", "revise_artifact" },
                                           { "kind", to_string(artifact.kind) },
                                           { "content", artifact.content },
                                           { "feedback", feedback } }));
    if (auto const missing = missing_sections(artifact.kind, revised);
        !missing.empty() && missing_sections(artifact.kind, artifact.content).empty())
        throw Error(ErrorCode::template_violation, "revision drops template sections",
                    { { "missing_sections", missing } });

    auto const diffText = diff::make_unified_diff(artifact.content, revised, std::string(to_string(artifact.kind)) + ".md");
    if (diffText.empty())
        throw Error(ErrorCode::malformed_diff, "model proposed no change");
    return store.propose_revision(artifact.projectId, artifact.artifactId, artifact.version, diffText,
                                  "Addresses feedback: \"" + feedback + "\"", Role::helper_agent);
}

} // namespace care
