// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <care/helper_agent.hpp>
#include <care/offline_model.hpp>
#include <care/unified_diff.hpp>

#include <atomic>
#include <fstream>
#include <sstream>

using namespace care;
using namespace care::testing;

namespace
{

HelperAgent::Options no_sleep()
{
    HelperAgent::Options o;
    o.sleeper = [](std::chrono::milliseconds) {};
    return o;
}

std::shared_ptr<ModelTransport> scripted(std::string response)
{
    return std::make_shared<FunctionTransport>("scripted", [response](const ModelRequest&) { return response; });
}

std::shared_ptr<ModelTransport> offline()
{
    return std::make_shared<OfflineModel>();
}

/// Session in which every dimension of `phase` got one question and, for the
/// dimensions in `answered`, one answer.
ElicitationSession session_for(PhaseId phase, const std::set<std::string>& answered)
{
    ElicitationSession s("s-1", "proj", phase);
    for (const auto& d: dimension_checklist(phase))
    {
        auto const q = s.add_question(d.dimensionId, d.defaultQuestion).entryId;
        if (answered.contains(d.dimensionId))
            s.add_answer(q, "Answer about " + d.dimensionId, Role::sme);
    }
    return s;
}

std::set<std::string> every_dimension(PhaseId phase)
{
    std::set<std::string> out;
    for (const auto& d: dimension_checklist(phase))
        out.insert(d.dimensionId);
    return out;
}

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(Elicitation, ChecklistsAreNonEmptyAndUnique)
{
    for (auto phase: allPhases)
    {
        const auto& list = dimension_checklist(phase);
        ASSERT_FALSE(list.empty()) << to_string(phase);
        std::set<std::string> ids;
        for (const auto& d: list)
        {
            EXPECT_TRUE(ids.insert(d.dimensionId).second);
            EXPECT_EQ(d.phase, phase);
            EXPECT_FALSE(d.defaultQuestion.empty());
        }
    }
}

TEST(Elicitation, AnswersInheritDimensionAndRoundTrip)
{
    ElicitationSession s("s-1", "proj", PhaseId::P1_scope);
    auto const q = s.add_question("tasks", "Which tasks?").entryId;
    EXPECT_EQ(q, "e-0001");
    auto const a = s.add_answer(q, "Find sea ice datasets", Role::sme);
    EXPECT_EQ(a.entryId, "e-0002");
    EXPECT_EQ(a.dimensionId, "tasks");
    EXPECT_EQ(s.answered_dimensions(), std::set<std::string> { "tasks" });
    EXPECT_TRUE(s.open_questions().empty());
    EXPECT_EQ(code_of([&] { s.add_question("not_a_dimension", "?"); }), ErrorCode::invalid_argument);
    EXPECT_EQ(code_of([&] { s.add_answer("e-0099", "x", Role::sme); }), ErrorCode::not_found);
    EXPECT_EQ(code_of([&] { s.add_answer("e-0002", "x", Role::sme); }), ErrorCode::invalid_argument);

    TempDir dir;
    save_session(dir.path(), s);
    auto const loaded = load_session(dir.path(), "proj", "s-1");
    EXPECT_EQ(loaded.to_json(), s.to_json());
    EXPECT_EQ(list_sessions(dir.path(), "proj"), std::vector<std::string> { "s-1" });
}

TEST(HelperQuestions, CoverEveryUnansweredDimensionInEveryPhase)
{
    // A model that ignores the checklist entirely still yields full coverage.
    for (const auto& transport: { scripted("I have no questions."), offline() })
    {
        HelperAgent helper(transport, no_sleep());
        for (auto phase: allPhases)
        {
            auto const all = every_dimension(phase);
            for (std::size_t skip = 0; skip <= all.size(); ++skip)
            {
                std::set<std::string> answered;
                std::size_t i = 0;
                for (const auto& id: all)
                    if (i++ < skip)
                        answered.insert(id);
                auto const session = session_for(phase, answered);
                auto const questions = helper.generate_questions(phase, {}, session);
                std::set<std::string> asked;
                for (const auto& q: questions)
                {
                    EXPECT_FALSE(answered.contains(q.dimensionId));
                    EXPECT_FALSE(q.text.empty());
                    asked.insert(q.dimensionId);
                }
                std::set<std::string> expected;
                std::ranges::set_difference(all, answered, std::inserter(expected, expected.end()));
                EXPECT_EQ(asked, expected) << to_string(phase) << " skip=" << skip;
            }
        }
    }
}

TEST(HelperQuestions, KeepsModelQuestionsAndFallsBackPerDimension)
{
    HelperAgent helper(scripted("[tasks] What should the agent search for?\n"
                                "[made_up] Ignored?\n"
                                "- [pain_points] What is slow today?\n"),
                       no_sleep());
    ElicitationSession const session("s", "p", PhaseId::P1_scope);
    auto const questions = helper.generate_questions(PhaseId::P1_scope, {}, session);
    ASSERT_EQ(questions.size(), dimension_checklist(PhaseId::P1_scope).size());
    EXPECT_EQ(questions[1], (ElicitationQuestion { "tasks", "What should the agent search for?" }));
    EXPECT_EQ(questions[3], (ElicitationQuestion { "pain_points", "What is slow today?" }));
    EXPECT_EQ(questions[0].text, dimension_checklist(PhaseId::P1_scope)[0].defaultQuestion);
}

TEST(HelperQuestions, RequestIsDeterministic)
{
    std::vector<std::string> hashes;
    auto transport = std::make_shared<FunctionTransport>("capture", [&](const ModelRequest& r) {
        hashes.push_back(r.hash());
        EXPECT_EQ(r.temperature, 0.0);
        EXPECT_EQ(r.seed, 0);
        EXPECT_TRUE(r.systemText.starts_with("module: generate_questions@v1"));
        return std::string();
    });
    HelperAgent helper(transport, no_sleep());
    auto const session = session_for(PhaseId::P2_2_context, {});
    helper.generate_questions(PhaseId::P2_2_context, {}, session);
    helper.generate_questions(PhaseId::P2_2_context, {}, session);
    ASSERT_EQ(hashes.size(), 2u);
    EXPECT_EQ(hashes[0], hashes[1]);
}

TEST(HelperSummary, RejectsBulletsWithoutResolvableProvenance)
{
    auto const session = session_for(PhaseId::P1_scope, { "tasks" });
    HelperAgent helper(scripted("Summary:\n"
                                "- Find sea ice data [e-0003]\n"
                                "- Invented requirement\n"
                                "- Bogus reference [e-0999]\n"),
                       no_sleep());
    auto const summary = helper.summarize_intent(session);
    ASSERT_EQ(summary.bullets.size(), 1u);
    EXPECT_EQ(summary.bullets[0].text, "Find sea ice data");
    EXPECT_EQ(summary.bullets[0].entryIds, std::vector<std::string> { "e-0003" });
    EXPECT_EQ(summary.rejected, (std::vector<std::string> { "Invented requirement", "Bogus reference" }));
    EXPECT_EQ(summary.markdown(), "- Find sea ice data [e-0003]\n");
}

TEST(HelperDraft, OfflineDraftFollowsTemplateAndIsFaithful)
{
    for (auto kind: allArtifactKinds)
    {
        auto const phase = phase_of(kind);
        auto const session = session_for(phase, every_dimension(phase));
        HelperAgent helper(offline(), no_sleep());
        auto const draft = helper.draft_artifact(kind, session, {});
        EXPECT_TRUE(missing_sections(kind, draft.content).empty());
        EXPECT_TRUE(check_faithfulness(draft, session).empty()) << to_string(kind);
        EXPECT_EQ(draft.provenance.size(), dimension_checklist(phase).size());
    }
}

TEST(HelperDraft, MissingSectionIsTemplateViolation)
{
    auto const session = session_for(PhaseId::P1_scope, {});
    HelperAgent helper(scripted("# Scope Specification\n\n## Tasks\n- something [e-0001]\n"), no_sleep());
    try
    {
        helper.draft_artifact(ArtifactKind::scope_spec, session, {});
        FAIL();
    }
    catch (const Error& e)
    {
        EXPECT_EQ(e.code(), ErrorCode::template_violation);
        EXPECT_EQ(e.details().at("missing_sections").size(), template_sections(ArtifactKind::scope_spec).size() - 1);
    }
}

TEST(HelperDraft, KindMustBelongToSessionPhase)
{
    auto const session = session_for(PhaseId::P1_scope, {});
    HelperAgent helper(offline(), no_sleep());
    EXPECT_EQ(code_of([&] { helper.draft_artifact(ArtifactKind::tools_spec, session, {}); }),
              ErrorCode::illegal_kind_for_phase);
}

TEST(Faithfulness, FlagsIntroducedRequirements)
{
    auto const session = session_for(PhaseId::P1_scope, { "tasks" }); // answer is e-0003
    DraftProposal draft;
    draft.kind = ArtifactKind::scope_spec;
    draft.contextArtifactIds = { "01JAAAAAAAAAAAAAAAAAAAAAAA" };
    draft.content = "# Scope Specification\n\n## Tasks\n"
                    "- Find sea ice data [e-0003]\n"                 // line 4, grounded
                    "- Also export to shapefile\n"                   // line 5, no provenance
                    "- Use the vendor API [e-0042]\n"                // line 6, unknown entry
                    "- Carry over scope [art:01JAAAAAAAAAAAAAAAAAAAAAAA]\n" // line 7, grounded in context
                    "- Borrowed [art:01JBBBBBBBBBBBBBBBBBBBBBBB]\n"; // line 8, not offered as context
    auto const v = check_faithfulness(draft, session);
    std::vector<FaithfulnessViolation> const expected {
        { ViolationKind::introduced_requirement, "Also export to shapefile", 5 },
        { ViolationKind::introduced_requirement, "Use the vendor API", 6 },
        { ViolationKind::introduced_requirement, "Borrowed", 8 },
    };
    EXPECT_EQ(v, expected);
}

TEST(Faithfulness, FlagsOmittedConstraints)
{
    auto const session = session_for(PhaseId::P1_scope, { "tasks", "pain_points" });
    // tasks: q e-0002 / a e-0003; pain_points: q e-0005 / a e-0006
    DraftProposal draft;
    draft.kind = ArtifactKind::scope_spec;
    draft.content = "# Scope Specification\n\n## Tasks\n- Find sea ice data [e-0003]\n";
    auto const v = check_faithfulness(draft, session);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, ViolationKind::omitted_constraint);
    EXPECT_EQ(v[0].subject, "pain_points");

    // Citing the question entry of a dimension also counts as covering it.
    draft.content += "- Slow manual search [e-0005]\n";
    EXPECT_TRUE(check_faithfulness(draft, session).empty());
}

TEST(HelperSubmit, FirstDraftCreatesThenRevises)
{
    ArtifactStore store(memory_options());
    store.create_project("proj");
    auto session = session_for(PhaseId::P1_scope, { "tasks" });
    HelperAgent helper(offline(), no_sleep());

    auto const first = helper.submit_draft(store, "proj", helper.draft_artifact(ArtifactKind::scope_spec, session, {}),
                                           "initial draft");
    ASSERT_TRUE(first.created);
    EXPECT_EQ(first.created->version, 1);
    EXPECT_EQ(first.created->authoredBy, Role::helper_agent);

    session.add_answer("e-0001", "Data managers at a DAAC", Role::sme);
    auto const draft = helper.draft_artifact(ArtifactKind::scope_spec, session, {});
    auto const second = helper.submit_draft(store, "proj", draft, "new answers");
    ASSERT_TRUE(second.proposal);
    EXPECT_EQ(second.proposal->baseVersion, 1);
    auto const applied = store.apply_revision("proj", second.proposal->proposalId, true);
    EXPECT_EQ(applied.content, draft.content);

    EXPECT_EQ(code_of([&] { helper.submit_draft(store, "proj", draft, "again"); }), ErrorCode::malformed_diff);
}

TEST(HelperRevise, DiffAppliesAndQuotesFeedback)
{
    ArtifactStore store(memory_options());
    store.create_project("proj");
    auto const session = session_for(PhaseId::P1_scope, every_dimension(PhaseId::P1_scope));
    HelperAgent helper(offline(), no_sleep());
    auto const created = *helper.submit_draft(store, "proj",
                                              helper.draft_artifact(ArtifactKind::scope_spec, session, {}), "draft")
                              .created;
    auto const proposal = helper.propose_diff(store, created, "Mention the Arctic focus");
    EXPECT_NE(proposal.rationale.find("\"Mention the Arctic focus\""), std::string::npos);
    auto const applied = diff::apply_unified_diff(created.content, proposal.diff);
    EXPECT_TRUE(applied.ends_with("- Mention the Arctic focus\n"));
    EXPECT_EQ(store.apply_revision("proj", proposal.proposalId, true).content, applied);
}

TEST(PromptContext, OrderedByPhaseThenIdAndByteStable)
{
    ArtifactStore store(memory_options());
    store.create_project("proj");
    auto const tools = store.create_artifact("proj", PhaseId::P2_1_tools, ArtifactKind::tools_spec, "tools\n", Role::developer);
    auto const scope = store.create_artifact("proj", PhaseId::P1_scope, ArtifactKind::scope_spec, "scope\n", Role::sme);
    auto const draft = store.create_artifact("proj", PhaseId::P2_2_context, ArtifactKind::context_spec, "ctx\n", Role::sme);
    approve_both(store, "proj", tools);
    approve_both(store, "proj", scope);
    (void)draft; // never approved: excluded

    auto const text = assemble_prompt_context(store, "proj", PhaseId::P4_prompt);
    auto const expected = "=== BEGIN ARTIFACT kind=scope_spec phase=P1_scope id=" + scope.artifactId
                          + " version=1 ===\nscope\n=== END ARTIFACT ===\n"
                            "=== BEGIN ARTIFACT kind=tools_spec phase=P2_1_tools id="
                          + tools.artifactId + " version=1 ===\ntools\n=== END ARTIFACT ===\n";
    EXPECT_EQ(text, expected);
    EXPECT_EQ(assemble_prompt_context(store, "proj", PhaseId::P4_prompt), text);
    EXPECT_EQ(assemble_prompt_context(store, "proj", PhaseId::P1_scope).find("tools_spec"), std::string::npos);
}

TEST(PromptModules, ExportedAsVersionedFiles)
{
    TempDir dir;
    export_prompt_modules(dir.path());
    for (const auto& m: helper_prompt_modules())
    {
        auto const path = dir.path() / "_helper_prompts" / m.name / ("v" + std::to_string(m.version) + ".md");
        ASSERT_TRUE(std::filesystem::exists(path)) << path;
        EXPECT_EQ(read_file(path), m.system_text());
    }
}

TEST(Templates, ShippedFilesMatchSkeletons)
{
    for (auto kind: allArtifactKinds)
    {
        auto const path = std::filesystem::path(CARE_SOURCE_DIR) / "templates" / (std::string(to_string(kind)) + ".md");
        EXPECT_EQ(read_file(path), template_skeleton(kind)) << path;
        EXPECT_TRUE(missing_sections(kind, template_skeleton(kind)).empty());
    }
}

TEST(Templates, ProvenanceAnnotations)
{
    std::string stripped;
    auto refs = parse_provenance_annotation("- Use CMR [e-0001, art:01JAAAAAAAAAAAAAAAAAAAAAAA]", &stripped);
    ASSERT_TRUE(refs);
    EXPECT_EQ(*refs, (std::vector<std::string> { "e-0001", "art:01JAAAAAAAAAAAAAAAAAAAAAAA" }));
    EXPECT_EQ(stripped, "- Use CMR");
    EXPECT_FALSE(parse_provenance_annotation("- plain text"));
    EXPECT_FALSE(parse_provenance_annotation("- see [the docs]"));
    EXPECT_TRUE(is_entry_ref("e-0001"));
    EXPECT_FALSE(is_entry_ref("e-01"));
    EXPECT_FALSE(is_artifact_ref("art:123"));
    EXPECT_EQ(format_provenance({ "e-0001", "e-0002" }), "[e-0001, e-0002]");
}

TEST(Transport, CassetteRecordThenReplayIsIdentical)
{
    TempDir dir;
    auto const path = dir.path() / "helper.jsonl";
    auto const session = session_for(PhaseId::P2_3_output, { "output_styles" });

    std::vector<ElicitationQuestion> recorded;
    std::string recordedSummary;
    {
        HelperAgent helper(CassetteTransport::record(offline(), path), no_sleep());
        recorded = helper.generate_questions(PhaseId::P2_3_output, {}, session);
        recordedSummary = helper.summarize_intent(session).markdown();
    }
    auto replay = CassetteTransport::replay(path);
    EXPECT_EQ(replay->size(), 2u);
    HelperAgent helper(replay, no_sleep());
    EXPECT_EQ(helper.generate_questions(PhaseId::P2_3_output, {}, session), recorded);
    EXPECT_EQ(helper.summarize_intent(session).markdown(), recordedSummary);

    // A request the cassette never saw is a transport failure, not a guess.
    EXPECT_EQ(code_of([&] { helper.generate_questions(PhaseId::P1_scope, {}, session_for(PhaseId::P1_scope, {})); }),
              ErrorCode::transport_failure);
}

TEST(Transport, RetriesWithCappedBackoff)
{
    std::atomic<int> calls = 0;
    auto flaky = std::make_shared<FunctionTransport>("flaky", [&](const ModelRequest&) -> std::string {
        if (++calls < 3)
            throw Error(ErrorCode::network_error, "connection reset");
        return "ok";
    });
    std::vector<std::chrono::milliseconds> waits;
    RetryingTransport retrying(flaky, { 2, std::chrono::milliseconds(200), std::chrono::milliseconds(300) },
                               [&](std::chrono::milliseconds d) { waits.push_back(d); });
    EXPECT_EQ(retrying.complete({}), "ok");
    EXPECT_EQ(calls, 3);
    EXPECT_EQ(waits, (std::vector<std::chrono::milliseconds> { std::chrono::milliseconds(200), std::chrono::milliseconds(300) }));

    calls = -10;
    waits.clear();
    EXPECT_EQ(code_of([&] { retrying.complete({}); }), ErrorCode::transport_failure);
    EXPECT_EQ(calls, -7);
    EXPECT_EQ(retrying.identity(), "flaky");
}
