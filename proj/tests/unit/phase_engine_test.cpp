// SPDX-License-Identifier: Apache-2.0
#include "../support/gate_model.hpp"
#include "test_support.hpp"

#include <care/phase_engine.hpp>

using namespace care;
using namespace care::testing;

namespace
{

class PhaseEngineTest: public ::testing::Test
{
protected:
    void SetUp() override { store.create_project("cmr"); }

    Artifact create(PhaseId phase)
    {
        auto const kind = required_artifacts(phase).front();
        return store.create_artifact("cmr", phase, kind, simple_content(kind), Role::helper_agent);
    }

    /// Creates, dual-approves and advances through every phase before `target`.
    std::map<PhaseId, Artifact> walk_to(PhaseId target)
    {
        std::map<PhaseId, Artifact> made;
        while (engine.state("cmr").currentPhase != target)
        {
            auto const phase = engine.state("cmr").currentPhase;
            auto const a = create(phase);
            approve_both(store, "cmr", a);
            made[phase] = a;
            engine.advance("cmr");
        }
        return made;
    }

    ArtifactStore store { memory_options() };
    PhaseEngine engine { store };
};

} // namespace

TEST(PhaseMap, RequiredArtifactsFollowFixedMap)
{
    std::vector<ArtifactKind> expected(allArtifactKinds.begin(), allArtifactKinds.end());
    for (std::size_t i = 0; i < allPhases.size(); ++i)
        EXPECT_EQ(required_artifacts(allPhases[i]), std::vector<ArtifactKind> { expected[i] });
    EXPECT_EQ(phase_from_string("P2_2"), PhaseId::P2_2_context);
    EXPECT_EQ(phase_from_string("P3_2_reasoning"), PhaseId::P3_2_reasoning);
}

TEST_F(PhaseEngineTest, FreshProjectMissesScopeSpec)
{
    auto const gate = engine.gate_status("cmr", PhaseId::P1_scope);
    EXPECT_FALSE(gate.satisfied);
    ASSERT_EQ(gate.missing.size(), 1U);
    EXPECT_EQ(gate.missing[0], (MissingArtifact { ArtifactKind::scope_spec, MissingReason::no_artifact }));
}

TEST_F(PhaseEngineTest, SmeOnlyApprovalIsNotEnough)
{
    auto const a = create(PhaseId::P1_scope);
    store.record_approval("cmr", a.artifactId, 1, Role::sme, "sam", Verdict::approve, "");
    auto const gate = engine.gate_status("cmr", PhaseId::P1_scope);
    EXPECT_FALSE(gate.satisfied);
    ASSERT_EQ(gate.missing.size(), 1U);
    EXPECT_EQ(gate.missing[0], (MissingArtifact { ArtifactKind::scope_spec, MissingReason::not_approved }));
}

TEST_F(PhaseEngineTest, DualApprovalSatisfiesGateAndAdvances)
{
    auto const a = create(PhaseId::P1_scope);
    approve_both(store, "cmr", a);
    EXPECT_TRUE(engine.gate_status("cmr", PhaseId::P1_scope).satisfied);
    auto const state = engine.advance("cmr");
    EXPECT_EQ(state.currentPhase, PhaseId::P2_1_tools);
    ASSERT_EQ(state.history.size(), 1U);
    EXPECT_EQ(state.history[0].cause, TransitionCause::advance);
}

TEST_F(PhaseEngineTest, AdvanceRefusedWithMissingList)
{
    try
    {
        engine.advance("cmr");
        FAIL() << "advance should fail";
    }
    catch (const Error& e)
    {
        EXPECT_EQ(e.code(), ErrorCode::gate_not_satisfied);
        ASSERT_EQ(e.details().at("missing").size(), 1U);
        EXPECT_EQ(e.details()["missing"][0]["kind"], "scope_spec");
        EXPECT_EQ(e.details()["missing"][0]["reason"], "no_artifact");
    }
    EXPECT_EQ(engine.state("cmr").currentPhase, PhaseId::P1_scope);
}

TEST_F(PhaseEngineTest, PendingProposalBlocksGate)
{
    auto const a = create(PhaseId::P1_scope);
    approve_both(store, "cmr", a);
    store.propose_revision("cmr", a.artifactId, 1, diff::make_unified_diff(a.content, a.content + "- x\n"), "",
                           Role::helper_agent);
    EXPECT_FALSE(engine.gate_status("cmr", PhaseId::P1_scope).satisfied);
}

TEST_F(PhaseEngineTest, FinalPhaseCannotAdvance)
{
    walk_to(PhaseId::P5_benchmark);
    approve_both(store, "cmr", create(PhaseId::P5_benchmark));
    EXPECT_EQ(code_of([&] { engine.advance("cmr"); }), ErrorCode::already_at_final_phase);
}

TEST_F(PhaseEngineTest, RevisitMarksDownstreamStale)
{
    auto made = walk_to(PhaseId::P4_prompt);
    made[PhaseId::P4_prompt] = create(PhaseId::P4_prompt);
    approve_both(store, "cmr", made[PhaseId::P4_prompt]);

    std::map<std::string, std::vector<LineageEntry>> before;
    for (const auto& [phase, a]: made)
        before[a.artifactId] = store.artifact_lineage("cmr", a.artifactId);

    auto const state = engine.revisit("cmr", PhaseId::P2_2_context);
    EXPECT_EQ(state.currentPhase, PhaseId::P2_2_context);
    EXPECT_EQ(state.history.back().staled.size(), 4U);

    // state-machine oracle: everything strictly after the target up to the old current phase
    for (auto phase: allPhases)
    {
        if (!made.contains(phase))
            continue;
        bool const expectStale = phase_index(phase) > phase_index(PhaseId::P2_2_context)
                                 && phase_index(phase) <= phase_index(PhaseId::P4_prompt);
        auto const status = store.get_artifact("cmr", made[phase].artifactId).status;
        EXPECT_EQ(status, expectStale ? ArtifactStatus::stale : ArtifactStatus::approved) << to_string(phase);
    }
    for (const auto& [id, lineage]: before)
    {
        auto const after = store.artifact_lineage("cmr", id);
        ASSERT_EQ(after.size(), lineage.size());
        for (std::size_t i = 0; i < after.size(); ++i)
            EXPECT_EQ(after[i].content, lineage[i].content);
    }

    auto const gate = engine.gate_status("cmr", PhaseId::P2_3_output);
    EXPECT_EQ(gate.missing.front().reason, MissingReason::stale);
    EXPECT_TRUE(engine.gate_status("cmr", PhaseId::P2_2_context).satisfied);
}

TEST_F(PhaseEngineTest, ReapprovalAfterRevisitSatisfiesGatesAgain)
{
    auto made = walk_to(PhaseId::P4_prompt);
    engine.revisit("cmr", PhaseId::P2_2_context);

    // a single role is not enough to re-satisfy a stale gate
    auto const out = made[PhaseId::P2_3_output];
    store.record_approval("cmr", out.artifactId, out.version, Role::sme, "sam", Verdict::approve, "");
    EXPECT_FALSE(engine.gate_status("cmr", PhaseId::P2_3_output).satisfied);

    engine.advance("cmr"); // P2_2 untouched
    store.record_approval("cmr", out.artifactId, out.version, Role::developer, "dana", Verdict::approve, "");
    EXPECT_TRUE(engine.gate_status("cmr", PhaseId::P2_3_output).satisfied);
    engine.advance("cmr");
    for (auto phase: { PhaseId::P3_1_guardrails, PhaseId::P3_2_reasoning })
    {
        approve_both(store, "cmr", store.get_artifact("cmr", made[phase].artifactId));
        EXPECT_TRUE(engine.gate_status("cmr", phase).satisfied);
        engine.advance("cmr");
    }
    EXPECT_EQ(engine.state("cmr").currentPhase, PhaseId::P4_prompt);
}

TEST_F(PhaseEngineTest, RevisitToCurrentOrLaterIsRefused)
{
    walk_to(PhaseId::P2_2_context);
    EXPECT_EQ(code_of([&] { engine.revisit("cmr", PhaseId::P2_2_context); }), ErrorCode::not_an_earlier_phase);
    EXPECT_EQ(code_of([&] { engine.revisit("cmr", PhaseId::P4_prompt); }), ErrorCode::not_an_earlier_phase);
}

TEST_F(PhaseEngineTest, IdempotencyKeyMakesRetriesSafe)
{
    walk_to(PhaseId::P3_1_guardrails);
    auto const first = engine.revisit("cmr", PhaseId::P1_scope, "req-1");
    auto const again = engine.revisit("cmr", PhaseId::P1_scope, "req-1");
    EXPECT_EQ(to_json(first), to_json(again));
    EXPECT_EQ(engine.state("cmr").history.size(), first.history.size());
}

TEST(PhaseEngineMerged, CompositeGatesCoverAllSubphases)
{
    ArtifactStore store(memory_options());
    PhaseEngine engine(store);
    store.create_project("m", { .gate = { .mergeSubphases = true } });
    approve_both(store, "m", store.create_artifact("m", PhaseId::P1_scope, ArtifactKind::scope_spec, "s\n", Role::sme));
    engine.advance("m");

    auto tools = store.create_artifact("m", PhaseId::P2_1_tools, ArtifactKind::tools_spec, "t\n", Role::sme);
    approve_both(store, "m", tools);
    EXPECT_EQ(code_of([&] { engine.advance("m"); }), ErrorCode::gate_not_satisfied);
    EXPECT_EQ(engine.current_gate("m").size(), 3U);

    approve_both(store, "m", store.create_artifact("m", PhaseId::P2_2_context, ArtifactKind::context_spec, "c\n", Role::sme));
    approve_both(store, "m", store.create_artifact("m", PhaseId::P2_3_output, ArtifactKind::output_format_spec, "o\n", Role::sme));
    EXPECT_EQ(engine.advance("m").currentPhase, PhaseId::P3_1_guardrails);

    // revisiting inside the composite gate lands on its first sub-phase
    EXPECT_EQ(engine.revisit("m", PhaseId::P2_3_output).currentPhase, PhaseId::P2_1_tools);
    EXPECT_EQ(store.get_artifact("m", tools.artifactId).status, ArtifactStatus::approved);
}

TEST(PhaseEngineQuorum, ConfigurableUpward)
{
    ArtifactStore store(memory_options());
    PhaseEngine engine(store);
    store.create_project("q", { .gate = { .smeQuorum = 2, .developerQuorum = 1 } });
    auto const a = store.create_artifact("q", PhaseId::P1_scope, ArtifactKind::scope_spec, "s\n", Role::sme);
    approve_both(store, "q", a);
    EXPECT_FALSE(engine.gate_status("q", PhaseId::P1_scope).satisfied);
    store.record_approval("q", a.artifactId, 1, Role::sme, "sue", Verdict::approve, "");
    EXPECT_TRUE(engine.gate_status("q", PhaseId::P1_scope).satisfied);
}

TEST(GateSoundness, RandomEventSequences)
{
    auto const stats = run_gate_property(300, 60, 424242);
    for (const auto& v: stats.violations)
        ADD_FAILURE() << v;
    EXPECT_GT(stats.advances, 0);
    EXPECT_GT(stats.revisits, 0);
    EXPECT_GT(stats.refusedAdvances, 0);
    EXPECT_GT(stats.helperApprovalAttempts, 0);
}
