// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails.
//
//   care_acceptance                         run every check
//   care_acceptance --record-cassette FILE  re-record the end-to-end model cassette
#include "../support/case_study.hpp"
#include "../support/gate_model.hpp"
#include "../support/published_results.hpp"

#include <care/benchmark.hpp>
#include <care/cmr_client.hpp>
#include <care/elicitation.hpp>
#include <care/error.hpp>
#include <care/helper_agent.hpp>
#include <care/offline_model.hpp>
#include <care/phase_engine.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace care;
using namespace care::bench;
using nlohmann::json;

namespace
{

/// Thrown by require(); carries the reason printed on the FAIL line.
struct CheckFailed: std::runtime_error
{
    using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& what)
{
    if (!condition)
        throw CheckFailed(what);
}

template <typename Fn>
ErrorCode code_of(Fn&& fn)
{
    try
    {
        fn();
    }
    catch (const Error& e)
    {
        return e.code();
    }
    throw CheckFailed("expected an error");
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

class ScratchDir
{
public:
    ScratchDir()
    {
        std::random_device rd;
        _path = fs::temp_directory_path() / ("care-acceptance-" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(_path);
    }
    ~ScratchDir() { fs::remove_all(_path); }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    [[nodiscard]] const fs::path& path() const { return _path; }

private:
    fs::path _path;
};

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path cassette_path()
{
    return testing::fixtures_dir() / "e2e_model_cassette.jsonl";
}

// ---------------------------------------------------------------------------

std::string metric_oracle()
{
    auto const start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(555001);
    for (int trial = 0; trial < 1000; ++trial)
    {
        auto const universe = std::uniform_int_distribution<int>(1, 40)(rng);
        std::vector<std::string> ids;
        for (int i = 0; i < universe; ++i)
            ids.push_back("C" + std::to_string(1000 + i) + "-PROV");
        std::shuffle(ids.begin(), ids.end(), rng);
        std::vector<std::string> const ranked(ids.begin(),
                                              ids.begin() + std::uniform_int_distribution<int>(0, universe)(rng));
        std::shuffle(ids.begin(), ids.end(), rng);
        std::set<std::string> const expected(ids.begin(),
                                             ids.begin() + std::uniform_int_distribution<int>(1, universe)(rng));
        auto const k = std::uniform_int_distribution<int>(1, universe + 5)(rng);

        // brute force: scan the first k positions against every expected id
        std::int64_t hits = 0;
        for (const auto& e: expected)
            for (int i = 0; i < std::min<int>(k, static_cast<int>(ranked.size())); ++i)
                if (ranked[static_cast<std::size_t>(i)] == e)
                    ++hits;
        Rational const oracle(hits, static_cast<std::int64_t>(expected.size()));
        require(recall_at_k(expected, ranked, k) == oracle, "mismatch on trial " + std::to_string(trial));
    }
    auto const elapsed = seconds_since(start);
    require(elapsed < 1.0, "took " + std::to_string(elapsed) + " s");
    return "1000 randomized instances equal the brute-force oracle";
}

std::string formula_anchors()
{
    require(recall_at_k({ "C1-A" }, { "C1-A", "C2-A" }, 1) == Rational(1, 1), "E={C1-A}, k=1");
    require(recall_at_k({ "C1-A", "C2-A" }, { "C2-A", "C3-A", "C1-A" }, 1) == Rational(1, 2), "two expected, k=1");
    require(recall_at_k({ "C1-A", "C2-A" }, { "C2-A", "C3-A", "C1-A" }, 3) == Rational(1, 1), "two expected, k=3");
    for (int k: { 1, 5, 100 })
        require(recall_at_k({ "C1-A" }, {}, k) == Rational(0, 1), "empty ranking");
    require(code_of([] { recall_at_k({}, { "C1-A" }, 1); }) == ErrorCode::empty_expected_set, "empty expected set");
    return "1.0, 0.5, 1.0, 0.0 as stated";
}

std::string two_gate_published_values()
{
    auto const published = testing::published_results();
    require(published.careSynthetic.meanRecall.at(1).percent() == "71.7", "care synthetic R@1");
    require(published.baselineSynthetic.meanRecall.at(1).percent() == "69.1", "baseline synthetic R@1");
    auto const decision = two_gate(published.careSynthetic, published.baselineSynthetic, published.careGold, published.baselineGold);
    require(decision.syntheticOutcome == SyntheticOutcome::proceed_to_gold, "0.717 vs 0.691 should proceed");
    require(decision.goldOutcome.has_value(), "gold outcome missing");
    require(decision.goldOutcome->primaryK == 5, "gold primary K");
    require(decision.goldOutcome->careValue.percent() == "27.2", "care gold R@5");
    require(decision.goldOutcome->baselineValue.percent() == "20.2", "baseline gold R@5");
    require(decision.goldOutcome->careBetter, "care should be better at K=5");

    // 0.60 against 0.691: 373 of 621 queries hit at rank 1 (60.1%)
    auto const weak = testing::report_from_specs("cmr_care_v1", "synthetic", Gate::synthetic,
                                                 testing::synthetic_specs(621, 373, 0, 0));
    require(weak.meanRecall.at(1).percent() == "60.1", "weak R@1");
    auto const revisit = two_gate(weak, published.baselineSynthetic, published.careGold, published.baselineGold);
    require(revisit.syntheticOutcome == SyntheticOutcome::revisit_design, "0.60 vs 0.691 should revisit");
    require(!revisit.goldOutcome, "no gold comparison after revisit");
    return "proceed_to_gold, revisit_design, care_better at Recall@5 (27.2 vs 20.2)";
}

Rational parse_fraction(const std::string& text)
{
    auto const slash = text.find('/');
    return { std::stoll(text.substr(0, slash)), std::stoll(text.substr(slash + 1)) };
}

std::string deterministic_end_to_end()
{
    auto const start = std::chrono::steady_clock::now();
    require(fs::exists(cassette_path()), "missing cassette " + cassette_path().string());
    auto const transport = "replay:" + cassette_path().string();
    std::ifstream expectedIn(testing::fixtures_dir() / "expected_e2e.json");
    auto const expected = json::parse(expectedIn);

    std::vector<std::string> snapshots;
    for (int pass = 0; pass < 2; ++pass)
    {
        ScratchDir root;
        control::Service service(testing::case_study_config(root.path(), transport));
        auto const outcome = testing::run_case_study(service);

        require(outcome.generation["queries"] == expected["synthetic_queries"], "synthetic query count");
        require(outcome.generation["discards"].size() == expected["discards"].get<std::size_t>(), "discard count");
        for (const auto& [gate, run]: { std::pair { "synthetic", outcome.syntheticRun },
                                        std::pair { "gold", outcome.goldRun } })
        {
            for (const auto& [agentName, byK]: expected[gate].items())
            {
                auto const report = EvaluationReport::from_json(run["reports"][agentName]);
                for (const auto& [k, fraction]: byK.items())
                    require(report.meanRecall.at(std::stoi(k)) == parse_fraction(fraction.get<std::string>()),
                            std::string(gate) + " " + agentName + " Recall@" + k + " is "
                                + report.meanRecall.at(std::stoi(k)).to_json().dump() + ", oracle "
                                + fraction.get<std::string>());
            }
        }
        auto const runs = root.path() / "case-study" / "runs";
        snapshots.push_back(read_file(runs / "run-0001" / "report.json") + read_file(runs / "run-0002" / "report.json")
                            + outcome.decision.dump());
    }
    require(snapshots[0] == snapshots[1], "re-run is not byte-identical");
    auto const elapsed = seconds_since(start);
    require(elapsed < 30.0, "took " + std::to_string(elapsed) + " s");
    return "both gates equal the independent oracle exactly; re-run byte-identical";
}

std::string gate_soundness()
{
    auto const start = std::chrono::steady_clock::now();
    auto const stats = testing::run_gate_property(10000, 60, 20260105);
    if (!stats.violations.empty())
        throw CheckFailed(stats.violations.front());
    require(stats.advances > 0 && stats.revisits > 0 && stats.refusedAdvances > 0, "sequences did not exercise gates");
    require(stats.helperApprovalAttempts > 0, "no helper approval attempts");
    auto const elapsed = seconds_since(start);
    require(elapsed < 60.0, "took " + std::to_string(elapsed) + " s");
    std::ostringstream out;
    out << stats.sequences << " sequences, " << stats.events << " events, " << stats.advances << " advances, "
        << stats.helperApprovalAttempts << " helper approvals refused";
    return out.str();
}

std::string revisit_semantics()
{
    ArtifactStore store({ .root = std::nullopt,
                          .clock = stepping_clock(parse_rfc3339("2026-01-05T09:00:00.000Z")),
                          .idSeed = 3 });
    PhaseEngine engine(store);
    store.create_project("p");
    auto approve = [&](const Artifact& a) {
        store.record_approval("p", a.artifactId, a.version, Role::sme, "sam", Verdict::approve, "");
        store.record_approval("p", a.artifactId, a.version, Role::developer, "dana", Verdict::approve, "");
    };
    std::map<PhaseId, Artifact> made;
    for (auto const phase: allPhases)
    {
        auto const kind = required_artifacts(phase).front();
        made[phase] = store.create_artifact("p", phase, kind, "# " + std::string(to_string(kind)) + "\n\n- point\n",
                                            Role::helper_agent);
        approve(made[phase]);
        if (phase == PhaseId::P4_prompt)
            break;
        engine.advance("p");
    }
    require(engine.state("p").currentPhase == PhaseId::P4_prompt, "did not reach P4");
    std::map<std::string, std::vector<LineageEntry>> before;
    for (const auto& [phase, a]: made)
        before[a.artifactId] = store.artifact_lineage("p", a.artifactId);

    engine.revisit("p", PhaseId::P2_2_context);

    // oracle: stale iff strictly after the target and not after the phase we left
    std::set<PhaseId> stale;
    for (const auto& [phase, a]: made)
        if (store.get_artifact("p", a.artifactId).status == ArtifactStatus::stale)
            stale.insert(phase);
    std::set<PhaseId> const expectedStale { PhaseId::P2_3_output, PhaseId::P3_1_guardrails, PhaseId::P3_2_reasoning,
                                            PhaseId::P4_prompt };
    require(stale == expectedStale, "stale set differs");
    for (const auto& [id, lineage]: before)
    {
        auto const after = store.artifact_lineage("p", id);
        require(after.size() == lineage.size(), "lineage length changed");
        for (std::size_t i = 0; i < after.size(); ++i)
            require(after[i].content == lineage[i].content && after[i].version == lineage[i].version,
                    "lineage content changed");
    }
    require(engine.gate_status("p", PhaseId::P2_2_context).satisfied, "target gate should stay satisfied");
    for (auto const phase: expectedStale)
        require(!engine.gate_status("p", phase).satisfied, "stale gate still satisfied");

    engine.advance("p");
    for (auto const phase: { PhaseId::P2_3_output, PhaseId::P3_1_guardrails, PhaseId::P3_2_reasoning })
    {
        approve(store.get_artifact("p", made[phase].artifactId));
        require(engine.gate_status("p", phase).satisfied, "re-approval did not satisfy gate");
        engine.advance("p");
    }
    approve(store.get_artifact("p", made[PhaseId::P4_prompt].artifactId));
    require(engine.gate_status("p", PhaseId::P4_prompt).satisfied, "P4 not re-satisfied");
    require(engine.state("p").currentPhase == PhaseId::P4_prompt, "did not return to P4");
    return "exactly {P2_3, P3_1, P3_2, P4} stale; lineages intact; re-approval re-satisfies";
}

std::string elicitation_coverage()
{
    auto run_once = [] {
        HelperAgent::Options options;
        options.sleeper = [](std::chrono::milliseconds) {};
        HelperAgent helper(std::make_shared<OfflineModel>(), options);
        std::vector<std::string> all;
        for (auto const phase: allPhases)
        {
            ElicitationSession empty("s-1", "p", phase);
            auto const questions = helper.generate_questions(phase, {}, empty);
            std::set<std::string> asked;
            for (const auto& q: questions)
            {
                require(!q.text.empty(), "empty question");
                asked.insert(q.dimensionId);
                all.push_back(q.dimensionId + "|" + q.text);
            }
            std::set<std::string> checklist;
            for (const auto& d: dimension_checklist(phase))
                checklist.insert(d.dimensionId);
            require(asked == checklist, std::string("coverage differs in ") + std::string(to_string(phase)));
        }
        return all;
    };
    auto const first = run_once();
    require(first == run_once(), "question lists differ between runs");
    return std::to_string(allPhases.size()) + " phases, " + std::to_string(first.size())
           + " questions, one per dimension, identical across runs";
}

std::string faithfulness_checker()
{
    auto session_with = [](PhaseId phase, std::map<std::string, std::string>& answerIds) {
        ElicitationSession s("s-1", "p", phase);
        for (const auto& d: dimension_checklist(phase))
        {
            auto const q = s.add_question(d.dimensionId, d.defaultQuestion).entryId;
            answerIds[d.dimensionId] = s.add_answer(q, "Answer about " + d.dimensionId, Role::sme).entryId;
        }
        return s;
    };
    std::map<std::string, std::string> ids;
    auto const session = session_with(PhaseId::P1_scope, ids);
    std::string mapped = "# Scope Specification\n\n## Notes\n";
    for (const auto& d: dimension_checklist(PhaseId::P1_scope))
        mapped += "- " + d.dimensionId + " point [" + ids[d.dimensionId] + "]\n";

    DraftProposal draft;
    draft.kind = ArtifactKind::scope_spec;
    draft.content = mapped;
    require(check_faithfulness(draft, session).empty(), "fully mapped draft flagged");

    draft.content = mapped + "- Also export every result as a shapefile\n";
    auto const introduced = check_faithfulness(draft, session);
    require(introduced.size() == 1 && introduced[0].kind == ViolationKind::introduced_requirement,
            "introduced requirement not flagged exactly once");

    draft.content.clear();
    for (const auto& line: std::vector<std::string> { "# Scope Specification", "", "## Notes" })
        draft.content += line + "\n";
    for (const auto& d: dimension_checklist(PhaseId::P1_scope))
        if (d.dimensionId != "non_delegable_decisions")
            draft.content += "- " + d.dimensionId + " point [" + ids[d.dimensionId] + "]\n";
    auto const omitted = check_faithfulness(draft, session);
    require(omitted.size() == 1 && omitted[0].kind == ViolationKind::omitted_constraint
                && omitted[0].subject == "non_delegable_decisions",
            "omitted constraint not flagged exactly once");

    // helper drafts for every artifact kind map every answer
    HelperAgent::Options options;
    options.sleeper = [](std::chrono::milliseconds) {};
    HelperAgent helper(std::make_shared<OfflineModel>(), options);
    for (auto const kind: allArtifactKinds)
    {
        std::map<std::string, std::string> kindIds;
        auto const s = session_with(phase_of(kind), kindIds);
        require(check_faithfulness(helper.draft_artifact(kind, s, {}), s).empty(),
                std::string("helper draft not faithful: ") + std::string(to_string(kind)));
    }
    return "one introduced_requirement, one omitted_constraint, zero for mapped drafts";
}

std::string generator_soundness()
{
    auto const catalogPtr = cmr::FixtureCatalog::load(testing::fixtures_dir() / "cmr_catalog.jsonl");
    const auto& catalog = *catalogPtr;
    auto const corpus = load_corpus(testing::fixtures_dir() / "corpus.jsonl");
    require(corpus.size() == 20, "corpus is not 20 documents");
    OfflineModel model;
    auto const result = generate_synthetic(corpus, model, catalog);
    std::size_t pairs = 0;
    for (const auto& d: corpus)
        pairs += d.citedIds.size();
    require(result.benchmark.queries.size() + result.discards.size() == pairs, "pairs unaccounted for");
    for (const auto& q: result.benchmark.queries)
    {
        require(q.expectedIds.size() == 1, "synthetic query with more than one target");
        // re-validate with a fresh search
        cmr::CollectionQuery query;
        query.keyword = q.text;
        query.pageSize = 10;
        bool found = false;
        for (const auto& r: catalog.search(query))
            found = found || r.conceptId == *q.expectedIds.begin();
        require(found, "query " + q.queryId + " is not solvable");
    }
    for (const auto& d: result.discards)
    {
        require(!d.reason.empty(), "discard without reason");
        require(catalog.find(d.citedId) == nullptr, "discarded a citation that is in the catalog: " + d.citedId);
    }
    require(!result.discards.empty(), "expected discards for citations outside the catalog");
    return std::to_string(result.benchmark.queries.size()) + "/" + std::to_string(result.benchmark.queries.size())
           + " queries re-validate; " + std::to_string(result.discards.size()) + " absent citations discarded with reasons";
}

std::string report_rendering()
{
    auto const published = testing::published_results();
    auto const table = render_two_gate_table(published.careSynthetic, published.baselineSynthetic, published.careGold,
                                             published.baselineGold);
    require(table == testing::published_table(), "table differs:\n" + table);
    return "Table 1 reproduced exactly";
}

std::string fairness_check()
{
    auto const catalogPtr = cmr::FixtureCatalog::load(testing::fixtures_dir() / "cmr_catalog.jsonl");
    Benchmark benchmark;
    benchmark.name = "fairness";
    benchmark.gate = Gate::gold;
    benchmark.queries.push_back({ "q-1", "sea surface temperature", { "C1000000001-PODAAC" }, {}, {} });
    std::atomic<int> calls = 0;
    FunctionTransport model("model-a", [&](const ModelRequest&) -> std::string {
        ++calls;
        return "";
    });
    FunctionTransport otherModel("model-b", [&](const ModelRequest&) -> std::string {
        ++calls;
        return "";
    });
    auto const careAgent = agent::care_agent("You are a data discovery assistant.");
    auto const baseline = agent::baseline_agent();

    require(code_of([&] { evaluate_pair(careAgent, baseline, benchmark, model, otherModel, *catalogPtr); })
                == ErrorCode::fairness_violation,
            "different transports accepted");
    auto moreCalls = baseline;
    moreCalls.orchestration.maxToolCalls += 4;
    require(code_of([&] { evaluate_pair(careAgent, moreCalls, benchmark, model, model, *catalogPtr); })
                == ErrorCode::fairness_violation,
            "different orchestration limits accepted");
    auto fewerTools = baseline;
    fewerTools.toolSchemas.clear();
    require(code_of([&] { evaluate_pair(careAgent, fewerTools, benchmark, model, model, *catalogPtr); })
                == ErrorCode::fairness_violation,
            "different tool schemas accepted");
    require(calls.load() == 0, "a model call happened before rejection");
    evaluate_pair(careAgent, baseline, benchmark, model, model, *catalogPtr);
    require(calls.load() > 0, "identical configurations should run");
    return "transport, tool schemas and orchestration differences rejected before any call";
}

int record_cassette(const fs::path& path)
{
    fs::remove(path);
    ScratchDir root;
    control::Service service(testing::case_study_config(root.path(), "record:" + path.string()));
    auto const outcome = testing::run_case_study(service);
    std::cout << outcome.decision["table"].get<std::string>();
    std::cout << "recorded " << path.string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    if (argc == 3 && std::string(argv[1]) == "--record-cassette")
        return record_cassette(argv[2]);

    std::vector<std::pair<std::string, std::function<std::string()>>> const checks {
        { "metric_oracle", metric_oracle },
        { "formula_anchors", formula_anchors },
        { "two_gate_published_values", two_gate_published_values },
        { "deterministic_end_to_end", deterministic_end_to_end },
        { "gate_soundness", gate_soundness },
        { "revisit_semantics", revisit_semantics },
        { "elicitation_coverage", elicitation_coverage },
        { "faithfulness_checker", faithfulness_checker },
        { "generator_soundness", generator_soundness },
        { "report_rendering", report_rendering },
        { "fairness_check", fairness_check },
    };
    int failed = 0;
    for (const auto& [name, check]: checks)
    {
        auto const start = std::chrono::steady_clock::now();
        try
        {
            auto const detail = check();
            std::printf("PASS %-26s %6.2fs  %s\n", name.c_str(), seconds_since(start), detail.c_str());
        }
        catch (const std::exception& e)
        {
            ++failed;
            std::printf("FAIL %-26s %6.2fs  %s\n", name.c_str(), seconds_since(start), e.what());
        }
        std::fflush(stdout);
    }
    std::printf("%zu/%zu acceptance criteria passed\n", checks.size() - static_cast<std::size_t>(failed), checks.size());
    return failed == 0 ? 0 : 1;
}
