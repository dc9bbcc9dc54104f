// SPDX-License-Identifier: Apache-2.0
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "../support/case_study.hpp"
#include "test_support.hpp"

#include <care/api_server.hpp>
#include <care/unified_diff.hpp>

#include <httplib.h>

#include <fstream>

using namespace care;
using namespace care::control;
using namespace care::testing;
using nlohmann::json;

namespace
{

struct Reply
{
    int status = 0;
    json body;
};

class ApiTest: public ::testing::Test
{
protected:
    void SetUp() override
    {
        service = std::make_unique<Service>(case_study_config(dir.path() / "data", "offline"));
        server = std::make_unique<ApiServer>(
            *service, std::vector<TokenGrant> { { "sme-token-1", Role::sme, "sam" },
                                                { "dev-token-1", Role::developer, "dana" },
                                                { "helper-token-1", Role::helper_agent, "helper" } });
        port = server->start("127.0.0.1", 0);
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
    }

    void TearDown() override { server->stop(); }

    static Reply wrap(const httplib::Result& r)
    {
        if (!r)
            return { -1, nullptr };
        return { r->status, r->body.empty() ? json() : json::parse(r->body) };
    }

    static httplib::Headers auth(const std::string& token, httplib::Headers extra = {})
    {
        extra.emplace("Authorization", "Bearer " + token);
        return extra;
    }

    Reply get(const std::string& path, const std::string& token = "dev-token-1")
    {
        return wrap(client->Get(("/api/v1" + path).c_str(), auth(token)));
    }

    Reply post(const std::string& path, const json& body, const std::string& token = "dev-token-1",
               httplib::Headers extra = {})
    {
        return wrap(client->Post(("/api/v1" + path).c_str(), auth(token, std::move(extra)), body.dump(),
                                 "application/json"));
    }

    /// Elicits and drafts the P1 artifact over HTTP; returns the draft reply body.
    json draft_scope(const std::string& project)
    {
        auto const session = post("/projects/" + project + "/sessions", json::object()).body["session_id"].get<std::string>();
        auto const questions = get("/projects/" + project + "/sessions/" + session + "/next-questions").body;
        auto const answers = case_study_answers()["P1_scope"];
        for (const auto& q: questions["questions"])
        {
            auto const r = post("/projects/" + project + "/sessions/" + session + "/answers",
                                { { "question_id", q["entry_id"] }, { "text", answers[q["dimension_id"].get<std::string>()] } },
                                "sme-token-1");
            EXPECT_EQ(r.status, 201) << r.body.dump();
        }
        auto const draft = post("/projects/" + project + "/draft", { { "session_id", session } });
        EXPECT_EQ(draft.status, 201) << draft.body.dump();
        return draft.body;
    }

    TempDir dir;
    std::unique_ptr<Service> service;
    std::unique_ptr<ApiServer> server;
    std::unique_ptr<httplib::Client> client;
    int port = 0;
};

} // namespace

TEST_F(ApiTest, HealthIsOpenEverythingElseNeedsAToken)
{
    auto const health = wrap(client->Get("/api/v1/health"));
    EXPECT_EQ(health.status, 200);
    EXPECT_EQ(health.body["status"], "ok");

    auto const anonymous = wrap(client->Get("/api/v1/projects"));
    EXPECT_EQ(anonymous.status, 401);
    EXPECT_EQ(anonymous.body["code"], "unauthorized");
    EXPECT_EQ(get("/projects", "not-a-token").status, 401);

    auto const me = get("/whoami", "sme-token-1");
    EXPECT_EQ(me.status, 200);
    EXPECT_EQ(me.body, (json { { "role", "sme" }, { "actor", "sam" } }));
}

TEST_F(ApiTest, ErrorsAreJsonWithMatchingStatus)
{
    auto const missing = get("/projects/nope");
    EXPECT_EQ(missing.status, 404);
    EXPECT_EQ(missing.body["code"], "not_found");
    EXPECT_TRUE(missing.body.contains("message"));
    EXPECT_TRUE(missing.body.contains("details"));

    auto const unknownRoute = get("/no/such/route");
    EXPECT_EQ(unknownRoute.status, 404);
    EXPECT_EQ(unknownRoute.body["code"], "not_found");

    auto const badJson = wrap(client->Post("/api/v1/projects", auth("dev-token-1"), "{not json", "application/json"));
    EXPECT_EQ(badJson.status, 400);
    EXPECT_EQ(badJson.body["code"], "invalid_argument");

    EXPECT_EQ(post("/projects", json::object()).status, 400);
    EXPECT_EQ(post("/projects", { { "project_id", "a" } }).status, 201);
    EXPECT_EQ(post("/projects", { { "project_id", "a" } }).status, 409);
}

TEST_F(ApiTest, GateFlowWithRoleChecks)
{
    ASSERT_EQ(post("/projects", { { "project_id", "cmr" } }).status, 201);
    auto fresh = get("/projects/cmr/gate-status");
    EXPECT_FALSE(fresh.body["satisfied"].get<bool>());
    EXPECT_EQ(fresh.body["gates"][0]["missing"][0],
              (json { { "kind", "scope_spec" }, { "reason", "no_artifact" } }));

    auto const draft = draft_scope("cmr");
    EXPECT_TRUE(draft["violations"].empty());
    auto const artifact = draft["artifact"];
    ASSERT_FALSE(artifact.is_null());
    EXPECT_EQ(artifact["authored_by"], "helper_agent");

    auto const approval = [&](const std::string& token) {
        return post("/projects/cmr/approvals",
                    { { "artifact_id", artifact["artifact_id"] }, { "version", 1 }, { "verdict", "approve" } }, token);
    };
    auto const helper = approval("helper-token-1");
    EXPECT_EQ(helper.status, 403);
    EXPECT_EQ(helper.body["code"], "helper_agent_cannot_approve");

    // answers must come from people as well
    auto const sessions = get("/projects/cmr/sessions").body;
    auto const helperAnswer = post("/projects/cmr/sessions/" + sessions[0]["session_id"].get<std::string>() + "/answers",
                                   { { "question_id", "e-0001" }, { "text", "made up" } }, "helper-token-1");
    EXPECT_EQ(helperAnswer.status, 403);

    auto const refused = post("/projects/cmr/advance", json::object());
    EXPECT_EQ(refused.status, 409);
    EXPECT_EQ(refused.body["code"], "gate_not_satisfied");

    EXPECT_EQ(approval("sme-token-1").status, 201);
    EXPECT_FALSE(get("/projects/cmr/gate-status").body["satisfied"].get<bool>());
    auto const both = approval("dev-token-1");
    EXPECT_EQ(both.status, 201);
    EXPECT_TRUE(both.body["gate"]["satisfied"].get<bool>());

    auto const advanced = post("/projects/cmr/advance", json::object(), "dev-token-1", { { "Idempotency-Key", "adv-1" } });
    EXPECT_EQ(advanced.status, 200) << advanced.body.dump();
    EXPECT_EQ(advanced.body["current_phase"], "P2_1_tools");
    // a retried request with the same key does not advance twice
    auto const retried = post("/projects/cmr/advance", json::object(), "dev-token-1", { { "Idempotency-Key", "adv-1" } });
    EXPECT_EQ(retried.status, 200);
    EXPECT_EQ(retried.body["current_phase"], "P2_1_tools");

    auto const back = post("/projects/cmr/revisit", { { "to", "P1_scope" } });
    EXPECT_EQ(back.status, 200);
    EXPECT_EQ(back.body["current_phase"], "P1_scope");
    EXPECT_EQ(post("/projects/cmr/revisit", { { "to", "P1_scope" } }).body["code"], "not_an_earlier_phase");
}

TEST_F(ApiTest, StaleBaseOnConcurrentRevisions)
{
    ASSERT_EQ(post("/projects", { { "project_id", "cmr" } }).status, 201);
    std::string const v1 = "# Scope\n\n## Tasks\n- find data\n";
    auto const created = post("/projects/cmr/artifacts", { { "kind", "scope_spec" }, { "content", v1 } });
    ASSERT_EQ(created.status, 201) << created.body.dump();
    auto const id = created.body["artifact_id"].get<std::string>();

    auto const propose = [&](const std::string& line) {
        return post("/projects/cmr/revisions", { { "artifact_id", id },
                                                  { "base_version", 1 },
                                                  { "diff", diff::make_unified_diff(v1, v1 + line) },
                                                  { "rationale", "reviewer edit" } },
                    "sme-token-1");
    };
    auto const first = propose("- cite sources\n");
    auto const second = propose("- rank by relevance\n");
    ASSERT_EQ(first.status, 201) << first.body.dump();
    ASSERT_EQ(second.status, 201);

    auto const applied = post("/projects/cmr/revisions/" + first.body["proposal_id"].get<std::string>() + "/apply",
                              { { "accept", true } });
    EXPECT_EQ(applied.status, 200) << applied.body.dump();
    EXPECT_EQ(applied.body["artifact"]["version"], 2);

    auto const stale = post("/projects/cmr/revisions/" + second.body["proposal_id"].get<std::string>() + "/apply",
                            { { "accept", true } });
    EXPECT_EQ(stale.status, 409);
    EXPECT_EQ(stale.body["code"], "stale_base");

    auto const lineage = get("/projects/cmr/artifacts/" + id + "/lineage");
    EXPECT_EQ(lineage.body.size(), 2U);
    auto const head = get("/projects/cmr/artifacts/" + id);
    EXPECT_EQ(head.body["version"], 2);
    EXPECT_NE(head.body["content"].get<std::string>().find("cite sources"), std::string::npos);
}

TEST_F(ApiTest, BenchmarksRunsAndTwoGate)
{
    service->create_project("cmr");
    drive_design_phases(*service, "cmr");

    json documents = json::array();
    for (const auto& d: bench::load_corpus(fixtures_dir() / "corpus.jsonl"))
        documents.push_back({ { "doc_id", d.docId }, { "text", d.text }, { "cited_ids", d.citedIds } });
    auto const generated = post("/projects/cmr/benchmarks/generate", { { "name", "synthetic" }, { "documents", documents } });
    ASSERT_EQ(generated.status, 201) << generated.body.dump();
    EXPECT_EQ(generated.body["queries"], 35);
    EXPECT_EQ(generated.body["discards"].size(), 2U);

    auto const gold = bench::load_benchmark(fixtures_dir() / "gold_benchmark.jsonl");
    EXPECT_EQ(post("/projects/cmr/benchmarks", bench::to_json(gold)).status, 201);
    auto const listed = get("/projects/cmr/benchmarks").body;
    EXPECT_EQ(listed.size(), 2U);
    EXPECT_EQ(bench::benchmark_from_json(get("/projects/cmr/benchmarks/gold-fixture").body), gold);

    auto const syn = post("/projects/cmr/runs", { { "benchmark", "synthetic" } });
    ASSERT_EQ(syn.status, 201) << syn.body.dump();
    auto const goldRun = post("/projects/cmr/runs", { { "benchmark", "gold-fixture" } });
    ASSERT_EQ(goldRun.status, 201);
    EXPECT_EQ(get("/projects/cmr/runs").body.size(), 2U);

    auto const report = get("/projects/cmr/runs/" + syn.body["run_id"].get<std::string>() + "/report");
    EXPECT_EQ(report.status, 200);
    EXPECT_EQ(report.body["agents"], json::array({ "cmr_care_v1", "cmr_simple" }));

    auto const decision = get("/projects/cmr/runs/two-gate?synthetic=" + syn.body["run_id"].get<std::string>()
                              + "&gold=" + goldRun.body["run_id"].get<std::string>());
    ASSERT_EQ(decision.status, 200) << decision.body.dump();
    EXPECT_EQ(decision.body["synthetic_outcome"], "proceed_to_gold");
    EXPECT_TRUE(decision.body["gold_outcome"]["care_better"].get<bool>());

    // the table matches the one the CLI prints for the same fixtures
    std::ifstream in(fixtures_dir().parent_path() / "tests" / "cli" / "case_study_expected.txt");
    std::string expected;
    for (std::string line; std::getline(in, line) && line.rfind("synthetic gate", 0) != 0;)
        expected += line + "\n";
    EXPECT_EQ(decision.body["table"].get<std::string>(), expected);

    EXPECT_EQ(get("/projects/cmr/runs/two-gate").status, 400);
}

TEST_F(ApiTest, DeleteProject)
{
    ASSERT_EQ(post("/projects", { { "project_id", "gone" } }).status, 201);
    auto const r = client->Delete("/api/v1/projects/gone", auth("dev-token-1"));
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 204);
    EXPECT_EQ(get("/projects/gone").status, 404);
}

TEST(ApiTokens, LoadValidatesEntries)
{
    TempDir dir;
    auto const path = dir.path() / "tokens.json";
    std::ofstream(path) << R"({"tokens":[{"token":"abcdefgh1","role":"sme","actor":"sam"}]})";
    auto const tokens = load_tokens(path);
    ASSERT_EQ(tokens.size(), 1U);
    EXPECT_EQ(tokens[0].role, Role::sme);

    std::ofstream(path) << R"({"tokens":[{"token":"short","role":"sme","actor":"sam"}]})";
    EXPECT_EQ(code_of([&] { load_tokens(path); }), ErrorCode::invalid_argument);
}
