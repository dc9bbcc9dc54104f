// SPDX-License-Identifier: Apache-2.0
// Drives a Service through the fixture case study: elicitation, drafting and
// approvals for phases 1 to 4, then synthetic generation and both gates.
#pragma once

#include <care/service.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

namespace care::testing
{

inline std::filesystem::path fixtures_dir()
{
    return std::filesystem::path(CARE_SOURCE_DIR) / "fixtures";
}

/// Seeded ids and a stepping clock make every model request reproducible,
/// which is what lets a recorded cassette replay the whole study.
inline control::ServiceConfig case_study_config(const std::filesystem::path& root, const std::string& transport)
{
    control::ServiceConfig config;
    config.root = root;
    config.transport = transport;
    config.cmr = "fixture:" + (fixtures_dir() / "cmr_catalog.jsonl").string();
    config.clock = stepping_clock(parse_rfc3339("2026-01-05T09:00:00.000Z"));
    config.idSeed = 11;
    config.concurrency = 4;
    config.sleeper = [](std::chrono::milliseconds) {};
    return config;
}

inline nlohmann::json case_study_answers()
{
    std::ifstream in(fixtures_dir() / "case_study_answers.json");
    return nlohmann::json::parse(in);
}

inline const std::vector<PhaseId>& design_phases()
{
    static const std::vector<PhaseId> phases { PhaseId::P1_scope,        PhaseId::P2_1_tools,
                                               PhaseId::P2_2_context,    PhaseId::P2_3_output,
                                               PhaseId::P3_1_guardrails, PhaseId::P3_2_reasoning,
                                               PhaseId::P4_prompt };
    return phases;
}

/// Answers every open question of the session from the fixture answers.
inline void answer_all(control::Service& service, const std::string& project, const std::string& session,
                       const nlohmann::json& phaseAnswers)
{
    control::Caller const sme { Role::sme, "case-study-sme" };
    for (int round = 0; round < 4; ++round)
    {
        auto const next = service.next_questions(project, session);
        if (next["questions"].empty())
            return;
        for (const auto& q: next["questions"])
        {
            auto const& a = phaseAnswers.at(q["dimension_id"].get<std::string>());
            if (a.is_string())
                service.answer(project, session, q["entry_id"].get<std::string>(), a.get<std::string>(), sme);
            else
                for (const auto& text: a)
                    service.answer(project, session, q["entry_id"].get<std::string>(), text.get<std::string>(), sme);
        }
    }
}

/// Elicits, drafts, approves (one SME and one developer) and advances
/// through every design phase; returns the drafts in phase order.
inline nlohmann::json drive_design_phases(control::Service& service, const std::string& project)
{
    auto const answers = case_study_answers();
    nlohmann::json drafts = nlohmann::json::array();
    for (auto const phase: design_phases())
    {
        auto const session = service.create_session(project, phase)["session_id"].get<std::string>();
        answer_all(service, project, session, answers.at(std::string(to_string(phase))));
        auto const draft = service.draft(project, session);
        auto const& artifact = draft["artifact"];
        auto const id = artifact["artifact_id"].get<std::string>();
        auto const version = artifact["version"].get<int>();
        service.approve(project, id, version, Verdict::approve, "", { Role::sme, "case-study-sme" });
        service.approve(project, id, version, Verdict::approve, "", { Role::developer, "case-study-dev" });
        service.advance(project);
        drafts.push_back(draft);
    }
    return drafts;
}

struct CaseStudyOutcome
{
    nlohmann::json drafts;
    nlohmann::json generation;
    nlohmann::json syntheticRun;
    nlohmann::json goldRun;
    nlohmann::json decision;
};

inline CaseStudyOutcome run_case_study(control::Service& service, const std::string& project = "case-study")
{
    CaseStudyOutcome out;
    service.create_project(project);
    out.drafts = drive_design_phases(service, project);
    out.generation = service.generate_benchmark(project, bench::load_corpus(fixtures_dir() / "corpus.jsonl"),
                                                "synthetic");
    service.put_benchmark(project, bench::load_benchmark(fixtures_dir() / "gold_benchmark.jsonl"));
    out.syntheticRun = service.run(project, "synthetic");
    out.goldRun = service.run(project, "gold-fixture");
    out.decision = service.two_gate(project, out.syntheticRun["run_id"].get<std::string>(),
                                    out.goldRun["run_id"].get<std::string>());
    return out;
}

} // namespace care::testing
