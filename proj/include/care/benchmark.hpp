// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <care/agent_runtime.hpp>
#include <care/cmr_client.hpp>
#include <care/transport.hpp>

#include <nlohmann/json.hpp>

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace care::bench
{

/// Exact non-negative fraction, always reduced.
class Rational
{
public:
    Rational() = default;
    Rational(std::int64_t num, std::int64_t den);

    [[nodiscard]] std::int64_t num() const noexcept { return _num; }
    [[nodiscard]] std::int64_t den() const noexcept { return _den; }
    [[nodiscard]] double to_double() const noexcept { return static_cast<double>(_num) / static_cast<double>(_den); }

    /// Percentage with one decimal, rounded half up: 445/621 -> "71.7".
    [[nodiscard]] std::string percent() const;

    Rational operator+(const Rational& other) const;
    Rational operator/(std::int64_t divisor) const;
    bool operator==(const Rational& other) const noexcept = default;
    std::strong_ordering operator<=>(const Rational& other) const noexcept;

    [[nodiscard]] nlohmann::json to_json() const;
    static Rational from_json(const nlohmann::json& j);

private:
    std::int64_t _num = 0;
    std::int64_t _den = 1;
};

/// |E ∩ first_k(T)| / |E|. Throws empty_expected_set; invalid_argument when
/// k < 1 or T has duplicates.
Rational recall_at_k(const std::set<std::string>& expected, const std::vector<std::string>& retrieved, int k);

enum class Gate : std::uint8_t
{
    synthetic,
    gold,
};

std::string_view to_string(Gate gate);
Gate gate_from_string(std::string_view text);

enum class QueryType : std::uint8_t
{
    direct,
    indirect,
};

struct Annotations
{
    std::optional<int> difficulty;
    std::optional<QueryType> queryType;

    bool operator==(const Annotations&) const = default;
};

struct BenchmarkQuery
{
    std::string queryId;
    std::string text;
    std::set<std::string> expectedIds;
    std::optional<std::string> sourceDoc;
    Annotations annotations;

    bool operator==(const BenchmarkQuery&) const = default;
};

struct Benchmark
{
    std::string name;
    Gate gate = Gate::synthetic;
    std::vector<BenchmarkQuery> queries;

    /// Throws invalid_argument / empty_expected_set on invariant violations.
    void validate() const;

    bool operator==(const Benchmark&) const = default;
};

/// `{"name", "gate", "queries": [...]}` with queries in the file format.
nlohmann::json to_json(const Benchmark& benchmark);
Benchmark benchmark_from_json(const nlohmann::json& j);

/// JSON-lines: an optional first line `{"_meta": {"name", "gate"}}`, then one
/// query object per line. Without the meta line the name is the file stem
/// and the gate is gold.
Benchmark load_benchmark(const std::filesystem::path& path);
void save_benchmark(const Benchmark& benchmark, const std::filesystem::path& path);

struct QueryOutcome
{
    std::string queryId;
    std::map<int, Rational> recall;
    std::vector<std::string> rankedIds;
    bool partial = false;
};

struct EvaluationReport
{
    std::string agentName;
    std::string benchmarkName;
    Gate gate = Gate::synthetic;
    std::vector<int> ks;
    std::map<int, Rational> meanRecall;
    std::vector<QueryOutcome> perQuery; // ascending query_id
    agent::RunConfig runConfig;
    /// Run before the project's benchmark-requirements gate was passed.
    bool preGate = false;

    [[nodiscard]] std::size_t n() const noexcept { return perQuery.size(); }

    [[nodiscard]] nlohmann::json to_json() const;
    static EvaluationReport from_json(const nlohmann::json& j);
};

/// Per-query mean over `outcomes` for each k, folded in the order given.
std::map<int, Rational> mean_recall(const std::vector<QueryOutcome>& outcomes, const std::vector<int>& ks);

struct EvaluateOptions
{
    std::vector<int> ks { 1, 3, 5 };
    /// Defaults to max(ks).
    std::optional<int> kRetrieve;
    unsigned concurrency = 4;
    bool preGate = false;
    /// When set, traces go to `<traceRoot>/runs/<runId>/<query_id>.jsonl`.
    std::optional<std::filesystem::path> traceRoot;
    std::string runId = "run";
};

EvaluationReport evaluate(const agent::AgentSpec& agent, const Benchmark& benchmark, ModelTransport& transport,
                          const cmr::CollectionSearch& cmr, const EvaluateOptions& options = {});

struct PairedReports
{
    EvaluationReport care;
    EvaluationReport baseline;
};

/// Evaluates both agents on the same benchmark. Their run configs are
/// compared first; any difference throws fairness_violation before a single
/// model call is made.
PairedReports evaluate_pair(const agent::AgentSpec& care, const agent::AgentSpec& baseline,
                            const Benchmark& benchmark, ModelTransport& careTransport,
                            ModelTransport& baselineTransport, const cmr::CollectionSearch& cmr,
                            const EvaluateOptions& options = {});

enum class SyntheticOutcome : std::uint8_t
{
    proceed_to_gold,
    revisit_design,
};

std::string_view to_string(SyntheticOutcome outcome);

struct GoldOutcome
{
    int primaryK = 5;
    Rational careValue;
    Rational baselineValue;
    bool careBetter = false;
};

struct TwoGateDecision
{
    SyntheticOutcome syntheticOutcome = SyntheticOutcome::revisit_design;
    std::optional<GoldOutcome> goldOutcome;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Throws benchmark_mismatch when paired reports cover different benchmarks
/// and fairness_violation when their run configs differ.
TwoGateDecision two_gate(const EvaluationReport& careSynthetic, const EvaluationReport& baselineSynthetic,
                         const std::optional<EvaluationReport>& careGold = std::nullopt,
                         const std::optional<EvaluationReport>& baselineGold = std::nullopt, int goldPrimaryK = 5);

/// "Synthetic (n=621)"; pre-gate runs are marked.
std::string gate_label(const EvaluationReport& report);

/// Rows for one gate, tab separated, CARE agent first:
/// `<label>\t<agent>\t71.7%\t83.6%\t85.2%` then `\t<agent>\t...`.
std::string render_report(const EvaluationReport& care, const EvaluationReport& baseline, const std::string& gateLabel);

/// Header plus the synthetic rows and, when given, the gold rows.
std::string render_two_gate_table(const EvaluationReport& careSynthetic, const EvaluationReport& baselineSynthetic,
                                  const std::optional<EvaluationReport>& careGold = std::nullopt,
                                  const std::optional<EvaluationReport>& baselineGold = std::nullopt);

// ---------------------------------------------------------------------------
// synthetic generation

struct CorpusDocument
{
    std::string docId;
    std::string text;
    std::set<std::string> citedIds;
};

/// JSON-lines of `{doc_id, text, cited_ids}`.
std::vector<CorpusDocument> load_corpus(const std::filesystem::path& path);

struct Discard
{
    std::string docId;
    std::string citedId;
    std::string reason;
    int attempts = 0;

    [[nodiscard]] nlohmann::json to_json() const;
};

struct GenerationOptions
{
    std::string name = "synthetic";
    int maxAttempts = 5;
    int pageSize = 10;
    unsigned concurrency = 4;
};

struct GenerationResult
{
    Benchmark benchmark;
    std::vector<Discard> discards;
};

/// Drafts one query per (document, cited id) with the model, then searches
/// and reformulates until the cited dataset is retrieved or the attempts run
/// out. Throws empty_corpus, invalid_argument, transport_failure.
GenerationResult generate_synthetic(const std::vector<CorpusDocument>& corpus, ModelTransport& transport,
                                    const cmr::CollectionSearch& cmr, const GenerationOptions& options = {});

/// The validation search used during generation.
bool query_retrieves(const cmr::CollectionSearch& cmr, const std::string& queryText, const std::string& conceptId,
                     int pageSize);

void write_discards(const std::vector<Discard>& discards, const std::filesystem::path& path);

} // namespace care::bench
