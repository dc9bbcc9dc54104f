// SPDX-License-Identifier: Apache-2.0
#include <care/benchmark.hpp>
#include <care/error.hpp>
#include <care/helper_agent.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

namespace care::bench
{

using nlohmann::json;

// ---------------------------------------------------------------------------
// Rational

namespace
{

using Wide = __int128;

Wide wide_gcd(Wide a, Wide b)
{
    if (a < 0)
        a = -a;
    while (b != 0)
    {
        auto const t = a % b;
        a = b;
        b = t;
    }
    return a;
}

Rational make_reduced(Wide num, Wide den)
{
    auto const g = wide_gcd(num, den);
    if (g > 1)
    {
        num /= g;
        den /= g;
    }
    constexpr Wide limit = std::numeric_limits<std::int64_t>::max();
    if (num > limit || den > limit)
        throw Error(ErrorCode::invalid_argument, "rational overflow");
    return { static_cast<std::int64_t>(num), static_cast<std::int64_t>(den) };
}

} // namespace

Rational::Rational(std::int64_t num, std::int64_t den): _num(num), _den(den)
{
    if (den <= 0 || num < 0)
        throw Error(ErrorCode::invalid_argument, "rational needs num >= 0 and den > 0");
    auto const g = std::gcd(num, den);
    if (g > 1)
    {
        _num /= g;
        _den /= g;
    }
}

std::string Rational::percent() const
{
    // tenths of a percent, half up: floor((1000 n / d) + 1/2)
    auto const tenths = (static_cast<Wide>(_num) * 2000 + _den) / (static_cast<Wide>(_den) * 2);
    auto const t = static_cast<std::int64_t>(tenths);
    return std::to_string(t / 10) + "." + std::to_string(t % 10);
}

Rational Rational::operator+(const Rational& other) const
{
    return make_reduced(static_cast<Wide>(_num) * other._den + static_cast<Wide>(other._num) * _den,
                        static_cast<Wide>(_den) * other._den);
}

Rational Rational::operator/(std::int64_t divisor) const
{
    if (divisor <= 0)
        throw Error(ErrorCode::invalid_argument, "division by a non-positive integer");
    return make_reduced(_num, static_cast<Wide>(_den) * divisor);
}

std::strong_ordering Rational::operator<=>(const Rational& other) const noexcept
{
    auto const lhs = static_cast<Wide>(_num) * other._den;
    auto const rhs = static_cast<Wide>(other._num) * _den;
    return lhs < rhs ? std::strong_ordering::less : lhs > rhs ? std::strong_ordering::greater : std::strong_ordering::equal;
}

json Rational::to_json() const
{
    return { { "num", _num }, { "den", _den }, { "value", to_double() } };
}

Rational Rational::from_json(const json& j)
{
    return { j.at("num").get<std::int64_t>(), j.at("den").get<std::int64_t>() };
}

Rational recall_at_k(const std::set<std::string>& expected, const std::vector<std::string>& retrieved, int k)
{
    if (expected.empty())
        throw Error(ErrorCode::empty_expected_set, "expected id set is empty");
    if (k < 1)
        throw Error(ErrorCode::invalid_argument, "k must be >= 1", { { "k", k } });
    std::set<std::string> seen;
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < retrieved.size(); ++i)
    {
        if (!seen.insert(retrieved[i]).second)
            throw Error(ErrorCode::invalid_argument, "retrieved list has duplicates", { { "id", retrieved[i] } });
        if (i < static_cast<std::size_t>(k) && expected.contains(retrieved[i]))
            ++hits;
    }
    return { hits, static_cast<std::int64_t>(expected.size()) };
}

// ---------------------------------------------------------------------------
// benchmark files

std::string_view to_string(Gate gate)
{
    return gate == Gate::gold ? "gold" : "synthetic";
}

Gate gate_from_string(std::string_view text)
{
    if (text == "synthetic")
        return Gate::synthetic;
    if (text == "gold")
        return Gate::gold;
    throw Error(ErrorCode::invalid_argument, "unknown gate: " + std::string(text));
}

void Benchmark::validate() const
{
    std::set<std::string> ids;
    for (const auto& q: queries)
    {
        if (q.queryId.empty())
            throw Error(ErrorCode::invalid_argument, "query without id");
        if (!ids.insert(q.queryId).second)
            throw Error(ErrorCode::invalid_argument, "duplicate query id " + q.queryId);
        if (q.expectedIds.empty())
            throw Error(ErrorCode::empty_expected_set, "query " + q.queryId + " has no expected ids");
        for (const auto& id: q.expectedIds)
            if (!cmr::validate_concept_id(id))
                throw Error(ErrorCode::invalid_argument, "query " + q.queryId + ": invalid concept id " + id);
        if (gate == Gate::synthetic && q.expectedIds.size() != 1)
            throw Error(ErrorCode::invalid_argument, "synthetic query " + q.queryId + " must target exactly one dataset");
    }
}

namespace
{

json query_to_json(const BenchmarkQuery& q)
{
    json j = { { "query_id", q.queryId }, { "text", q.text }, { "expected_ids", q.expectedIds } };
    if (q.sourceDoc)
        j["source_doc"] = *q.sourceDoc;
    json a = json::object();
    if (q.annotations.difficulty)
        a["difficulty"] = *q.annotations.difficulty;
    if (q.annotations.queryType)
        a["query_type"] = *q.annotations.queryType == QueryType::direct ? "direct" : "indirect";
    if (!a.empty())
        j["annotations"] = a;
    return j;
}

BenchmarkQuery query_from_json(const json& j)
{
    BenchmarkQuery q;
    q.queryId = j.at("query_id").get<std::string>();
    q.text = j.at("text").get<std::string>();
    for (const auto& id: j.at("expected_ids"))
        q.expectedIds.insert(id.get<std::string>());
    if (j.contains("source_doc") && !j["source_doc"].is_null())
        q.sourceDoc = j["source_doc"].get<std::string>();
    if (j.contains("annotations"))
    {
        const auto& a = j["annotations"];
        if (a.contains("difficulty") && !a["difficulty"].is_null())
            q.annotations.difficulty = a["difficulty"].get<int>();
        if (a.contains("query_type") && !a["query_type"].is_null())
        {
            auto const t = a["query_type"].get<std::string>();
            if (t != "direct" && t != "indirect")
                throw Error(ErrorCode::invalid_argument, "unknown query_type " + t);
            q.annotations.queryType = t == "direct" ? QueryType::direct : QueryType::indirect;
        }
    }
    return q;
}

} // namespace

json to_json(const Benchmark& benchmark)
{
    json queries = json::array();
    for (const auto& q: benchmark.queries)
        queries.push_back(query_to_json(q));
    return { { "name", benchmark.name }, { "gate", to_string(benchmark.gate) }, { "queries", queries } };
}

Benchmark benchmark_from_json(const json& j)
{
    Benchmark b;
    try
    {
        b.name = j.at("name").get<std::string>();
        b.gate = gate_from_string(j.value("gate", "gold"));
        for (const auto& q: j.at("queries"))
            b.queries.push_back(query_from_json(q));
    }
    catch (const json::exception& e)
    {
        throw Error(ErrorCode::invalid_argument, std::string("malformed benchmark: ") + e.what());
    }
    b.validate();
    return b;
}

Benchmark load_benchmark(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::not_found, "cannot read benchmark " + path.string());
    Benchmark b;
    b.name = path.stem().string();
    b.gate = Gate::gold;
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line))
    {
        ++lineNo;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try
        {
            auto const j = json::parse(line);
            if (j.contains("_meta"))
            {
                b.name = j["_meta"].value("name", b.name);
                b.gate = gate_from_string(j["_meta"].value("gate", "gold"));
                continue;
            }
            b.queries.push_back(query_from_json(j));
        }
        catch (const json::exception& e)
        {
            throw Error(ErrorCode::invalid_argument, path.string() + ":" + std::to_string(lineNo) + ": " + e.what());
        }
    }
    b.validate();
    return b;
}

void save_benchmark(const Benchmark& benchmark, const std::filesystem::path& path)
{
    benchmark.validate();
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << json { { "_meta", { { "name", benchmark.name }, { "gate", to_string(benchmark.gate) } } } }.dump() << '\n';
    for (const auto& q: benchmark.queries)
        out << query_to_json(q).dump() << '\n';
    if (!out)
        throw Error(ErrorCode::io_error, "cannot write benchmark " + path.string());
}

// ---------------------------------------------------------------------------
// evaluation

namespace
{

json recall_map_json(const std::map<int, Rational>& m)
{
    json j = json::object();
    for (const auto& [k, r]: m)
        j[std::to_string(k)] = r.to_json();
    return j;
}

std::map<int, Rational> recall_map_from_json(const json& j)
{
    std::map<int, Rational> m;
    for (const auto& [k, r]: j.items())
        m.emplace(std::stoi(k), Rational::from_json(r));
    return m;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first error.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn fn)
{
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    std::atomic<std::size_t> next = 0;
    std::exception_ptr failure;
    std::mutex failureMutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++)
        {
            try
            {
                fn(i);
            }
            catch (...)
            {
                auto lock = std::scoped_lock(failureMutex);
                if (!failure)
                    failure = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> threads;
    for (unsigned t = 1; t < workers; ++t)
        threads.emplace_back(worker);
    worker();
    for (auto& t: threads)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace

json EvaluationReport::to_json() const
{
    json queries = json::array();
    for (const auto& q: perQuery)
        queries.push_back({ { "query_id", q.queryId },
                            { "recall", recall_map_json(q.recall) },
                            { "ranked_ids", q.rankedIds },
                            { "partial", q.partial } });
    return { { "agent_name", agentName },
             { "benchmark_name", benchmarkName },
             { "gate", to_string(gate) },
             { "n", n() },
             { "ks", ks },
             { "mean_recall", recall_map_json(meanRecall) },
             { "per_query", queries },
             { "run_config", runConfig.to_json() },
             { "config_hash", runConfig.hash() },
             { "pre_gate", preGate } };
}

EvaluationReport EvaluationReport::from_json(const json& j)
{
    EvaluationReport r;
    r.agentName = j.at("agent_name").get<std::string>();
    r.benchmarkName = j.at("benchmark_name").get<std::string>();
    r.gate = gate_from_string(j.at("gate").get<std::string>());
    r.ks = j.at("ks").get<std::vector<int>>();
    r.meanRecall = recall_map_from_json(j.at("mean_recall"));
    for (const auto& q: j.at("per_query"))
        r.perQuery.push_back({ q.at("query_id").get<std::string>(), recall_map_from_json(q.at("recall")),
                               q.at("ranked_ids").get<std::vector<std::string>>(), q.value("partial", false) });
    r.runConfig = agent::RunConfig::from_json(j.at("run_config"));
    r.preGate = j.value("pre_gate", false);
    if (j.contains("n") && j["n"].get<std::size_t>() != r.perQuery.size())
        throw Error(ErrorCode::invalid_argument, "report n does not match per_query");
    return r;
}

std::map<int, Rational> mean_recall(const std::vector<QueryOutcome>& outcomes, const std::vector<int>& ks)
{
    std::map<int, Rational> means;
    for (int k: ks)
    {
        Rational sum;
        for (const auto& o: outcomes)
            sum = sum + o.recall.at(k);
        means[k] = outcomes.empty() ? Rational {} : sum / static_cast<std::int64_t>(outcomes.size());
    }
    return means;
}

EvaluationReport evaluate(const agent::AgentSpec& agent, const Benchmark& benchmark, ModelTransport& transport,
                          const cmr::CollectionSearch& cmr, const EvaluateOptions& options)
{
    benchmark.validate();
    if (options.ks.empty() || std::ranges::any_of(options.ks, [](int k) { return k < 1; }))
        throw Error(ErrorCode::invalid_argument, "ks must be non-empty and >= 1");
    auto ks = options.ks;
    std::ranges::sort(ks);
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    auto const kRetrieve = options.kRetrieve.value_or(ks.back());
    if (kRetrieve < ks.back())
        throw Error(ErrorCode::invalid_argument, "k_retrieve must be >= max(ks)");

    auto queries = benchmark.queries;
    std::ranges::sort(queries, {}, &BenchmarkQuery::queryId);

    std::vector<QueryOutcome> outcomes(queries.size());
    parallel_for(queries.size(), options.concurrency, [&](std::size_t i) {
        const auto& q = queries[i];
        auto const result = agent::run_query(agent, q.queryId, q.text, kRetrieve, transport, cmr);
        if (options.traceRoot)
            agent::write_trace(*options.traceRoot, options.runId, result);
        QueryOutcome o { q.queryId, {}, result.rankedIds, result.partial };
        for (int k: ks)
            o.recall[k] = recall_at_k(q.expectedIds, result.rankedIds, k);
        outcomes[i] = std::move(o);
    });

    EvaluationReport report;
    report.agentName = agent.name;
    report.benchmarkName = benchmark.name;
    report.gate = benchmark.gate;
    report.ks = ks;
    report.meanRecall = mean_recall(outcomes, ks);
    report.perQuery = std::move(outcomes);
    report.runConfig = agent::run_config(agent, transport, cmr, kRetrieve);
    report.preGate = options.preGate;
    return report;
}

PairedReports evaluate_pair(const agent::AgentSpec& care, const agent::AgentSpec& baseline,
                            const Benchmark& benchmark, ModelTransport& careTransport,
                            ModelTransport& baselineTransport, const cmr::CollectionSearch& cmr,
                            const EvaluateOptions& options)
{
    auto const ks = options.ks.empty() ? 0 : *std::ranges::max_element(options.ks);
    auto const k = options.kRetrieve.value_or(ks);
    agent::check_fairness(agent::run_config(care, careTransport, cmr, k),
                          agent::run_config(baseline, baselineTransport, cmr, k));
    // Traces of the two agents go to separate directories of the same run.
    auto careOptions = options;
    careOptions.runId = options.runId + "/" + care.name;
    auto baselineOptions = options;
    baselineOptions.runId = options.runId + "/" + baseline.name;
    return { evaluate(care, benchmark, careTransport, cmr, careOptions),
             evaluate(baseline, benchmark, baselineTransport, cmr, baselineOptions) };
}

// ---------------------------------------------------------------------------
// two-gate protocol

std::string_view to_string(SyntheticOutcome outcome)
{
    return outcome == SyntheticOutcome::proceed_to_gold ? "proceed_to_gold" : "revisit_design";
}

json TwoGateDecision::to_json() const
{
    json j = { { "synthetic_outcome", to_string(syntheticOutcome) }, { "gold_outcome", nullptr } };
    if (goldOutcome)
        j["gold_outcome"] = { { "primary_metric", goldOutcome->primaryK },
                              { "care_value", goldOutcome->careValue.to_json() },
                              { "baseline_value", goldOutcome->baselineValue.to_json() },
                              { "care_better", goldOutcome->careBetter } };
    return j;
}

namespace
{

std::vector<std::string> query_ids(const EvaluationReport& r)
{
    std::vector<std::string> ids;
    for (const auto& q: r.perQuery)
        ids.push_back(q.queryId);
    return ids;
}

void require_comparable(const EvaluationReport& care, const EvaluationReport& baseline)
{
    if (care.benchmarkName != baseline.benchmarkName || care.gate != baseline.gate
        || query_ids(care) != query_ids(baseline))
        throw Error(ErrorCode::benchmark_mismatch, "reports cover different benchmarks",
                    { { "care", care.benchmarkName }, { "baseline", baseline.benchmarkName } });
    agent::check_fairness(care.runConfig, baseline.runConfig);
}

const Rational& metric(const EvaluationReport& r, int k)
{
    auto it = r.meanRecall.find(k);
    if (it == r.meanRecall.end())
        throw Error(ErrorCode::invalid_argument,
                    "report for " + r.agentName + " has no Recall@" + std::to_string(k));
    return it->second;
}

} // namespace

TwoGateDecision two_gate(const EvaluationReport& careSynthetic, const EvaluationReport& baselineSynthetic,
                         const std::optional<EvaluationReport>& careGold,
                         const std::optional<EvaluationReport>& baselineGold, int goldPrimaryK)
{
    require_comparable(careSynthetic, baselineSynthetic);
    if (careGold.has_value() != baselineGold.has_value())
        throw Error(ErrorCode::invalid_argument, "gold reports must be given for both agents or neither");

    TwoGateDecision decision;
    decision.syntheticOutcome = metric(careSynthetic, 1) >= metric(baselineSynthetic, 1)
                                    ? SyntheticOutcome::proceed_to_gold
                                    : SyntheticOutcome::revisit_design;
    if (decision.syntheticOutcome == SyntheticOutcome::proceed_to_gold && careGold)
    {
        require_comparable(*careGold, *baselineGold);
        GoldOutcome gold;
        gold.primaryK = goldPrimaryK;
        gold.careValue = metric(*careGold, goldPrimaryK);
        gold.baselineValue = metric(*baselineGold, goldPrimaryK);
        gold.careBetter = gold.careValue > gold.baselineValue;
        decision.goldOutcome = gold;
    }
    return decision;
}

// ---------------------------------------------------------------------------
// rendering

std::string gate_label(const EvaluationReport& report)
{
    std::string label = report.gate == Gate::gold ? "Gold" : "Synthetic";
    label += " (n=" + std::to_string(report.n());
    if (report.preGate)
        label += ", pre-gate";
    return label + ")";
}

namespace
{

std::string row(const std::string& label, const EvaluationReport& r, const std::vector<int>& ks)
{
    std::string out = label + "\t" + r.agentName;
    for (int k: ks)
        out += "\t" + metric(r, k).percent() + "%";
    return out + "\n";
}

} // namespace

std::string render_report(const EvaluationReport& care, const EvaluationReport& baseline, const std::string& gateLabel)
{
    return row(gateLabel, care, care.ks) + row("", baseline, care.ks);
}

std::string render_two_gate_table(const EvaluationReport& careSynthetic, const EvaluationReport& baselineSynthetic,
                                  const std::optional<EvaluationReport>& careGold,
                                  const std::optional<EvaluationReport>& baselineGold)
{
    std::string out = "Gate\tAgent";
    for (int k: careSynthetic.ks)
        out += "\tRecall@" + std::to_string(k);
    out += "\n" + render_report(careSynthetic, baselineSynthetic, gate_label(careSynthetic));
    if (careGold && baselineGold)
        out += render_report(*careGold, *baselineGold, gate_label(*careGold));
    return out;
}

// ---------------------------------------------------------------------------
// synthetic generation

std::vector<CorpusDocument> load_corpus(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::not_found, "cannot read corpus " + path.string());
    std::vector<CorpusDocument> docs;
    std::string line;
    while (std::getline(in, line))
    {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        auto const j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("doc_id") || !j.contains("text"))
            throw Error(ErrorCode::invalid_argument, "malformed corpus line in " + path.string());
        CorpusDocument d { j["doc_id"].get<std::string>(), j["text"].get<std::string>(), {} };
        for (const auto& id: j.value("cited_ids", json::array()))
            d.citedIds.insert(id.get<std::string>());
        docs.push_back(std::move(d));
    }
    return docs;
}

json Discard::to_json() const
{
    return { { "doc_id", docId }, { "cited_id", citedId }, { "reason", reason }, { "attempts", attempts } };
}

void write_discards(const std::vector<Discard>& discards, const std::filesystem::path& path)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& d: discards)
        out << d.to_json().dump() << '\n';
}

bool query_retrieves(const cmr::CollectionSearch& cmr, const std::string& queryText, const std::string& conceptId,
                     int pageSize)
{
    if (queryText.find_first_not_of(" \t\r\n") == std::string::npos)
        return false;
    cmr::CollectionQuery query;
    query.keyword = queryText;
    query.pageSize = pageSize;
    auto const records = cmr.search(query);
    return std::ranges::any_of(records, [&](const auto& r) { return r.conceptId == conceptId; });
}

namespace
{

std::string first_line(std::string text)
{
    auto const first = text.find_first_not_of(" \t\r\n\"");
    if (first == std::string::npos)
        return {};
    text.erase(0, first);
    text = text.substr(0, text.find('\n'));
    while (!text.empty() && (text.back() == ' ' || text.back() == '\r' || text.back() == '"'))
        text.pop_back();
    return text;
}

struct Candidate
{
    const CorpusDocument* doc;
    std::string citedId;
    std::optional<BenchmarkQuery> query;
    std::optional<Discard> discard;
};

} // namespace

GenerationResult generate_synthetic(const std::vector<CorpusDocument>& corpus, ModelTransport& transport,
                                    const cmr::CollectionSearch& cmr, const GenerationOptions& options)
{
    if (corpus.empty())
        throw Error(ErrorCode::empty_corpus, "corpus has no documents");
    if (options.maxAttempts < 1)
        throw Error(ErrorCode::invalid_argument, "max_attempts must be >= 1");
    std::vector<Candidate> candidates;
    for (const auto& doc: corpus)
    {
        if (doc.citedIds.empty())
            throw Error(ErrorCode::invalid_argument, "document " + doc.docId + " cites no dataset");
        for (const auto& id: doc.citedIds)
        {
            if (!cmr::validate_concept_id(id))
                throw Error(ErrorCode::invalid_argument, "document " + doc.docId + " cites invalid id " + id);
            candidates.push_back({ &doc, id, std::nullopt, std::nullopt });
        }
    }
    std::ranges::sort(candidates, [](const Candidate& a, const Candidate& b) {
        return std::tie(a.doc->docId, a.citedId) < std::tie(b.doc->docId, b.citedId);
    });

    const auto& module = helper_prompt_module("draft_query");
    const auto& reformulate = helper_prompt_module("reformulate_query");
    parallel_for(candidates.size(), options.concurrency, [&](std::size_t i) {
        auto& c = candidates[i];
        ModelRequest request;
        request.systemText = module.system_text();
        json const payload = { { "task", "draft_query" },
                               { "doc_id", c.doc->docId },
                               { "text", c.doc->text },
                               { "cited_id", c.citedId } };
        request.messages.push_back({ "user", "Draft a data request grounded in this document.\n\n```json\n"
                                                 + payload.dump(2) + "\n```\n" });
        for (int attempt = 1; attempt <= options.maxAttempts; ++attempt)
        {
            auto const text = first_line(transport.complete(request));
            if (query_retrieves(cmr, text, c.citedId, options.pageSize))
            {
                c.query = BenchmarkQuery { "syn-" + c.doc->docId + "-" + c.citedId, text, { c.citedId }, c.doc->docId, {} };
                return;
            }
            request.messages.push_back({ "assistant", text });
            request.messages.push_back({ "user", reformulate.text });
        }
        c.discard = Discard { c.doc->docId, c.citedId, "not_retrieved", options.maxAttempts };
    });

    GenerationResult result;
    result.benchmark.name = options.name;
    result.benchmark.gate = Gate::synthetic;
    for (auto& c: candidates)
    {
        if (c.query)
            result.benchmark.queries.push_back(std::move(*c.query));
        else
            result.discards.push_back(std::move(*c.discard));
    }
    result.benchmark.validate();
    return result;
}

} // namespace care::bench
