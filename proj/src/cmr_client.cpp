// SPDX-License-Identifier: Apache-2.0
#include <care/cmr_client.hpp>
#include <care/digest.hpp>
#include <care/error.hpp>
#include <care/text.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <thread>

namespace care::cmr
{

using nlohmann::json;

bool validate_concept_id(std::string_view text) noexcept
{
    if (text.size() < 4 || text[0] != 'C')
        return false;
    std::size_t i = 1;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])))
        ++i;
    if (i == 1 || i >= text.size() || text[i] != '-')
        return false;
    ++i;
    if (i == text.size())
        return false;
    for (; i < text.size(); ++i)
    {
        auto const c = text[i];
        if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_'))
            return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// query / record

void CollectionQuery::validate() const
{
    if (pageSize < 1 || pageSize > 2000)
        throw Error(ErrorCode::invalid_query, "page_size must be in [1, 2000]", { { "page_size", pageSize } });
    if (pageNum < 1)
        throw Error(ErrorCode::invalid_query, "page_num must be >= 1", { { "page_num", pageNum } });
    bool const blankKeyword = keyword.find_first_not_of(" \t\r\n") == std::string::npos;
    if (blankKeyword && !provider && !temporal)
        throw Error(ErrorCode::invalid_query, "keyword is required when no other filter is given");
    if (provider && provider->empty())
        throw Error(ErrorCode::invalid_query, "provider must not be empty");
    if (temporal && (temporal->start.empty() || temporal->end.empty()))
        throw Error(ErrorCode::invalid_query, "temporal range needs a start and an end");
}

namespace
{

std::string url_encode(std::string_view text)
{
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c: text)
    {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~')
            out += static_cast<char>(c);
        else
        {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 15];
        }
    }
    return out;
}

} // namespace

std::string CollectionQuery::request_target() const
{
    std::string target = "/search/collections.json?";
    if (!keyword.empty())
        target += "keyword=" + url_encode(keyword) + "&";
    if (provider)
        target += "provider=" + url_encode(*provider) + "&";
    if (temporal)
        target += "temporal=" + url_encode(temporal->start + "," + temporal->end) + "&";
    target += "page_size=" + std::to_string(pageSize) + "&page_num=" + std::to_string(pageNum);
    return target;
}

json CollectionQuery::to_json() const
{
    json j = { { "keyword", keyword }, { "page_size", pageSize }, { "page_num", pageNum } };
    if (provider)
        j["provider"] = *provider;
    if (temporal)
        j["temporal"] = { { "start", temporal->start }, { "end", temporal->end } };
    return j;
}

CollectionQuery CollectionQuery::from_json(const json& j)
{
    CollectionQuery q;
    try
    {
        q.keyword = j.value("keyword", "");
        if (j.contains("provider") && !j["provider"].is_null())
            q.provider = j["provider"].get<std::string>();
        if (j.contains("temporal") && !j["temporal"].is_null())
        {
            const auto& t = j["temporal"];
            if (t.is_string())
            {
                auto const s = t.get<std::string>();
                auto const comma = s.find(',');
                q.temporal = TemporalRange { s.substr(0, comma), comma == std::string::npos ? "" : s.substr(comma + 1) };
            }
            else
                q.temporal = TemporalRange { t.at("start").get<std::string>(), t.at("end").get<std::string>() };
        }
        q.pageSize = j.value("page_size", 10);
        q.pageNum = j.value("page_num", 1);
    }
    catch (const json::exception& e)
    {
        throw Error(ErrorCode::invalid_query, std::string("malformed query: ") + e.what());
    }
    return q;
}

json CollectionRecord::to_json() const
{
    return { { "concept_id", conceptId }, { "short_name", shortName }, { "title", title },
             { "summary", summary },      { "provider", provider } };
}

CollectionRecord CollectionRecord::from_json(const json& j)
{
    CollectionRecord r;
    r.conceptId = j.at("concept_id").get<std::string>();
    r.shortName = j.value("short_name", "");
    r.title = j.value("title", "");
    r.summary = j.value("summary", "");
    r.provider = j.value("provider", "");
    if (!validate_concept_id(r.conceptId))
        throw Error(ErrorCode::malformed_response, "invalid concept id " + r.conceptId);
    return r;
}

// ---------------------------------------------------------------------------
// fixture catalog

namespace
{

std::vector<std::string> sorted_unique_tokens(std::string_view text)
{
    auto tokens = word_tokens(text);
    std::ranges::sort(tokens);
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    return tokens;
}

std::vector<std::string> record_tokens(const CollectionRecord& r)
{
    return sorted_unique_tokens(r.shortName + " " + r.title + " " + r.summary);
}

int overlap(const std::vector<std::string>& queryTokens, const std::vector<std::string>& recordTokens)
{
    int n = 0;
    for (const auto& t: queryTokens)
        if (std::ranges::binary_search(recordTokens, t))
            ++n;
    return n;
}

} // namespace

FixtureCatalog::FixtureCatalog(std::vector<CollectionRecord> records): _records(std::move(records))
{
    std::ranges::sort(_records, {}, &CollectionRecord::conceptId);
    std::string canonical;
    for (std::size_t i = 0; i < _records.size(); ++i)
    {
        if (!validate_concept_id(_records[i].conceptId))
            throw Error(ErrorCode::malformed_response, "invalid concept id " + _records[i].conceptId);
        if (i > 0 && _records[i].conceptId == _records[i - 1].conceptId)
            throw Error(ErrorCode::malformed_response, "duplicate concept id " + _records[i].conceptId);
        _tokens.push_back(record_tokens(_records[i]));
        canonical += _records[i].to_json().dump() + "\n";
    }
    _identity = "fixture:" + sha256_hex(canonical).substr(0, 16);
}

std::shared_ptr<FixtureCatalog> FixtureCatalog::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io_error, "cannot read catalog " + path.string());
    std::vector<CollectionRecord> records;
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line))
    {
        ++lineNo;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try
        {
            records.push_back(CollectionRecord::from_json(json::parse(line)));
        }
        catch (const json::exception& e)
        {
            throw Error(ErrorCode::malformed_response, path.string() + ":" + std::to_string(lineNo) + ": " + e.what());
        }
    }
    return std::make_shared<FixtureCatalog>(std::move(records));
}

const CollectionRecord* FixtureCatalog::find(std::string_view conceptId) const
{
    auto it = std::ranges::lower_bound(_records, conceptId, {}, &CollectionRecord::conceptId);
    return it != _records.end() && it->conceptId == conceptId ? &*it : nullptr;
}

int FixtureCatalog::score(const CollectionRecord& record, std::string_view keyword)
{
    return overlap(sorted_unique_tokens(keyword), record_tokens(record));
}

std::vector<CollectionRecord> FixtureCatalog::search(const CollectionQuery& query) const
{
    query.validate();
    auto const queryTokens = sorted_unique_tokens(query.keyword);
    bool const ranked = !queryTokens.empty();

    std::vector<std::pair<int, std::size_t>> hits; // (-score, index); index order == concept id order
    for (std::size_t i = 0; i < _records.size(); ++i)
    {
        if (query.provider && _records[i].provider != *query.provider)
            continue;
        int const s = ranked ? overlap(queryTokens, _tokens[i]) : 0;
        if (ranked && s == 0)
            continue;
        hits.emplace_back(-s, i);
    }
    std::ranges::sort(hits);

    std::vector<CollectionRecord> out;
    auto const first = static_cast<std::size_t>(query.pageNum - 1) * static_cast<std::size_t>(query.pageSize);
    for (std::size_t i = first; i < hits.size() && out.size() < static_cast<std::size_t>(query.pageSize); ++i)
        out.push_back(_records[hits[i].second]);
    return out;
}

// ---------------------------------------------------------------------------
// live

std::vector<CollectionRecord> parse_collections_feed(std::string_view body)
{
    auto const j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("feed") || !j["feed"].is_object())
        throw Error(ErrorCode::malformed_response, "response is not a CMR collections feed");
    const auto& feed = j["feed"];
    if (!feed.contains("entry"))
        return {};
    if (!feed["entry"].is_array())
        throw Error(ErrorCode::malformed_response, "feed.entry is not an array");

    std::vector<CollectionRecord> out;
    for (const auto& e: feed["entry"])
    {
        if (!e.is_object() || !e.contains("id") || !e["id"].is_string())
            throw Error(ErrorCode::malformed_response, "feed entry without id");
        CollectionRecord r;
        r.conceptId = e["id"].get<std::string>();
        r.shortName = e.value("short_name", "");
        r.title = e.value("title", e.value("dataset_id", ""));
        r.summary = e.value("summary", "");
        r.provider = e.value("data_center", "");
        if (!validate_concept_id(r.conceptId))
            throw Error(ErrorCode::malformed_response, "invalid concept id in feed: " + r.conceptId);
        out.push_back(std::move(r));
    }
    return out;
}

LiveCmr::LiveCmr(Config config): LiveCmr(config, make_https_getter(config.baseUrl, config.timeout))
{
}

LiveCmr::LiveCmr(Config config, HttpGet get): _config(std::move(config)), _get(std::move(get))
{
}

std::string LiveCmr::identity() const
{
    return "cmr:" + _config.baseUrl;
}

std::vector<CollectionRecord> LiveCmr::search(const CollectionQuery& query) const
{
    query.validate();
    {
        auto lock = std::scoped_lock(_throttle);
        auto const now = std::chrono::steady_clock::now();
        if (_lastRequest.time_since_epoch().count() != 0 && now - _lastRequest < _config.minInterval)
            std::this_thread::sleep_for(_config.minInterval - (now - _lastRequest));
        _lastRequest = std::chrono::steady_clock::now();
    }
    auto const target = query.request_target();
    auto const response = _get(target);
    if (response.status != 200)
        throw Error(ErrorCode::network_error, "CMR returned HTTP " + std::to_string(response.status),
                    { { "status", response.status }, { "target", target } });
    auto records = parse_collections_feed(response.body);
    if (records.size() > static_cast<std::size_t>(query.pageSize))
        records.resize(static_cast<std::size_t>(query.pageSize));
    return records;
}

// ---------------------------------------------------------------------------
// cassette

HttpCassette::HttpCassette(HttpGet inner, std::filesystem::path path, bool recording):
    _inner(std::move(inner)), _path(std::move(path)), _recording(recording)
{
    std::ifstream in(_path, std::ios::binary);
    if (!in)
    {
        if (!_recording)
            throw Error(ErrorCode::io_error, "cassette not found: " + _path.string());
        return;
    }
    std::string line;
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        auto const j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("target"))
            throw Error(ErrorCode::io_error, "malformed cassette line in " + _path.string());
        _exchanges[j["target"].get<std::string>()] = { j.value("status", 200), j.value("body", "") };
    }
}

std::shared_ptr<HttpCassette> HttpCassette::replay(const std::filesystem::path& path)
{
    return std::shared_ptr<HttpCassette>(new HttpCassette(nullptr, path, false));
}

std::shared_ptr<HttpCassette> HttpCassette::record(HttpGet inner, const std::filesystem::path& path)
{
    return std::shared_ptr<HttpCassette>(new HttpCassette(std::move(inner), path, true));
}

HttpResponse HttpCassette::get(const std::string& target)
{
    {
        auto lock = std::scoped_lock(_mutex);
        if (auto it = _exchanges.find(target); it != _exchanges.end())
            return it->second;
        if (!_recording)
            throw Error(ErrorCode::network_error, "no recorded CMR response for " + target, { { "target", target } });
    }
    auto response = _inner(target);
    auto lock = std::scoped_lock(_mutex);
    if (_exchanges.emplace(target, response).second)
    {
        if (_path.has_parent_path())
            std::filesystem::create_directories(_path.parent_path());
        std::ofstream out(_path, std::ios::app | std::ios::binary);
        out << json { { "target", target }, { "status", response.status }, { "body", response.body } }.dump() << '\n';
    }
    return response;
}

HttpGet HttpCassette::getter()
{
    return [self = shared_from_this()](const std::string& target) { return self->get(target); };
}

std::size_t HttpCassette::size() const
{
    auto lock = std::scoped_lock(_mutex);
    return _exchanges.size();
}

} // namespace care::cmr
