// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace care::cmr
{

/// `C` + digits + `-` + provider token (uppercase alphanumerics and `_`).
bool validate_concept_id(std::string_view text) noexcept;

struct TemporalRange
{
    std::string start; // ISO 8601 date or date-time
    std::string end;

    bool operator==(const TemporalRange&) const = default;
};

struct CollectionQuery
{
    std::string keyword;
    std::optional<std::string> provider;
    std::optional<TemporalRange> temporal;
    int pageSize = 10;
    int pageNum = 1;

    /// Throws invalid_query.
    void validate() const;

    /// `/search/collections.json?...` request target, parameters in a fixed order.
    [[nodiscard]] std::string request_target() const;

    [[nodiscard]] nlohmann::json to_json() const;
    static CollectionQuery from_json(const nlohmann::json& j);

    bool operator==(const CollectionQuery&) const = default;
};

struct CollectionRecord
{
    std::string conceptId;
    std::string shortName;
    std::string title;
    std::string summary;
    std::string provider;

    [[nodiscard]] nlohmann::json to_json() const;
    static CollectionRecord from_json(const nlohmann::json& j);

    bool operator==(const CollectionRecord&) const = default;
};

/// Collection search backend. Implementations are safe for concurrent use.
class CollectionSearch
{
public:
    virtual ~CollectionSearch() = default;

    /// Validates the query, then searches. Throws invalid_query,
    /// network_error or malformed_response. An empty result is not an error.
    virtual std::vector<CollectionRecord> search(const CollectionQuery& query) const = 0;

    /// Stable description of the catalog; equal identities mean "same tool access".
    [[nodiscard]] virtual std::string identity() const = 0;
};

/// In-memory catalog ranked by keyword overlap: the score of a record is the
/// number of distinct query tokens that occur among the tokens of its short
/// name, title and summary. Records scoring 0 are excluded; ties break by
/// concept id ascending. Temporal filters are accepted but not applied (the
/// catalog carries no coverage dates).
class FixtureCatalog: public CollectionSearch
{
public:
    explicit FixtureCatalog(std::vector<CollectionRecord> records);

    /// JSON-lines of CollectionRecord objects. Throws io_error / malformed_response.
    static std::shared_ptr<FixtureCatalog> load(const std::filesystem::path& path);

    std::vector<CollectionRecord> search(const CollectionQuery& query) const override;
    [[nodiscard]] std::string identity() const override { return _identity; }

    [[nodiscard]] const std::vector<CollectionRecord>& records() const noexcept { return _records; }
    [[nodiscard]] const CollectionRecord* find(std::string_view conceptId) const;

    /// Overlap score of one record for a keyword string.
    static int score(const CollectionRecord& record, std::string_view keyword);

private:
    std::vector<CollectionRecord> _records;
    std::vector<std::vector<std::string>> _tokens; // sorted, unique per record
    std::string _identity;
};

struct HttpResponse
{
    int status = 0;
    std::string body;
};

/// Performs `GET <target>` against the CMR host. Throws network_error.
using HttpGet = std::function<HttpResponse(const std::string& target)>;

/// Maps a `collections.json` response body. Throws malformed_response.
std::vector<CollectionRecord> parse_collections_feed(std::string_view body);

/// Live CMR collection search (`GET /search/collections.json`), throttled to
/// one request per `minInterval`.
class LiveCmr: public CollectionSearch
{
public:
    struct Config
    {
        std::string baseUrl = "https://cmr.earthdata.nasa.gov";
        std::chrono::milliseconds minInterval { 500 };
        std::chrono::seconds timeout { 30 };
    };

    explicit LiveCmr(Config config);
    /// Custom HTTP layer, e.g. a cassette.
    LiveCmr(Config config, HttpGet get);

    std::vector<CollectionRecord> search(const CollectionQuery& query) const override;
    [[nodiscard]] std::string identity() const override;

private:
    Config _config;
    HttpGet _get;
    mutable std::mutex _throttle;
    mutable std::chrono::steady_clock::time_point _lastRequest {};
};

/// Record/replay of raw CMR HTTP exchanges as JSON-lines
/// `{target, status, body}`. Replay never touches the network.
class HttpCassette: public std::enable_shared_from_this<HttpCassette>
{
public:
    static std::shared_ptr<HttpCassette> replay(const std::filesystem::path& path);
    static std::shared_ptr<HttpCassette> record(HttpGet inner, const std::filesystem::path& path);

    HttpResponse get(const std::string& target);
    /// Callable that keeps the cassette alive.
    [[nodiscard]] HttpGet getter();
    [[nodiscard]] std::size_t size() const;

private:
    HttpCassette(HttpGet inner, std::filesystem::path path, bool recording);

    HttpGet _inner;
    std::filesystem::path _path;
    bool _recording;
    mutable std::mutex _mutex;
    std::map<std::string, HttpResponse> _exchanges;
};

/// Default HTTP layer used by LiveCmr (cpp-httplib, HTTPS).
HttpGet make_https_getter(const std::string& baseUrl, std::chrono::seconds timeout);

} // namespace care::cmr
