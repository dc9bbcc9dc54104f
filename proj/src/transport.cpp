// SPDX-License-Identifier: Apache-2.0
#include <care/digest.hpp>
#include <care/error.hpp>
#include <care/transport.hpp>

#include <algorithm>
#include <fstream>
#include <thread>

namespace care
{

using nlohmann::json;

nlohmann::json ModelRequest::to_json() const
{
    json messagesJson = json::array();
    for (const auto& m: messages)
        messagesJson.push_back({ { "role", m.role }, { "text", m.text } });
    return { { "system_text", systemText },
             { "messages", messagesJson },
             { "temperature", temperature },
             { "seed", seed ? json(*seed) : json(nullptr) } };
}

ModelRequest ModelRequest::from_json(const nlohmann::json& j)
{
    ModelRequest r;
    r.systemText = j.at("system_text").get<std::string>();
    for (const auto& m: j.at("messages"))
        r.messages.push_back({ m.at("role").get<std::string>(), m.at("text").get<std::string>() });
    r.temperature = j.value("temperature", 0.0);
    if (j.contains("seed") && !j["seed"].is_null())
        r.seed = j["seed"].get<std::int64_t>();
    else
        r.seed = std::nullopt;
    return r;
}

std::string ModelRequest::canonical_bytes() const
{
    // nlohmann::json objects are key-sorted, so dump() is canonical.
    return to_json().dump();
}

std::string ModelRequest::hash() const
{
    return sha256_hex(canonical_bytes());
}

// ---------------------------------------------------------------------------

FunctionTransport::FunctionTransport(std::string identity, Handler handler):
    _identity(std::move(identity)), _handler(std::move(handler))
{
}

std::string FunctionTransport::complete(const ModelRequest& request)
{
    return _handler(request);
}

// ---------------------------------------------------------------------------

std::vector<CassetteEntry> load_cassette(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io_error, "cannot read cassette " + path.string());
    std::vector<CassetteEntry> entries;
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line))
    {
        ++lineNo;
        if (line.empty())
            continue;
        try
        {
            auto const j = json::parse(line);
            entries.push_back({ j.at("request_hash").get<std::string>(), j.at("request"),
                                j.at("response").get<std::string>() });
        }
        catch (const json::exception& e)
        {
            throw Error(ErrorCode::io_error, path.string() + ":" + std::to_string(lineNo) + ": " + e.what());
        }
    }
    return entries;
}

CassetteTransport::CassetteTransport(Mode mode, std::shared_ptr<ModelTransport> inner, std::filesystem::path path):
    _mode(mode), _inner(std::move(inner)), _path(std::move(path))
{
    if (std::filesystem::exists(_path))
        for (auto& entry: load_cassette(_path))
            _responses.emplace(entry.requestHash, std::move(entry.response));
    else if (_mode == Mode::replay)
        throw Error(ErrorCode::io_error, "cassette not found: " + _path.string());
}

std::shared_ptr<CassetteTransport> CassetteTransport::replay(const std::filesystem::path& cassette)
{
    return std::shared_ptr<CassetteTransport>(new CassetteTransport(Mode::replay, nullptr, cassette));
}

std::shared_ptr<CassetteTransport> CassetteTransport::record(std::shared_ptr<ModelTransport> inner,
                                                             const std::filesystem::path& cassette)
{
    return std::shared_ptr<CassetteTransport>(new CassetteTransport(Mode::record, std::move(inner), cassette));
}

std::string CassetteTransport::complete(const ModelRequest& request)
{
    auto const hash = request.hash();
    {
        auto lock = std::scoped_lock(_mutex);
        if (auto it = _responses.find(hash); it != _responses.end())
            return it->second;
        if (_mode == Mode::replay)
            throw Error(ErrorCode::transport_failure, "no cassette entry for request " + hash,
                        { { "request_hash", hash } });
    }

    auto response = _inner->complete(request);

    auto lock = std::scoped_lock(_mutex);
    if (_responses.emplace(hash, response).second)
    {
        if (_path.has_parent_path())
            std::filesystem::create_directories(_path.parent_path());
        std::ofstream out(_path, std::ios::app | std::ios::binary);
        out << json { { "request_hash", hash }, { "request", request.to_json() }, { "response", response } }.dump()
            << '\n';
        if (!out)
            throw Error(ErrorCode::io_error, "cannot append to cassette " + _path.string());
    }
    return response;
}

std::string CassetteTransport::identity() const
{
    // Recording is transparent; replay stands in for whatever was recorded.
    if (_mode == Mode::record)
        return _inner->identity();
    return "cassette:" + _path.filename().string();
}

std::size_t CassetteTransport::size() const
{
    auto lock = std::scoped_lock(_mutex);
    return _responses.size();
}

// ---------------------------------------------------------------------------

RetryingTransport::RetryingTransport(std::shared_ptr<ModelTransport> inner, Policy policy, Sleeper sleeper):
    _inner(std::move(inner)), _policy(policy), _sleeper(std::move(sleeper))
{
    if (!_sleeper)
        _sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string RetryingTransport::complete(const ModelRequest& request)
{
    auto backoff = _policy.initialBackoff;
    std::string lastError;
    for (int attempt = 0; attempt <= _policy.retries; ++attempt)
    {
        if (attempt > 0)
        {
            _sleeper(backoff);
            backoff = std::min(backoff * 2, _policy.maxBackoff);
        }
        try
        {
            return _inner->complete(request);
        }
        catch (const std::exception& e)
        {
            lastError = e.what();
        }
    }
    throw Error(ErrorCode::transport_failure,
                "model call failed after " + std::to_string(_policy.retries + 1) + " attempts: " + lastError,
                { { "attempts", _policy.retries + 1 } });
}

} // namespace care
