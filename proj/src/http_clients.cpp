// SPDX-License-Identifier: Apache-2.0
// Network-facing clients built on cpp-httplib.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <care/cmr_client.hpp>
#include <care/error.hpp>
#include <care/transport.hpp>

namespace care
{

namespace
{

struct SplitUrl
{
    std::string origin; // scheme://host[:port]
    std::string prefix; // path prefix without trailing slash
};

SplitUrl split_url(const std::string& url)
{
    auto const scheme = url.find("://");
    if (scheme == std::string::npos)
        throw Error(ErrorCode::invalid_argument, "URL needs a scheme: " + url);
    auto const slash = url.find('/', scheme + 3);
    SplitUrl out { url.substr(0, slash), slash == std::string::npos ? "" : url.substr(slash) };
    while (!out.prefix.empty() && out.prefix.back() == '/')
        out.prefix.pop_back();
    return out;
}

std::unique_ptr<httplib::Client> make_client(const std::string& origin, std::chrono::seconds timeout)
{
    auto client = std::make_unique<httplib::Client>(origin);
    client->set_connection_timeout(timeout);
    client->set_read_timeout(timeout);
    client->set_write_timeout(timeout);
    client->set_follow_location(true);
    return client;
}

} // namespace

HttpChatTransport::HttpChatTransport(Config config): _config(std::move(config))
{
    split_url(_config.baseUrl);
}

std::string HttpChatTransport::identity() const
{
    return "http:" + _config.baseUrl + "#" + _config.model;
}

std::string HttpChatTransport::complete(const ModelRequest& request)
{
    nlohmann::json messages = nlohmann::json::array();
    messages.push_back({ { "role", "system" }, { "content", request.systemText } });
    for (const auto& m: request.messages)
    {
        if (m.role == "tool")
            messages.push_back({ { "role", "user" }, { "content", "Tool result:\n" + m.text } });
        else
            messages.push_back({ { "role", m.role }, { "content", m.text } });
    }
    nlohmann::json body = { { "model", _config.model }, { "messages", messages }, { "temperature", request.temperature } };
    if (request.seed)
        body["seed"] = *request.seed;

    auto const url = split_url(_config.baseUrl);
    auto client = make_client(url.origin, _config.timeout);
    httplib::Headers headers;
    if (!_config.apiKey.empty())
        headers.emplace("Authorization", "Bearer " + _config.apiKey);
    auto const result = client->Post(url.prefix + "/v1/chat/completions", headers, body.dump(), "application/json");
    if (!result)
        throw Error(ErrorCode::network_error, "chat completion request failed: " + httplib::to_string(result.error()));
    if (result->status != 200)
        throw Error(ErrorCode::network_error, "chat completion returned HTTP " + std::to_string(result->status),
                    { { "status", result->status } });
    auto const j = nlohmann::json::parse(result->body, nullptr, false);
    try
    {
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    }
    catch (const nlohmann::json::exception&)
    {
        throw Error(ErrorCode::malformed_response, "chat completion response has no message content");
    }
}

namespace cmr
{

HttpGet make_https_getter(const std::string& baseUrl, std::chrono::seconds timeout)
{
    auto const url = split_url(baseUrl);
    return [url, timeout](const std::string& target) {
        auto client = make_client(url.origin, timeout);
        auto const result = client->Get(url.prefix + target, { { "Accept", "application/json" } });
        if (!result)
            throw Error(ErrorCode::network_error, "CMR request failed: " + httplib::to_string(result.error()),
                        { { "target", target } });
        return HttpResponse { result->status, result->body };
    };
}

} // namespace cmr

} // namespace care
