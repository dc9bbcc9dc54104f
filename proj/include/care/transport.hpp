// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace care
{

struct ModelMessage
{
    std::string role; // user | assistant | tool
    std::string text;

    bool operator==(const ModelMessage&) const = default;
};

struct ModelRequest
{
    std::string systemText;
    std::vector<ModelMessage> messages;
    double temperature = 0.0;
    std::optional<std::int64_t> seed = 0;

    /// Canonical JSON serialization; two requests are the same call iff their
    /// canonical bytes are equal.
    [[nodiscard]] std::string canonical_bytes() const;
    [[nodiscard]] std::string hash() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static ModelRequest from_json(const nlohmann::json& j);
};

/// Text-completion transport behind every model call. Implementations must be
/// safe for concurrent use.
class ModelTransport
{
public:
    virtual ~ModelTransport() = default;

    /// Throws Error{transport_failure}.
    virtual std::string complete(const ModelRequest& request) = 0;

    /// Stable description of the model endpoint; equal identities mean
    /// "same model access".
    [[nodiscard]] virtual std::string identity() const = 0;
};

/// Mock transport backed by a pure function of the request.
class FunctionTransport: public ModelTransport
{
public:
    using Handler = std::function<std::string(const ModelRequest&)>;

    FunctionTransport(std::string identity, Handler handler);

    std::string complete(const ModelRequest& request) override;
    [[nodiscard]] std::string identity() const override { return _identity; }

private:
    std::string _identity;
    Handler _handler;
};

struct CassetteEntry
{
    std::string requestHash;
    nlohmann::json request;
    std::string response;
};

/// Record/replay wrapper. The cassette is JSON-lines of
/// `{request_hash, request, response}`; replay looks responses up by hash.
class CassetteTransport: public ModelTransport
{
public:
    enum class Mode
    {
        record,
        replay,
    };

    /// Replay from a cassette file.
    static std::shared_ptr<CassetteTransport> replay(const std::filesystem::path& cassette);
    /// Record every call to `inner` into `cassette` (appending; existing
    /// entries are served without calling `inner`).
    static std::shared_ptr<CassetteTransport> record(std::shared_ptr<ModelTransport> inner,
                                                     const std::filesystem::path& cassette);

    std::string complete(const ModelRequest& request) override;
    [[nodiscard]] std::string identity() const override;

    [[nodiscard]] Mode mode() const noexcept { return _mode; }
    [[nodiscard]] std::size_t size() const;

private:
    CassetteTransport(Mode mode, std::shared_ptr<ModelTransport> inner, std::filesystem::path path);

    Mode _mode;
    std::shared_ptr<ModelTransport> _inner;
    std::filesystem::path _path;
    mutable std::mutex _mutex;
    std::map<std::string, std::string> _responses;
};

std::vector<CassetteEntry> load_cassette(const std::filesystem::path& path);

struct RetryPolicy
{
    int retries = 2;
    std::chrono::milliseconds initialBackoff { 200 };
    std::chrono::milliseconds maxBackoff { 2000 };
};

/// Retries a failing transport with capped exponential backoff, then throws
/// transport_failure.
class RetryingTransport: public ModelTransport
{
public:
    using Policy = RetryPolicy;
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    RetryingTransport(std::shared_ptr<ModelTransport> inner, Policy policy = {}, Sleeper sleeper = {});

    std::string complete(const ModelRequest& request) override;
    [[nodiscard]] std::string identity() const override { return _inner->identity(); }

private:
    std::shared_ptr<ModelTransport> _inner;
    Policy _policy;
    Sleeper _sleeper;
};

/// OpenAI-compatible chat-completions endpoint (`POST <base>/v1/chat/completions`).
class HttpChatTransport: public ModelTransport
{
public:
    struct Config
    {
        std::string baseUrl; // e.g. https://api.example.com
        std::string model;
        std::string apiKey;
        std::chrono::seconds timeout { 120 };
    };

    explicit HttpChatTransport(Config config);

    std::string complete(const ModelRequest& request) override;
    [[nodiscard]] std::string identity() const override;

private:
    Config _config;
};

} // namespace care
