// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <care/service.hpp>

#include <filesystem>
#include <memory>
#include <string>
#include <thread>
#include <vector>

namespace care::control
{

/// Static bearer token with the role it grants.
struct TokenGrant
{
    std::string token;
    Role role = Role::developer;
    std::string actor;
};

/// `{"tokens": [{"token": "...", "role": "sme", "actor": "sam"}, ...]}`.
std::vector<TokenGrant> load_tokens(const std::filesystem::path& path);

/// JSON REST API over a Service, under `/api/v1`. Every route except
/// `GET /api/v1/health` needs `Authorization: Bearer <token>`. Errors are
/// `{"code", "message", "details"}` with the status of the error code.
class ApiServer
{
public:
    ApiServer(Service& service, std::vector<TokenGrant> tokens);
    ~ApiServer();

    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds `host:port` (port 0 picks a free port) and returns the port.
    /// Throws io_error when the address cannot be bound.
    int bind(const std::string& host, int port);

    /// Serves until stop(); call after bind().
    void listen();

    /// bind() then listen() on a background thread.
    int start(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> _impl;
    std::thread _thread;
};

} // namespace care::control
