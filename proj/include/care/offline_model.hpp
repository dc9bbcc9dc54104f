// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <care/text.hpp>
#include <care/transport.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace care
{

/// Deterministic stand-in for a chat model. Every response is a pure function
/// of the request, so runs through it are reproducible without network access.
///
/// Helper tasks are recognized by their JSON payload. Requests without one are
/// treated as agent turns: the model issues one `search_collections` call
/// built from the user request, then answers with the concept ids the tool
/// returned. A system prompt containing `Search strategy: keywords` makes the
/// model search with the request's content words instead of its full text;
/// `Broaden on empty: yes` allows a second, shorter search after an empty one.
class OfflineModel: public ModelTransport
{
public:
    static constexpr std::string_view kIdentity = "offline-model/1";
    static constexpr int kPageSize = 10;

    std::string complete(const ModelRequest& request) override;
    [[nodiscard]] std::string identity() const override { return std::string(kIdentity); }
};

} // namespace care
