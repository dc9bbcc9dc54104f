// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>
#include <string_view>

namespace care
{

/// Closed set of machine-readable error codes shared by every module and
/// surfaced verbatim by the HTTP API and the CLI.
enum class ErrorCode
{
    illegal_kind_for_phase,
    empty_content,
    not_found,
    stale_base,
    malformed_diff,
    diff_conflict,
    proposal_not_pending,
    helper_agent_cannot_approve,
    version_not_head,
    artifact_rejected,
    gate_not_satisfied,
    already_at_final_phase,
    not_an_earlier_phase,
    already_exists,
    transport_failure,
    template_violation,
    invalid_query,
    network_error,
    malformed_response,
    tool_failure,
    empty_expected_set,
    empty_corpus,
    benchmark_mismatch,
    fairness_violation,
    invalid_argument,
    io_error,
    unauthorized,
    forbidden,
};

std::string_view to_string(ErrorCode code);
ErrorCode error_code_from_string(std::string_view text);

/// HTTP status used when this code crosses the API boundary.
int http_status(ErrorCode code);

class Error: public std::runtime_error
{
public:
    Error(ErrorCode code, std::string message, nlohmann::json details = nlohmann::json::object());

    [[nodiscard]] ErrorCode code() const noexcept { return _code; }
    [[nodiscard]] const nlohmann::json& details() const noexcept { return _details; }

    /// `{"code": ..., "message": ..., "details": ...}`
    [[nodiscard]] nlohmann::json to_json() const;

private:
    ErrorCode _code;
    nlohmann::json _details;
};

} // namespace care
