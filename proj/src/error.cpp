// SPDX-License-Identifier: Apache-2.0
#include <care/error.hpp>

#include <array>
#include <utility>

namespace care
{

namespace
{

struct CodeInfo
{
    ErrorCode code;
    std::string_view name;
    int status;
};

constexpr auto codeTable = std::to_array<CodeInfo>({
    { ErrorCode::illegal_kind_for_phase, "illegal_kind_for_phase", 422 },
    { ErrorCode::empty_content, "empty_content", 422 },
    { ErrorCode::not_found, "not_found", 404 },
    { ErrorCode::stale_base, "stale_base", 409 },
    { ErrorCode::malformed_diff, "malformed_diff", 422 },
    { ErrorCode::diff_conflict, "diff_conflict", 409 },
    { ErrorCode::proposal_not_pending, "proposal_not_pending", 409 },
    { ErrorCode::helper_agent_cannot_approve, "helper_agent_cannot_approve", 403 },
    { ErrorCode::version_not_head, "version_not_head", 409 },
    { ErrorCode::artifact_rejected, "artifact_rejected", 409 },
    { ErrorCode::gate_not_satisfied, "gate_not_satisfied", 409 },
    { ErrorCode::already_at_final_phase, "already_at_final_phase", 409 },
    { ErrorCode::not_an_earlier_phase, "not_an_earlier_phase", 422 },
    { ErrorCode::already_exists, "already_exists", 409 },
    { ErrorCode::transport_failure, "transport_failure", 502 },
    { ErrorCode::template_violation, "template_violation", 422 },
    { ErrorCode::invalid_query, "invalid_query", 400 },
    { ErrorCode::network_error, "network_error", 502 },
    { ErrorCode::malformed_response, "malformed_response", 502 },
    { ErrorCode::tool_failure, "tool_failure", 502 },
    { ErrorCode::empty_expected_set, "empty_expected_set", 422 },
    { ErrorCode::empty_corpus, "empty_corpus", 422 },
    { ErrorCode::benchmark_mismatch, "benchmark_mismatch", 422 },
    { ErrorCode::fairness_violation, "fairness_violation", 422 },
    { ErrorCode::invalid_argument, "invalid_argument", 400 },
    { ErrorCode::io_error, "io_error", 500 },
    { ErrorCode::unauthorized, "unauthorized", 401 },
    { ErrorCode::forbidden, "forbidden", 403 },
});

const CodeInfo& lookup(ErrorCode code)
{
    for (const auto& info: codeTable)
        if (info.code == code)
            return info;
    return codeTable.back();
}

} // namespace

std::string_view to_string(ErrorCode code)
{
    return lookup(code).name;
}

ErrorCode error_code_from_string(std::string_view text)
{
    for (const auto& info: codeTable)
        if (info.name == text)
            return info.code;
    throw Error(ErrorCode::invalid_argument, "unknown error code: " + std::string(text));
}

int http_status(ErrorCode code)
{
    return lookup(code).status;
}

Error::Error(ErrorCode code, std::string message, nlohmann::json details):
    std::runtime_error(std::move(message)), _code(code), _details(std::move(details))
{
}

nlohmann::json Error::to_json() const
{
    return { { "code", std::string(to_string(_code)) }, { "message", what() }, { "details", _details } };
}

} // namespace care
