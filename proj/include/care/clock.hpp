// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <functional>
#include <string>

namespace care
{

using TimePoint = std::chrono::system_clock::time_point;
using Clock = std::function<TimePoint()>;

Clock system_clock();

/// Deterministic clock that advances by `step` on every call.
Clock stepping_clock(TimePoint start, std::chrono::milliseconds step = std::chrono::milliseconds(1));

/// RFC 3339 UTC with millisecond precision, e.g. `2026-01-05T10:00:00.000Z`.
std::string format_rfc3339(TimePoint tp);
TimePoint parse_rfc3339(const std::string& text);

} // namespace care
