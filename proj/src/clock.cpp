// SPDX-License-Identifier: Apache-2.0
#include <care/clock.hpp>
#include <care/error.hpp>

#include <cstdio>
#include <ctime>
#include <memory>
#include <mutex>

namespace care
{

Clock system_clock()
{
    return [] { return std::chrono::system_clock::now(); };
}

Clock stepping_clock(TimePoint start, std::chrono::milliseconds step)
{
    struct State
    {
        std::mutex mutex;
        TimePoint next;
    };
    auto state = std::make_shared<State>();
    state->next = start;
    return [state, step] {
        auto lock = std::scoped_lock(state->mutex);
        auto const now = state->next;
        state->next += step;
        return now;
    };
}

std::string format_rfc3339(TimePoint tp)
{
    auto const ms = std::chrono::duration_cast<std::chrono::milliseconds>(tp.time_since_epoch()).count();
    auto secs = static_cast<std::time_t>(ms / 1000);
    auto millis = static_cast<int>(ms % 1000);
    if (millis < 0)
    {
        millis += 1000;
        --secs;
    }
    std::tm utc {};
    gmtime_r(&secs, &utc);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", utc.tm_year + 1900, utc.tm_mon + 1,
                  utc.tm_mday, utc.tm_hour, utc.tm_min, utc.tm_sec, millis);
    return buf;
}

TimePoint parse_rfc3339(const std::string& text)
{
    std::tm utc {};
    int millis = 0;
    int const n = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ", &utc.tm_year, &utc.tm_mon, &utc.tm_mday,
                              &utc.tm_hour, &utc.tm_min, &utc.tm_sec, &millis);
    if (n < 6)
        throw Error(ErrorCode::invalid_argument, "not an RFC 3339 timestamp: " + text);
    utc.tm_year -= 1900;
    utc.tm_mon -= 1;
    auto const secs = timegm(&utc);
    return TimePoint(std::chrono::seconds(secs)) + std::chrono::milliseconds(millis);
}

} // namespace care
