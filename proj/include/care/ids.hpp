// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <care/clock.hpp>

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <random>
#include <string>

namespace care
{

/// ULID-style identifiers: 26 Crockford base32 characters, 48-bit millisecond
/// timestamp followed by 80 random bits. Ids from one generator sort in
/// creation order (randomness is incremented within the same millisecond).
class UlidGenerator
{
public:
    explicit UlidGenerator(Clock clock = system_clock(), std::optional<std::uint64_t> seed = std::nullopt);

    std::string next();

private:
    std::mutex _mutex;
    Clock _clock;
    std::mt19937_64 _rng;
    std::uint64_t _lastMs = 0;
    std::array<std::uint8_t, 10> _random {};
};

bool is_ulid(std::string_view text) noexcept;

} // namespace care
