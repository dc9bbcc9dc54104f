// SPDX-License-Identifier: Apache-2.0
#include <care/ids.hpp>

#include <algorithm>

namespace care
{

namespace
{

constexpr std::string_view crockford = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";

} // namespace

UlidGenerator::UlidGenerator(Clock clock, std::optional<std::uint64_t> seed):
    _clock(std::move(clock)), _rng(seed ? *seed : std::random_device {}())
{
}

std::string UlidGenerator::next()
{
    auto lock = std::scoped_lock(_mutex);
    auto const now = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(_clock().time_since_epoch()).count());

    if (now > _lastMs)
    {
        _lastMs = now;
        for (auto& byte: _random)
            byte = static_cast<std::uint8_t>(_rng() & 0xFF);
        _random[0] &= 0x7F; // leave headroom for same-millisecond increments
    }
    else
    {
        for (auto i = _random.size(); i-- > 0;)
            if (++_random[i] != 0)
                break;
    }

    // 128 bits: 48 time + 80 random, encoded as 26 base32 digits (130 bits, top 2 zero).
    std::array<std::uint8_t, 16> bytes {};
    for (int i = 0; i < 6; ++i)
        bytes[i] = static_cast<std::uint8_t>((_lastMs >> (8 * (5 - i))) & 0xFF);
    std::ranges::copy(_random, bytes.begin() + 6);

    std::string out(26, '0');
    unsigned __int128 value = 0;
    for (auto b: bytes)
        value = (value << 8) | b;
    for (int i = 25; i >= 0; --i)
    {
        out[static_cast<std::size_t>(i)] = crockford[static_cast<std::size_t>(value & 0x1F)];
        value >>= 5;
    }
    return out;
}

bool is_ulid(std::string_view text) noexcept
{
    return text.size() == 26 && std::ranges::all_of(text, [](char c) { return crockford.find(c) != std::string_view::npos; });
}

} // namespace care
