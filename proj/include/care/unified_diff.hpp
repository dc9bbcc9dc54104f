// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace care
{

/// Line-oriented unified diffs over artifact content.
///
/// Lines are compared byte-for-byte including a missing final newline, which
/// is written with the usual `\ No newline at end of file` marker, so
/// `apply_unified_diff(a, make_unified_diff(a, b)) == b` for every pair.
/// Application is strict: hunks must match at their stated position with no
/// fuzz, otherwise the diff is rejected.
namespace diff
{

struct Hunk
{
    int oldStart = 0; // 1-based, 0 when oldCount == 0
    int oldCount = 0;
    int newStart = 0;
    int newCount = 0;
    /// Each entry is a prefix char (' ', '-', '+') followed by the line body.
    /// A body without trailing '\n' marks the last line of a file lacking one.
    std::vector<std::string> lines;
};

struct Patch
{
    std::string oldName;
    std::string newName;
    std::vector<Hunk> hunks;
};

/// Splits into lines, each keeping its terminating '\n' (the last may lack it).
std::vector<std::string> split_lines(std::string_view text);

std::string make_unified_diff(std::string_view oldText, std::string_view newText,
                              std::string_view name = "artifact.md", int context = 3);

/// Throws Error{malformed_diff} on syntax problems.
Patch parse_unified_diff(std::string_view diffText);

/// Throws Error{malformed_diff} for unparsable text and Error{diff_conflict}
/// when a hunk does not match `oldText`.
std::string apply_unified_diff(std::string_view oldText, std::string_view diffText);

} // namespace diff

} // namespace care
