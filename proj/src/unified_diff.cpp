// SPDX-License-Identifier: Apache-2.0
#include <care/error.hpp>
#include <care/unified_diff.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>

namespace care::diff
{

namespace
{

constexpr std::string_view noNewlineMarker = "\\ No newline at end of file";

enum class Op : std::uint8_t
{
    equal,
    remove,
    insert,
};

struct Edit
{
    Op op;
    std::size_t oldIndex; // valid for equal/remove
    std::size_t newIndex; // valid for equal/insert
};

// LCS over the region left after trimming the common prefix and suffix.
std::vector<Edit> edit_script(const std::vector<std::string>& a, const std::vector<std::string>& b)
{
    std::size_t prefix = 0;
    while (prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix])
        ++prefix;
    std::size_t suffix = 0;
    while (suffix < a.size() - prefix && suffix < b.size() - prefix
           && a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix])
        ++suffix;

    auto const n = a.size() - prefix - suffix;
    auto const m = b.size() - prefix - suffix;

    // table[i][j] = LCS length of a[prefix+i..] and b[prefix+j..]
    std::vector<std::uint32_t> table((n + 1) * (m + 1), 0);
    auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return table[i * (m + 1) + j]; };
    for (auto i = n; i-- > 0;)
        for (auto j = m; j-- > 0;)
            at(i, j) = a[prefix + i] == b[prefix + j] ? at(i + 1, j + 1) + 1 : std::max(at(i + 1, j), at(i, j + 1));

    std::vector<Edit> edits;
    edits.reserve(a.size() + b.size());
    for (std::size_t i = 0; i < prefix; ++i)
        edits.push_back({ Op::equal, i, i });

    std::size_t i = 0;
    std::size_t j = 0;
    while (i < n || j < m)
    {
        if (i < n && j < m && a[prefix + i] == b[prefix + j])
        {
            edits.push_back({ Op::equal, prefix + i, prefix + j });
            ++i;
            ++j;
        }
        else if (j < m && (i == n || at(i, j + 1) > at(i + 1, j)))
        {
            edits.push_back({ Op::insert, prefix + i, prefix + j });
            ++j;
        }
        else
        {
            edits.push_back({ Op::remove, prefix + i, prefix + j });
            ++i;
        }
    }

    for (std::size_t k = 0; k < suffix; ++k)
        edits.push_back({ Op::equal, prefix + n + k, prefix + m + k });
    return edits;
}

void append_line(std::string& out, char prefix, const std::string& line)
{
    out += prefix;
    if (!line.empty() && line.back() == '\n')
        out += line;
    else
    {
        out += line;
        out += '\n';
        out += noNewlineMarker;
        out += '\n';
    }
}

int parse_int(std::string_view text)
{
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc {} || ptr != text.data() + text.size() || value < 0)
        throw Error(ErrorCode::malformed_diff, "bad number in hunk header: " + std::string(text));
    return value;
}

// "a,b" or "a" (count defaults to 1)
std::pair<int, int> parse_range(std::string_view text)
{
    auto const comma = text.find(',');
    if (comma == std::string_view::npos)
        return { parse_int(text), 1 };
    return { parse_int(text.substr(0, comma)), parse_int(text.substr(comma + 1)) };
}

Hunk parse_hunk_header(std::string_view line)
{
    // @@ -a,b +c,d @@ optional section text
    if (!line.starts_with("@@ -"))
        throw Error(ErrorCode::malformed_diff, "expected hunk header: " + std::string(line));
    auto const close = line.find(" @@", 3);
    if (close == std::string_view::npos)
        throw Error(ErrorCode::malformed_diff, "unterminated hunk header: " + std::string(line));
    auto const ranges = line.substr(4, close - 4);
    auto const plus = ranges.find(" +");
    if (plus == std::string_view::npos)
        throw Error(ErrorCode::malformed_diff, "missing new range: " + std::string(line));

    Hunk hunk;
    std::tie(hunk.oldStart, hunk.oldCount) = parse_range(ranges.substr(0, plus));
    std::tie(hunk.newStart, hunk.newCount) = parse_range(ranges.substr(plus + 2));
    return hunk;
}

void check_counts(const Hunk& hunk)
{
    int oldSeen = 0;
    int newSeen = 0;
    for (const auto& line: hunk.lines)
    {
        if (line[0] != '+')
            ++oldSeen;
        if (line[0] != '-')
            ++newSeen;
    }
    if (oldSeen != hunk.oldCount || newSeen != hunk.newCount)
        throw Error(ErrorCode::malformed_diff, "hunk line counts do not match header");
}

} // namespace

std::vector<std::string> split_lines(std::string_view text)
{
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size())
    {
        auto const nl = text.find('\n', start);
        if (nl == std::string_view::npos)
        {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, nl - start + 1));
        start = nl + 1;
    }
    return lines;
}

std::string make_unified_diff(std::string_view oldText, std::string_view newText, std::string_view name, int context)
{
    auto const a = split_lines(oldText);
    auto const b = split_lines(newText);
    auto const edits = edit_script(a, b);

    if (std::ranges::all_of(edits, [](const Edit& e) { return e.op == Op::equal; }))
        return {};

    std::string out;
    out += "--- a/";
    out += name;
    out += "\n+++ b/";
    out += name;
    out += '\n';

    auto const ctx = static_cast<std::size_t>(std::max(context, 0));
    std::size_t k = 0;
    while (k < edits.size())
    {
        // find next change
        while (k < edits.size() && edits[k].op == Op::equal)
            ++k;
        if (k == edits.size())
            break;

        auto begin = k >= ctx ? k - ctx : 0;
        auto end = k;
        // extend while changes are within 2*ctx of each other
        while (end < edits.size())
        {
            if (edits[end].op != Op::equal)
            {
                ++end;
                continue;
            }
            auto run = end;
            while (run < edits.size() && edits[run].op == Op::equal)
                ++run;
            if (run == edits.size() || run - end > 2 * ctx)
            {
                end = std::min(end + ctx, edits.size());
                break;
            }
            end = run;
        }

        int oldCount = 0;
        int newCount = 0;
        for (auto i = begin; i < end; ++i)
        {
            if (edits[i].op != Op::insert)
                ++oldCount;
            if (edits[i].op != Op::remove)
                ++newCount;
        }
        auto const oldFirst = static_cast<int>(edits[begin].oldIndex);
        auto const newFirst = static_cast<int>(edits[begin].newIndex);
        auto const oldStart = oldCount == 0 ? oldFirst : oldFirst + 1;
        auto const newStart = newCount == 0 ? newFirst : newFirst + 1;

        out += "@@ -" + std::to_string(oldStart) + "," + std::to_string(oldCount) + " +" + std::to_string(newStart)
               + "," + std::to_string(newCount) + " @@\n";
        for (auto i = begin; i < end; ++i)
        {
            switch (edits[i].op)
            {
                case Op::equal: append_line(out, ' ', a[edits[i].oldIndex]); break;
                case Op::remove: append_line(out, '-', a[edits[i].oldIndex]); break;
                case Op::insert: append_line(out, '+', b[edits[i].newIndex]); break;
            }
        }
        k = end;
    }
    return out;
}

Patch parse_unified_diff(std::string_view diffText)
{
    Patch patch;
    auto const lines = split_lines(diffText);
    std::size_t i = 0;

    auto body = [](const std::string& line) {
        return std::string_view(line).substr(0, line.size() - (line.ends_with('\n') ? 1 : 0));
    };

    while (i < lines.size() && !body(lines[i]).starts_with("@@"))
    {
        auto const text = body(lines[i]);
        if (text.starts_with("--- "))
            patch.oldName = std::string(text.substr(4));
        else if (text.starts_with("+++ "))
            patch.newName = std::string(text.substr(4));
        else if (!text.empty() && !text.starts_with("diff ") && !text.starts_with("index "))
            throw Error(ErrorCode::malformed_diff, "unexpected line before first hunk: " + std::string(text));
        ++i;
    }

    while (i < lines.size())
    {
        auto hunk = parse_hunk_header(body(lines[i]));
        ++i;
        while (i < lines.size() && !body(lines[i]).starts_with("@@"))
        {
            auto const text = body(lines[i]);
            if (text == noNewlineMarker)
            {
                if (hunk.lines.empty() || !hunk.lines.back().ends_with('\n'))
                    throw Error(ErrorCode::malformed_diff, "misplaced no-newline marker");
                hunk.lines.back().pop_back();
            }
            else if (text.empty())
            {
                if (i + 1 == lines.size())
                    break; // trailing blank line after the last hunk
                hunk.lines.emplace_back(" \n");
            }
            else if (text[0] == ' ' || text[0] == '-' || text[0] == '+')
                hunk.lines.push_back(std::string(text) + '\n');
            else
                throw Error(ErrorCode::malformed_diff, "unexpected line in hunk: " + std::string(text));
            ++i;
        }
        check_counts(hunk);
        patch.hunks.push_back(std::move(hunk));
    }
    return patch;
}

std::string apply_unified_diff(std::string_view oldText, std::string_view diffText)
{
    auto const patch = parse_unified_diff(diffText);
    auto const old = split_lines(oldText);

    std::string out;
    std::size_t cursor = 0;
    for (const auto& hunk: patch.hunks)
    {
        auto const start = static_cast<std::size_t>(hunk.oldCount == 0 ? hunk.oldStart : hunk.oldStart - 1);
        if (hunk.oldCount > 0 && hunk.oldStart == 0)
            throw Error(ErrorCode::malformed_diff, "hunk starts at line 0");
        if (start < cursor)
            throw Error(ErrorCode::malformed_diff, "overlapping or unordered hunks");
        if (start > old.size())
            throw Error(ErrorCode::diff_conflict, "hunk starts past end of content");

        for (; cursor < start; ++cursor)
            out += old[cursor];

        for (const auto& line: hunk.lines)
        {
            auto const text = std::string_view(line).substr(1);
            if (line[0] == '+')
            {
                out += text;
                continue;
            }
            if (cursor >= old.size() || old[cursor] != text)
                throw Error(ErrorCode::diff_conflict,
                            "hunk does not match content at line " + std::to_string(cursor + 1));
            if (line[0] == ' ')
                out += text;
            ++cursor;
        }
    }
    for (; cursor < old.size(); ++cursor)
        out += old[cursor];
    return out;
}

} // namespace care::diff
