// SPDX-License-Identifier: Apache-2.0
#include <care/elicitation.hpp>
#include <care/ids.hpp>
#include <care/templates.hpp>
#include <care/unified_diff.hpp>

#include <algorithm>
#include <cctype>

namespace care
{

namespace
{

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::optional<std::string> section_heading(std::string_view line)
{
    line = trim(line);
    if (line.starts_with("## ") && !line.starts_with("###"))
        return std::string(trim(line.substr(3)));
    return std::nullopt;
}

std::optional<std::string_view> bullet_body(std::string_view line)
{
    auto const t = trim(line);
    if (t.starts_with("- ") || t.starts_with("* "))
        return trim(t.substr(2));
    // ordered list: digits followed by ". "
    std::size_t i = 0;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i])))
        ++i;
    if (i > 0 && i + 1 < t.size() && t[i] == '.' && t[i + 1] == ' ')
        return trim(t.substr(i + 2));
    return std::nullopt;
}

} // namespace

std::string_view template_title(ArtifactKind kind)
{
    switch (kind)
    {
        case ArtifactKind::scope_spec: return "Scope Specification";
        case ArtifactKind::tools_spec: return "Tools Specification";
        case ArtifactKind::context_spec: return "Context Specification";
        case ArtifactKind::output_format_spec: return "Output Format Specification";
        case ArtifactKind::guardrails_spec: return "Guardrails Specification";
        case ArtifactKind::reasoning_policy: return "Reasoning Policy";
        case ArtifactKind::prompt_architecture: return "Prompt Architecture";
        case ArtifactKind::benchmark_requirements: return "Benchmark Requirements";
    }
    return "Artifact";
}

std::vector<std::string> template_sections(ArtifactKind kind)
{
    std::vector<std::string> out;
    for (const auto& d: dimension_checklist(phase_of(kind)))
        out.push_back(d.heading);
    return out;
}

std::string template_skeleton(ArtifactKind kind)
{
    std::string out = "# " + std::string(template_title(kind)) + "\n";
    for (const auto& section: template_sections(kind))
        out += "\n## " + section + "\n";
    return out;
}

std::map<std::string, std::string> split_sections(std::string_view content)
{
    std::map<std::string, std::string> out;
    std::optional<std::string> current;
    for (const auto& line: diff::split_lines(content))
    {
        if (auto heading = section_heading(line))
        {
            current = *heading;
            out[*current];
            continue;
        }
        if (current)
            out[*current] += line;
    }
    return out;
}

std::vector<std::string> missing_sections(ArtifactKind kind, std::string_view content)
{
    auto const present = split_sections(content);
    std::vector<std::string> missing;
    for (const auto& section: template_sections(kind))
        if (!present.contains(section))
            missing.push_back(section);
    return missing;
}

bool is_entry_ref(std::string_view ref) noexcept
{
    return ref.size() >= 6 && ref.starts_with("e-")
           && std::ranges::all_of(ref.substr(2), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

bool is_artifact_ref(std::string_view ref) noexcept
{
    return ref.starts_with("art:") && is_ulid(ref.substr(4));
}

std::optional<std::vector<std::string>> parse_provenance_annotation(std::string_view line, std::string* stripped)
{
    auto t = trim(line);
    if (!t.ends_with(']'))
        return std::nullopt;
    auto const open = t.rfind('[');
    if (open == std::string_view::npos)
        return std::nullopt;

    std::vector<std::string> refs;
    auto inner = t.substr(open + 1, t.size() - open - 2);
    while (!inner.empty())
    {
        auto const comma = inner.find(',');
        auto const ref = trim(inner.substr(0, comma));
        if (!is_entry_ref(ref) && !is_artifact_ref(ref))
            return std::nullopt;
        refs.emplace_back(ref);
        if (comma == std::string_view::npos)
            break;
        inner.remove_prefix(comma + 1);
    }
    if (refs.empty())
        return std::nullopt;
    if (stripped)
        *stripped = std::string(trim(t.substr(0, open)));
    return refs;
}

std::vector<MarkdownBullet> parse_bullets(std::string_view content)
{
    std::vector<MarkdownBullet> out;
    std::optional<std::string> current;
    int lineNo = 0;
    for (const auto& line: diff::split_lines(content))
    {
        ++lineNo;
        if (auto heading = section_heading(line))
        {
            current = *heading;
            continue;
        }
        if (!current)
            continue;
        auto const body = bullet_body(line);
        if (!body)
            continue;
        MarkdownBullet bullet;
        bullet.section = *current;
        bullet.line = lineNo;
        std::string stripped;
        if (auto refs = parse_provenance_annotation(*body, &stripped))
        {
            bullet.refs = std::move(*refs);
            bullet.text = std::move(stripped);
        }
        else
            bullet.text = std::string(*body);
        out.push_back(std::move(bullet));
    }
    return out;
}

std::string format_provenance(const std::vector<std::string>& refs)
{
    std::string out = "[";
    for (std::size_t i = 0; i < refs.size(); ++i)
    {
        if (i > 0)
            out += ", ";
        out += refs[i];
    }
    return out + "]";
}

} // namespace care
