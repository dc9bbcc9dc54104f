// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <care/phases.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace care
{

/// Document title used as the `# ` heading of an artifact kind.
std::string_view template_title(ArtifactKind kind);

/// Required `## ` section headings of an artifact kind, in template order.
/// One section per elicitation dimension of the kind's phase.
std::vector<std::string> template_sections(ArtifactKind kind);

/// Empty template document (what ships as `templates/<kind>.md`).
std::string template_skeleton(ArtifactKind kind);

/// Required section headings absent from `content`.
std::vector<std::string> missing_sections(ArtifactKind kind, std::string_view content);

/// Section heading -> body text (lines between the heading and the next `## `).
std::map<std::string, std::string> split_sections(std::string_view content);

/// A list item under a `## ` section. Provenance is the trailing bracketed
/// annotation, e.g. `- Use CMR only [e-0002, art:01J...]`.
struct MarkdownBullet
{
    std::string section;
    std::string text; // without the annotation
    std::vector<std::string> refs;
    int line = 0; // 1-based
};

std::vector<MarkdownBullet> parse_bullets(std::string_view content);

/// Splits a trailing `[ref, ref]` annotation off `line`. Returns nullopt when
/// the line carries no well-formed annotation.
std::optional<std::vector<std::string>> parse_provenance_annotation(std::string_view line, std::string* stripped = nullptr);

bool is_entry_ref(std::string_view ref) noexcept;
bool is_artifact_ref(std::string_view ref) noexcept;

std::string format_provenance(const std::vector<std::string>& refs);

} // namespace care
