// SPDX-License-Identifier: Apache-2.0
#include <care/helper_agent.hpp>
#include <care/offline_model.hpp>

#include <algorithm>
#include <cctype>
#include <set>

namespace care
{

using nlohmann::json;

namespace
{

std::string join(const std::vector<std::string>& words, std::size_t first, std::size_t count)
{
    std::string out;
    for (std::size_t i = first; i < std::min(words.size(), first + count); ++i)
    {
        if (!out.empty())
            out += ' ';
        out += words[i];
    }
    return out;
}

std::string answer_refs(const json& entry)
{
    std::string refs = "[" + entry.at("entry_id").get<std::string>();
    if (entry.contains("answers") && entry["answers"].is_string())
        refs += ", " + entry["answers"].get<std::string>();
    return refs + "]";
}

std::string questions(const json& payload)
{
    std::string out;
    for (const auto& d: payload.at("dimensions"))
        out += "[" + d.at("id").get<std::string>() + "] Can you tell us about " + d.at("description").get<std::string>()
               + "?\n";
    return out;
}

std::string summary(const json& payload)
{
    std::string out;
    for (const auto& e: payload.at("transcript"))
        if (e.at("kind") == "answer")
            out += "- " + e.at("text").get<std::string>() + " " + answer_refs(e) + "\n";
    return out;
}

std::string draft(const json& payload)
{
    std::string out = "# " + payload.at("title").get<std::string>() + "\n";
    for (const auto& s: payload.at("sections"))
    {
        out += "\n## " + s.at("heading").get<std::string>() + "\n\n";
        for (const auto& e: payload.at("transcript"))
            if (e.at("kind") == "answer" && e.value("dimension_id", json()) == s.at("dimension_id"))
                out += "- " + e.at("text").get<std::string>() + " " + answer_refs(e) + "\n";
    }
    return out;
}

std::string revise(const json& payload)
{
    auto out = payload.at("content").get<std::string>();
    if (!out.empty() && out.back() != '\n')
        out += '\n';
    return out + "- " + payload.at("feedback").get<std::string>() + "\n";
}

// The n-th attempt (0-based) uses a six-word window of the document's
// content words, sliding by four words per reformulation.
std::string query_for_attempt(const json& payload, std::size_t attempt)
{
    auto const words = content_words(payload.at("text").get<std::string>());
    if (words.empty())
        return "earth science data";
    auto const first = (attempt * 4) % words.size();
    return "Find datasets on " + join(words, first, 6);
}

// ---------------------------------------------------------------------------
// agent turns

std::string directive(const std::string& systemText, std::string_view key)
{
    auto const at = systemText.find(key);
    if (at == std::string::npos)
        return {};
    auto const begin = at + key.size();
    auto const end = systemText.find('\n', begin);
    auto value = systemText.substr(begin, end == std::string::npos ? std::string::npos : end - begin);
    value.erase(0, value.find_first_not_of(' '));
    while (!value.empty() && (value.back() == ' ' || value.back() == '\r'))
        value.pop_back();
    return value;
}

std::string search_call(const std::string& keyword)
{
    json const call = { { "name", "search_collections" },
                        { "arguments", { { "keyword", keyword }, { "page_size", OfflineModel::kPageSize } } } };
    return "<tool_call>" + call.dump() + "</tool_call>";
}

std::string agent_turn(const ModelRequest& request)
{
    std::string query;
    std::vector<json> toolResults;
    for (const auto& m: request.messages)
    {
        if (m.role == "user" && query.empty())
            query = m.text;
        else if (m.role == "tool")
            toolResults.push_back(json::parse(m.text, nullptr, false));
    }

    bool const keywords = directive(request.systemText, "Search strategy:") == "keywords";
    bool const broaden = directive(request.systemText, "Broaden on empty:") == "yes";
    auto const words = content_words(query);
    auto const keyword = keywords && !words.empty() ? join(words, 0, words.size()) : query;

    if (toolResults.empty())
        return search_call(keyword);

    const auto& last = toolResults.back();
    bool const lastEmpty = last.is_object() && last.contains("results") && last["results"].empty();
    if (lastEmpty && broaden && toolResults.size() == 1 && words.size() > 2)
        return search_call(join(words, 0, 2));

    std::vector<std::string> ids;
    for (const auto& r: toolResults)
        if (r.is_object() && r.contains("results"))
            for (const auto& rec: r["results"])
                if (std::ranges::find(ids, rec.value("concept_id", "")) == ids.end())
                    ids.push_back(rec.value("concept_id", ""));
    if (ids.empty())
        return "No matching datasets found.";
    std::string out = "Ranked concept IDs:\n";
    for (std::size_t i = 0; i < ids.size(); ++i)
        out += std::to_string(i + 1) + ". " + ids[i] + "\n";
    return out;
}

} // namespace

std::string OfflineModel::complete(const ModelRequest& request)
{
    auto const payload = task_payload(request);
    if (!payload.is_object() || !payload.contains("task"))
        return agent_turn(request);

    auto const task = payload["task"].get<std::string>();
    if (task == "generate_questions")
        return questions(payload);
    if (task == "summarize_intent")
        return summary(payload);
    if (task == "draft_artifact")
        return draft(payload);
    if (task == "revise_artifact")
        return revise(payload);
    if (task == "draft_query")
    {
        auto const attempt = static_cast<std::size_t>(
            std::ranges::count(request.messages, std::string("assistant"), &ModelMessage::role));
        return query_for_attempt(payload, attempt);
    }
    return "Unsupported task: " + task;
}

} // namespace care
