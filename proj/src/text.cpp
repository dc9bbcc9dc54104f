// SPDX-License-Identifier: Apache-2.0
#include <care/text.hpp>

#include <cctype>
#include <set>
#include <utility>

namespace care
{

std::vector<std::string> word_tokens(std::string_view text)
{
    std::vector<std::string> out;
    std::string current;
    for (char c: text)
    {
        if (std::isalnum(static_cast<unsigned char>(c)))
            current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        else if (!current.empty())
            out.push_back(std::exchange(current, {}));
    }
    if (!current.empty())
        out.push_back(std::move(current));
    return out;
}

std::vector<std::string> content_words(std::string_view text)
{
    static const std::set<std::string, std::less<>> stopwords {
        "a",       "about", "across", "all",   "an",    "and",   "any",     "are",  "as",    "at",
        "be",      "by",    "can",    "could", "data",  "dataset", "datasets", "do",  "find",  "for",
        "from",    "get",   "give",   "have",  "how",   "i",     "in",      "into", "is",    "it",
        "looking", "me",    "my",     "need",  "of",    "on",    "or",      "over", "please", "show",
        "some",    "that",  "the",    "their", "there", "these", "this",    "to",   "used",  "using",
        "want",    "was",   "we",     "were",  "what",  "where", "which",   "with", "would", "you",
    };
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& token: word_tokens(text))
        if (!stopwords.contains(token) && seen.insert(token).second)
            out.push_back(std::move(token));
    return out;
}

} // namespace care
