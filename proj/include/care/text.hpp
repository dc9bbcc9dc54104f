// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace care
{

/// Lowercased ASCII alphanumeric tokens of `text`, in order.
std::vector<std::string> word_tokens(std::string_view text);

/// Tokens of `text` with common English function words and generic request
/// words removed, duplicates dropped, order kept.
std::vector<std::string> content_words(std::string_view text);

} // namespace care
