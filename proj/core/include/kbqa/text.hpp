#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kbqa {

/// Shared normalizer for questions, entity names and predicate paths.
///
/// Text is lowercased (ASCII only; UTF-8 continuation bytes pass through) and
/// split on whitespace and punctuation. Periods, apostrophes, hyphens and
/// ampersands stay inside a token so abbreviations such as "u.s." survive as
/// one token; a single trailing period ("born.") is dropped. Tokens without
/// any alphanumeric character are discarded.
std::vector<std::string> tokenize(std::string_view text);

std::string to_lower_ascii(std::string_view text);

std::string join_tokens(std::span<const std::string> tokens,
                        std::string_view separator = " ");

/// Predicate ids may carry a "www.freebase.com" host prefix; this strips it
/// and returns the tokenized path ("/location/location/major_cities" ->
/// location location major cities).
std::vector<std::string> tokenize_predicate(std::string_view predicate_id);

}  // namespace kbqa
