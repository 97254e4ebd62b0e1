#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace polytuplet {

// Lowercases ASCII and splits on anything that is not a letter, digit or a
// non-ASCII byte. Shared by the hashing tokenizer and the overlap baseline.
std::vector<std::string> split_words(std::string_view text);

std::string_view trim(std::string_view text);

}  // namespace polytuplet
