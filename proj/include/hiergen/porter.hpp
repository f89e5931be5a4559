#pragma once

#include <string>
#include <string_view>

namespace hiergen {

// Porter (1980) suffix-stripping stemmer, steps 1a through 5b, using the
// original step tables. Expects a lowercase alphabetic word; words of length
// <= 2 are returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace hiergen
