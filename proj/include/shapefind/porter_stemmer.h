#pragma once

#include <string>
#include <string_view>

namespace shapefind {

/// Porter's 1980 suffix-stripping algorithm for lowercase ASCII words.
/// Words of length two or less are returned unchanged.
std::string porter_stem(std::string_view word);

} // namespace shapefind
