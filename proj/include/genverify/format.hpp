#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace genverify {

/// Shortest decimal that round-trips to the same double.
std::string format_shortest(double v);

/// printf-style fixed notation with `decimals` digits.
std::string format_fixed(double v, int decimals);

/// 17 significant digits (exact round-trip for doubles).
std::string format_sig17(double v);

/// Splits on a single-character delimiter, keeping empty fields.
std::vector<std::string> split(std::string_view s, char delim);

}  // namespace genverify
