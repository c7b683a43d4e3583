#pragma once

#include <span>
#include <string>
#include <string_view>

namespace pid::text {

// 17 significant digits: parses back to the identical double.
std::string format_double(double v);

// JSON array of doubles written with format_double.
std::string format_array(std::span<const double> values);

// JSON string literal with escaping.
std::string quote(std::string_view s);

} // namespace pid::text
