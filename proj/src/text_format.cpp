#include "pid/text_format.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "pid/error.hpp"

namespace pid::text {

std::string format_double(double v) {
    if (!std::isfinite(v)) {
        throw NumericError("cannot serialize non-finite value");
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_array(std::span<const double> values) {
    std::string out = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i != 0) {
            out += ',';
        }
        out += format_double(values[i]);
    }
    out += ']';
    return out;
}

std::string quote(std::string_view s) {
    return nlohmann::json(std::string(s)).dump();
}

} // namespace pid::text
