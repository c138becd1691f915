// format.hpp
//
// Shortest round-trip decimal formatting and strict parsing for CSV output.

#ifndef WTQKD_FORMAT_HPP
#define WTQKD_FORMAT_HPP

#include <charconv>
#include <string>
#include <string_view>

namespace wtqkd {

inline std::string format_double(double value) {
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, result.ptr);
}

/// Returns false if the whole field is not a number.
inline bool parse_double(std::string_view text, double& value) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
    return result.ec == std::errc() && result.ptr == text.data() + text.size();
}

}  // namespace wtqkd

#endif  // WTQKD_FORMAT_HPP
