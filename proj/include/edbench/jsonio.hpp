#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

// Deterministic JSON emission. nlohmann::json is used for parsing, but its
// number printer emits shortest-roundtrip forms; report files pin doubles to
// 17 significant digits and a fixed key order instead, so output bytes are
// stable across runs and thread counts.

namespace edbench::jsonio {

using ojson = nlohmann::ordered_json;

// %.17g, with a guard against non-finite values (JSON has no inf/nan).
std::string fmt_double(double v);

// Appends a quoted, escaped JSON string. Input is UTF-8 and is passed
// through byte-for-byte apart from mandatory escapes.
void append_escaped(std::string& out, std::string_view s);

// Re-emits a parsed document deterministically: preserved key order,
// doubles via fmt_double, no added whitespace.
std::string dump(const ojson& j);

ojson parse(std::string_view text); // throws edbench parse errors with offsets

} // namespace edbench::jsonio
