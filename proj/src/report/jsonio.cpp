#include "edbench/jsonio.hpp"

#include <cmath>
#include <cstdio>

#include "edbench/errors.hpp"

namespace edbench::jsonio {

std::string fmt_double(double v) {
    if (!std::isfinite(v)) throw ValidationError("non-finite value in JSON output");
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void append_escaped(std::string& out, std::string_view s) {
    out.push_back('"');
    for (unsigned char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\b': out += "\\b"; break;
        case '\f': out += "\\f"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
            if (c < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                out += buf;
            } else {
                out.push_back(static_cast<char>(c));
            }
        }
    }
    out.push_back('"');
}

namespace {

void dump_rec(std::string& out, const ojson& j) {
    switch (j.type()) {
    case ojson::value_t::null: out += "null"; break;
    case ojson::value_t::boolean: out += j.get<bool>() ? "true" : "false"; break;
    case ojson::value_t::number_integer: out += std::to_string(j.get<int64_t>()); break;
    case ojson::value_t::number_unsigned: out += std::to_string(j.get<uint64_t>()); break;
    case ojson::value_t::number_float: out += fmt_double(j.get<double>()); break;
    case ojson::value_t::string: append_escaped(out, j.get_ref<const std::string&>()); break;
    case ojson::value_t::array: {
        out.push_back('[');
        bool first = true;
        for (const auto& el : j) {
            if (!first) out.push_back(',');
            first = false;
            dump_rec(out, el);
        }
        out.push_back(']');
        break;
    }
    case ojson::value_t::object: {
        out.push_back('{');
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out.push_back(',');
            first = false;
            append_escaped(out, it.key());
            out.push_back(':');
            dump_rec(out, it.value());
        }
        out.push_back('}');
        break;
    }
    default: throw ValidationError("unsupported JSON value type");
    }
}

} // namespace

std::string dump(const ojson& j) {
    std::string out;
    dump_rec(out, j);
    return out;
}

ojson parse(std::string_view text) {
    try {
        return ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("JSON parse error: ") + e.what());
    }
}

} // namespace edbench::jsonio
