#include "swat/csv.hpp"

#include <charconv>
#include <fstream>
#include <system_error>

#include "swat/error.hpp"

namespace swat {

std::string csv_field(const std::string& raw) {
    const bool needs_quotes = raw.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs_quotes) return raw;
    std::string out;
    out.reserve(raw.size() + 2);
    out.push_back('"');
    for (char c : raw) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string csv_line(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += csv_field(fields[i]);
    }
    return out;
}

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    if (res.ec != std::errc()) throw IoError("double formatting failed");
    return std::string(buf, res.ptr);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << csv_line(header) << '\n';
    for (const auto& row : rows) out << csv_line(row) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool closed_quote = false;  // field ended with '"'; only , or newline may follow
    bool row_started = false;   // distinguishes an empty final line from no line

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        closed_quote = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
        row_started = false;
    };

    const std::size_t n = text.size();
    for (std::size_t i = 0; i < n; ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                    closed_quote = true;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (closed_quote || !field.empty()) throw IoError("quote opened mid-field");
                in_quotes = true;
                row_started = true;
                break;
            case ',':
                end_field();
                row_started = true;
                break;
            case '\r':
                if (i + 1 >= n || text[i + 1] != '\n') throw IoError("bare carriage return");
                break;  // the '\n' branch finishes the row
            case '\n':
                if (row_started || !field.empty()) end_row();
                break;
            default:
                if (closed_quote) throw IoError("text after a closing quote");
                field.push_back(c);
                row_started = true;
        }
    }
    if (in_quotes) throw IoError("unterminated quoted field");
    if (row_started || !field.empty()) {
        end_field();
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace swat
