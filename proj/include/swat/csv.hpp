#pragma once

#include <string>
#include <vector>

namespace swat {

// Minimal CSV support for the reports and histories the tools emit. Quoting
// follows the usual rules: a field containing a comma, quote, or line break is
// wrapped in double quotes with embedded quotes doubled. Lines end in '\n';
// the parser also accepts "\r\n" so round-trips survive foreign editors.

std::string csv_field(const std::string& raw);
std::string csv_line(const std::vector<std::string>& fields);

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double x);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Full unquoting parser; returns header and data rows alike. Throws IoError
// on structurally broken input (unterminated quote, junk after a closing
// quote).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace swat
