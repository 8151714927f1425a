#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rfod::csv {

using Record = std::vector<std::string>;

/// Parses RFC-4180 CSV: quoted fields, doubled quotes, embedded separators and
/// newlines, LF or CRLF line endings. A trailing newline does not produce an
/// empty record. Throws InputError on an unterminated quote.
std::vector<Record> parse(std::istream& in);
std::vector<Record> parse(std::string_view text);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

void write_record(std::ostream& out, const Record& record);

}  // namespace rfod::csv
