#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cipred::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
};

// Minimal comma-separated reader: no quoting, '\n' or '\r\n' line ends,
// first line is the header. Locale independent by construction.
Table read_file(const std::string& path);
Table parse(const std::string& text);

// Locale-independent numeric parsing ('.' decimal point only).
double parse_double(const std::string& field, const std::string& context);
long long parse_int(const std::string& field, const std::string& context);

// Shortest round-trip formatting for doubles, fixed formatting helpers.
std::string format_double(double v);

void write_file(const std::string& path, const Table& t);

}  // namespace cipred::csv
