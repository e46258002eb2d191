#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace twostage {

/// Malformed or inconsistent input data. Messages name the file and row.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based line of each row in the source

    /// Index of the first header column whose name is in `names`, or throws.
    std::size_t column(std::initializer_list<std::string_view> names) const;
    std::string where(std::size_t row) const;
};

/// Tab separated text with one header line. Lines starting with '#' and blank
/// lines are skipped, CR before LF is dropped, every row must have as many
/// fields as the header.
TsvTable parse_tsv(std::string_view text, const std::string& source);

/// Reads a file, transparently gunzipping when it is compressed.
TsvTable read_tsv(const std::string& path);

/// Whole file contents, gunzipped if needed.
std::string read_text(const std::string& path);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double x);
/// Strict parse of the full field; throws InputError mentioning `where`.
double parse_double(std::string_view field, const std::string& where);

}  // namespace twostage
