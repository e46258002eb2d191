#include "twostage/tsv.hpp"

#include <zlib.h>

#include <charconv>
#include <cmath>
#include <memory>

namespace twostage {

std::size_t TsvTable::column(std::initializer_list<std::string_view> names) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        for (auto n : names)
            if (header[i] == n) return i;
    std::string wanted;
    for (auto n : names) wanted += (wanted.empty() ? "" : " or ") + std::string(n);
    throw InputError(source + ": missing column " + wanted);
}

std::string TsvTable::where(std::size_t row) const {
    return source + " row " + std::to_string(line_numbers.at(row));
}

namespace {

std::vector<std::string> split_tabs(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return out;
}

}  // namespace

TsvTable parse_tsv(std::string_view text, const std::string& source) {
    TsvTable t;
    t.source = source;
    bool have_header = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        auto fields = split_tabs(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw InputError(source + " row " + std::to_string(line_no) + ": expected " +
                             std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(line_no);
    }
    if (!have_header) throw InputError(source + ": empty input, no header line");
    return t;
}

std::string read_text(const std::string& path) {
    // gzread passes uncompressed files through unchanged.
    std::unique_ptr<gzFile_s, int (*)(gzFile)> f(gzopen(path.c_str(), "rb"), gzclose);
    if (!f) throw InputError(path + ": cannot open");
    std::string out;
    char buf[1 << 16];
    int got;
    while ((got = gzread(f.get(), buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(got));
    if (got < 0) throw InputError(path + ": read error (corrupt gzip stream?)");
    return out;
}

TsvTable read_tsv(const std::string& path) { return parse_tsv(read_text(path), path); }

std::string format_double(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

double parse_double(std::string_view field, const std::string& where) {
    double x = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (first != last && *first == '+') ++first;
    const auto r = std::from_chars(first, last, x);
    if (r.ec != std::errc() || r.ptr != last || field.empty())
        throw InputError(where + ": not a number: '" + std::string(field) + "'");
    if (!std::isfinite(x)) throw InputError(where + ": non-finite value '" + std::string(field) + "'");
    return x;
}

}  // namespace twostage
