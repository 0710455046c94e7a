#include "lsood/table_io.hpp"

#include <cerrno>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lsood/gaussian_ood.hpp"

namespace lsood {

namespace {

constexpr std::string_view kMagic = "#lsood-table";

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t'))
        s.remove_suffix(1);
    return s;
}

}  // namespace

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(s.substr(start)));
            break;
        }
        out.push_back(trim(s.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(std::string_view token) {
    const std::string s(trim(token));
    if (s.empty()) throw Error(ErrorCode::ParseError, "empty numeric field");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || (errno == ERANGE && std::isinf(v))) {
        throw Error(ErrorCode::ParseError, "bad number '" + s + "'");
    }
    return v;
}

long long parse_integer(std::string_view token) {
    token = trim(token);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw Error(ErrorCode::ParseError, "bad integer '" + std::string(token) + "'");
    }
    return v;
}

std::string table_to_text(const LabeledTable& table) {
    std::string out;
    out.reserve(table.values.rows() * (table.values.cols() + 1) * 24 + 128);
    out += kMagic;
    out += ",kind=" + table.kind;
    out += ",dim=" + std::to_string(table.values.cols());
    for (const auto& [k, v] : table.attributes) {
        if (k == "dim" || k == "kind") continue;
        out += "," + k + "=" + v;
    }
    out += "\nlabel";
    for (std::size_t j = 0; j < table.values.cols(); ++j) out += ",x" + std::to_string(j);
    out += '\n';
    for (std::size_t i = 0; i < table.values.rows(); ++i) {
        out += table.labels[i] == kOodLabel ? std::string("ood") : std::to_string(table.labels[i]);
        for (double v : table.values.row(i)) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

LabeledTable table_from_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || !line.starts_with(kMagic)) {
        throw Error(ErrorCode::ParseError, "missing #lsood-table header line");
    }
    LabeledTable table;
    std::size_t dim = 0;
    bool have_dim = false;
    const auto fields = split(line, ',');
    for (std::size_t i = 1; i < fields.size(); ++i) {
        const auto eq = fields[i].find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::ParseError, "header field without '=': " + std::string(fields[i]));
        }
        const std::string key(fields[i].substr(0, eq));
        const std::string value(fields[i].substr(eq + 1));
        if (key == "kind") {
            table.kind = value;
        } else if (key == "dim") {
            dim = static_cast<std::size_t>(parse_integer(value));
            have_dim = true;
        } else {
            table.attributes[key] = value;
        }
    }
    if (!have_dim) throw Error(ErrorCode::ParseError, "header lacks dim=");
    if (!std::getline(in, line) || !line.starts_with("label")) {
        throw Error(ErrorCode::ParseError, "missing column header row");
    }
    std::vector<double> data;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto cells = split(line, ',');
        if (cells.size() != dim + 1) {
            throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + " has " +
                                                   std::to_string(cells.size()) +
                                                   " fields, expected " + std::to_string(dim + 1));
        }
        table.labels.push_back(cells[0] == "ood" ? kOodLabel
                                                 : static_cast<int>(parse_integer(cells[0])));
        for (std::size_t j = 1; j < cells.size(); ++j) {
            const double v = parse_double(cells[j]);
            if (!std::isfinite(v)) {
                throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + " has a non-finite value");
            }
            data.push_back(v);
        }
    }
    table.values = Matrix(table.labels.size(), dim, std::move(data));
    return table;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace lsood
