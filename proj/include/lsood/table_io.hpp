#pragma once

// Delimited-text tables shared by datasets and feature files.
//
//   #lsood-table,kind=<kind>,dim=<d>,classes=<C>[,key=value...]
//   label,x0,x1,...,x{d-1}
//   <label>,<v0>,...        one row per sample
//
// Labels are class indices or the literal "ood". Values use 17 significant
// digits so every double survives a write/read cycle bit-exactly.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lsood/numerics.hpp"

namespace lsood {

struct LabeledTable {
    std::string kind;
    std::map<std::string, std::string> attributes;  // everything besides kind
    std::vector<int> labels;
    Matrix values;
};

std::string format_double(double v);
double parse_double(std::string_view token);
long long parse_integer(std::string_view token);

std::string table_to_text(const LabeledTable& table);
LabeledTable table_from_text(std::string_view text);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

std::vector<std::string_view> split(std::string_view s, char sep);

}  // namespace lsood
