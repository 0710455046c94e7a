// Compares a CLI score CSV against the library scores for the same model and features.

#include <cstdio>
#include <string>

#include "lsood/gaussian_ood.hpp"
#include "lsood/table_io.hpp"

using namespace lsood;

int main(int argc, char** argv) {
    if (argc != 5) {
        std::fprintf(stderr, "usage: cli_score_check MODEL FEATURES METHOD SCORES_CSV\n");
        return 2;
    }
    const auto model = load_model(argv[1]);
    const auto feats = load_features(argv[2]);
    const auto expected = score(model, feats, parse_score_method(argv[3])).scores;
    std::size_t row = 0;
    for (auto line : split(read_text_file(argv[4]), '\n')) {
        if (line.empty() || line.front() == '#' || line.starts_with("row,")) continue;
        const auto cells = split(line, ',');
        if (row >= expected.size() || parse_double(cells[2]) != expected[row]) {
            std::fprintf(stderr, "mismatch at row %zu\n", row);
            return 1;
        }
        ++row;
    }
    if (row != expected.size()) {
        std::fprintf(stderr, "row count %zu != %zu\n", row, expected.size());
        return 1;
    }
    std::printf("%zu scores match\n", row);
    return 0;
}
