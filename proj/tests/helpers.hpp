#pragma once

// Shared builders for matrix-shaped test fixtures.

#include <cstdio>
#include <string>
#include <vector>

#include "invseg/features.hpp"

namespace test_helpers {

// Builds a FeatureMatrix directly from numeric rows and categorical codes.
// Level tables get synthetic labels "L00", "L01", ... so code order matches
// lexicographic label order, as the features module guarantees.
inline invseg::features::FeatureMatrix make_matrix(
    const std::vector<std::vector<double>>& numeric_rows,
    const std::vector<std::vector<int32_t>>& categorical_rows = {}) {
    invseg::features::FeatureMatrix m;
    const size_t n = numeric_rows.size();
    const size_t p = n ? numeric_rows[0].size() : 0;
    const size_t q = categorical_rows.empty() ? 0 : categorical_rows[0].size();
    for (size_t c = 0; c < p; ++c) m.numeric_names.push_back("x" + std::to_string(c));
    for (size_t c = 0; c < q; ++c) m.categorical_names.push_back("c" + std::to_string(c));
    std::vector<int32_t> max_code(q, 0);
    for (size_t i = 0; i < n; ++i) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "r%04zu", i);
        m.client_ids.push_back(buf);
        for (size_t c = 0; c < p; ++c) m.numeric.push_back(numeric_rows[i][c]);
        for (size_t c = 0; c < q; ++c) {
            m.categorical.push_back(categorical_rows[i][c]);
            max_code[c] = std::max(max_code[c], categorical_rows[i][c]);
        }
    }
    m.category_levels.resize(q);
    for (size_t c = 0; c < q; ++c) {
        for (int32_t code = 0; code <= max_code[c]; ++code) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "L%02d", code);
            m.category_levels[c].push_back(buf);
        }
    }
    m.scaling.standardized = false;
    m.scaling.columns.assign(p, {0.0, 1.0});
    return m;
}

}  // namespace test_helpers
