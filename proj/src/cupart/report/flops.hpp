#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cupart::report {

// One accounting row. multiplicity covers rows that stand for several
// identical tensors (the three gates of an LSTM level share one row); totals
// weight by it, the printed per-row values do not.
struct FlopRow {
    std::string name;
    int64_t params = 0;
    int64_t adds = 0;
    int64_t mults = 0;
    int64_t multiplicity = 1;
};

struct FlopReport {
    std::vector<FlopRow> rows;

    int64_t total_params() const {
        int64_t t = 0;
        for (const auto& r : rows) t += r.params * r.multiplicity;
        return t;
    }
    int64_t total_adds() const {
        int64_t t = 0;
        for (const auto& r : rows) t += r.adds * r.multiplicity;
        return t;
    }
    int64_t total_mults() const {
        int64_t t = 0;
        for (const auto& r : rows) t += r.mults * r.multiplicity;
        return t;
    }
};

struct RowDiff {
    std::string name;
    std::string field;
    int64_t expected = 0;
    int64_t actual = 0;
};

// Row-by-row comparison (names, params, adds, mults and the three totals).
std::vector<RowDiff> diff_reports(const FlopReport& expected, const FlopReport& actual);

std::string format_report(const FlopReport& r);

} // namespace cupart::report
