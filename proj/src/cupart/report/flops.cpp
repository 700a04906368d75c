#include "cupart/report/flops.hpp"

#include <sstream>

namespace cupart::report {

std::vector<RowDiff> diff_reports(const FlopReport& expected, const FlopReport& actual) {
    std::vector<RowDiff> diffs;
    const size_t n = std::min(expected.rows.size(), actual.rows.size());
    for (size_t i = 0; i < n; ++i) {
        const FlopRow& e = expected.rows[i];
        const FlopRow& a = actual.rows[i];
        if (e.name != a.name) diffs.push_back({e.name, "name", 0, 0});
        if (e.params != a.params) diffs.push_back({e.name, "params", e.params, a.params});
        if (e.adds != a.adds) diffs.push_back({e.name, "adds", e.adds, a.adds});
        if (e.mults != a.mults) diffs.push_back({e.name, "mults", e.mults, a.mults});
        if (e.multiplicity != a.multiplicity)
            diffs.push_back({e.name, "multiplicity", e.multiplicity, a.multiplicity});
    }
    if (expected.rows.size() != actual.rows.size())
        diffs.push_back({"<row count>", "rows", int64_t(expected.rows.size()),
                         int64_t(actual.rows.size())});
    if (expected.total_params() != actual.total_params())
        diffs.push_back({"<total>", "params", expected.total_params(), actual.total_params()});
    if (expected.total_adds() != actual.total_adds())
        diffs.push_back({"<total>", "adds", expected.total_adds(), actual.total_adds()});
    if (expected.total_mults() != actual.total_mults())
        diffs.push_back({"<total>", "mults", expected.total_mults(), actual.total_mults()});
    return diffs;
}

std::string format_report(const FlopReport& r) {
    std::ostringstream os;
    os << "layer                 params        adds       mults\n";
    for (const auto& row : r.rows) {
        os << row.name;
        for (size_t i = row.name.size(); i < 18; ++i) os << ' ';
        os << ' ' << row.params << '\t' << row.adds << '\t' << row.mults;
        if (row.multiplicity != 1) os << "\t(x" << row.multiplicity << ')';
        os << '\n';
    }
    os << "total              " << ' ' << r.total_params() << '\t' << r.total_adds() << '\t'
       << r.total_mults() << '\n';
    return os.str();
}

} // namespace cupart::report
