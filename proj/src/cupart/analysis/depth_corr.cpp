#include "cupart/analysis/depth_corr.hpp"

#include <cmath>

#include "cupart/errors.hpp"

namespace cupart::analysis {

std::vector<int> frame_depth_units(const std::vector<hcpm::PartitionTree>& ctu_trees,
                                   int ctu_cols, int ctu_rows) {
    if (int(ctu_trees.size()) != ctu_cols * ctu_rows)
        throw argument_error("frame_depth_units: tree count does not match the CTU grid");
    const int unit_cols = 4 * ctu_cols;
    std::vector<int> units(size_t(unit_cols) * 4 * ctu_rows);
    for (int cy = 0; cy < ctu_rows; ++cy)
        for (int cx = 0; cx < ctu_cols; ++cx) {
            const hcpm::PartitionTree& t = ctu_trees[size_t(cy) * ctu_cols + cx];
            for (int uy = 0; uy < 4; ++uy)
                for (int ux = 0; ux < 4; ++ux)
                    units[size_t(cy * 4 + uy) * unit_cols + cx * 4 + ux] =
                        t.depth_at_unit(uy, ux);
        }
    return units;
}

namespace {

struct PairAccum {
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0, se2 = 0;
    int64_t n = 0;

    void add(double x, double y) {
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
        se2 += (x - y) * (x - y);
        ++n;
    }

    DepthCorrPoint finish(int distance) const {
        DepthCorrPoint pt;
        pt.gop_distance = distance;
        pt.pairs = n;
        if (n > 0) {
            pt.mse = se2 / double(n);
            const double vx = sxx - sx * sx / double(n);
            const double vy = syy - sy * sy / double(n);
            if (vx > 0 && vy > 0)
                pt.cc = (sxy - sx * sy / double(n)) / std::sqrt(vx * vy);
        }
        return pt;
    }
};

void accumulate_series(PairAccum& acc, const std::vector<std::vector<int>>& maps,
                       size_t frame_offset) {
    for (size_t t = 0; t + frame_offset < maps.size(); ++t) {
        const auto& a = maps[t];
        const auto& b = maps[t + frame_offset];
        for (size_t u = 0; u < a.size(); ++u) acc.add(a[u], b[u]);
    }
}

} // namespace

std::vector<DepthCorrPoint> depth_correlation_multi(
    const std::vector<std::vector<std::vector<int>>>& series,
    const std::vector<int>& gop_distances, int gop_size) {
    if (series.empty()) throw argument_error("depth_correlation: no series");
    for (const auto& maps : series) {
        if (maps.size() < 2) throw argument_error("depth_correlation: need at least two frames");
        for (const auto& m : maps)
            if (m.size() != maps[0].size())
                throw argument_error("depth_correlation: depth maps differ in size");
    }
    std::vector<DepthCorrPoint> points;
    for (int dist : gop_distances) {
        if (dist <= 0) throw argument_error("depth_correlation: distance must be positive");
        PairAccum acc;
        for (const auto& maps : series)
            accumulate_series(acc, maps, size_t(dist) * size_t(gop_size));
        points.push_back(acc.finish(dist));
    }
    return points;
}

std::vector<DepthCorrPoint> depth_correlation(const std::vector<std::vector<int>>& depth_maps,
                                              const std::vector<int>& gop_distances,
                                              int gop_size) {
    return depth_correlation_multi({depth_maps}, gop_distances, gop_size);
}

} // namespace cupart::analysis
