#pragma once

#include <optional>
#include <vector>

#include "cupart/hcpm/hcpm.hpp"

namespace cupart::analysis {

// Depth of the CU covering each 16x16 unit (0..3), for a frame's CTUs in
// raster order. Unit grid is (4*ctu_rows) x (4*ctu_cols), row-major.
std::vector<int> frame_depth_units(const std::vector<hcpm::PartitionTree>& ctu_trees,
                                   int ctu_cols, int ctu_rows);

struct DepthCorrPoint {
    int gop_distance = 0;
    std::optional<double> cc; // absent when either side has zero variance
    double mse = 0.0;
    int64_t pairs = 0;
};

// Pearson correlation and MSE between co-located unit depths of frame pairs
// at the given GOP distances (frame offset = distance * gop_size). Pools all
// frame pairs and unit positions per distance.
std::vector<DepthCorrPoint> depth_correlation(const std::vector<std::vector<int>>& depth_maps,
                                              const std::vector<int>& gop_distances,
                                              int gop_size = 4);

// Same, pooling pairs across several independent frame series (sequences).
std::vector<DepthCorrPoint> depth_correlation_multi(
    const std::vector<std::vector<std::vector<int>>>& series,
    const std::vector<int>& gop_distances, int gop_size = 4);

} // namespace cupart::analysis
