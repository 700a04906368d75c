#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "cupart/codec/frame.hpp"
#include "cupart/hcpm/hcpm.hpp"

namespace cupart::codec {

// DC-prediction cost model. Distortion is the SSE of the block against its
// rounded mean; the rate proxy is header bits plus a logarithmic term in the
// SAD of the DC residual. Inter costs apply the same form to the motion-free
// residual against the co-located reference block.
struct CostModelConfig {
    double header_bits = 32.0;
    double split_flag_bits = 1.0;
    double coef_scale = 0.3;
    double lambda_base = 0.85;
    double lambda_qp_offset = 12.0;
    double lambda_qp_step = 3.0;
};

double lambda_for_qp(int qp, const CostModelConfig& cfg = {});

struct RdCost {
    double distortion = 0.0;
    double rate = 0.0;
    double lambda = 0.0;
    double j = 0.0; // j == distortion + lambda * rate by construction

    static RdCost make(double d, double r, double lambda) {
        return RdCost{d, r, lambda, d + lambda * r};
    }
};

enum class CodingMode : uint8_t {
    Intra = 0,
    Inter = 1,
};

// Axis-aligned square CU, positioned on its own-size grid.
struct CuRect {
    int x = 0;
    int y = 0;
    int edge = 0;
};

RdCost cu_cost(const Frame& frame, const CuRect& rect, int qp, CodingMode mode,
               const Frame* reference = nullptr, const CostModelConfig& cfg = {});

// Offset-128, clamped residue against the co-located previous frame; a null
// previous frame means the implicit all-zero reference (first frame).
Frame precode_residue(const Frame& current, const Frame* previous);

struct CtuEncodeResult {
    hcpm::PartitionTree tree;
    double rd = 0.0;
    uint32_t precoded_cus = 0;
};

// Core guided encode of one CTU given 64x64 samples (original luma or
// residual, both fit int16). Split/NotSplit cells are final; Uncertain cells
// compare the parent cost against the best of its children bottom-up, exactly
// like the exhaustive search does. Every per-CU cost evaluation is counted.
CtuEncodeResult encode_ctu_with_decisions(const int16_t* samples64x64, int qp,
                                          const hcpm::DecisionMap& decisions,
                                          const CostModelConfig& cfg = {});

struct OracleResult {
    hcpm::PartitionTree tree;
    double rd_total = 0.0;
    uint32_t precoded_cus = 0; // always 85
};

OracleResult oracle_rdo(const Frame& frame, int ctu_index, int qp, CodingMode mode,
                        const Frame* reference = nullptr, const CostModelConfig& cfg = {});
// Same search applied directly to a stored 64x64 block (dataset records).
OracleResult oracle_rdo_block(const uint8_t* block64x64, int qp, const CostModelConfig& cfg = {});

// All 85 per-CU costs of one CTU. Index layout: 0 is the 64x64 CU; 1+i the
// 32x32 quadrants; 5 + 4i + j the 16x16 blocks; 21 + 16i + 4j + k the 8x8.
struct CtuCostTable {
    std::array<double, 85> j{};
};

CtuCostTable compute_ctu_costs(const int16_t* samples64x64, int qp,
                               const CostModelConfig& cfg = {});

// RD cost of a fixed partition tree over the cost table, with the same
// summation order as the search (children in index order, flag cost last).
double tree_rd_cost(const CtuCostTable& costs, const hcpm::PartitionTree& tree,
                    double lambda_flag_cost);

// Exhaustive minimum over all 83,522 partitions. Slow path for verification.
double enumerate_min_rd(const CtuCostTable& costs, double lambda_flag_cost,
                        hcpm::PartitionTree* best = nullptr);

struct EncodeStats {
    uint64_t precoded_cus = 0;
    double rd_total = 0.0;
    std::vector<hcpm::PartitionTree> trees;          // one per CTU
    std::vector<uint32_t> per_ctu_precoded;          // one per CTU
};

EncodeStats encode_with_prediction(const Frame& frame, int qp, CodingMode mode,
                                   const std::vector<hcpm::HcpmProb>& probs,
                                   const hcpm::ThresholdSet& thresholds,
                                   const Frame* reference = nullptr,
                                   const CostModelConfig& cfg = {});

// Extracts a CTU's samples for costing: luma (intra) or current-minus-
// reference residual (inter).
std::array<int16_t, 4096> ctu_samples(const Frame& frame, int ctu_index, CodingMode mode,
                                      const Frame* reference);

} // namespace cupart::codec
