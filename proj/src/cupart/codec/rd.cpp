#include "cupart/codec/rd.hpp"

#include <algorithm>
#include <cmath>

namespace cupart::codec {

using hcpm::Decision;
using hcpm::DecisionMap;
using hcpm::PartitionTree;

double lambda_for_qp(int qp, const CostModelConfig& cfg) {
    return cfg.lambda_base *
           std::exp2((double(qp) - cfg.lambda_qp_offset) / cfg.lambda_qp_step);
}

namespace {

// Intra-form cost of one square block of samples: DC prediction, SSE
// distortion, log2 rate proxy. Integer accumulation keeps it exact.
RdCost block_cost(const int16_t* samples, int stride, int x0, int y0, int edge, double lambda,
                  const CostModelConfig& cfg) {
    int64_t sum = 0;
    for (int y = 0; y < edge; ++y) {
        const int16_t* row = samples + size_t(y0 + y) * stride + x0;
        for (int x = 0; x < edge; ++x) sum += row[x];
    }
    const int64_t n = int64_t(edge) * edge;
    const int64_t dc = std::llround(double(sum) / double(n));
    int64_t sse = 0, sad = 0;
    for (int y = 0; y < edge; ++y) {
        const int16_t* row = samples + size_t(y0 + y) * stride + x0;
        for (int x = 0; x < edge; ++x) {
            const int64_t d = int64_t(row[x]) - dc;
            sse += d * d;
            sad += d < 0 ? -d : d;
        }
    }
    const double rate = cfg.header_bits + cfg.coef_scale * std::log2(1.0 + double(sad));
    return RdCost::make(double(sse), rate, lambda);
}

struct CtuCoster {
    const int16_t* samples; // 64x64
    int qp;
    const CostModelConfig* cfg;
    double lambda;
    uint32_t evals = 0;

    double cost(int x0, int y0, int edge) {
        ++evals;
        return block_cost(samples, 64, x0, y0, edge, lambda, *cfg).j;
    }
};

// depth 0..3; (x0, y0) in pixels. Fills tree flags for this subtree.
double encode_node(CtuCoster& coster, const DecisionMap& dm, PartitionTree& tree, int depth,
                   int x0, int y0) {
    const int edge = 64 >> depth;
    if (depth == 3) return coster.cost(x0, y0, edge);

    Decision dec;
    bool* flag = nullptr;
    if (depth == 0) {
        dec = dm.d1;
        flag = &tree.split_root;
    } else if (depth == 1) {
        const int i = (y0 / 32) * 2 + (x0 / 32);
        dec = dm.d2[i];
        flag = &tree.split_l1[i];
    } else {
        const int i = (y0 / 32) * 2 + (x0 / 32);
        const int j = ((y0 % 32) / 16) * 2 + ((x0 % 32) / 16);
        dec = dm.d3[i][j];
        flag = &tree.split_l2[i][j];
    }

    if (dec == Decision::NotSplit) {
        *flag = false;
        return coster.cost(x0, y0, edge);
    }

    const double self_cost =
        dec == Decision::Uncertain ? coster.cost(x0, y0, edge) : 0.0;

    const int half = edge / 2;
    double split_cost = 0.0;
    for (int m = 0; m < 4; ++m)
        split_cost += encode_node(coster, dm, tree, depth + 1, x0 + (m % 2) * half,
                                  y0 + (m / 2) * half);
    split_cost += coster.lambda * coster.cfg->split_flag_bits;

    if (dec == Decision::Split) {
        *flag = true;
        return split_cost;
    }
    // Uncertain: local bottom-up comparison, split only on a strict win.
    if (split_cost < self_cost) {
        *flag = true;
        return split_cost;
    }
    *flag = false;
    return self_cost;
}

DecisionMap all_uncertain() {
    DecisionMap dm;
    dm.d1 = Decision::Uncertain;
    for (int i = 0; i < 4; ++i) {
        dm.d2[i] = Decision::Uncertain;
        for (int j = 0; j < 4; ++j) dm.d3[i][j] = Decision::Uncertain;
    }
    return dm;
}

} // namespace

RdCost cu_cost(const Frame& frame, const CuRect& rect, int qp, CodingMode mode,
               const Frame* reference, const CostModelConfig& cfg) {
    if (rect.edge != 8 && rect.edge != 16 && rect.edge != 32 && rect.edge != 64)
        throw geometry_error("cu_cost: edge must be one of 8/16/32/64");
    if (rect.x < 0 || rect.y < 0 || rect.x % rect.edge || rect.y % rect.edge ||
        rect.x + rect.edge > frame.width || rect.y + rect.edge > frame.height)
        throw geometry_error("cu_cost: rect not grid-aligned inside the frame");
    if (mode == CodingMode::Inter && reference == nullptr)
        throw argument_error("cu_cost: inter mode needs a reference frame");
    if (reference &&
        (reference->width != frame.width || reference->height != frame.height))
        throw geometry_error("cu_cost: reference dimensions differ");

    std::vector<int16_t> samples(size_t(rect.edge) * rect.edge);
    for (int y = 0; y < rect.edge; ++y)
        for (int x = 0; x < rect.edge; ++x) {
            int v = frame.at(rect.x + x, rect.y + y);
            if (mode == CodingMode::Inter) v -= reference->at(rect.x + x, rect.y + y);
            samples[size_t(y) * rect.edge + x] = int16_t(v);
        }
    return block_cost(samples.data(), rect.edge, 0, 0, rect.edge, lambda_for_qp(qp, cfg), cfg);
}

Frame precode_residue(const Frame& current, const Frame* previous) {
    if (previous &&
        (previous->width != current.width || previous->height != current.height))
        throw geometry_error("precode_residue: frame dimensions differ");
    Frame res(current.width, current.height);
    for (size_t i = 0; i < current.luma.size(); ++i) {
        const int prev = previous ? previous->luma[i] : 0;
        const int v = int(current.luma[i]) - prev + 128;
        res.luma[i] = uint8_t(std::clamp(v, 0, 255));
    }
    return res;
}

std::array<int16_t, 4096> ctu_samples(const Frame& frame, int ctu_index, CodingMode mode,
                                      const Frame* reference) {
    if (ctu_index < 0 || ctu_index >= frame.ctu_count())
        throw geometry_error("ctu index out of range");
    if (mode == CodingMode::Inter && reference == nullptr)
        throw argument_error("inter mode needs a reference frame");
    const int cx = (ctu_index % frame.ctu_cols()) * kCtuEdge;
    const int cy = (ctu_index / frame.ctu_cols()) * kCtuEdge;
    std::array<int16_t, 4096> s{};
    for (int y = 0; y < kCtuEdge; ++y)
        for (int x = 0; x < kCtuEdge; ++x) {
            int v = frame.at(cx + x, cy + y);
            if (mode == CodingMode::Inter) v -= reference->at(cx + x, cy + y);
            s[size_t(y) * kCtuEdge + x] = int16_t(v);
        }
    return s;
}

CtuEncodeResult encode_ctu_with_decisions(const int16_t* samples, int qp,
                                          const DecisionMap& decisions,
                                          const CostModelConfig& cfg) {
    CtuCoster coster{samples, qp, &cfg, lambda_for_qp(qp, cfg)};
    CtuEncodeResult r;
    r.rd = encode_node(coster, decisions, r.tree, 0, 0, 0);
    r.tree.normalize();
    r.precoded_cus = coster.evals;
    return r;
}

OracleResult oracle_rdo(const Frame& frame, int ctu_index, int qp, CodingMode mode,
                        const Frame* reference, const CostModelConfig& cfg) {
    const auto samples = ctu_samples(frame, ctu_index, mode, reference);
    const CtuEncodeResult r = encode_ctu_with_decisions(samples.data(), qp, all_uncertain(), cfg);
    return OracleResult{r.tree, r.rd, r.precoded_cus};
}

OracleResult oracle_rdo_block(const uint8_t* block, int qp, const CostModelConfig& cfg) {
    std::array<int16_t, 4096> s;
    for (size_t i = 0; i < s.size(); ++i) s[i] = int16_t(block[i]);
    const CtuEncodeResult r = encode_ctu_with_decisions(s.data(), qp, all_uncertain(), cfg);
    return OracleResult{r.tree, r.rd, r.precoded_cus};
}

CtuCostTable compute_ctu_costs(const int16_t* samples, int qp, const CostModelConfig& cfg) {
    const double lambda = lambda_for_qp(qp, cfg);
    CtuCostTable t;
    t.j[0] = block_cost(samples, 64, 0, 0, 64, lambda, cfg).j;
    for (int i = 0; i < 4; ++i) {
        const int qx = (i % 2) * 32, qy = (i / 2) * 32;
        t.j[1 + i] = block_cost(samples, 64, qx, qy, 32, lambda, cfg).j;
        for (int j = 0; j < 4; ++j) {
            const int bx = qx + (j % 2) * 16, by = qy + (j / 2) * 16;
            t.j[5 + i * 4 + j] = block_cost(samples, 64, bx, by, 16, lambda, cfg).j;
            for (int k = 0; k < 4; ++k) {
                const int sx = bx + (k % 2) * 8, sy = by + (k / 2) * 8;
                t.j[21 + i * 16 + j * 4 + k] =
                    block_cost(samples, 64, sx, sy, 8, lambda, cfg).j;
            }
        }
    }
    return t;
}

double tree_rd_cost(const CtuCostTable& costs, const PartitionTree& tree,
                    double lambda_flag_cost) {
    if (!tree.split_root) return costs.j[0];
    double total = 0.0;
    for (int i = 0; i < 4; ++i) {
        if (!tree.split_l1[i]) {
            total += costs.j[1 + i];
            continue;
        }
        double quad = 0.0;
        for (int j = 0; j < 4; ++j) {
            if (!tree.split_l2[i][j]) {
                quad += costs.j[5 + i * 4 + j];
                continue;
            }
            double blk = 0.0;
            for (int k = 0; k < 4; ++k) blk += costs.j[21 + i * 16 + j * 4 + k];
            blk += lambda_flag_cost;
            quad += blk;
        }
        quad += lambda_flag_cost;
        total += quad;
    }
    total += lambda_flag_cost;
    return total;
}

double enumerate_min_rd(const CtuCostTable& costs, double lambda_flag_cost,
                        PartitionTree* best) {
    double min_rd = 0.0;
    bool first = true;
    hcpm::for_each_partition([&](const PartitionTree& t) {
        const double rd = tree_rd_cost(costs, t, lambda_flag_cost);
        if (first || rd < min_rd) {
            min_rd = rd;
            if (best) *best = t;
            first = false;
        }
    });
    return min_rd;
}

EncodeStats encode_with_prediction(const Frame& frame, int qp, CodingMode mode,
                                   const std::vector<hcpm::HcpmProb>& probs,
                                   const hcpm::ThresholdSet& thresholds,
                                   const Frame* reference, const CostModelConfig& cfg) {
    if (int(probs.size()) != frame.ctu_count())
        throw argument_error("encode_with_prediction: one probability map per CTU required");
    EncodeStats stats;
    stats.trees.reserve(probs.size());
    stats.per_ctu_precoded.reserve(probs.size());
    for (int c = 0; c < frame.ctu_count(); ++c) {
        const auto samples = ctu_samples(frame, c, mode, reference);
        const DecisionMap dm = hcpm::binarize(probs[size_t(c)], thresholds);
        const CtuEncodeResult r = encode_ctu_with_decisions(samples.data(), qp, dm, cfg);
        stats.rd_total += r.rd;
        stats.precoded_cus += r.precoded_cus;
        stats.trees.push_back(r.tree);
        stats.per_ctu_precoded.push_back(r.precoded_cus);
    }
    return stats;
}

} // namespace cupart::codec
