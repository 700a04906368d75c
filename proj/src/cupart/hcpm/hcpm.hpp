#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "cupart/errors.hpp"

namespace cupart::hcpm {

// Ternary split label of one cell in the hierarchical CU partition map.
// File encoding: 0 = NotSplit, 1 = Split, 255 = Null.
enum class CuLabel : uint8_t {
    NotSplit = 0,
    Split = 1,
    Null = 255,
};

// Cell ordering is raster within each level: quadrant index i = 2*row + col
// at level 2, and the same rule inside each quadrant at level 3. The level-3
// cell (i, j) therefore covers the 16x16 block at
//   row = 2*(i/2) + j/2, col = 2*(i%2) + j%2
// of the 4x4 grid.
struct Hcpm {
    CuLabel level1 = CuLabel::NotSplit;
    std::array<CuLabel, 4> level2{CuLabel::Null, CuLabel::Null, CuLabel::Null, CuLabel::Null};
    std::array<std::array<CuLabel, 4>, 4> level3{{
        {CuLabel::Null, CuLabel::Null, CuLabel::Null, CuLabel::Null},
        {CuLabel::Null, CuLabel::Null, CuLabel::Null, CuLabel::Null},
        {CuLabel::Null, CuLabel::Null, CuLabel::Null, CuLabel::Null},
        {CuLabel::Null, CuLabel::Null, CuLabel::Null, CuLabel::Null},
    }};

    void validate() const; // throws hcpm_error on any nesting violation
    bool operator==(const Hcpm&) const = default;

    std::array<uint8_t, 21> encode() const;
    static Hcpm decode(const uint8_t* bytes21); // validates
};

// Quad-tree over one 64x64 CTU in normalized form: a split flag per internal
// position, with flags under non-split nodes forced to false. Leaves are the
// chosen CUs (edges 64/32/16/8).
struct PartitionTree {
    bool split_root = false;
    std::array<bool, 4> split_l1{};                  // 32x32 quadrants
    std::array<std::array<bool, 4>, 4> split_l2{};   // 16x16 blocks, [quadrant][sub]

    void normalize(); // clear flags beneath non-split nodes
    bool is_normalized() const;
    int leaf_count() const;
    // Depth of the CU covering the 16x16 unit at (row, col) of the 4x4 grid;
    // 3 means the unit is split into 8x8 CUs.
    int depth_at_unit(int row, int col) const;
    bool operator==(const PartitionTree&) const = default;
};

PartitionTree hcpm_to_tree(const Hcpm& h); // validates input
Hcpm tree_to_hcpm(const PartitionTree& t);

// Number of distinct legal partitions of one CTU down to the given depth.
int64_t count_partition_patterns(int max_depth);

// Visits every legal partition tree exactly once (83,522 at depth 3).
void for_each_partition(const std::function<void(const PartitionTree&)>& fn);

// Same shape as Hcpm with split probabilities; a cell is invalid when the
// level above decided not to split (and so the cell was never evaluated).
struct HcpmProb {
    float p1 = 0.0f;
    std::array<float, 4> p2{};
    std::array<std::array<float, 4>, 4> p3{};
    std::array<bool, 4> valid2{};
    std::array<std::array<bool, 4>, 4> valid3{};

    static HcpmProb from_labels(const Hcpm& h); // Split -> 1, NotSplit -> 0
    void validate() const;
};

// Per-level bi-threshold pair: probabilities above upper[l] mean split, below
// lower[l] mean not-split, in between is the uncertain zone. lower = 1 - upper
// and zones nest from level 1 (narrowest) to level 3.
struct ThresholdSet {
    std::array<double, 3> lower{0.5, 0.5, 0.5};
    std::array<double, 3> upper{0.5, 0.5, 0.5};

    // upper_l = 0.5 + 0.5 * d^(2 - 0.5*l); d = 0 collapses both to 0.5.
    static ThresholdSet from_width(double d);
};

enum class Decision : uint8_t {
    NotSplit = 0,
    Split = 1,
    Uncertain = 2,
};

struct DecisionMap {
    Decision d1 = Decision::NotSplit;
    std::array<Decision, 4> d2{};
    std::array<std::array<Decision, 4>, 4> d3{};
};

// Ties resolve toward the decided side: P >= upper -> Split, P <= lower ->
// NotSplit, otherwise Uncertain. Invalid probability cells map to NotSplit
// (they sit beneath a NotSplit decision and are never consulted).
DecisionMap binarize(const HcpmProb& p, const ThresholdSet& t);

// Same rule for a single cell at the given level (0-based).
Decision binarize_one(float p, const ThresholdSet& t, int level);

} // namespace cupart::hcpm
