#include "cupart/hcpm/hcpm.hpp"

#include <cmath>

namespace cupart::hcpm {

void Hcpm::validate() const {
    if (level1 == CuLabel::Null) throw hcpm_error("level-1 label may not be null");
    for (int i = 0; i < 4; ++i) {
        const bool want_null = level1 == CuLabel::NotSplit;
        if ((level2[i] == CuLabel::Null) != want_null)
            throw hcpm_error("level-2 null pattern inconsistent with level 1");
        for (int j = 0; j < 4; ++j) {
            const bool want_null3 = level2[i] != CuLabel::Split;
            if ((level3[i][j] == CuLabel::Null) != want_null3)
                throw hcpm_error("level-3 null pattern inconsistent with level 2");
        }
    }
}

std::array<uint8_t, 21> Hcpm::encode() const {
    std::array<uint8_t, 21> out{};
    out[0] = static_cast<uint8_t>(level1);
    for (int i = 0; i < 4; ++i) out[1 + i] = static_cast<uint8_t>(level2[i]);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) out[5 + i * 4 + j] = static_cast<uint8_t>(level3[i][j]);
    return out;
}

Hcpm Hcpm::decode(const uint8_t* b) {
    auto to_label = [](uint8_t v) {
        if (v != 0 && v != 1 && v != 255) throw hcpm_error("bad label byte");
        return static_cast<CuLabel>(v);
    };
    Hcpm h;
    h.level1 = to_label(b[0]);
    for (int i = 0; i < 4; ++i) h.level2[i] = to_label(b[1 + i]);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) h.level3[i][j] = to_label(b[5 + i * 4 + j]);
    h.validate();
    return h;
}

void PartitionTree::normalize() {
    if (!split_root) {
        split_l1 = {};
        split_l2 = {};
        return;
    }
    for (int i = 0; i < 4; ++i)
        if (!split_l1[i]) split_l2[i] = {};
}

bool PartitionTree::is_normalized() const {
    PartitionTree c = *this;
    c.normalize();
    return c == *this;
}

int PartitionTree::leaf_count() const {
    if (!split_root) return 1;
    int n = 0;
    for (int i = 0; i < 4; ++i) {
        if (!split_l1[i]) {
            ++n;
            continue;
        }
        for (int j = 0; j < 4; ++j) n += split_l2[i][j] ? 4 : 1;
    }
    return n;
}

int PartitionTree::depth_at_unit(int row, int col) const {
    if (row < 0 || row > 3 || col < 0 || col > 3)
        throw argument_error("depth_at_unit: unit out of range");
    if (!split_root) return 0;
    const int qi = (row / 2) * 2 + (col / 2);
    if (!split_l1[qi]) return 1;
    const int sj = (row % 2) * 2 + (col % 2);
    return split_l2[qi][sj] ? 3 : 2;
}

PartitionTree hcpm_to_tree(const Hcpm& h) {
    h.validate();
    PartitionTree t;
    t.split_root = h.level1 == CuLabel::Split;
    for (int i = 0; i < 4; ++i) {
        t.split_l1[i] = h.level2[i] == CuLabel::Split;
        for (int j = 0; j < 4; ++j) t.split_l2[i][j] = h.level3[i][j] == CuLabel::Split;
    }
    return t;
}

Hcpm tree_to_hcpm(const PartitionTree& t) {
    if (!t.is_normalized()) throw hcpm_error("tree_to_hcpm: tree not normalized");
    Hcpm h;
    h.level1 = t.split_root ? CuLabel::Split : CuLabel::NotSplit;
    for (int i = 0; i < 4; ++i) {
        if (!t.split_root) {
            h.level2[i] = CuLabel::Null;
        } else {
            h.level2[i] = t.split_l1[i] ? CuLabel::Split : CuLabel::NotSplit;
        }
        for (int j = 0; j < 4; ++j) {
            if (h.level2[i] != CuLabel::Split) {
                h.level3[i][j] = CuLabel::Null;
            } else {
                h.level3[i][j] = t.split_l2[i][j] ? CuLabel::Split : CuLabel::NotSplit;
            }
        }
    }
    return h;
}

int64_t count_partition_patterns(int max_depth) {
    // patterns(depth d block) = 1 + patterns(d+1)^4, bottoming out at 2
    // options for a 16x16 block (split into four 8x8 or not).
    if (max_depth < 1 || max_depth > 3)
        throw argument_error("count_partition_patterns: max_depth must be 1..3");
    int64_t n = 1; // the leaf-only choice below the deepest level
    for (int d = 0; d < max_depth; ++d) n = 1 + n * n * n * n;
    return n;
}

void for_each_partition(const std::function<void(const PartitionTree&)>& fn) {
    PartitionTree t;
    t.split_root = false;
    fn(t);
    t.split_root = true;
    // 17 variants per quadrant: not split, or split with each 16x16 block
    // independently split (16 combinations).
    for (int v0 = 0; v0 < 17; ++v0)
        for (int v1 = 0; v1 < 17; ++v1)
            for (int v2 = 0; v2 < 17; ++v2)
                for (int v3 = 0; v3 < 17; ++v3) {
                    const int v[4] = {v0, v1, v2, v3};
                    for (int i = 0; i < 4; ++i) {
                        t.split_l1[i] = v[i] > 0;
                        const int bits = v[i] > 0 ? v[i] - 1 : 0;
                        for (int j = 0; j < 4; ++j) t.split_l2[i][j] = (bits >> j) & 1;
                    }
                    fn(t);
                }
}

HcpmProb HcpmProb::from_labels(const Hcpm& h) {
    h.validate();
    HcpmProb p;
    p.p1 = h.level1 == CuLabel::Split ? 1.0f : 0.0f;
    for (int i = 0; i < 4; ++i) {
        p.valid2[i] = h.level2[i] != CuLabel::Null;
        p.p2[i] = h.level2[i] == CuLabel::Split ? 1.0f : 0.0f;
        for (int j = 0; j < 4; ++j) {
            p.valid3[i][j] = h.level3[i][j] != CuLabel::Null;
            p.p3[i][j] = h.level3[i][j] == CuLabel::Split ? 1.0f : 0.0f;
        }
    }
    return p;
}

void HcpmProb::validate() const {
    auto in_range = [](float v) { return v >= 0.0f && v <= 1.0f; };
    if (!in_range(p1)) throw hcpm_error("probability out of [0,1]");
    for (int i = 0; i < 4; ++i) {
        if (valid2[i] && !in_range(p2[i])) throw hcpm_error("probability out of [0,1]");
        for (int j = 0; j < 4; ++j) {
            if (valid3[i][j] && !in_range(p3[i][j])) throw hcpm_error("probability out of [0,1]");
            if (valid3[i][j] && !valid2[i])
                throw hcpm_error("valid level-3 cell under invalid level-2 cell");
        }
    }
}

ThresholdSet ThresholdSet::from_width(double d) {
    if (!(d >= 0.0 && d <= 1.0)) throw argument_error("threshold width must be in [0,1]");
    ThresholdSet t;
    for (int l = 1; l <= 3; ++l) {
        const double half = 0.5 * std::pow(d, 2.0 - 0.5 * l);
        t.upper[l - 1] = 0.5 + half;
        t.lower[l - 1] = 0.5 - half;
    }
    return t;
}

// Degenerate zone (lower == upper, the single-threshold case): ties resolve
// to Split. A real zone keeps its boundary points uncertain, so d = 1 sends
// every probability, including exact 0/1, back to the exhaustive search.
static Decision decide(float p, double lower, double upper) {
    if (lower == upper) return p >= upper ? Decision::Split : Decision::NotSplit;
    if (p > upper) return Decision::Split;
    if (p < lower) return Decision::NotSplit;
    return Decision::Uncertain;
}

Decision binarize_one(float p, const ThresholdSet& t, int level) {
    if (level < 0 || level > 2) throw argument_error("binarize_one: level must be 0..2");
    return decide(p, t.lower[level], t.upper[level]);
}

DecisionMap binarize(const HcpmProb& p, const ThresholdSet& t) {
    p.validate();
    DecisionMap m;
    m.d1 = decide(p.p1, t.lower[0], t.upper[0]);
    for (int i = 0; i < 4; ++i) {
        m.d2[i] = p.valid2[i] ? decide(p.p2[i], t.lower[1], t.upper[1]) : Decision::NotSplit;
        for (int j = 0; j < 4; ++j)
            m.d3[i][j] =
                p.valid3[i][j] ? decide(p.p3[i][j], t.lower[2], t.upper[2]) : Decision::NotSplit;
    }
    return m;
}

} // namespace cupart::hcpm
