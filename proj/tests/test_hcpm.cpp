#include "doctest.h"

#include "cupart/hcpm/hcpm.hpp"
#include "cupart/rng.hpp"

using namespace cupart;
using namespace cupart::hcpm;

namespace {

Hcpm all_notsplit() {
    Hcpm h;
    h.level1 = CuLabel::NotSplit;
    return h; // level2/3 default to Null
}

Hcpm all_split() {
    Hcpm h;
    h.level1 = CuLabel::Split;
    for (int i = 0; i < 4; ++i) {
        h.level2[i] = CuLabel::Split;
        for (int j = 0; j < 4; ++j) h.level3[i][j] = CuLabel::Split;
    }
    return h;
}

} // namespace

TEST_CASE("hcpm invariants") {
    CHECK_NOTHROW(all_notsplit().validate());
    CHECK_NOTHROW(all_split().validate());

    Hcpm bad = all_notsplit();
    bad.level2[0] = CuLabel::Split; // children of a non-split root must be null
    CHECK_THROWS_AS(bad.validate(), hcpm_error);

    Hcpm bad2 = all_split();
    bad2.level3[1][2] = CuLabel::Null; // split level-2 demands non-null children
    CHECK_THROWS_AS(bad2.validate(), hcpm_error);
}

TEST_CASE("hcpm to tree and back") {
    CHECK(hcpm_to_tree(all_notsplit()).leaf_count() == 1);
    CHECK(hcpm_to_tree(all_split()).leaf_count() == 64);

    // level1 split, quadrant 0 split, its children not split -> 4x16px + 3x32px
    Hcpm h;
    h.level1 = CuLabel::Split;
    h.level2 = {CuLabel::Split, CuLabel::NotSplit, CuLabel::NotSplit, CuLabel::NotSplit};
    for (int j = 0; j < 4; ++j) h.level3[0][j] = CuLabel::NotSplit;
    CHECK(hcpm_to_tree(h).leaf_count() == 7);

    // single leaf tree -> NotSplit root plus 20 nulls
    const Hcpm leaf = tree_to_hcpm(PartitionTree{});
    CHECK(leaf.level1 == CuLabel::NotSplit);
    int nulls = 0;
    for (int i = 0; i < 4; ++i) {
        if (leaf.level2[i] == CuLabel::Null) ++nulls;
        for (int j = 0; j < 4; ++j)
            if (leaf.level3[i][j] == CuLabel::Null) ++nulls;
    }
    CHECK(nulls == 20);

    // full-depth tree -> 21 split labels
    const Hcpm full = tree_to_hcpm(hcpm_to_tree(all_split()));
    CHECK(full == all_split());
}

TEST_CASE("round trip over every legal partition") {
    int64_t count = 0;
    for_each_partition([&](const PartitionTree& t) {
        ++count;
        const Hcpm h = tree_to_hcpm(t);
        h.validate();
        CHECK(hcpm_to_tree(h) == t);
    });
    CHECK(count == 83522);
}

TEST_CASE("partition pattern counts") {
    CHECK(count_partition_patterns(1) == 2);
    CHECK(count_partition_patterns(2) == 17);
    CHECK(count_partition_patterns(3) == 83522);
    CHECK_THROWS_AS(count_partition_patterns(0), argument_error);
    CHECK_THROWS_AS(count_partition_patterns(4), argument_error);
}

TEST_CASE("label block encoding") {
    const Hcpm h = all_split();
    const auto bytes = h.encode();
    CHECK(bytes.size() == 21);
    for (uint8_t b : bytes) CHECK(b == 1);
    CHECK(Hcpm::decode(bytes.data()) == h);

    auto bad = all_notsplit().encode();
    bad[3] = 7;
    CHECK_THROWS_AS(Hcpm::decode(bad.data()), hcpm_error);
}

TEST_CASE("thresholds from width") {
    const ThresholdSet t0 = ThresholdSet::from_width(0.0);
    for (int l = 0; l < 3; ++l) {
        CHECK(t0.lower[l] == doctest::Approx(0.5));
        CHECK(t0.upper[l] == doctest::Approx(0.5));
    }
    const ThresholdSet t1 = ThresholdSet::from_width(1.0);
    for (int l = 0; l < 3; ++l) {
        CHECK(t1.lower[l] == doctest::Approx(0.0));
        CHECK(t1.upper[l] == doctest::Approx(1.0));
    }
    const ThresholdSet tq = ThresholdSet::from_width(0.25);
    CHECK(tq.upper[1] == doctest::Approx(0.625));
    CHECK(tq.lower[1] == doctest::Approx(0.375));
    // nesting: level-1 zone inside level-2 inside level-3
    for (int l = 0; l < 2; ++l) {
        CHECK(tq.lower[l] >= tq.lower[l + 1]);
        CHECK(tq.upper[l] <= tq.upper[l + 1]);
    }
    CHECK_THROWS_AS(ThresholdSet::from_width(-0.1), argument_error);
    CHECK_THROWS_AS(ThresholdSet::from_width(1.1), argument_error);
}

TEST_CASE("binarize") {
    HcpmProb p = HcpmProb::from_labels(tree_to_hcpm(PartitionTree{}));
    p.p1 = 0.9f;
    ThresholdSet t;
    t.lower = {0.375, 0.375, 0.375}; // exactly representable boundaries
    t.upper = {0.625, 0.625, 0.625};
    CHECK(binarize(p, t).d1 == Decision::Split);

    p.p1 = 0.5f;
    const ThresholdSet t5 = ThresholdSet::from_width(0.0);
    CHECK(binarize(p, t5).d1 == Decision::Split); // ties resolve to split

    p.p1 = 0.55f;
    CHECK(binarize(p, t).d1 == Decision::Uncertain);
    // boundaries of a real zone stay uncertain; beyond them is decided
    p.p1 = 0.625f;
    CHECK(binarize(p, t).d1 == Decision::Uncertain);
    p.p1 = 0.6875f;
    CHECK(binarize(p, t).d1 == Decision::Split);
    p.p1 = 0.25f;
    CHECK(binarize(p, t).d1 == Decision::NotSplit);
    // full-width zone: even exact 0/1 probabilities defer to the search
    const ThresholdSet t1 = ThresholdSet::from_width(1.0);
    p.p1 = 1.0f;
    CHECK(binarize(p, t1).d1 == Decision::Uncertain);
    p.p1 = 0.0f;
    CHECK(binarize(p, t1).d1 == Decision::Uncertain);

    // d = 0 is a total function into split / not-split
    for (float v : {0.0f, 0.2f, 0.5f, 0.7f, 1.0f}) {
        p.p1 = v;
        CHECK(binarize(p, t5).d1 != Decision::Uncertain);
    }
}

TEST_CASE("uncertain zones grow with d") {
    Hcpm full;
    full.level1 = CuLabel::Split;
    for (int i = 0; i < 4; ++i) {
        full.level2[i] = CuLabel::Split;
        for (int j = 0; j < 4; ++j) full.level3[i][j] = CuLabel::Split;
    }
    HcpmProb p = HcpmProb::from_labels(full);
    cupart::Rng rng(99);
    p.p1 = float(rng.uniform());
    for (int i = 0; i < 4; ++i) p.p2[i] = float(rng.uniform());
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) p.p3[i][j] = float(rng.uniform());

    for (double d1 = 0.0; d1 <= 1.0; d1 += 0.25)
        for (double d2 = d1; d2 <= 1.0; d2 += 0.25) {
            const DecisionMap m1 = binarize(p, ThresholdSet::from_width(d1));
            const DecisionMap m2 = binarize(p, ThresholdSet::from_width(d2));
            auto subset = [](Decision a, Decision b) {
                return a != Decision::Uncertain || b == Decision::Uncertain;
            };
            CHECK(subset(m1.d1, m2.d1));
            for (int i = 0; i < 4; ++i) {
                CHECK(subset(m1.d2[i], m2.d2[i]));
                for (int j = 0; j < 4; ++j) CHECK(subset(m1.d3[i][j], m2.d3[i][j]));
            }
        }
}

TEST_CASE("depth at unit") {
    PartitionTree t;
    t.split_root = true;
    t.split_l1 = {true, false, false, false};
    t.split_l2[0] = {true, false, false, false};
    CHECK(t.depth_at_unit(0, 0) == 3); // top-left 16x16 split to 8x8
    CHECK(t.depth_at_unit(0, 1) == 2);
    CHECK(t.depth_at_unit(0, 2) == 1); // quadrant 1 is a 32x32 leaf
    CHECK(t.depth_at_unit(3, 3) == 1);

    PartitionTree leaf;
    CHECK(leaf.depth_at_unit(2, 2) == 0);
}
