#include "doctest.h"

#include <filesystem>

#include "cupart/eval/eval.hpp"

using namespace cupart;
using namespace cupart::eval;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("cupart_eval_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& name) const { return (path / name).string(); }
};

data::LoadedDb make_intra_db(TempDir& dir, uint64_t seed, int count, int edge) {
    data::GenConfig g;
    g.seed = seed;
    g.count = count;
    g.width = edge;
    g.height = edge;
    g.density = 0.6;
    g.out_dir = dir.str("src");
    data::BuildDbConfig b;
    b.sources = data::gen_synthetic(g);
    b.qps = {22, 37};
    b.out_prefix = dir.str("db");
    data::build_db(b);
    return data::load_db(dir.str("db.manifest.json"));
}

} // namespace

TEST_CASE("oracle labels as the model: perfect self-consistency") {
    TempDir dir("oracle");
    const data::LoadedDb db = make_intra_db(dir, 71, 2, 192);

    EvalOptions opt;
    opt.use_oracle_labels = true;
    opt.d = 0.0;
    const EvalReport rep = run_eval(db, nullptr, nullptr, opt);

    for (int l = 0; l < 3; ++l)
        if (rep.overall.acc[l].total > 0) CHECK(rep.overall.acc[l].rate() == 1.0);
    CHECK(rep.overall.rd_pred == rep.overall.rd_oracle);
    CHECK(rep.overall.rd_delta_pct() == 0.0);
    CHECK(rep.overall.cu_reduction_pct() > 0.0);
    CHECK(rep.overall.cu_reduction_pct() <= 100.0 * (1.0 - 1.0 / 85.0) + 1e-9);
}

TEST_CASE("d=1 degenerates to the exhaustive search") {
    TempDir dir("dfull");
    const data::LoadedDb db = make_intra_db(dir, 72, 1, 192);

    Rng rng(73);
    auto cnn = cnn::EthCnnParams::canonical();
    cnn.init(rng);

    EvalOptions opt;
    opt.d = 1.0;
    const EvalReport rep = run_eval(db, &cnn, nullptr, opt);
    CHECK(rep.overall.rd_pred == rep.overall.rd_oracle);
    CHECK(rep.overall.precoded == rep.overall.ctus * 85);
    CHECK(rep.overall.cu_reduction_pct() == 0.0);
}

TEST_CASE("sweep monotonicity and csv schema") {
    TempDir dir("sweep");
    const data::LoadedDb db = make_intra_db(dir, 74, 1, 192);

    Rng rng(75);
    auto cnn = cnn::EthCnnParams::canonical();
    cnn.init(rng);

    EvalOptions opt;
    const std::vector<double> ds{0.0, 0.25, 0.5, 0.75, 1.0};
    const SweepResult sweep = run_sweep(db, &cnn, nullptr, ds, opt);
    CHECK(sweep.monotone);
    REQUIRE(sweep.points.size() == 5);
    CHECK(sweep.points.back().rd_delta_pct == 0.0);
    CHECK(sweep.points.back().cu_reduction_pct == 0.0);
    for (size_t i = 1; i < sweep.points.size(); ++i) {
        CHECK(sweep.points[i].rd_delta_pct <= sweep.points[i - 1].rd_delta_pct + 1e-12);
        CHECK(sweep.points[i].cu_reduction_pct <= sweep.points[i - 1].cu_reduction_pct + 1e-12);
    }

    // csv round trip: header plus one line per point, parseable numbers
    const std::string csv = sweep.csv();
    size_t lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == 6);
    CHECK(csv.rfind("d,rd_delta_pct,cu_reduction_pct", 0) == 0);

    CHECK_THROWS_AS(run_sweep(db, &cnn, nullptr, {}, opt), argument_error);
}

TEST_CASE("eval json: deterministic apart from timing") {
    TempDir dir("json");
    const data::LoadedDb db = make_intra_db(dir, 76, 1, 128);
    EvalOptions opt;
    opt.use_oracle_labels = true;
    const EvalReport r1 = run_eval(db, nullptr, nullptr, opt);
    const EvalReport r2 = run_eval(db, nullptr, nullptr, opt);
    auto strip_timing = [](std::string s) {
        const size_t at = s.find("\"timing\"");
        REQUIRE(at != std::string::npos);
        return s.substr(0, at);
    };
    CHECK(strip_timing(r1.to_json()) == strip_timing(r2.to_json()));
}

TEST_CASE("bench runs and reports plausible numbers") {
    TempDir dir("bench");
    const data::LoadedDb db = make_intra_db(dir, 77, 1, 128);
    Rng rng(78);
    auto cnn = cnn::EthCnnParams::canonical();
    cnn.init(rng);
    EvalOptions opt;
    const BenchReport rep = run_bench(db, cnn, opt);
    CHECK(rep.ctus == db.records.size());
    CHECK(rep.infer_per_ctu_ms > 0.0);
    CHECK(rep.oracle_per_ctu_ms > 0.0);
    // the guided encode evaluates at most as many CUs as the oracle
    CHECK(rep.guided_encode_per_ctu_ms <= rep.oracle_per_ctu_ms * 1.5);
    CHECK(rep.infer_share >= 0.0);
    CHECK(rep.infer_share <= 1.0);
}

TEST_CASE("qp filter") {
    TempDir dir("qpf");
    const data::LoadedDb db = make_intra_db(dir, 79, 1, 128);
    EvalOptions opt;
    opt.use_oracle_labels = true;
    opt.qp_filter = {22};
    const EvalReport rep = run_eval(db, nullptr, nullptr, opt);
    CHECK(rep.per_qp.size() == 1);
    CHECK(rep.per_qp.count(22) == 1);
}
