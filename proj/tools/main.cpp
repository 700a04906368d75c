// Command-line front end: database construction, training, evaluation and
// the architecture/complexity reports. Exit codes: 0 ok, 1 usage, 2 data
// error, 3 verification failure.

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cupart/analysis/depth_corr.hpp"
#include "cupart/cnn/train.hpp"
#include "cupart/data/dataset.hpp"
#include "cupart/eval/eval.hpp"
#include "cupart/lstm/train.hpp"
#include "cupart/report/flops.hpp"

using nlohmann::json;
using namespace cupart;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitVerify = 3;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot write " + path);
    os << text;
    if (text.empty() || text.back() != '\n') os << '\n';
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty())
        std::cout << text << '\n';
    else
        write_text(out, text);
}

struct AblationFlags {
    bool orig_input = false;
    bool cnn_only = false;
    bool no_early_term = false;
};

AblationFlags parse_ablations(const std::vector<std::string>& values) {
    AblationFlags f;
    for (const std::string& v : values) {
        if (v == "orig-input")
            f.orig_input = true;
        else if (v == "residue-input")
            f.orig_input = false;
        else if (v == "cnn-only")
            f.cnn_only = true;
        else if (v == "cnn-lstm")
            f.cnn_only = false;
        else if (v == "no-early-term")
            f.no_early_term = true;
        else
            throw CLI::ValidationError("--ablation", "unknown ablation: " + v);
    }
    return f;
}

json loss_curve_json(const std::vector<float>& curve) {
    json j = json::array();
    for (float v : curve) j.push_back(v);
    return j;
}

int run_verify_tables() {
    using report::diff_reports;
    int failures = 0;
    {
        const auto expected = cnn::eth_cnn_expected_table();
        const auto actual = cnn::eth_cnn_flop_report();
        const auto diffs = diff_reports(expected, actual);
        std::cout << "ETH-CNN table: " << (diffs.empty() ? "PASS" : "FAIL") << "\n";
        for (const auto& d : diffs) {
            std::cout << "  " << d.name << " " << d.field << ": expected " << d.expected
                      << ", got " << d.actual << "\n";
            ++failures;
        }
        std::cout << "  totals: params " << actual.total_params() << ", adds "
                  << actual.total_adds() << ", mults " << actual.total_mults() << "\n";
    }
    {
        const auto expected = lstm::eth_lstm_expected_table();
        const auto actual = lstm::eth_lstm_flop_report();
        const auto diffs = diff_reports(expected, actual);
        std::cout << "ETH-LSTM table: " << (diffs.empty() ? "PASS" : "FAIL") << "\n";
        for (const auto& d : diffs) {
            std::cout << "  " << d.name << " " << d.field << ": expected " << d.expected
                      << ", got " << d.actual << "\n";
            ++failures;
        }
        std::cout << "  totals: params " << actual.total_params() << " (non-bias), adds "
                  << actual.total_adds() << ", mults " << actual.total_mults() << "\n";
    }
    return failures == 0 ? kExitOk : kExitVerify;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"learned CU partition prediction on a toy quad-tree codec"};
    app.require_subcommand(1);

    // ---- gen-data ----------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "generate synthetic luma content");
    data::GenConfig gen_cfg;
    std::string gen_kind = "stills";
    gen->add_option("--seed", gen_cfg.seed, "rng seed");
    gen->add_option("--count", gen_cfg.count, "number of files");
    gen->add_option("--width", gen_cfg.width, "frame width (multiple of 64)");
    gen->add_option("--height", gen_cfg.height, "frame height (multiple of 64)");
    gen->add_option("--kind", gen_kind, "stills|sequence")
        ->check(CLI::IsMember({"stills", "sequence"}));
    gen->add_option("--frames", gen_cfg.frames, "frames per sequence");
    gen->add_option("--density", gen_cfg.density, "texture/fragmentation density in [0,1]");
    gen->add_option("--out", gen_cfg.out_dir, "output directory")->required();
    gen->add_option("--prefix", gen_cfg.prefix, "file name prefix");

    // ---- build-db ----------------------------------------------------------
    auto* build = app.add_subcommand("build-db", "label CTUs with the exhaustive search");
    data::BuildDbConfig build_cfg;
    std::string build_mode = "intra";
    std::vector<std::string> build_ablation;
    build->add_option("--sources", build_cfg.sources, "input .cphy files")->required();
    build->add_option("--qp-list", build_cfg.qps, "qps to label at");
    build->add_option("--mode", build_mode, "intra|inter")
        ->check(CLI::IsMember({"intra", "inter"}));
    build->add_option("--ablation", build_ablation, "orig-input|residue-input");
    build->add_option("--out", build_cfg.out_prefix, "output prefix")->required();

    // ---- split-db ----------------------------------------------------------
    auto* split = app.add_subcommand("split-db", "source-level train/val/test split");
    std::string split_manifest, split_out;
    std::vector<double> split_ratios{0.8, 0.1, 0.1};
    uint64_t split_seed = 1;
    split->add_option("--db", split_manifest, "database manifest")->required();
    split->add_option("--ratios", split_ratios, "train val test ratios")->expected(3);
    split->add_option("--seed", split_seed, "rng seed");
    split->add_option("--out", split_out, "output prefix (defaults to --db minus suffix)");

    // ---- train-cnn ---------------------------------------------------------
    auto* tcnn = app.add_subcommand("train-cnn", "train the hierarchical CNN");
    std::string tcnn_db, tcnn_out;
    cnn::CnnTrainConfig tcnn_cfg;
    tcnn->add_option("--db", tcnn_db, "training manifest")->required();
    tcnn->add_option("--out", tcnn_out, "output model file")->required();
    tcnn->add_option("--iters", tcnn_cfg.iterations, "training iterations");
    tcnn->add_option("--batch", tcnn_cfg.batch_size, "batch size");
    tcnn->add_option("--lr0", tcnn_cfg.sgd.lr0, "initial learning rate");
    tcnn->add_option("--decay-interval", tcnn_cfg.sgd.decay_interval,
                     "iterations per 1% lr decay");
    tcnn->add_option("--seed", tcnn_cfg.seed, "rng seed");
    tcnn->add_option("--log-every", tcnn_cfg.log_every, "progress print period");

    // ---- train-lstm --------------------------------------------------------
    auto* tlstm = app.add_subcommand("train-lstm", "train the hierarchical LSTM");
    std::string tlstm_db, tlstm_cnn, tlstm_out;
    lstm::LstmTrainConfig tlstm_cfg;
    tlstm->add_option("--db", tlstm_db, "inter training manifest")->required();
    tlstm->add_option("--model", tlstm_cnn, "frozen residue-trained cnn model")->required();
    tlstm->add_option("--out", tlstm_out, "output model file")->required();
    tlstm->add_option("--iters", tlstm_cfg.iterations, "training iterations");
    tlstm->add_option("--batch", tlstm_cfg.batch_size, "window batch size");
    tlstm->add_option("--window", tlstm_cfg.window, "BPTT length T");
    tlstm->add_option("--overlap", tlstm_cfg.overlap, "window overlap");
    tlstm->add_option("--lr0", tlstm_cfg.sgd.lr0, "initial learning rate");
    tlstm->add_option("--decay-interval", tlstm_cfg.sgd.decay_interval,
                      "iterations per 1% lr decay");
    tlstm->add_option("--seed", tlstm_cfg.seed, "rng seed");
    tlstm->add_option("--log-every", tlstm_cfg.log_every, "progress print period");

    // ---- eval --------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "accuracy / rd / complexity report");
    std::string ev_db, ev_cnn, ev_lstm, ev_out;
    std::vector<std::string> ev_ablation;
    eval::EvalOptions ev_opt;
    bool ev_oracle_labels = false;
    ev->add_option("--db", ev_db, "test manifest")->required();
    ev->add_option("--model", ev_cnn, "cnn model file");
    ev->add_option("--lstm", ev_lstm, "lstm model file");
    ev->add_option("--d", ev_opt.d, "uncertain-zone width in [0,1]");
    ev->add_option("--qp-list", ev_opt.qp_filter, "restrict to these qps");
    ev->add_option("--ablation", ev_ablation, "cnn-only|cnn-lstm|no-early-term");
    ev->add_flag("--oracle-labels", ev_oracle_labels,
                 "use stored labels as the predictor (diagnostic)");
    ev->add_option("--out", ev_out, "output json (stdout if omitted)");

    // ---- sweep -------------------------------------------------------------
    auto* sw = app.add_subcommand("sweep", "complexity/RD trade-off over d");
    std::string sw_db, sw_cnn, sw_lstm, sw_out, sw_csv;
    std::vector<double> sw_d{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<std::string> sw_ablation;
    eval::EvalOptions sw_opt;
    sw->add_option("--db", sw_db, "test manifest")->required();
    sw->add_option("--model", sw_cnn, "cnn model file")->required();
    sw->add_option("--lstm", sw_lstm, "lstm model file");
    sw->add_option("--d-list", sw_d, "uncertain-zone widths");
    sw->add_option("--qp-list", sw_opt.qp_filter, "restrict to these qps");
    sw->add_option("--ablation", sw_ablation, "cnn-only|cnn-lstm");
    sw->add_option("--out", sw_out, "output json (stdout if omitted)");
    sw->add_option("--csv", sw_csv, "also write plot-ready csv here");

    // ---- bench -------------------------------------------------------------
    auto* bench = app.add_subcommand("bench", "wall-clock timing per CTU");
    std::string bench_db, bench_cnn, bench_out;
    eval::EvalOptions bench_opt;
    bench->add_option("--db", bench_db, "test manifest")->required();
    bench->add_option("--model", bench_cnn, "cnn model file")->required();
    bench->add_option("--d", bench_opt.d, "uncertain-zone width");
    bench->add_option("--out", bench_out, "output json (stdout if omitted)");

    // ---- verify-tables -----------------------------------------------------
    auto* verify = app.add_subcommand("verify-tables",
                                      "check the architecture against the embedded tables");
    (void)verify;

    // ---- depth-corr --------------------------------------------------------
    auto* dc = app.add_subcommand("depth-corr", "temporal depth correlation analysis");
    std::string dc_db, dc_out;
    std::vector<int> dc_dist{1, 2, 3, 4};
    dc->add_option("--db", dc_db, "inter manifest")->required();
    dc->add_option("--distances", dc_dist, "GOP distances");
    dc->add_option("--out", dc_out, "output json (stdout if omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            gen_cfg.sequence = gen_kind == "sequence";
            const auto paths = data::gen_synthetic(gen_cfg);
            for (const auto& p : paths) std::cout << p << "\n";
            return kExitOk;
        }

        if (build->parsed()) {
            build_cfg.inter = build_mode == "inter";
            build_cfg.original_input = parse_ablations(build_ablation).orig_input;
            const auto manifest = data::build_db(build_cfg);
            std::cout << manifest.records_file << " (" << manifest.record_count()
                      << " records)\n";
            return kExitOk;
        }

        if (split->parsed()) {
            const auto manifest = data::DatabaseManifest::from_json_file(split_manifest);
            if (split_out.empty()) {
                split_out = split_manifest;
                const std::string suffix = ".manifest.json";
                if (split_out.size() > suffix.size() &&
                    split_out.substr(split_out.size() - suffix.size()) == suffix)
                    split_out.resize(split_out.size() - suffix.size());
            }
            data::split_db(manifest, {split_ratios[0], split_ratios[1], split_ratios[2]},
                           split_seed, split_out);
            std::cout << split_out << ".{train,val,test}.manifest.json\n";
            return kExitOk;
        }

        if (tcnn->parsed()) {
            const auto db = data::load_db(tcnn_db);
            const auto result = cnn::train_eth_cnn(db.records, tcnn_cfg);
            cnn::save_eth_cnn(tcnn_out, result.params);
            json j;
            j["schema"] = "cupart.train/1";
            j["final_loss"] = result.loss_curve.empty() ? 0.0f : result.loss_curve.back();
            j["loss_curve"] = loss_curve_json(result.loss_curve);
            write_text(tcnn_out + ".train.json", j.dump(2));
            std::cout << tcnn_out << "\n";
            return kExitOk;
        }

        if (tlstm->parsed()) {
            const auto db = data::load_db(tlstm_db);
            if (db.manifest.mode == data::kModeIntra)
                throw data_error("train-lstm: needs an inter-mode database");
            const auto cnn_params = cnn::load_eth_cnn(tlstm_cnn);
            const auto sequences =
                lstm::build_feature_sequences(cnn_params, db.records, db.source_of);
            const auto result = lstm::train_eth_lstm(sequences, tlstm_cfg);
            lstm::save_eth_lstm(tlstm_out, result.params);
            json j;
            j["schema"] = "cupart.train/1";
            j["final_loss"] = result.loss_curve.empty() ? 0.0f : result.loss_curve.back();
            j["loss_curve"] = loss_curve_json(result.loss_curve);
            write_text(tlstm_out + ".train.json", j.dump(2));
            std::cout << tlstm_out << "\n";
            return kExitOk;
        }

        if (ev->parsed()) {
            const auto flags = parse_ablations(ev_ablation);
            ev_opt.cnn_only = flags.cnn_only;
            ev_opt.early_term = !flags.no_early_term;
            ev_opt.use_oracle_labels = ev_oracle_labels;
            const auto db = data::load_db(ev_db);
            std::optional<cnn::EthCnnParams> cnn_params;
            std::optional<lstm::EthLstmParams> lstm_params;
            if (!ev_cnn.empty()) cnn_params = cnn::load_eth_cnn(ev_cnn);
            if (!ev_lstm.empty()) lstm_params = lstm::load_eth_lstm(ev_lstm);
            if (!ev_oracle_labels && !cnn_params)
                throw data_error("eval: --model is required unless --oracle-labels");
            if (db.manifest.mode != data::kModeIntra && !ev_opt.cnn_only && !ev_oracle_labels &&
                !lstm_params)
                throw data_error(
                    "eval: inter database needs --lstm (or --ablation cnn-only)");
            if (db.manifest.mode == data::kModeIntra && lstm_params)
                throw data_error("eval: lstm model given for an intra database");
            const auto rep =
                eval::run_eval(db, cnn_params ? &*cnn_params : nullptr,
                               lstm_params ? &*lstm_params : nullptr, ev_opt);
            emit(ev_out, rep.to_json());
            return kExitOk;
        }

        if (sw->parsed()) {
            const auto flags = parse_ablations(sw_ablation);
            sw_opt.cnn_only = flags.cnn_only;
            const auto db = data::load_db(sw_db);
            const auto cnn_params = cnn::load_eth_cnn(sw_cnn);
            std::optional<lstm::EthLstmParams> lstm_params;
            if (!sw_lstm.empty()) lstm_params = lstm::load_eth_lstm(sw_lstm);
            if (db.manifest.mode != data::kModeIntra && !sw_opt.cnn_only && !lstm_params)
                throw data_error(
                    "sweep: inter database needs --lstm (or --ablation cnn-only)");
            const auto result = eval::run_sweep(
                db, &cnn_params, lstm_params ? &*lstm_params : nullptr, sw_d, sw_opt);
            if (!sw_csv.empty()) write_text(sw_csv, result.csv());
            emit(sw_out, result.to_json());
            if (!result.monotone) {
                std::cerr << "sweep: monotonicity violated\n";
                return kExitVerify;
            }
            return kExitOk;
        }

        if (bench->parsed()) {
            const auto db = data::load_db(bench_db);
            const auto cnn_params = cnn::load_eth_cnn(bench_cnn);
            const auto rep = eval::run_bench(db, cnn_params, bench_opt);
            emit(bench_out, rep.to_json());
            return kExitOk;
        }

        if (verify->parsed()) return run_verify_tables();

        if (dc->parsed()) {
            const auto db = data::load_db(dc_db);
            // per (source, qp): one series of per-frame depth maps
            std::map<int, std::vector<std::vector<std::vector<int>>>> series_per_qp;
            for (uint32_t si = 0; si < db.manifest.sources.size(); ++si) {
                const auto& src = db.manifest.sources[si];
                const int cols = src.width / 64, rows = src.height / 64;
                for (int qp : db.manifest.qps) {
                    std::map<uint32_t, std::vector<hcpm::PartitionTree>> frames;
                    for (size_t i = 0; i < db.records.size(); ++i) {
                        if (db.source_of[i] != si || db.records[i].qp != qp) continue;
                        auto& trees = frames[db.records[i].frame_index];
                        if (trees.empty()) trees.resize(size_t(cols) * rows);
                        trees[db.records[i].ctu_index] =
                            hcpm::hcpm_to_tree(db.records[i].labels);
                    }
                    std::vector<std::vector<int>> maps;
                    for (const auto& [t, trees] : frames)
                        maps.push_back(analysis::frame_depth_units(trees, cols, rows));
                    if (maps.size() >= 2) series_per_qp[qp].push_back(std::move(maps));
                }
            }
            if (series_per_qp.empty()) throw data_error("depth-corr: no usable sequences");
            json j;
            j["schema"] = "cupart.depthcorr/1";
            json per;
            for (const auto& [qp, series] : series_per_qp) {
                const auto points = analysis::depth_correlation_multi(series, dc_dist);
                json arr = json::array();
                for (const auto& pt : points) {
                    json p;
                    p["gop_distance"] = pt.gop_distance;
                    if (pt.cc)
                        p["cc"] = *pt.cc;
                    else
                        p["cc"] = nullptr;
                    p["mse"] = pt.mse;
                    p["pairs"] = pt.pairs;
                    arr.push_back(std::move(p));
                }
                per[std::to_string(qp)] = std::move(arr);
            }
            j["per_qp"] = std::move(per);
            emit(dc_out, j.dump(2));
            return kExitOk;
        }
    } catch (const argument_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
