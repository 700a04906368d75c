#include "cupart/eval/eval.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "json.hpp"

namespace cupart::eval {

using hcpm::CuLabel;
using hcpm::HcpmProb;
using nlohmann::json;

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

bool qp_selected(const EvalOptions& opt, int qp) {
    return opt.qp_filter.empty() ||
           std::find(opt.qp_filter.begin(), opt.qp_filter.end(), qp) != opt.qp_filter.end();
}

// Predicted split decision for accuracy: emitted cells use the single 0.5
// threshold (ties to split), skipped cells count as not-split.
void tally_accuracy(QpStats& s, const HcpmProb& probs, const hcpm::Hcpm& truth) {
    auto cell = [&](int level, CuLabel y, float p, bool valid) {
        if (y == CuLabel::Null) return;
        ++s.acc[level].total;
        const bool pred_split = valid && p >= 0.5f;
        if (pred_split == (y == CuLabel::Split)) ++s.acc[level].correct;
    };
    cell(0, truth.level1, probs.p1, true);
    for (int i = 0; i < 4; ++i) cell(1, truth.level2[i], probs.p2[i], probs.valid2[i]);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            cell(2, truth.level3[i][j], probs.p3[i][j], probs.valid3[i][j]);
}

json qp_stats_json(const QpStats& s) {
    json j;
    j["ctus"] = s.ctus;
    j["accuracy"] = {{"level1", s.acc[0].rate()},
                     {"level2", s.acc[1].rate()},
                     {"level3", s.acc[2].rate()}};
    if (s.rd_valid) {
        j["rd_oracle"] = s.rd_oracle;
        j["rd_pred"] = s.rd_pred;
        j["rd_delta_pct"] = s.rd_delta_pct();
        j["precoded_cus"] = s.precoded;
        j["cu_reduction_pct"] = s.cu_reduction_pct();
    } else {
        j["rd_delta_pct"] = nullptr;
        j["cu_reduction_pct"] = nullptr;
    }
    return j;
}

} // namespace

std::vector<HcpmProb> predict_probs(const data::LoadedDb& db, const cnn::EthCnnParams* cnn,
                                    const lstm::EthLstmParams* lstm, const EvalOptions& opt,
                                    double* seconds) {
    const size_t n = db.records.size();
    std::vector<HcpmProb> probs(n);
    const hcpm::ThresholdSet thresholds = hcpm::ThresholdSet::from_width(opt.d);
    const double t0 = now_s();

    if (opt.use_oracle_labels) {
        for (size_t i = 0; i < n; ++i) probs[i] = HcpmProb::from_labels(db.records[i].labels);
    } else if (db.manifest.mode == data::kModeIntra || opt.cnn_only || lstm == nullptr) {
        if (!cnn) throw argument_error("predict_probs: cnn model required");
        cnn::EthCnnForwardOptions fwd;
        fwd.early_term = opt.early_term;
        fwd.thresholds = thresholds;
        cnn::EthCnnCache<float> cache;
        for (size_t i = 0; i < n; ++i) {
            eth_cnn_forward(*cnn, db.records[i].block.data(), db.records[i].qp, fwd, cache);
            probs[i] = to_hcpm_prob(cache);
        }
    } else {
        if (!cnn) throw argument_error("predict_probs: cnn model required");
        const auto sequences = lstm::build_feature_sequences(*cnn, db.records, db.source_of);
        lstm::LstmForwardOptions fwd;
        fwd.early_term = opt.early_term;
        fwd.thresholds = thresholds;
        for (const auto& seq : sequences) {
            const auto seq_probs = lstm::forward_sequence(*lstm, seq, fwd);
            for (size_t t = 0; t < seq_probs.size(); ++t)
                probs[seq.record_indices[t]] = seq_probs[t];
        }
    }
    if (seconds) *seconds = now_s() - t0;
    return probs;
}

EvalReport run_eval(const data::LoadedDb& db, const cnn::EthCnnParams* cnn,
                    const lstm::EthLstmParams* lstm, const EvalOptions& opt) {
    EvalReport rep;
    rep.d = opt.d;
    rep.db_mode = db.manifest.mode;
    const bool rd_valid = db.manifest.mode != data::kModeInterOriginal;
    const hcpm::ThresholdSet thresholds = hcpm::ThresholdSet::from_width(opt.d);

    const std::vector<HcpmProb> probs = predict_probs(db, cnn, lstm, opt, &rep.seconds_infer);

    for (size_t i = 0; i < db.records.size(); ++i) {
        const data::CtuSample& rec = db.records[i];
        if (!qp_selected(opt, rec.qp)) continue;
        QpStats& s = rep.per_qp[rec.qp];
        s.rd_valid = rd_valid;
        ++s.ctus;
        tally_accuracy(s, probs[i], rec.labels);
        if (!rd_valid) continue;

        std::array<int16_t, 4096> samples;
        for (size_t k = 0; k < samples.size(); ++k) samples[k] = int16_t(rec.block[k]);

        double t0 = now_s();
        const auto oracle = codec::oracle_rdo_block(rec.block.data(), rec.qp, opt.cost);
        rep.seconds_oracle += now_s() - t0;

        t0 = now_s();
        const auto guided = codec::encode_ctu_with_decisions(
            samples.data(), rec.qp, hcpm::binarize(probs[i], thresholds), opt.cost);
        rep.seconds_pred_encode += now_s() - t0;

        s.rd_oracle += oracle.rd_total;
        s.rd_pred += guided.rd;
        s.precoded += guided.precoded_cus;
    }

    for (const auto& [qp, s] : rep.per_qp) {
        rep.overall.ctus += s.ctus;
        rep.overall.precoded += s.precoded;
        rep.overall.rd_oracle += s.rd_oracle;
        rep.overall.rd_pred += s.rd_pred;
        rep.overall.rd_valid = rd_valid;
        for (int l = 0; l < 3; ++l) {
            rep.overall.acc[l].correct += s.acc[l].correct;
            rep.overall.acc[l].total += s.acc[l].total;
        }
    }
    return rep;
}

std::string EvalReport::to_json() const {
    json j;
    j["schema"] = "cupart.eval/1";
    j["d"] = d;
    j["db_mode"] = int(db_mode);
    json per;
    for (const auto& [qp, s] : per_qp) per[std::to_string(qp)] = qp_stats_json(s);
    j["per_qp"] = std::move(per);
    j["overall"] = qp_stats_json(overall);
    j["timing"] = {{"seconds_infer", seconds_infer},
                   {"seconds_oracle", seconds_oracle},
                   {"seconds_pred_encode", seconds_pred_encode}};
    return j.dump(2);
}

SweepResult run_sweep(const data::LoadedDb& db, const cnn::EthCnnParams* cnn,
                      const lstm::EthLstmParams* lstm, const std::vector<double>& d_values,
                      const EvalOptions& base_opt) {
    if (d_values.empty()) throw argument_error("run_sweep: empty d list");
    if (db.manifest.mode == data::kModeInterOriginal)
        throw argument_error("run_sweep: rd sweep needs residue or intra records");

    // Probabilities do not depend on d; compute once without early termination
    // (emitted values are identical and unread cells stay unread).
    EvalOptions probe = base_opt;
    probe.early_term = false;
    probe.d = 0.0;
    const std::vector<HcpmProb> probs = predict_probs(db, cnn, lstm, probe, nullptr);

    std::vector<std::array<int16_t, 4096>> samples(db.records.size());
    std::vector<double> oracle_rd(db.records.size());
    for (size_t i = 0; i < db.records.size(); ++i) {
        for (size_t k = 0; k < 4096; ++k) samples[i][k] = int16_t(db.records[i].block[k]);
        oracle_rd[i] =
            codec::oracle_rdo_block(db.records[i].block.data(), db.records[i].qp, base_opt.cost)
                .rd_total;
    }

    SweepResult result;
    std::map<int, uint64_t> prev_precoded;
    std::map<int, double> prev_rd;
    bool have_prev = false;

    for (double d : d_values) {
        const hcpm::ThresholdSet thresholds = hcpm::ThresholdSet::from_width(d);
        SweepPoint pt;
        pt.d = d;
        std::map<int, QpStats> per_qp;
        for (size_t i = 0; i < db.records.size(); ++i) {
            const data::CtuSample& rec = db.records[i];
            if (!qp_selected(base_opt, rec.qp)) continue;
            const auto guided = codec::encode_ctu_with_decisions(
                samples[i].data(), rec.qp, hcpm::binarize(probs[i], thresholds), base_opt.cost);
            QpStats& s = per_qp[rec.qp];
            ++s.ctus;
            s.rd_oracle += oracle_rd[i];
            s.rd_pred += guided.rd;
            s.precoded += guided.precoded_cus;
        }
        double rd_o = 0, rd_p = 0;
        uint64_t ctus = 0, precoded = 0;
        for (const auto& [qp, s] : per_qp) {
            pt.rd_delta_per_qp[qp] = s.rd_delta_pct();
            pt.cu_reduction_per_qp[qp] = s.cu_reduction_pct();
            rd_o += s.rd_oracle;
            rd_p += s.rd_pred;
            ctus += s.ctus;
            precoded += s.precoded;
            if (have_prev) {
                if (s.rd_pred > prev_rd[qp] + 1e-9) result.monotone = false;
                if (s.precoded + 0 < prev_precoded[qp]) result.monotone = false;
            }
            prev_rd[qp] = s.rd_pred;
            prev_precoded[qp] = s.precoded;
        }
        pt.rd_delta_pct = rd_o > 0 ? 100.0 * (rd_p - rd_o) / rd_o : 0.0;
        pt.cu_reduction_pct = ctus ? 100.0 * (1.0 - double(precoded) / (85.0 * double(ctus))) : 0.0;
        result.points.push_back(std::move(pt));
        have_prev = true;
    }
    return result;
}

std::string SweepResult::csv() const {
    std::ostringstream os;
    os << "d,rd_delta_pct,cu_reduction_pct";
    if (!points.empty())
        for (const auto& [qp, _] : points[0].rd_delta_per_qp)
            os << ",qp" << qp << "_rd_delta_pct,qp" << qp << "_cu_reduction_pct";
    os << "\n";
    for (const SweepPoint& pt : points) {
        os << pt.d << ',' << pt.rd_delta_pct << ',' << pt.cu_reduction_pct;
        for (const auto& [qp, v] : pt.rd_delta_per_qp)
            os << ',' << v << ',' << pt.cu_reduction_per_qp.at(qp);
        os << "\n";
    }
    return os.str();
}

std::string SweepResult::to_json() const {
    json j;
    j["schema"] = "cupart.sweep/1";
    j["monotone"] = monotone;
    json pts = json::array();
    for (const SweepPoint& pt : points) {
        json p;
        p["d"] = pt.d;
        p["rd_delta_pct"] = pt.rd_delta_pct;
        p["cu_reduction_pct"] = pt.cu_reduction_pct;
        json per_rd, per_cu;
        for (const auto& [qp, v] : pt.rd_delta_per_qp) per_rd[std::to_string(qp)] = v;
        for (const auto& [qp, v] : pt.cu_reduction_per_qp) per_cu[std::to_string(qp)] = v;
        p["rd_delta_per_qp"] = std::move(per_rd);
        p["cu_reduction_per_qp"] = std::move(per_cu);
        pts.push_back(std::move(p));
    }
    j["points"] = std::move(pts);
    return j.dump(2);
}

BenchReport run_bench(const data::LoadedDb& db, const cnn::EthCnnParams& cnn,
                      const EvalOptions& opt) {
    if (db.records.empty()) throw argument_error("run_bench: empty database");
    BenchReport rep;
    rep.ctus = db.records.size();
    const hcpm::ThresholdSet thresholds = hcpm::ThresholdSet::from_width(opt.d);

    double t0 = now_s();
    std::vector<HcpmProb> probs(db.records.size());
    {
        cnn::EthCnnForwardOptions fwd;
        fwd.early_term = opt.early_term;
        fwd.thresholds = thresholds;
        cnn::EthCnnCache<float> cache;
        for (size_t i = 0; i < db.records.size(); ++i) {
            eth_cnn_forward(cnn, db.records[i].block.data(), db.records[i].qp, fwd, cache);
            probs[i] = to_hcpm_prob(cache);
        }
    }
    const double infer_s = now_s() - t0;

    t0 = now_s();
    for (const data::CtuSample& rec : db.records)
        codec::oracle_rdo_block(rec.block.data(), rec.qp, opt.cost);
    const double oracle_s = now_s() - t0;

    t0 = now_s();
    for (size_t i = 0; i < db.records.size(); ++i) {
        std::array<int16_t, 4096> samples;
        for (size_t k = 0; k < 4096; ++k) samples[k] = int16_t(db.records[i].block[k]);
        codec::encode_ctu_with_decisions(samples.data(), db.records[i].qp,
                                         hcpm::binarize(probs[i], thresholds), opt.cost);
    }
    const double guided_s = now_s() - t0;

    const double n = double(rep.ctus);
    rep.infer_per_ctu_ms = 1000.0 * infer_s / n;
    rep.oracle_per_ctu_ms = 1000.0 * oracle_s / n;
    rep.guided_encode_per_ctu_ms = 1000.0 * guided_s / n;
    rep.infer_share = (infer_s + guided_s) > 0 ? infer_s / (infer_s + guided_s) : 0.0;
    return rep;
}

std::string BenchReport::to_json() const {
    json j;
    j["schema"] = "cupart.bench/1";
    j["ctus"] = ctus;
    j["infer_per_ctu_ms"] = infer_per_ctu_ms;
    j["oracle_per_ctu_ms"] = oracle_per_ctu_ms;
    j["guided_encode_per_ctu_ms"] = guided_encode_per_ctu_ms;
    j["infer_share_of_guided_total"] = infer_share;
    return j.dump(2);
}

} // namespace cupart::eval
