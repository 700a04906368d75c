#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cupart/cnn/train.hpp"
#include "cupart/codec/rd.hpp"
#include "cupart/data/dataset.hpp"
#include "cupart/lstm/train.hpp"

namespace cupart::eval {

struct EvalOptions {
    double d = 0.0;           // uncertain-zone width, Eq.-style power thresholds
    bool early_term = true;
    bool cnn_only = false;    // inter databases: ignore the LSTM
    bool use_oracle_labels = false; // diagnostic: stored labels as probabilities
    std::vector<int> qp_filter;     // empty means all
    codec::CostModelConfig cost;
};

struct LevelAcc {
    int64_t correct = 0;
    int64_t total = 0;
    double rate() const { return total ? double(correct) / double(total) : 0.0; }
};

struct QpStats {
    std::array<LevelAcc, 3> acc;
    double rd_oracle = 0.0;
    double rd_pred = 0.0;
    uint64_t ctus = 0;
    uint64_t precoded = 0;
    bool rd_valid = true; // false for the original-input ablation

    double rd_delta_pct() const {
        return rd_oracle > 0.0 ? 100.0 * (rd_pred - rd_oracle) / rd_oracle : 0.0;
    }
    // reduction of pre-coded CUs vs. the exhaustive 85 per CTU
    double cu_reduction_pct() const {
        return ctus ? 100.0 * (1.0 - double(precoded) / (85.0 * double(ctus))) : 0.0;
    }
};

struct EvalReport {
    std::map<int, QpStats> per_qp;
    QpStats overall;
    double seconds_infer = 0.0;
    double seconds_oracle = 0.0;
    double seconds_pred_encode = 0.0;
    double d = 0.0;
    uint8_t db_mode = 0;

    std::string to_json() const;
};

// Per-record split probabilities for a whole database: CNN per CTU for intra
// (and the cnn-only ablation), CNN features + LSTM sequences for inter.
std::vector<hcpm::HcpmProb> predict_probs(const data::LoadedDb& db,
                                          const cnn::EthCnnParams* cnn,
                                          const lstm::EthLstmParams* lstm,
                                          const EvalOptions& opt, double* seconds = nullptr);

EvalReport run_eval(const data::LoadedDb& db, const cnn::EthCnnParams* cnn,
                    const lstm::EthLstmParams* lstm, const EvalOptions& opt);

struct SweepPoint {
    double d = 0.0;
    double rd_delta_pct = 0.0;
    double cu_reduction_pct = 0.0;
    std::map<int, double> rd_delta_per_qp;
    std::map<int, double> cu_reduction_per_qp;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    bool monotone = true; // rd_delta non-increasing and precoded non-decreasing in d

    std::string csv() const;
    std::string to_json() const;
};

SweepResult run_sweep(const data::LoadedDb& db, const cnn::EthCnnParams* cnn,
                      const lstm::EthLstmParams* lstm, const std::vector<double>& d_values,
                      const EvalOptions& base_opt);

struct BenchReport {
    double infer_per_ctu_ms = 0.0;
    double oracle_per_ctu_ms = 0.0;
    double guided_encode_per_ctu_ms = 0.0;
    double infer_share = 0.0; // inference / (inference + guided encode)
    uint64_t ctus = 0;

    std::string to_json() const;
};

BenchReport run_bench(const data::LoadedDb& db, const cnn::EthCnnParams& cnn,
                      const EvalOptions& opt);

} // namespace cupart::eval
