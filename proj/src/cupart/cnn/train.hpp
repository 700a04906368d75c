#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cupart/cnn/eth_cnn.hpp"
#include "cupart/data/dataset.hpp"
#include "cupart/nn/sgd.hpp"

namespace cupart::cnn {

struct CnnTrainConfig {
    int64_t iterations = 2000;
    int batch_size = 64;
    nn::SgdConfig sgd{0.01, 0.9, 0.99, 2000};
    uint64_t seed = 1;
    double init_stddev = 0.1;
    int64_t log_every = 0; // 0: silent
};

struct CnnTrainResult {
    EthCnnParams params;
    std::vector<float> loss_curve; // batch-mean loss per iteration
};

// Minimizes the batch-mean of per-sample masked cross-entropy sums with
// momentum SGD. Single-threaded and bitwise reproducible under the seed.
CnnTrainResult train_eth_cnn(std::span<const data::CtuSample> records,
                             const CnnTrainConfig& cfg);

// Fraction of correct split decisions (threshold 0.5, ties to split) over
// valid ground-truth cells, per level.
struct AccuracyReport {
    std::array<int64_t, 3> correct{};
    std::array<int64_t, 3> total{};
    double rate(int level) const {
        return total[level] ? double(correct[level]) / double(total[level]) : 0.0;
    }
};

AccuracyReport eval_cnn_accuracy(const EthCnnParams& params,
                                 std::span<const data::CtuSample> records);

// Share of Table-convention flops skipped by inference-time early
// termination, per QP and pooled, over the given records.
EarlyTermSavings measure_early_term_savings(const EthCnnParams& params,
                                            std::span<const data::CtuSample> records,
                                            const hcpm::ThresholdSet& thresholds = {});

void save_eth_cnn(const std::string& path, const EthCnnParams& params);
EthCnnParams load_eth_cnn(const std::string& path);

} // namespace cupart::cnn
