#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cupart/data/dataset.hpp"
#include "cupart/lstm/eth_lstm.hpp"
#include "cupart/nn/sgd.hpp"

namespace cupart::lstm {

// The temporal unit: one CTU grid position of one source at one QP, frames in
// encoding order. Features are the frozen CNN's first-hidden-layer outputs.
struct FeatureSequence {
    int qp = 0;
    std::vector<std::array<nn::Tensor, 3>> features;
    std::vector<hcpm::Hcpm> labels;
    std::vector<uint32_t> frame_indices;
    std::vector<size_t> record_indices; // positions in the originating record list
};

// Groups db records by (source, ctu, qp) and runs the CNN feature extractor
// over each block. The records must come from an inter-mode database.
std::vector<FeatureSequence> build_feature_sequences(const cnn::EthCnnParams& cnn_params,
                                                     std::span<const data::CtuSample> records,
                                                     std::span<const uint32_t> source_of);

// Step-wise inference over a whole sequence from a zero state.
std::vector<hcpm::HcpmProb> forward_sequence(const EthLstmParams& params,
                                             const FeatureSequence& seq,
                                             const LstmForwardOptions& opt = {});

struct LstmTrainConfig {
    int64_t iterations = 500;
    int batch_size = 16;
    int window = 20;  // BPTT length T
    int overlap = 10; // window stride is window - overlap
    nn::SgdConfig sgd{0.1, 0.9, 0.99, 200};
    uint64_t seed = 1;
    double init_stddev = 0.1;
    int64_t log_every = 0;
};

struct LstmTrainResult {
    EthLstmParams params;
    std::vector<float> loss_curve; // mean per-frame loss per iteration
};

// Truncated BPTT over fixed windows (state restarts at zero per window);
// sequences shorter than the window are skipped with a warning. The loss is
// the masked cross-entropy averaged over window samples and frames.
LstmTrainResult train_eth_lstm(std::span<const FeatureSequence> sequences,
                               const LstmTrainConfig& cfg);

struct LstmAccuracyReport {
    std::array<int64_t, 3> correct{};
    std::array<int64_t, 3> total{};
    double rate(int level) const {
        return total[level] ? double(correct[level]) / double(total[level]) : 0.0;
    }
};

LstmAccuracyReport eval_lstm_accuracy(const EthLstmParams& params,
                                      std::span<const FeatureSequence> sequences);

void save_eth_lstm(const std::string& path, const EthLstmParams& params);
EthLstmParams load_eth_lstm(const std::string& path);

} // namespace cupart::lstm
