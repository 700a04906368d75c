#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cupart/codec/frame.hpp"
#include "cupart/codec/rd.hpp"
#include "cupart/hcpm/hcpm.hpp"

namespace cupart::data {

// Record input kinds stored in the db mode byte.
inline constexpr uint8_t kModeIntra = 0;
inline constexpr uint8_t kModeInterResidue = 1;
inline constexpr uint8_t kModeInterOriginal = 2; // ablation: original luma, inter labels

// One training/test record: a 64x64 input block (original luma or residue),
// its QP, the ground-truth HCPM and position bookkeeping.
struct CtuSample {
    std::array<uint8_t, 4096> block{};
    uint8_t qp = 0;
    hcpm::Hcpm labels;
    uint32_t frame_index = 0;
    uint32_t ctu_index = 0;
    uint8_t mode = kModeIntra;
};

inline constexpr size_t kRecordBytes = 4096 + 1 + 21 + 4 + 4 + 1;

// "CPHS" record file: magic, u16 version, u8 mode, u32 record_count, then
// fixed-size records (block, qp, 21 label bytes, frame_index, ctu_index,
// mode), all little-endian.
void cphs_write(const std::string& path, uint8_t mode, const std::vector<CtuSample>& records);
std::vector<CtuSample> cphs_read(const std::string& path, uint8_t* mode_out = nullptr);

struct SourceEntry {
    std::string path;
    int width = 0;
    int height = 0;
    uint32_t frames = 0;
    uint64_t first_record = 0;
    uint64_t record_count = 0;
};

struct ClassBalance {
    // Fraction of Split among valid labels, per level and pooled.
    std::array<double, 3> level{};
    double overall = 0.0;
};

struct DatabaseManifest {
    std::string records_file;
    uint8_t mode = kModeIntra;
    std::vector<int> qps;
    std::vector<SourceEntry> sources;
    std::map<int, uint64_t> per_qp_counts;
    ClassBalance balance;
    std::string split; // empty, or train/val/test

    uint64_t record_count() const {
        uint64_t n = 0;
        for (const auto& s : sources) n += s.record_count;
        return n;
    }

    std::string to_json() const;
    static DatabaseManifest from_json_file(const std::string& path);
    void save(const std::string& path) const;
};

// Synthetic content: multi-scale piecewise-constant mosaics (which the DC
// cost model partitions at the mosaic granularity) plus grating and noise
// overlays as texture distractors. Sequences translate a larger master
// canvas with sub-pixel jitter and composite a few independently moving
// sprites, giving temporally correlated partitions.
struct GenConfig {
    uint64_t seed = 1;
    int count = 4;
    int width = 256;
    int height = 256;
    bool sequence = false; // false: single-frame stills
    int frames = 30;       // frames per sequence
    double density = 0.5;  // mosaic fragmentation / texture density in [0,1]
    std::string out_dir = ".";
    std::string prefix = "syn";
};

std::vector<std::string> gen_synthetic(const GenConfig& cfg);

struct BuildDbConfig {
    std::vector<std::string> sources;
    std::vector<int> qps{22, 27, 32, 37};
    bool inter = false;
    bool original_input = false; // inter ablation: store original luma blocks
    std::string out_prefix;      // writes <prefix>.cphs and <prefix>.manifest.json
    codec::CostModelConfig cost;
};

// Labels each CTU with the exhaustive search at every QP. Inter mode labels
// and stores the offset-128 residue blocks, so every record is self-contained
// (stored labels are exactly the oracle's result on the stored block, except
// in the original-input ablation).
DatabaseManifest build_db(const BuildDbConfig& cfg);

// Source-level split (no frame of one source lands in two splits).
// Writes <prefix>.<split>.manifest.json next to the input manifest.
std::array<DatabaseManifest, 3> split_db(const DatabaseManifest& manifest,
                                         const std::array<double, 3>& ratios, uint64_t seed,
                                         const std::string& out_prefix);

struct LoadedDb {
    DatabaseManifest manifest;
    std::vector<CtuSample> records;
    std::vector<uint32_t> source_of; // per record, index into manifest.sources
};

LoadedDb load_db(const std::string& manifest_path);
LoadedDb load_db(const DatabaseManifest& manifest);

} // namespace cupart::data
