#include "cupart/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"

#include "cupart/rng.hpp"

namespace cupart::data {

using codec::Frame;
using nlohmann::json;

namespace {

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

constexpr uint16_t kCphsVersion = 1;

} // namespace

void cphs_write(const std::string& path, uint8_t mode, const std::vector<CtuSample>& records) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("cphs_write: cannot open " + path);
    os.write("CPHS", 4);
    put<uint16_t>(os, kCphsVersion);
    put<uint8_t>(os, mode);
    put<uint32_t>(os, uint32_t(records.size()));
    for (const CtuSample& r : records) {
        os.write(reinterpret_cast<const char*>(r.block.data()), 4096);
        put<uint8_t>(os, r.qp);
        const auto labels = r.labels.encode();
        os.write(reinterpret_cast<const char*>(labels.data()), 21);
        put<uint32_t>(os, r.frame_index);
        put<uint32_t>(os, r.ctu_index);
        put<uint8_t>(os, r.mode);
    }
    if (!os) throw data_error("cphs_write: write failed for " + path);
}

std::vector<CtuSample> cphs_read(const std::string& path, uint8_t* mode_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cphs_read: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CPHS", 4) != 0)
        throw data_error("cphs_read: bad magic in " + path);
    if (get<uint16_t>(is) != kCphsVersion)
        throw data_error("cphs_read: unsupported version in " + path);
    const uint8_t mode = get<uint8_t>(is);
    if (mode_out) *mode_out = mode;
    const uint32_t count = get<uint32_t>(is);
    std::vector<CtuSample> records;
    records.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        CtuSample r;
        is.read(reinterpret_cast<char*>(r.block.data()), 4096);
        r.qp = get<uint8_t>(is);
        uint8_t labels[21];
        is.read(reinterpret_cast<char*>(labels), 21);
        r.labels = hcpm::Hcpm::decode(labels);
        r.frame_index = get<uint32_t>(is);
        r.ctu_index = get<uint32_t>(is);
        r.mode = get<uint8_t>(is);
        if (!is) throw data_error("cphs_read: truncated record in " + path);
        records.push_back(r);
    }
    return records;
}

std::string DatabaseManifest::to_json() const {
    json j;
    j["schema"] = "cupart.db/1";
    j["records_file"] = records_file;
    j["mode"] = int(mode);
    j["qps"] = qps;
    json srcs = json::array();
    for (const SourceEntry& s : sources) {
        srcs.push_back({{"path", s.path},
                        {"width", s.width},
                        {"height", s.height},
                        {"frames", s.frames},
                        {"first_record", s.first_record},
                        {"record_count", s.record_count}});
    }
    j["sources"] = std::move(srcs);
    json counts = json::object();
    for (const auto& [qp, n] : per_qp_counts) counts[std::to_string(qp)] = n;
    j["per_qp_counts"] = std::move(counts);
    j["class_balance"] = {{"level1_split_fraction", balance.level[0]},
                          {"level2_split_fraction", balance.level[1]},
                          {"level3_split_fraction", balance.level[2]},
                          {"overall_split_fraction", balance.overall}};
    if (!split.empty()) j["split"] = split;
    return j.dump(2);
}

DatabaseManifest DatabaseManifest::from_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw data_error("manifest: cannot open " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw data_error("manifest: parse error in " + path + ": " + e.what());
    }
    if (j.value("schema", "") != "cupart.db/1")
        throw data_error("manifest: unknown schema in " + path);
    DatabaseManifest m;
    m.records_file = j.at("records_file").get<std::string>();
    m.mode = uint8_t(j.at("mode").get<int>());
    m.qps = j.at("qps").get<std::vector<int>>();
    for (const json& s : j.at("sources")) {
        SourceEntry e;
        e.path = s.at("path").get<std::string>();
        e.width = s.at("width").get<int>();
        e.height = s.at("height").get<int>();
        e.frames = s.at("frames").get<uint32_t>();
        e.first_record = s.at("first_record").get<uint64_t>();
        e.record_count = s.at("record_count").get<uint64_t>();
        m.sources.push_back(std::move(e));
    }
    for (const auto& [k, v] : j.at("per_qp_counts").items())
        m.per_qp_counts[std::stoi(k)] = v.get<uint64_t>();
    const json& b = j.at("class_balance");
    m.balance.level[0] = b.at("level1_split_fraction").get<double>();
    m.balance.level[1] = b.at("level2_split_fraction").get<double>();
    m.balance.level[2] = b.at("level3_split_fraction").get<double>();
    m.balance.overall = b.at("overall_split_fraction").get<double>();
    m.split = j.value("split", "");
    // resolve the records file relative to the manifest location
    namespace fs = std::filesystem;
    const fs::path rec(m.records_file);
    if (rec.is_relative()) {
        const fs::path base = fs::path(path).parent_path();
        if (!base.empty()) m.records_file = (base / rec).string();
    }
    return m;
}

void DatabaseManifest::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw data_error("manifest: cannot write " + path);
    os << to_json() << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic content
// ---------------------------------------------------------------------------

namespace {

struct Canvas {
    int w = 0, h = 0;
    std::vector<double> v;
    Canvas(int w_, int h_) : w(w_), h(h_), v(size_t(w_) * h_, 128.0) {}
    double& at(int x, int y) { return v[size_t(y) * w + x]; }
    double at(int x, int y) const { return v[size_t(y) * w + x]; }

    double bilinear(double x, double y) const {
        x = std::clamp(x, 0.0, double(w - 1));
        y = std::clamp(y, 0.0, double(h - 1));
        const int x0 = std::min(int(x), w - 2 < 0 ? 0 : w - 2);
        const int y0 = std::min(int(y), h - 2 < 0 ? 0 : h - 2);
        const double fx = x - x0, fy = y - y0;
        return at(x0, y0) * (1 - fx) * (1 - fy) + at(x0 + 1, y0) * fx * (1 - fy) +
               at(x0, y0 + 1) * (1 - fx) * fy + at(x0 + 1, y0 + 1) * fx * fy;
    }
};

// Paints one leaf region: constant base, optionally a gradient ramp, grating
// or Gaussian noise overlay. Overlay likelihood scales with density so that
// density 0 produces purely flat content.
void paint_leaf(Canvas& c, Rng& rng, int x0, int y0, int edge, double density) {
    const double base = 20.0 + rng.uniform() * 215.0;
    for (int y = 0; y < edge; ++y)
        for (int x = 0; x < edge; ++x) c.at(x0 + x, y0 + y) = base;

    const double roll = rng.uniform();
    if (roll < 0.15 * density) {
        // ramp: means drift across the block, which the DC model notices
        const double gx = (rng.uniform() * 2.4 - 1.2);
        const double gy = (rng.uniform() * 2.4 - 1.2);
        for (int y = 0; y < edge; ++y)
            for (int x = 0; x < edge; ++x) c.at(x0 + x, y0 + y) += gx * x + gy * y;
    } else if (roll < 0.35 * density) {
        // oriented sinusoid grating
        const double freq = 0.08 + rng.uniform() * 0.37;
        const double angle = rng.uniform() * 3.14159265358979;
        const double phase = rng.uniform() * 6.28318530717959;
        const double amp = 4.0 + rng.uniform() * 14.0;
        const double fx = freq * std::cos(angle), fy = freq * std::sin(angle);
        for (int y = 0; y < edge; ++y)
            for (int x = 0; x < edge; ++x)
                c.at(x0 + x, y0 + y) +=
                    amp * std::sin(6.28318530717959 * (fx * x + fy * y) + phase);
    } else if (roll < 0.5 * density) {
        const double sigma = 1.5 + rng.uniform() * 4.5;
        for (int y = 0; y < edge; ++y)
            for (int x = 0; x < edge; ++x) c.at(x0 + x, y0 + y) += sigma * rng.normal();
    }
}

void paint_mosaic_cell(Canvas& c, Rng& rng, int x0, int y0, int edge, double density) {
    const double split_prob =
        edge == 64 ? density * 0.85 : edge == 32 ? density * 0.6 : edge == 16 ? density * 0.4 : 0.0;
    if (edge > 8 && rng.uniform() < split_prob) {
        const int half = edge / 2;
        for (int m = 0; m < 4; ++m)
            paint_mosaic_cell(c, rng, x0 + (m % 2) * half, y0 + (m / 2) * half, half, density);
        return;
    }
    paint_leaf(c, rng, x0, y0, edge, density);
}

Canvas make_mosaic(Rng& rng, int w, int h, double density) {
    Canvas c(w, h);
    // tile in 64px cells; w/h here may exceed the output frame (master canvas)
    for (int y = 0; y < h; y += 64)
        for (int x = 0; x < w; x += 64)
            paint_mosaic_cell(c, rng, x, y, std::min(64, std::min(w - x, h - y)), density);
    return c;
}

uint8_t quantize(double v) {
    return uint8_t(std::clamp<long>(std::lround(v), 0, 255));
}

Frame stamp_frame(const Canvas& c, int w, int h, double ox, double oy) {
    Frame f(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) f.at(x, y) = quantize(c.bilinear(x + ox, y + oy));
    return f;
}

struct Sprite {
    Canvas bitmap;
    double x0, y0, vx, vy;
};

} // namespace

std::vector<std::string> gen_synthetic(const GenConfig& cfg) {
    if (cfg.width <= 0 || cfg.height <= 0 || cfg.width % 64 || cfg.height % 64)
        throw argument_error("gen_synthetic: dimensions must be positive multiples of 64");
    if (cfg.density < 0.0 || cfg.density > 1.0)
        throw argument_error("gen_synthetic: density must be in [0,1]");
    if (cfg.sequence && cfg.frames < 2)
        throw argument_error("gen_synthetic: sequences need at least 2 frames");

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    Rng master(cfg.seed);
    std::vector<std::string> paths;
    for (int n = 0; n < cfg.count; ++n) {
        Rng rng = master.fork(uint64_t(n) + 1);
        std::vector<Frame> frames;
        if (!cfg.sequence) {
            const Canvas c = make_mosaic(rng, cfg.width, cfg.height, cfg.density);
            frames.push_back(stamp_frame(c, cfg.width, cfg.height, 0, 0));
        } else {
            const int margin = 40;
            const Canvas master_canvas =
                make_mosaic(rng, cfg.width + 2 * margin, cfg.height + 2 * margin, cfg.density);
            const double gvx = (rng.uniform() * 2.0 - 1.0) * (30.0 / cfg.frames);
            const double gvy = (rng.uniform() * 2.0 - 1.0) * (30.0 / cfg.frames);

            std::vector<Sprite> sprites;
            const int n_sprites = 2 + int(rng.below(3));
            for (int s = 0; s < n_sprites; ++s) {
                const int edge = 48 + 16 * int(rng.below(4));
                Canvas bm = make_mosaic(rng, edge, edge, std::min(1.0, cfg.density + 0.2));
                Sprite sp{std::move(bm),
                          rng.uniform() * (cfg.width - edge),
                          rng.uniform() * (cfg.height - edge),
                          (rng.uniform() * 2.0 - 1.0) * 1.4,
                          (rng.uniform() * 2.0 - 1.0) * 1.4};
                sprites.push_back(std::move(sp));
            }

            for (int t = 0; t < cfg.frames; ++t) {
                const double jx = rng.uniform() * 0.6 - 0.3;
                const double jy = rng.uniform() * 0.6 - 0.3;
                Frame f = stamp_frame(master_canvas, cfg.width, cfg.height,
                                      margin + gvx * t + jx, margin + gvy * t + jy);
                for (const Sprite& sp : sprites) {
                    const double sx = sp.x0 + sp.vx * t;
                    const double sy = sp.y0 + sp.vy * t;
                    const int x_lo = std::max(0, int(std::ceil(sx)));
                    const int y_lo = std::max(0, int(std::ceil(sy)));
                    const int x_hi = std::min(cfg.width, int(sx) + sp.bitmap.w - 1);
                    const int y_hi = std::min(cfg.height, int(sy) + sp.bitmap.h - 1);
                    for (int y = y_lo; y < y_hi; ++y)
                        for (int x = x_lo; x < x_hi; ++x)
                            f.at(x, y) = quantize(sp.bitmap.bilinear(x - sx, y - sy));
                }
                frames.push_back(std::move(f));
            }
        }
        const std::string path =
            (fs::path(cfg.out_dir) / (cfg.prefix + "_" + std::to_string(n) + ".cphy")).string();
        codec::cphy_write(path, frames);
        paths.push_back(path);
    }
    return paths;
}

// ---------------------------------------------------------------------------
// Database construction
// ---------------------------------------------------------------------------

namespace {

struct BalanceCounter {
    std::array<int64_t, 3> split{};
    std::array<int64_t, 3> valid{};

    void add(const hcpm::Hcpm& h) {
        using hcpm::CuLabel;
        ++valid[0];
        if (h.level1 == CuLabel::Split) ++split[0];
        for (int i = 0; i < 4; ++i) {
            if (h.level2[i] != CuLabel::Null) {
                ++valid[1];
                if (h.level2[i] == CuLabel::Split) ++split[1];
            }
            for (int j = 0; j < 4; ++j)
                if (h.level3[i][j] != CuLabel::Null) {
                    ++valid[2];
                    if (h.level3[i][j] == CuLabel::Split) ++split[2];
                }
        }
    }

    ClassBalance balance() const {
        ClassBalance b;
        int64_t s = 0, v = 0;
        for (int l = 0; l < 3; ++l) {
            b.level[l] = valid[l] ? double(split[l]) / double(valid[l]) : 0.0;
            s += split[l];
            v += valid[l];
        }
        b.overall = v ? double(s) / double(v) : 0.0;
        return b;
    }
};

} // namespace

DatabaseManifest build_db(const BuildDbConfig& cfg) {
    if (cfg.sources.empty()) throw argument_error("build_db: no sources");
    if (cfg.qps.empty()) throw argument_error("build_db: no qps");
    for (int qp : cfg.qps)
        if (qp < 0 || qp > 51) throw argument_error("build_db: qp out of [0,51]");

    const uint8_t mode = !cfg.inter ? kModeIntra
                         : cfg.original_input ? kModeInterOriginal
                                              : kModeInterResidue;

    DatabaseManifest manifest;
    manifest.records_file = cfg.out_prefix + ".cphs";
    manifest.mode = mode;
    manifest.qps = cfg.qps;

    std::vector<CtuSample> records;
    BalanceCounter balance;

    for (const std::string& src : cfg.sources) {
        std::vector<Frame> frames;
        try {
            frames = codec::cphy_read(src);
        } catch (const data_error& e) {
            std::cerr << "build_db: skipping unreadable source " << src << " (" << e.what()
                      << ")\n";
            continue;
        }
        if (cfg.inter && frames.size() < 2) {
            std::cerr << "build_db: skipping " << src << ": inter mode needs >= 2 frames\n";
            continue;
        }
        SourceEntry entry;
        entry.path = src;
        entry.width = frames[0].width;
        entry.height = frames[0].height;
        entry.frames = uint32_t(frames.size());
        entry.first_record = records.size();

        for (size_t t = 0; t < frames.size(); ++t) {
            Frame residue;
            if (cfg.inter)
                residue = codec::precode_residue(frames[t], t == 0 ? nullptr : &frames[t - 1]);
            const Frame& label_frame = cfg.inter ? residue : frames[t];
            for (int qp : cfg.qps) {
                for (int c = 0; c < frames[t].ctu_count(); ++c) {
                    CtuSample rec;
                    const std::vector<uint8_t> label_block = label_frame.ctu_block(c);
                    const auto oracle = codec::oracle_rdo_block(label_block.data(), qp, cfg.cost);
                    rec.labels = hcpm::tree_to_hcpm(oracle.tree);
                    rec.labels.validate();
                    const std::vector<uint8_t> stored =
                        (cfg.inter && cfg.original_input) ? frames[t].ctu_block(c) : label_block;
                    std::copy(stored.begin(), stored.end(), rec.block.begin());
                    rec.qp = uint8_t(qp);
                    rec.frame_index = uint32_t(t);
                    rec.ctu_index = uint32_t(c);
                    rec.mode = mode;
                    balance.add(rec.labels);
                    ++manifest.per_qp_counts[qp];
                    records.push_back(std::move(rec));
                }
            }
        }
        entry.record_count = records.size() - entry.first_record;
        manifest.sources.push_back(std::move(entry));
    }

    if (records.empty()) throw data_error("build_db: no CTUs labeled (all sources unusable)");
    manifest.balance = balance.balance();
    cphs_write(manifest.records_file, mode, records);
    manifest.save(cfg.out_prefix + ".manifest.json");
    return manifest;
}

std::array<DatabaseManifest, 3> split_db(const DatabaseManifest& manifest,
                                         const std::array<double, 3>& ratios, uint64_t seed,
                                         const std::string& out_prefix) {
    double sum = 0.0;
    for (double r : ratios) {
        if (r < 0.0) throw argument_error("split_db: negative ratio");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw argument_error("split_db: ratios must sum to 1");
    const size_t n = manifest.sources.size();
    if (n < 3) throw data_error("split_db: fewer sources than splits");

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    for (size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

    // largest-remainder apportionment
    std::array<size_t, 3> counts{};
    std::array<double, 3> exact{};
    size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
        exact[s] = ratios[s] * double(n);
        counts[s] = size_t(exact[s]);
        assigned += counts[s];
    }
    while (assigned < n) {
        int best = 0;
        double best_rem = -1.0;
        for (int s = 0; s < 3; ++s) {
            const double rem = exact[s] - double(counts[s]);
            if (rem > best_rem) {
                best_rem = rem;
                best = s;
            }
        }
        ++counts[best];
        exact[best] = double(counts[best]); // consume the remainder
        ++assigned;
    }

    static const char* kSplitNames[3] = {"train", "val", "test"};
    std::array<DatabaseManifest, 3> out;
    size_t cursor = 0;
    for (int s = 0; s < 3; ++s) {
        DatabaseManifest m;
        m.records_file = manifest.records_file;
        m.mode = manifest.mode;
        m.qps = manifest.qps;
        m.split = kSplitNames[s];
        std::vector<size_t> chosen(order.begin() + cursor, order.begin() + cursor + counts[s]);
        std::sort(chosen.begin(), chosen.end());
        for (size_t idx : chosen) m.sources.push_back(manifest.sources[idx]);
        cursor += counts[s];

        // recount per-qp and class balance over the subset
        BalanceCounter bc;
        const LoadedDb db = load_db(m);
        for (const CtuSample& r : db.records) {
            ++m.per_qp_counts[r.qp];
            bc.add(r.labels);
        }
        m.balance = bc.balance();
        m.save(out_prefix + "." + kSplitNames[s] + ".manifest.json");
        out[s] = std::move(m);
    }
    return out;
}

LoadedDb load_db(const DatabaseManifest& manifest) {
    uint8_t file_mode = 0;
    std::vector<CtuSample> all = cphs_read(manifest.records_file, &file_mode);
    if (file_mode != manifest.mode)
        throw data_error("load_db: manifest/records mode mismatch");
    LoadedDb db;
    db.manifest = manifest;
    for (uint32_t si = 0; si < manifest.sources.size(); ++si) {
        const SourceEntry& s = manifest.sources[si];
        if (s.first_record + s.record_count > all.size())
            throw data_error("load_db: source range outside records file");
        for (uint64_t i = 0; i < s.record_count; ++i) {
            db.records.push_back(all[s.first_record + i]);
            db.source_of.push_back(si);
        }
    }
    return db;
}

LoadedDb load_db(const std::string& manifest_path) {
    return load_db(DatabaseManifest::from_json_file(manifest_path));
}

} // namespace cupart::data
