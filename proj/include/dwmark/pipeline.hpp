#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dwmark/attacks.hpp"
#include "dwmark/codec.hpp"
#include "dwmark/crc8.hpp"
#include "dwmark/fusion.hpp"
#include "dwmark/image_io.hpp"
#include "dwmark/metrics.hpp"
#include "dwmark/placement.hpp"
#include "dwmark/sync.hpp"

namespace dwmark {

struct PipelineConfig {
    int block_size = kBlockSize;
    int tile_size = kTileSize;
    double q = 25.0;
    int cap = 20;
    double target_psnr = kDefaultTargetPsnr;
    FusionConfig fusion{};
    std::string crc_polynomial = "crc8-0x07";

    int min_box_area() const { return block_size * block_size / 4; }

    void validate() const {
        if (block_size < 16 || block_size % 8 != 0)
            throw std::invalid_argument("config: block_size must be a multiple of 8, >= 16");
        if (tile_size < block_size) throw std::invalid_argument("config: tile_size must cover a block");
        if (q <= 0 || q > 100) throw std::invalid_argument("config: q must be in (0, 100]");
        if (cap < 1) throw std::invalid_argument("config: cap must be >= 1");
        if (target_psnr < 20 || target_psnr > 60) throw std::invalid_argument("config: target_psnr out of range");
        fusion.validate();
        if (crc_polynomial != "crc8-0x07")
            throw std::invalid_argument("config: only the crc8-0x07 polynomial is supported");
    }
};

inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
    return nlohmann::json{{"block_size", cfg.block_size},
                          {"tile_size", cfg.tile_size},
                          {"q", cfg.q},
                          {"cap", cfg.cap},
                          {"target_psnr", cfg.target_psnr},
                          {"fusion_t", cfg.fusion.max_bit_difference},
                          {"fusion_k", cfg.fusion.min_cluster},
                          {"crc_polynomial", cfg.crc_polynomial}};
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    PipelineConfig cfg;
    cfg.block_size = j.value("block_size", cfg.block_size);
    cfg.tile_size = j.value("tile_size", cfg.tile_size);
    cfg.q = j.value("q", cfg.q);
    cfg.cap = j.value("cap", cfg.cap);
    cfg.target_psnr = j.value("target_psnr", cfg.target_psnr);
    cfg.fusion.max_bit_difference = j.value("fusion_t", cfg.fusion.max_bit_difference);
    cfg.fusion.min_cluster = j.value("fusion_k", cfg.fusion.min_cluster);
    cfg.crc_polynomial = j.value("crc_polynomial", cfg.crc_polynomial);
    cfg.validate();
    return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_config: cannot open " + path);
    nlohmann::json j;
    f >> j;
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Embed
// ---------------------------------------------------------------------------

// Frames the payload with CRC-8, plans placements and embeds the 30-bit
// message into every planned block.
inline std::pair<ImageBuffer, PlacementRecord> embed(const ImageBuffer& cover, const Message& payload,
                                                     CodecKey key, std::uint64_t placement_seed,
                                                     const PipelineConfig& cfg = {},
                                                     const std::string& image_id = "") {
    cfg.validate();
    Message msg = frame_to_message(crc8_encode(payload));
    PlacementPlan plan = plan_placements(cover.height, cover.width, cfg.q, cfg.cap, placement_seed, cfg.block_size);
    return embed_image(cover, msg, key, plan, cfg.target_psnr, image_id);
}

// ---------------------------------------------------------------------------
// Extract
// ---------------------------------------------------------------------------

enum class ExtractionStatus { found, not_found };

struct ExtractionReport {
    ExtractionStatus status = ExtractionStatus::not_found;
    Message fused;                      // empty when not_found
    bool fused_crc_ok = false;
    Message fused_payload;              // payload bits when the fused CRC passes
    std::vector<SoftMessage> block_soft;
    std::vector<Message> block_messages;
    std::vector<char> block_crc_ok;
    GeometricEstimate estimate;
    int blocks_decoded = 0;
};

namespace detail {

inline double soft_confidence(const SoftMessage& soft) {
    double c = 0;
    for (double v : soft) c += std::fabs(v - 0.5);
    return c / static_cast<double>(soft.size());
}

// Decode with a small translation search around the nominal crop. Blind
// detection localizes blocks to within a couple of pixels; the carrier only
// tolerates one, so the decoder picks the offset with the most confident
// soft values. The centered crop short-circuits when already confident.
inline SoftMessage decode_block_refined(const ImageBuffer& img, int y0, int x0, int block, CodecKey key) {
    auto decode_at = [&](int dy, int dx) {
        int yy = std::clamp(y0 + dy, 0, img.height - block);
        int xx = std::clamp(x0 + dx, 0, img.width - block);
        return decode_block(crop(img, yy, xx, block, block), key, kMessageLength);
    };
    SoftMessage best = decode_at(0, 0);
    double best_conf = soft_confidence(best);
    if (best_conf >= 0.30) return best;
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
            if (dy == 0 && dx == 0) continue;
            SoftMessage cand = decode_at(dy, dx);
            double conf = soft_confidence(cand);
            if (conf > best_conf) {
                best_conf = conf;
                best = std::move(cand);
            }
        }
    return best;
}

}  // namespace detail

// Full extraction: detect, estimate, rectify, extract blocks, decode, fuse,
// and check every CRC (the fused message plus one per block). The estimated
// rectification is a hypothesis; if its decodes come back with low confidence
// the identity hypothesis is tried as well and the stronger one wins (ragged
// blind-detection masks can fake a small deformation on an untouched image).
// An image with no detectable watermark yields not_found rather than an error.
inline ExtractionReport extract(const ImageBuffer& img, CodecKey key, Detector& detector,
                                const PipelineConfig& cfg = {}) {
    cfg.validate();
    ExtractionReport report;
    MaskBuffer mask = detect(img, detector, cfg.tile_size);
    std::vector<BoundingBox> boxes = extract_boxes(mask, cfg.min_box_area());
    if (boxes.empty()) return report;

    GeometricEstimate estimate = estimate_geometry(interior_boxes(boxes, mask.height, mask.width), cfg.block_size);

    struct Attempt {
        std::vector<SoftMessage> soft;
        double mean_confidence = -1;
    };
    auto attempt = [&](const GeometricEstimate& est) {
        Attempt a;
        RectifiedPair rectified = rectify(img, mask, est);
        auto origins = synchronized_block_origins(rectified.mask, cfg.block_size, cfg.min_box_area());
        if (origins.empty()) return a;
        double conf = 0;
        for (auto [y0, x0] : origins) {
            SoftMessage soft = detail::decode_block_refined(rectified.image, y0, x0, cfg.block_size, key);
            conf += detail::soft_confidence(soft);
            a.soft.push_back(std::move(soft));
        }
        a.mean_confidence = conf / static_cast<double>(a.soft.size());
        return a;
    };

    Attempt best = attempt(estimate);
    bool is_identity = estimate.angle_deg == 0.0 && estimate.scale_x == 1.0 && estimate.scale_y == 1.0;
    if (!is_identity && best.mean_confidence < 0.28) {
        Attempt plain = attempt(GeometricEstimate{});
        if (plain.mean_confidence > best.mean_confidence) {
            best = std::move(plain);
            estimate = GeometricEstimate{};
        }
    }
    report.estimate = estimate;
    if (best.soft.empty()) return report;

    report.status = ExtractionStatus::found;
    report.blocks_decoded = static_cast<int>(best.soft.size());
    for (auto& soft : best.soft) {
        Message hard = binarize(soft);
        report.block_crc_ok.push_back(crc8_verify_message(hard) ? 1 : 0);
        report.block_messages.push_back(std::move(hard));
        report.block_soft.push_back(std::move(soft));
    }
    report.fused = fuse(report.block_soft, cfg.fusion);
    report.fused_crc_ok = crc8_verify_message(report.fused);
    if (report.fused_crc_ok)
        report.fused_payload.assign(report.fused.begin(), report.fused.begin() + kPayloadBits);
    return report;
}

inline std::string bits_to_string(const Message& m) {
    std::string s;
    s.reserve(m.size());
    for (auto b : m) s.push_back(b ? '1' : '0');
    return s;
}

inline Message bits_from_string(const std::string& s) {
    Message m;
    m.reserve(s.size());
    for (char c : s) {
        if (c != '0' && c != '1') throw std::invalid_argument("bits_from_string: expected 0/1");
        m.push_back(c == '1' ? 1 : 0);
    }
    return m;
}

// 22-bit payloads render as 6 hex digits, MSB first.
inline std::string payload_to_hex(const Message& payload) {
    if (static_cast<int>(payload.size()) != kPayloadBits)
        throw std::invalid_argument("payload_to_hex: payload must be 22 bits");
    std::uint32_t v = 0;
    for (auto b : payload) v = (v << 1) | (b & 1);
    char buf[8];
    std::snprintf(buf, sizeof buf, "%06x", v);
    return buf;
}

inline Message payload_from_hex(const std::string& hex) {
    std::string h = hex;
    if (h.rfind("0x", 0) == 0 || h.rfind("0X", 0) == 0) h = h.substr(2);
    if (h.empty() || h.size() > 6) throw std::invalid_argument("payload hex must be 1..6 digits");
    std::uint32_t v = 0;
    for (char c : h) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else throw std::invalid_argument("payload hex: bad digit");
        v = (v << 4) | static_cast<std::uint32_t>(d);
    }
    if (v >= (1u << kPayloadBits)) throw std::invalid_argument("payload exceeds 22 bits");
    Message payload(kPayloadBits);
    for (int i = 0; i < kPayloadBits; ++i) payload[i] = (v >> (kPayloadBits - 1 - i)) & 1;
    return payload;
}

inline nlohmann::json report_to_json(const ExtractionReport& r) {
    nlohmann::json j;
    j["status"] = r.status == ExtractionStatus::found ? "found" : "not_found";
    j["blocks_decoded"] = r.blocks_decoded;
    if (r.status == ExtractionStatus::found) {
        j["fused_message"] = bits_to_string(r.fused);
        j["fused_crc_ok"] = r.fused_crc_ok;
        if (r.fused_crc_ok) j["payload_hex"] = payload_to_hex(r.fused_payload);
        j["estimate"] = {{"angle_deg", r.estimate.angle_deg},
                         {"scale_x", r.estimate.scale_x},
                         {"scale_y", r.estimate.scale_y}};
        j["blocks"] = nlohmann::json::array();
        for (int i = 0; i < r.blocks_decoded; ++i)
            j["blocks"].push_back({{"message", bits_to_string(r.block_messages[i])},
                                   {"crc_ok", static_cast<bool>(r.block_crc_ok[i])}});
    }
    return j;
}

// ---------------------------------------------------------------------------
// Bench
// ---------------------------------------------------------------------------

struct BenchAttackRow {
    std::string name;
    int images = 0;
    int not_found = 0;
    double mean_bit_accuracy = 0;   // fused message vs truth; not_found counts 0.5
    double bit_check_accuracy = 0;  // a CRC-passing candidate equals the truth
    double crc_pass_rate = 0;       // some candidate passes CRC
};

struct BenchReport {
    std::uint64_t master_seed = 0;
    std::string detector;
    int images = 0;
    int skipped_unreadable = 0;
    double mean_psnr = 0;
    double mean_ms_ssim = 0;
    double mean_byte_increase = 0;
    std::vector<BenchAttackRow> rows;
    double wall_seconds = 0;  // informational; not part of the serialized report
};

inline nlohmann::json bench_to_json(const BenchReport& r) {
    nlohmann::json j;
    j["master_seed"] = r.master_seed;
    j["detector"] = r.detector;
    j["images"] = r.images;
    j["skipped_unreadable"] = r.skipped_unreadable;
    j["mean_psnr_db"] = r.mean_psnr;
    j["mean_ms_ssim"] = r.mean_ms_ssim;
    j["mean_byte_increase_pct"] = r.mean_byte_increase;
    j["attacks"] = nlohmann::json::array();
    for (const auto& row : r.rows)
        j["attacks"].push_back({{"name", row.name},
                                {"images", row.images},
                                {"not_found", row.not_found},
                                {"mean_bit_accuracy_pct", 100.0 * row.mean_bit_accuracy},
                                {"bit_check_accuracy_pct", 100.0 * row.bit_check_accuracy},
                                {"crc_pass_rate_pct", 100.0 * row.crc_pass_rate}});
    return j;
}

inline std::string bench_to_table(const BenchReport& r) {
    std::ostringstream os;
    char line[160];
    os << "images: " << r.images << "  skipped: " << r.skipped_unreadable << "\n";
    std::snprintf(line, sizeof line, "embedding quality: PSNR %.2f dB  MS-SSIM %.4f  byte increase %.2f%%\n",
                  r.mean_psnr, r.mean_ms_ssim, r.mean_byte_increase);
    os << line;
    std::snprintf(line, sizeof line, "%-28s %10s %12s %12s %10s\n", "attack", "bit acc %", "bit check %",
                  "crc pass %", "not found");
    os << line;
    for (const auto& row : r.rows) {
        std::snprintf(line, sizeof line, "%-28s %10.2f %12.2f %12.2f %10d\n", row.name.c_str(),
                      100.0 * row.mean_bit_accuracy, 100.0 * row.bit_check_accuracy, 100.0 * row.crc_pass_rate,
                      row.not_found);
        os << line;
    }
    return os.str();
}

namespace detail {

inline Message random_payload(std::uint64_t seed) {
    Rng rng(seed);
    Message payload(kPayloadBits);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng.next_u64() & 1);
    return payload;
}

// CRC-gated candidate check: success iff some CRC-passing message among the
// fused result and the per-block messages equals the truth.
inline void score_extraction(const ExtractionReport& rep, const Message& truth, bool& crc_pass, bool& checked_ok) {
    crc_pass = false;
    checked_ok = false;
    if (rep.status != ExtractionStatus::found) return;
    if (rep.fused_crc_ok) {
        crc_pass = true;
        if (rep.fused == truth) checked_ok = true;
    }
    for (int i = 0; i < rep.blocks_decoded; ++i) {
        if (rep.block_crc_ok[i]) {
            crc_pass = true;
            if (rep.block_messages[i] == truth) checked_ok = true;
        }
    }
}

}  // namespace detail

// Runs the full embed/attack/extract loop over a directory of images.
// Per-image and per-attack randomness fans out from the master seed keyed by
// image index and attack label, so extending the attack list never perturbs
// existing rows. Writes cover/watermarked PNG pairs under out_dir/images.
inline BenchReport bench(const std::string& dataset_dir, const std::vector<std::string>& attack_labels,
                         const PipelineConfig& cfg, std::uint64_t master_seed, const std::string& detector_kind,
                         const std::string& out_dir) {
    namespace fs = std::filesystem;
    cfg.validate();
    if (detector_kind != "oracle" && detector_kind != "residual")
        throw std::invalid_argument("bench: detector must be oracle or residual");

    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dataset_dir)) {
        if (!e.is_regular_file()) continue;
        std::string p = e.path().string();
        if (has_suffix(p, ".png") || has_suffix(p, ".jpg") || has_suffix(p, ".jpeg")) files.push_back(p);
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::invalid_argument("bench: no images in " + dataset_dir);

    fs::create_directories(fs::path(out_dir) / "images");

    BenchReport report;
    report.master_seed = master_seed;
    report.detector = detector_kind;

    struct Prepared {
        ImageBuffer cover;
        ImageBuffer wm;
        PlacementRecord record;
        Message truth;
        CodecKey key;
    };
    std::vector<Prepared> prepared;

    auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < files.size(); ++i) {
        ImageBuffer cover;
        try {
            cover = read_image(files[i]);
        } catch (const std::exception&) {
            ++report.skipped_unreadable;
            continue;
        }
        if (cover.height < cfg.block_size || cover.width < cfg.block_size) {
            ++report.skipped_unreadable;
            continue;
        }
        Prepared p;
        p.cover = std::move(cover);
        p.key = CodecKey{derive_seed(master_seed, "key", i)};
        Message payload = detail::random_payload(derive_seed(master_seed, "payload", i));
        p.truth = frame_to_message(crc8_encode(payload));
        auto [wm, rec] = embed(p.cover, payload, p.key, derive_seed(master_seed, "plan", i), cfg,
                               fs::path(files[i]).filename().string());
        p.wm = std::move(wm);
        p.record = std::move(rec);

        std::string tag = std::to_string(prepared.size());
        std::string cover_path = (fs::path(out_dir) / "images" / ("cover_" + tag + ".png")).string();
        std::string wm_path = (fs::path(out_dir) / "images" / ("wm_" + tag + ".png")).string();
        write_png(p.cover, cover_path);
        write_png(p.wm, wm_path);
        report.mean_psnr += psnr(p.wm, p.cover);
        report.mean_ms_ssim += ms_ssim(p.wm, p.cover);
        report.mean_byte_increase +=
            byte_increase_rate(fs::file_size(cover_path), fs::file_size(wm_path));
        prepared.push_back(std::move(p));
    }
    if (prepared.empty()) throw std::runtime_error("bench: no usable images");
    report.images = static_cast<int>(prepared.size());
    report.mean_psnr /= report.images;
    report.mean_ms_ssim /= report.images;
    report.mean_byte_increase /= report.images;

    for (const auto& label : attack_labels) {
        BenchAttackRow row;
        row.name = label;
        for (std::size_t i = 0; i < prepared.size(); ++i) {
            const Prepared& p = prepared[i];
            AttackChain chain = parse_attack_string(
                label + ":seed=" + std::to_string(derive_seed(master_seed, label, i)));
            const ImageBuffer& donor = prepared[(i + 1) % prepared.size()].cover;
            ImageBuffer attacked = apply_combined(p.wm, chain, &p.cover, &donor);

            ExtractionReport rep;
            if (detector_kind == "oracle") {
                OracleDetector det(p.record, p.cover.height, p.cover.width, chain);
                rep = extract(attacked, p.key, det, cfg);
            } else {
                ResidualEnergyDetector det;
                rep = extract(attacked, p.key, det, cfg);
            }

            ++row.images;
            if (rep.status == ExtractionStatus::found) {
                row.mean_bit_accuracy += bit_accuracy(rep.fused, p.truth);
            } else {
                ++row.not_found;
                row.mean_bit_accuracy += 0.5;  // no message: coin-flip equivalent
            }
            bool crc_pass = false, checked_ok = false;
            detail::score_extraction(rep, p.truth, crc_pass, checked_ok);
            row.crc_pass_rate += crc_pass ? 1 : 0;
            row.bit_check_accuracy += checked_ok ? 1 : 0;
        }
        row.mean_bit_accuracy /= row.images;
        row.crc_pass_rate /= row.images;
        row.bit_check_accuracy /= row.images;
        report.rows.push_back(std::move(row));
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::ofstream fj((fs::path(out_dir) / "report.json").string());
    fj << bench_to_json(report).dump(2) << "\n";
    std::ofstream ft((fs::path(out_dir) / "report.txt").string());
    ft << bench_to_table(report);
    return report;
}

}  // namespace dwmark
