#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dwmark/codec.hpp"
#include "dwmark/common.hpp"
#include "dwmark/image.hpp"
#include "dwmark/message.hpp"

namespace dwmark {

// Clearance kept between placed blocks. Detection components of separate
// blocks must stay disconnected even after the gap shrinks under downscaling
// and after the blind detector's energy window dilates each region.
inline constexpr int kPlacementMargin = 24;

struct BlockRect {
    int x = 0;  // left, pixels
    int y = 0;  // top, pixels
    int h = 0;
    int w = 0;

    bool overlaps(const BlockRect& o) const {
        return x < o.x + o.w && o.x < x + w && y < o.y + o.h && o.y < y + h;
    }
    // Overlap test with a guard margin. Placed blocks keep a few pixels of
    // clearance so their detection components stay separate even after the
    // gap shrinks under downscaling and rotation rasterization.
    bool crowds(const BlockRect& o, int margin) const {
        return x < o.x + o.w + margin && o.x < x + w + margin && y < o.y + o.h + margin &&
               o.y < y + h + margin;
    }
    bool inside(int img_h, int img_w) const {
        return x >= 0 && y >= 0 && x + w <= img_w && y + h <= img_h;
    }
    bool operator==(const BlockRect& o) const { return x == o.x && y == o.y && h == o.h && w == o.w; }
};

// Non-overlapping block rectangles chosen for one embedding pass.
struct PlacementPlan {
    std::vector<BlockRect> rects;
    std::uint64_t seed = 0;
    double q = 25.0;  // area budget, percent
    int cap = 20;     // block count ceiling
    int block = kBlockSize;
};

inline int placement_quota(int img_h, int img_w, double q, int cap, int block) {
    double budget = q / 100.0 * static_cast<double>(img_h) * static_cast<double>(img_w);
    int count = static_cast<int>(budget / (static_cast<double>(block) * block));
    if (count > cap) count = cap;
    if (count < 1) count = 1;  // any image that fits one block gets one
    return count;
}

// Sparse random selection under the area budget. Rejection-samples uniform
// top-left corners; a jittered grid scan fills any quota the sampler could
// not place without overlap (dense small images).
inline PlacementPlan plan_placements(int img_h, int img_w, double q, int cap, std::uint64_t seed,
                                     int block = kBlockSize) {
    if (q <= 0.0 || q > 100.0) throw std::invalid_argument("plan_placements: q must be in (0, 100]");
    if (cap < 1) throw std::invalid_argument("plan_placements: cap must be >= 1");
    if (img_h < block || img_w < block)
        throw std::invalid_argument("plan_placements: image smaller than one block");

    PlacementPlan plan;
    plan.seed = seed;
    plan.q = q;
    plan.cap = cap;
    plan.block = block;

    const int quota = placement_quota(img_h, img_w, q, cap, block);
    Rng rng(seed);
    const int max_attempts = 1000 * cap;
    for (int attempt = 0; attempt < max_attempts && static_cast<int>(plan.rects.size()) < quota; ++attempt) {
        BlockRect r{static_cast<int>(rng.below(static_cast<std::uint64_t>(img_w - block + 1))),
                    static_cast<int>(rng.below(static_cast<std::uint64_t>(img_h - block + 1))), block, block};
        bool clash = false;
        for (const auto& a : plan.rects)
            if (a.crowds(r, kPlacementMargin)) {
                clash = true;
                break;
            }
        if (!clash) plan.rects.push_back(r);
    }

    if (static_cast<int>(plan.rects.size()) < quota) {
        // jittered grid, packed from scratch; random corners poison dense
        // layouts, so the sampler's picks are kept only if they win
        const int stride = block + kPlacementMargin;
        int cols = std::max(1, (img_w + kPlacementMargin) / stride);
        int rows = std::max(1, (img_h + kPlacementMargin) / stride);
        int slack_x = img_w - (cols * stride - kPlacementMargin);
        int slack_y = img_h - (rows * stride - kPlacementMargin);
        int jx = static_cast<int>(rng.below(static_cast<std::uint64_t>(slack_x + 1)));
        int jy = static_cast<int>(rng.below(static_cast<std::uint64_t>(slack_y + 1)));
        std::vector<BlockRect> grid;
        for (int r = 0; r < rows && static_cast<int>(grid.size()) < quota; ++r)
            for (int c = 0; c < cols && static_cast<int>(grid.size()) < quota; ++c)
                grid.push_back({jx + c * stride, jy + r * stride, block, block});
        if (grid.size() > plan.rects.size()) plan.rects = std::move(grid);
    }
    return plan;
}

// Sidecar for oracle-mode evaluation: the extractor itself never reads it.
struct PlacementRecord {
    std::string image_id;
    int height = 0;  // cover dimensions
    int width = 0;
    std::uint64_t seed = 0;
    double q = 25.0;
    int cap = 20;
    int block = kBlockSize;
    std::string key_id;  // fingerprint of the codec key, not the key itself
    std::vector<BlockRect> rects;
};

inline std::string codec_key_id(CodecKey key) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(splitmix64(key.seed ^ 0x77a5f3d1c9b02e4eULL)));
    return std::string(buf);
}

inline nlohmann::json record_to_json(const PlacementRecord& rec) {
    nlohmann::json j;
    j["image_id"] = rec.image_id;
    j["height"] = rec.height;
    j["width"] = rec.width;
    j["seed"] = rec.seed;
    j["q"] = rec.q;
    j["cap"] = rec.cap;
    j["block"] = rec.block;
    j["key_id"] = rec.key_id;
    j["rects"] = nlohmann::json::array();
    for (const auto& r : rec.rects) j["rects"].push_back({{"x", r.x}, {"y", r.y}, {"h", r.h}, {"w", r.w}});
    return j;
}

inline PlacementRecord record_from_json(const nlohmann::json& j) {
    PlacementRecord rec;
    rec.image_id = j.value("image_id", "");
    rec.height = j.value("height", 0);
    rec.width = j.value("width", 0);
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.q = j.at("q").get<double>();
    rec.cap = j.at("cap").get<int>();
    rec.block = j.value("block", kBlockSize);
    rec.key_id = j.value("key_id", "");
    for (const auto& r : j.at("rects"))
        rec.rects.push_back({r.at("x").get<int>(), r.at("y").get<int>(), r.at("h").get<int>(), r.at("w").get<int>()});
    return rec;
}

inline void save_record(const PlacementRecord& rec, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_record: cannot open " + path);
    f << record_to_json(rec).dump(2) << "\n";
}

inline PlacementRecord load_record(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_record: cannot open " + path);
    nlohmann::json j;
    f >> j;
    return record_from_json(j);
}

// Ground-truth mask: union of the record's rectangles at cover resolution.
inline MaskBuffer record_mask(const PlacementRecord& rec, int img_h, int img_w) {
    MaskBuffer mask(img_h, img_w);
    for (const auto& r : rec.rects) {
        if (!r.inside(img_h, img_w)) throw std::invalid_argument("record_mask: rect outside image");
        for (int y = r.y; y < r.y + r.h; ++y)
            for (int x = r.x; x < r.x + r.w; ++x) mask.at(y, x) = 1;
    }
    return mask;
}

// Embeds one consistent message into every planned block. Pixels outside the
// plan are bit-identical to the cover.
inline std::pair<ImageBuffer, PlacementRecord> embed_image(const ImageBuffer& cover, const Message& msg,
                                                           CodecKey key, const PlacementPlan& plan,
                                                           double target_psnr = kDefaultTargetPsnr,
                                                           const std::string& image_id = "") {
    for (std::size_t i = 0; i < plan.rects.size(); ++i) {
        const auto& r = plan.rects[i];
        if (r.h != plan.block || r.w != plan.block || !r.inside(cover.height, cover.width))
            throw std::invalid_argument("embed_image: plan does not fit the image");
        for (std::size_t k = i + 1; k < plan.rects.size(); ++k)
            if (r.overlaps(plan.rects[k])) throw std::invalid_argument("embed_image: overlapping plan rects");
    }

    ImageBuffer out = cover;
    for (const auto& r : plan.rects) {
        ImageBuffer block = crop(cover, r.y, r.x, r.h, r.w);
        ImageBuffer encoded = embed_block(block, msg, key, target_psnr);
        paste(out, encoded, r.y, r.x);
    }

    PlacementRecord rec;
    rec.image_id = image_id;
    rec.height = cover.height;
    rec.width = cover.width;
    rec.seed = plan.seed;
    rec.q = plan.q;
    rec.cap = plan.cap;
    rec.block = plan.block;
    rec.key_id = codec_key_id(key);
    rec.rects = plan.rects;
    return {std::move(out), std::move(rec)};
}

}  // namespace dwmark
