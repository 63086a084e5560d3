#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dwmark/common.hpp"
#include "dwmark/image.hpp"
#include "dwmark/image_io.hpp"

namespace dwmark {

enum class AttackKind {
    Identity,
    Resize,
    Crop,
    Rotate,
    Padding,
    Pip,
    Jpeg,
    GaussianNoise,
    GaussianFilter,
    Color,
    Dropout,
    Occlusion,
    CollusionMin,
    CollusionMax,
    CollusionMean,
};

inline const char* attack_name(AttackKind k) {
    switch (k) {
        case AttackKind::Identity: return "identity";
        case AttackKind::Resize: return "resize";
        case AttackKind::Crop: return "crop";
        case AttackKind::Rotate: return "rotate";
        case AttackKind::Padding: return "padding";
        case AttackKind::Pip: return "pip";
        case AttackKind::Jpeg: return "jpeg";
        case AttackKind::GaussianNoise: return "gn";
        case AttackKind::GaussianFilter: return "gf";
        case AttackKind::Color: return "color";
        case AttackKind::Dropout: return "dropout";
        case AttackKind::Occlusion: return "occlusion";
        case AttackKind::CollusionMin: return "collusion_min";
        case AttackKind::CollusionMax: return "collusion_max";
        case AttackKind::CollusionMean: return "collusion_mean";
    }
    return "?";
}

inline AttackKind attack_kind_from_name(const std::string& name) {
    static const std::map<std::string, AttackKind> table = {
        {"identity", AttackKind::Identity},       {"resize", AttackKind::Resize},
        {"crop", AttackKind::Crop},               {"rotate", AttackKind::Rotate},
        {"padding", AttackKind::Padding},         {"pip", AttackKind::Pip},
        {"jpeg", AttackKind::Jpeg},               {"gn", AttackKind::GaussianNoise},
        {"gf", AttackKind::GaussianFilter},       {"color", AttackKind::Color},
        {"dropout", AttackKind::Dropout},         {"occlusion", AttackKind::Occlusion},
        {"collusion_min", AttackKind::CollusionMin},
        {"collusion_max", AttackKind::CollusionMax},
        {"collusion_mean", AttackKind::CollusionMean},
    };
    auto it = table.find(name);
    if (it == table.end()) throw std::invalid_argument("unknown attack kind: " + name);
    return it->second;
}

// One fully reproducible distortion: kind, sampled parameters, and the seed
// driving any per-pixel randomness at application time.
struct AttackSpec {
    AttackKind kind = AttackKind::Identity;
    std::map<std::string, double> params;
    std::uint64_t seed = 0;

    double param(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end())
            throw std::invalid_argument(std::string("attack ") + attack_name(kind) + ": missing param " + name);
        return it->second;
    }
};

using AttackChain = std::vector<AttackSpec>;

// Draws attack parameters uniformly from the published intensity ranges.
inline AttackSpec sample_attack(AttackKind kind, std::uint64_t seed) {
    AttackSpec spec;
    spec.kind = kind;
    spec.seed = seed;
    Rng rng(derive_seed(seed, attack_name(kind)));
    switch (kind) {
        case AttackKind::Identity:
            break;
        case AttackKind::Resize:
            spec.params["r1"] = rng.uniform(0.5, 2.0);
            spec.params["r2"] = rng.uniform(0.5, 2.0);
            break;
        case AttackKind::Crop:
            spec.params["c1"] = rng.uniform(0.7, 1.0);
            spec.params["c2"] = rng.uniform(0.7, 1.0);
            break;
        case AttackKind::Rotate:
            spec.params["angle"] = rng.uniform(-30.0, 30.0);
            break;
        case AttackKind::Padding:
            spec.params["p_up"] = static_cast<double>(rng.uniform_int(1, 99));
            spec.params["p_bottom"] = static_cast<double>(rng.uniform_int(1, 99));
            spec.params["p_left"] = static_cast<double>(rng.uniform_int(1, 99));
            spec.params["p_right"] = static_cast<double>(rng.uniform_int(1, 99));
            break;
        case AttackKind::Pip:
            spec.params["e1"] = rng.uniform(1.0, 2.0);
            spec.params["e2"] = rng.uniform(1.0, 2.0);
            break;
        case AttackKind::Jpeg:
            spec.params["quality"] = static_cast<double>(round_half_up(rng.uniform(50.0, 100.0)));
            break;
        case AttackKind::GaussianNoise:
            spec.params["variance"] = static_cast<double>(rng.uniform_int(3, 10));
            break;
        case AttackKind::GaussianFilter:
            spec.params["ksize"] = static_cast<double>(3 + 2 * rng.uniform_int(0, 2));
            break;
        case AttackKind::Color:
            spec.params["factor"] = rng.uniform(0.5, 1.5);
            break;
        case AttackKind::Dropout:
            spec.params["percent"] = rng.uniform(0.0, 30.0);
            break;
        case AttackKind::Occlusion:
            spec.params["o1"] = rng.uniform(0.25, 0.5);
            spec.params["o2"] = rng.uniform(0.25, 0.5);
            break;
        default:
            throw std::invalid_argument("sample_attack: collusion is not a single attack");
    }
    return spec;
}

namespace detail {

inline int scaled_dim(double factor, int dim) { return std::max(1, round_half_up(factor * dim)); }

struct Rect {
    int y0, x0, h, w;
};

// Placement draws shared between the image path and the mask path. Each kind
// draws destination geometry first so both paths agree on it.
inline Rect crop_placement(const AttackSpec& spec, int h, int w) {
    int ch = std::max(1, round_half_up(spec.param("c1") * h));
    int cw = std::max(1, round_half_up(spec.param("c2") * w));
    ch = std::min(ch, h);
    cw = std::min(cw, w);
    Rng rng(derive_seed(spec.seed, "crop-pos"));
    int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - ch + 1)));
    int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - cw + 1)));
    return {y0, x0, ch, cw};
}

inline Rect pip_placement(const AttackSpec& spec, int h, int w) {
    int canvas_h = scaled_dim(spec.param("e1"), h);
    int canvas_w = scaled_dim(spec.param("e2"), w);
    Rng rng(derive_seed(spec.seed, "pip-pos"));
    int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(canvas_h - h + 1)));
    int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(canvas_w - w + 1)));
    return {y0, x0, canvas_h, canvas_w};
}

inline Rect occlusion_placement(const AttackSpec& spec, int h, int w) {
    int oh = std::min(h, std::max(1, round_half_up(spec.param("o1") * h)));
    int ow = std::min(w, std::max(1, round_half_up(spec.param("o2") * w)));
    Rng rng(derive_seed(spec.seed, "occlusion-pos"));
    int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - oh + 1)));
    int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - ow + 1)));
    return {y0, x0, oh, ow};
}

inline ImageBuffer color_jitter(const ImageBuffer& img, double f) {
    // brightness, contrast, saturation, all scaled by the same factor;
    // float throughout, one quantization at the end
    std::vector<double> v(img.pixels.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f * img.pixels[i];

    double mean_gray = 0;
    for (std::size_t p = 0; p < img.pixel_count(); ++p)
        mean_gray += 0.299 * v[p * 3] + 0.587 * v[p * 3 + 1] + 0.114 * v[p * 3 + 2];
    mean_gray /= static_cast<double>(img.pixel_count());
    for (auto& x : v) x = (x - mean_gray) * f + mean_gray;

    ImageBuffer out(img.height, img.width);
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        double gray = 0.299 * v[p * 3] + 0.587 * v[p * 3 + 1] + 0.114 * v[p * 3 + 2];
        for (int c = 0; c < 3; ++c) out.pixels[p * 3 + c] = clamp_u8(gray + f * (v[p * 3 + c] - gray));
    }
    return out;
}

}  // namespace detail

// Applies one attack. `cover` is required by Dropout (pixels revert to the
// cover); `donor` is the clean watermark-free image required by PIP and
// Occlusion.
inline ImageBuffer apply_attack(const ImageBuffer& img, const AttackSpec& spec,
                                const ImageBuffer* cover = nullptr, const ImageBuffer* donor = nullptr) {
    switch (spec.kind) {
        case AttackKind::Identity:
            return img;
        case AttackKind::Resize:
            return resize_bilinear(img, detail::scaled_dim(spec.param("r1"), img.height),
                                   detail::scaled_dim(spec.param("r2"), img.width));
        case AttackKind::Crop: {
            auto r = detail::crop_placement(spec, img.height, img.width);
            return crop(img, r.y0, r.x0, r.h, r.w);
        }
        case AttackKind::Rotate:
            return rotate_bilinear(img, spec.param("angle"));
        case AttackKind::Padding:
            return pad_image(img, static_cast<int>(spec.param("p_up")), static_cast<int>(spec.param("p_bottom")),
                             static_cast<int>(spec.param("p_left")), static_cast<int>(spec.param("p_right")));
        case AttackKind::Pip: {
            if (!donor) throw std::invalid_argument("pip: donor image required");
            auto r = detail::pip_placement(spec, img.height, img.width);
            ImageBuffer canvas = resize_bilinear(*donor, r.h, r.w);
            paste(canvas, img, r.y0, r.x0);
            return canvas;
        }
        case AttackKind::Jpeg:
            return jpeg_round_trip(img, static_cast<int>(spec.param("quality")));
        case AttackKind::GaussianNoise: {
            double sigma = std::sqrt(spec.param("variance"));
            Rng rng(derive_seed(spec.seed, "gn-pixels"));
            ImageBuffer out(img.height, img.width);
            for (std::size_t i = 0; i < img.pixels.size(); ++i)
                out.pixels[i] = clamp_u8(static_cast<double>(img.pixels[i]) + sigma * rng.normal());
            return out;
        }
        case AttackKind::GaussianFilter:
            return gaussian_blur(img, static_cast<int>(spec.param("ksize")));
        case AttackKind::Color:
            return detail::color_jitter(img, spec.param("factor"));
        case AttackKind::Dropout: {
            if (!cover) throw std::invalid_argument("dropout: cover image required");
            if (!cover->same_size(img)) throw std::invalid_argument("dropout: cover dimension mismatch");
            std::size_t total = img.pixel_count();
            std::size_t k = static_cast<std::size_t>(spec.param("percent") / 100.0 * static_cast<double>(total));
            ImageBuffer out = img;
            // partial Fisher-Yates: exactly k distinct positions
            std::vector<std::uint32_t> idx(total);
            std::iota(idx.begin(), idx.end(), 0u);
            Rng rng(derive_seed(spec.seed, "dropout-pixels"));
            for (std::size_t i = 0; i < k; ++i) {
                std::size_t j = i + static_cast<std::size_t>(rng.below(total - i));
                std::swap(idx[i], idx[j]);
                std::size_t p = idx[i];
                for (int c = 0; c < 3; ++c) out.pixels[p * 3 + c] = cover->pixels[p * 3 + c];
            }
            return out;
        }
        case AttackKind::Occlusion: {
            if (!donor) throw std::invalid_argument("occlusion: donor image required");
            auto r = detail::occlusion_placement(spec, img.height, img.width);
            ImageBuffer patch;
            if (donor->height >= r.h && donor->width >= r.w) {
                Rng rng(derive_seed(spec.seed, "occlusion-src"));
                int sy = static_cast<int>(rng.below(static_cast<std::uint64_t>(donor->height - r.h + 1)));
                int sx = static_cast<int>(rng.below(static_cast<std::uint64_t>(donor->width - r.w + 1)));
                patch = crop(*donor, sy, sx, r.h, r.w);
            } else {
                patch = resize_bilinear(*donor, r.h, r.w);
            }
            ImageBuffer out = img;
            paste(out, patch, r.y0, r.x0);
            return out;
        }
        default:
            throw std::invalid_argument("apply_attack: collusion needs two images, use collude()");
    }
}

// Transforms a detection mask through the geometric component of the attack.
// Pixel-value attacks leave the mask unchanged; occlusion erases the covered
// region since the watermark under it is destroyed.
inline MaskBuffer apply_attack_mask(const MaskBuffer& mask, const AttackSpec& spec) {
    switch (spec.kind) {
        case AttackKind::Resize:
            return resize_mask(mask, detail::scaled_dim(spec.param("r1"), mask.height),
                               detail::scaled_dim(spec.param("r2"), mask.width));
        case AttackKind::Crop: {
            auto r = detail::crop_placement(spec, mask.height, mask.width);
            MaskBuffer out(r.h, r.w);
            for (int y = 0; y < r.h; ++y)
                for (int x = 0; x < r.w; ++x) out.at(y, x) = mask.at(r.y0 + y, r.x0 + x);
            return out;
        }
        case AttackKind::Rotate:
            return rotate_mask(mask, spec.param("angle"));
        case AttackKind::Padding: {
            int top = static_cast<int>(spec.param("p_up")), bottom = static_cast<int>(spec.param("p_bottom"));
            int left = static_cast<int>(spec.param("p_left")), right = static_cast<int>(spec.param("p_right"));
            MaskBuffer out(mask.height + top + bottom, mask.width + left + right);
            for (int y = 0; y < mask.height; ++y)
                for (int x = 0; x < mask.width; ++x) out.at(top + y, left + x) = mask.at(y, x);
            return out;
        }
        case AttackKind::Pip: {
            auto r = detail::pip_placement(spec, mask.height, mask.width);
            MaskBuffer out(r.h, r.w);
            for (int y = 0; y < mask.height; ++y)
                for (int x = 0; x < mask.width; ++x) out.at(r.y0 + y, r.x0 + x) = mask.at(y, x);
            return out;
        }
        case AttackKind::Occlusion: {
            auto r = detail::occlusion_placement(spec, mask.height, mask.width);
            MaskBuffer out = mask;
            for (int y = r.y0; y < r.y0 + r.h; ++y)
                for (int x = r.x0; x < r.x0 + r.w; ++x) out.at(y, x) = 0;
            return out;
        }
        default:
            return mask;
    }
}

// Attacks compose left to right.
inline ImageBuffer apply_combined(const ImageBuffer& img, const AttackChain& chain,
                                  const ImageBuffer* cover = nullptr, const ImageBuffer* donor = nullptr) {
    if (chain.empty()) throw std::invalid_argument("apply_combined: empty attack chain");
    ImageBuffer out = img;
    for (const auto& spec : chain) out = apply_attack(out, spec, cover, donor);
    return out;
}

inline MaskBuffer apply_combined_mask(const MaskBuffer& mask, const AttackChain& chain) {
    if (chain.empty()) throw std::invalid_argument("apply_combined_mask: empty attack chain");
    MaskBuffer out = mask;
    for (const auto& spec : chain) out = apply_attack_mask(out, spec);
    return out;
}

enum class CollusionMode { Min, Max, Mean };

// Per-pixel, per-channel collusion of two watermarked copies.
inline ImageBuffer collude(const ImageBuffer& x1, const ImageBuffer& x2, CollusionMode mode) {
    if (!x1.same_size(x2)) throw std::invalid_argument("collude: dimension mismatch");
    ImageBuffer out(x1.height, x1.width);
    for (std::size_t i = 0; i < x1.pixels.size(); ++i) {
        int a = x1.pixels[i], b = x2.pixels[i];
        int v = 0;
        switch (mode) {
            case CollusionMode::Min: v = std::min(a, b); break;
            case CollusionMode::Max: v = std::max(a, b); break;
            case CollusionMode::Mean: v = (a + b + 1) / 2; break;  // round half up
        }
        out.pixels[i] = static_cast<std::uint8_t>(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization: JSON documents and "kind+kind:seed=N" strings
// ---------------------------------------------------------------------------

inline nlohmann::json attack_to_json(const AttackSpec& spec) {
    nlohmann::json j;
    j["kind"] = attack_name(spec.kind);
    j["seed"] = spec.seed;
    j["params"] = spec.params;
    return j;
}

inline AttackSpec attack_from_json(const nlohmann::json& j) {
    AttackSpec spec;
    spec.kind = attack_kind_from_name(j.at("kind").get<std::string>());
    spec.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("params"))
        for (auto it = j["params"].begin(); it != j["params"].end(); ++it)
            spec.params[it.key()] = it.value().get<double>();
    return spec;
}

inline nlohmann::json chain_to_json(const AttackChain& chain) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : chain) j.push_back(attack_to_json(s));
    return j;
}

inline AttackChain chain_from_json(const nlohmann::json& j) {
    AttackChain chain;
    if (j.is_array()) {
        for (const auto& s : j) chain.push_back(attack_from_json(s));
    } else if (j.contains("chain")) {
        for (const auto& s : j["chain"]) chain.push_back(attack_from_json(s));
    } else {
        chain.push_back(attack_from_json(j));
    }
    return chain;
}

// "rotate", "jpeg:seed=7", "crop+resize+jpeg:seed=5". Parameters are sampled
// from the seed; component seeds of a combined attack are derived per kind
// and position.
inline AttackChain parse_attack_string(const std::string& text) {
    std::string kinds = text;
    std::uint64_t seed = 0;
    auto colon = text.find(':');
    if (colon != std::string::npos) {
        kinds = text.substr(0, colon);
        std::string tail = text.substr(colon + 1);
        if (tail.rfind("seed=", 0) != 0) throw std::invalid_argument("attack string: expected seed=<n>");
        seed = std::stoull(tail.substr(5));
    }
    AttackChain chain;
    std::size_t pos = 0, idx = 0;
    while (pos <= kinds.size()) {
        auto plus = kinds.find('+', pos);
        std::string name = kinds.substr(pos, plus == std::string::npos ? std::string::npos : plus - pos);
        if (name.empty()) throw std::invalid_argument("attack string: empty kind");
        chain.push_back(sample_attack(attack_kind_from_name(name), derive_seed(seed, name, idx)));
        ++idx;
        if (plus == std::string::npos) break;
        pos = plus + 1;
    }
    return chain;
}

}  // namespace dwmark
