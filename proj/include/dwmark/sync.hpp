#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

#include "dwmark/attacks.hpp"
#include "dwmark/codec.hpp"
#include "dwmark/image.hpp"
#include "dwmark/placement.hpp"

namespace dwmark {

inline constexpr int kTileSize = 512;
inline constexpr double kBoxSizeTolerance = 0.25;  // relative deviation from the block side

inline int default_min_box_area(int block = kBlockSize) { return block * block / 4; }

// ---------------------------------------------------------------------------
// Pad&Split inference tiling
// ---------------------------------------------------------------------------

struct TilePatch {
    ImageBuffer image;
    int y0 = 0;
    int x0 = 0;
};

struct MaskTile {
    MaskBuffer mask;
    int y0 = 0;
    int x0 = 0;
};

// Pads bottom/right to the next tile multiple (none when already a multiple)
// and splits into non-overlapping tiles with recorded offsets.
inline std::vector<TilePatch> pad_and_split(const ImageBuffer& img, int tile = kTileSize) {
    if (tile < 1) throw std::invalid_argument("pad_and_split: tile must be positive");
    int tiles_y = (img.height + tile - 1) / tile;
    int tiles_x = (img.width + tile - 1) / tile;
    ImageBuffer padded = (tiles_y * tile == img.height && tiles_x * tile == img.width)
                             ? img
                             : pad_image(img, 0, tiles_y * tile - img.height, 0, tiles_x * tile - img.width);
    std::vector<TilePatch> out;
    out.reserve(static_cast<std::size_t>(tiles_y) * tiles_x);
    for (int ty = 0; ty < tiles_y; ++ty)
        for (int tx = 0; tx < tiles_x; ++tx)
            out.push_back({crop(padded, ty * tile, tx * tile, tile, tile), ty * tile, tx * tile});
    return out;
}

// Reassembles per-tile masks and crops away the padding. The tiles must cover
// the padded canvas exactly once.
inline MaskBuffer merge_masks(const std::vector<MaskTile>& tiles, int height, int width) {
    if (tiles.empty()) throw std::invalid_argument("merge_masks: no tiles");
    int tile = tiles.front().mask.height;
    if (tile < 1 || tiles.front().mask.width != tile)
        throw std::invalid_argument("merge_masks: tiles must be square");
    int tiles_y = (height + tile - 1) / tile;
    int tiles_x = (width + tile - 1) / tile;
    std::vector<char> seen(static_cast<std::size_t>(tiles_y) * tiles_x, 0);
    for (const auto& t : tiles) {
        if (t.mask.height != tile || t.mask.width != tile)
            throw std::invalid_argument("merge_masks: inconsistent tile size");
        if (t.y0 % tile != 0 || t.x0 % tile != 0 || t.y0 < 0 || t.x0 < 0 || t.y0 / tile >= tiles_y ||
            t.x0 / tile >= tiles_x)
            throw std::invalid_argument("merge_masks: tile offset off the grid");
        char& slot = seen[static_cast<std::size_t>(t.y0 / tile) * tiles_x + t.x0 / tile];
        if (slot) throw std::invalid_argument("merge_masks: overlapping tiles");
        slot = 1;
    }
    for (char s : seen)
        if (!s) throw std::invalid_argument("merge_masks: missing tile");

    MaskBuffer out(height, width);
    for (const auto& t : tiles) {
        int ye = std::min(tile, height - t.y0);
        int xe = std::min(tile, width - t.x0);
        for (int y = 0; y < ye; ++y)
            for (int x = 0; x < xe; ++x) out.at(t.y0 + y, t.x0 + x) = t.mask.at(y, x);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Detectors
// ---------------------------------------------------------------------------

// Per-tile mask inference. A trained segmentation model slots in here; the
// two shipped implementations are the oracle (ground truth through the attack
// geometry) and a blind statistical detector for the reference codec.
// finalize() runs once on the merged full-resolution mask, for cleanup that
// must not see tile seams.
class Detector {
public:
    virtual ~Detector() = default;
    virtual MaskBuffer infer_tile(const ImageBuffer& tile, int y0, int x0) = 0;
    virtual void finalize(MaskBuffer&) {}
};

inline MaskBuffer detect(const ImageBuffer& img, Detector& detector, int tile = kTileSize) {
    std::vector<TilePatch> patches = pad_and_split(img, tile);
    std::vector<MaskTile> masks;
    masks.reserve(patches.size());
    for (const auto& p : patches) masks.push_back({detector.infer_tile(p.image, p.y0, p.x0), p.y0, p.x0});
    MaskBuffer merged = merge_masks(masks, img.height, img.width);
    detector.finalize(merged);
    return merged;
}

// Ground-truth detector: reads a placement record and pushes the embedding
// mask through the geometric part of the known attack chain. Isolates the
// geometry math from segmentation quality.
class OracleDetector : public Detector {
public:
    OracleDetector(const PlacementRecord& record, int cover_h, int cover_w, const AttackChain& chain = {}) {
        mask_ = record_mask(record, cover_h, cover_w);
        if (!chain.empty()) mask_ = apply_combined_mask(mask_, chain);
    }

    explicit OracleDetector(const PlacementRecord& record, const AttackChain& chain = {})
        : OracleDetector(record, record.height, record.width, chain) {}

    const MaskBuffer& full_mask() const { return mask_; }

    MaskBuffer infer_tile(const ImageBuffer& tile, int y0, int x0) override {
        MaskBuffer out(tile.height, tile.width);
        for (int y = 0; y < tile.height; ++y) {
            int sy = y0 + y;
            if (sy >= mask_.height) break;
            for (int x = 0; x < tile.width; ++x) {
                int sx = x0 + x;
                if (sx >= mask_.width) break;
                out.at(y, x) = mask_.at(sy, sx);
            }
        }
        return out;
    }

private:
    MaskBuffer mask_;
};

namespace detail {

inline std::vector<double> gauss_plane(const std::vector<double>& v, int h, int w, double sigma) {
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& x : k) x /= sum;
    auto cl = [](int a, int hi) { return a < 0 ? 0 : (a > hi ? hi : a); };
    std::vector<double> tmp(v.size()), out(v.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * v[static_cast<std::size_t>(y) * w + cl(x + i, w - 1)];
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp[static_cast<std::size_t>(cl(y + i, h - 1)) * w + x];
            out[static_cast<std::size_t>(y) * w + x] = acc;
        }
    return out;
}

inline std::vector<double> box_mean(const std::vector<double>& v, int h, int w, int radius) {
    std::vector<double> integral(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
    for (int y = 0; y < h; ++y) {
        double row = 0;
        for (int x = 0; x < w; ++x) {
            row += v[static_cast<std::size_t>(y) * w + x];
            integral[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] =
                integral[static_cast<std::size_t>(y) * (w + 1) + x + 1] + row;
        }
    }
    std::vector<double> out(v.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int y0 = std::max(0, y - radius), y1 = std::min(h, y + radius + 1);
            int x0 = std::max(0, x - radius), x1 = std::min(w, x + radius + 1);
            double s = integral[static_cast<std::size_t>(y1) * (w + 1) + x1] -
                       integral[static_cast<std::size_t>(y0) * (w + 1) + x1] -
                       integral[static_cast<std::size_t>(y1) * (w + 1) + x0] +
                       integral[static_cast<std::size_t>(y0) * (w + 1) + x0];
            out[static_cast<std::size_t>(y) * w + x] = s / ((y1 - y0) * (x1 - x0));
        }
    return out;
}

inline MaskBuffer majority_filter(const MaskBuffer& mask, int radius) {
    std::vector<double> v(mask.values.begin(), mask.values.end());
    std::vector<double> m = box_mean(v, mask.height, mask.width, radius);
    MaskBuffer out(mask.height, mask.width);
    for (std::size_t i = 0; i < m.size(); ++i) out.values[i] = m[i] >= 0.5 ? 1 : 0;
    return out;
}

inline MaskBuffer erode(const MaskBuffer& mask, int radius) {
    std::vector<double> v(mask.values.begin(), mask.values.end());
    std::vector<double> m = box_mean(v, mask.height, mask.width, radius);
    MaskBuffer out(mask.height, mask.width);
    double all = 1.0 - 0.5 / ((2.0 * radius + 1) * (2.0 * radius + 1));
    for (std::size_t i = 0; i < m.size(); ++i) out.values[i] = m[i] >= all ? 1 : 0;
    return out;
}

}  // namespace detail

// Blind statistical detector for the reference codec: the carriers boost
// energy in a known luminance frequency band, so embedded regions show a high
// band-energy level that is simultaneously large relative to the energy above
// the band. The local energy window dilates the raw mask by a few pixels, so
// finalize() erodes the merged mask by the matching amount. Thresholds were
// calibrated once on synthetic covers and frozen.
class ResidualEnergyDetector : public Detector {
public:
    explicit ResidualEnergyDetector(double min_band_energy = 3.0, double band_to_high_ratio = 1.1,
                                    int erosion_radius = 3)
        : min_band_energy_(min_band_energy), ratio_(band_to_high_ratio), erosion_(erosion_radius) {}

    MaskBuffer infer_tile(const ImageBuffer& tile, int, int) override {
        const int h = tile.height, w = tile.width;
        std::vector<double> y = luma_plane(tile);
        std::vector<double> low = detail::gauss_plane(y, h, w, 0.7);
        std::vector<double> lower = detail::gauss_plane(y, h, w, 2.0);
        std::vector<double> band(y.size()), high(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            double b = low[i] - lower[i];
            double hf = y[i] - low[i];
            band[i] = b * b;
            high[i] = hf * hf;
        }
        std::vector<double> e_band = detail::box_mean(band, h, w, 8);
        std::vector<double> e_high = detail::box_mean(high, h, w, 8);
        MaskBuffer mask(h, w);
        for (std::size_t i = 0; i < e_band.size(); ++i)
            mask.values[i] = (e_band[i] >= min_band_energy_ && e_band[i] >= ratio_ * e_high[i]) ? 1 : 0;
        return mask;
    }

    void finalize(MaskBuffer& mask) override {
        // the energy statistics are unreliable within one window of the
        // canvas border (padding creases pass the ratio test there)
        const int frame = 8;
        for (int y = 0; y < mask.height; ++y)
            for (int x = 0; x < mask.width; ++x)
                if (y < frame || x < frame || y >= mask.height - frame || x >= mask.width - frame)
                    mask.at(y, x) = 0;
        mask = detail::majority_filter(mask, 3);
        if (erosion_ > 0) mask = detail::erode(mask, erosion_);
    }

private:
    double min_band_energy_;
    double ratio_;
    int erosion_;
};

// ---------------------------------------------------------------------------
// Minimum-area bounding boxes
// ---------------------------------------------------------------------------

// Minimum-area rotated rectangle. side_a runs along `angle_deg`, which is
// normalized to (-45, 45]; side_b is perpendicular.
struct BoundingBox {
    double cx = 0, cy = 0;
    double side_a = 0, side_b = 0;
    double angle_deg = 0;
    double area_px = 0;  // pixel count of the source component
};

namespace detail {

struct Pt {
    double x, y;
};

inline double cross(const Pt& o, const Pt& a, const Pt& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew monotone chain; returns hull in counter-clockwise order.
inline std::vector<Pt> convex_hull(std::vector<Pt> pts) {
    std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Pt& a, const Pt& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    if (pts.size() < 3) return pts;
    std::vector<Pt> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    std::size_t lower = k + 1;
    for (std::size_t i = pts.size() - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

// Rotating calipers over the hull edges. A tilted box that undercuts the
// axis-aligned one by less than 3% is treated as an artifact of ragged region
// edges and the axis-aligned box wins; genuine rotations beat that gap
// immediately (a square rotated 2 degrees already saves ~7%).
inline BoundingBox min_area_rect(const std::vector<Pt>& hull) {
    BoundingBox best;
    double best_area = -1;
    std::size_t n = hull.size();
    if (n == 0) return best;
    if (n == 1) return {hull[0].x, hull[0].y, 0, 0, 0, 0};

    auto evaluate = [&](double ux, double uy, BoundingBox& out) {
        double vx = -uy, vy = ux;  // normal
        double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
        for (const auto& t : hull) {
            double u = t.x * ux + t.y * uy;
            double v = t.x * vx + t.y * vy;
            umin = std::min(umin, u);
            umax = std::max(umax, u);
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
        double uc = 0.5 * (umin + umax), vc = 0.5 * (vmin + vmax);
        out.cx = uc * ux + vc * vx;
        out.cy = uc * uy + vc * vy;
        out.side_a = umax - umin;
        out.side_b = vmax - vmin;
        out.angle_deg = std::atan2(uy, ux) * 180.0 / 3.14159265358979323846;
        return out.side_a * out.side_b;
    };

    for (std::size_t i = 0; i < n; ++i) {
        const Pt& p = hull[i];
        const Pt& q = hull[(i + 1) % n];
        double dx = q.x - p.x, dy = q.y - p.y;
        double len = std::hypot(dx, dy);
        if (len < 1e-12) continue;
        BoundingBox cand;
        double area = evaluate(dx / len, dy / len, cand);
        if (best_area < 0 || area < best_area) {
            best_area = area;
            best = cand;
        }
    }
    BoundingBox axis;
    double axis_area = evaluate(1.0, 0.0, axis);
    if (axis_area <= 1.03 * best_area) best = axis;

    // normalize: angle in (-45, 45], side_a along the x-ish direction
    while (best.angle_deg > 45.0) {
        best.angle_deg -= 90.0;
        std::swap(best.side_a, best.side_b);
    }
    while (best.angle_deg <= -45.0) {
        best.angle_deg += 90.0;
        std::swap(best.side_a, best.side_b);
    }
    return best;
}

}  // namespace detail

// Connected components (8-connectivity) with at least min_area pixels, each
// reduced to the minimum-area rotated rectangle of its pixel footprint.
inline std::vector<BoundingBox> extract_boxes(const MaskBuffer& mask, int min_area) {
    const int h = mask.height, w = mask.width;
    std::vector<int> label(static_cast<std::size_t>(h) * w, -1);
    int next_label = 0;
    std::vector<std::size_t> area;
    std::vector<std::map<int, std::pair<int, int>>> row_extents;  // label -> y -> [xmin, xmax]

    std::vector<std::pair<int, int>> stack;
    for (int sy = 0; sy < h; ++sy)
        for (int sx = 0; sx < w; ++sx) {
            std::size_t si = static_cast<std::size_t>(sy) * w + sx;
            if (!mask.values[si] || label[si] >= 0) continue;
            int id = next_label++;
            area.push_back(0);
            row_extents.emplace_back();
            stack.clear();
            stack.emplace_back(sy, sx);
            label[si] = id;
            while (!stack.empty()) {
                auto [y, x] = stack.back();
                stack.pop_back();
                ++area[id];
                auto it = row_extents[id].find(y);
                if (it == row_extents[id].end())
                    row_extents[id][y] = {x, x};
                else {
                    it->second.first = std::min(it->second.first, x);
                    it->second.second = std::max(it->second.second, x);
                }
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int ny = y + dy, nx = x + dx;
                        if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
                        std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                        if (mask.values[ni] && label[ni] < 0) {
                            label[ni] = id;
                            stack.emplace_back(ny, nx);
                        }
                    }
            }
        }

    std::vector<BoundingBox> boxes;
    for (int id = 0; id < next_label; ++id) {
        if (static_cast<int>(area[id]) < min_area) continue;
        // hull over pixel-square corners of the per-row extremes
        std::vector<detail::Pt> pts;
        pts.reserve(row_extents[id].size() * 4);
        for (const auto& [y, ext] : row_extents[id]) {
            pts.push_back({ext.first - 0.5, y - 0.5});
            pts.push_back({ext.first - 0.5, y + 0.5});
            pts.push_back({ext.second + 0.5, y - 0.5});
            pts.push_back({ext.second + 0.5, y + 0.5});
        }
        BoundingBox box = detail::min_area_rect(detail::convex_hull(std::move(pts)));
        box.area_px = static_cast<double>(area[id]);
        boxes.push_back(box);
    }
    return boxes;
}

// ---------------------------------------------------------------------------
// Geometry estimation and rectification
// ---------------------------------------------------------------------------

struct GeometricEstimate {
    double angle_deg = 0;
    double scale_x = 1;
    double scale_y = 1;
    // per-box raw estimates, kept for audit
    std::vector<double> raw_angles;
    std::vector<double> raw_scale_x;
    std::vector<double> raw_scale_y;
};

// Corners of the rotated rectangle, in mask coordinates.
inline std::array<std::pair<double, double>, 4> box_corners(const BoundingBox& box) {
    double rad = box.angle_deg * 3.14159265358979323846 / 180.0;
    double ux = std::cos(rad), uy = std::sin(rad);
    double ha = 0.5 * box.side_a, hb = 0.5 * box.side_b;
    std::array<std::pair<double, double>, 4> out;
    int i = 0;
    for (double sa : {-1.0, 1.0})
        for (double sb : {-1.0, 1.0})
            out[i++] = {box.cx + sa * ha * ux - sb * hb * uy, box.cy + sa * ha * uy + sb * hb * ux};
    return out;
}

inline bool box_touches_boundary(const BoundingBox& box, int height, int width, double tol = 1.5) {
    for (auto [x, y] : box_corners(box))
        if (x <= tol - 0.5 || y <= tol - 0.5 || x >= width - 0.5 - tol || y >= height - 0.5 - tol) return true;
    return false;
}

// Boxes clear of the canvas edges. Truncated regions (crop leftovers) always
// touch an edge and would bias parameter estimation; when every box touches,
// all are returned so small images stay usable.
inline std::vector<BoundingBox> interior_boxes(const std::vector<BoundingBox>& boxes, int height, int width) {
    std::vector<BoundingBox> inner;
    for (const auto& b : boxes)
        if (!box_touches_boundary(b, height, width)) inner.push_back(b);
    return inner.empty() ? boxes : inner;
}

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Keep entries within 2.5 median absolute deviations; `floor` guards the
// all-identical case where the MAD collapses to zero.
inline std::vector<char> mad_keep(const std::vector<double>& v, double floor) {
    double med = median(v);
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::fabs(v[i] - med);
    double mad = std::max(median(dev), floor);
    std::vector<char> keep(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) keep[i] = dev[i] <= 2.5 * mad ? 1 : 0;
    return keep;
}

}  // namespace detail

// Recovers rotation angle and per-axis scale from the boxes, using the prior
// that raw encoded blocks are square with side `block_side` and unrotated.
// Every block shares one global transform and local erasures can only shrink
// a region, so the largest boxes anchor the estimate and noticeably smaller
// ones (erased leftovers) stay out of it. Within the anchored cohort, entries
// beyond 2.5 median absolute deviations are removed per quantity and the
// survivors averaged; fewer than two survivors fall back to the cohort
// median.
inline GeometricEstimate estimate_geometry(const std::vector<BoundingBox>& boxes, int block_side = kBlockSize) {
    if (boxes.empty()) throw std::invalid_argument("estimate_geometry: no watermark found (empty box list)");
    GeometricEstimate est;
    for (const auto& b : boxes) {
        est.raw_angles.push_back(b.angle_deg);
        est.raw_scale_x.push_back(b.side_a / block_side);
        est.raw_scale_y.push_back(b.side_b / block_side);
    }

    double ax = *std::max_element(est.raw_scale_x.begin(), est.raw_scale_x.end());
    double ay = *std::max_element(est.raw_scale_y.begin(), est.raw_scale_y.end());
    std::vector<double> ca, cx, cy;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (est.raw_scale_x[i] >= 0.94 * ax && est.raw_scale_y[i] >= 0.94 * ay) {
            ca.push_back(est.raw_angles[i]);
            cx.push_back(est.raw_scale_x[i]);
            cy.push_back(est.raw_scale_y[i]);
        }
    }
    if (ca.empty()) {  // no box is near-largest in both axes at once
        ca = est.raw_angles;
        cx = est.raw_scale_x;
        cy = est.raw_scale_y;
    }

    auto keep_a = detail::mad_keep(ca, 0.5);
    auto keep_x = detail::mad_keep(cx, 0.01);
    auto keep_y = detail::mad_keep(cy, 0.01);
    double sa = 0, sx = 0, sy = 0;
    int n = 0;
    for (std::size_t i = 0; i < ca.size(); ++i) {
        if (keep_a[i] && keep_x[i] && keep_y[i]) {
            sa += ca[i];
            sx += cx[i];
            sy += cy[i];
            ++n;
        }
    }
    if (n >= 2) {
        est.angle_deg = sa / n;
        est.scale_x = sx / n;
        est.scale_y = sy / n;
    } else {
        est.angle_deg = detail::median(ca);
        est.scale_x = detail::median(cx);
        est.scale_y = detail::median(cy);
    }
    if (est.scale_x <= 0 || est.scale_y <= 0)
        throw std::invalid_argument("estimate_geometry: degenerate scale estimate");

    // snap below the rasterization noise floor; deformations this small do
    // not hurt decoding, while a spurious resample does
    if (std::fabs(est.angle_deg) <= 0.75) est.angle_deg = 0.0;
    if (std::fabs(est.scale_x - 1.0) <= 0.02) est.scale_x = 1.0;
    if (std::fabs(est.scale_y - 1.0) <= 0.02) est.scale_y = 1.0;
    return est;
}

struct RectifiedPair {
    ImageBuffer image;
    MaskBuffer mask;
};

// Inverts the estimated scale-then-rotate deformation in a single resampling
// pass (bilinear for the image, thresholded for the mask). The output canvas
// is the de-rotated, de-scaled extent of the input.
inline RectifiedPair rectify(const ImageBuffer& img, const MaskBuffer& mask, const GeometricEstimate& est) {
    if (!(est.scale_x > 0) || !(est.scale_y > 0)) throw std::invalid_argument("rectify: degenerate scale");
    if (img.height != mask.height || img.width != mask.width)
        throw std::invalid_argument("rectify: image/mask dimension mismatch");
    if (est.angle_deg == 0.0 && est.scale_x == 1.0 && est.scale_y == 1.0) return {img, mask};

    double rad = est.angle_deg * 3.14159265358979323846 / 180.0;
    double c = std::fabs(std::cos(rad)), s = std::fabs(std::sin(rad));
    double denom = c * c - s * s;  // |angle| < 45 keeps this positive
    double rot_w = (img.width * c - img.height * s) / denom;
    double rot_h = (img.height * c - img.width * s) / denom;
    if (denom < 0.01 || rot_w < 1 || rot_h < 1) {
        rot_w = img.width;
        rot_h = img.height;
    }
    int out_w = std::max(1, round_half_up(rot_w / est.scale_x));
    int out_h = std::max(1, round_half_up(rot_h / est.scale_y));

    double ca = std::cos(rad), sa = std::sin(rad);
    // output -> attacked: rotate(angle) * scale
    double a00 = ca * est.scale_x, a01 = -sa * est.scale_y;
    double a10 = sa * est.scale_x, a11 = ca * est.scale_y;
    double cx_out = (out_w - 1) * 0.5, cy_out = (out_h - 1) * 0.5;
    double cx_att = (img.width - 1) * 0.5, cy_att = (img.height - 1) * 0.5;
    double bx = cx_att - (a00 * cx_out + a01 * cy_out);
    double by = cy_att - (a10 * cx_out + a11 * cy_out);

    RectifiedPair out;
    out.image = warp_affine_bilinear(img, out_h, out_w, a00, a01, a10, a11, bx, by);
    out.mask = warp_affine_mask(mask, out_h, out_w, a00, a01, a10, a11, bx, by);
    return out;
}

// Crop origins (top-left corners) of the synchronized blocks: one axis-aligned
// block per surviving box, centered on the box center and clamped inside the
// canvas. Boxes whose rectified size strays more than 25% from the block side
// are dropped, as are under-sized boxes at the canvas edge: those are
// truncated blocks whose content no longer sits where the center rule would
// crop it.
inline std::vector<std::pair<int, int>> synchronized_block_origins(const MaskBuffer& mask, int block = kBlockSize,
                                                                   int min_area = -1) {
    if (min_area < 0) min_area = default_min_box_area(block);
    std::vector<std::pair<int, int>> origins;  // (y0, x0)
    if (mask.height < block || mask.width < block) return origins;
    for (const auto& box : extract_boxes(mask, min_area)) {
        double tol = kBoxSizeTolerance * block;
        if (std::fabs(box.side_a - block) > tol || std::fabs(box.side_b - block) > tol) continue;
        if ((box.side_a < block - 2 || box.side_b < block - 2) &&
            box_touches_boundary(box, mask.height, mask.width))
            continue;
        int x0 = round_half_up(box.cx - (block - 1) * 0.5);
        int y0 = round_half_up(box.cy - (block - 1) * 0.5);
        x0 = std::clamp(x0, 0, mask.width - block);
        y0 = std::clamp(y0, 0, mask.height - block);
        origins.emplace_back(y0, x0);
    }
    return origins;
}

inline std::vector<ImageBuffer> extract_synchronized_blocks(const ImageBuffer& img, const MaskBuffer& mask,
                                                            int block = kBlockSize, int min_area = -1) {
    if (img.height != mask.height || img.width != mask.width)
        throw std::invalid_argument("extract_synchronized_blocks: image/mask dimension mismatch");
    std::vector<ImageBuffer> blocks;
    for (auto [y0, x0] : synchronized_block_origins(mask, block, min_area))
        blocks.push_back(crop(img, y0, x0, block, block));
    return blocks;
}

}  // namespace dwmark
