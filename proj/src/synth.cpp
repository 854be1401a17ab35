#include "oetr/synth.hpp"

#include <algorithm>
#include <cmath>

namespace oetr::synth {

using geometry::Vec2;

void SynthConfig::validate() const {
    if (canvas_size < 8 || output_size < 8) throw InvalidConfig("synth: sizes too small");
    if (output_size % 32 != 0) throw InvalidConfig("synth: output_size must be divisible by 32");
    if (!(overlap_min > 0 && overlap_min < overlap_max && overlap_max <= 1))
        throw InvalidConfig("synth: overlap range must satisfy 0 < min < max <= 1");
    if (!(scale_min >= 1 && scale_min <= scale_max))
        throw InvalidConfig("synth: scale range must satisfy 1 <= min <= max");
    if (jitter < 0 || jitter > 0.2) throw InvalidConfig("synth: jitter must be in [0, 0.2]");
    if (octaves < 1 || octaves > 16) throw InvalidConfig("synth: octaves must be in [1, 16]");
    if (canvas_size < output_size / 4) throw InvalidConfig("synth: canvas too small for crops");
}

// ------------------------------------------------------------------- noise

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t mix64(std::uint64_t a, std::uint64_t b) { return mix64(a ^ mix64(b)); }

double hash01(std::uint64_t h) {
    return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);  // 53-bit mantissa
}

double lattice(std::uint64_t seed, std::int64_t xi, std::int64_t yi) {
    return hash01(mix64(seed, mix64(static_cast<std::uint64_t>(xi) * 0x8DA6B343ull ^
                                    static_cast<std::uint64_t>(yi) * 0xD8163841ull,
                                    static_cast<std::uint64_t>(yi))));
}

double fade(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }

// Multi-octave value noise with mip-style attenuation of octaves finer than
// the sampling footprint, so the same canvas region looks consistent across
// crop scales.
double sample_noise(const SynthConfig& cfg, std::uint64_t field_seed, double x, double y,
                    double footprint) {
    double acc = 0, norm = 0;
    double amp = 1.0;
    for (int o = 0; o < cfg.octaves; ++o, amp *= 0.68) {
        const double cell = static_cast<double>(cfg.canvas_size) / static_cast<double>(2ll << o);
        if (cell < 0.5) break;
        const double w = std::clamp(cell / std::max(footprint, 1e-9) - 0.5, 0.0, 1.0) * amp;
        if (w <= 0) continue;
        const std::uint64_t os = mix64(field_seed, static_cast<std::uint64_t>(o) + 101);
        const double u = x / cell, v = y / cell;
        const auto iu = static_cast<std::int64_t>(std::floor(u));
        const auto iv = static_cast<std::int64_t>(std::floor(v));
        const double fu = fade(u - static_cast<double>(iu));
        const double fv = fade(v - static_cast<double>(iv));
        const double n00 = lattice(os, iu, iv), n10 = lattice(os, iu + 1, iv);
        const double n01 = lattice(os, iu, iv + 1), n11 = lattice(os, iu + 1, iv + 1);
        const double n = (n00 * (1 - fu) + n10 * fu) * (1 - fv) + (n01 * (1 - fu) + n11 * fu) * fv;
        acc += w * n;
        norm += w;
    }
    return norm > 0 ? acc / norm : 0.5;
}

// --------------------------------------------------------------- homography

struct Homography {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    Vec2 apply(double u, double v) const {
        const double w = m[6] * u + m[7] * v + m[8];
        return {(m[0] * u + m[1] * v + m[2]) / w, (m[3] * u + m[4] * v + m[5]) / w};
    }
};

// Direct linear solve of the 8 homography parameters from 4 correspondences.
Homography fit_homography(const std::array<Vec2, 4>& src, const std::array<Vec2, 4>& dst) {
    double a[8][9] = {};
    for (int i = 0; i < 4; ++i) {
        const double u = src[static_cast<std::size_t>(i)][0], v = src[static_cast<std::size_t>(i)][1];
        const double x = dst[static_cast<std::size_t>(i)][0], y = dst[static_cast<std::size_t>(i)][1];
        double* r1 = a[2 * i];
        double* r2 = a[2 * i + 1];
        r1[0] = u; r1[1] = v; r1[2] = 1; r1[6] = -u * x; r1[7] = -v * x; r1[8] = x;
        r2[3] = u; r2[4] = v; r2[5] = 1; r2[6] = -u * y; r2[7] = -v * y; r2[8] = y;
    }
    // Gaussian elimination with partial pivoting
    for (int col = 0; col < 8; ++col) {
        int piv = col;
        for (int r = col + 1; r < 8; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-12) throw NumericalError("degenerate homography");
        std::swap_ranges(a[col], a[col] + 9, a[piv]);
        for (int r = 0; r < 8; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 9; ++c) a[r][c] -= f * a[col][c];
        }
    }
    Homography h;
    for (int i = 0; i < 8; ++i) h.m[static_cast<std::size_t>(i)] = a[i][8] / a[i][i];
    h.m[8] = 1.0;
    return h;
}

Homography invert(const Homography& h) {
    const auto& m = h.m;
    std::array<double, 9> inv;
    inv[0] = m[4] * m[8] - m[5] * m[7];
    inv[1] = m[2] * m[7] - m[1] * m[8];
    inv[2] = m[1] * m[5] - m[2] * m[4];
    inv[3] = m[5] * m[6] - m[3] * m[8];
    inv[4] = m[0] * m[8] - m[2] * m[6];
    inv[5] = m[2] * m[3] - m[0] * m[5];
    inv[6] = m[3] * m[7] - m[4] * m[6];
    inv[7] = m[1] * m[6] - m[0] * m[7];
    inv[8] = m[0] * m[4] - m[1] * m[3];
    const double det = m[0] * inv[0] + m[1] * inv[3] + m[2] * inv[6];
    if (std::abs(det) < 1e-15) throw NumericalError("singular homography");
    Homography out;
    for (int i = 0; i < 9; ++i) out.m[static_cast<std::size_t>(i)] = inv[static_cast<std::size_t>(i)] / det;
    return out;
}

// ------------------------------------------------------------ polygon tools

using Polygon = std::vector<Vec2>;

// clip against one half-plane keep(p) >= 0 along an axis
Polygon clip_axis(const Polygon& poly, int axis, double bound, bool keep_less) {
    Polygon out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& cur = poly[i];
        const Vec2& nxt = poly[(i + 1) % n];
        const double dc = keep_less ? bound - cur[static_cast<std::size_t>(axis)]
                                    : cur[static_cast<std::size_t>(axis)] - bound;
        const double dn = keep_less ? bound - nxt[static_cast<std::size_t>(axis)]
                                    : nxt[static_cast<std::size_t>(axis)] - bound;
        if (dc >= 0) out.push_back(cur);
        if ((dc >= 0) != (dn >= 0)) {
            const double t = dc / (dc - dn);
            out.push_back({cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])});
        }
    }
    return out;
}

Polygon clip_to_rect(Polygon poly, double x0, double y0, double x1, double y1) {
    poly = clip_axis(poly, 0, x0, false);
    poly = clip_axis(poly, 0, x1, true);
    poly = clip_axis(poly, 1, y0, false);
    poly = clip_axis(poly, 1, y1, true);
    return poly;
}

double polygon_area(const Polygon& poly) {
    double s = 0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        s += p[0] * q[1] - q[0] * p[1];
    }
    return std::abs(s) / 2;
}

Polygon densify(const Polygon& poly, int per_edge) {
    Polygon out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        for (int k = 0; k < per_edge; ++k) {
            const double t = static_cast<double>(k) / per_edge;
            out.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
        }
    }
    return out;
}

geometry::OverlapBox bounds_of(const Polygon& pts) {
    geometry::OverlapBox b{1e300, 1e300, -1e300, -1e300};
    for (const auto& p : pts) {
        b.x_min = std::min(b.x_min, p[0]);
        b.y_min = std::min(b.y_min, p[1]);
        b.x_max = std::max(b.x_max, p[0]);
        b.y_max = std::max(b.y_max, p[1]);
    }
    return b;
}

// ------------------------------------------------------------- rendering

Tensor<float> render_rect(const SynthConfig& cfg, std::uint64_t field_seed, const CropSpec& crop,
                          int out) {
    Tensor<float> img({3, static_cast<std::size_t>(out), static_cast<std::size_t>(out)});
    const double step = crop.extent / out;
    for (int c = 0; c < 3; ++c) {
        const std::uint64_t cs = mix64(field_seed, static_cast<std::uint64_t>(c) + 7);
        float* plane = img.data.data() + static_cast<std::size_t>(c) * out * out;
        for (int y = 0; y < out; ++y)
            for (int x = 0; x < out; ++x)
                plane[y * out + x] = static_cast<float>(
                    sample_noise(cfg, cs, crop.x0 + (x + 0.5) * step, crop.y0 + (y + 0.5) * step,
                                 step));
    }
    return img;
}

Tensor<float> render_quad(const SynthConfig& cfg, std::uint64_t field_seed, const Homography& px_to_canvas,
                          double footprint, int out) {
    Tensor<float> img({3, static_cast<std::size_t>(out), static_cast<std::size_t>(out)});
    for (int c = 0; c < 3; ++c) {
        const std::uint64_t cs = mix64(field_seed, static_cast<std::uint64_t>(c) + 7);
        float* plane = img.data.data() + static_cast<std::size_t>(c) * out * out;
        for (int y = 0; y < out; ++y)
            for (int x = 0; x < out; ++x) {
                const Vec2 p = px_to_canvas.apply(x + 0.5, y + 0.5);
                plane[y * out + x] =
                    static_cast<float>(sample_noise(cfg, cs, p[0], p[1], footprint));
            }
    }
    return img;
}

loss::OverlapTarget to_target(const geometry::OverlapBox& box_px, int out) {
    geometry::OverlapBox b = box_px.clamped(out, out);
    if (!b.valid()) throw NumericalError("degenerate synthetic target");
    const auto n = b.to_normalized(out, out);
    return loss::OverlapTarget{n[0], n[1], n[2], n[3]};
}

}  // namespace

// --------------------------------------------------------------- generation

TrainSample generate_pair(const SynthConfig& cfg, std::uint64_t index) {
    cfg.validate();
    const int S = cfg.output_size;
    // per-image overlap ratios are rigidly coupled (r_in = r_out * s^2), so
    // the feasible scale range is capped by the overlap range
    const double s_cap = std::sqrt(cfg.overlap_max / cfg.overlap_min);

    for (int attempt = 0; attempt < 64; ++attempt) {
        Rng rng(mix64(mix64(cfg.seed, index), static_cast<std::uint64_t>(attempt) + 1));
        const std::uint64_t field_seed = mix64(cfg.seed, mix64(index, 0xF1E1Dull));

        const double s_hi = std::min(cfg.scale_max, s_cap);
        if (s_hi < cfg.scale_min) break;  // whole range infeasible
        const double s = std::exp(rng.uniform(std::log(cfg.scale_min), std::log(s_hi)));

        const double e_in = static_cast<double>(cfg.canvas_size) / cfg.scale_max;  // zoomed-in extent
        const double e_out = e_in * s;
        // overlap ratio of the zoomed-in crop; the other crop sees r_in / s^2
        const double r_lo = std::max(cfg.overlap_min, cfg.overlap_min * s * s);
        const double r_in = rng.uniform(r_lo, cfg.overlap_max);
        const double inter_area = r_in * e_in * e_in;
        const double w_lo = inter_area / e_in;
        const double inter_w = std::exp(rng.uniform(std::log(w_lo), std::log(e_in)));
        const double inter_h = inter_area / inter_w;

        // relative placement: the zoomed-out crop sits left/right (top/bottom)
        // so the per-axis intersection is exactly inter_w x inter_h
        const double ox = rng.uniform(0, 1) < 0.5 ? inter_w - e_out : e_in - inter_w;
        const double oy = rng.uniform(0, 1) < 0.5 ? inter_h - e_out : e_in - inter_h;

        // absolute placement, joint extent centered in the canvas window
        const double min_x = std::min(0.0, ox), max_x = std::max(e_in, ox + e_out);
        const double min_y = std::min(0.0, oy), max_y = std::max(e_in, oy + e_out);
        const double base_x = (cfg.canvas_size - (max_x - min_x)) / 2 - min_x;
        const double base_y = (cfg.canvas_size - (max_y - min_y)) / 2 - min_y;

        CropSpec crop_in{base_x, base_y, e_in};
        CropSpec crop_out{base_x + ox, base_y + oy, e_out};
        const bool flip = rng.uniform(0, 1) < 0.5;  // which image gets the zoomed-in crop
        const CropSpec crop_a = flip ? crop_out : crop_in;
        const CropSpec crop_b = flip ? crop_in : crop_out;

        std::array<Vec2, 4> quad_b{Vec2{crop_b.x0, crop_b.y0},
                                   Vec2{crop_b.x0 + crop_b.extent, crop_b.y0},
                                   Vec2{crop_b.x0 + crop_b.extent, crop_b.y0 + crop_b.extent},
                                   Vec2{crop_b.x0, crop_b.y0 + crop_b.extent}};
        const bool jittered = cfg.jitter > 0;
        if (jittered)
            for (auto& c : quad_b) {
                c[0] += rng.uniform(-cfg.jitter, cfg.jitter) * crop_b.extent;
                c[1] += rng.uniform(-cfg.jitter, cfg.jitter) * crop_b.extent;
            }

        TrainSample sample;
        sample.index = index;
        sample.crop_a = crop_a;
        sample.crop_b = crop_b;
        sample.quad_b = quad_b;
        sample.scale_ratio = s;

        const double ax1 = crop_a.x0 + crop_a.extent, ay1 = crop_a.y0 + crop_a.extent;
        auto canvas_to_a = [&](const Vec2& p) {
            return Vec2{(p[0] - crop_a.x0) * S / crop_a.extent,
                        (p[1] - crop_a.y0) * S / crop_a.extent};
        };

        if (!jittered) {
            const double ix0 = std::max(crop_a.x0, crop_b.x0);
            const double iy0 = std::max(crop_a.y0, crop_b.y0);
            const double ix1 = std::min(ax1, crop_b.x0 + crop_b.extent);
            const double iy1 = std::min(ay1, crop_b.y0 + crop_b.extent);
            if (!(ix1 > ix0 && iy1 > iy0)) continue;
            const Vec2 a0 = canvas_to_a({ix0, iy0});
            const Vec2 a1 = canvas_to_a({ix1, iy1});
            auto canvas_to_b = [&](const Vec2& p) {
                return Vec2{(p[0] - crop_b.x0) * S / crop_b.extent,
                            (p[1] - crop_b.y0) * S / crop_b.extent};
            };
            const Vec2 b0 = canvas_to_b({ix0, iy0});
            const Vec2 b1 = canvas_to_b({ix1, iy1});
            sample.target_a = to_target({a0[0], a0[1], a1[0], a1[1]}, S);
            sample.target_b = to_target({b0[0], b0[1], b1[0], b1[1]}, S);
            sample.overlap_a = (ix1 - ix0) * (iy1 - iy0) / (crop_a.extent * crop_a.extent);
            sample.overlap_b = (ix1 - ix0) * (iy1 - iy0) / (crop_b.extent * crop_b.extent);
            sample.image_a = render_rect(cfg, field_seed, crop_a, S);
            sample.image_b = render_rect(cfg, field_seed, crop_b, S);
        } else {
            const std::array<Vec2, 4> px_corners{Vec2{0, 0}, Vec2{double(S), 0},
                                                 Vec2{double(S), double(S)}, Vec2{0, double(S)}};
            const Homography b_px_to_canvas = fit_homography(px_corners, quad_b);
            const Homography canvas_to_b_px = invert(b_px_to_canvas);
            Polygon covis = clip_to_rect({quad_b.begin(), quad_b.end()}, crop_a.x0, crop_a.y0,
                                         ax1, ay1);
            if (covis.size() < 3) continue;
            const Polygon dense = densify(covis, 16);
            Polygon in_a, in_b;
            for (const auto& p : dense) {
                in_a.push_back(canvas_to_a(p));
                in_b.push_back(canvas_to_b_px.apply(p[0], p[1]));
            }
            sample.target_a = to_target(bounds_of(in_a), S);
            sample.target_b = to_target(bounds_of(in_b), S);
            sample.overlap_a = polygon_area(covis) / (crop_a.extent * crop_a.extent);
            sample.overlap_b = polygon_area(in_b) / double(S * S);
            if (sample.overlap_a < cfg.overlap_min || sample.overlap_a > cfg.overlap_max ||
                sample.overlap_b < cfg.overlap_min || sample.overlap_b > cfg.overlap_max)
                continue;
            sample.image_a = render_rect(cfg, field_seed, crop_a, S);
            sample.image_b = render_quad(cfg, field_seed, b_px_to_canvas,
                                         crop_b.extent / S, S);
        }
        return sample;
    }
    throw NumericalError("generate_pair: overlap/scale ranges admit no sample (index " +
                         std::to_string(index) + ")");
}

PlanarScene to_camera_frames(const SynthConfig& cfg, const TrainSample& sample) {
    const std::array<Vec2, 4> rect{
        Vec2{sample.crop_b.x0, sample.crop_b.y0},
        Vec2{sample.crop_b.x0 + sample.crop_b.extent, sample.crop_b.y0},
        Vec2{sample.crop_b.x0 + sample.crop_b.extent, sample.crop_b.y0 + sample.crop_b.extent},
        Vec2{sample.crop_b.x0, sample.crop_b.y0 + sample.crop_b.extent}};
    for (int i = 0; i < 4; ++i)
        if (sample.quad_b[static_cast<std::size_t>(i)] != rect[static_cast<std::size_t>(i)])
            throw InvalidInput("to_camera_frames: requires a zero-jitter sample");

    const int S = cfg.output_size;
    auto make_frame = [&](const CropSpec& crop) {
        geometry::CameraFrame f;
        f.intrinsics = geometry::CameraIntrinsics{S / crop.extent, S / crop.extent, S / 2.0,
                                                  S / 2.0, S, S};
        f.depth = geometry::DepthMap::constant(S, S, 1.0);
        return f;
    };
    PlanarScene scene;
    scene.frame_a = make_frame(sample.crop_a);
    scene.frame_b = make_frame(sample.crop_b);
    // cameras hover above the crop centers at unit height; pure in-plane
    // translation between them
    const double cax = sample.crop_a.x0 + sample.crop_a.extent / 2;
    const double cay = sample.crop_a.y0 + sample.crop_a.extent / 2;
    const double cbx = sample.crop_b.x0 + sample.crop_b.extent / 2;
    const double cby = sample.crop_b.y0 + sample.crop_b.extent / 2;
    scene.pose.translation = {cbx - cax, cby - cay, 0.0};
    return scene;
}

geometry::MatchSet ground_truth_matches(const TrainSample& sample, int grid) {
    const double S = std::sqrt(static_cast<double>(sample.image_a.shape[1] *
                                                   sample.image_a.shape[2]));
    const double ix0 = std::max(sample.crop_a.x0, sample.crop_b.x0);
    const double iy0 = std::max(sample.crop_a.y0, sample.crop_b.y0);
    const double ix1 = std::min(sample.crop_a.x0 + sample.crop_a.extent,
                                sample.crop_b.x0 + sample.crop_b.extent);
    const double iy1 = std::min(sample.crop_a.y0 + sample.crop_a.extent,
                                sample.crop_b.y0 + sample.crop_b.extent);
    geometry::MatchSet out;
    if (!(ix1 > ix0 && iy1 > iy0)) return out;
    for (int gy = 0; gy < grid; ++gy)
        for (int gx = 0; gx < grid; ++gx) {
            const double u = ix0 + (gx + 0.5) * (ix1 - ix0) / grid;
            const double v = iy0 + (gy + 0.5) * (iy1 - iy0) / grid;
            const Vec2 pa{(u - sample.crop_a.x0) * S / sample.crop_a.extent,
                          (v - sample.crop_a.y0) * S / sample.crop_a.extent};
            const Vec2 pb{(u - sample.crop_b.x0) * S / sample.crop_b.extent,
                          (v - sample.crop_b.y0) * S / sample.crop_b.extent};
            out.matches.push_back({pa, pb, true});
        }
    return out;
}

geometry::OverlapBox target_box_px(const loss::OverlapTarget& t, double img_w, double img_h) {
    return geometry::OverlapBox::from_normalized(t.cxcywh(), img_w, img_h);
}

}  // namespace oetr::synth
