// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include "toktrack/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "toktrack/errors.hpp"
#include "toktrack/rng.hpp"

namespace fs = std::filesystem;

namespace toktrack {

void Sequence::validate() const {
    if (frames.size() != boxes.size() || frames.size() != visibility.size())
        throw FormatError("sequence '" + name + "': frame/box/visibility counts differ");
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (!boxes[i].is_canonical()) throw FormatError("sequence '" + name + "': non-canonical box");
        if (visibility[i] > 0.0 && boxes[i].area() <= 0.0)
            throw FormatError("sequence '" + name + "': visible frame with empty box");
        if (visibility[i] < 0.0 || visibility[i] > 1.0)
            throw FormatError("sequence '" + name + "': visibility outside [0,1]");
    }
}

std::string target_kind_name(TargetKind k) {
    switch (k) {
    case TargetKind::RECT: return "RECT";
    case TargetKind::ELLIPSE: return "ELLIPSE";
    }
    throw ConfigError("target_kind_name: unknown kind");
}

TargetKind target_kind_from_name(const std::string& name) {
    if (name == "RECT") return TargetKind::RECT;
    if (name == "ELLIPSE") return TargetKind::ELLIPSE;
    throw ConfigError("unknown target kind '" + name + "'");
}

void SyntheticConfig::validate() const {
    if (canvas_h < 8 || canvas_w < 8) throw ConfigError("canvas too small");
    if (min_size <= 0 || max_size < min_size) throw ConfigError("bad target size range");
    if (max_size > std::min(canvas_h, canvas_w)) throw ConfigError("target size exceeds canvas");
    if (occluder_coverage < 0.0 || occluder_coverage > 1.0) throw ConfigError("occluder coverage outside [0,1]");
    if (length < 1) throw ConfigError("length must be >= 1");
    if (distractors < 0 || noise_sigma < 0 || accel_sigma < 0 || max_speed < 0 || drift_rate < 0)
        throw ConfigError("negative synthetic parameter");
}

namespace {

// All rendered geometry is snapped to 1/256 px: dyadic coordinates make the
// x,y,w,h <-> corners text conversions exact.
double snap(double v) { return std::round(v * 256.0) / 256.0; }

struct Body {
    double cx, cy, vx, vy, w, h;
    std::array<double, 3> color_a, color_b;
    TargetKind kind;
};

Box body_box(const Body& b, double cx, double cy) {
    return Box{snap(cx - 0.5 * b.w), snap(cy - 0.5 * b.h), snap(cx + 0.5 * b.w), snap(cy + 0.5 * b.h)};
}

void draw_body(Image& img, const Body& b, const Box& box) {
    const double rx = 0.5 * (box.x_max - box.x_min), ry = 0.5 * (box.y_max - box.y_min);
    const double cx = box.center_x(), cy = box.center_y();
    const int y0 = std::max(0, static_cast<int>(std::floor(box.y_min)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(box.y_max)));
    const int x0 = std::max(0, static_cast<int>(std::floor(box.x_min)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(box.x_max)));
    for (int y = y0; y <= y1; ++y) {
        const double py = y + 0.5;
        if (py < box.y_min || py > box.y_max) continue;
        for (int x = x0; x <= x1; ++x) {
            const double px = x + 0.5;
            if (px < box.x_min || px > box.x_max) continue;
            if (b.kind == TargetKind::ELLIPSE) {
                const double nx = (px - cx) / std::max(rx, 1e-9), ny = (py - cy) / std::max(ry, 1e-9);
                if (nx * nx + ny * ny > 1.0) continue;
            }
            const double u = (px - box.x_min) / std::max(box.x_max - box.x_min, 1e-9);
            const double v = (py - box.y_min) / std::max(box.y_max - box.y_min, 1e-9);
            const bool alt = (static_cast<int>(u * 4) + static_cast<int>(v * 4)) % 2 == 1;
            const auto& col = alt ? b.color_b : b.color_a;
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = col[c];
        }
    }
}

void draw_rect(Image& img, const Box& r, const std::array<double, 3>& col) {
    const int y0 = std::max(0, static_cast<int>(std::floor(r.y_min)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(r.y_max)));
    const int x0 = std::max(0, static_cast<int>(std::floor(r.x_min)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(r.x_max)));
    for (int y = y0; y <= y1; ++y) {
        const double py = y + 0.5;
        if (py < r.y_min || py > r.y_max) continue;
        for (int x = x0; x <= x1; ++x) {
            const double px = x + 0.5;
            if (px < r.x_min || px > r.x_max) continue;
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = col[c];
        }
    }
}

// Reflects position/velocity so the body's box stays inside [lo_x,hi_x]x[lo_y,hi_y].
void bounce(Body& b, double lo_x, double hi_x, double lo_y, double hi_y) {
    const double half_w = 0.5 * b.w, half_h = 0.5 * b.h;
    if (b.cx - half_w < lo_x) {
        b.cx = lo_x + half_w + (lo_x + half_w - b.cx);
        b.vx = std::fabs(b.vx);
    } else if (b.cx + half_w > hi_x) {
        b.cx = hi_x - half_w - (b.cx - (hi_x - half_w));
        b.vx = -std::fabs(b.vx);
    }
    if (b.cy - half_h < lo_y) {
        b.cy = lo_y + half_h + (lo_y + half_h - b.cy);
        b.vy = std::fabs(b.vy);
    } else if (b.cy + half_h > hi_y) {
        b.cy = hi_y - half_h - (b.cy - (hi_y - half_h));
        b.vy = -std::fabs(b.vy);
    }
    b.cx = std::min(std::max(b.cx, lo_x + half_w), hi_x - half_w);
    b.cy = std::min(std::max(b.cy, lo_y + half_h), hi_y - half_h);
}

double rect_intersection_area(const Box& a, const Box& b) {
    const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    return (iw > 0 && ih > 0) ? iw * ih : 0.0;
}

std::array<double, 3> drift_hue(const std::array<double, 3>& c, double rate) {
    return {(1 - rate) * c[0] + rate * c[1], (1 - rate) * c[1] + rate * c[2], (1 - rate) * c[2] + rate * c[0]};
}

Body random_body(Rng& rng, const SyntheticConfig& cfg) {
    Body b;
    b.w = snap(rng.uniform(cfg.min_size, cfg.max_size));
    b.h = snap(rng.uniform(cfg.min_size, cfg.max_size));
    b.cx = rng.uniform(0.5 * b.w + 2.0, cfg.canvas_w - 0.5 * b.w - 2.0);
    b.cy = rng.uniform(0.5 * b.h + 2.0, cfg.canvas_h - 0.5 * b.h - 2.0);
    b.vx = rng.uniform(-cfg.max_speed, cfg.max_speed);
    b.vy = rng.uniform(-cfg.max_speed, cfg.max_speed);
    for (int c = 0; c < 3; ++c) {
        b.color_a[c] = rng.uniform(0.1, 1.0);
        b.color_b[c] = rng.uniform(0.1, 1.0);
    }
    b.kind = cfg.kind;
    return b;
}

// Frame-by-frame center positions plus per-frame union-of-substeps boxes.
struct Trajectory {
    std::vector<Box> boxes;          // length frames
    std::vector<std::array<double, 2>> centers;
    std::vector<std::array<double, 4>> substep_centers_x; // per frame, 4 substeps
    std::vector<std::array<double, 4>> substep_centers_y;
    std::vector<std::array<double, 2>> sizes; // w,h per frame (scale drift)
};

Trajectory simulate(Body b, const SyntheticConfig& cfg, Rng& rng, bool blur) {
    Trajectory tr;
    const double margin = cfg.allow_out_of_view ? 0.5 * std::min(cfg.canvas_h, cfg.canvas_w) : 0.0;
    const double lo_x = -margin, hi_x = cfg.canvas_w + margin;
    const double lo_y = -margin, hi_y = cfg.canvas_h + margin;
    const double scale_growth = 1.0 + rng.uniform(-cfg.drift_rate, cfg.drift_rate);
    for (int t = 0; t < cfg.length; ++t) {
        std::array<double, 4> sx{}, sy{};
        Box frame_box{1e30, 1e30, -1e30, -1e30};
        const int substeps = blur ? 4 : 1;
        for (int s = 0; s < substeps; ++s) {
            const double f = blur ? s / 4.0 : 0.0;
            const double cx = b.cx + b.vx * f, cy = b.cy + b.vy * f;
            sx[s] = cx;
            sy[s] = cy;
            const Box sb = body_box(b, cx, cy);
            frame_box.x_min = std::min(frame_box.x_min, sb.x_min);
            frame_box.y_min = std::min(frame_box.y_min, sb.y_min);
            frame_box.x_max = std::max(frame_box.x_max, sb.x_max);
            frame_box.y_max = std::max(frame_box.y_max, sb.y_max);
        }
        for (int s = substeps; s < 4; ++s) {
            sx[s] = sx[0];
            sy[s] = sy[0];
        }
        tr.boxes.push_back(frame_box);
        tr.centers.push_back({b.cx, b.cy});
        tr.substep_centers_x.push_back(sx);
        tr.substep_centers_y.push_back(sy);
        tr.sizes.push_back({b.w, b.h});
        // Advance to the next frame.
        b.cx += b.vx;
        b.cy += b.vy;
        b.vx += rng.normal(0.0, cfg.accel_sigma);
        b.vy += rng.normal(0.0, cfg.accel_sigma);
        bounce(b, lo_x, hi_x, lo_y, hi_y);
        b.w = std::min(std::max(snap(b.w * scale_growth), 2.0), std::min(cfg.canvas_h, cfg.canvas_w) / 3.0);
        b.h = std::min(std::max(snap(b.h * scale_growth), 2.0), std::min(cfg.canvas_h, cfg.canvas_w) / 3.0);
    }
    return tr;
}

} // namespace

Sequence generate_sequence(const SyntheticConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    Sequence seq;
    {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "seq_%08llu", static_cast<unsigned long long>(seed));
        seq.name = buf;
    }

    // Static background: base color, three texture rectangles.
    std::array<double, 3> bg{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
    Image background(cfg.canvas_h, cfg.canvas_w, bg);
    for (int r = 0; r < 3; ++r) {
        const double x = rng.uniform(0, cfg.canvas_w), y = rng.uniform(0, cfg.canvas_h);
        Box rect{x, y, x + rng.uniform(4, cfg.canvas_w / 2.0), y + rng.uniform(4, cfg.canvas_h / 2.0)};
        draw_rect(background, rect, {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)});
    }

    Body target = random_body(rng, cfg);
    Trajectory target_tr = simulate(target, cfg, rng, /*blur=*/true);

    // Distractors: near-identical bodies whose boxes never overlap the
    // target's ground truth by IoU > 0.3 (keeps the annotation unambiguous).
    std::vector<Body> dis_bodies;
    std::vector<Trajectory> dis_trs;
    for (int d = 0; d < cfg.distractors; ++d) {
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            Body b = random_body(rng, cfg);
            for (int c = 0; c < 3; ++c) {
                b.color_a[c] = std::min(1.0, std::max(0.0, target.color_a[c] + rng.uniform(-0.1, 0.1)));
                b.color_b[c] = std::min(1.0, std::max(0.0, target.color_b[c] + rng.uniform(-0.1, 0.1)));
            }
            Trajectory tr = simulate(b, cfg, rng, /*blur=*/false);
            bool ok = true;
            for (int t = 0; t < cfg.length && ok; ++t) ok = iou(tr.boxes[t], target_tr.boxes[t]) <= 0.3;
            if (ok) {
                dis_bodies.push_back(b);
                dis_trs.push_back(std::move(tr));
                placed = true;
            }
        }
    }

    const std::array<double, 3> occ_color{rng.uniform(0.0, 0.3), rng.uniform(0.0, 0.3), rng.uniform(0.0, 0.3)};
    const Box canvas_box{0, 0, static_cast<double>(cfg.canvas_w), static_cast<double>(cfg.canvas_h)};

    std::array<double, 3> tcol_a = target.color_a, tcol_b = target.color_b;
    for (int t = 0; t < cfg.length; ++t) {
        Image base = background;
        for (std::size_t d = 0; d < dis_trs.size(); ++d) {
            Body db = dis_bodies[d];
            draw_body(base, db, dis_trs[d].boxes[t]);
        }

        // Motion blur: average 4 renders of the target along its path.
        Image frame(cfg.canvas_h, cfg.canvas_w);
        Body tb = target;
        tb.color_a = tcol_a;
        tb.color_b = tcol_b;
        tb.w = target_tr.sizes[t][0];
        tb.h = target_tr.sizes[t][1];
        for (int s = 0; s < 4; ++s) {
            Image pass = base;
            const Box sb = body_box(tb, target_tr.substep_centers_x[t][s], target_tr.substep_centers_y[t][s]);
            draw_body(pass, tb, sb);
            for (std::size_t i = 0; i < frame.pixels.size(); ++i) frame.pixels[i] += pass.pixels[i] * 0.25;
        }

        // Occluder: opaque rectangle over a fixed fraction of the target box.
        const Box& gt = target_tr.boxes[t];
        Box occ{0, 0, 0, 0};
        bool occluded = cfg.occluder_start >= 0 && t >= cfg.occluder_start &&
                        t < cfg.occluder_start + cfg.occluder_duration;
        if (occluded) {
            occ = Box{gt.x_min, snap(gt.y_min - 2.0), snap(gt.x_min + cfg.occluder_coverage * gt.width()),
                      snap(gt.y_max + 2.0)};
            draw_rect(frame, occ, occ_color);
        }

        for (double& v : frame.pixels) v += rng.normal(0.0, cfg.noise_sigma);
        frame.quantize_u8();

        const double box_area = gt.area();
        double vis = 0.0;
        if (box_area > 0) {
            const double in_canvas = rect_intersection_area(gt, canvas_box);
            double covered = 0.0;
            if (occluded) {
                const Box vis_part{std::max(gt.x_min, 0.0), std::max(gt.y_min, 0.0),
                                   std::min(gt.x_max, canvas_box.x_max), std::min(gt.y_max, canvas_box.y_max)};
                if (vis_part.x_max > vis_part.x_min && vis_part.y_max > vis_part.y_min)
                    covered = rect_intersection_area(vis_part, occ);
            }
            vis = std::max(0.0, (in_canvas - covered) / box_area);
        }

        seq.frames.push_back(std::move(frame));
        seq.boxes.push_back(gt);
        seq.visibility.push_back(vis);

        tcol_a = drift_hue(tcol_a, cfg.drift_rate);
        tcol_b = drift_hue(tcol_b, cfg.drift_rate);
    }
    seq.validate();
    return seq;
}

Sequence load_sequence(const std::string& dir) {
    const fs::path root(dir);
    if (!fs::exists(root / "groundtruth.txt")) throw InputError("'" + dir + "': no groundtruth.txt");
    Sequence seq;
    seq.name = root.filename().string();
    {
        std::ifstream gt(root / "groundtruth.txt");
        std::string line;
        while (std::getline(gt, line)) {
            if (line.empty()) continue;
            seq.boxes.push_back(box_from_xywh_text(line));
        }
    }
    if (fs::exists(root / "visibility.txt")) {
        std::ifstream vf(root / "visibility.txt");
        std::string line;
        while (std::getline(vf, line)) {
            if (line.empty()) continue;
            seq.visibility.push_back(std::stod(line));
        }
        if (seq.visibility.size() != seq.boxes.size())
            throw FormatError("'" + dir + "': visibility/groundtruth line counts differ");
    } else {
        seq.visibility.assign(seq.boxes.size(), 1.0);
    }
    for (std::size_t i = 0; i < seq.boxes.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%06zu.ppm", i);
        const fs::path frame_path = root / "frames" / buf;
        if (!fs::exists(frame_path))
            throw FormatError("'" + dir + "': missing frame " + std::string(buf) + " for annotated line " +
                              std::to_string(i));
        seq.frames.push_back(load_ppm(frame_path.string()));
    }
    // Extra frames beyond the annotations are a count mismatch, not padding.
    {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%06zu.ppm", seq.boxes.size());
        if (fs::exists(root / "frames" / buf))
            throw FormatError("'" + dir + "': more frames than annotation lines");
    }
    seq.validate();
    return seq;
}

void save_sequence(const Sequence& seq, const std::string& dir) {
    seq.validate();
    const fs::path root(dir);
    fs::create_directories(root / "frames");
    {
        std::ofstream gt(root / "groundtruth.txt");
        for (const Box& b : seq.boxes) gt << box_to_xywh_text(b) << "\n";
    }
    {
        std::ofstream vf(root / "visibility.txt");
        char buf[64];
        for (double v : seq.visibility) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            vf << buf << "\n";
        }
    }
    {
        std::ofstream meta(root / "meta.txt");
        meta << "name = " << seq.name << "\n";
        meta << "length = " << seq.size() << "\n";
        if (seq.size() > 0) meta << "canvas = " << seq.frames[0].height << "x" << seq.frames[0].width << "\n";
    }
    for (int i = 0; i < seq.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%06d.ppm", i);
        save_ppm(seq.frames[i], (root / "frames" / buf).string());
    }
}

std::vector<std::string> list_sequences(const std::string& root) {
    if (!fs::is_directory(root)) throw InputError("'" + root + "' is not a directory");
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "groundtruth.txt"))
            names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

} // namespace toktrack
