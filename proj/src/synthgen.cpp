#include "qdt/synthgen.hpp"

#include <cmath>
#include <numbers>

#include "qdt/rng.hpp"

namespace qdt {

namespace {

constexpr double kPi = std::numbers::pi;
// Amplitude fraction below which a fading line is no longer labeled.
constexpr double kLabelCutoff = 0.25;

struct LineGeom {
    double s = 0.0;       // normal offset from the reference corner
    bool faded = false;
    double u_start = 1.0;  // fade ramp start, normalized along-line position
    double u_full = 1.0;   // position where amplitude reaches zero
};

double fade_envelope(const LineGeom& g, double u) {
    if (!g.faded || u <= g.u_start) return 1.0;
    if (u >= g.u_full) return 0.0;
    return 0.5 * (1.0 + std::cos(kPi * (u - g.u_start) / (g.u_full - g.u_start)));
}

// Along-line position where the envelope crosses the label cutoff.
double fade_u_cutoff(const LineGeom& g) {
    if (!g.faded) return 2.0;
    const double frac = std::acos(2.0 * kLabelCutoff - 1.0) / kPi;
    return g.u_start + frac * (g.u_full - g.u_start);
}

}  // namespace

Vec2 line_direction(double slope_deg) {
    const double rad = slope_deg * kPi / 180.0;
    return {std::cos(rad), std::sin(rad)};
}

Vec2 line_normal_toward_higher(double slope_deg) {
    const Vec2 d = line_direction(slope_deg);
    Vec2 n(d.y(), -d.x());
    if (std::abs(n.x()) > 1e-12 ? n.x() < 0.0 : n.y() < 0.0) n = -n;
    return n;
}

StabilityDiagram generate(const SynthConfig& cfg) {
    if (cfg.width < 54 || cfg.height < 54) throw Error("diagram must be at least 3 patches wide");
    if (!(cfg.spacing_v > 0.0)) throw Error("spacing_v must be > 0");
    if (cfg.empty_margin_v < 2.0 * cfg.spacing_v) {
        throw Error("empty_margin_v must be at least twice spacing_v");
    }

    const Vec2 dir = line_direction(cfg.slope_deg);
    const Vec2 nrm = line_normal_toward_higher(cfg.slope_deg);
    const BoxV box{cfg.origin_v,
                   cfg.origin_v + cfg.pixel_size_v * Vec2(cfg.width, cfg.height)};
    const Vec2 corners[4] = {box.lo, {box.hi.x(), box.lo.y()}, box.hi, {box.lo.x(), box.hi.y()}};

    // Reference corner = lowest-voltage corner along the charge axis.
    Vec2 ref = corners[0];
    for (const auto& cnr : corners) {
        if (cnr.dot(nrm) < ref.dot(nrm)) ref = cnr;
    }
    double s_max = 0.0, t_min = 0.0, t_max = 0.0;
    for (const auto& cnr : corners) {
        const Vec2 rel = cnr - ref;
        s_max = std::max(s_max, rel.dot(nrm));
        t_min = std::min(t_min, rel.dot(dir));
        t_max = std::max(t_max, rel.dot(dir));
    }
    const double t_span = t_max - t_min;

    Rng rng(mix_seed(cfg.seed));
    std::normal_distribution<double> jitter_dist(1.0, cfg.spacing_jitter);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // Line placement along the normal, jittered per gap.
    std::vector<LineGeom> geoms;
    double s = cfg.empty_margin_v;
    while (s <= s_max) {
        LineGeom g;
        g.s = s;
        if (unif(rng) < cfg.fade.probability) {
            g.faded = true;
            g.u_start = cfg.fade.start_frac;
            g.u_full = cfg.fade.full_frac;
        }
        geoms.push_back(g);
        double factor = cfg.spacing_jitter > 0.0 ? jitter_dist(rng) : 1.0;
        factor = std::clamp(factor, 0.6, 1.4);
        s += cfg.spacing_v * factor;
    }

    auto map_ts = [&](double t, double sv) -> Vec2 {
        return ref + dir * t + nrm * (sv + cfg.curvature * t * t);
    };

    // Current field: gradient + parasitic oscillation + Gaussian ridges + noise.
    const double sigma_v = cfg.line_width_px * cfg.pixel_size_v;
    const double osc_period_v = cfg.background_osc.period_px * cfg.pixel_size_v;
    const Vec2 osc_dir = line_direction(cfg.background_osc.angle_deg);
    Eigen::MatrixXf grid(cfg.height, cfg.width);
    std::normal_distribution<double> noise_dist(0.0, cfg.noise_std);
    for (int r = 0; r < cfg.height; ++r) {
        for (int c = 0; c < cfg.width; ++c) {
            const Vec2 q = cfg.origin_v + cfg.pixel_size_v * Vec2(c + 0.5, r + 0.5);
            const Vec2 rel = q - ref;
            const double t = rel.dot(dir);
            const double sq = rel.dot(nrm);
            const double u = (t - t_min) / t_span;
            double v = 0.1 * cfg.line_amplitude * (q - box.lo).sum() /
                       (box.hi - box.lo).sum();
            if (cfg.background_osc.amplitude > 0.0) {
                v += cfg.background_osc.amplitude * cfg.line_amplitude *
                     std::sin(2.0 * kPi * q.dot(osc_dir) / osc_period_v);
            }
            for (const auto& g : geoms) {
                const double ds = sq - (g.s + cfg.curvature * t * t);
                if (std::abs(ds) > 6.0 * sigma_v) continue;
                v += cfg.line_amplitude * fade_envelope(g, u) *
                     std::exp(-0.5 * ds * ds / (sigma_v * sigma_v));
            }
            if (cfg.row_shift_artifact && (r / 3) % 2 == 1) v += 0.05 * cfg.line_amplitude;
            if (cfg.noise_std > 0.0) v += noise_dist(rng);
            grid(r, c) = static_cast<float>(v);
        }
    }

    // Line labels follow the ridge crest, truncated where the fade drops
    // below the labeling cutoff.
    std::vector<LineLabel> lines;
    const double t_step = 2.0 * cfg.pixel_size_v;
    int visible = 0;
    for (size_t k = 0; k < geoms.size(); ++k) {
        const auto& g = geoms[k];
        const double u_cut = fade_u_cutoff(g);
        Polyline crest;
        for (double t = t_min; t <= t_max + 0.5 * t_step; t += t_step) {
            const double u = (t - t_min) / t_span;
            if (u > u_cut) break;
            crest.push_back(map_ts(t, g.s));
        }
        bool any = false;
        for (auto& piece : clip_polyline_to_box(crest, box)) {
            lines.push_back({std::move(piece), static_cast<int>(k) + 1});
            any = true;
        }
        if (any) ++visible;
    }
    if (visible < 3) throw Error("configuration cannot fit 3 visible transition lines");

    // Charge regions tile the bands between consecutive lines; the band
    // portion flanking a faded (unlabeled) line segment stays unlabeled.
    std::vector<ChargeRegion> regions;
    const double pad = s_max + t_span;
    const size_t n_lines = geoms.size();
    for (size_t j = 0; j <= std::min<size_t>(n_lines, 4); ++j) {
        const double s_lo = (j == 0) ? -pad : geoms[j - 1].s;
        const bool top = (j == n_lines) || (j == 4);
        const double s_hi = top ? s_max + pad : geoms[j].s;
        double u_cut = 2.0;
        if (j >= 1) u_cut = std::min(u_cut, fade_u_cutoff(geoms[j - 1]));
        if (j < n_lines && !top) u_cut = std::min(u_cut, fade_u_cutoff(geoms[j]));
        const double t_cut = t_min + std::min(u_cut, 1.0) * t_span;
        if (t_cut <= t_min) continue;

        Polygon poly;
        const int samples = cfg.curvature != 0.0
                                ? std::max(2, static_cast<int>((t_cut - t_min) / (4.0 * cfg.pixel_size_v)))
                                : 1;
        for (int i = 0; i <= samples; ++i) {
            poly.push_back(map_ts(t_min + (t_cut - t_min) * i / samples, s_lo));
        }
        for (int i = samples; i >= 0; --i) {
            poly.push_back(map_ts(t_min + (t_cut - t_min) * i / samples, s_hi));
        }
        poly = clip_polygon_to_box(poly, box);
        if (poly.size() < 3) continue;
        ChargeRegion region;
        region.polygon = std::move(poly);
        region.label = static_cast<RegionLabel>(std::min<size_t>(j, 4));
        regions.push_back(std::move(region));
    }

    std::string id = "synth-" + std::to_string(cfg.seed);
    return StabilityDiagram(std::move(grid), cfg.pixel_size_v, cfg.origin_v, std::move(lines),
                            std::move(regions), std::move(id));
}

SynthConfig make_profile(const std::string& name) {
    SynthConfig cfg;
    if (name == "si-sg") {
        cfg.pixel_size_v = 1e-3;
        cfg.width = cfg.height = 150;
        cfg.slope_deg = 75.0;
        cfg.spacing_v = 30e-3;
        cfg.empty_margin_v = 60e-3;
        cfg.spacing_jitter = 0.1;
        cfg.background_osc = {0.6, 15.0, -45.0};
        cfg.noise_std = 0.1;
    } else if (name == "gaas") {
        cfg.pixel_size_v = 2.5e-3;
        cfg.width = cfg.height = 100;
        cfg.slope_deg = 45.0;
        cfg.spacing_v = 16e-3;
        cfg.empty_margin_v = 32e-3;
        cfg.spacing_jitter = 0.15;
        cfg.curvature = 0.05;
        cfg.fade = {0.5, 0.4, 0.8};
        cfg.noise_std = 0.05;
    } else if (name == "si-og") {
        cfg.pixel_size_v = 2e-3;
        cfg.width = cfg.height = 150;
        cfg.slope_deg = -10.0;
        cfg.spacing_v = 30e-3;
        cfg.empty_margin_v = 60e-3;
        cfg.spacing_jitter = 0.1;
        cfg.fade = {0.3, 0.5, 0.9};
        cfg.noise_std = 0.15;
    } else {
        throw Error("unknown profile: \"" + name + "\"");
    }
    return cfg;
}

DatasetProfile dataset_profile(const std::string& name) {
    DatasetProfile p;
    p.name = name;
    if (name == "si-sg") {
        p.pixel_size_v = 1e-3;
        p.detection_offset_px = 6;
        p.prior_line_distance_v = 30e-3;
        p.prior_slope_deg = 75.0;
        p.use_last_line_validation = false;
    } else if (name == "gaas") {
        p.pixel_size_v = 2.5e-3;
        p.detection_offset_px = 7;
        p.prior_line_distance_v = 16e-3;
        p.prior_slope_deg = 45.0;
        p.use_last_line_validation = true;
    } else if (name == "si-og") {
        p.pixel_size_v = 2e-3;
        p.detection_offset_px = 6;
        p.prior_line_distance_v = 30e-3;
        p.prior_slope_deg = -10.0;
        p.use_last_line_validation = true;
    } else {
        throw Error("unknown profile: \"" + name + "\"");
    }
    return p;
}

}  // namespace qdt
