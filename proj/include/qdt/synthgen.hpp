#pragma once
#include <cstdint>
#include <string>

#include "qdt/diagram.hpp"

namespace qdt {

struct FadeConfig {
    double probability = 0.0;  // chance that a given line fades
    double start_frac = 0.4;   // fraction of line length where decay begins
    double full_frac = 0.8;    // fraction where amplitude reaches zero
};

struct BackgroundOsc {
    double amplitude = 0.0;  // relative to line_amplitude
    double period_px = 12.0;
    double angle_deg = 45.0;
};

struct SynthConfig {
    int width = 150;
    int height = 150;
    double pixel_size_v = 1e-3;
    Vec2 origin_v = Vec2(0.3, 0.3);
    double slope_deg = 75.0;       // 0 = horizontal, 90 = vertical
    double spacing_v = 30e-3;      // mean inter-line distance along the normal
    double spacing_jitter = 0.0;   // relative std, truncated at +/-40%
    double line_amplitude = 1.0;
    double line_width_px = 1.2;    // Gaussian sigma of the ridge, in pixels
    double curvature = 0.0;        // normal offset per (along-line distance)^2, 1/V
    FadeConfig fade;
    BackgroundOsc background_osc;
    double noise_std = 0.0;
    double empty_margin_v = 60e-3;  // line-free band from the low-voltage corner
    bool row_shift_artifact = false;
    uint64_t seed = 0;
};

// Deterministic synthetic diagram with exact line and region ground truth.
StabilityDiagram generate(const SynthConfig& cfg);

// Presets mirroring the three dataset families: "si-sg", "gaas", "si-og".
SynthConfig make_profile(const std::string& name);

// Matching per-dataset priors/extraction parameters for the same names.
DatasetProfile dataset_profile(const std::string& name);

// Unit direction along the transition lines for a given slope.
Vec2 line_direction(double slope_deg);

// Unit normal oriented toward higher voltages (increasing charge count).
Vec2 line_normal_toward_higher(double slope_deg);

}  // namespace qdt
