#pragma once
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "qdt/calibrate.hpp"
#include "qdt/detector.hpp"
#include "qdt/diagram.hpp"
#include "qdt/rng.hpp"
#include "qdt/synthgen.hpp"

namespace qdt {

struct TuningPriors {
    double prior_distance_v = 30e-3;
    double prior_slope_deg = 75.0;
    bool use_last_line_validation = false;
    double empty_confirmation_factor = 3.0;
    int max_steps = 2000;
};

TuningPriors priors_from_profile(const DatasetProfile& profile);

enum class Stage {
    find_first,
    slope_estimate,
    spacing_scan,
    missed_line_check,
    target_inference,
    done
};

enum class FailureReason { budget_exhausted, no_line_found, stuck };

std::string to_string(Stage s);
std::string to_string(FailureReason r);

struct StepRecord {
    PatchRect rect;
    Detection detection;
    ThreeClass outcome = ThreeClass::unknown;
    Stage stage = Stage::find_first;
};

struct TuningOutcome {
    Vec2 final_v = Vec2::Zero();
    bool success = false;
    RegionLabel final_region = RegionLabel::unknown;
    int steps = 0;
    std::optional<FailureReason> failure_reason;
    double slope_estimate_deg = 0.0;
    double avg_spacing_v = 0.0;
    std::vector<StepRecord> trace;
};

// The only channel through which the explorer sees the diagram. Ground truth
// stays behind the classifier (the oracle variants encapsulate it).
using PatchClassifier = std::function<Detection(const StabilityDiagram&, const PatchRect&)>;

PatchClassifier make_oracle_classifier(const DatasetProfile& profile);
PatchClassifier make_noisy_oracle_classifier(const DatasetProfile& profile, double error_rate,
                                             double low_conf_given_error, uint64_t seed);
PatchClassifier make_model_classifier(std::shared_ptr<const TrainedDetector> detector,
                                      uint64_t sampling_seed);

// Step geometry constants (patch-side units unless noted).
struct ExplorerTuning {
    double stage2_section_offset = 1.5;  // along the line, from the anchor
    int stage2_scan_half_width = 3;      // probes each side, half-patch pitch
    int stage4_sections = 3;             // M
    double stage4_section_spread = 2.5;  // along the line
    int stage4_max_rounds = 4;
    int validation_max_probes = 6;       // V_max
    int stage3_upward_crossings_cap = 4;
    bool uncertainty_based = true;       // false: thresholds ignored
};

TuningOutcome tune(const StabilityDiagram& diagram, const PatchClassifier& classify,
                   const ThresholdSet& thresholds, const TuningPriors& priors,
                   const DatasetProfile& profile, const Vec2& start_v,
                   const ExplorerTuning& tuning = {});

}  // namespace qdt
