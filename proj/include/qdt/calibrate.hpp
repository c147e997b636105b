#pragma once
#include <vector>

#include "qdt/detector.hpp"

namespace qdt {

enum class ThreeClass { line, no_line, unknown };

std::string to_string(ThreeClass v);

struct ThresholdSet {
    double t_line = 0.5;
    double t_noline = 0.5;
    double tau = 0.2;
};

// Eq. Err + UT * tau over nonnegative counts.
double threshold_score(long err_above, long under_total, double tau);

// Per-class grid search minimizing the threshold score on a validation set;
// ties break toward the smaller threshold, result clamped to >= 0.5.
ThresholdSet calibrate(const std::vector<std::pair<Detection, PatchCategory>>& detections,
                       double tau = 0.2, double grid_step = 0.001);

// Three-class verdict: unknown iff confidence < the predicted class threshold.
ThreeClass apply_threshold(const Detection& det, const ThresholdSet& t);

}  // namespace qdt
