#include "qdt/calibrate.hpp"

#include <cmath>

namespace qdt {

std::string to_string(ThreeClass v) {
    switch (v) {
        case ThreeClass::line: return "line";
        case ThreeClass::no_line: return "no-line";
        case ThreeClass::unknown: return "unknown";
    }
    throw Error("bad three-class value");
}

double threshold_score(long err_above, long under_total, double tau) {
    if (err_above < 0 || under_total < 0 || tau < 0.0) {
        throw Error("threshold_score inputs must be nonnegative");
    }
    return static_cast<double>(err_above) + static_cast<double>(under_total) * tau;
}

ThresholdSet calibrate(const std::vector<std::pair<Detection, PatchCategory>>& detections,
                       double tau, double grid_step) {
    if (detections.empty()) throw Error("calibrate: empty detection set");
    ThresholdSet result;
    result.tau = tau;
    for (const PatchCategory cls : {PatchCategory::line, PatchCategory::no_line}) {
        // Only items the model predicted in this class participate.
        std::vector<std::pair<double, bool>> items;  // (confidence, correct)
        for (const auto& [det, truth] : detections) {
            if (det.category == cls) items.emplace_back(det.confidence, det.category == truth);
        }
        double best_t = 0.0;
        double best_score = std::numeric_limits<double>::infinity();
        const int steps = static_cast<int>(std::llround(1.0 / grid_step));
        for (int i = 0; i <= steps; ++i) {
            const double t = i * grid_step;
            long err = 0, under = 0;
            for (const auto& [conf, correct] : items) {
                if (conf < t) {
                    ++under;
                } else if (!correct) {
                    ++err;
                }
            }
            const double score = threshold_score(err, under, tau);
            if (score < best_score) {
                best_score = score;
                best_t = t;
            }
        }
        const double t = std::max(0.5, best_t);
        (cls == PatchCategory::line ? result.t_line : result.t_noline) = t;
    }
    return result;
}

ThreeClass apply_threshold(const Detection& det, const ThresholdSet& t) {
    const double threshold =
        det.category == PatchCategory::line ? t.t_line : t.t_noline;
    if (det.confidence < threshold) return ThreeClass::unknown;
    return det.category == PatchCategory::line ? ThreeClass::line : ThreeClass::no_line;
}

}  // namespace qdt
