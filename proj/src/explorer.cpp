#include "qdt/explorer.hpp"

#include <cmath>

namespace qdt {

namespace {
constexpr double kDeg = 180.0 / 3.14159265358979323846;
}

TuningPriors priors_from_profile(const DatasetProfile& profile) {
    TuningPriors p;
    p.prior_distance_v = profile.prior_line_distance_v;
    p.prior_slope_deg = profile.prior_slope_deg;
    p.use_last_line_validation = profile.use_last_line_validation;
    return p;
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::find_first: return "find_first";
        case Stage::slope_estimate: return "slope_estimate";
        case Stage::spacing_scan: return "spacing_scan";
        case Stage::missed_line_check: return "missed_line_check";
        case Stage::target_inference: return "target_inference";
        case Stage::done: return "done";
    }
    throw Error("bad stage");
}

std::string to_string(FailureReason r) {
    switch (r) {
        case FailureReason::budget_exhausted: return "budget_exhausted";
        case FailureReason::no_line_found: return "no_line_found";
        case FailureReason::stuck: return "stuck";
    }
    throw Error("bad failure reason");
}

PatchClassifier make_oracle_classifier(const DatasetProfile& profile) {
    return [profile](const StabilityDiagram& d, const PatchRect& rect) {
        return oracle_infer(d, rect, profile);
    };
}

PatchClassifier make_noisy_oracle_classifier(const DatasetProfile& profile, double error_rate,
                                             double low_conf_given_error, uint64_t seed) {
    auto rng = std::make_shared<Rng>(mix_seed(seed));
    return [=](const StabilityDiagram& d, const PatchRect& rect) {
        return noisy_oracle_infer(d, rect, profile, error_rate, low_conf_given_error, *rng);
    };
}

PatchClassifier make_model_classifier(std::shared_ptr<const TrainedDetector> detector,
                                      uint64_t sampling_seed) {
    auto counter = std::make_shared<uint64_t>(0);
    return [=](const StabilityDiagram& d, const PatchRect& rect) {
        const Eigen::MatrixXf patch = normalize_patch(d.patch_values(rect));
        return detector->infer(patch, derive_seed(sampling_seed, (*counter)++));
    };
}

namespace {

struct BudgetExhausted {};

struct Crossing {
    Vec2 pos;      // pixel coordinates
    double s;      // offset along the charge normal, anchor = 0
    bool trusted;  // decided by a confident verdict
};

// One tuning episode; all geometry in continuous pixel coordinates
// (voltage = origin + pos * pixel_size; isotropic).
class Episode {
public:
    Episode(const StabilityDiagram& d, const PatchClassifier& classify,
            const ThresholdSet& thresholds, const TuningPriors& priors,
            const DatasetProfile& profile, const ExplorerTuning& tuning)
        : d_(d),
          classify_(classify),
          thresholds_(thresholds),
          priors_(priors),
          tuning_(tuning),
          patch_(profile.patch_size_px),
          stride_(std::max(2, profile.patch_size_px - 2 * profile.detection_offset_px)),
          march_stride_(std::max(2, stride_ / 2)),
          prior_spacing_px_(priors.prior_distance_v / d.pixel_size_v()) {}

    TuningOutcome run(const Vec2& start_v) {
        const Vec2 start = (start_v - d_.origin_v()) / d_.pixel_size_v();
        TuningOutcome out;
        try {
            dir_ = line_direction(priors_.prior_slope_deg);
            nrm_ = line_normal_toward_higher(priors_.prior_slope_deg);
            slope_deg_ = priors_.prior_slope_deg;

            const auto anchor = stage1_find_first(start);
            if (!anchor) {
                return finish(out, start, std::nullopt);
            }
            anchor_ = *anchor;
            stage_ = Stage::slope_estimate;
            stage2_estimate_slope();
            stage_ = Stage::spacing_scan;
            crossings_.push_back({anchor_, 0.0, true});
            march(anchor_, -1.0, -1);
            march(anchor_, +1.0, tuning_.stage3_upward_crossings_cap);
            if (priors_.use_last_line_validation) {
                stage_ = Stage::missed_line_check;
                stage4_missed_line_check();
            }
            stage_ = Stage::target_inference;
            return finish(out, start, leftmost().pos + nrm_ * (0.5 * avg_spacing_px()));
        } catch (const BudgetExhausted&) {
            std::optional<Vec2> target;
            if (!crossings_.empty()) target = leftmost().pos + nrm_ * (0.5 * avg_spacing_px());
            TuningOutcome res = finish(out, start, target);
            if (!res.success) res.failure_reason = FailureReason::budget_exhausted;
            return res;
        }
    }

private:
    TuningOutcome finish(TuningOutcome& out, const Vec2& start_px,
                         const std::optional<Vec2>& target_px) {
        const Vec2 pos = target_px.value_or(start_px);
        const BoxV box = d_.bounds_v();
        out.final_v = box.clamp(d_.origin_v() + pos * d_.pixel_size_v());
        out.final_region = region_at(d_, out.final_v);
        out.success = out.final_region == RegionLabel::one;
        if (!out.success && !target_px && !out.failure_reason) {
            out.failure_reason = FailureReason::no_line_found;
        }
        out.steps = steps_;
        out.slope_estimate_deg = slope_deg_;
        out.avg_spacing_v = avg_spacing_px() * d_.pixel_size_v();
        out.trace = std::move(trace_);
        return std::move(out);
    }

    bool center_in_bounds(const Vec2& c) const {
        const int x = static_cast<int>(std::lround(c.x() - patch_ / 2.0));
        const int y = static_cast<int>(std::lround(c.y() - patch_ / 2.0));
        return x >= 0 && y >= 0 && x + patch_ <= d_.width() && y + patch_ <= d_.height();
    }

    PatchRect rect_at(const Vec2& c) const {
        int x = static_cast<int>(std::lround(c.x() - patch_ / 2.0));
        int y = static_cast<int>(std::lround(c.y() - patch_ / 2.0));
        x = std::clamp(x, 0, d_.width() - patch_);
        y = std::clamp(y, 0, d_.height() - patch_);
        return {x, y, patch_};
    }

    static Vec2 center_of(const PatchRect& r) {
        return {r.x + r.side / 2.0, r.y + r.side / 2.0};
    }

    std::pair<Detection, ThreeClass> measure(const Vec2& c) {
        const PatchRect rect = rect_at(c);
        const auto key = std::make_pair(rect.x, rect.y);
        if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
        if (steps_ >= priors_.max_steps) throw BudgetExhausted{};
        ++steps_;
        const Detection det = classify_(d_, rect);
        ThreeClass outcome;
        if (tuning_.uncertainty_based) {
            outcome = apply_threshold(det, thresholds_);
        } else {
            outcome = det.category == PatchCategory::line ? ThreeClass::line
                                                          : ThreeClass::no_line;
        }
        trace_.push_back({rect, det, outcome, stage_});
        const auto result = std::make_pair(det, outcome);
        cache_.emplace(key, result);
        return result;
    }

    // Verdict with the low-confidence validation procedure: extra probes along
    // the supposed line direction until one is confident.
    struct Verdict {
        PatchCategory category;
        bool trusted;
    };

    Verdict probe(const Vec2& c) {
        const auto [det, outcome] = measure(c);
        if (outcome != ThreeClass::unknown) {
            return {outcome == ThreeClass::line ? PatchCategory::line : PatchCategory::no_line,
                    true};
        }
        int placed = 0;
        for (int k = 1; placed < tuning_.validation_max_probes && k <= tuning_.validation_max_probes;
             ++k) {
            for (const double sign : {+1.0, -1.0}) {
                if (placed >= tuning_.validation_max_probes) break;
                const Vec2 vc = c + dir_ * (sign * k * patch_);
                if (!center_in_bounds(vc)) continue;
                ++placed;
                const auto [vdet, voutcome] = measure(vc);
                if (voutcome != ThreeClass::unknown) {
                    return {voutcome == ThreeClass::line ? PatchCategory::line
                                                         : PatchCategory::no_line,
                            true};
                }
            }
        }
        return {det.category, false};  // low-trust fallback
    }

    std::optional<Vec2> stage1_find_first(const Vec2& start) {
        const auto hit = [&](const Vec2& c) -> std::optional<Vec2> {
            const Verdict v = probe(c);
            if (v.category == PatchCategory::line) return center_of(rect_at(c));
            return std::nullopt;
        };
        const Vec2 lo(patch_ / 2.0, patch_ / 2.0);
        const Vec2 hi(d_.width() - patch_ / 2.0, d_.height() - patch_ / 2.0);
        const auto clamp_center = [&](const Vec2& c) {
            return Vec2(std::clamp(c.x(), lo.x(), hi.x()), std::clamp(c.y(), lo.y(), hi.y()));
        };
        if (auto a = hit(clamp_center(start))) return a;
        const Vec2 dirs[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        const auto sweep = [&](double offset) -> std::optional<Vec2> {
            bool alive[4] = {true, true, true, true};
            const int k_max = std::max(d_.width(), d_.height()) / patch_ + 2;
            for (int k = 1; k <= k_max; ++k) {
                bool any = false;
                for (int di = 0; di < 4; ++di) {
                    if (!alive[di]) continue;
                    const Vec2 c = start + dirs[di] * (k * patch_ - offset);
                    // A direction is exhausted once its sweep axis leaves the
                    // valid-center band; the off-axis coordinate is clamped in.
                    const bool horizontal = dirs[di].x() != 0.0;
                    const double coord = horizontal ? c.x() : c.y();
                    const double axis_lo = horizontal ? lo.x() : lo.y();
                    const double axis_hi = horizontal ? hi.x() : hi.y();
                    if (coord < axis_lo - patch_ || coord > axis_hi + patch_) {
                        alive[di] = false;
                        continue;
                    }
                    any = true;
                    if (auto a = hit(clamp_center(c))) return a;
                }
                if (!any) break;
            }
            return std::nullopt;
        };
        if (auto a = sweep(0.0)) return a;
        // A line thinner than the patch can slip between detection squares of
        // the patch-pitch sweep; rescue passes shift the grid to close the
        // gaps before concluding there is no line at all.
        for (int off = stride_; off < patch_; off += stride_) {
            if (auto a = sweep(off)) return a;
        }
        return std::nullopt;
    }

    void stage2_estimate_slope() {
        const Vec2 d0 = line_direction(priors_.prior_slope_deg);
        const Vec2 n0 = line_normal_toward_higher(priors_.prior_slope_deg);
        std::optional<Vec2> crossings[2];
        int idx = 0;
        for (const double sign : {-1.0, +1.0}) {
            const Vec2 sec = anchor_ + d0 * (sign * tuning_.stage2_section_offset * patch_);
            for (int j = 0; j <= tuning_.stage2_scan_half_width && !crossings[idx]; ++j) {
                for (const double js : {+1.0, -1.0}) {
                    if (j == 0 && js < 0) continue;
                    const Vec2 c = sec + n0 * (js * j * patch_ / 2.0);
                    if (!center_in_bounds(c)) continue;
                    const auto [det, outcome] = measure(c);
                    if (outcome == ThreeClass::line) {
                        crossings[idx] = center_of(rect_at(c));
                        break;
                    }
                }
            }
            ++idx;
        }
        slope_deg_ = priors_.prior_slope_deg;
        if (crossings[0] && crossings[1] && (*crossings[1] - *crossings[0]).norm() > 1e-9) {
            const Vec2 seg = *crossings[1] - *crossings[0];
            double ang = std::atan2(seg.y(), seg.x()) * kDeg;
            if (ang > 90.0) ang -= 180.0;
            if (ang <= -90.0) ang += 180.0;
            // A section that latched onto a neighboring line produces a wild
            // estimate; trust the prior instead.
            double dev = std::abs(ang - priors_.prior_slope_deg);
            dev = std::min(dev, 180.0 - dev);
            if (dev <= 20.0) slope_deg_ = ang;
        }
        dir_ = line_direction(slope_deg_);
        nrm_ = line_normal_toward_higher(slope_deg_);
    }

    double avg_spacing_px() const {
        double sum = 0.0;
        for (double s : spacing_samples_) sum += s;
        if (spacing_samples_.size() < 2) {
            return (prior_spacing_px_ + sum) / (1.0 + spacing_samples_.size());
        }
        return sum / static_cast<double>(spacing_samples_.size());
    }

    const Crossing& leftmost() const {
        const Crossing* best = nullptr;
        for (const auto& c : crossings_) {
            if (c.trusted && (!best || c.s < best->s)) best = &c;
        }
        if (!best) {
            for (const auto& c : crossings_) {
                if (!best || c.s < best->s) best = &c;
            }
        }
        return *best;
    }

    void record_crossing(const Vec2& pos, bool trusted) {
        Crossing cur{pos, (pos - anchor_).dot(nrm_), trusted};
        if (trusted) {
            // Spacing sample = gap to the nearest trusted crossing.
            const Crossing* nearest = nullptr;
            for (const auto& c : crossings_) {
                if (!c.trusted) continue;
                if (!nearest || std::abs(c.s - cur.s) < std::abs(nearest->s - cur.s))
                    nearest = &c;
            }
            if (nearest) {
                const double gap = std::abs(nearest->s - cur.s);
                if (gap > stride_) spacing_samples_.push_back(gap);
            }
        }
        crossings_.push_back(cur);
    }

    // Perpendicular march from `from`; direction = sign * charge normal.
    // Stops after empty_confirmation_factor * average spacing without a new
    // line, at the border, or after max_crossings line clusters (if >= 0).
    void march(const Vec2& from, double sign, int max_crossings) {
        double last_line_s = 0.0;  // relative to `from`, along the march
        bool in_cluster = false;
        Vec2 cluster_sum = Vec2::Zero();
        bool cluster_trusted = false;
        int cluster_n = 0;
        int found = 0;
        const auto close_cluster = [&]() {
            if (!in_cluster) return;
            record_crossing(cluster_sum / cluster_n, cluster_trusted);
            in_cluster = false;
            cluster_sum.setZero();
            cluster_trusted = false;
            cluster_n = 0;
            ++found;
        };
        const int i_max =
            2 * (d_.width() + d_.height()) / march_stride_ + 4;
        for (int i = 1; i <= i_max; ++i) {
            const double dist = i * static_cast<double>(march_stride_);
            Vec2 c = from + nrm_ * (sign * dist);
            if (!center_in_bounds(c)) {
                // Lines extend along dir_; slide the probe along it to stay
                // inside the borders before giving up on this offset.
                bool recovered = false;
                const int shift_max =
                    (d_.width() + d_.height()) / static_cast<int>(stride_) + 2;
                for (int k = 1; k <= shift_max && !recovered; ++k) {
                    for (const double ks : {+1.0, -1.0}) {
                        const Vec2 shifted = c + dir_ * (ks * k * stride_);
                        if (center_in_bounds(shifted)) {
                            c = shifted;
                            recovered = true;
                            break;
                        }
                    }
                }
                if (!recovered) break;  // border constraint
            }
            const Verdict v = probe(c);
            if (v.category == PatchCategory::line) {
                const Vec2 pos = center_of(rect_at(c));
                if (!in_cluster) in_cluster = true;
                cluster_sum += pos;
                cluster_trusted = cluster_trusted || v.trusted;
                ++cluster_n;
                last_line_s = dist;
            } else {
                close_cluster();
                if (max_crossings >= 0 && found >= max_crossings) break;
                if (dist - last_line_s >
                    priors_.empty_confirmation_factor * avg_spacing_px()) {
                    break;
                }
            }
        }
        close_cluster();
    }

    void stage4_missed_line_check() {
        for (int round = 0; round < tuning_.stage4_max_rounds; ++round) {
            const Crossing base = leftmost();
            const Vec2 expected = base.pos - nrm_ * avg_spacing_px();
            bool found = false;
            for (int m = 0; m < tuning_.stage4_sections; ++m) {
                // Section order: center, then +/- spread along the line.
                const double off =
                    (m == 0 ? 0.0 : (m % 2 == 1 ? 1.0 : -1.0) * ((m + 1) / 2) *
                                        tuning_.stage4_section_spread * patch_);
                // Each section is a short scan across the expected position:
                // spacing jitter can displace the line by more than the
                // detection square, so a single patch would miss it.
                for (int j = 0; j <= 2 && !found; ++j) {
                    for (const double js : {+1.0, -1.0}) {
                        if (j == 0 && js < 0) continue;
                        const Vec2 c =
                            expected + dir_ * off + nrm_ * (js * j * march_stride_);
                        if (!center_in_bounds(c)) continue;
                        const Verdict v = probe(c);
                        if (v.category == PatchCategory::line && v.trusted) {
                            const Vec2 pos = center_of(rect_at(c));
                            record_crossing(pos, true);
                            march(pos, -1.0, -1);
                            found = true;
                            break;
                        }
                    }
                }
                if (found) break;
            }
            if (!found) break;
        }
    }

    const StabilityDiagram& d_;
    const PatchClassifier& classify_;
    const ThresholdSet& thresholds_;
    const TuningPriors& priors_;
    const ExplorerTuning& tuning_;
    const int patch_;
    const int stride_;
    const int march_stride_;
    const double prior_spacing_px_;

    Stage stage_ = Stage::find_first;
    Vec2 anchor_ = Vec2::Zero();
    double slope_deg_ = 0.0;
    Vec2 dir_ = Vec2::UnitX();
    Vec2 nrm_ = Vec2::UnitY();
    std::vector<Crossing> crossings_;
    std::vector<double> spacing_samples_;  // pixels
    std::map<std::pair<int, int>, std::pair<Detection, ThreeClass>> cache_;
    std::vector<StepRecord> trace_;
    int steps_ = 0;
};

}  // namespace

TuningOutcome tune(const StabilityDiagram& diagram, const PatchClassifier& classify,
                   const ThresholdSet& thresholds, const TuningPriors& priors,
                   const DatasetProfile& profile, const Vec2& start_v,
                   const ExplorerTuning& tuning) {
    if (!diagram.bounds_v().contains(start_v)) throw Error("start point out of bounds");
    Episode episode(diagram, classify, thresholds, priors, profile, tuning);
    return episode.run(start_v);
}

}  // namespace qdt
