#pragma once
#include <filesystem>
#include <string>
#include <vector>

#include "qdt/explorer.hpp"

namespace qdt {

struct Fold {
    std::vector<PatchSample> train;
    std::vector<PatchSample> val;
    std::vector<PatchSample> test;
    std::vector<std::string> test_diagram_ids;
};

// Leave-one-diagram-out: test = one diagram's patches, the rest split 90/10.
std::vector<Fold> split_cross_validation(const std::vector<std::vector<PatchSample>>& per_diagram,
                                         uint64_t seed);

// 70/10/20 random partition pooled across diagrams.
Fold split_pooled(const std::vector<std::vector<PatchSample>>& per_diagram, uint64_t seed);

struct LineMetrics {
    double accuracy = 0.0;
    double accuracy_above_threshold = 0.0;
    double error_reduction_using_threshold = 0.0;
    double rate_below_threshold = 0.0;
};

LineMetrics compute_line_metrics(
    const std::vector<std::pair<Detection, PatchCategory>>& detections_with_truth,
    const ThresholdSet& thresholds);

enum class FoldMode { cross_validation, pooled };
enum class Baseline { none, oracle, random, noisy_oracle };

struct ExperimentConfig {
    std::vector<std::filesystem::path> diagrams;
    ModelKind model_kind = ModelKind::cnn;
    bool desk_scale = true;
    std::string profile = "si-sg";
    FoldMode folds = FoldMode::cross_validation;
    int seeds = 10;
    int starts_per_diagram = 50;
    double tau = 0.2;
    bool uncertainty_based = true;
    Baseline baseline = Baseline::none;
    double noisy_error_rate = 0.05;
    double noisy_low_conf_given_error = 0.8;
    uint64_t master_seed = 0;
    int max_steps = 2000;
    int jobs = 1;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct EpisodeRow {
    int fold = 0;
    int seed = 0;
    std::string diagram_id;
    Vec2 start_v = Vec2::Zero();
    Vec2 final_v = Vec2::Zero();
    bool success = false;
    int steps = 0;
    std::string failure_reason;  // empty when none
};

struct RunSummary {
    int seed = 0;
    LineMetrics line;  // pooled over folds
    double success_rate = 0.0;
    double mean_steps = 0.0;
};

struct Report {
    ExperimentConfig config;
    std::vector<RunSummary> runs;  // one per seed
    std::vector<EpisodeRow> episodes;
    double success_rate_mean = 0.0;
    double success_rate_std = 0.0;
    double mean_steps_mean = 0.0;
    double mean_steps_std = 0.0;
};

Report run_experiment(const ExperimentConfig& cfg);

void write_report_json(const Report& report, const std::filesystem::path& path);
void write_report_csv(const Report& report, const std::filesystem::path& path);

// Deterministic SVG: heatmap, one rect per step color-coded by stage,
// ground-truth line overlay, final coordinate marker.
std::string render_trace(const TuningOutcome& outcome, const StabilityDiagram& diagram);

// Exact area fraction of the one-electron regime (for the random baseline).
double one_electron_area_fraction(const StabilityDiagram& d);

}  // namespace qdt
