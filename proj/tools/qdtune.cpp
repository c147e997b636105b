#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qdt/harness.hpp"

namespace fs = std::filesystem;
using namespace qdt;

namespace {

bool log_enabled() {
    const char* env = std::getenv("QDTUNE_LOG");
    return env != nullptr && *env != '\0';
}

void log_info(const std::string& msg) {
    if (log_enabled()) std::cerr << "[qdtune] " << msg << "\n";
}

std::vector<fs::path> manifest_paths(const fs::path& dir) {
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".json") paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw Error("no diagram manifests found in " + dir.string());
    return paths;
}

std::vector<std::vector<PatchSample>> load_patches(const fs::path& dir,
                                                   const DatasetProfile& profile) {
    std::vector<std::vector<PatchSample>> per_diagram;
    for (const auto& p : manifest_paths(dir)) {
        per_diagram.push_back(extract_patches(load_diagram(p), profile));
    }
    return per_diagram;
}

Vec2 parse_point(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw Error("expected g1,g2 pair, got \"" + s + "\"");
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
}

int cmd_gen(const std::string& profile, int count, const fs::path& out, uint64_t seed) {
    fs::create_directories(out);
    for (int i = 0; i < count; ++i) {
        SynthConfig cfg = make_profile(profile);
        cfg.seed = derive_seed(seed, static_cast<uint64_t>(i));
        const StabilityDiagram d = generate(cfg);
        char name[64];
        std::snprintf(name, sizeof(name), "diagram_%03d.json", i);
        save_diagram(d, out / name);
        log_info("wrote " + (out / name).string());
    }
    return 0;
}

int cmd_train(const std::string& spec_name, const fs::path& data, const fs::path& out,
              const std::string& profile_name, uint64_t seed, bool full_scale) {
    const DatasetProfile profile = dataset_profile(profile_name);
    const auto per_diagram = load_patches(data, profile);
    const Fold fold = split_pooled(per_diagram, seed);
    ModelSpec spec = full_scale ? ModelSpec::defaults(model_kind_from_string(spec_name))
                                 : ModelSpec::desk_scale(model_kind_from_string(spec_name));
    spec.seed = seed;
    log_info("training " + spec_name + " on " + std::to_string(fold.train.size()) +
             " patches");
    const TrainedDetector detector = train(spec, fold.train, fold.val);
    fs::create_directories(out.parent_path().empty() ? "." : out.parent_path());
    detector.save(out);

    std::vector<std::pair<Detection, PatchCategory>> dets;
    for (size_t i = 0; i < fold.test.size(); ++i) {
        dets.emplace_back(detector.infer(fold.test[i].values, derive_seed(seed, 0x7E5, i)),
                          fold.test[i].category);
    }
    const LineMetrics m = compute_line_metrics(dets, ThresholdSet{});
    std::cout << nlohmann::ordered_json{{"model", out.string()},
                                        {"test_accuracy", m.accuracy}}
                     .dump()
              << "\n";
    return 0;
}

int cmd_calibrate(const fs::path& model_path, const fs::path& val_dir,
                  const std::string& profile_name, double tau, uint64_t seed) {
    auto loaded = TrainedDetector::load(model_path);
    const DatasetProfile profile = dataset_profile(profile_name);
    std::vector<std::pair<Detection, PatchCategory>> dets;
    size_t i = 0;
    for (const auto& patches : load_patches(val_dir, profile)) {
        for (const auto& sample : patches) {
            dets.emplace_back(
                loaded.detector.infer(sample.values, derive_seed(seed, 0xCA1, i++)),
                sample.category);
        }
    }
    const ThresholdSet t = calibrate(dets, tau);
    loaded.detector.save(model_path, std::make_pair(t.t_line, t.t_noline));
    std::cout << nlohmann::ordered_json{{"t_line", t.t_line}, {"t_noline", t.t_noline}}.dump()
              << "\n";
    return 0;
}

int cmd_tune(const fs::path& diagram_path, const fs::path& model_path, bool use_oracle,
             const std::string& profile_name, const std::string& start_str, uint64_t seed,
             bool no_uncertainty, const fs::path& trace_path) {
    const StabilityDiagram d = load_diagram(diagram_path);
    const DatasetProfile profile = dataset_profile(profile_name);
    ThresholdSet thresholds;
    PatchClassifier classifier;
    if (use_oracle) {
        classifier = make_oracle_classifier(profile);
    } else {
        auto loaded = TrainedDetector::load(model_path);
        if (loaded.thresholds) {
            thresholds.t_line = loaded.thresholds->first;
            thresholds.t_noline = loaded.thresholds->second;
        }
        classifier = make_model_classifier(
            std::make_shared<TrainedDetector>(std::move(loaded.detector)),
            derive_seed(seed, 0xB0));
    }
    Vec2 start;
    if (start_str.empty()) {
        Rng rng(derive_seed(seed, 0x57));
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        const BoxV box = d.bounds_v();
        start = {box.lo.x() + u01(rng) * (box.hi.x() - box.lo.x()),
                 box.lo.y() + u01(rng) * (box.hi.y() - box.lo.y())};
    } else {
        start = parse_point(start_str);
    }
    ExplorerTuning tuning;
    tuning.uncertainty_based = !no_uncertainty;
    const TuningOutcome outcome =
        tune(d, classifier, thresholds, priors_from_profile(profile), profile, start, tuning);
    nlohmann::ordered_json j;
    j["diagram"] = d.id();
    j["start"] = {start.x(), start.y()};
    j["final"] = {outcome.final_v.x(), outcome.final_v.y()};
    j["final_region"] = to_string(outcome.final_region);
    j["success"] = outcome.success;
    j["steps"] = outcome.steps;
    j["slope_estimate_deg"] = outcome.slope_estimate_deg;
    j["avg_spacing_v"] = outcome.avg_spacing_v;
    if (outcome.failure_reason) j["failure_reason"] = to_string(*outcome.failure_reason);
    std::cout << j.dump(2) << "\n";
    if (!trace_path.empty()) {
        std::ofstream os(trace_path);
        if (!os) throw Error("cannot open " + trace_path.string());
        os << render_trace(outcome, d);
        log_info("trace written to " + trace_path.string());
    }
    return 0;
}

int cmd_bench(const fs::path& config_path, const fs::path& out, const fs::path& csv,
              int jobs) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (jobs >= 0) cfg.jobs = jobs;
    const Report report = run_experiment(cfg);
    write_report_json(report, out);
    if (!csv.empty()) write_report_csv(report, csv);
    std::cout << nlohmann::ordered_json{{"success_rate_mean", report.success_rate_mean},
                                        {"success_rate_std", report.success_rate_std},
                                        {"mean_steps_mean", report.mean_steps_mean},
                                        {"mean_steps_std", report.mean_steps_std}}
                     .dump()
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stability-diagram charge autotuning toolkit"};
    app.require_subcommand(1);

    std::string profile = "si-sg", spec_name = "cnn", start_str;
    fs::path out_dir, data_dir, model_path, diagram_path, config_path, out_path, csv_path,
        trace_path;
    int count = 1, jobs = -1;
    uint64_t seed = 0;
    double tau = 0.2;
    bool use_oracle = false, no_uncertainty = false, full_scale = false;

    auto* gen = app.add_subcommand("gen", "Generate synthetic diagrams");
    gen->add_option("--profile", profile, "Dataset profile (si-sg, gaas, si-og)");
    gen->add_option("--count", count, "Number of diagrams");
    gen->add_option("--out", out_dir, "Output directory")->required();
    gen->add_option("--seed", seed, "Master seed");

    auto* tr = app.add_subcommand("train", "Train a line detector");
    tr->add_option("--spec", spec_name, "Model kind (ff, cnn, bcnn)");
    tr->add_option("--data", data_dir, "Directory of diagram manifests")->required();
    tr->add_option("--out", model_path, "Output model file")->required();
    tr->add_option("--profile", profile, "Dataset profile");
    tr->add_option("--seed", seed, "Master seed");
    tr->add_flag("--full-scale", full_scale, "Use full-size training meta-parameters");

    auto* cal = app.add_subcommand("calibrate", "Calibrate confidence thresholds");
    cal->add_option("--model", model_path, "Model file (updated in place)")->required();
    cal->add_option("--val", data_dir, "Validation diagrams directory")->required();
    cal->add_option("--tau", tau, "Unknown-rate trade-off weight");
    cal->add_option("--profile", profile, "Dataset profile");
    cal->add_option("--seed", seed, "Sampling seed");

    auto* tu = app.add_subcommand("tune", "Run one autotuning episode");
    tu->add_option("--diagram", diagram_path, "Diagram manifest")->required();
    tu->add_option("--model", model_path, "Model file");
    tu->add_flag("--oracle", use_oracle, "Use the ground-truth oracle detector");
    tu->add_option("--profile", profile, "Dataset profile");
    tu->add_option("--start", start_str, "Start point g1,g2 in volts (default: random)");
    tu->add_option("--seed", seed, "Master seed");
    tu->add_flag("--no-uncertainty", no_uncertainty, "Ignore confidence thresholds");
    tu->add_option("--trace", trace_path, "Write an SVG trace");

    auto* be = app.add_subcommand("bench", "Run a benchmark experiment");
    be->add_option("--config", config_path, "Experiment config JSON")->required();
    be->add_option("--out", out_path, "Report JSON output")->required();
    be->add_option("--csv", csv_path, "Per-episode CSV output");
    be->add_option("--jobs", jobs, "Worker threads (default: all cores)");

    auto* re = app.add_subcommand("render", "Render an episode trace to SVG");
    re->add_option("--diagram", diagram_path, "Diagram manifest")->required();
    re->add_option("--model", model_path, "Model file");
    re->add_flag("--oracle", use_oracle, "Use the ground-truth oracle detector");
    re->add_option("--profile", profile, "Dataset profile");
    re->add_option("--start", start_str, "Start point g1,g2 in volts (default: random)");
    re->add_option("--seed", seed, "Master seed");
    re->add_option("--out", trace_path, "SVG output")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(profile, count, out_dir, seed);
        if (tr->parsed()) return cmd_train(spec_name, data_dir, model_path, profile, seed,
                                           full_scale);
        if (cal->parsed()) return cmd_calibrate(model_path, data_dir, profile, tau, seed);
        if (tu->parsed()) {
            if (!use_oracle && model_path.empty()) {
                throw Error("tune needs --model or --oracle");
            }
            return cmd_tune(diagram_path, model_path, use_oracle, profile, start_str, seed,
                            no_uncertainty, trace_path);
        }
        if (be->parsed()) return cmd_bench(config_path, out_path, csv_path, jobs);
        if (re->parsed()) {
            if (!use_oracle && model_path.empty()) {
                throw Error("render needs --model or --oracle");
            }
            return cmd_tune(diagram_path, model_path, use_oracle, profile, start_str, seed,
                            false, trace_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
