#include "qdt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <thread>

#include <json.hpp>

namespace qdt {

namespace {

std::vector<size_t> shuffled_indices(size_t n, Rng& rng) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

std::vector<PatchSample> flatten(const std::vector<std::vector<PatchSample>>& per_diagram) {
    std::vector<PatchSample> all;
    for (const auto& v : per_diagram) all.insert(all.end(), v.begin(), v.end());
    return all;
}

}  // namespace

std::vector<Fold> split_cross_validation(
    const std::vector<std::vector<PatchSample>>& per_diagram, uint64_t seed) {
    if (per_diagram.size() < 2) throw Error("cross-validation needs at least 2 diagrams");
    std::vector<Fold> folds;
    for (size_t test_i = 0; test_i < per_diagram.size(); ++test_i) {
        Fold fold;
        fold.test = per_diagram[test_i];
        if (!fold.test.empty()) fold.test_diagram_ids.push_back(fold.test.front().diagram_id);
        std::vector<PatchSample> pool;
        for (size_t i = 0; i < per_diagram.size(); ++i) {
            if (i != test_i) pool.insert(pool.end(), per_diagram[i].begin(), per_diagram[i].end());
        }
        Rng rng(derive_seed(seed, test_i));
        const auto idx = shuffled_indices(pool.size(), rng);
        const size_t n_train = pool.size() * 9 / 10;
        for (size_t j = 0; j < idx.size(); ++j) {
            (j < n_train ? fold.train : fold.val).push_back(pool[idx[j]]);
        }
        folds.push_back(std::move(fold));
    }
    return folds;
}

Fold split_pooled(const std::vector<std::vector<PatchSample>>& per_diagram, uint64_t seed) {
    auto all = flatten(per_diagram);
    if (all.size() < 10) throw Error("pooled split needs at least 10 patches");
    Rng rng(derive_seed(seed, 0x9001));
    const auto idx = shuffled_indices(all.size(), rng);
    Fold fold;
    const size_t n_train = all.size() * 7 / 10;
    const size_t n_val = all.size() / 10;
    for (size_t j = 0; j < idx.size(); ++j) {
        auto& dst = j < n_train ? fold.train : (j < n_train + n_val ? fold.val : fold.test);
        dst.push_back(all[idx[j]]);
    }
    std::vector<std::string> ids;
    for (const auto& v : per_diagram) {
        if (!v.empty()) ids.push_back(v.front().diagram_id);
    }
    fold.test_diagram_ids = std::move(ids);
    return fold;
}

LineMetrics compute_line_metrics(
    const std::vector<std::pair<Detection, PatchCategory>>& detections_with_truth,
    const ThresholdSet& thresholds) {
    if (detections_with_truth.empty()) throw Error("compute_line_metrics: empty input");
    long total = 0, correct = 0, unknown = 0, above = 0, correct_above = 0, errors = 0,
         errors_above = 0;
    for (const auto& [det, truth] : detections_with_truth) {
        ++total;
        const bool ok = det.category == truth;
        if (ok) ++correct;
        else ++errors;
        if (apply_threshold(det, thresholds) == ThreeClass::unknown) {
            ++unknown;
        } else {
            ++above;
            if (ok) ++correct_above;
            else ++errors_above;
        }
    }
    LineMetrics m;
    m.accuracy = static_cast<double>(correct) / total;
    m.accuracy_above_threshold =
        above > 0 ? static_cast<double>(correct_above) / above : 1.0;
    // Zero total errors: reported as full reduction by convention.
    m.error_reduction_using_threshold =
        errors > 0 ? 1.0 - static_cast<double>(errors_above) / errors : 1.0;
    m.rate_below_threshold = static_cast<double>(unknown) / total;
    return m;
}

namespace {

std::string baseline_to_string(Baseline b) {
    switch (b) {
        case Baseline::none: return "none";
        case Baseline::oracle: return "oracle";
        case Baseline::random: return "random";
        case Baseline::noisy_oracle: return "noisy_oracle";
    }
    throw Error("bad baseline");
}

Baseline baseline_from_string(const std::string& s) {
    if (s == "none") return Baseline::none;
    if (s == "oracle") return Baseline::oracle;
    if (s == "random") return Baseline::random;
    if (s == "noisy_oracle") return Baseline::noisy_oracle;
    throw Error("unknown baseline: \"" + s + "\"");
}

}  // namespace

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("config not found: " + path.string());
    nlohmann::json j;
    try {
        is >> j;
        ExperimentConfig cfg;
        for (const auto& p : j.at("diagrams")) {
            std::filesystem::path dp = p.get<std::string>();
            if (dp.is_relative()) dp = path.parent_path() / dp;
            cfg.diagrams.push_back(dp);
        }
        cfg.model_kind = model_kind_from_string(j.value("model", "cnn"));
        cfg.desk_scale = j.value("desk_scale", true);
        cfg.profile = j.value("profile", "si-sg");
        cfg.folds = j.value("folds", "cross_validation") == std::string("pooled")
                        ? FoldMode::pooled
                        : FoldMode::cross_validation;
        cfg.seeds = j.value("seeds", 10);
        cfg.starts_per_diagram = j.value("starts_per_diagram", 50);
        cfg.tau = j.value("tau", 0.2);
        cfg.uncertainty_based = j.value("uncertainty_based", true);
        cfg.baseline = baseline_from_string(j.value("baseline", "none"));
        cfg.noisy_error_rate = j.value("noisy_error_rate", 0.05);
        cfg.noisy_low_conf_given_error = j.value("noisy_low_conf_given_error", 0.8);
        cfg.master_seed = j.value("seed", uint64_t{0});
        cfg.max_steps = j.value("max_steps", 2000);
        cfg.jobs = j.value("jobs", 0);
        if (cfg.seeds < 1 || cfg.starts_per_diagram < 1) {
            throw Error("seeds and starts_per_diagram must be >= 1");
        }
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed experiment config " + path.string() + ": " + e.what());
    }
}

namespace {

struct FoldDetector {
    PatchClassifier classifier;  // unused for per-episode-seeded kinds
    std::shared_ptr<const TrainedDetector> model;
    ThresholdSet thresholds;
};

// Deterministic parallel map over [0, n) with preallocated slots.
template <typename Fn>
void parallel_for(size_t n, int jobs, Fn&& fn) {
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min<int>(jobs, static_cast<int>(n ? n : 1)));
    if (jobs == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t) {
        threads.emplace_back([&, t] {
            for (size_t i = static_cast<size_t>(t); i < n; i += static_cast<size_t>(jobs)) fn(i);
        });
    }
    for (auto& th : threads) th.join();
}

}  // namespace

Report run_experiment(const ExperimentConfig& cfg) {
    Report report;
    report.config = cfg;
    if (cfg.diagrams.empty()) throw Error("experiment config lists no diagrams");

    std::vector<StabilityDiagram> diagrams;
    for (const auto& p : cfg.diagrams) diagrams.push_back(load_diagram(p));
    std::map<std::string, const StabilityDiagram*> by_id;
    for (const auto& d : diagrams) by_id[d.id()] = &d;

    const DatasetProfile profile = dataset_profile(cfg.profile);
    std::vector<std::vector<PatchSample>> per_diagram;
    if (cfg.baseline != Baseline::random) {
        for (const auto& d : diagrams) per_diagram.push_back(extract_patches(d, profile));
    }

    TuningPriors priors = priors_from_profile(profile);
    priors.max_steps = cfg.max_steps;
    ExplorerTuning tuning;
    tuning.uncertainty_based = cfg.uncertainty_based;

    for (int seed_i = 0; seed_i < cfg.seeds; ++seed_i) {
        const uint64_t seed_root = derive_seed(cfg.master_seed, static_cast<uint64_t>(seed_i));
        std::vector<Fold> folds;
        if (cfg.baseline == Baseline::random) {
            folds.resize(1);
            for (const auto& d : diagrams) folds[0].test_diagram_ids.push_back(d.id());
        } else if (cfg.folds == FoldMode::cross_validation) {
            folds = split_cross_validation(per_diagram, derive_seed(seed_root, 1));
        } else {
            folds.push_back(split_pooled(per_diagram, derive_seed(seed_root, 1)));
        }

        std::vector<std::pair<LineMetrics, long>> fold_metrics;  // (metrics, weight)
        std::vector<EpisodeRow> seed_rows;
        for (size_t fold_i = 0; fold_i < folds.size(); ++fold_i) {
            const Fold& fold = folds[fold_i];
            FoldDetector fd;
            fd.thresholds.tau = cfg.tau;
            uint64_t model_sampling_seed = 0;
            switch (cfg.baseline) {
                case Baseline::none: {
                    ModelSpec spec = cfg.desk_scale ? ModelSpec::desk_scale(cfg.model_kind)
                                                    : ModelSpec::defaults(cfg.model_kind);
                    spec.seed = derive_seed(seed_root, 2, fold_i);
                    fd.model = std::make_shared<TrainedDetector>(
                        train(spec, fold.train, fold.val));
                    model_sampling_seed = derive_seed(seed_root, 3, fold_i);
                    std::vector<std::pair<Detection, PatchCategory>> val_dets;
                    for (size_t i = 0; i < fold.val.size(); ++i) {
                        val_dets.emplace_back(
                            fd.model->infer(fold.val[i].values,
                                            derive_seed(model_sampling_seed, 0xCA1, i)),
                            fold.val[i].category);
                    }
                    fd.thresholds = calibrate(val_dets, cfg.tau);
                    break;
                }
                case Baseline::oracle:
                    break;  // confidence always 1; floor thresholds suffice
                case Baseline::noisy_oracle:
                    fd.thresholds.t_line = kNoisyOracleRefThreshold;
                    fd.thresholds.t_noline = kNoisyOracleRefThreshold;
                    break;
                case Baseline::random:
                    break;
            }

            // Line metrics on the test patches.
            if (cfg.baseline != Baseline::random && !fold.test.empty()) {
                std::vector<std::pair<Detection, PatchCategory>> dets(fold.test.size());
                parallel_for(fold.test.size(), cfg.jobs, [&](size_t i) {
                    const auto& sample = fold.test[i];
                    Detection det;
                    switch (cfg.baseline) {
                        case Baseline::none:
                            det = fd.model->infer(sample.values,
                                                  derive_seed(model_sampling_seed, 0x7E5, i));
                            break;
                        case Baseline::oracle:
                            det = oracle_infer(*by_id.at(sample.diagram_id), sample.rect,
                                               profile);
                            break;
                        case Baseline::noisy_oracle: {
                            Rng rng(derive_seed(seed_root, 5, fold_i, i));
                            det = noisy_oracle_infer(*by_id.at(sample.diagram_id), sample.rect,
                                                     profile, cfg.noisy_error_rate,
                                                     cfg.noisy_low_conf_given_error, rng);
                            break;
                        }
                        case Baseline::random:
                            break;
                    }
                    dets[i] = {det, sample.category};
                });
                fold_metrics.emplace_back(compute_line_metrics(dets, fd.thresholds),
                                          static_cast<long>(dets.size()));
            }

            // Tuning episodes on the fold's test diagrams.
            const size_t n_eps =
                fold.test_diagram_ids.size() * static_cast<size_t>(cfg.starts_per_diagram);
            std::vector<EpisodeRow> rows(n_eps);
            parallel_for(n_eps, cfg.jobs, [&](size_t e) {
                const size_t d_idx = e / static_cast<size_t>(cfg.starts_per_diagram);
                const size_t start_idx = e % static_cast<size_t>(cfg.starts_per_diagram);
                const StabilityDiagram& d = *by_id.at(fold.test_diagram_ids[d_idx]);
                const uint64_t ep_seed =
                    derive_seed(seed_root, 100 + fold_i, d_idx, start_idx);
                Rng rng(ep_seed);
                std::uniform_real_distribution<double> u01(0.0, 1.0);
                const BoxV box = d.bounds_v();
                const Vec2 start(box.lo.x() + u01(rng) * (box.hi.x() - box.lo.x()),
                                 box.lo.y() + u01(rng) * (box.hi.y() - box.lo.y()));
                EpisodeRow row;
                row.fold = static_cast<int>(fold_i);
                row.seed = seed_i;
                row.diagram_id = d.id();
                row.start_v = start;
                if (cfg.baseline == Baseline::random) {
                    const Vec2 pt(box.lo.x() + u01(rng) * (box.hi.x() - box.lo.x()),
                                  box.lo.y() + u01(rng) * (box.hi.y() - box.lo.y()));
                    row.final_v = pt;
                    row.success = region_at(d, pt) == RegionLabel::one;
                    row.steps = 0;
                } else {
                    PatchClassifier classifier;
                    switch (cfg.baseline) {
                        case Baseline::none:
                            classifier = make_model_classifier(
                                fd.model, derive_seed(ep_seed, 0xB0));
                            break;
                        case Baseline::oracle:
                            classifier = make_oracle_classifier(profile);
                            break;
                        case Baseline::noisy_oracle:
                            classifier = make_noisy_oracle_classifier(
                                profile, cfg.noisy_error_rate,
                                cfg.noisy_low_conf_given_error, derive_seed(ep_seed, 0xA0));
                            break;
                        case Baseline::random:
                            break;
                    }
                    const TuningOutcome outcome =
                        tune(d, classifier, fd.thresholds, priors, profile, start, tuning);
                    row.final_v = outcome.final_v;
                    row.success = outcome.success;
                    row.steps = outcome.steps;
                    if (outcome.failure_reason) {
                        row.failure_reason = to_string(*outcome.failure_reason);
                    }
                }
                rows[e] = std::move(row);
            });
            seed_rows.insert(seed_rows.end(), rows.begin(), rows.end());
        }

        RunSummary run;
        run.seed = seed_i;
        long weight_total = 0;
        for (const auto& [m, wgt] : fold_metrics) weight_total += wgt;
        for (const auto& [m, wgt] : fold_metrics) {
            const double f = static_cast<double>(wgt) / weight_total;
            run.line.accuracy += f * m.accuracy;
            run.line.accuracy_above_threshold += f * m.accuracy_above_threshold;
            run.line.error_reduction_using_threshold += f * m.error_reduction_using_threshold;
            run.line.rate_below_threshold += f * m.rate_below_threshold;
        }
        long succ = 0, steps = 0;
        for (const auto& row : seed_rows) {
            succ += row.success ? 1 : 0;
            steps += row.steps;
        }
        if (!seed_rows.empty()) {
            run.success_rate = static_cast<double>(succ) / seed_rows.size();
            run.mean_steps = static_cast<double>(steps) / seed_rows.size();
        }
        report.runs.push_back(run);
        report.episodes.insert(report.episodes.end(), seed_rows.begin(), seed_rows.end());
    }

    auto mean_std = [](auto&& values) {
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= values.size();
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        return std::make_pair(mean, std::sqrt(var / values.size()));
    };
    std::vector<double> succs, steps;
    for (const auto& run : report.runs) {
        succs.push_back(run.success_rate);
        steps.push_back(run.mean_steps);
    }
    std::tie(report.success_rate_mean, report.success_rate_std) = mean_std(succs);
    std::tie(report.mean_steps_mean, report.mean_steps_std) = mean_std(steps);
    return report;
}

namespace {

void write_text_atomic(const std::filesystem::path& path, const std::string& data) {
    const auto tmp = path.parent_path() / (path.filename().string() + ".tmp");
    {
        std::ofstream os(tmp);
        if (!os) throw Error("cannot open for writing: " + tmp.string());
        os << data;
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

void write_report_json(const Report& report, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json jc;
    jc["profile"] = report.config.profile;
    jc["model"] = to_string(report.config.model_kind);
    jc["baseline"] = baseline_to_string(report.config.baseline);
    jc["folds"] = report.config.folds == FoldMode::pooled ? "pooled" : "cross_validation";
    jc["seeds"] = report.config.seeds;
    jc["starts_per_diagram"] = report.config.starts_per_diagram;
    jc["tau"] = report.config.tau;
    jc["uncertainty_based"] = report.config.uncertainty_based;
    jc["seed"] = report.config.master_seed;
    jc["diagrams"] = nlohmann::json::array();
    for (const auto& p : report.config.diagrams) jc["diagrams"].push_back(p.string());
    j["config"] = std::move(jc);

    j["runs"] = nlohmann::json::array();
    for (const auto& run : report.runs) {
        j["runs"].push_back(
            {{"seed", run.seed},
             {"accuracy", run.line.accuracy},
             {"accuracy_above_threshold", run.line.accuracy_above_threshold},
             {"error_reduction_using_threshold", run.line.error_reduction_using_threshold},
             {"rate_below_threshold", run.line.rate_below_threshold},
             {"success_rate", run.success_rate},
             {"mean_steps", run.mean_steps}});
    }
    j["aggregates"] = {{"success_rate_mean", report.success_rate_mean},
                       {"success_rate_std", report.success_rate_std},
                       {"mean_steps_mean", report.mean_steps_mean},
                       {"mean_steps_std", report.mean_steps_std}};
    j["episodes"] = nlohmann::json::array();
    for (const auto& row : report.episodes) {
        j["episodes"].push_back({{"fold", row.fold},
                                 {"seed", row.seed},
                                 {"diagram", row.diagram_id},
                                 {"start", {row.start_v.x(), row.start_v.y()}},
                                 {"final", {row.final_v.x(), row.final_v.y()}},
                                 {"success", row.success},
                                 {"steps", row.steps},
                                 {"failure_reason", row.failure_reason}});
    }
    write_text_atomic(path, j.dump(2) + "\n");
}

void write_report_csv(const Report& report, const std::filesystem::path& path) {
    std::string out = "fold,seed,diagram_id,start_g1,start_g2,final_g1,final_g2,success,steps,"
                      "failure_reason\n";
    char buf[256];
    for (const auto& row : report.episodes) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%s,%.9g,%.9g,%.9g,%.9g,%d,%d,%s\n", row.fold,
                      row.seed, row.diagram_id.c_str(), row.start_v.x(), row.start_v.y(),
                      row.final_v.x(), row.final_v.y(), row.success ? 1 : 0, row.steps,
                      row.failure_reason.c_str());
        out += buf;
    }
    write_text_atomic(path, out);
}

std::string render_trace(const TuningOutcome& outcome, const StabilityDiagram& diagram) {
    if (outcome.trace.empty()) throw Error("render_trace: empty trace");
    const int scale = 4;
    const int w = diagram.width() * scale;
    const int h = diagram.height() * scale;
    std::string svg;
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                  "viewBox=\"0 0 %d %d\">\n",
                  w, h, w, h);
    svg += buf;

    const float lo = diagram.grid().minCoeff();
    const float hi = diagram.grid().maxCoeff();
    const float span = hi > lo ? hi - lo : 1.0f;
    svg += "<g id=\"heatmap\">\n";
    for (int y = 0; y < diagram.height(); ++y) {
        for (int x = 0; x < diagram.width(); ++x) {
            const int g =
                static_cast<int>(255.0f * (diagram.grid()(y, x) - lo) / span + 0.5f);
            std::snprintf(buf, sizeof(buf),
                          "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" "
                          "fill=\"rgb(%d,%d,%d)\"/>\n",
                          x * scale, (diagram.height() - 1 - y) * scale, scale, scale, g, g, g);
            svg += buf;
        }
    }
    svg += "</g>\n<g id=\"lines\" fill=\"none\" stroke=\"#00c853\" stroke-width=\"2\">\n";
    const auto to_px = [&](const Vec2& v) {
        const Vec2 p = (v - diagram.origin_v()) / diagram.pixel_size_v();
        return Vec2(p.x() * scale, (diagram.height() - p.y()) * scale);
    };
    for (const auto& line : diagram.lines()) {
        svg += "<polyline points=\"";
        for (const auto& v : line.polyline) {
            const Vec2 p = to_px(v);
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", p.x(), p.y());
            svg += buf;
        }
        svg += "\"/>\n";
    }
    svg += "</g>\n<g id=\"steps\" fill=\"none\" stroke-width=\"2\">\n";
    const char* stage_colors[] = {"#ff6d00", "#2962ff", "#aa00ff", "#d50000", "#00b8d4",
                                  "#777777"};
    int order = 1;
    for (const auto& step : outcome.trace) {
        std::snprintf(buf, sizeof(buf),
                      "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" stroke=\"%s\" "
                      "data-order=\"%d\" data-stage=\"%s\"/>\n",
                      step.rect.x * scale,
                      (diagram.height() - step.rect.y - step.rect.side) * scale,
                      step.rect.side * scale, step.rect.side * scale,
                      stage_colors[static_cast<int>(step.stage)], order++,
                      to_string(step.stage).c_str());
        svg += buf;
    }
    svg += "</g>\n";
    const Vec2 fp = to_px(outcome.final_v);
    std::snprintf(buf, sizeof(buf),
                  "<circle id=\"final\" cx=\"%.2f\" cy=\"%.2f\" r=\"%d\" fill=\"%s\"/>\n",
                  fp.x(), fp.y(), scale * 2, outcome.success ? "#00c853" : "#d50000");
    svg += buf;
    svg += "</svg>\n";
    return svg;
}

double one_electron_area_fraction(const StabilityDiagram& d) {
    double area = 0.0;
    for (const auto& region : d.regions()) {
        if (region.label == RegionLabel::one) area += polygon_area(region.polygon);
    }
    const BoxV box = d.bounds_v();
    return area / ((box.hi.x() - box.lo.x()) * (box.hi.y() - box.lo.y()));
}

}  // namespace qdt
