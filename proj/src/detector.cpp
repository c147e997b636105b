#include "qdt/detector.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace qdt {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::ff: return "ff";
        case ModelKind::cnn: return "cnn";
        case ModelKind::bcnn: return "bcnn";
    }
    throw Error("bad model kind");
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "ff") return ModelKind::ff;
    if (s == "cnn") return ModelKind::cnn;
    if (s == "bcnn") return ModelKind::bcnn;
    throw Error("unknown model kind: \"" + s + "\"");
}

ModelSpec ModelSpec::defaults(ModelKind kind) {
    ModelSpec spec;
    spec.kind = kind;
    switch (kind) {
        case ModelKind::ff:
            spec.hidden = {400, 100};
            spec.train_updates = 15000;
            spec.learning_rate = 5e-4;
            spec.dropout_rate = 0.6;
            break;
        case ModelKind::cnn:
            spec.hidden = {200, 100};
            spec.conv_channels = {12, 24};
            spec.train_updates = 30000;
            spec.learning_rate = 1e-3;
            spec.dropout_rate = 0.6;
            break;
        case ModelKind::bcnn:
            spec.hidden = {200, 100};
            spec.conv_channels = {12, 24};
            spec.train_updates = 30000;
            spec.learning_rate = 1e-3;
            spec.dropout_rate = 0.0;
            break;
    }
    return spec;
}

ModelSpec ModelSpec::desk_scale(ModelKind kind) {
    ModelSpec spec = defaults(kind);
    spec.train_updates /= 10;
    spec.batch_size = 128;
    return spec;
}

double heuristic_confidence(double y) {
    if (y < 0.0 || y > 1.0) throw Error("model output outside [0,1]");
    return std::abs(0.5 - y) * 2.0;
}

double bayes_confidence(const std::vector<double>& samples) {
    if (samples.size() < 2) throw Error("bayes_confidence needs at least 2 samples");
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= static_cast<double>(samples.size());
    return std::clamp(1.0 - 2.0 * std::sqrt(var), 0.0, 1.0);
}

nn::VectorXd patch_to_input(const Eigen::MatrixXf& patch) {
    nn::VectorXd x(patch.size());
    int i = 0;
    for (Eigen::Index r = 0; r < patch.rows(); ++r)
        for (Eigen::Index c = 0; c < patch.cols(); ++c) x[i++] = patch(r, c);
    return x;
}

nn::Network build_network(const ModelSpec& spec) {
    nn::Network net;
    const int p = spec.patch_size;
    int features = p * p;
    if (spec.kind == ModelKind::ff) {
        for (int h : spec.hidden) {
            net.add_dense(features, h);
            net.add_relu();
            net.add_dropout(spec.dropout_rate);
            features = h;
        }
    } else {
        int h = p, w = p, ch = 1;
        for (int out_ch : spec.conv_channels) {
            net.add_conv(ch, out_ch, spec.conv_kernel, h, w);
            net.add_relu();
            h -= spec.conv_kernel - 1;
            w -= spec.conv_kernel - 1;
            net.add_maxpool2(out_ch, h, w);
            h /= 2;
            w /= 2;
            ch = out_ch;
        }
        features = ch * h * w;
        for (int hidden : spec.hidden) {
            net.add_dense(features, hidden);
            net.add_relu();
            net.add_dropout(spec.dropout_rate);
            features = hidden;
        }
    }
    net.add_dense(features, 1);
    return net;
}

TrainedDetector::TrainedDetector(ModelSpec spec, nn::VectorXd parameters,
                                 std::vector<TrainingCheckpoint> log)
    : spec_(std::move(spec)), parameters_(std::move(parameters)), log_(std::move(log)) {
    net_ = build_network(spec_);
    Rng dummy(0);
    net_.init(spec_.kind == ModelKind::bcnn, dummy);
    if (net_.params().size() != parameters_.size()) {
        throw Error("parameter vector size mismatch for model " + to_string(spec_.kind));
    }
    net_.params() = parameters_;
}

Detection TrainedDetector::infer(const Eigen::MatrixXf& patch, uint64_t sampling_seed) const {
    if (patch.rows() != spec_.patch_size || patch.cols() != spec_.patch_size) {
        throw Error("patch shape mismatch: expected " + std::to_string(spec_.patch_size) +
                    "x" + std::to_string(spec_.patch_size));
    }
    nn::MatrixXd x(1, patch.size());
    x.row(0) = patch_to_input(patch);
    Detection det;
    if (spec_.kind == ModelKind::bcnn) {
        Rng rng(mix_seed(sampling_seed));
        std::vector<double> samples;
        samples.reserve(static_cast<size_t>(spec_.bayes_samples));
        double mean = 0.0;
        for (int i = 0; i < spec_.bayes_samples; ++i) {
            const double y = nn::sigmoid(net_.forward(x, false, rng)[0]);
            samples.push_back(y);
            mean += y;
        }
        det.y = mean / spec_.bayes_samples;
        det.confidence = bayes_confidence(samples);
    } else {
        Rng rng(0);
        det.y = nn::sigmoid(net_.forward(x, false, rng)[0]);
        det.confidence = heuristic_confidence(det.y);
    }
    det.category = det.y >= 0.5 ? PatchCategory::line : PatchCategory::no_line;
    return det;
}

namespace {

double evaluate_accuracy(nn::Network& net, const ModelSpec& spec, const nn::MatrixXd& x,
                         const nn::VectorXd& targets, uint64_t eval_seed) {
    const Eigen::Index n = x.rows();
    Eigen::VectorXd prob = Eigen::VectorXd::Zero(n);
    const int passes = spec.kind == ModelKind::bcnn ? spec.bayes_samples : 1;
    Rng rng(mix_seed(eval_seed));
    for (int p = 0; p < passes; ++p) {
        const nn::VectorXd z = net.forward(x, false, rng);
        for (Eigen::Index i = 0; i < n; ++i) prob[i] += nn::sigmoid(z[i]);
    }
    int correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool line = prob[i] / passes >= 0.5;
        if (line == (targets[i] >= 0.5)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace

TrainedDetector train(const ModelSpec& spec, const std::vector<PatchSample>& train_set,
                      const std::vector<PatchSample>& val_set) {
    if (train_set.empty() || val_set.empty()) throw Error("empty training or validation set");
    std::vector<size_t> line_idx, noline_idx;
    for (size_t i = 0; i < train_set.size(); ++i) {
        (train_set[i].category == PatchCategory::line ? line_idx : noline_idx).push_back(i);
    }
    if (line_idx.empty() || noline_idx.empty()) throw Error("single-class training set");

    nn::Network net = build_network(spec);
    Rng rng(mix_seed(spec.seed));
    net.init(spec.kind == ModelKind::bcnn, rng);
    nn::Adam adam(static_cast<int>(net.params().size()), spec.learning_rate);

    const int input_size = spec.patch_size * spec.patch_size;
    nn::MatrixXd val_x(val_set.size(), input_size);
    nn::VectorXd val_y(val_set.size());
    for (size_t i = 0; i < val_set.size(); ++i) {
        val_x.row(static_cast<Eigen::Index>(i)) = patch_to_input(val_set[i].values);
        val_y[static_cast<Eigen::Index>(i)] =
            val_set[i].category == PatchCategory::line ? 1.0 : 0.0;
    }

    const int num_batches =
        std::max<int>(1, static_cast<int>(train_set.size()) / spec.batch_size);
    const double kl_weight = spec.kind == ModelKind::bcnn ? 1.0 / num_batches : 0.0;
    const int eval_every = std::max(1, spec.train_updates / 25);

    std::vector<TrainingCheckpoint> log;
    nn::VectorXd best_params = net.params();
    double best_acc = -1.0;
    size_t best_ckpt = 0;

    nn::MatrixXd batch_x(spec.batch_size, input_size);
    nn::VectorXd batch_y(spec.batch_size);
    std::bernoulli_distribution pick_line(0.5);
    double last_loss = 0.0;
    for (int update = 1; update <= spec.train_updates; ++update) {
        // Class-rebalanced sampling: each slot draws its class fairly.
        for (int b = 0; b < spec.batch_size; ++b) {
            const auto& pool = pick_line(rng) ? line_idx : noline_idx;
            std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
            const auto& sample = train_set[pool[pick(rng)]];
            batch_x.row(b) = patch_to_input(sample.values);
            batch_y[b] = sample.category == PatchCategory::line ? 1.0 : 0.0;
        }
        const nn::VectorXd z = net.forward(batch_x, true, rng);
        nn::VectorXd dz;
        double loss = nn::bce_with_logits(z, batch_y, dz);
        if (kl_weight > 0.0) loss += kl_weight * net.kl_divergence();
        if (!std::isfinite(loss)) {
            throw Error("training diverged (non-finite loss) at update " +
                        std::to_string(update));
        }
        last_loss = loss;
        net.zero_grads();
        net.backward(dz);
        if (kl_weight > 0.0) net.accumulate_kl_grad(kl_weight);
        adam.step(net.params(), net.grads());

        if (update % eval_every == 0 || update == spec.train_updates) {
            const double acc =
                evaluate_accuracy(net, spec, val_x, val_y, spec.seed ^ 0x5eedu ^ update);
            log.push_back({update, loss, acc, false});
            if (acc > best_acc) {
                best_acc = acc;
                best_params = net.params();
                best_ckpt = log.size() - 1;
            }
        }
    }
    (void)last_loss;
    if (!log.empty()) log[best_ckpt].best = true;
    return TrainedDetector(spec, std::move(best_params), std::move(log));
}

void TrainedDetector::save(const std::filesystem::path& path,
                           const std::optional<std::pair<double, double>>& thresholds) const {
    nlohmann::ordered_json j;
    j["format"] = "qdt-detector";
    j["version"] = 1;
    nlohmann::ordered_json js;
    js["kind"] = to_string(spec_.kind);
    js["patch_size"] = spec_.patch_size;
    js["hidden"] = spec_.hidden;
    js["conv_channels"] = spec_.conv_channels;
    js["conv_kernel"] = spec_.conv_kernel;
    js["train_updates"] = spec_.train_updates;
    js["learning_rate"] = spec_.learning_rate;
    js["dropout_rate"] = spec_.dropout_rate;
    js["batch_size"] = spec_.batch_size;
    js["bayes_samples"] = spec_.bayes_samples;
    js["seed"] = spec_.seed;
    j["spec"] = std::move(js);
    if (thresholds) {
        j["thresholds"] = {{"t_line", thresholds->first}, {"t_noline", thresholds->second}};
    }
    j["training_log"] = nlohmann::json::array();
    for (const auto& ckpt : log_) {
        j["training_log"].push_back({{"update", ckpt.update},
                                     {"loss", ckpt.loss},
                                     {"val_accuracy", ckpt.val_accuracy},
                                     {"best", ckpt.best}});
    }
    std::vector<double> params(parameters_.data(), parameters_.data() + parameters_.size());
    j["parameters"] = std::move(params);

    const auto tmp = path.parent_path() / (path.filename().string() + ".tmp");
    {
        std::ofstream os(tmp);
        if (!os) throw Error("cannot open for writing: " + tmp.string());
        os << j.dump() << "\n";
    }
    std::filesystem::rename(tmp, path);
}

TrainedDetector::Loaded TrainedDetector::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open detector file: " + path.string());
    nlohmann::json j;
    try {
        is >> j;
        if (j.at("format") != "qdt-detector") throw Error("not a detector file");
        const auto& js = j.at("spec");
        ModelSpec spec;
        spec.kind = model_kind_from_string(js.at("kind").get<std::string>());
        spec.patch_size = js.at("patch_size").get<int>();
        spec.hidden = js.at("hidden").get<std::vector<int>>();
        spec.conv_channels = js.at("conv_channels").get<std::vector<int>>();
        spec.conv_kernel = js.at("conv_kernel").get<int>();
        spec.train_updates = js.at("train_updates").get<int>();
        spec.learning_rate = js.at("learning_rate").get<double>();
        spec.dropout_rate = js.at("dropout_rate").get<double>();
        spec.batch_size = js.at("batch_size").get<int>();
        spec.bayes_samples = js.at("bayes_samples").get<int>();
        spec.seed = js.at("seed").get<uint64_t>();

        const auto params_json = j.at("parameters").get<std::vector<double>>();
        nn::VectorXd params(params_json.size());
        for (size_t i = 0; i < params_json.size(); ++i)
            params[static_cast<Eigen::Index>(i)] = params_json[i];

        std::vector<TrainingCheckpoint> log;
        for (const auto& jc : j.value("training_log", nlohmann::json::array())) {
            log.push_back({jc.at("update").get<int>(), jc.at("loss").get<double>(),
                           jc.at("val_accuracy").get<double>(), jc.at("best").get<bool>()});
        }
        std::optional<std::pair<double, double>> thresholds;
        if (j.contains("thresholds")) {
            thresholds = {j["thresholds"].at("t_line").get<double>(),
                          j["thresholds"].at("t_noline").get<double>()};
        }
        return {TrainedDetector(std::move(spec), std::move(params), std::move(log)),
                thresholds};
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed detector file " + path.string() + ": " + e.what());
    }
}

Detection oracle_infer(const StabilityDiagram& d, const PatchRect& rect,
                       const DatasetProfile& profile) {
    Detection det;
    det.category = assign_category(d, rect, profile.detection_offset_px);
    det.y = det.category == PatchCategory::line ? 1.0 : 0.0;
    det.confidence = 1.0;
    return det;
}

Detection noisy_oracle_infer(const StabilityDiagram& d, const PatchRect& rect,
                             const DatasetProfile& profile, double error_rate,
                             double low_conf_given_error, Rng& rng) {
    if (error_rate < 0.0 || error_rate > 1.0 || low_conf_given_error < 0.0 ||
        low_conf_given_error > 1.0) {
        throw Error("noisy oracle rates must be in [0,1]");
    }
    Detection det = oracle_infer(d, rect, profile);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const bool flip = unif(rng) < error_rate;
    if (flip) {
        det.category = det.category == PatchCategory::line ? PatchCategory::no_line
                                                           : PatchCategory::line;
        det.y = 1.0 - det.y;
    }
    const bool below = flip ? unif(rng) < low_conf_given_error
                            : unif(rng) >= low_conf_given_error;
    det.confidence = below
                         ? 0.5 + unif(rng) * (kNoisyOracleRefThreshold - 0.5 - 1e-9)
                         : kNoisyOracleRefThreshold +
                               unif(rng) * (1.0 - kNoisyOracleRefThreshold);
    return det;
}

}  // namespace qdt
