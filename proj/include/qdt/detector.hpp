#pragma once
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qdt/diagram.hpp"
#include "qdt/nn.hpp"
#include "qdt/rng.hpp"

namespace qdt {

enum class ModelKind { ff, cnn, bcnn };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct ModelSpec {
    ModelKind kind = ModelKind::cnn;
    int patch_size = 18;
    std::vector<int> hidden;          // fully connected plan
    std::vector<int> conv_channels;   // cnn/bcnn only
    int conv_kernel = 4;
    int train_updates = 30000;
    double learning_rate = 1e-3;
    double dropout_rate = 0.6;
    int batch_size = 512;
    int bayes_samples = 10;
    uint64_t seed = 0;

    // Full-size defaults per architecture.
    static ModelSpec defaults(ModelKind kind);
    // Reduced settings for CI-scale runs: updates / 10, batch 128.
    static ModelSpec desk_scale(ModelKind kind);
};

struct Detection {
    double y = 0.0;  // raw output in [0,1]
    PatchCategory category = PatchCategory::no_line;
    double confidence = 0.0;
};

// |0.5 - y| * 2
double heuristic_confidence(double y);

// 1 - 2 * population_std(samples), clamped to [0,1]; needs >= 2 samples.
double bayes_confidence(const std::vector<double>& samples);

struct TrainingCheckpoint {
    int update = 0;
    double loss = 0.0;
    double val_accuracy = 0.0;
    bool best = false;
};

struct ThresholdSet;  // calibrate.hpp

class TrainedDetector {
public:
    TrainedDetector(ModelSpec spec, nn::VectorXd parameters,
                    std::vector<TrainingCheckpoint> log);

    const ModelSpec& spec() const { return spec_; }
    const nn::VectorXd& parameters() const { return parameters_; }
    const std::vector<TrainingCheckpoint>& training_log() const { return log_; }

    // ff/cnn: one deterministic pass. bcnn: bayes_samples passes with fresh
    // weight draws seeded by sampling_seed.
    Detection infer(const Eigen::MatrixXf& patch, uint64_t sampling_seed = 0) const;

    void save(const std::filesystem::path& path,
              const std::optional<std::pair<double, double>>& thresholds = std::nullopt) const;
    struct Loaded;
    static Loaded load(const std::filesystem::path& path);

private:
    ModelSpec spec_;
    nn::VectorXd parameters_;
    std::vector<TrainingCheckpoint> log_;
    mutable nn::Network net_;  // weights copied in at construction
};

struct TrainedDetector::Loaded {
    TrainedDetector detector;
    std::optional<std::pair<double, double>> thresholds;  // (t_line, t_noline)
};

// Flattens a normalized patch in the layout the networks expect.
nn::VectorXd patch_to_input(const Eigen::MatrixXf& patch);

// Builds the layer plan for a spec (exposed for the gradient-check tests).
nn::Network build_network(const ModelSpec& spec);

TrainedDetector train(const ModelSpec& spec, const std::vector<PatchSample>& train_set,
                      const std::vector<PatchSample>& val_set);

// Ground-truth-backed detector: always correct, confidence 1.
Detection oracle_infer(const StabilityDiagram& d, const PatchRect& rect,
                       const DatasetProfile& profile);

// Oracle that flips its verdict with probability error_rate; flipped verdicts
// get a confidence below the fixed reference threshold with probability
// low_conf_given_error, correct ones land above it with the same bias.
inline constexpr double kNoisyOracleRefThreshold = 0.8;
Detection noisy_oracle_infer(const StabilityDiagram& d, const PatchRect& rect,
                             const DatasetProfile& profile, double error_rate,
                             double low_conf_given_error, Rng& rng);

}  // namespace qdt
