#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "qdt/rng.hpp"

namespace qdt::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Sequential network over flat parameter storage, double precision.
// In Bayesian mode every parameter is a (mean, rho) pair; weights are drawn
// as mean + softplus(rho) * eps at each sampled forward pass.
class Network {
public:
    void add_dense(int in, int out);
    void add_relu();
    void add_conv(int in_ch, int out_ch, int kernel, int in_h, int in_w);  // stride 1, valid
    void add_maxpool2(int ch, int in_h, int in_w);
    void add_dropout(double rate);

    // Allocates and initializes parameters; call once after the layer plan.
    void init(bool bayesian, Rng& rng);

    bool bayesian() const { return bayesian_; }
    int weight_count() const { return weight_count_; }  // effective weights
    VectorXd& params() { return params_; }              // 2x weights if bayesian
    const VectorXd& params() const { return params_; }
    VectorXd& grads() { return grads_; }
    void zero_grads() { grads_.setZero(); }

    // x: batch x input_size. Returns logits (one output unit). In Bayesian
    // mode fresh weights are sampled from rng; dropout masks also come from
    // rng when training.
    VectorXd forward(const MatrixXd& x, bool training, Rng& rng);

    // dlogits = dLoss/dlogit per batch row; accumulates into grads().
    void backward(const VectorXd& dlogits);

    // KL(q || N(0,1)) summed over parameters; Bayesian mode only.
    double kl_divergence() const;
    void accumulate_kl_grad(double weight);

private:
    struct Layer {
        enum class Type { dense, relu, conv, maxpool2, dropout } type;
        int in = 0, out = 0;              // dense
        int in_ch = 0, out_ch = 0, k = 0; // conv
        int in_h = 0, in_w = 0;
        double rate = 0.0;                // dropout
        int param_offset = 0;
        int weight_size = 0;  // W elements (bias follows)
        int bias_size = 0;
        int fan_in = 0;
    };

    void sample_weights(Rng& rng);

    std::vector<Layer> layers_;
    bool bayesian_ = false;
    bool finalized_ = false;
    int weight_count_ = 0;
    VectorXd params_;
    VectorXd grads_;

    // Per-forward state kept for backward.
    VectorXd sampled_;  // effective weights used by the last forward
    VectorXd eps_;      // noise used to sample them (Bayesian)
    std::vector<MatrixXd> inputs_;        // input to each layer
    std::vector<MatrixXd> dropout_mask_;
    std::vector<std::vector<std::vector<int>>> pool_argmax_;  // [layer][batch]
};

// Adam with bias correction over a flat parameter vector.
class Adam {
public:
    Adam(int size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(VectorXd& params, const VectorXd& grads);

private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    VectorXd m_, v_;
};

// Numerically stable binary cross-entropy on logits; mean over the batch.
// Fills dlogits with the gradient.
double bce_with_logits(const VectorXd& logits, const VectorXd& targets, VectorXd& dlogits);

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace qdt::nn
