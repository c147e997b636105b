#include "qdt/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace qdt::nn {

namespace {

double softplus(double x) {
    return x > 30.0 ? x : std::log1p(std::exp(x));
}

}  // namespace

void Network::add_dense(int in, int out) {
    Layer l;
    l.type = Layer::Type::dense;
    l.in = in;
    l.out = out;
    l.weight_size = in * out;
    l.bias_size = out;
    l.fan_in = in;
    layers_.push_back(l);
}

void Network::add_relu() {
    Layer l;
    l.type = Layer::Type::relu;
    layers_.push_back(l);
}

void Network::add_conv(int in_ch, int out_ch, int kernel, int in_h, int in_w) {
    Layer l;
    l.type = Layer::Type::conv;
    l.in_ch = in_ch;
    l.out_ch = out_ch;
    l.k = kernel;
    l.in_h = in_h;
    l.in_w = in_w;
    l.weight_size = out_ch * in_ch * kernel * kernel;
    l.bias_size = out_ch;
    l.fan_in = in_ch * kernel * kernel;
    layers_.push_back(l);
}

void Network::add_maxpool2(int ch, int in_h, int in_w) {
    Layer l;
    l.type = Layer::Type::maxpool2;
    l.in_ch = ch;
    l.in_h = in_h;
    l.in_w = in_w;
    layers_.push_back(l);
}

void Network::add_dropout(double rate) {
    Layer l;
    l.type = Layer::Type::dropout;
    l.rate = rate;
    layers_.push_back(l);
}

void Network::init(bool bayesian, Rng& rng) {
    bayesian_ = bayesian;
    int offset = 0;
    for (auto& l : layers_) {
        l.param_offset = offset;
        offset += l.weight_size + l.bias_size;
    }
    weight_count_ = offset;
    params_.resize(bayesian_ ? 2 * offset : offset);
    grads_ = VectorXd::Zero(params_.size());
    sampled_.resize(offset);
    eps_ = VectorXd::Zero(offset);

    // Fan-in scaled uniform; Bayesian rho set for an initial std near 0.05.
    const double rho0 = std::log(std::exp(0.05) - 1.0);
    for (const auto& l : layers_) {
        if (l.weight_size == 0) continue;
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (int i = 0; i < l.weight_size + l.bias_size; ++i) {
            params_[l.param_offset + i] = dist(rng);
        }
    }
    if (bayesian_) params_.tail(offset).setConstant(rho0);
    finalized_ = true;
}

void Network::sample_weights(Rng& rng) {
    if (!bayesian_) {
        sampled_ = params_;
        return;
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < weight_count_; ++i) {
        eps_[i] = normal(rng);
        sampled_[i] = params_[i] + softplus(params_[weight_count_ + i]) * eps_[i];
    }
}

VectorXd Network::forward(const MatrixXd& x, bool training, Rng& rng) {
    if (!finalized_) throw std::logic_error("Network::init not called");
    sample_weights(rng);
    inputs_.assign(layers_.size(), {});
    dropout_mask_.assign(layers_.size(), {});
    pool_argmax_.assign(layers_.size(), {});

    MatrixXd a = x;
    const auto batch = x.rows();
    for (size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        inputs_[li] = a;
        switch (l.type) {
            case Layer::Type::dense: {
                Eigen::Map<const MatrixXd> w(sampled_.data() + l.param_offset, l.out, l.in);
                Eigen::Map<const VectorXd> b(sampled_.data() + l.param_offset + l.weight_size,
                                             l.out);
                a = (a * w.transpose()).rowwise() + b.transpose();
                break;
            }
            case Layer::Type::relu:
                a = a.cwiseMax(0.0);
                break;
            case Layer::Type::dropout: {
                if (training && l.rate > 0.0) {
                    std::bernoulli_distribution keep(1.0 - l.rate);
                    MatrixXd mask(a.rows(), a.cols());
                    for (Eigen::Index r = 0; r < mask.rows(); ++r)
                        for (Eigen::Index c = 0; c < mask.cols(); ++c)
                            mask(r, c) = keep(rng) ? 1.0 / (1.0 - l.rate) : 0.0;
                    dropout_mask_[li] = mask;
                    a = a.cwiseProduct(mask);
                }
                break;
            }
            case Layer::Type::conv: {
                const int out_h = l.in_h - l.k + 1;
                const int out_w = l.in_w - l.k + 1;
                const int cols_n = out_h * out_w;
                const int patch_n = l.in_ch * l.k * l.k;
                Eigen::Map<const MatrixXd> w(sampled_.data() + l.param_offset, l.out_ch,
                                             patch_n);
                Eigen::Map<const VectorXd> b(sampled_.data() + l.param_offset + l.weight_size,
                                             l.out_ch);
                MatrixXd out(batch, l.out_ch * out_h * out_w);
                MatrixXd cols(patch_n, cols_n);
                for (Eigen::Index s = 0; s < batch; ++s) {
                    // im2col: channel-major rows, spatial-major columns
                    for (int oy = 0; oy < out_h; ++oy) {
                        for (int ox = 0; ox < out_w; ++ox) {
                            const int col = oy * out_w + ox;
                            int row = 0;
                            for (int ch = 0; ch < l.in_ch; ++ch) {
                                const int base = ch * l.in_h * l.in_w;
                                for (int ky = 0; ky < l.k; ++ky)
                                    for (int kx = 0; kx < l.k; ++kx)
                                        cols(row++, col) =
                                            a(s, base + (oy + ky) * l.in_w + (ox + kx));
                            }
                        }
                    }
                    MatrixXd res = (w * cols).colwise() + b;  // out_ch x cols_n
                    for (int ch = 0; ch < l.out_ch; ++ch)
                        for (int c = 0; c < cols_n; ++c) out(s, ch * cols_n + c) = res(ch, c);
                }
                a = std::move(out);
                break;
            }
            case Layer::Type::maxpool2: {
                const int out_h = l.in_h / 2;
                const int out_w = l.in_w / 2;
                MatrixXd out(batch, l.in_ch * out_h * out_w);
                auto& argmax = pool_argmax_[li];
                argmax.assign(static_cast<size_t>(batch),
                              std::vector<int>(static_cast<size_t>(l.in_ch * out_h * out_w)));
                for (Eigen::Index s = 0; s < batch; ++s) {
                    for (int ch = 0; ch < l.in_ch; ++ch) {
                        const int base = ch * l.in_h * l.in_w;
                        for (int oy = 0; oy < out_h; ++oy) {
                            for (int ox = 0; ox < out_w; ++ox) {
                                int best = base + (2 * oy) * l.in_w + 2 * ox;
                                for (int dy = 0; dy < 2; ++dy)
                                    for (int dx = 0; dx < 2; ++dx) {
                                        const int idx =
                                            base + (2 * oy + dy) * l.in_w + (2 * ox + dx);
                                        if (a(s, idx) > a(s, best)) best = idx;
                                    }
                                const int o = ch * out_h * out_w + oy * out_w + ox;
                                out(s, o) = a(s, best);
                                argmax[static_cast<size_t>(s)][static_cast<size_t>(o)] = best;
                            }
                        }
                    }
                }
                a = std::move(out);
                break;
            }
        }
    }
    if (a.cols() != 1) throw std::logic_error("network must end with a single output unit");
    return a.col(0);
}

void Network::backward(const VectorXd& dlogits) {
    MatrixXd da = dlogits;
    VectorXd dw_all = VectorXd::Zero(weight_count_);
    const auto batch = dlogits.size();
    for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
        const Layer& l = layers_[static_cast<size_t>(li)];
        const MatrixXd& x = inputs_[static_cast<size_t>(li)];
        switch (l.type) {
            case Layer::Type::dense: {
                Eigen::Map<const MatrixXd> w(sampled_.data() + l.param_offset, l.out, l.in);
                Eigen::Map<MatrixXd> dw(dw_all.data() + l.param_offset, l.out, l.in);
                Eigen::Map<VectorXd> db(dw_all.data() + l.param_offset + l.weight_size, l.out);
                dw += da.transpose() * x;
                db += da.colwise().sum().transpose();
                da = da * w;
                break;
            }
            case Layer::Type::relu:
                da = da.cwiseProduct((x.array() > 0.0).cast<double>().matrix());
                break;
            case Layer::Type::dropout:
                if (dropout_mask_[static_cast<size_t>(li)].size() > 0)
                    da = da.cwiseProduct(dropout_mask_[static_cast<size_t>(li)]);
                break;
            case Layer::Type::conv: {
                const int out_h = l.in_h - l.k + 1;
                const int out_w = l.in_w - l.k + 1;
                const int cols_n = out_h * out_w;
                const int patch_n = l.in_ch * l.k * l.k;
                Eigen::Map<const MatrixXd> w(sampled_.data() + l.param_offset, l.out_ch,
                                             patch_n);
                Eigen::Map<MatrixXd> dw(dw_all.data() + l.param_offset, l.out_ch, patch_n);
                Eigen::Map<VectorXd> db(dw_all.data() + l.param_offset + l.weight_size,
                                        l.out_ch);
                MatrixXd dx(batch, l.in_ch * l.in_h * l.in_w);
                dx.setZero();
                MatrixXd cols(patch_n, cols_n);
                MatrixXd dres(l.out_ch, cols_n);
                for (Eigen::Index s = 0; s < batch; ++s) {
                    for (int oy = 0; oy < out_h; ++oy) {
                        for (int ox = 0; ox < out_w; ++ox) {
                            const int col = oy * out_w + ox;
                            int row = 0;
                            for (int ch = 0; ch < l.in_ch; ++ch) {
                                const int base = ch * l.in_h * l.in_w;
                                for (int ky = 0; ky < l.k; ++ky)
                                    for (int kx = 0; kx < l.k; ++kx)
                                        cols(row++, col) =
                                            x(s, base + (oy + ky) * l.in_w + (ox + kx));
                            }
                        }
                    }
                    for (int ch = 0; ch < l.out_ch; ++ch)
                        for (int c = 0; c < cols_n; ++c) dres(ch, c) = da(s, ch * cols_n + c);
                    dw += dres * cols.transpose();
                    db += dres.rowwise().sum();
                    const MatrixXd dcols = w.transpose() * dres;  // patch_n x cols_n
                    for (int oy = 0; oy < out_h; ++oy) {
                        for (int ox = 0; ox < out_w; ++ox) {
                            const int col = oy * out_w + ox;
                            int row = 0;
                            for (int ch = 0; ch < l.in_ch; ++ch) {
                                const int base = ch * l.in_h * l.in_w;
                                for (int ky = 0; ky < l.k; ++ky)
                                    for (int kx = 0; kx < l.k; ++kx)
                                        dx(s, base + (oy + ky) * l.in_w + (ox + kx)) +=
                                            dcols(row++, col);
                            }
                        }
                    }
                }
                da = std::move(dx);
                break;
            }
            case Layer::Type::maxpool2: {
                MatrixXd dx(batch, l.in_ch * l.in_h * l.in_w);
                dx.setZero();
                const auto& argmax = pool_argmax_[static_cast<size_t>(li)];
                for (Eigen::Index s = 0; s < batch; ++s)
                    for (Eigen::Index o = 0; o < da.cols(); ++o)
                        dx(s, argmax[static_cast<size_t>(s)][static_cast<size_t>(o)]) +=
                            da(s, o);
                da = std::move(dx);
                break;
            }
        }
    }
    if (!bayesian_) {
        grads_ += dw_all;
        return;
    }
    for (int i = 0; i < weight_count_; ++i) {
        const double rho = params_[weight_count_ + i];
        grads_[i] += dw_all[i];
        grads_[weight_count_ + i] += dw_all[i] * eps_[i] * sigmoid(rho);
    }
}

double Network::kl_divergence() const {
    if (!bayesian_) return 0.0;
    double kl = 0.0;
    for (int i = 0; i < weight_count_; ++i) {
        const double mu = params_[i];
        const double s = softplus(params_[weight_count_ + i]);
        kl += -std::log(s) + 0.5 * (s * s + mu * mu) - 0.5;
    }
    return kl;
}

void Network::accumulate_kl_grad(double weight) {
    if (!bayesian_) return;
    for (int i = 0; i < weight_count_; ++i) {
        const double mu = params_[i];
        const double rho = params_[weight_count_ + i];
        const double s = softplus(rho);
        grads_[i] += weight * mu;
        grads_[weight_count_ + i] += weight * (s - 1.0 / s) * sigmoid(rho);
    }
}

Adam::Adam(int size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_ = VectorXd::Zero(size);
    v_ = VectorXd::Zero(size);
}

void Adam::step(VectorXd& params, const VectorXd& grads) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grads;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grads.cwiseProduct(grads);
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    params -= (lr_ / c1) * m_.cwiseQuotient(((v_ / c2).cwiseSqrt().array() + eps_).matrix());
}

double bce_with_logits(const VectorXd& logits, const VectorXd& targets, VectorXd& dlogits) {
    const auto n = logits.size();
    dlogits.resize(n);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = logits[i];
        const double y = targets[i];
        loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        dlogits[i] = (sigmoid(z) - y) / static_cast<double>(n);
    }
    return loss / static_cast<double>(n);
}

}  // namespace qdt::nn
