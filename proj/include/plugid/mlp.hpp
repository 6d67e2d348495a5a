#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plugid/rng.hpp"

namespace plugid {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Two-layer feed-forward binary classifier: tanh hidden layer, two-way
// softmax output. Parameters flatten in the order (w1, b1, w2, b2),
// matrices row-major.
struct Network {
    MatrixRM w1;          // hidden_dim x input_dim
    Eigen::VectorXd b1;   // hidden_dim
    MatrixRM w2;          // 2 x hidden_dim
    Eigen::VectorXd b2;   // 2

    int input_dim() const { return static_cast<int>(w1.cols()); }
    int hidden_dim() const { return static_cast<int>(w1.rows()); }
    Eigen::Index parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }
};

inline Eigen::VectorXd flatten(const Network& net) {
    Eigen::VectorXd flat(net.parameter_count());
    Eigen::Index at = 0;
    std::copy(net.w1.data(), net.w1.data() + net.w1.size(), flat.data() + at);
    at += net.w1.size();
    std::copy(net.b1.data(), net.b1.data() + net.b1.size(), flat.data() + at);
    at += net.b1.size();
    std::copy(net.w2.data(), net.w2.data() + net.w2.size(), flat.data() + at);
    at += net.w2.size();
    std::copy(net.b2.data(), net.b2.data() + net.b2.size(), flat.data() + at);
    return flat;
}

inline Network unflatten(const Eigen::VectorXd& flat, int input_dim, int hidden_dim) {
    Network net;
    net.w1.resize(hidden_dim, input_dim);
    net.b1.resize(hidden_dim);
    net.w2.resize(2, hidden_dim);
    net.b2.resize(2);
    if (flat.size() != net.parameter_count()) {
        throw std::invalid_argument("unflatten: parameter count mismatch");
    }
    Eigen::Index at = 0;
    std::copy(flat.data() + at, flat.data() + at + net.w1.size(), net.w1.data());
    at += net.w1.size();
    std::copy(flat.data() + at, flat.data() + at + net.b1.size(), net.b1.data());
    at += net.b1.size();
    std::copy(flat.data() + at, flat.data() + at + net.w2.size(), net.w2.data());
    at += net.w2.size();
    std::copy(flat.data() + at, flat.data() + at + net.b2.size(), net.b2.data());
    return net;
}

// Glorot-uniform weights, zero biases, reproducible per seed.
inline Network init_network(int input_dim, int hidden_dim, std::uint64_t seed) {
    if (input_dim < 1 || hidden_dim < 1) {
        throw std::invalid_argument("init_network: dimensions must be >= 1");
    }
    Rng rng(seed);
    Network net;
    net.w1.resize(hidden_dim, input_dim);
    net.w2.resize(2, hidden_dim);
    const double lim1 = std::sqrt(6.0 / static_cast<double>(input_dim + hidden_dim));
    for (Eigen::Index k = 0; k < net.w1.size(); ++k) {
        net.w1.data()[k] = rng.uniform(-lim1, lim1);
    }
    const double lim2 = std::sqrt(6.0 / static_cast<double>(hidden_dim + 2));
    for (Eigen::Index k = 0; k < net.w2.size(); ++k) {
        net.w2.data()[k] = rng.uniform(-lim2, lim2);
    }
    net.b1 = Eigen::VectorXd::Zero(hidden_dim);
    net.b2 = Eigen::VectorXd::Zero(2);
    return net;
}

// Training batch: one column per sample; targets are the one-hot pair labels.
struct Batch {
    Eigen::MatrixXd inputs;   // input_dim x n
    Eigen::MatrixXd targets;  // 2 x n

    Eigen::Index size() const { return inputs.cols(); }
};

namespace detail {

// Loss (mean cross-entropy of the softmax outputs) and, when grad is given,
// its gradient in flat parameter order. Log-sum-exp keeps saturated logits
// finite. Works on plain matrices and on maps into a flat parameter vector.
template <typename W1, typename B1, typename W2, typename B2>
double mlp_eval(const W1& w1, const B1& b1, const W2& w2, const B2& b2, const Batch& batch,
                Eigen::VectorXd* grad) {
    const Eigen::Index n = batch.size();
    if (n == 0) {
        throw std::invalid_argument("mlp: empty batch");
    }
    if (batch.inputs.rows() != w1.cols()) {
        throw std::invalid_argument("mlp: input dimension mismatch: batch has " +
                                    std::to_string(batch.inputs.rows()) + ", network expects " +
                                    std::to_string(w1.cols()));
    }
    Eigen::MatrixXd hidden = ((w1 * batch.inputs).colwise() + b1).array().tanh().matrix();
    Eigen::MatrixXd logits = (w2 * hidden).colwise() + b2;

    Eigen::RowVectorXd peak = logits.colwise().maxCoeff();
    Eigen::MatrixXd expo = (logits.rowwise() - peak).array().exp().matrix();
    Eigen::RowVectorXd norm = expo.colwise().sum();
    const double loss =
        ((peak.array() + norm.array().log()) - (logits.array() * batch.targets.array()).colwise().sum())
            .mean();

    if (grad != nullptr) {
        Eigen::MatrixXd probs = expo.array().rowwise() / norm.array();
        Eigen::MatrixXd d_logits = (probs - batch.targets) / static_cast<double>(n);
        MatrixRM g_w2 = d_logits * hidden.transpose();
        Eigen::VectorXd g_b2 = d_logits.rowwise().sum();
        Eigen::MatrixXd d_hidden =
            (w2.transpose() * d_logits).cwiseProduct((1.0 - hidden.array().square()).matrix());
        MatrixRM g_w1 = d_hidden * batch.inputs.transpose();
        Eigen::VectorXd g_b1 = d_hidden.rowwise().sum();

        grad->resize(g_w1.size() + g_b1.size() + g_w2.size() + g_b2.size());
        Eigen::Index at = 0;
        std::copy(g_w1.data(), g_w1.data() + g_w1.size(), grad->data() + at);
        at += g_w1.size();
        std::copy(g_b1.data(), g_b1.data() + g_b1.size(), grad->data() + at);
        at += g_b1.size();
        std::copy(g_w2.data(), g_w2.data() + g_w2.size(), grad->data() + at);
        at += g_w2.size();
        std::copy(g_b2.data(), g_b2.data() + g_b2.size(), grad->data() + at);
    }
    return loss;
}

// Evaluation against a flat parameter vector without unpacking copies.
inline double mlp_eval_flat(const Eigen::VectorXd& params, int input_dim, int hidden_dim,
                            const Batch& batch, Eigen::VectorXd* grad) {
    const double* p = params.data();
    Eigen::Map<const MatrixRM> w1(p, hidden_dim, input_dim);
    p += static_cast<std::ptrdiff_t>(hidden_dim) * input_dim;
    Eigen::Map<const Eigen::VectorXd> b1(p, hidden_dim);
    p += hidden_dim;
    Eigen::Map<const MatrixRM> w2(p, 2, hidden_dim);
    p += 2 * hidden_dim;
    Eigen::Map<const Eigen::VectorXd> b2(p, 2);
    return mlp_eval(w1, b1, w2, b2, batch, grad);
}

}  // namespace detail

// Softmax pair score for one input. The two outputs are positive and sum to
// one up to rounding.
inline std::array<double, 2> forward(const Network& net, std::span<const double> x) {
    if (static_cast<Eigen::Index>(x.size()) != net.w1.cols()) {
        throw std::invalid_argument("forward: expected input of size " + std::to_string(net.w1.cols()) +
                                    ", got " + std::to_string(x.size()));
    }
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::VectorXd hidden = ((net.w1 * xv) + net.b1).array().tanh().matrix();
    Eigen::Vector2d logits = (net.w2 * hidden) + net.b2;
    const double peak = logits.maxCoeff();
    const double e0 = std::exp(logits[0] - peak);
    const double e1 = std::exp(logits[1] - peak);
    const double norm = e0 + e1;
    return {e0 / norm, e1 / norm};
}

// Mean cross-entropy and flat gradient over a batch.
inline std::pair<double, Eigen::VectorXd> loss_and_gradient(const Network& net, const Batch& batch) {
    Eigen::VectorXd grad;
    const double loss = detail::mlp_eval(net.w1, net.b1, net.w2, net.b2, batch, &grad);
    return {loss, std::move(grad)};
}

struct TrainOptions {
    int max_iterations = 200;
    int restarts = 1;                   // independent random initializations
    int patience = 20;                  // consecutive non-improving validation checks
    int eval_interval = 5;              // CG iterations between validation checks
    double validation_fraction = 0.30;  // building-based split, consumed by callers
    std::uint64_t seed = 0;
};

struct TrainOutcome {
    Network net;
    double validation_loss = std::numeric_limits<double>::infinity();
    std::vector<double> validation_history;  // every snapshot evaluated, all restarts
    int iterations = 0;                      // accepted CG steps across restarts
    int aborted_restarts = 0;                // restarts stopped by non-finite loss
};

// Polak-Ribiere conjugate gradient with backtracking Armijo line search,
// validation-based early stopping, and random restarts. Returns the weights
// of the best validation snapshot seen anywhere. The passed network is the
// first initialization; further restarts draw fresh seeded weights.
inline TrainOutcome train(const Network& initial, const Batch& train_set, const Batch& val_set,
                          const TrainOptions& opts) {
    if (train_set.size() == 0 || val_set.size() == 0) {
        throw std::invalid_argument("train: train and validation sets must be nonempty");
    }
    if (opts.patience < 1) {
        throw std::invalid_argument("train: patience must be >= 1");
    }
    const int input_dim = initial.input_dim();
    const int hidden_dim = initial.hidden_dim();
    const int reset_period = static_cast<int>(std::min<Eigen::Index>(initial.parameter_count(), 1 << 30));
    const double armijo_c = 1e-4;

    TrainOutcome outcome;

    for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
        Eigen::VectorXd params =
            restart == 0 ? flatten(initial)
                         : flatten(init_network(input_dim, hidden_dim, mix_seed(opts.seed, restart)));

        double best_val = detail::mlp_eval_flat(params, input_dim, hidden_dim, val_set, nullptr);
        Eigen::VectorXd best_params = params;
        outcome.validation_history.push_back(best_val);
        int stale = 0;
        bool aborted = false;

        Eigen::VectorXd grad;
        double loss = detail::mlp_eval_flat(params, input_dim, hidden_dim, train_set, &grad);
        Eigen::VectorXd direction = -grad;
        double grad_sq = grad.squaredNorm();
        double step = 1.0;

        for (int iter = 1; iter <= opts.max_iterations; ++iter) {
            if (!std::isfinite(loss)) {
                aborted = true;
                break;
            }
            if (grad_sq < 1e-24) {
                break;  // stationary
            }
            double slope = grad.dot(direction);
            if (slope >= 0.0) {  // not a descent direction: fall back to steepest descent
                direction = -grad;
                slope = -grad_sq;
            }

            step = std::min(step * 2.0, 4.0);
            Eigen::VectorXd trial;
            bool accepted = false;
            for (int halvings = 0; halvings < 60; ++halvings) {
                trial = params + step * direction;
                const double trial_loss =
                    detail::mlp_eval_flat(trial, input_dim, hidden_dim, train_set, nullptr);
                if (std::isfinite(trial_loss) && trial_loss <= loss + armijo_c * step * slope) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) {
                break;  // no admissible step along this direction
            }
            params.swap(trial);
            ++outcome.iterations;

            Eigen::VectorXd new_grad;
            loss = detail::mlp_eval_flat(params, input_dim, hidden_dim, train_set, &new_grad);
            if (!std::isfinite(loss)) {
                aborted = true;
                break;
            }

            // Polak-Ribiere with automatic reset: negative beta clamps to
            // steepest descent, as does every reset_period-th iteration
            double beta = new_grad.dot(new_grad - grad) / grad_sq;
            if (beta < 0.0 || iter % reset_period == 0) {
                beta = 0.0;
            }
            direction = -new_grad + beta * direction;
            grad = std::move(new_grad);
            grad_sq = grad.squaredNorm();

            if (iter % opts.eval_interval == 0) {
                const double val = detail::mlp_eval_flat(params, input_dim, hidden_dim, val_set, nullptr);
                outcome.validation_history.push_back(val);
                if (val < best_val) {
                    best_val = val;
                    best_params = params;
                    stale = 0;
                } else {
                    ++stale;
                }
                if (stale >= opts.patience) {
                    break;
                }
            }
        }

        if (aborted) {
            ++outcome.aborted_restarts;
        }
        if (best_val < outcome.validation_loss) {
            outcome.validation_loss = best_val;
            outcome.net = unflatten(best_params, input_dim, hidden_dim);
        }
    }

    if (outcome.net.w1.size() == 0) {
        // every restart diverged before producing a finite snapshot
        outcome.net = initial;
    }
    return outcome;
}

// Portable binary model container: 8-byte magic, u32 version, u64 input and
// hidden dims, then the flat parameter vector as row-major 64-bit
// little-endian floats.
inline constexpr char kNetworkMagic[8] = {'n', 'n', 'e', 't', 'b', 'i', 'n', '1'};

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; serialization assumes a little-endian host");

inline void save_network(const Network& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("save_network: cannot open '" + path + "' for writing");
    }
    out.write(kNetworkMagic, sizeof(kNetworkMagic));
    const std::uint32_t version = 1;
    const std::uint64_t input_dim = static_cast<std::uint64_t>(net.input_dim());
    const std::uint64_t hidden_dim = static_cast<std::uint64_t>(net.hidden_dim());
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&input_dim), sizeof(input_dim));
    out.write(reinterpret_cast<const char*>(&hidden_dim), sizeof(hidden_dim));
    const Eigen::VectorXd flat = flatten(net);
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(flat.size())));
    if (!out) {
        throw std::runtime_error("save_network: write failed for '" + path + "'");
    }
}

inline Network load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("load_network: cannot open '" + path + "'");
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || !std::equal(magic, magic + 8, kNetworkMagic)) {
        throw std::runtime_error("load_network: '" + path + "' is not a model file");
    }
    std::uint32_t version = 0;
    std::uint64_t input_dim = 0, hidden_dim = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&input_dim), sizeof(input_dim));
    in.read(reinterpret_cast<char*>(&hidden_dim), sizeof(hidden_dim));
    if (!in || version != 1) {
        throw std::runtime_error("load_network: unsupported version in '" + path + "'");
    }
    if (input_dim < 1 || hidden_dim < 1 || input_dim > (1u << 24) || hidden_dim > (1u << 24)) {
        throw std::runtime_error("load_network: implausible dimensions in '" + path + "'");
    }
    const Eigen::Index count = static_cast<Eigen::Index>(hidden_dim * input_dim + hidden_dim +
                                                         2 * hidden_dim + 2);
    Eigen::VectorXd flat(count);
    in.read(reinterpret_cast<char*>(flat.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(count)));
    if (!in || in.gcount() != static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(count))) {
        throw std::runtime_error("load_network: truncated model file '" + path + "'");
    }
    if (!flat.allFinite()) {
        throw std::runtime_error("load_network: non-finite weights in '" + path + "'");
    }
    return unflatten(flat, static_cast<int>(input_dim), static_cast<int>(hidden_dim));
}

}  // namespace plugid
