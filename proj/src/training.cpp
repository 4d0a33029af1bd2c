// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/training.hpp"

#include "certkit/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace certkit {

NetworkGradient NetworkGradient::zeros_like(const Network& net) {
    NetworkGradient g;
    for (const AffineLayer& layer : net.affine_layers()) {
        g.weights.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
        g.bias.push_back(Vector::Zero(layer.bias.size()));
    }
    return g;
}

namespace {

void check_batch(const Network& net, std::span<const LabeledSample> batch) {
    if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "empty batch");
    for (const LabeledSample& s : batch) {
        if (static_cast<std::size_t>(s.x.size()) != net.input_dim()) {
            throw Error(ErrorKind::DimensionMismatch, "sample dimension does not match the network");
        }
        if (s.y < 0 || static_cast<std::size_t>(s.y) >= net.num_classes()) {
            throw Error(ErrorKind::InvalidArgument, "label out of range");
        }
    }
}

// Accumulates scale * d(CE)/d(params) for one sample; returns CE.
double clean_sample(const Network& net, const LabeledSample& s, double scale, NetworkGradient& g) {
    const std::vector<Vector> pre = forward_trace(net, s.x);
    Vector grad;
    const double loss = cross_entropy(pre.back(), s.y, &grad);
    grad *= scale;
    for (std::size_t k = net.depth(); k-- > 0;) {
        const Vector input = k == 0 ? s.x : Vector(pre[k - 1].cwiseMax(0.0));
        g.weights[k].noalias() += grad * input.transpose();
        g.bias[k] += grad;
        if (k == 0) break;
        Vector back = net.affine(k).weights.transpose() * grad;
        for (Eigen::Index i = 0; i < back.size(); ++i) {
            if (!(pre[k - 1][i] > 0.0)) back[i] = 0.0;
        }
        grad = std::move(back);
    }
    return loss;
}

// Accumulates scale * d(robust CE)/d(params) for one sample; returns the
// robust CE.
double robust_sample(const Network& net, const LabeledSample& s, double eps, double scale, NetworkGradient& g) {
    const std::size_t hidden = net.num_hidden_layers();
    // centers[k] / radii[k]: input box of affine layer k.
    std::vector<Vector> centers{s.x};
    std::vector<Vector> radii{Vector::Constant(s.x.size(), eps)};
    std::vector<Vector> lowers;
    std::vector<Vector> uppers;
    for (std::size_t k = 0; k < hidden; ++k) {
        const AffineLayer& layer = net.affine(k);
        const Vector mu = layer.weights * centers[k] + layer.bias;
        const Vector r = layer.weights.cwiseAbs() * radii[k];
        lowers.push_back(mu - r);
        uppers.push_back(mu + r);
        const Vector lo = lowers.back().cwiseMax(0.0);
        const Vector hi = uppers.back().cwiseMax(0.0);
        centers.push_back(0.5 * (hi + lo));
        radii.push_back(0.5 * (hi - lo));
    }

    const AffineLayer& last = net.affine(hidden);
    const Eigen::Index classes = last.weights.rows();
    const int y = s.y;
    const Vector& mu = centers[hidden];
    const Vector& rad = radii[hidden];
    Vector worst = Vector::Zero(classes);
    for (Eigen::Index c = 0; c < classes; ++c) {
        if (c == y) continue;
        const Vector diff = (last.weights.row(y) - last.weights.row(c)).transpose();
        const double margin = diff.dot(mu) - diff.cwiseAbs().dot(rad) + last.bias[y] - last.bias[c];
        worst[c] = -margin;
    }
    Vector dworst;
    const double loss = cross_entropy(worst, y, &dworst);
    dworst *= scale;

    Vector dmu = Vector::Zero(mu.size());
    Vector drad = Vector::Zero(rad.size());
    for (Eigen::Index c = 0; c < classes; ++c) {
        if (c == y) continue;
        const double dmargin = -dworst[c];
        const Vector diff = (last.weights.row(y) - last.weights.row(c)).transpose();
        const Vector sign = diff.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
        dmu += dmargin * diff;
        drad -= dmargin * diff.cwiseAbs();
        const Vector ddiff = dmargin * (mu - sign.cwiseProduct(rad));
        g.weights[hidden].row(y) += ddiff.transpose();
        g.weights[hidden].row(c) -= ddiff.transpose();
        g.bias[hidden][y] += dmargin;
        g.bias[hidden][c] -= dmargin;
    }

    for (std::size_t k = hidden; k-- > 0;) {
        const AffineLayer& layer = net.affine(k);
        // Through relu on the bounds.
        Vector dhi = 0.5 * (dmu + drad);
        Vector dlo = 0.5 * (dmu - drad);
        for (Eigen::Index i = 0; i < dhi.size(); ++i) {
            if (!(uppers[k][i] > 0.0)) dhi[i] = 0.0;
            if (!(lowers[k][i] > 0.0)) dlo[i] = 0.0;
        }
        const Vector dpre_mu = dhi + dlo;
        const Vector dpre_rad = dhi - dlo;
        const Matrix sign = layer.weights.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
        g.weights[k].noalias() += dpre_mu * centers[k].transpose();
        g.weights[k] += (dpre_rad * radii[k].transpose()).cwiseProduct(sign);
        g.bias[k] += dpre_mu;
        if (k == 0) break;
        dmu = layer.weights.transpose() * dpre_mu;
        drad = layer.weights.cwiseAbs().transpose() * dpre_rad;
    }
    return loss;
}

} // namespace

LossAndGradient clean_loss(const Network& net, std::span<const LabeledSample> batch) {
    check_batch(net, batch);
    LossAndGradient out{0.0, NetworkGradient::zeros_like(net)};
    const double scale = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const LabeledSample& s : batch) total += clean_sample(net, s, scale, out.gradient);
    out.loss = total / static_cast<double>(batch.size());
    return out;
}

LossAndGradient ibp_robust_loss(const Network& net, std::span<const LabeledSample> batch, double eps, double kappa) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw Error(ErrorKind::InvalidArgument, "eps must be non-negative");
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw Error(ErrorKind::Range, "kappa must lie in [0, 1]");
    if (eps == 0.0) return clean_loss(net, batch);
    check_batch(net, batch);
    LossAndGradient out{0.0, NetworkGradient::zeros_like(net)};
    const double scale = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const LabeledSample& s : batch) {
        if (kappa > 0.0) total += kappa * clean_sample(net, s, kappa * scale, out.gradient);
        if (kappa < 1.0) total += (1.0 - kappa) * robust_sample(net, s, eps, (1.0 - kappa) * scale, out.gradient);
    }
    out.loss = total / static_cast<double>(batch.size());
    return out;
}

TrainMode parse_train_mode(std::string_view text) {
    if (text == "standard") return TrainMode::Standard;
    if (text == "ibp") return TrainMode::Ibp;
    if (text == "noise") return TrainMode::Noise;
    throw Error(ErrorKind::InvalidArgument, "unknown training mode '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
    if (epochs == 0) throw Error(ErrorKind::InvalidArgument, "epochs must be positive");
    if (batch_size == 0) throw Error(ErrorKind::InvalidArgument, "batch size must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw Error(ErrorKind::InvalidArgument, "learning rate must be positive");
    }
    if (!(eps_target >= 0.0) || !std::isfinite(eps_target)) {
        throw Error(ErrorKind::InvalidArgument, "eps must be non-negative");
    }
    if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
        throw Error(ErrorKind::Range, "warmup fraction must lie in [0, 1]");
    }
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw Error(ErrorKind::Range, "kappa must lie in [0, 1]");
    if (noise && (!(noise->scale >= 0.0) || !std::isfinite(noise->scale))) {
        throw Error(ErrorKind::InvalidArgument, "noise scale must be non-negative");
    }
}

double scheduled_eps(const TrainConfig& config, std::size_t step, std::size_t total_steps) {
    const double warm = config.warmup_fraction * static_cast<double>(total_steps);
    if (warm <= 0.0) return config.eps_target;
    return config.eps_target * std::min(1.0, static_cast<double>(step + 1) / warm);
}

TrainResult train(const Network& init, const std::vector<LabeledSample>& data, TrainMode mode,
                  const TrainConfig& config) {
    config.validate();
    check_batch(init, data);
    if (mode == TrainMode::Noise && !config.noise) {
        throw Error(ErrorKind::InvalidArgument, "noise training needs a noise distribution");
    }
    std::vector<AffineLayer> layers = init.affine_layers();
    std::mt19937_64 shuffle_rng(derive_seed(config.seed, {1}));
    std::mt19937_64 noise_rng(derive_seed(config.seed, {2}));

    const std::size_t n = data.size();
    const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;
    const std::size_t total_steps = config.epochs * batches;
    std::vector<std::size_t> order(n);
    std::vector<LabeledSample> batch;
    TrainResult result{init, {}};
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_total = 0.0;
        for (std::size_t b = 0; b < batches; ++b, ++step) {
            const Network current(layers);
            batch.clear();
            for (std::size_t i = b * config.batch_size; i < std::min(n, (b + 1) * config.batch_size); ++i) {
                LabeledSample s = data[order[i]];
                if (mode == TrainMode::Noise && config.noise->scale > 0.0) {
                    for (Eigen::Index j = 0; j < s.x.size(); ++j) s.x[j] += config.noise->draw(noise_rng);
                }
                batch.push_back(std::move(s));
            }
            const LossAndGradient lg = mode == TrainMode::Ibp
                                           ? ibp_robust_loss(current, batch,
                                                             scheduled_eps(config, step, total_steps), config.kappa)
                                           : clean_loss(current, batch);
            epoch_total += lg.loss * static_cast<double>(batch.size());
            for (std::size_t k = 0; k < layers.size(); ++k) {
                layers[k].weights -= config.learning_rate * lg.gradient.weights[k];
                layers[k].bias -= config.learning_rate * lg.gradient.bias[k];
            }
        }
        result.epoch_loss.push_back(epoch_total / static_cast<double>(n));
    }
    result.network = Network(std::move(layers));
    return result;
}

TrainResult train_standard(const Network& init, const std::vector<LabeledSample>& data, const TrainConfig& config) {
    return train(init, data, TrainMode::Standard, config);
}

TrainResult train_ibp(const Network& init, const std::vector<LabeledSample>& data, const TrainConfig& config) {
    return train(init, data, TrainMode::Ibp, config);
}

TrainResult train_noise(const Network& init, const std::vector<LabeledSample>& data, const TrainConfig& config) {
    return train(init, data, TrainMode::Noise, config);
}

} // namespace certkit
