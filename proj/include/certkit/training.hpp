// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "certkit/io.hpp"
#include "certkit/smoothing.hpp"

#include <optional>
#include <span>
#include <vector>

namespace certkit {

/// Parameter gradient shaped like the network's affine layers.
struct NetworkGradient {
    std::vector<Matrix> weights;
    std::vector<Vector> bias;

    static NetworkGradient zeros_like(const Network& net);
};

struct LossAndGradient {
    double loss = 0.0;
    NetworkGradient gradient;
};

/// Mean cross-entropy over the batch and its parameter gradient.
LossAndGradient clean_loss(const Network& net, std::span<const LabeledSample> batch);

/// Mean of kappa * clean CE + (1 - kappa) * CE on the worst-case logits of
/// the eps-box (true class at 0, competitor y at minus its certified margin).
/// Interval selections are held fixed when differentiating. eps = 0 reduces
/// to the clean loss exactly.
LossAndGradient ibp_robust_loss(const Network& net, std::span<const LabeledSample> batch, double eps,
                                double kappa = 0.5);

enum class TrainMode { Standard, Ibp, Noise };

TrainMode parse_train_mode(std::string_view text);

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
    double eps_target = 0.0;
    double warmup_fraction = 0.5; // eps ramps linearly over this share of the steps
    double kappa = 0.5;
    std::optional<SmoothingDistribution> noise; // scale 0 disables the noise

    void validate() const;
};

struct TrainResult {
    Network network;
    std::vector<double> epoch_loss; // mean training objective per epoch
};

/// Mini-batch SGD (no momentum). The shuffle and the noise use separate
/// seed-derived streams.
TrainResult train(const Network& init, const std::vector<LabeledSample>& data, TrainMode mode,
                  const TrainConfig& config);

TrainResult train_standard(const Network& init, const std::vector<LabeledSample>& data, const TrainConfig& config);
TrainResult train_ibp(const Network& init, const std::vector<LabeledSample>& data, const TrainConfig& config);
TrainResult train_noise(const Network& init, const std::vector<LabeledSample>& data, const TrainConfig& config);

/// Epsilon used at optimisation step `step` of `total_steps`.
double scheduled_eps(const TrainConfig& config, std::size_t step, std::size_t total_steps);

} // namespace certkit
