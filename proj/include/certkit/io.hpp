// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "certkit/network.hpp"

#include <optional>
#include <string>
#include <vector>

namespace certkit {

inline constexpr int kModelFormatVersion = 1;

/// JSON model file:
/// {"version":1,"input_dim":n,"num_classes":C,
///  "layers":[{"type":"affine","weights":[[...]],"bias":[...]},{"type":"relu"},...]}
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

std::string network_to_json(const Network& net);
Network network_from_json(const std::string& text);

struct LabeledSample {
    Vector x;
    int y = 0;
};

/// CSV with header "label,f0,...,f{n-1}". Features must lie in [0,1]; labels
/// must be below `num_classes` when given. Errors name the offending row
/// (1-based, header excluded).
std::vector<LabeledSample> load_dataset(const std::string& path,
                                        std::optional<std::size_t> num_classes = std::nullopt);
void save_dataset(const std::vector<LabeledSample>& samples, const std::string& path);

} // namespace certkit
