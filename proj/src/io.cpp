// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace certkit {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorKind::MissingFile, "no such file: " + path);
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
    out << contents;
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path);
}

const json& require(const json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw Error(ErrorKind::Format, std::string("model file: missing field '") + key + "'");
    }
    return obj.at(key);
}

double as_number(const json& value, const char* what) {
    if (!value.is_number()) throw Error(ErrorKind::Format, std::string("model file: non-numeric ") + what);
    return value.get<double>();
}

std::size_t as_count(const json& value, const char* what) {
    if (!value.is_number_unsigned()) {
        throw Error(ErrorKind::Format, std::string("model file: ") + what + " must be a positive integer");
    }
    return value.get<std::size_t>();
}

AffineLayer parse_affine(const json& layer, std::size_t index) {
    const json& rows = require(layer, "weights");
    const json& bias = require(layer, "bias");
    const std::string where = "layer " + std::to_string(index);
    if (!rows.is_array() || rows.empty() || !bias.is_array()) {
        throw Error(ErrorKind::MalformedDimensions, where + ": weights must be a non-empty matrix");
    }
    const std::size_t cols = rows.front().is_array() ? rows.front().size() : 0;
    if (cols == 0) throw Error(ErrorKind::MalformedDimensions, where + ": empty weight row");
    AffineLayer out{Matrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols)),
                    Vector(static_cast<Eigen::Index>(bias.size()))};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!rows[r].is_array() || rows[r].size() != cols) {
            throw Error(ErrorKind::MalformedDimensions,
                        where + ": weight row " + std::to_string(r) + " has " +
                            std::to_string(rows[r].size()) + " entries, expected " + std::to_string(cols));
        }
        for (std::size_t c = 0; c < cols; ++c) {
            out.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                as_number(rows[r][c], "weight");
        }
    }
    if (bias.size() != rows.size()) {
        throw Error(ErrorKind::MalformedDimensions, where + ": bias has " + std::to_string(bias.size()) +
                                                        " entries for " + std::to_string(rows.size()) +
                                                        " weight rows");
    }
    for (std::size_t r = 0; r < bias.size(); ++r) out.bias[static_cast<Eigen::Index>(r)] = as_number(bias[r], "bias");
    return out;
}

} // namespace

std::string network_to_json(const Network& net) {
    json doc;
    doc["version"] = kModelFormatVersion;
    doc["input_dim"] = net.input_dim();
    doc["num_classes"] = net.num_classes();
    json layers = json::array();
    for (std::size_t k = 0; k < net.depth(); ++k) {
        if (k > 0) layers.push_back({{"type", "relu"}});
        const auto& layer = net.affine(k);
        json rows = json::array();
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) row.push_back(layer.weights(r, c));
            rows.push_back(std::move(row));
        }
        json bias = json::array();
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) bias.push_back(layer.bias[r]);
        layers.push_back({{"type", "affine"}, {"weights", std::move(rows)}, {"bias", std::move(bias)}});
    }
    doc["layers"] = std::move(layers);
    return doc.dump() + "\n";
}

Network network_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Format, std::string("model file is not valid JSON: ") + e.what());
    }
    const json& version = require(doc, "version");
    if (!version.is_number_integer() || version.get<long long>() != kModelFormatVersion) {
        throw Error(ErrorKind::UnsupportedVersion, "unsupported model format version " + version.dump());
    }
    const std::size_t input_dim = as_count(require(doc, "input_dim"), "input_dim");
    const std::size_t num_classes = as_count(require(doc, "num_classes"), "num_classes");
    const json& layers = require(doc, "layers");
    if (!layers.is_array()) throw Error(ErrorKind::Format, "model file: 'layers' must be an array");

    std::vector<Layer> parsed;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const json& type = require(layers[i], "type");
        if (type == "affine") {
            parsed.emplace_back(parse_affine(layers[i], i));
        } else if (type == "relu") {
            parsed.emplace_back(ReluLayer{});
        } else {
            throw Error(ErrorKind::Format, "layer " + std::to_string(i) + ": unknown type " + type.dump());
        }
    }
    Network net(parsed);
    if (net.input_dim() != input_dim || net.num_classes() != num_classes) {
        throw Error(ErrorKind::MalformedDimensions,
                    "declared input_dim/num_classes (" + std::to_string(input_dim) + ", " +
                        std::to_string(num_classes) + ") disagree with the layers (" +
                        std::to_string(net.input_dim()) + ", " + std::to_string(net.num_classes()) + ")");
    }
    return net;
}

void save_network(const Network& net, const std::string& path) { write_file(path, network_to_json(net)); }

Network load_network(const std::string& path) { return network_from_json(read_file(path)); }

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    for (auto& f : fields) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    }
    return fields;
}

double parse_double(std::string_view field, std::size_t row) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw Error(ErrorKind::Format, "row " + std::to_string(row) + ": cannot parse '" +
                                           std::string(field) + "' as a number");
    }
    return value;
}

} // namespace

std::vector<LabeledSample> load_dataset(const std::string& path, std::optional<std::size_t> num_classes) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Format, "dataset " + path + " is empty");
    const auto header = split_fields(line);
    if (header.size() < 2 || header.front() != "label") {
        throw Error(ErrorKind::Format, "dataset header must be 'label,f0,...'");
    }
    for (std::size_t i = 1; i < header.size(); ++i) {
        if (header[i] != "f" + std::to_string(i - 1)) {
            throw Error(ErrorKind::Format, "dataset header column " + std::to_string(i) + " should be f" +
                                               std::to_string(i - 1));
        }
    }
    const std::size_t dim = header.size() - 1;

    std::vector<LabeledSample> samples;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        const auto fields = split_fields(line);
        if (fields.size() != dim + 1) {
            throw Error(ErrorKind::MalformedDimensions, "row " + std::to_string(row) + " has " +
                                                            std::to_string(fields.size()) + " fields, expected " +
                                                            std::to_string(dim + 1));
        }
        const double label = parse_double(fields[0], row);
        if (label < 0 || label != static_cast<double>(static_cast<long long>(label)) ||
            (num_classes && label >= static_cast<double>(*num_classes))) {
            throw Error(ErrorKind::Range, "row " + std::to_string(row) + ": label " +
                                              std::string(fields[0]) + " out of range");
        }
        LabeledSample sample{Vector(static_cast<Eigen::Index>(dim)), static_cast<int>(label)};
        for (std::size_t j = 0; j < dim; ++j) {
            const double v = parse_double(fields[j + 1], row);
            if (!(v >= 0.0 && v <= 1.0)) {
                throw Error(ErrorKind::Range, "row " + std::to_string(row) + ": feature f" + std::to_string(j) +
                                                  " = " + std::string(fields[j + 1]) + " outside [0,1]");
            }
            sample.x[static_cast<Eigen::Index>(j)] = v;
        }
        samples.push_back(std::move(sample));
    }
    return samples;
}

void save_dataset(const std::vector<LabeledSample>& samples, const std::string& path) {
    if (samples.empty()) throw Error(ErrorKind::InvalidArgument, "refusing to write an empty dataset");
    const auto dim = samples.front().x.size();
    std::string out = "label";
    for (Eigen::Index j = 0; j < dim; ++j) out += ",f" + std::to_string(j);
    out += "\n";
    char buf[32];
    for (const auto& s : samples) {
        out += std::to_string(s.y);
        for (Eigen::Index j = 0; j < dim; ++j) {
            std::snprintf(buf, sizeof buf, ",%.17g", s.x[j]);
            out += buf;
        }
        out += "\n";
    }
    write_file(path, out);
}

} // namespace certkit
