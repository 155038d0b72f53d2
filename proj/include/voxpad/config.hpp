// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "voxpad/optim.hpp"
#include "voxpad/synth.hpp"
#include "voxpad/unet.hpp"

namespace voxpad {

//============================================================================
// Flat key = value run configuration. Lines of "key = value", '#' comments.
// Unknown keys are rejected. The resolved form (resolved_text) is printed by
// every run and embedded into checkpoints so evaluation rebuilds the model
// exactly.
//============================================================================

struct RunConfig {
    // dataset
    std::string task = "checker";
    int points = 20000;
    int test_points = 5000;
    double s_label = 0.125;
    double noise = 0.0;
    // grid
    double voxel_size = 0.25;
    Point3 origin{0.0, 0.0, 0.0};
    // network
    int levels = 3;
    std::vector<int> channels = {16, 24, 32};
    std::vector<int> resblocks = {1, 1, 1, 1};
    int s_out = 0;
    int head_hidden = 64;
    std::string feature_mode = "mean";
    std::string padding = "interp";
    std::string placement = "output";
    std::string interp = "strict";
    bool norm_include_padded = true;
    // optimization
    double lr = 0.1;
    double momentum = 0.9;
    int epochs = 8;
    int batch_clouds = 4;
    int points_per_cloud = 2000;
    std::string schedule = "step";
    std::uint64_t seed = 1;
    int precision = 32;

    SynthTask synth_task() const {
        SynthTask t;
        t.kind = parse_synth_kind(task);
        t.points = points;
        t.noise = noise;
        t.s_label = s_label;
        t.seed = seed;
        return t;
    }

    GridSpec grid_spec() const { return GridSpec(origin, voxel_size, 0); }

    int input_channels() const {
        if (feature_mode == "mean") return 4;  // 3 coordinate features + indicator
        if (feature_mode == "occupancy") return 2;
        throw InvalidInputError("RunConfig: feature_mode must be mean or occupancy");
    }

    UNetConfig unet_config() const {
        UNetConfig u;
        u.levels = levels;
        u.in_channels = input_channels();
        u.channels = channels;
        u.resblocks = resblocks;
        u.s_out = s_out;
        u.head_hidden = head_hidden;
        u.classes = synth_task().class_count();
        u.feature_mode = feature_mode == "mean" ? FeatureMode::Mean : FeatureMode::Occupancy;
        u.padding = parse_padding_scheme(padding);
        if (placement == "output")
            u.placement = PadPlacement::OutputLevelOnly;
        else if (placement == "all")
            u.placement = PadPlacement::AllLevels;
        else
            throw InvalidInputError("RunConfig: placement must be output or all");
        u.interp = parse_interp_mode(interp);
        u.norm_include_padded = norm_include_padded;
        u.validate();
        return u;
    }

    TrainConfig train_config() const {
        TrainConfig t;
        t.learning_rate = lr;
        t.momentum = momentum;
        t.epochs = epochs;
        t.batch_size = batch_clouds;
        if (schedule == "step")
            t.schedule = LrSchedule::StepDecay;
        else if (schedule == "constant")
            t.schedule = LrSchedule::Constant;
        else
            throw InvalidInputError("RunConfig: schedule must be step or constant");
        t.seed = seed;
        t.validate();
        return t;
    }

    void validate() const {
        if (points < 1 || test_points < 1) throw InvalidInputError("RunConfig: point counts must be >= 1");
        if (!(s_label > 0.0) || !(voxel_size > 0.0)) throw InvalidInputError("RunConfig: sizes must be > 0");
        if (points_per_cloud < 1) throw InvalidInputError("RunConfig: points_per_cloud must be >= 1");
        if (precision != 32 && precision != 64) throw InvalidInputError("RunConfig: precision must be 32 or 64");
        unet_config();
        train_config();
        synth_task();
    }

    void set(const std::string& key, const std::string& value);
    std::string resolved_text() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InvalidInputError("config: bad integer '" + item + "' in " + key);
        }
    }
    if (out.empty()) throw InvalidInputError("config: empty list for " + key);
    return out;
}

template <class T>
T parse_number(const std::string& s, const std::string& key) {
    try {
        size_t used = 0;
        if constexpr (std::is_same_v<T, double>) {
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            const unsigned long long v = std::stoull(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return std::uint64_t(v);
        } else {
            const long v = std::stol(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return T(v);
        }
    } catch (const std::exception&) {
        throw InvalidInputError("config: bad value '" + s + "' for " + key);
    }
}

inline bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw InvalidInputError("config: bad boolean '" + s + "' for " + key);
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format_int_list(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "task") task = value;
    else if (key == "points") points = parse_number<int>(value, key);
    else if (key == "test_points") test_points = parse_number<int>(value, key);
    else if (key == "s_label") s_label = parse_number<double>(value, key);
    else if (key == "noise") noise = parse_number<double>(value, key);
    else if (key == "voxel_size") voxel_size = parse_number<double>(value, key);
    else if (key == "origin_x") origin.x = parse_number<double>(value, key);
    else if (key == "origin_y") origin.y = parse_number<double>(value, key);
    else if (key == "origin_z") origin.z = parse_number<double>(value, key);
    else if (key == "levels") levels = parse_number<int>(value, key);
    else if (key == "channels") channels = parse_int_list(value, key);
    else if (key == "resblocks") resblocks = parse_int_list(value, key);
    else if (key == "s_out") s_out = parse_number<int>(value, key);
    else if (key == "head_hidden") head_hidden = parse_number<int>(value, key);
    else if (key == "feature_mode") feature_mode = value;
    else if (key == "padding") padding = value;
    else if (key == "placement") placement = value;
    else if (key == "interp") interp = value;
    else if (key == "norm_include_padded") norm_include_padded = parse_bool(value, key);
    else if (key == "lr") lr = parse_number<double>(value, key);
    else if (key == "momentum") momentum = parse_number<double>(value, key);
    else if (key == "epochs") epochs = parse_number<int>(value, key);
    else if (key == "batch_clouds") batch_clouds = parse_number<int>(value, key);
    else if (key == "points_per_cloud") points_per_cloud = parse_number<int>(value, key);
    else if (key == "schedule") schedule = value;
    else if (key == "seed") seed = parse_number<std::uint64_t>(value, key);
    else if (key == "precision") precision = parse_number<int>(value, key);
    else throw InvalidInputError("config: unknown key '" + key + "'");
}

inline std::string RunConfig::resolved_text() const {
    using namespace detail;
    std::string out;
    auto kv = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
    kv("task", task);
    kv("points", std::to_string(points));
    kv("test_points", std::to_string(test_points));
    kv("s_label", format_double(s_label));
    kv("noise", format_double(noise));
    kv("voxel_size", format_double(voxel_size));
    kv("origin_x", format_double(origin.x));
    kv("origin_y", format_double(origin.y));
    kv("origin_z", format_double(origin.z));
    kv("levels", std::to_string(levels));
    kv("channels", format_int_list(channels));
    kv("resblocks", format_int_list(resblocks));
    kv("s_out", std::to_string(s_out));
    kv("head_hidden", std::to_string(head_hidden));
    kv("feature_mode", feature_mode);
    kv("padding", padding);
    kv("placement", placement);
    kv("interp", interp);
    kv("norm_include_padded", norm_include_padded ? "1" : "0");
    kv("lr", format_double(lr));
    kv("momentum", format_double(momentum));
    kv("epochs", std::to_string(epochs));
    kv("batch_clouds", std::to_string(batch_clouds));
    kv("points_per_cloud", std::to_string(points_per_cloud));
    kv("schedule", schedule);
    kv("seed", std::to_string(seed));
    kv("precision", std::to_string(precision));
    return out;
}

// Applies "key = value" lines (also accepted: "key=value"); '#' starts a
// comment; blank lines are skipped.
inline void apply_config_text(RunConfig& cfg, std::istream& is, const std::string& what) {
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidInputError(what + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw InvalidInputError(what + ":" + std::to_string(lineno) + ": empty key or value");
        cfg.set(key, value);
    }
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidInputError("config: cannot open '" + path + "'");
    RunConfig cfg;
    apply_config_text(cfg, is, path);
    return cfg;
}

}  // namespace voxpad
