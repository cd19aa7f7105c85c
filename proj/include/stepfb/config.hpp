#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "stepfb/errors.hpp"
#include "stepfb/fileio.hpp"
#include "stepfb/harness.hpp"

namespace stepfb {

// Flat `key = value` configuration files mirroring SimConfig. Every key has
// exactly one CLI flag of the same name (underscores become dashes); unknown
// keys are rejected. '#' starts a comment.

inline std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        if (item.empty()) throw ParameterError("empty entry in list: " + text);
        out.push_back(parse_double(item));
    }
    return out;
}

// `lo:step:hi` (inclusive) or a single value.
inline std::vector<double> parse_range(const std::string& text) {
    const auto c1 = text.find(':');
    if (c1 == std::string::npos) return {parse_double(text)};
    const auto c2 = text.find(':', c1 + 1);
    if (c2 == std::string::npos) throw ParameterError("range must be lo:step:hi, got " + text);
    const double lo = parse_double(text.substr(0, c1));
    const double step = parse_double(text.substr(c1 + 1, c2 - c1 - 1));
    const double hi = parse_double(text.substr(c2 + 1));
    if (!(step > 0.0)) throw ParameterError("range step must be positive");
    if (hi < lo) throw ParameterError("range hi must be >= lo");
    std::vector<double> out;
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) out.push_back(lo + step * static_cast<double>(i));
    return out;
}

inline Modulation parse_modulation(const std::string& name, double symbol_power) {
    if (name == "bpsk") return {ModScheme::Bpsk, symbol_power};
    if (name == "qpsk") return {ModScheme::QpskGray, symbol_power};
    throw ParameterError("unknown modulation: " + name + " (want bpsk or qpsk)");
}

inline bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ParameterError("bad boolean value: " + v);
}

// Applies one key to the config. Returns false for keys it does not know.
inline bool apply_config_key(SimConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "n_t")
        cfg.n_t = parse_u64(value);
    else if (key == "n_r")
        cfg.n_r = parse_u64(value);
    else if (key == "modulation")
        cfg.modulation = parse_modulation(value, cfg.modulation.symbol_power);
    else if (key == "symbol_power")
        cfg.modulation.symbol_power = parse_double(value);
    else if (key == "zeta")
        cfg.zeta_list = parse_double_list(value);
    else if (key == "tnr_db")
        cfg.tnr_grid_db = parse_range(value);
    else if (key == "trials")
        cfg.trials_per_point = parse_u64(value);
    else if (key == "max_iters")
        cfg.max_iters = static_cast<std::uint32_t>(parse_u64(value));
    else if (key == "bits")
        cfg.quantizer_bits = static_cast<unsigned>(parse_u64(value));
    else if (key == "seed")
        cfg.master_seed = parse_u64(value);
    else if (key == "interrupt")
        cfg.interrupt_mode = parse_bool(value);
    else if (key == "block_symbols")
        cfg.block_symbols = parse_u64(value);
    else if (key == "training_factor")
        cfg.training_factor = parse_u64(value);
    else if (key == "training_kind") {
        if (value == "gaussian")
            cfg.training_kind = TrainingKind::GaussianWhite;
        else if (value == "pn")
            cfg.training_kind = TrainingKind::PnSequence;
        else
            throw ParameterError("unknown training_kind: " + value + " (want gaussian or pn)");
    } else if (key == "h0_init") {
        if (value == "zero")
            cfg.h0_init = HInitMode::Zero;
        else if (value == "previous")
            cfg.h0_init = HInitMode::PreviousEpoch;
        else
            throw ParameterError("unknown h0_init: " + value + " (want zero or previous)");
    } else if (key == "threads")
        cfg.threads = static_cast<unsigned>(parse_u64(value));
    else
        return false;
    return true;
}

// Parses a config file into cfg; `out_path`, when present in the file, is
// returned through out_path (empty = not set).
inline void load_config_file(const std::string& path, SimConfig& cfg, std::string* out_path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ParameterError(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key == "out") {
            if (out_path) *out_path = value;
            continue;
        }
        if (!apply_config_key(cfg, key, value))
            throw ParameterError(path + ":" + std::to_string(lineno) + ": unknown key " + key);
    }
}

// The four standard experimental situations.
inline SimConfig preset_config(const std::string& name) {
    SimConfig cfg;
    cfg.zeta_list = {0.1, 0.3, 0.5};
    cfg.tnr_grid_db = parse_range("0:2:20");
    if (name == "bpsk-nt2") {
        cfg.modulation.scheme = ModScheme::Bpsk;
        cfg.n_t = 2;
    } else if (name == "bpsk-nt3") {
        cfg.modulation.scheme = ModScheme::Bpsk;
        cfg.n_t = 3;
    } else if (name == "qpsk-nt2") {
        cfg.modulation.scheme = ModScheme::QpskGray;
        cfg.n_t = 2;
    } else if (name == "qpsk-nt3") {
        cfg.modulation.scheme = ModScheme::QpskGray;
        cfg.n_t = 3;
    } else {
        throw ParameterError("unknown preset: " + name +
                             " (want bpsk-nt2, bpsk-nt3, qpsk-nt2 or qpsk-nt3)");
    }
    return cfg;
}

}  // namespace stepfb
