// SPDX-License-Identifier: Apache-2.0
#include "attnquant/config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "attnquant/io.hpp"

namespace attnquant {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

template <typename T>
T parse_int(const std::string& key, const std::string& value) {
    T v{};
    const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size()) {
        throw ConfigError("invalid integer for " + key + ": " + value);
    }
    return v;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw ConfigError("");
        return v;
    } catch (...) {
        throw ConfigError("invalid number for " + key + ": " + value);
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("invalid boolean for " + key + ": " + value);
}

}  // namespace

void RunConfig::validate() const {
    if (gen_what != "kact" && gen_what != "softmax" && gen_what != "model" &&
        gen_what != "calib") {
        throw ConfigError("gen.what must be one of kact, softmax, model, calib");
    }
    if (report_format != "machine" && report_format != "human" && report_format != "csv") {
        throw ConfigError("report.format must be machine, human or csv");
    }
    if (gen.tokens_q == 0 || gen.tokens_k == 0 || gen.dim == 0 || gen.channels == 0) {
        throw ConfigError("generator dimensions must be positive");
    }
    if (!(gen.width > 0.0)) throw ConfigError("gen.width must be positive");
    if (gen.frac_positive < 0.0 || gen.frac_positive > 1.0) {
        throw ConfigError("gen.frac_positive must lie in [0, 1]");
    }
    if (gen_sites == 0) throw ConfigError("gen.sites must be positive");
    if (!gen_site_regimes.empty() && gen_site_regimes.size() != gen_sites) {
        throw ConfigError("gen.site_regimes must list one regime per site");
    }
    if (!gen_site_kinds.empty() && gen_site_kinds.size() != gen_sites) {
        throw ConfigError("gen.site_kinds must list one kind per site");
    }
    const HistogramConfig& h = calib.hist;
    if (h.n_bins < 1 || h.top_k < 1 || h.top_k > h.n_bins) {
        throw ConfigError("hist.top_k must be in [1, hist.n_bins]");
    }
    if (h.theta <= 0.0 || h.theta > 1.0) throw ConfigError("hist.theta must be in (0, 1]");
    if (h.eta <= 0.0 || h.eta >= 1.0) throw ConfigError("hist.eta must be in (0, 1)");
    const KdeConfig& k = calib.kde;
    if (k.grid_points < 8) throw ConfigError("kde.grid_points must be at least 8");
    if (k.min_height_frac <= 0.0 || k.min_height_frac >= 1.0 || k.min_separation_frac <= 0.0 ||
        k.min_separation_frac >= 1.0) {
        throw ConfigError("kde fractions must lie in (0, 1)");
    }
    calib.validate();
}

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line.erase(comment);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
        }

        if (key == "seed") {
            cfg.seed = parse_int<std::uint64_t>(key, value);
            cfg.gen.seed = cfg.seed;
        } else if (key == "gen.what") {
            cfg.gen_what = value;
        } else if (key == "gen.regime") {
            cfg.gen.regime = regime_from_string(value);
        } else if (key == "gen.kind") {
            cfg.gen.kind = attention_kind_from_string(value);
        } else if (key == "gen.tokens_q") {
            cfg.gen.tokens_q = parse_int<std::size_t>(key, value);
        } else if (key == "gen.tokens_k") {
            cfg.gen.tokens_k = parse_int<std::size_t>(key, value);
        } else if (key == "gen.dim") {
            cfg.gen.dim = parse_int<std::size_t>(key, value);
        } else if (key == "gen.channels") {
            cfg.gen.channels = parse_int<std::size_t>(key, value);
        } else if (key == "gen.center") {
            cfg.gen.center = parse_double(key, value);
        } else if (key == "gen.width") {
            cfg.gen.width = parse_double(key, value);
        } else if (key == "gen.frac_positive") {
            cfg.gen.frac_positive = parse_double(key, value);
        } else if (key == "gen.sites") {
            cfg.gen_sites = parse_int<std::size_t>(key, value);
        } else if (key == "gen.site_regimes") {
            cfg.gen_site_regimes = split_csv(value);
        } else if (key == "gen.site_kinds") {
            cfg.gen_site_kinds = split_csv(value);
        } else if (key == "detector") {
            cfg.detector = detector_from_string(value);
            cfg.calib.detector = cfg.detector;
        } else if (key == "hist.n_bins") {
            cfg.calib.hist.n_bins = parse_int<int>(key, value);
        } else if (key == "hist.top_k") {
            cfg.calib.hist.top_k = parse_int<int>(key, value);
        } else if (key == "hist.theta") {
            cfg.calib.hist.theta = parse_double(key, value);
        } else if (key == "hist.eta") {
            cfg.calib.hist.eta = parse_double(key, value);
        } else if (key == "kde.grid_points") {
            cfg.calib.kde.grid_points = parse_int<int>(key, value);
        } else if (key == "kde.min_height_frac") {
            cfg.calib.kde.min_height_frac = parse_double(key, value);
        } else if (key == "kde.min_separation_frac") {
            cfg.calib.kde.min_separation_frac = parse_double(key, value);
        } else if (key == "calib.weight_bits") {
            cfg.calib.weight_bits = parse_int<int>(key, value);
        } else if (key == "calib.act_bits") {
            cfg.calib.act_bits = parse_int<int>(key, value);
        } else if (key == "calib.tau_candidates") {
            cfg.calib.tau_candidates.clear();
            for (const std::string& t : split_csv(value)) {
                cfg.calib.tau_candidates.push_back(parse_int<int>(key, t));
            }
        } else if (key == "calib.scale_init") {
            cfg.calib.scale_init = scale_init_from_string(value);
        } else if (key == "calib.num_samples") {
            cfg.calib.num_samples = parse_int<std::size_t>(key, value);
        } else if (key == "calib.big_enabled") {
            cfg.calib.big_enabled = parse_bool(key, value);
        } else if (key == "calib.agq_enabled") {
            cfg.calib.agq_enabled = parse_bool(key, value);
        } else if (key == "calib.skip_first_last") {
            cfg.calib.skip_first_last = parse_bool(key, value);
        } else if (key == "calib.quantize_v_in_search") {
            cfg.calib.quantize_v_in_search = parse_bool(key, value);
        } else if (key == "report.format") {
            cfg.report_format = value;
        } else {
            throw ConfigError("unknown configuration key: " + key);
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return parse_run_config(read_file(path));
}

}  // namespace attnquant
