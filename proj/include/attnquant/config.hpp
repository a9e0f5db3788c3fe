// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "attnquant/calibrate.hpp"

namespace attnquant {

/// Textual run configuration: one `key = value` per line, `#` comments,
/// unknown keys rejected. Keys mirror the owning structs (gen.*, hist.*,
/// kde.*, calib.*). Seeds come only from here or from flags, never from the
/// environment.
struct RunConfig {
    std::uint64_t seed = 0;

    std::string gen_what = "kact";  // kact | softmax | model | calib
    SyntheticSpec gen;
    std::size_t gen_sites = 4;
    // per-site regime/kind overrides for model generation, e.g.
    // "normal,bimodal,bimodal,normal"
    std::vector<std::string> gen_site_regimes;
    std::vector<std::string> gen_site_kinds;

    Detector detector = Detector::histogram;
    CalibrationConfig calib;

    std::string report_format = "machine";  // machine | human | csv

    void validate() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace attnquant
