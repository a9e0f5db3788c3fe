// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "attnquant/calibrate.hpp"

namespace attnquant {

enum class ReportFormat { machine, human, csv };

ReportFormat report_format_from_string(const std::string& s);

/// Serialize a calibration report. The machine form is a flat
/// `key = value` tree with deterministic ordering and 17-significant-digit
/// numerics, and is the only form that parses back; human and csv are views.
std::string emit_report(const CalibrationReport& report, ReportFormat format);

CalibrationReport parse_machine_report(const std::string& text);

std::string emit_ablation(const std::vector<AblationRow>& rows, ReportFormat format);

}  // namespace attnquant
