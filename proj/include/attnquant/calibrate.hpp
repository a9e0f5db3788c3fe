// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "attnquant/attention.hpp"
#include "attnquant/bimodal.hpp"
#include "attnquant/quant.hpp"
#include "attnquant/tensor.hpp"

namespace attnquant {

enum class ScaleInit : std::uint8_t { minmax = 0, mse_grid = 1 };
enum class Detector : std::uint8_t { histogram = 0, kde = 1, both = 2 };

const char* to_string(ScaleInit s);
const char* to_string(Detector d);
ScaleInit scale_init_from_string(const std::string& s);
Detector detector_from_string(const std::string& s);

struct CalibrationConfig {
    int weight_bits = 6;
    int act_bits = 6;
    std::vector<int> tau_candidates = {1, 2, 4};
    ScaleInit scale_init = ScaleInit::minmax;
    std::size_t num_samples = 32;
    bool big_enabled = true;
    bool agq_enabled = true;
    bool skip_first_last = true;
    // Whether the tau-search objective uses quantized values V; full
    // precision by default.
    bool quantize_v_in_search = false;
    Detector detector = Detector::histogram;
    HistogramConfig hist;
    KdeConfig kde;

    void validate() const;
};

/// One calibration sample: query-side inputs and the shared source sequence
/// feeding both key and value linears.
struct CalibSample {
    Tensor x_q;    // tokens_q x m
    Tensor x_src;  // tokens_k x m
};

/// Accumulated tau-search error per candidate. Per-sample contributions are
/// computed with that sample's own attention maximum as the scale, so the
/// sums are independent of sample order.
struct TauSearchState {
    std::map<int, double> errors;
    std::size_t samples_seen = 0;
};

/// Finalized quantizers for one attention site.
struct SiteQuant {
    AttentionKind kind = AttentionKind::self_attention;
    bool quantized = false;

    std::optional<BimodalVerdict> verdict_hist;
    std::optional<BimodalVerdict> verdict_kde;
    bool big_applied = false;
    SignFactor gamma;

    PerChannelUniformParams w_q, w_k, w_v;
    UniformParams q_act, k_act, v_act;

    bool use_agq = false;       // false: plain Log2 on the attention map
    AgqParams attn;             // tau == 1 when use_agq is false
    std::map<int, double> tau_errors;
};

struct QuantizedModel {
    std::vector<AttentionBlockParams> blocks;  // post-BIG
    std::vector<SiteQuant> sites;
    CalibrationConfig cfg;
};

struct SiteReport {
    std::size_t index = 0;
    AttentionKind kind = AttentionKind::self_attention;
    bool quantized = false;
    std::optional<BimodalVerdict> verdict_hist;
    std::optional<BimodalVerdict> verdict_kde;
    bool big_applied = false;
    double gamma_positive_fraction = 0.0;

    std::optional<UniformParams> q_act, k_act, v_act;
    std::string attn_quantizer = "none";  // none | log2 | agq
    double attn_scale = 0.0;
    int attn_tau = 0;
    std::vector<std::pair<int, double>> tau_errors;

    // measured on the calibration set
    double mse_wq = 0.0, mse_wk = 0.0, mse_wv = 0.0;
    double mse_q = 0.0, mse_k = 0.0, mse_v = 0.0, mse_attn = 0.0;
    double k_mse_pre_big = 0.0, k_mse_post_big = 0.0;
    double output_frob_err = 0.0;
};

struct CalibrationReport {
    CalibrationConfig cfg;
    std::size_t n_sites = 0;
    std::size_t samples_used = 0;
    std::size_t tokens_q = 0, tokens_k = 0;
    std::vector<SiteReport> sites;
    double output_frob_err = 0.0;
    double flops_ratio = 1.0;
    double storage_ratio = 1.0;
};

/// One calibration pass over the model: discriminate + sign-fold on the first
/// sample, per-sample scale statistics and tau-error accumulation, then final
/// scale/tau selection. Tau ties resolve to the smallest candidate.
std::pair<QuantizedModel, CalibrationReport> calibrate(
    const std::vector<AttentionBlockParams>& model, const std::vector<CalibSample>& calib,
    const CalibrationConfig& cfg);

struct TauSearchResult {
    int tau = 1;
    std::map<int, double> errors;
};

/// argmin over candidates of the summed output error |AV - A_tau V|_F^2 with
/// a fixed scale s_a. Ties resolve to the smallest tau.
TauSearchResult search_tau(const std::vector<Tensor>& attn_samples,
                           const std::vector<Tensor>& value_samples,
                           const std::vector<int>& candidates, int bits, float s_a);

/// Forward pass of one quantized site; unquantized sites pass through.
Tensor quantized_forward(const AttentionBlockParams& block, const SiteQuant& site,
                         const Tensor& x_q, const Tensor& x_src);

/// Fill the measured-error fields of the report from a replay of the
/// calibration data through the float and quantized paths.
void quant_error_report(const std::vector<AttentionBlockParams>& float_model,
                        const QuantizedModel& quantized, const std::vector<CalibSample>& data,
                        CalibrationReport& report);

/// Complete report for a quantized model over a data set: config echo, cost
/// estimates and all measured errors.
CalibrationReport build_report(const std::vector<AttentionBlockParams>& float_model,
                               const QuantizedModel& quantized,
                               const std::vector<CalibSample>& data);

struct CostEstimate {
    double flops_ratio = 1.0;
    double storage_ratio = 1.0;
};

/// Multiplication cost relative to float32: quantized multiplications are
/// weighted 1/8 (4-bit), 6/32 (6-bit) or 8/32 (8-bit); storage counts weight
/// matrix elements at their stored bit-width.
CostEstimate flops_storage_estimate(const std::vector<AttentionBlockParams>& model,
                                    int weight_bits, int act_bits, std::size_t tokens_q,
                                    std::size_t tokens_k,
                                    const std::vector<bool>& quantized_mask = {});

struct AblationRow {
    bool big = false;
    bool agq = false;
    double output_frob_err = 0.0;
};

/// 2x2 sweep over the two components; each row is a full calibration run.
std::vector<AblationRow> run_ablation(const std::vector<AttentionBlockParams>& model,
                                      const std::vector<CalibSample>& calib,
                                      const CalibrationConfig& base_cfg);

}  // namespace attnquant
