// SPDX-License-Identifier: Apache-2.0
#include "attnquant/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace attnquant {

const char* to_string(ScaleInit s) { return s == ScaleInit::minmax ? "minmax" : "mse_grid"; }

const char* to_string(Detector d) {
    switch (d) {
        case Detector::histogram: return "histogram";
        case Detector::kde: return "kde";
        case Detector::both: return "both";
    }
    return "histogram";
}

ScaleInit scale_init_from_string(const std::string& s) {
    if (s == "minmax") return ScaleInit::minmax;
    if (s == "mse_grid") return ScaleInit::mse_grid;
    throw ConfigError("unknown scale_init: " + s);
}

Detector detector_from_string(const std::string& s) {
    if (s == "histogram") return Detector::histogram;
    if (s == "kde") return Detector::kde;
    if (s == "both") return Detector::both;
    throw ConfigError("unknown detector: " + s);
}

void CalibrationConfig::validate() const {
    if (weight_bits < 2 || weight_bits > 8 || act_bits < 2 || act_bits > 8)
        throw ConfigError("calibration bit-widths must be in [2, 8]");
    if (num_samples == 0) throw ConfigError("num_samples must be positive");
    if (tau_candidates.empty()) throw ConfigError("tau_candidates must be nonempty");
    for (int t : tau_candidates) {
        if (t < 1 || (t & (t - 1)) != 0) throw ConfigError("tau candidates must be powers of two");
    }
}

namespace {

double tensor_mse(const Tensor& a, const Tensor& b) {
    return frobenius_sq(a, b) / static_cast<double>(a.size());
}

struct RunningRange {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void update(const Tensor& t) {
        const auto [l, h] = minmax(t);
        lo = std::min(lo, static_cast<double>(l));
        hi = std::max(hi, static_cast<double>(h));
    }
};

// Scale search over 100 shrink factors in [0.5, 1.0] of the observed range,
// minimizing summed quantization MSE on the stashed tensors.
UniformParams fit_mse_grid(const RunningRange& range, const std::vector<Tensor>& stash,
                           int bits) {
    UniformParams best = uniform_params_from_range(range.lo, range.hi, bits);
    double best_err = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 100; ++i) {
        const double f = 0.5 + 0.5 * static_cast<double>(i) / 99.0;
        const UniformParams p = uniform_params_from_range(range.lo * f, range.hi * f, bits);
        double err = 0.0;
        for (const Tensor& t : stash) err += frobenius_sq(t, uniform_dequant(uniform_quant(t, p), p));
        if (err < best_err) {
            best_err = err;
            best = p;
        }
    }
    return best;
}

UniformParams finalize_act_params(const CalibrationConfig& cfg, const RunningRange& range,
                                  const std::vector<Tensor>& stash) {
    if (cfg.scale_init == ScaleInit::mse_grid) return fit_mse_grid(range, stash, cfg.act_bits);
    return uniform_params_from_range(range.lo, range.hi, cfg.act_bits);
}

// Per-sample tau error with the sample's own attention maximum as scale;
// contributions are then independent of sample order.
void accumulate_tau_errors(TauSearchState& state, const Tensor& attn, const Tensor& values,
                           const std::vector<int>& candidates, int bits, float s_a) {
    const Tensor reference = matmul(attn, values);
    for (int tau : candidates) {
        const AgqParams p{s_a, bits, tau};
        const Tensor approx = agq_dequant(agq_quant(attn, p), p);
        state.errors[tau] += frobenius_sq(reference, matmul(approx, values));
    }
    ++state.samples_seen;
}

int pick_tau(const std::map<int, double>& errors) {
    int best = errors.begin()->first;
    double best_err = errors.begin()->second;
    for (const auto& [tau, err] : errors) {  // map iterates in ascending tau
        if (err < best_err) {
            best = tau;
            best_err = err;
        }
    }
    return best;
}

Tensor value_activations(const AttentionBlockParams& block, const Tensor& x_src) {
    return add_row_bias(matmul(x_src, block.w_v), block.b_v);
}

}  // namespace

std::pair<QuantizedModel, CalibrationReport> calibrate(
    const std::vector<AttentionBlockParams>& model, const std::vector<CalibSample>& calib,
    const CalibrationConfig& cfg) {
    cfg.validate();
    if (model.empty()) throw DomainError("calibrate: empty model");
    if (calib.empty()) throw DomainError("calibrate: empty calibration set");

    const std::size_t n_sites = model.size();
    QuantizedModel qm;
    qm.cfg = cfg;
    qm.blocks = model;
    qm.sites.resize(n_sites);

    const auto is_quantized = [&](std::size_t s) {
        return !cfg.skip_first_last || (s != 0 && s + 1 != n_sites);
    };

    // First sample: discriminate each site and fold the sign factor in.
    for (std::size_t s = 0; s < n_sites; ++s) {
        SiteQuant& site = qm.sites[s];
        site.kind = model[s].kind;
        site.quantized = is_quantized(s);

        const AttentionTaps taps = forward(qm.blocks[s], calib[0].x_q, calib[0].x_src,
                                           calib[0].x_src);
        bool bimodal = false;
        if (cfg.detector == Detector::histogram || cfg.detector == Detector::both) {
            const Histogram h = build_histogram(taps.k_act, cfg.hist.n_bins);
            site.verdict_hist = discriminate_histogram(h, cfg.hist);
            bimodal = site.verdict_hist->is_bimodal;
        }
        if (cfg.detector == Detector::kde || cfg.detector == Detector::both) {
            site.verdict_kde = discriminate_kde(taps.k_act, cfg.kde);
            if (cfg.detector == Detector::kde) bimodal = site.verdict_kde->is_bimodal;
        }

        if (site.quantized && cfg.big_enabled && bimodal) {
            site.gamma = compute_gamma(taps.k_act);
            qm.blocks[s] = apply_big(qm.blocks[s], site.gamma);
            site.big_applied = true;
        }
    }

    // Every sample: running ranges, optional stashes, tau errors.
    struct SiteState {
        RunningRange q, k, v;
        double s_a_max = 0.0;
        std::vector<Tensor> stash_q, stash_k, stash_v;
        TauSearchState tau_state;
    };
    std::vector<SiteState> states(n_sites);

    for (const CalibSample& sample : calib) {
        for (std::size_t s = 0; s < n_sites; ++s) {
            if (!qm.sites[s].quantized) continue;
            SiteState& st = states[s];
            const AttentionTaps taps = forward(qm.blocks[s], sample.x_q, sample.x_src,
                                               sample.x_src);
            const Tensor v_act = value_activations(qm.blocks[s], sample.x_src);

            st.q.update(taps.q_act);
            st.k.update(taps.k_act);
            st.v.update(v_act);
            if (cfg.scale_init == ScaleInit::mse_grid) {
                st.stash_q.push_back(taps.q_act);
                st.stash_k.push_back(taps.k_act);
                st.stash_v.push_back(v_act);
            }

            const float sample_max = minmax(taps.attn).second;
            st.s_a_max = std::max(st.s_a_max, static_cast<double>(sample_max));
            if (cfg.agq_enabled) {
                Tensor values = v_act;
                if (cfg.quantize_v_in_search) {
                    const auto [vl, vh] = minmax(v_act);
                    const UniformParams vp = uniform_params_from_range(vl, vh, cfg.act_bits);
                    values = uniform_dequant(uniform_quant(v_act, vp), vp);
                }
                accumulate_tau_errors(st.tau_state, taps.attn, values, cfg.tau_candidates,
                                      cfg.act_bits, sample_max);
            }
        }
    }

    // Finalize scales and pick tau.
    for (std::size_t s = 0; s < n_sites; ++s) {
        SiteQuant& site = qm.sites[s];
        if (!site.quantized) continue;
        SiteState& st = states[s];

        site.w_q = per_channel_params_from(qm.blocks[s].w_q, cfg.weight_bits);
        site.w_k = per_channel_params_from(qm.blocks[s].w_k, cfg.weight_bits);
        site.w_v = per_channel_params_from(qm.blocks[s].w_v, cfg.weight_bits);
        site.q_act = finalize_act_params(cfg, st.q, st.stash_q);
        site.k_act = finalize_act_params(cfg, st.k, st.stash_k);
        site.v_act = finalize_act_params(cfg, st.v, st.stash_v);

        site.use_agq = cfg.agq_enabled;
        site.attn.bits = cfg.act_bits;
        site.attn.scale = static_cast<float>(st.s_a_max);
        if (cfg.agq_enabled) {
            site.tau_errors = st.tau_state.errors;
            site.attn.tau = pick_tau(site.tau_errors);
        } else {
            site.attn.tau = 1;  // plain Log2
        }
    }

    CalibrationReport report = build_report(model, qm, calib);
    return {std::move(qm), std::move(report)};
}

CalibrationReport build_report(const std::vector<AttentionBlockParams>& float_model,
                               const QuantizedModel& quantized,
                               const std::vector<CalibSample>& data) {
    if (data.empty()) throw DomainError("build_report: empty data set");
    CalibrationReport report;
    report.cfg = quantized.cfg;
    report.n_sites = quantized.blocks.size();
    report.samples_used = data.size();
    report.tokens_q = data[0].x_q.rows();
    report.tokens_k = data[0].x_src.rows();

    std::vector<bool> mask(report.n_sites);
    for (std::size_t s = 0; s < report.n_sites; ++s) mask[s] = quantized.sites[s].quantized;
    const CostEstimate cost =
        flops_storage_estimate(float_model, report.cfg.weight_bits, report.cfg.act_bits,
                               report.tokens_q, report.tokens_k, mask);
    report.flops_ratio = cost.flops_ratio;
    report.storage_ratio = cost.storage_ratio;

    quant_error_report(float_model, quantized, data, report);
    return report;
}

TauSearchResult search_tau(const std::vector<Tensor>& attn_samples,
                           const std::vector<Tensor>& value_samples,
                           const std::vector<int>& candidates, int bits, float s_a) {
    if (attn_samples.empty()) throw DomainError("search_tau: empty sample list");
    if (attn_samples.size() != value_samples.size())
        throw ShapeError("search_tau: sample lists must pair up");
    if (candidates.empty()) throw DomainError("search_tau: no candidates");

    TauSearchResult result;
    for (int tau : candidates) result.errors[tau] = 0.0;
    for (std::size_t i = 0; i < attn_samples.size(); ++i) {
        const Tensor reference = matmul(attn_samples[i], value_samples[i]);
        for (int tau : candidates) {
            const AgqParams p{s_a, bits, tau};
            const Tensor approx = agq_dequant(agq_quant(attn_samples[i], p), p);
            result.errors[tau] += frobenius_sq(reference, matmul(approx, value_samples[i]));
        }
    }
    result.tau = pick_tau(result.errors);
    return result;
}

Tensor quantized_forward(const AttentionBlockParams& block, const SiteQuant& site,
                         const Tensor& x_q, const Tensor& x_src) {
    if (!site.quantized) return forward(block, x_q, x_src, x_src).output;

    const Tensor wq = per_channel_dequant(per_channel_quant(block.w_q, site.w_q), site.w_q);
    const Tensor wk = per_channel_dequant(per_channel_quant(block.w_k, site.w_k), site.w_k);
    const Tensor wv = per_channel_dequant(per_channel_quant(block.w_v, site.w_v), site.w_v);

    const Tensor q = add_row_bias(matmul(x_q, wq), block.b_q);
    const Tensor k = add_row_bias(matmul(x_src, wk), block.b_k);
    const Tensor v = add_row_bias(matmul(x_src, wv), block.b_v);

    const Tensor q_hat = uniform_dequant(uniform_quant(q, site.q_act), site.q_act);
    const Tensor k_hat = uniform_dequant(uniform_quant(k, site.k_act), site.k_act);
    const Tensor v_hat = uniform_dequant(uniform_quant(v, site.v_act), site.v_act);

    const float inv_sqrt_n = static_cast<float>(1.0 / std::sqrt(double(block.channels())));
    const Tensor attn = softmax_rows(scale(matmul(q_hat, transpose(k_hat)), inv_sqrt_n));
    const Tensor attn_hat = agq_dequant(agq_quant(attn, site.attn), site.attn);
    return matmul(attn_hat, v_hat);
}

void quant_error_report(const std::vector<AttentionBlockParams>& float_model,
                        const QuantizedModel& quantized, const std::vector<CalibSample>& data,
                        CalibrationReport& report) {
    if (float_model.size() != quantized.blocks.size())
        throw ShapeError("quant_error_report: model size mismatch");
    const CalibrationConfig& cfg = quantized.cfg;
    report.sites.assign(quantized.sites.size(), SiteReport{});
    report.output_frob_err = 0.0;

    for (std::size_t s = 0; s < quantized.sites.size(); ++s) {
        const SiteQuant& site = quantized.sites[s];
        const AttentionBlockParams& qblock = quantized.blocks[s];
        SiteReport& row = report.sites[s];
        row.index = s;
        row.kind = site.kind;
        row.quantized = site.quantized;
        row.verdict_hist = site.verdict_hist;
        row.verdict_kde = site.verdict_kde;
        row.big_applied = site.big_applied;
        row.gamma_positive_fraction = site.gamma.positive_fraction();

        if (!site.quantized) continue;
        row.q_act = site.q_act;
        row.k_act = site.k_act;
        row.v_act = site.v_act;
        row.attn_quantizer = site.use_agq ? "agq" : "log2";
        row.attn_scale = site.attn.scale;
        row.attn_tau = site.attn.tau;
        row.tau_errors.assign(site.tau_errors.begin(), site.tau_errors.end());

        row.mse_wq = tensor_mse(qblock.w_q,
                                per_channel_dequant(per_channel_quant(qblock.w_q, site.w_q),
                                                    site.w_q));
        row.mse_wk = tensor_mse(qblock.w_k,
                                per_channel_dequant(per_channel_quant(qblock.w_k, site.w_k),
                                                    site.w_k));
        row.mse_wv = tensor_mse(qblock.w_v,
                                per_channel_dequant(per_channel_quant(qblock.w_v, site.w_v),
                                                    site.w_v));

        // pre/post sign-fold key ranges over the whole calibration set
        RunningRange pre_range, post_range;
        for (const CalibSample& sample : data) {
            pre_range.update(forward(float_model[s], sample.x_q, sample.x_src,
                                     sample.x_src).k_act);
            post_range.update(forward(qblock, sample.x_q, sample.x_src, sample.x_src).k_act);
        }
        const UniformParams pre_p =
            uniform_params_from_range(pre_range.lo, pre_range.hi, cfg.act_bits);
        const UniformParams post_p =
            uniform_params_from_range(post_range.lo, post_range.hi, cfg.act_bits);

        double mse_q = 0.0, mse_k = 0.0, mse_v = 0.0, mse_attn = 0.0;
        double pre_mse = 0.0, post_mse = 0.0, out_err = 0.0;
        for (const CalibSample& sample : data) {
            const AttentionTaps ftaps = forward(float_model[s], sample.x_q, sample.x_src,
                                                sample.x_src);
            const AttentionTaps qtaps = forward(qblock, sample.x_q, sample.x_src, sample.x_src);
            const Tensor v_act = value_activations(qblock, sample.x_src);

            mse_q += tensor_mse(qtaps.q_act, uniform_dequant(uniform_quant(qtaps.q_act,
                                                                           site.q_act),
                                                             site.q_act));
            mse_k += tensor_mse(qtaps.k_act, uniform_dequant(uniform_quant(qtaps.k_act,
                                                                           site.k_act),
                                                             site.k_act));
            mse_v += tensor_mse(v_act, uniform_dequant(uniform_quant(v_act, site.v_act),
                                                       site.v_act));
            mse_attn += tensor_mse(qtaps.attn, agq_dequant(agq_quant(qtaps.attn, site.attn),
                                                           site.attn));

            pre_mse += tensor_mse(ftaps.k_act,
                                  uniform_dequant(uniform_quant(ftaps.k_act, pre_p), pre_p));
            post_mse += tensor_mse(qtaps.k_act,
                                   uniform_dequant(uniform_quant(qtaps.k_act, post_p), post_p));

            out_err += frobenius_sq(ftaps.output,
                                    quantized_forward(qblock, site, sample.x_q, sample.x_src));
        }
        const double n = static_cast<double>(data.size());
        row.mse_q = mse_q / n;
        row.mse_k = mse_k / n;
        row.mse_v = mse_v / n;
        row.mse_attn = mse_attn / n;
        row.k_mse_pre_big = pre_mse / n;
        row.k_mse_post_big = post_mse / n;
        row.output_frob_err = out_err;
        report.output_frob_err += out_err;
    }
}

CostEstimate flops_storage_estimate(const std::vector<AttentionBlockParams>& model,
                                    int weight_bits, int act_bits, std::size_t tokens_q,
                                    std::size_t tokens_k, const std::vector<bool>& quantized_mask) {
    const auto factor = [](int bits) -> double {
        switch (bits) {
            case 4: return 1.0 / 8.0;
            case 6: return 6.0 / 32.0;
            case 8: return 8.0 / 32.0;
            case 32: return 1.0;
        }
        throw DomainError("unsupported bit-width for cost estimate");
    };
    const double wf = factor(weight_bits), af = factor(act_bits);

    double mults = 0.0, weighted = 0.0, weight_bits_total = 0.0, weight_elems = 0.0;
    for (std::size_t s = 0; s < model.size(); ++s) {
        const bool quantize = quantized_mask.empty() || quantized_mask[s];
        const double m = static_cast<double>(model[s].dim());
        const double n = static_cast<double>(model[s].channels());
        const double tq = static_cast<double>(tokens_q), tk = static_cast<double>(tokens_k);

        const double linear = (tq + 2.0 * tk) * m * n;  // query, key, value linears
        const double attn = 2.0 * tq * tk * n;          // QK^T and AV
        mults += linear + attn;
        weighted += quantize ? linear * wf + attn * af : linear + attn;

        const double elems = 3.0 * m * n;
        weight_elems += elems;
        weight_bits_total += elems * (quantize ? weight_bits : 32);
    }
    if (mults == 0.0 || weight_elems == 0.0) throw DomainError("cost estimate: empty model");

    CostEstimate e;
    e.flops_ratio = weighted / mults;
    e.storage_ratio = weight_bits_total / (weight_elems * 32.0);
    return e;
}

std::vector<AblationRow> run_ablation(const std::vector<AttentionBlockParams>& model,
                                      const std::vector<CalibSample>& calib,
                                      const CalibrationConfig& base_cfg) {
    std::vector<AblationRow> rows;
    for (const bool big : {false, true}) {
        for (const bool agq : {false, true}) {
            CalibrationConfig cfg = base_cfg;
            cfg.big_enabled = big;
            cfg.agq_enabled = agq;
            const auto [qm, report] = calibrate(model, calib, cfg);
            (void)qm;
            rows.push_back({big, agq, report.output_frob_err});
        }
    }
    return rows;
}

}  // namespace attnquant
