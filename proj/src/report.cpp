// SPDX-License-Identifier: Apache-2.0
#include "attnquant/report.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <iomanip>
#include <map>
#include <sstream>

namespace attnquant {

namespace {

std::string num17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const char* bstr(bool b) { return b ? "true" : "false"; }

class TreeWriter {
public:
    void kv(const std::string& key, const std::string& value) {
        out_ += key;
        out_ += " = ";
        out_ += value;
        out_ += '\n';
    }
    void kv(const std::string& key, double value) { kv(key, num17(value)); }
    void kv(const std::string& key, std::size_t value) { kv(key, std::to_string(value)); }
    void kv(const std::string& key, int value) { kv(key, std::to_string(value)); }
    void kv(const std::string& key, bool value) { kv(key, std::string(bstr(value))); }

    std::string str() && { return std::move(out_); }

private:
    std::string out_;
};

void emit_verdict(TreeWriter& w, const std::string& prefix, const BimodalVerdict& v) {
    w.kv(prefix + ".is_bimodal", v.is_bimodal);
    w.kv(prefix + ".center_neg", v.center_neg);
    w.kv(prefix + ".center_pos", v.center_pos);
    w.kv(prefix + ".radius_neg", v.radius_neg);
    w.kv(prefix + ".radius_pos", v.radius_pos);
    w.kv(prefix + ".mass_topk", v.mass_topk);
}

void emit_uniform(TreeWriter& w, const std::string& prefix, const UniformParams& p) {
    w.kv(prefix + ".scale", static_cast<double>(p.scale));
    w.kv(prefix + ".zero_point", p.zero_point);
    w.kv(prefix + ".bits", p.bits);
}

std::string emit_machine(const CalibrationReport& r) {
    TreeWriter w;
    w.kv("report.version", std::size_t{1});

    const CalibrationConfig& c = r.cfg;
    w.kv("config.weight_bits", c.weight_bits);
    w.kv("config.act_bits", c.act_bits);
    std::string taus;
    for (std::size_t i = 0; i < c.tau_candidates.size(); ++i) {
        if (i) taus += ',';
        taus += std::to_string(c.tau_candidates[i]);
    }
    w.kv("config.tau_candidates", taus);
    w.kv("config.scale_init", std::string(to_string(c.scale_init)));
    w.kv("config.num_samples", c.num_samples);
    w.kv("config.big_enabled", c.big_enabled);
    w.kv("config.agq_enabled", c.agq_enabled);
    w.kv("config.skip_first_last", c.skip_first_last);
    w.kv("config.quantize_v_in_search", c.quantize_v_in_search);
    w.kv("config.detector", std::string(to_string(c.detector)));
    w.kv("config.hist.n_bins", c.hist.n_bins);
    w.kv("config.hist.top_k", c.hist.top_k);
    w.kv("config.hist.theta", c.hist.theta);
    w.kv("config.hist.eta", c.hist.eta);
    w.kv("config.kde.grid_points", c.kde.grid_points);
    w.kv("config.kde.min_height_frac", c.kde.min_height_frac);
    w.kv("config.kde.min_separation_frac", c.kde.min_separation_frac);

    w.kv("model.sites", r.n_sites);
    w.kv("model.samples_used", r.samples_used);
    w.kv("model.tokens_q", r.tokens_q);
    w.kv("model.tokens_k", r.tokens_k);
    w.kv("model.output_frob_err", r.output_frob_err);
    w.kv("model.flops_ratio", r.flops_ratio);
    w.kv("model.storage_ratio", r.storage_ratio);

    for (const SiteReport& s : r.sites) {
        const std::string p = "site." + std::to_string(s.index);
        w.kv(p + ".kind", std::string(to_string(s.kind)));
        w.kv(p + ".quantized", s.quantized);
        if (s.verdict_hist) emit_verdict(w, p + ".hist", *s.verdict_hist);
        if (s.verdict_kde) emit_verdict(w, p + ".kde", *s.verdict_kde);
        w.kv(p + ".big_applied", s.big_applied);
        w.kv(p + ".gamma_positive_fraction", s.gamma_positive_fraction);
        if (!s.quantized) continue;
        if (s.q_act) emit_uniform(w, p + ".act.q", *s.q_act);
        if (s.k_act) emit_uniform(w, p + ".act.k", *s.k_act);
        if (s.v_act) emit_uniform(w, p + ".act.v", *s.v_act);
        w.kv(p + ".attn.quantizer", s.attn_quantizer);
        w.kv(p + ".attn.scale", s.attn_scale);
        w.kv(p + ".attn.tau", s.attn_tau);
        for (const auto& [tau, err] : s.tau_errors) {
            w.kv(p + ".attn.tau_err." + std::to_string(tau), err);
        }
        w.kv(p + ".mse.wq", s.mse_wq);
        w.kv(p + ".mse.wk", s.mse_wk);
        w.kv(p + ".mse.wv", s.mse_wv);
        w.kv(p + ".mse.q", s.mse_q);
        w.kv(p + ".mse.k", s.mse_k);
        w.kv(p + ".mse.v", s.mse_v);
        w.kv(p + ".mse.attn", s.mse_attn);
        w.kv(p + ".mse.k_pre_fold", s.k_mse_pre_big);
        w.kv(p + ".mse.k_post_fold", s.k_mse_post_big);
        w.kv(p + ".output_frob_err", s.output_frob_err);
    }
    return std::move(w).str();
}

std::string emit_human(const CalibrationReport& r) {
    std::ostringstream os;
    os << "calibration report\n";
    os << "  sites: " << r.n_sites << "  samples: " << r.samples_used << "  bits: W"
       << r.cfg.weight_bits << "A" << r.cfg.act_bits << "\n";
    os << "  sign fold: " << bstr(r.cfg.big_enabled)
       << "  adaptive log base: " << bstr(r.cfg.agq_enabled) << "\n";
    os << "  flops ratio: " << std::setprecision(6) << r.flops_ratio
       << "  storage ratio: " << r.storage_ratio << "\n";
    os << "  output frobenius error: " << r.output_frob_err << "\n\n";
    os << std::left << std::setw(5) << "site" << std::setw(16) << "kind" << std::setw(7)
       << "quant" << std::setw(9) << "bimodal" << std::setw(7) << "fold" << std::setw(5)
       << "tau" << std::setw(14) << "attn scale" << std::setw(14) << "out err" << "\n";
    for (const SiteReport& s : r.sites) {
        std::string bimodal = "-";
        if (s.verdict_hist) bimodal = s.verdict_hist->is_bimodal ? "yes" : "no";
        else if (s.verdict_kde) bimodal = s.verdict_kde->is_bimodal ? "yes" : "no";
        os << std::left << std::setw(5) << s.index << std::setw(16) << to_string(s.kind)
           << std::setw(7) << bstr(s.quantized) << std::setw(9) << bimodal << std::setw(7)
           << bstr(s.big_applied) << std::setw(5) << (s.quantized ? std::to_string(s.attn_tau) : "-")
           << std::setw(14) << (s.quantized ? num17(s.attn_scale).substr(0, 10) : "-")
           << std::setw(14) << (s.quantized ? num17(s.output_frob_err).substr(0, 10) : "-")
           << "\n";
    }
    return os.str();
}

std::string emit_csv(const CalibrationReport& r) {
    std::ostringstream os;
    os << "site,kind,quantized,hist_bimodal,kde_bimodal,big_applied,gamma_positive_fraction,"
          "q_scale,k_scale,v_scale,attn_quantizer,attn_scale,tau,mse_k_pre_fold,"
          "mse_k_post_fold,output_frob_err\n";
    const auto vb = [](const std::optional<BimodalVerdict>& v) {
        return v ? std::string(bstr(v->is_bimodal)) : std::string();
    };
    for (const SiteReport& s : r.sites) {
        os << s.index << ',' << to_string(s.kind) << ',' << bstr(s.quantized) << ','
           << vb(s.verdict_hist) << ',' << vb(s.verdict_kde) << ',' << bstr(s.big_applied) << ','
           << num17(s.gamma_positive_fraction) << ',';
        if (s.quantized) {
            os << num17(s.q_act->scale) << ',' << num17(s.k_act->scale) << ','
               << num17(s.v_act->scale) << ',' << s.attn_quantizer << ',' << num17(s.attn_scale)
               << ',' << s.attn_tau << ',' << num17(s.k_mse_pre_big) << ','
               << num17(s.k_mse_post_big) << ',' << num17(s.output_frob_err);
        } else {
            os << ",,,,,,,,";
        }
        os << '\n';
    }
    return os.str();
}

struct KeyValue {
    std::string key;
    std::string value;
};

class TreeReader {
public:
    explicit TreeReader(const std::string& text) {
        std::stringstream ss(text);
        std::string line;
        while (std::getline(ss, line)) {
            if (line.empty()) continue;
            const auto eq = line.find(" = ");
            if (eq == std::string::npos) {
                throw ConfigError("malformed report line: " + line);
            }
            map_[line.substr(0, eq)] = line.substr(eq + 3);
        }
    }

    bool has(const std::string& key) const { return map_.count(key) != 0; }

    std::string str(const std::string& key) const {
        const auto it = map_.find(key);
        if (it == map_.end()) throw ConfigError("missing report key: " + key);
        return it->second;
    }

    double num(const std::string& key) const { return std::strtod(str(key).c_str(), nullptr); }

    std::size_t uint(const std::string& key) const {
        return static_cast<std::size_t>(std::strtoull(str(key).c_str(), nullptr, 10));
    }

    int integer(const std::string& key) const { return static_cast<int>(uint(key)); }

    bool boolean(const std::string& key) const { return str(key) == "true"; }

private:
    std::map<std::string, std::string> map_;
};

BimodalVerdict parse_verdict(const TreeReader& t, const std::string& prefix) {
    BimodalVerdict v;
    v.is_bimodal = t.boolean(prefix + ".is_bimodal");
    v.center_neg = t.num(prefix + ".center_neg");
    v.center_pos = t.num(prefix + ".center_pos");
    v.radius_neg = t.num(prefix + ".radius_neg");
    v.radius_pos = t.num(prefix + ".radius_pos");
    v.mass_topk = t.num(prefix + ".mass_topk");
    return v;
}

UniformParams parse_uniform(const TreeReader& t, const std::string& prefix) {
    UniformParams p;
    p.scale = static_cast<float>(t.num(prefix + ".scale"));
    p.zero_point = t.integer(prefix + ".zero_point");
    p.bits = t.integer(prefix + ".bits");
    return p;
}

}  // namespace

ReportFormat report_format_from_string(const std::string& s) {
    if (s == "machine") return ReportFormat::machine;
    if (s == "human") return ReportFormat::human;
    if (s == "csv") return ReportFormat::csv;
    throw ConfigError("unknown report format: " + s);
}

std::string emit_report(const CalibrationReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::machine: return emit_machine(report);
        case ReportFormat::human: return emit_human(report);
        case ReportFormat::csv: return emit_csv(report);
    }
    return emit_machine(report);
}

CalibrationReport parse_machine_report(const std::string& text) {
    const TreeReader t(text);
    CalibrationReport r;

    CalibrationConfig& c = r.cfg;
    c.weight_bits = t.integer("config.weight_bits");
    c.act_bits = t.integer("config.act_bits");
    c.tau_candidates.clear();
    {
        std::stringstream ss(t.str("config.tau_candidates"));
        std::string item;
        while (std::getline(ss, item, ',')) c.tau_candidates.push_back(std::stoi(item));
    }
    c.scale_init = scale_init_from_string(t.str("config.scale_init"));
    c.num_samples = t.uint("config.num_samples");
    c.big_enabled = t.boolean("config.big_enabled");
    c.agq_enabled = t.boolean("config.agq_enabled");
    c.skip_first_last = t.boolean("config.skip_first_last");
    c.quantize_v_in_search = t.boolean("config.quantize_v_in_search");
    c.detector = detector_from_string(t.str("config.detector"));
    c.hist.n_bins = t.integer("config.hist.n_bins");
    c.hist.top_k = t.integer("config.hist.top_k");
    c.hist.theta = t.num("config.hist.theta");
    c.hist.eta = t.num("config.hist.eta");
    c.kde.grid_points = t.integer("config.kde.grid_points");
    c.kde.min_height_frac = t.num("config.kde.min_height_frac");
    c.kde.min_separation_frac = t.num("config.kde.min_separation_frac");

    r.n_sites = t.uint("model.sites");
    r.samples_used = t.uint("model.samples_used");
    r.tokens_q = t.uint("model.tokens_q");
    r.tokens_k = t.uint("model.tokens_k");
    r.output_frob_err = t.num("model.output_frob_err");
    r.flops_ratio = t.num("model.flops_ratio");
    r.storage_ratio = t.num("model.storage_ratio");

    for (std::size_t i = 0; i < r.n_sites; ++i) {
        const std::string p = "site." + std::to_string(i);
        SiteReport s;
        s.index = i;
        s.kind = attention_kind_from_string(t.str(p + ".kind"));
        s.quantized = t.boolean(p + ".quantized");
        if (t.has(p + ".hist.is_bimodal")) s.verdict_hist = parse_verdict(t, p + ".hist");
        if (t.has(p + ".kde.is_bimodal")) s.verdict_kde = parse_verdict(t, p + ".kde");
        s.big_applied = t.boolean(p + ".big_applied");
        s.gamma_positive_fraction = t.num(p + ".gamma_positive_fraction");
        if (s.quantized) {
            s.q_act = parse_uniform(t, p + ".act.q");
            s.k_act = parse_uniform(t, p + ".act.k");
            s.v_act = parse_uniform(t, p + ".act.v");
            s.attn_quantizer = t.str(p + ".attn.quantizer");
            s.attn_scale = t.num(p + ".attn.scale");
            s.attn_tau = t.integer(p + ".attn.tau");
            for (int tau : c.tau_candidates) {
                const std::string key = p + ".attn.tau_err." + std::to_string(tau);
                if (t.has(key)) s.tau_errors.emplace_back(tau, t.num(key));
            }
            s.mse_wq = t.num(p + ".mse.wq");
            s.mse_wk = t.num(p + ".mse.wk");
            s.mse_wv = t.num(p + ".mse.wv");
            s.mse_q = t.num(p + ".mse.q");
            s.mse_k = t.num(p + ".mse.k");
            s.mse_v = t.num(p + ".mse.v");
            s.mse_attn = t.num(p + ".mse.attn");
            s.k_mse_pre_big = t.num(p + ".mse.k_pre_fold");
            s.k_mse_post_big = t.num(p + ".mse.k_post_fold");
            s.output_frob_err = t.num(p + ".output_frob_err");
        }
        r.sites.push_back(std::move(s));
    }
    return r;
}

std::string emit_ablation(const std::vector<AblationRow>& rows, ReportFormat format) {
    if (format == ReportFormat::machine) {
        TreeWriter w;
        w.kv("ablation.rows", rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::string p = "ablation." + std::to_string(i);
            w.kv(p + ".sign_fold", rows[i].big);
            w.kv(p + ".adaptive_base", rows[i].agq);
            w.kv(p + ".output_frob_err", rows[i].output_frob_err);
        }
        return std::move(w).str();
    }
    if (format == ReportFormat::csv) {
        std::string out = "sign_fold,adaptive_base,output_frob_err\n";
        for (const AblationRow& row : rows) {
            out += std::string(bstr(row.big)) + "," + bstr(row.agq) + "," +
                   num17(row.output_frob_err) + "\n";
        }
        return out;
    }
    std::ostringstream os;
    os << "component ablation\n";
    os << std::left << std::setw(11) << "sign_fold" << std::setw(15) << "adaptive_base"
       << "output_frob_err\n";
    for (const AblationRow& row : rows) {
        os << std::left << std::setw(11) << bstr(row.big) << std::setw(15) << bstr(row.agq)
           << num17(row.output_frob_err) << "\n";
    }
    return os.str();
}

}  // namespace attnquant
