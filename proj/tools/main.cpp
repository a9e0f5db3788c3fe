// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: synthetic data generation, bimodal discrimination,
// calibration, quantized evaluation and report formatting.
//
// Exit codes follow sysexits: 64 usage, 65 bad config/validation, 74 I/O.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "attnquant/bimodal.hpp"
#include "attnquant/calibrate.hpp"
#include "attnquant/config.hpp"
#include "attnquant/io.hpp"
#include "attnquant/report.hpp"

namespace aq = attnquant;
namespace fs = std::filesystem;

namespace {

constexpr int EXIT_USAGE = 64;
constexpr int EXIT_CONFIG = 65;
constexpr int EXIT_IO = 74;
constexpr int EXIT_INTERNAL = 70;

// Offset of the input stream from the block-parameter stream so one seed
// drives both without overlap.
constexpr std::uint64_t INPUT_STREAM_OFFSET = 0x517cc1b727220a95ull;

std::string sample_path(const std::string& dir, std::size_t index, const char* part) {
    char name[64];
    std::snprintf(name, sizeof(name), "sample_%03zu.%s.ptqt", index, part);
    return (fs::path(dir) / name).string();
}

aq::Tensor key_activations(const aq::AttentionBlockParams& block, const aq::Tensor& x) {
    return aq::add_row_bias(aq::matmul(x, block.w_k), block.b_k);
}

std::vector<aq::AttentionBlockParams> build_model(const aq::RunConfig& cfg) {
    std::vector<aq::AttentionBlockParams> model;
    for (std::size_t s = 0; s < cfg.gen_sites; ++s) {
        aq::SyntheticSpec spec = cfg.gen;
        spec.seed = cfg.seed + s;
        // default: interior sites bimodal, first and last normal
        std::string regime = (s == 0 || s + 1 == cfg.gen_sites) ? "normal_key" : "bimodal_key";
        if (!cfg.gen_site_regimes.empty()) regime = cfg.gen_site_regimes[s];
        if (!cfg.gen_site_kinds.empty()) {
            spec.kind = aq::attention_kind_from_string(cfg.gen_site_kinds[s]);
        }
        spec.regime = aq::regime_from_string(regime);
        if (spec.regime == aq::Regime::bimodal_key) {
            model.push_back(aq::gen_bimodal_block(spec).block);
        } else if (spec.regime == aq::Regime::normal_key) {
            model.push_back(aq::gen_normal_block(spec));
        } else {
            throw aq::ConfigError("gen.site_regimes entries must be key regimes");
        }
    }
    return model;
}

std::vector<aq::CalibSample> load_samples(const std::string& dir, std::size_t count) {
    std::vector<aq::CalibSample> samples;
    samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        aq::CalibSample s;
        s.x_q = aq::read_float_tensor(sample_path(dir, i, "q"));
        s.x_src = aq::read_float_tensor(sample_path(dir, i, "src"));
        samples.push_back(std::move(s));
    }
    return samples;
}

void print_verdict(std::ostream& os, const char* detector, const aq::BimodalVerdict& v) {
    os << detector << ".is_bimodal = " << (v.is_bimodal ? "true" : "false") << "\n";
    char buf[64];
    const auto num = [&](double x) {
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        return std::string(buf);
    };
    os << detector << ".center_neg = " << num(v.center_neg) << "\n";
    os << detector << ".center_pos = " << num(v.center_pos) << "\n";
    os << detector << ".radius_neg = " << num(v.radius_neg) << "\n";
    os << detector << ".radius_pos = " << num(v.radius_pos) << "\n";
    os << detector << ".mass_topk = " << num(v.mass_topk) << "\n";
}

int cmd_gen(const std::string& config_path, const std::string& out) {
    const aq::RunConfig cfg = aq::load_run_config(config_path);

    if (cfg.gen_what == "kact") {
        aq::SyntheticSpec spec = cfg.gen;
        if (spec.regime == aq::Regime::bimodal_key) {
            const aq::BimodalBlock bb = aq::gen_bimodal_block(spec);
            aq::write_tensor(out, key_activations(bb.block, bb.x_k));
        } else if (spec.regime == aq::Regime::normal_key) {
            const aq::AttentionBlockParams block = aq::gen_normal_block(spec);
            aq::CounterRng rng(spec.seed + INPUT_STREAM_OFFSET);
            const aq::Tensor x = aq::gen_normal_tensor(spec.tokens_k, spec.dim, rng);
            aq::write_tensor(out, key_activations(block, x));
        } else {
            throw aq::ConfigError("gen.what = kact needs a key regime");
        }
    } else if (cfg.gen_what == "softmax") {
        aq::write_tensor(out, aq::gen_post_softmax(cfg.gen));
    } else if (cfg.gen_what == "model") {
        aq::write_model(out, build_model(cfg));
    } else if (cfg.gen_what == "calib") {
        fs::create_directories(out);
        aq::CounterRng rng(cfg.seed + INPUT_STREAM_OFFSET);
        for (std::size_t i = 0; i < cfg.calib.num_samples; ++i) {
            aq::write_tensor(sample_path(out, i, "q"),
                             aq::gen_normal_tensor(cfg.gen.tokens_q, cfg.gen.dim, rng));
            aq::write_tensor(sample_path(out, i, "src"),
                             aq::gen_normal_tensor(cfg.gen.tokens_k, cfg.gen.dim, rng));
        }
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_discriminate(const std::string& input, const std::string& config_path,
                     const std::string& detector_flag) {
    aq::RunConfig cfg;
    if (!config_path.empty()) cfg = aq::load_run_config(config_path);
    if (!detector_flag.empty()) cfg.detector = aq::detector_from_string(detector_flag);

    const aq::Tensor x = aq::read_float_tensor(input);
    if (cfg.detector == aq::Detector::histogram || cfg.detector == aq::Detector::both) {
        const aq::Histogram h = aq::build_histogram(x, cfg.calib.hist.n_bins);
        print_verdict(std::cout, "histogram", aq::discriminate_histogram(h, cfg.calib.hist));
    }
    if (cfg.detector == aq::Detector::kde || cfg.detector == aq::Detector::both) {
        print_verdict(std::cout, "kde", aq::discriminate_kde(x, cfg.calib.kde));
    }
    return 0;
}

int cmd_calibrate(const std::string& config_path, const std::string& model_path,
                  const std::string& data_dir, const std::string& out_model,
                  const std::string& out_report, const std::string& format_flag) {
    const aq::RunConfig cfg = aq::load_run_config(config_path);
    const auto model = aq::read_model(model_path);
    const auto samples = load_samples(data_dir, cfg.calib.num_samples);

    const auto [qm, report] = aq::calibrate(model, samples, cfg.calib);
    aq::write_quantized_model(out_model, qm);

    const std::string fmt = format_flag.empty() ? cfg.report_format : format_flag;
    aq::write_file(out_report, aq::emit_report(report, aq::report_format_from_string(fmt)));
    std::cout << "calibrated " << model.size() << " sites; model -> " << out_model
              << ", report -> " << out_report << "\n";
    return 0;
}

int cmd_quantize(const std::string& model_path, const std::string& xq_path,
                 const std::string& xsrc_path, const std::string& out_prefix) {
    const aq::QuantizedModel qm = aq::read_quantized_model(model_path);
    const aq::Tensor x_q = aq::read_float_tensor(xq_path);
    const aq::Tensor x_src = aq::read_float_tensor(xsrc_path);

    char buf[64];
    for (std::size_t s = 0; s < qm.blocks.size(); ++s) {
        const aq::Tensor out = aq::quantized_forward(qm.blocks[s], qm.sites[s], x_q, x_src);
        const aq::Tensor ref = aq::forward(qm.blocks[s], x_q, x_src, x_src).output;
        const std::string path = out_prefix + ".site" + std::to_string(s) + ".ptqt";
        aq::write_tensor(path, out);
        std::snprintf(buf, sizeof(buf), "%.17g", aq::frobenius_sq(ref, out));
        std::cout << "site " << s << ": output_frob_err = " << buf << " -> " << path << "\n";
    }
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_dir, std::size_t n_samples,
             const std::string& out_report, const std::string& format_flag, bool ablation,
             const std::string& float_model_path, const std::string& config_path) {
    const std::string fmt_name = format_flag.empty() ? "machine" : format_flag;
    const aq::ReportFormat fmt = aq::report_format_from_string(fmt_name);

    std::string text;
    if (ablation) {
        if (float_model_path.empty() || config_path.empty()) {
            throw aq::ConfigError("--ablation requires --float-model and --config");
        }
        const aq::RunConfig cfg = aq::load_run_config(config_path);
        const auto model = aq::read_model(float_model_path);
        const auto samples = load_samples(data_dir, cfg.calib.num_samples);
        text = aq::emit_ablation(aq::run_ablation(model, samples, cfg.calib), fmt);
    } else {
        const aq::QuantizedModel qm = aq::read_quantized_model(model_path);
        const std::size_t count = n_samples > 0 ? n_samples : qm.cfg.num_samples;
        const auto samples = load_samples(data_dir, count);
        text = aq::emit_report(aq::build_report(qm.blocks, qm, samples), fmt);
    }

    if (out_report.empty()) {
        std::cout << text;
    } else {
        aq::write_file(out_report, text);
        std::cout << "report -> " << out_report << "\n";
    }
    return 0;
}

int cmd_lut_dump(int tau, int bits, const std::string& out) {
    const aq::AgqLut lut = aq::build_lut(tau, bits);
    const std::size_t width = std::size_t{1} << bits;
    aq::Tensor t({static_cast<std::size_t>(tau), width}, lut.entries());
    aq::write_tensor(out, t);
    std::cout << "wrote " << lut.size() << "-entry table -> " << out << "\n";
    return 0;
}

int cmd_report(const std::string& in_report, const std::string& format_flag,
               const std::string& out_path) {
    const aq::CalibrationReport r = aq::parse_machine_report(aq::read_file(in_report));
    const std::string text = aq::emit_report(r, aq::report_format_from_string(format_flag));
    if (out_path.empty()) {
        std::cout << text;
    } else {
        aq::write_file(out_path, text);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"post-training quantization toolkit for attention blocks"};
    app.require_subcommand(1);

    std::string config_path, out_path, input_path, detector_flag;
    std::string model_path, data_dir, out_model, out_report, format_flag;
    std::string xq_path, xsrc_path, float_model_path, report_in;
    std::size_t n_samples = 0;
    int tau = 4, bits = 8;
    bool ablation = false;

    CLI::App* gen = app.add_subcommand("gen", "generate synthetic tensors, models or samples");
    gen->add_option("-c,--config", config_path, "run configuration file")->required();
    gen->add_option("-o,--out", out_path, "output file or directory")->required();

    CLI::App* disc = app.add_subcommand("discriminate", "detect a two-peak distribution");
    disc->add_option("-i,--input", input_path, "tensor container to inspect")->required();
    disc->add_option("-c,--config", config_path, "run configuration file");
    disc->add_option("--detector", detector_flag, "histogram | kde | both");

    CLI::App* cal = app.add_subcommand("calibrate", "run the calibration pipeline");
    cal->add_option("-c,--config", config_path, "run configuration file")->required();
    cal->add_option("-m,--model", model_path, "float model container")->required();
    cal->add_option("-d,--data", data_dir, "calibration sample directory")->required();
    cal->add_option("-o,--out", out_model, "quantized model output path")->required();
    cal->add_option("-r,--report", out_report, "report output path")->required();
    cal->add_option("--format", format_flag, "machine | human | csv");

    CLI::App* quant = app.add_subcommand("quantize", "apply a quantized model to inputs");
    quant->add_option("-m,--model", model_path, "quantized model container")->required();
    quant->add_option("-q,--xq", xq_path, "query-side input tensor")->required();
    quant->add_option("-s,--xsrc", xsrc_path, "source-side input tensor")->required();
    quant->add_option("-o,--out", out_path, "output path prefix")->required();

    CLI::App* ev = app.add_subcommand("eval", "measure quantization error on a data set");
    ev->add_option("-m,--model", model_path, "quantized model container");
    ev->add_option("-d,--data", data_dir, "sample directory")->required();
    ev->add_option("-n,--samples", n_samples, "number of samples (default: config value)");
    ev->add_option("-r,--report", out_report, "write the report here instead of stdout");
    ev->add_option("--format", format_flag, "machine | human | csv");
    ev->add_flag("--ablation", ablation, "run the 2x2 component ablation");
    ev->add_option("-M,--float-model", float_model_path, "float model (ablation mode)");
    ev->add_option("-c,--config", config_path, "run configuration (ablation mode)");

    CLI::App* lut = app.add_subcommand("lut-dump", "write a shift lookup table");
    lut->add_option("--tau", tau, "granularity parameter (power of two)");
    lut->add_option("--bits", bits, "value bit-width");
    lut->add_option("-o,--out", out_path, "output tensor container")->required();

    CLI::App* rep = app.add_subcommand("report", "reformat a machine-readable report");
    rep->add_option("-r,--report", report_in, "machine-readable report file")->required();
    rep->add_option("--format", format_flag, "machine | human | csv")->required();
    rep->add_option("-o,--out", out_path, "output path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return EXIT_USAGE;
    }

    try {
        if (app.got_subcommand(gen)) return cmd_gen(config_path, out_path);
        if (app.got_subcommand(disc)) return cmd_discriminate(input_path, config_path, detector_flag);
        if (app.got_subcommand(cal)) {
            return cmd_calibrate(config_path, model_path, data_dir, out_model, out_report,
                                 format_flag);
        }
        if (app.got_subcommand(quant)) return cmd_quantize(model_path, xq_path, xsrc_path, out_path);
        if (app.got_subcommand(ev)) {
            return cmd_eval(model_path, data_dir, n_samples, out_report, format_flag, ablation,
                            float_model_path, config_path);
        }
        if (app.got_subcommand(lut)) return cmd_lut_dump(tau, bits, out_path);
        if (app.got_subcommand(rep)) return cmd_report(report_in, format_flag, out_path);
        std::cerr << "no subcommand selected\n";
        return EXIT_USAGE;
    } catch (const aq::IoError& e) {
        std::cerr << "i/o error (" << static_cast<int>(e.code()) << "): " << e.what() << "\n";
        return EXIT_IO;
    } catch (const aq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return EXIT_CONFIG;
    } catch (const aq::DomainError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return EXIT_CONFIG;
    } catch (const aq::ShapeError& e) {
        std::cerr << "shape error: " << e.what() << "\n";
        return EXIT_CONFIG;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return EXIT_INTERNAL;
    }
}
