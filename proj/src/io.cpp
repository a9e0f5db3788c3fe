// SPDX-License-Identifier: Apache-2.0
#include "attnquant/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace attnquant {

namespace {

constexpr char TENSOR_MAGIC[4] = {'P', 'T', 'Q', 'T'};
constexpr char MODEL_MAGIC[4] = {'P', 'T', 'Q', 'M'};
constexpr char QMODEL_MAGIC[4] = {'P', 'T', 'Q', 'Q'};
constexpr std::uint32_t FORMAT_VERSION = 1;

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u8(std::ostream& os, std::uint8_t v) { put_bytes(os, &v, 1); }

void put_u32(std::ostream& os, std::uint32_t v) {
    const std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                               static_cast<std::uint8_t>(v >> 16),
                               static_cast<std::uint8_t>(v >> 24)};
    put_bytes(os, b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    put_bytes(os, b, 8);
}

void put_i32(std::ostream& os, std::int32_t v) { put_u32(os, static_cast<std::uint32_t>(v)); }
void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

void get_bytes(std::istream& is, void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) {
        throw IoError(IoError::truncated, "unexpected end of file");
    }
}

std::uint8_t get_u8(std::istream& is) {
    std::uint8_t v;
    get_bytes(is, &v, 1);
    return v;
}

std::uint32_t get_u32(std::istream& is) {
    std::uint8_t b[4];
    get_bytes(is, b, 4);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

std::uint64_t get_u64(std::istream& is) {
    std::uint8_t b[8];
    get_bytes(is, b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

std::int32_t get_i32(std::istream& is) { return static_cast<std::int32_t>(get_u32(is)); }
float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }
double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

void check_magic(std::istream& is, const char expect[4], const char* what) {
    char m[4];
    get_bytes(is, m, 4);
    if (std::memcmp(m, expect, 4) != 0) {
        throw IoError(IoError::bad_magic, std::string("bad magic for ") + what);
    }
    const std::uint32_t version = get_u32(is);
    if (version != FORMAT_VERSION) {
        throw IoError(IoError::bad_version, "unsupported container version");
    }
}

void write_header(std::ostream& os, std::uint8_t dtype, std::uint8_t bits,
                  const std::vector<std::size_t>& shape) {
    put_bytes(os, TENSOR_MAGIC, 4);
    put_u32(os, FORMAT_VERSION);
    put_u8(os, dtype);
    put_u8(os, bits);
    put_u8(os, static_cast<std::uint8_t>(shape.size()));
    for (std::size_t d : shape) put_u64(os, d);
}

std::vector<std::size_t> read_dims(std::istream& is, std::uint8_t ndim, std::size_t elem_size) {
    constexpr std::uint64_t MAX_PAYLOAD = std::uint64_t{1} << 40;  // 1 TiB sanity cap
    std::vector<std::size_t> dims(ndim);
    std::uint64_t volume = 1;
    for (std::uint8_t i = 0; i < ndim; ++i) {
        const std::uint64_t d = get_u64(is);
        if (d != 0 && volume > MAX_PAYLOAD / d) {
            throw IoError(IoError::dim_overflow, "tensor volume overflows");
        }
        volume *= d;
        dims[i] = static_cast<std::size_t>(d);
    }
    if (volume * elem_size > MAX_PAYLOAD) {
        throw IoError(IoError::dim_overflow, "tensor payload exceeds the size cap");
    }
    return dims;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError(IoError::open_failed, "cannot open for writing: " + path);
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(IoError::open_failed, "cannot open for reading: " + path);
    return is;
}

void write_sign_factor(std::ostream& os, const SignFactor& g) {
    put_u64(os, g.gamma.size());
    for (std::int8_t v : g.gamma) put_u8(os, static_cast<std::uint8_t>(v));
}

SignFactor read_sign_factor(std::istream& is) {
    SignFactor g;
    const std::uint64_t n = get_u64(is);
    g.gamma.resize(static_cast<std::size_t>(n));
    for (auto& v : g.gamma) v = static_cast<std::int8_t>(get_u8(is));
    return g;
}

void write_verdict(std::ostream& os, const std::optional<BimodalVerdict>& v) {
    put_u8(os, v.has_value() ? 1 : 0);
    if (!v) return;
    put_u8(os, v->is_bimodal ? 1 : 0);
    put_f64(os, v->center_neg);
    put_f64(os, v->center_pos);
    put_f64(os, v->radius_neg);
    put_f64(os, v->radius_pos);
    put_f64(os, v->mass_topk);
}

std::optional<BimodalVerdict> read_verdict(std::istream& is) {
    if (get_u8(is) == 0) return std::nullopt;
    BimodalVerdict v;
    v.is_bimodal = get_u8(is) != 0;
    v.center_neg = get_f64(is);
    v.center_pos = get_f64(is);
    v.radius_neg = get_f64(is);
    v.radius_pos = get_f64(is);
    v.mass_topk = get_f64(is);
    return v;
}

void write_uniform(std::ostream& os, const UniformParams& p) {
    put_f32(os, p.scale);
    put_i32(os, p.zero_point);
    put_u8(os, static_cast<std::uint8_t>(p.bits));
}

UniformParams read_uniform(std::istream& is) {
    UniformParams p;
    p.scale = get_f32(is);
    p.zero_point = get_i32(is);
    p.bits = get_u8(is);
    return p;
}

void write_per_channel(std::ostream& os, const PerChannelUniformParams& p) {
    put_u8(os, static_cast<std::uint8_t>(p.bits));
    put_u64(os, p.channels.size());
    for (const UniformParams& c : p.channels) write_uniform(os, c);
}

PerChannelUniformParams read_per_channel(std::istream& is) {
    PerChannelUniformParams p;
    p.bits = get_u8(is);
    const std::uint64_t n = get_u64(is);
    p.channels.resize(static_cast<std::size_t>(n));
    for (auto& c : p.channels) c = read_uniform(is);
    return p;
}

void write_config(std::ostream& os, const CalibrationConfig& cfg) {
    put_u8(os, static_cast<std::uint8_t>(cfg.weight_bits));
    put_u8(os, static_cast<std::uint8_t>(cfg.act_bits));
    put_u8(os, static_cast<std::uint8_t>(cfg.tau_candidates.size()));
    for (int t : cfg.tau_candidates) put_u8(os, static_cast<std::uint8_t>(t));
    put_u8(os, static_cast<std::uint8_t>(cfg.scale_init));
    put_u64(os, cfg.num_samples);
    const std::uint8_t flags = (cfg.big_enabled ? 1 : 0) | (cfg.agq_enabled ? 2 : 0) |
                               (cfg.skip_first_last ? 4 : 0) |
                               (cfg.quantize_v_in_search ? 8 : 0);
    put_u8(os, flags);
    put_u8(os, static_cast<std::uint8_t>(cfg.detector));
    put_u32(os, static_cast<std::uint32_t>(cfg.hist.n_bins));
    put_u32(os, static_cast<std::uint32_t>(cfg.hist.top_k));
    put_f64(os, cfg.hist.theta);
    put_f64(os, cfg.hist.eta);
    put_u32(os, static_cast<std::uint32_t>(cfg.kde.grid_points));
    put_f64(os, cfg.kde.min_height_frac);
    put_f64(os, cfg.kde.min_separation_frac);
}

CalibrationConfig read_config(std::istream& is) {
    CalibrationConfig cfg;
    cfg.weight_bits = get_u8(is);
    cfg.act_bits = get_u8(is);
    cfg.tau_candidates.resize(get_u8(is));
    for (auto& t : cfg.tau_candidates) t = get_u8(is);
    cfg.scale_init = static_cast<ScaleInit>(get_u8(is));
    cfg.num_samples = static_cast<std::size_t>(get_u64(is));
    const std::uint8_t flags = get_u8(is);
    cfg.big_enabled = flags & 1;
    cfg.agq_enabled = flags & 2;
    cfg.skip_first_last = flags & 4;
    cfg.quantize_v_in_search = flags & 8;
    cfg.detector = static_cast<Detector>(get_u8(is));
    cfg.hist.n_bins = static_cast<int>(get_u32(is));
    cfg.hist.top_k = static_cast<int>(get_u32(is));
    cfg.hist.theta = get_f64(is);
    cfg.hist.eta = get_f64(is);
    cfg.kde.grid_points = static_cast<int>(get_u32(is));
    cfg.kde.min_height_frac = get_f64(is);
    cfg.kde.min_separation_frac = get_f64(is);
    return cfg;
}

void write_block(std::ostream& os, const AttentionBlockParams& block) {
    put_u8(os, static_cast<std::uint8_t>(block.kind));
    write_tensor(os, block.w_q);
    write_tensor(os, block.w_k);
    write_tensor(os, block.w_v);
    write_tensor(os, block.b_q);
    write_tensor(os, block.b_k);
    write_tensor(os, block.b_v);
}

Tensor read_float_tensor_stream(std::istream& is) {
    AnyTensor t = read_tensor(is);
    if (!std::holds_alternative<Tensor>(t)) {
        throw IoError(IoError::bad_dtype, "expected a float32 tensor");
    }
    return std::get<Tensor>(std::move(t));
}

AttentionBlockParams read_block(std::istream& is) {
    AttentionBlockParams block;
    block.kind = static_cast<AttentionKind>(get_u8(is));
    block.w_q = read_float_tensor_stream(is);
    block.w_k = read_float_tensor_stream(is);
    block.w_v = read_float_tensor_stream(is);
    block.b_q = read_float_tensor_stream(is);
    block.b_k = read_float_tensor_stream(is);
    block.b_v = read_float_tensor_stream(is);
    return block;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
    write_header(os, 0, 32, t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) put_f32(os, t[i]);
}

void write_tensor(std::ostream& os, const IntTensor& t) {
    write_header(os, 1, static_cast<std::uint8_t>(t.bits()), t.shape());
    put_bytes(os, t.data(), t.size());
}

void write_tensor(const std::string& path, const Tensor& t) {
    auto os = open_out(path);
    write_tensor(os, t);
    if (!os) throw IoError(IoError::write_failed, "write failed: " + path);
}

void write_tensor(const std::string& path, const IntTensor& t) {
    auto os = open_out(path);
    write_tensor(os, t);
    if (!os) throw IoError(IoError::write_failed, "write failed: " + path);
}

AnyTensor read_tensor(std::istream& is) {
    check_magic(is, TENSOR_MAGIC, "tensor container");
    const std::uint8_t dtype = get_u8(is);
    const std::uint8_t bits = get_u8(is);
    const std::uint8_t ndim = get_u8(is);

    if (dtype == 0) {
        if (bits != 32) throw IoError(IoError::bad_dtype, "float tensor must declare 32 bits");
        const auto dims = read_dims(is, ndim, 4);
        const std::size_t n = Tensor::volume(dims);
        std::vector<float> data(n);
        for (std::size_t i = 0; i < n; ++i) data[i] = get_f32(is);
        for (float v : data) {
            if (!std::isfinite(v)) {
                throw IoError(IoError::non_finite, "tensor payload contains NaN/Inf");
            }
        }
        return Tensor(dims, std::move(data));
    }
    if (dtype == 1) {
        if (bits < 2 || bits > 8) throw IoError(IoError::bad_dtype, "integer bits out of range");
        const auto dims = read_dims(is, ndim, 1);
        const std::size_t n = Tensor::volume(dims);
        std::vector<std::uint8_t> data(n);
        if (n > 0) get_bytes(is, data.data(), n);
        const std::uint8_t limit = static_cast<std::uint8_t>((1u << bits) - 1u);
        for (std::uint8_t v : data) {
            if (v > limit) throw IoError(IoError::non_finite, "integer code exceeds bit range");
        }
        return IntTensor(dims, std::move(data), bits);
    }
    throw IoError(IoError::bad_dtype, "unknown dtype code");
}

AnyTensor read_tensor(const std::string& path) {
    auto is = open_in(path);
    return read_tensor(is);
}

Tensor read_float_tensor(const std::string& path) {
    auto is = open_in(path);
    return read_float_tensor_stream(is);
}

void write_model(const std::string& path, const std::vector<AttentionBlockParams>& model) {
    auto os = open_out(path);
    put_bytes(os, MODEL_MAGIC, 4);
    put_u32(os, FORMAT_VERSION);
    put_u32(os, static_cast<std::uint32_t>(model.size()));
    for (const auto& block : model) write_block(os, block);
    if (!os) throw IoError(IoError::write_failed, "write failed: " + path);
}

std::vector<AttentionBlockParams> read_model(const std::string& path) {
    auto is = open_in(path);
    check_magic(is, MODEL_MAGIC, "model container");
    const std::uint32_t count = get_u32(is);
    std::vector<AttentionBlockParams> model;
    model.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) model.push_back(read_block(is));
    return model;
}

void write_quantized_model(const std::string& path, const QuantizedModel& qm) {
    auto os = open_out(path);
    put_bytes(os, QMODEL_MAGIC, 4);
    put_u32(os, FORMAT_VERSION);
    write_config(os, qm.cfg);
    put_u32(os, static_cast<std::uint32_t>(qm.blocks.size()));
    for (std::size_t s = 0; s < qm.blocks.size(); ++s) {
        write_block(os, qm.blocks[s]);
        const SiteQuant& site = qm.sites[s];
        put_u8(os, site.quantized ? 1 : 0);
        write_verdict(os, site.verdict_hist);
        write_verdict(os, site.verdict_kde);
        put_u8(os, site.big_applied ? 1 : 0);
        write_sign_factor(os, site.gamma);
        if (!site.quantized) continue;
        write_per_channel(os, site.w_q);
        write_per_channel(os, site.w_k);
        write_per_channel(os, site.w_v);
        write_uniform(os, site.q_act);
        write_uniform(os, site.k_act);
        write_uniform(os, site.v_act);
        put_u8(os, site.use_agq ? 1 : 0);
        put_f32(os, site.attn.scale);
        put_u8(os, static_cast<std::uint8_t>(site.attn.bits));
        put_u8(os, static_cast<std::uint8_t>(site.attn.tau));
        put_u64(os, site.tau_errors.size());
        for (const auto& [tau, err] : site.tau_errors) {
            put_u8(os, static_cast<std::uint8_t>(tau));
            put_f64(os, err);
        }
    }
    if (!os) throw IoError(IoError::write_failed, "write failed: " + path);
}

QuantizedModel read_quantized_model(const std::string& path) {
    auto is = open_in(path);
    check_magic(is, QMODEL_MAGIC, "quantized model container");
    QuantizedModel qm;
    qm.cfg = read_config(is);
    const std::uint32_t count = get_u32(is);
    qm.blocks.reserve(count);
    qm.sites.resize(count);
    for (std::uint32_t s = 0; s < count; ++s) {
        qm.blocks.push_back(read_block(is));
        SiteQuant& site = qm.sites[s];
        site.kind = qm.blocks[s].kind;
        site.quantized = get_u8(is) != 0;
        site.verdict_hist = read_verdict(is);
        site.verdict_kde = read_verdict(is);
        site.big_applied = get_u8(is) != 0;
        site.gamma = read_sign_factor(is);
        if (!site.quantized) continue;
        site.w_q = read_per_channel(is);
        site.w_k = read_per_channel(is);
        site.w_v = read_per_channel(is);
        site.q_act = read_uniform(is);
        site.k_act = read_uniform(is);
        site.v_act = read_uniform(is);
        site.use_agq = get_u8(is) != 0;
        site.attn.scale = get_f32(is);
        site.attn.bits = get_u8(is);
        site.attn.tau = get_u8(is);
        const std::uint64_t n = get_u64(is);
        for (std::uint64_t i = 0; i < n; ++i) {
            const int tau = get_u8(is);
            site.tau_errors[tau] = get_f64(is);
        }
    }
    return qm;
}

std::string read_file(const std::string& path) {
    auto is = open_in(path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    auto os = open_out(path);
    os << text;
    if (!os) throw IoError(IoError::write_failed, "write failed: " + path);
}

}  // namespace attnquant
