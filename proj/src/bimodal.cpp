// SPDX-License-Identifier: Apache-2.0
#include "attnquant/bimodal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace attnquant {

double SignFactor::positive_fraction() const {
    if (gamma.empty()) return 0.0;
    std::size_t pos = 0;
    for (std::int8_t g : gamma) pos += g > 0;
    return static_cast<double>(pos) / static_cast<double>(gamma.size());
}

Tensor SignFactor::as_tensor() const {
    Tensor t({gamma.size()});
    for (std::size_t i = 0; i < gamma.size(); ++i) t[i] = static_cast<float>(gamma[i]);
    return t;
}

Histogram build_histogram(const Tensor& x, int n_bins) {
    if (x.size() == 0) throw DomainError("build_histogram: empty input");
    if (n_bins < 1) throw DomainError("build_histogram: need at least one bin");

    auto [lo, hi] = minmax(x);
    if (lo == hi) {  // zero-width range: widen one ulp per side before binning
        lo = std::nextafter(lo, -std::numeric_limits<float>::infinity());
        hi = std::nextafter(hi, std::numeric_limits<float>::infinity());
    }

    Histogram h;
    h.edges.resize(n_bins + 1);
    const double dlo = lo, dhi = hi, width = (dhi - dlo) / n_bins;
    for (int i = 0; i <= n_bins; ++i) h.edges[i] = dlo + width * i;
    h.edges[n_bins] = dhi;

    std::vector<std::size_t> counts(n_bins, 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        // bin j covers (edge_j, edge_{j+1}]; bin 0 is closed at the left end
        const double pos = (static_cast<double>(x[i]) - dlo) / width;
        long idx = static_cast<long>(std::ceil(pos)) - 1;
        idx = std::clamp(idx, 0l, static_cast<long>(n_bins) - 1);
        ++counts[static_cast<std::size_t>(idx)];
    }

    h.probs.resize(n_bins);
    const double total = static_cast<double>(x.size());
    for (int i = 0; i < n_bins; ++i) h.probs[i] = counts[i] / total;
    return h;
}

BimodalVerdict discriminate_histogram(const Histogram& h, const HistogramConfig& cfg) {
    const int n_bins = static_cast<int>(h.probs.size());
    if (cfg.top_k < 1 || cfg.top_k > n_bins)
        throw DomainError("discriminator: top_k must be in [1, n_bins]");
    if (cfg.theta <= 0.0 || cfg.theta > 1.0 || cfg.eta <= 0.0 || cfg.eta >= 1.0)
        throw DomainError("discriminator: theta/eta out of range");

    BimodalVerdict v;

    int nonempty = 0;
    for (double p : h.probs) nonempty += p > 0.0;
    if (nonempty < cfg.top_k) return v;  // too sparse to form two clusters

    // top-k bin indices by probability, ties broken by lower index
    std::vector<int> order(n_bins);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return h.probs[a] > h.probs[b]; });
    std::vector<int> top(order.begin(), order.begin() + cfg.top_k);
    std::sort(top.begin(), top.end());

    double mass = 0.0;
    for (int i : top) mass += h.probs[i];
    v.mass_topk = mass;

    // split the sorted indices at the single largest gap
    std::size_t split = 1;
    int best_gap = -1;
    for (std::size_t i = 1; i < top.size(); ++i) {
        const int gap = top[i] - top[i - 1];
        if (gap > best_gap) {
            best_gap = gap;
            split = i;
        }
    }

    const auto cluster_of = [&](std::size_t begin, std::size_t end, double& center,
                                double& radius) {
        double sum = 0.0;
        for (std::size_t i = begin; i < end; ++i) sum += top[i];
        center = sum / static_cast<double>(end - begin);
        radius = 0.0;
        for (std::size_t i = begin; i < end; ++i)
            radius = std::max(radius, std::abs(top[i] - center));
    };
    cluster_of(0, split, v.center_neg, v.radius_neg);
    cluster_of(split, top.size(), v.center_pos, v.radius_pos);

    const bool mass_ok = mass >= cfg.theta;
    const double separation =
        std::abs(v.center_pos - v.center_neg) - (v.radius_pos + v.radius_neg);
    const bool split_ok = separation >= cfg.eta * n_bins;
    v.is_bimodal = mass_ok && split_ok;
    return v;
}

namespace {

struct Peak {
    int index;
    double height;
};

}  // namespace

BimodalVerdict discriminate_kde(const Tensor& x, const KdeConfig& cfg) {
    BimodalVerdict v;
    if (x.size() == 0) throw DomainError("discriminate_kde: empty input");
    if (cfg.grid_points < 8) throw DomainError("discriminate_kde: grid too small");

    const std::size_t m = x.size();
    auto [flo, fhi] = minmax(x);
    if (flo == fhi) return v;  // fewer than two distinct values

    // Scott bandwidth from the sample standard deviation
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += x[i];
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double d = x[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(m);
    const double sigma = std::sqrt(var);
    if (sigma == 0.0) return v;
    const double bw = sigma * std::pow(static_cast<double>(m), -0.2);

    // density on a uniform grid; samples beyond 8 bandwidths contribute < 1e-14
    // of a kernel and are skipped via a sorted window
    std::vector<double> sorted(x.data(), x.data() + m);
    std::sort(sorted.begin(), sorted.end());

    const int g = cfg.grid_points;
    const double lo = flo, hi = fhi, step = (hi - lo) / (g - 1);
    const double cutoff = 8.0 * bw;
    const double norm = 1.0 / (static_cast<double>(m) * bw * std::sqrt(2.0 * M_PI));
    std::vector<double> density(g, 0.0);
    for (int i = 0; i < g; ++i) {
        const double c = lo + step * i;
        const auto begin = std::lower_bound(sorted.begin(), sorted.end(), c - cutoff);
        const auto end = std::upper_bound(begin, sorted.end(), c + cutoff);
        double acc = 0.0;
        for (auto it = begin; it != end; ++it) {
            const double z = (c - *it) / bw;
            acc += std::exp(-0.5 * z * z);
        }
        density[i] = norm * acc;
    }

    // local maxima (plateaus count once, boundary points included)
    std::vector<Peak> peaks;
    for (int i = 0; i < g; ++i) {
        const double d = density[i];
        const bool left_ok = i == 0 || density[i - 1] < d;
        const bool right_ok = i == g - 1 || density[i + 1] <= d;
        if (left_ok && right_ok && d > 0.0) peaks.push_back({i, d});
    }

    double max_h = 0.0;
    for (const Peak& p : peaks) max_h = std::max(max_h, p.height);
    std::erase_if(peaks, [&](const Peak& p) { return p.height < cfg.min_height_frac * max_h; });

    // drop the smaller of any pair closer than the separation threshold
    const double min_sep = cfg.min_separation_frac * static_cast<double>(g - 1);
    while (peaks.size() > 1) {
        std::size_t worst_a = 0, worst_b = 0;
        double closest = min_sep;
        for (std::size_t a = 0; a + 1 < peaks.size(); ++a) {
            const double d = peaks[a + 1].index - peaks[a].index;
            if (d < closest) {
                closest = d;
                worst_a = a;
                worst_b = a + 1;
            }
        }
        if (worst_a == worst_b) break;  // all pairs separated
        const std::size_t victim =
            peaks[worst_a].height <= peaks[worst_b].height ? worst_a : worst_b;
        peaks.erase(peaks.begin() + static_cast<std::ptrdiff_t>(victim));
    }

    if (peaks.size() != 2) return v;

    // density-weighted midpoint in grid units
    double wsum = 0.0, wcenter = 0.0;
    for (int i = 0; i < g; ++i) {
        wsum += density[i];
        wcenter += density[i] * i;
    }
    const double midpoint = wcenter / wsum;
    if (!(peaks[0].index < midpoint && peaks[1].index > midpoint)) return v;

    // radius = half width at half maximum, scanned on the grid
    const auto hwhm = [&](const Peak& p) {
        const double half = 0.5 * p.height;
        int l = p.index, r = p.index;
        while (l > 0 && density[l] > half) --l;
        while (r < g - 1 && density[r] > half) ++r;
        return 0.5 * static_cast<double>(r - l);
    };
    v.center_neg = peaks[0].index;
    v.center_pos = peaks[1].index;
    v.radius_neg = hwhm(peaks[0]);
    v.radius_pos = hwhm(peaks[1]);

    // mass fraction inside the two peak bands
    const auto band_count = [&](double center, double radius) {
        const double a = lo + step * (center - radius), b = lo + step * (center + radius);
        const auto begin = std::lower_bound(sorted.begin(), sorted.end(), a);
        const auto end = std::upper_bound(begin, sorted.end(), b);
        return static_cast<double>(end - begin);
    };
    v.mass_topk = (band_count(v.center_neg, v.radius_neg) +
                   band_count(v.center_pos, v.radius_pos)) /
                  static_cast<double>(m);
    v.is_bimodal = true;
    return v;
}

SignFactor compute_gamma(const Tensor& k_act) {
    const Tensor means = channel_mean(k_act);
    SignFactor g;
    g.gamma.resize(means.size());
    for (std::size_t j = 0; j < means.size(); ++j) g.gamma[j] = means[j] >= 0.0f ? 1 : -1;
    return g;
}

AttentionBlockParams apply_big(const AttentionBlockParams& block, const SignFactor& g) {
    if (g.gamma.size() != block.channels())
        throw ShapeError("apply_big: sign factor length must equal output channels");
    const Tensor gv = g.as_tensor();
    AttentionBlockParams out = block;
    out.w_q = col_scale(block.w_q, gv);
    out.w_k = col_scale(block.w_k, gv);
    for (std::size_t j = 0; j < gv.size(); ++j) {
        out.b_q[j] = block.b_q[j] * gv[j];
        out.b_k[j] = block.b_k[j] * gv[j];
    }
    return out;
}

}  // namespace attnquant
