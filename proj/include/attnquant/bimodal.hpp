// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "attnquant/attention.hpp"
#include "attnquant/tensor.hpp"

namespace attnquant {

struct HistogramConfig {
    int n_bins = 128;
    int top_k = 32;
    double theta = 0.7;  // minimum probability mass of the top-k bins
    double eta = 0.2;    // minimum peak separation as a fraction of n_bins
};

/// Equal-width frequency histogram over [min(x), max(x)]. The first bin is
/// closed on both ends, the rest are half-open (lo, hi].
struct Histogram {
    std::vector<double> edges;  // n_bins + 1, strictly increasing
    std::vector<double> probs;  // n_bins, sums to 1
};

/// Two-peak detection result. Centers and radii are in bin-index units for
/// the histogram detector and grid-index units for the KDE detector; for
/// KDE, mass_topk is the sample fraction inside the two peak bands.
struct BimodalVerdict {
    bool is_bimodal = false;
    double center_neg = 0.0;
    double center_pos = 0.0;
    double radius_neg = 0.0;
    double radius_pos = 0.0;
    double mass_topk = 0.0;
};

struct KdeConfig {
    int grid_points = 512;
    double min_height_frac = 0.1;       // of the global density maximum
    double min_separation_frac = 0.25;  // of the data range
};

/// Channel-wise sign factor: +1 where the channel mean is >= 0, else -1.
struct SignFactor {
    std::vector<std::int8_t> gamma;

    double positive_fraction() const;
    Tensor as_tensor() const;
};

Histogram build_histogram(const Tensor& x, int n_bins);

/// Bimodal iff (a) the top-k bins hold mass >= theta and (b) splitting their
/// sorted indices at the largest gap gives two clusters whose center distance
/// minus the radii is >= eta * n_bins.
BimodalVerdict discriminate_histogram(const Histogram& h, const HistogramConfig& cfg);

/// Gaussian KDE (Scott bandwidth) on a uniform grid; local maxima below
/// min_height_frac of the peak are dropped, then the smaller of any pair
/// closer than min_separation_frac of the range is dropped until all
/// survivors are far apart. Bimodal iff exactly two peaks remain, one on
/// each side of the density-weighted midpoint.
BimodalVerdict discriminate_kde(const Tensor& x, const KdeConfig& cfg);

SignFactor compute_gamma(const Tensor& k_act);

/// Fold the sign factor into the query and key linears (weights and biases);
/// an offline rewrite that leaves QK^T unchanged. Value params are untouched.
AttentionBlockParams apply_big(const AttentionBlockParams& block, const SignFactor& g);

}  // namespace attnquant
