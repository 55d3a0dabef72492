#pragma once

#include <cmath>
#include <stdexcept>

#include "projsde/bands.hpp"

namespace projsde {

/// Shifted Sobolev seminorm: (sum over |k| > L_alpha of
/// (1 + |k| - L_alpha)^(2 gamma) |phi_hat|^2)^(1/2).
///
/// The summation starts strictly above L_alpha, the convention that makes the
/// half-regularity identity with the geq-projection exact (see the test
/// suite); the weight at the innermost counted shell is then >= 1.
inline double shifted_seminorm_sq(const SpectralField& f, double gamma, int L,
                                  const FreqGeometry& geom) {
    if (gamma < 0.0) throw std::invalid_argument("seminorm: gamma must be >= 0");
    if (L < 0) throw std::invalid_argument("seminorm: L must be >= 0");
    double s = 0.0;
    const int n = f.n_modes();
    for (int alpha = 0; alpha < f.m; ++alpha) {
        const double thr = geom.threshold(alpha, L);
        for (int i = 0; i < n; ++i) {
            const double kabs = f.lattice->mode_abs(i);
            if (kabs > thr)
                s += std::pow(1.0 + kabs - thr, 2.0 * gamma) * std::norm(f.at(alpha, i));
        }
    }
    return s;
}

inline double shifted_seminorm(const SpectralField& f, double gamma, int L,
                               const FreqGeometry& geom) {
    return std::sqrt(shifted_seminorm_sq(f, gamma, L, geom));
}

/// Plain Sobolev norm with weight (1 + |k|)^(2 gamma).
inline double sobolev_norm_sq(const SpectralField& f, double gamma) {
    double s = 0.0;
    const int n = f.n_modes();
    for (int alpha = 0; alpha < f.m; ++alpha)
        for (int i = 0; i < n; ++i)
            s += std::pow(1.0 + f.lattice->mode_abs(i), 2.0 * gamma) * std::norm(f.at(alpha, i));
    return s;
}

inline double sobolev_norm(const SpectralField& f, double gamma) {
    return std::sqrt(sobolev_norm_sq(f, gamma));
}

/// Smallest level at which a mode counts as low: min{L >= 0 : |k| <= L_alpha}.
/// Found by bisection on the same comparison project() uses, so band
/// membership and the energy median can never disagree at a boundary.
inline int low_entry_level(double kabs, int alpha, const FreqGeometry& geom) {
    if (geom.is_low(alpha, kabs, 0)) return 0;
    int lo = 0;  // not yet low
    int hi = 1;
    while (!geom.is_low(alpha, kabs, hi)) {
        lo = hi;
        hi *= 2;
        if (hi > (1 << 28)) throw std::runtime_error("low_entry_level: threshold overflow");
    }
    while (hi - lo > 1) {
        const int mid = lo + (hi - lo) / 2;
        if (geom.is_low(alpha, kabs, mid))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

/// Energy median: the smallest M >= 1 with mass above level M (exclusive of
/// low) no heavier than mass at or below. Always finite on a truncated
/// lattice; the zero field has no median.
inline int energy_median(const SpectralField& f, const FreqGeometry& geom) {
    const int n = f.n_modes();
    int max_level = 1;
    double total = 0.0;
    std::vector<double> entry_mass;  // entry_mass[M] = mass entering the low band at level M
    entry_mass.assign(2, 0.0);
    for (int alpha = 0; alpha < f.m; ++alpha)
        for (int i = 0; i < n; ++i) {
            const double v = std::norm(f.at(alpha, i));
            if (v == 0.0) continue;
            total += v;
            const int lvl = low_entry_level(f.lattice->mode_abs(i), alpha, geom);
            if (lvl >= static_cast<int>(entry_mass.size())) entry_mass.resize(lvl + 1, 0.0);
            max_level = std::max(max_level, lvl);
            entry_mass[lvl] += v;
        }
    if (total == 0.0) throw std::domain_error("energy_median: median undefined for zero field");
    double low = entry_mass[0];
    for (int M = 1; M <= max_level; ++M) {
        if (M < static_cast<int>(entry_mass.size())) low += entry_mass[M];
        const double geq = total - low;
        if (geq <= low) return M;
    }
    return max_level;  // unreachable: at max_level everything is low
}

}  // namespace projsde
