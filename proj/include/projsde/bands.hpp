#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "projsde/spectral_field.hpp"

namespace projsde {

/// Per-component frequency thresholds L_alpha = nu_alpha^(-1/(2a)) * L.
///
/// A mode (alpha, k) counts as "low at level L" iff |k| <= L_alpha, which is
/// the same as nu_alpha * zeta_k <= zeta_L: bands group modes by dissipation
/// rate, not by raw frequency. Threshold comparisons are raw double
/// comparisons against |k| = sqrt(sum k_i^2); no epsilon adjustment.
class FreqGeometry {
public:
    FreqGeometry() = default;
    FreqGeometry(std::vector<double> nu, double a) : nu_(std::move(nu)), a_(a) {
        for (double v : nu_)
            if (!(v > 0.0)) throw std::invalid_argument("geometry: viscosities must be > 0");
        scale_.reserve(nu_.size());
        for (double v : nu_) scale_.push_back(std::pow(v, -1.0 / (2.0 * a_)));
    }

    int components() const { return static_cast<int>(nu_.size()); }
    double a() const { return a_; }
    double nu(int alpha) const { return nu_[alpha]; }
    double nu_min() const {
        double v = nu_[0];
        for (double x : nu_) v = std::min(v, x);
        return v;
    }
    double nu_max() const {
        double v = nu_[0];
        for (double x : nu_) v = std::max(v, x);
        return v;
    }

    /// L_alpha for integer band level L.
    double threshold(int alpha, int L) const { return scale_[alpha] * L; }

    bool is_low(int alpha, double kabs, int L) const { return kabs <= threshold(alpha, L); }

private:
    std::vector<double> nu_;
    double a_ = 1.0;
    std::vector<double> scale_;
};

enum class Band { Low, Central, High, Leq, Geq };

/// Frequency-band selector at integer level L with per-component thresholds.
/// low: |k| <= L_a; central: L_a < |k| <= (L+1)_a; high: |k| > (L+1)_a;
/// leq = low + central; geq = central + high.
struct BandSpec {
    int L = 0;
    Band selector = Band::Low;
    std::vector<double> lo;  // keep iff lo < |k| <= hi, per component
    std::vector<double> hi;
};

inline BandSpec make_band(int L, Band selector, const FreqGeometry& geom) {
    if (L < 0) throw std::invalid_argument("band: level must be >= 0");
    BandSpec b;
    b.L = L;
    b.selector = selector;
    const int m = geom.components();
    b.lo.resize(m);
    b.hi.resize(m);
    const double inf = std::numeric_limits<double>::infinity();
    for (int alpha = 0; alpha < m; ++alpha) {
        const double tL = geom.threshold(alpha, L);
        const double tL1 = geom.threshold(alpha, L + 1);
        switch (selector) {
            case Band::Low: b.lo[alpha] = -1.0; b.hi[alpha] = tL; break;
            case Band::Central: b.lo[alpha] = tL; b.hi[alpha] = tL1; break;
            case Band::High: b.lo[alpha] = tL1; b.hi[alpha] = inf; break;
            case Band::Leq: b.lo[alpha] = -1.0; b.hi[alpha] = tL1; break;
            case Band::Geq: b.lo[alpha] = tL; b.hi[alpha] = inf; break;
        }
    }
    return b;
}

inline bool band_contains(const BandSpec& b, int alpha, double kabs) {
    return kabs > b.lo[alpha] && kabs <= b.hi[alpha];
}

/// Zeroes every coefficient outside the band. Idempotent and linear.
inline SpectralField project(const SpectralField& f, const BandSpec& band) {
    SpectralField out = f;
    const int n = f.n_modes();
    for (int alpha = 0; alpha < f.m; ++alpha)
        for (int i = 0; i < n; ++i)
            if (!band_contains(band, alpha, f.lattice->mode_abs(i)))
                out.at(alpha, i) = Complex{0.0, 0.0};
    return out;
}

/// Squared L2 mass inside the band, without materializing the projection.
inline double band_sq_norm(const SpectralField& f, const BandSpec& band) {
    double s = 0.0;
    const int n = f.n_modes();
    for (int alpha = 0; alpha < f.m; ++alpha)
        for (int i = 0; i < n; ++i)
            if (band_contains(band, alpha, f.lattice->mode_abs(i)))
                s += std::norm(f.at(alpha, i));
    return s;
}

/// Squared mass at |k| <= L_alpha (low) and |k| > L_alpha (geq) in one sweep.
inline void split_sq_norm(const SpectralField& f, const FreqGeometry& geom, int L,
                          double& low_sq, double& geq_sq) {
    low_sq = 0.0;
    geq_sq = 0.0;
    const int n = f.n_modes();
    for (int alpha = 0; alpha < f.m; ++alpha) {
        const double thr = geom.threshold(alpha, L);
        for (int i = 0; i < n; ++i) {
            const double v = std::norm(f.at(alpha, i));
            if (f.lattice->mode_abs(i) <= thr)
                low_sq += v;
            else
                geq_sq += v;
        }
    }
}

}  // namespace projsde
