#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "projsde/median_machine.hpp"
#include "projsde/norms.hpp"

namespace projsde {

struct LyapParams {
    double kappa0 = 1.0;  // weight of the median term
    int k0 = 1;           // seminorm shift above the median
    double kappa = 0.5;   // relative-energy weight in the skeleton functional

    void validate() const {
        if (!(kappa0 > 0.0)) throw std::invalid_argument("lyapunov: kappa0 must be > 0");
        if (k0 < 1) throw std::invalid_argument("lyapunov: k0 must be >= 1");
        if (!(kappa > 0.0)) throw std::invalid_argument("lyapunov: kappa must be > 0");
    }
};

/// log G(pi) = kappa0 M(pi) + |pi|^2_{1/2, M(pi)+k0}. G itself overflows for
/// large medians, so everything downstream works with the log.
inline double log_functional_G(const SpectralField& pi, const LyapParams& p,
                               const FreqGeometry& geom) {
    const int M = energy_median(pi, geom);
    return p.kappa0 * M + shifted_seminorm_sq(pi, 0.5, M + p.k0, geom);
}

inline double functional_G(const SpectralField& pi, const LyapParams& p,
                           const FreqGeometry& geom) {
    return std::exp(log_functional_G(pi, p, geom));
}

/// log F(kappa, M, pi) = kappa0 M + kappa |w|^2_{1/2, M+k0} with
/// w = Pi^>_M pi / |Pi^<_M pi|. Needs positive low-frequency mass at M.
inline double log_functional_F(double kappa, int M, const SpectralField& pi,
                               const LyapParams& p, const FreqGeometry& geom) {
    double low_sq, geq_sq;
    split_sq_norm(pi, geom, M, low_sq, geq_sq);
    if (low_sq <= 0.0) throw WUndefined{};
    return p.kappa0 * M + kappa * shifted_seminorm_sq(pi, 0.5, M + p.k0, geom) / low_sq;
}

inline double functional_F(double kappa, int M, const SpectralField& pi, const LyapParams& p,
                           const FreqGeometry& geom) {
    return std::exp(log_functional_F(kappa, M, pi, p, geom));
}

struct ExponentEstimate {
    double lambda = 0.0;
    double stderr_ = 0.0;
    std::string method;  // "direct" or "fk"
    double burn_in = 0.0;
    double horizon = 0.0;
    int n_paths = 0;
};

namespace detail {
inline std::size_t index_at_or_before(const std::vector<double>& times, double t) {
    if (times.empty()) throw std::invalid_argument("estimator: empty record");
    std::size_t best = 0;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (times[i] <= t + 1e-12) best = i;
    return best;
}
}  // namespace detail

/// Per-path finite-difference slope of logr over [burn_in, horizon]; the
/// estimate is the path mean with the sample standard error across paths.
template <class RecordRange>
inline ExponentEstimate estimate_lambda_direct(const RecordRange& records, double burn_in,
                                               double horizon) {
    if (!(horizon > burn_in))
        throw std::invalid_argument("estimator: horizon must exceed burn_in");
    std::vector<double> slopes;
    for (const auto& rec : records) {
        const std::size_t i0 = detail::index_at_or_before(rec.t, burn_in);
        const std::size_t i1 = detail::index_at_or_before(rec.t, horizon);
        if (i1 <= i0) throw std::invalid_argument("estimator: horizon beyond recorded span");
        slopes.push_back((rec.logr[i1] - rec.logr[i0]) / (rec.t[i1] - rec.t[i0]));
    }
    ExponentEstimate est;
    est.method = "direct";
    est.burn_in = burn_in;
    est.horizon = horizon;
    est.n_paths = static_cast<int>(slopes.size());
    double mean = 0.0;
    for (double s : slopes) mean += s;
    mean /= slopes.size();
    double var = 0.0;
    for (double s : slopes) var += (s - mean) * (s - mean);
    est.lambda = mean;
    est.stderr_ = slopes.size() > 1
                      ? std::sqrt(var / (slopes.size() - 1) / slopes.size())
                      : 0.0;
    return est;
}

/// Time-and-ensemble average of the recorded drift samples over
/// (burn_in, horizon]; the standard error comes from batch means, which
/// absorbs the autocorrelation of the integrand.
template <class RecordRange>
inline ExponentEstimate estimate_lambda_fk(const RecordRange& records, double burn_in,
                                           double horizon, int batch = 100) {
    if (!(horizon > burn_in))
        throw std::invalid_argument("estimator: horizon must exceed burn_in");
    if (batch < 1) throw std::invalid_argument("estimator: batch must be >= 1");
    std::vector<double> batch_means;
    double total = 0.0;
    long long count = 0;
    int n_paths = 0;
    for (const auto& rec : records) {
        ++n_paths;
        double acc = 0.0;
        int in_batch = 0;
        for (std::size_t i = 0; i < rec.t.size(); ++i) {
            if (rec.t[i] <= burn_in || rec.t[i] > horizon + 1e-12) continue;
            total += rec.fk[i];
            ++count;
            acc += rec.fk[i];
            if (++in_batch == batch) {
                batch_means.push_back(acc / batch);
                acc = 0.0;
                in_batch = 0;
            }
        }
        if (in_batch > 0) batch_means.push_back(acc / in_batch);
    }
    if (count == 0) throw std::invalid_argument("estimator: no samples in window");
    ExponentEstimate est;
    est.method = "fk";
    est.burn_in = burn_in;
    est.horizon = horizon;
    est.n_paths = n_paths;
    est.lambda = total / count;
    if (batch_means.size() > 1) {
        double bm = 0.0;
        for (double b : batch_means) bm += b;
        bm /= batch_means.size();
        double var = 0.0;
        for (double b : batch_means) var += (b - bm) * (b - bm);
        est.stderr_ = std::sqrt(var / (batch_means.size() - 1) / batch_means.size());
    }
    return est;
}

/// Log of the ensemble mean of G from per-path log values (log-sum-exp).
inline double log_mean_exp(const std::vector<double>& logs) {
    if (logs.empty()) throw std::invalid_argument("log_mean_exp: empty");
    const double mx = *std::max_element(logs.begin(), logs.end());
    double s = 0.0;
    for (double v : logs) s += std::exp(v - mx);
    return mx + std::log(s / logs.size());
}

struct WilsonInterval {
    double p_hat = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

inline WilsonInterval wilson_interval(int successes, int n, double z = 1.959963984540054) {
    if (n < 1) throw std::invalid_argument("wilson_interval: n must be >= 1");
    WilsonInterval w;
    w.p_hat = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (w.p_hat + z2 / (2.0 * n)) / denom;
    const double half =
        z * std::sqrt(w.p_hat * (1.0 - w.p_hat) / n + z2 / (4.0 * n * n)) / denom;
    w.lo = std::max(0.0, center - half);
    w.hi = std::min(1.0, center + half);
    return w;
}

}  // namespace projsde
