#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "projsde/norms.hpp"

namespace projsde {

enum class Marker : char { C = 'C', D = 'D' };

/// Concentrated/diluted marker at level L: C iff the two shells below L carry
/// at least a quarter of the low-frequency mass,
///   |(Pi^c_L + Pi^c_{L-1}) u| >= q |Pi^<_{L-1} u|  (q = 1/4 by default).
/// The comparison is non-strict, so an exact boundary counts as C.
inline Marker marker(int L, const SpectralField& u, const FreqGeometry& geom,
                     double quarter = 0.25) {
    if (L < 1) throw std::invalid_argument("marker: level must be >= 1");
    double low_sq, shells_sq, rest_sq;
    // shells = thr(L-1) < |k| <= thr(L+1); low = |k| <= thr(L-1)
    low_sq = shells_sq = rest_sq = 0.0;
    for (int alpha = 0; alpha < u.m; ++alpha) {
        const double t_lo = geom.threshold(alpha, L - 1);
        const double t_hi = geom.threshold(alpha, L + 1);
        for (int i = 0; i < u.n_modes(); ++i) {
            const double kabs = u.lattice->mode_abs(i);
            const double v = std::norm(u.at(alpha, i));
            if (kabs <= t_lo)
                low_sq += v;
            else if (kabs <= t_hi)
                shells_sq += v;
            else
                rest_sq += v;
        }
    }
    if (low_sq + shells_sq + rest_sq == 0.0)
        throw std::domain_error("marker: zero field");
    return std::sqrt(shells_sq) >= quarter * std::sqrt(low_sq) ? Marker::C : Marker::D;
}

/// Relative energies w = |Pi^>_L u| / |Pi^<_L u| and
/// w_geq = |Pi^geq_L u| / |Pi^<_L u|.
struct RelativeEnergy {
    double w = 0.0;
    double wgeq = 0.0;
};

struct WUndefined : std::domain_error {
    WUndefined() : std::domain_error("relative energy undefined: low-frequency norm vanishes") {}
};

inline RelativeEnergy relative_energy(const SpectralField& u, int L, const FreqGeometry& geom) {
    if (L < 0) throw std::invalid_argument("relative_energy: level must be >= 0");
    double low_sq = 0.0, central_sq = 0.0, high_sq = 0.0;
    for (int alpha = 0; alpha < u.m; ++alpha) {
        const double tL = geom.threshold(alpha, L);
        const double tL1 = geom.threshold(alpha, L + 1);
        for (int i = 0; i < u.n_modes(); ++i) {
            const double kabs = u.lattice->mode_abs(i);
            const double v = std::norm(u.at(alpha, i));
            if (kabs <= tL)
                low_sq += v;
            else if (kabs <= tL1)
                central_sq += v;
            else
                high_sq += v;
        }
    }
    if (low_sq <= 0.0) throw WUndefined{};
    RelativeEnergy re;
    re.w = std::sqrt(high_sq / low_sq);
    re.wgeq = std::sqrt((central_sq + high_sq) / low_sq);
    return re;
}

/// Stopping thresholds; the defaults match the analysis they come from and
/// are exposed only for sensitivity runs.
struct SkeletonConfig {
    double delta = 0.5;            // padding length, in (0,1)
    double tau_less = 0.5;         // w threshold ending the dissipation phase
    double sigma_pad = 1.25;       // w_geq guard during padding
    double sigma_dil = 1.5;        // w_geq guard during dilution
    double sigma_dis = 2.0;        // w_geq guard during dissipation
    double marker_quarter = 0.25;  // concentrated/diluted mass fraction
    double window_cap = 1.0;       // per-window stopping cap
    int k0 = 1;                    // seminorm shift for jump snapshots
    double gamma = 0.5;            // seminorm regularity for jump snapshots

    void validate() const {
        if (!(delta > 0.0 && delta < 1.0))
            throw std::invalid_argument("skeleton: delta must lie in (0,1)");
        if (!(tau_less > 0.0 && sigma_pad > 0.0 && sigma_dil > sigma_pad &&
              sigma_dis > sigma_dil))
            throw std::invalid_argument("skeleton: thresholds must be positive and increasing");
        if (!(marker_quarter > 0.0 && marker_quarter < 1.0))
            throw std::invalid_argument("skeleton: marker fraction must lie in (0,1)");
        if (k0 < 1) throw std::invalid_argument("skeleton: k0 must be >= 1");
    }
};

/// One jump of the skeleton median process.
struct JumpRecord {
    int i = 0;               // jump index (this record closes cycle i)
    double Ti = 0.0;         // cycle start
    double Tnext = 0.0;      // jump time
    int Mi = 1;              // median level during the cycle
    int Mnext = 1;           // level after the jump
    double V = 0.0;          // padding end
    double S = 0.0;          // dilution end
    char event = 'B';        // 'A': padding expired, diluted exit, dissipation hit
    Marker marker_at_S = Marker::C;
    char pad_exit = 'd';     // 'd' deadline, 's' sigma guard
    char dil_exit = 'c';     // 'm' marker, 's' sigma guard, 'c' cap
    char dis_exit = 'c';     // 't' tau_less, 's' sigma guard, 'c' cap
    double wgeq_at_S = 0.0;  // at level Mi - 2
    double w_seminorm_pre = 0.0;   // |w|_{gamma, Mi + k0} at Tnext-
    double w_seminorm_post = 0.0;  // |w|_{gamma, Mnext + k0} at Tnext
    int median_at_jump = 1;        // M(pi) at Tnext
    bool level_clamped = false;    // dissipation level Mi - 2 clamped at 0
};

/// Grid-time skeleton median state machine.
///
/// Cycle i starts at T_i with level M_i = M_{T_i} and walks through
///   padding     until V = min(T_i + delta, first grid t with wgeq(M_i) >= 5/4),
///   dilution    until S = first grid t with marker(M_i - 1) diluted
///               (only counted when wgeq(M_i) < 3/2 at the same instant),
///               or wgeq(M_i) >= 3/2, capped at V + 1,
///   dissipation until T_{i+1} = first grid t with w(M_i - 2) <= 1/2 or
///               wgeq(M_i - 2) >= 2, capped at S + 1,
/// then jumps: M_{i+1} = M_i - 1 if M(pi) < M_i, else M(pi). Event A is the
/// all-clean cycle (padding expired, diluted exit, dissipation threshold hit)
/// and forces the decrement by one. Conditions are evaluated at integration
/// grid points only; the reported stopping time is the first grid point
/// satisfying the condition (bias O(dt)). A same-instant tie between the
/// dilution marker and its guard counts as the guard firing, so the diluted
/// exit bound on wgeq(M_i - 2) is exact at grid times.
///
/// Deadlines are tracked in integer step counts derived from dt, so windows
/// never drift against the time grid.
class SkeletonMachine {
public:
    SkeletonMachine(SkeletonConfig cfg, const FreqGeometry& geom, double dt)
        : cfg_(cfg), geom_(geom), dt_(dt) {
        cfg_.validate();
        delta_steps_ = steps_for(cfg_.delta);
        cap_steps_ = steps_for(cfg_.window_cap);
    }

    bool initialized() const { return initialized_; }
    bool aborted() const { return aborted_; }
    const std::string& abort_reason() const { return abort_reason_; }
    double abort_time() const { return abort_time_; }
    int current_level() const { return Mi_; }
    int jump_count() const { return i_; }
    double cycle_start() const { return Ti_; }

    /// Feed the state at one grid time; returns a record when a jump closes.
    /// Must be called at every grid point including t = 0.
    std::optional<JumpRecord> observe(long long step, double t, const SpectralField& pi) {
        if (aborted_) return std::nullopt;
        try {
            return observe_impl(step, t, pi);
        } catch (const WUndefined&) {
            aborted_ = true;
            abort_time_ = t;
            abort_reason_ = "relative energy undefined (low band vanished)";
            return std::nullopt;
        }
    }

private:
    long long steps_for(double span) const {
        const long long s = static_cast<long long>(std::ceil(span / dt_ - 1e-9));
        return s > 0 ? s : 1;
    }

    enum class Phase { Padding, Dilution, Dissipation };

    std::optional<JumpRecord> observe_impl(long long step, double t, const SpectralField& pi) {
        if (!initialized_) {
            Mi_ = energy_median(pi, geom_);
            Ti_ = t;
            phase_ = Phase::Padding;
            window_start_step_ = step;
            initialized_ = true;
            return std::nullopt;
        }
        // A single grid instant may close several phases in sequence.
        for (int guard = 0; guard < 4; ++guard) {
            switch (phase_) {
                case Phase::Padding: {
                    const RelativeEnergy re = relative_energy(pi, Mi_, geom_);
                    const bool sigma = re.wgeq >= cfg_.sigma_pad;
                    const bool deadline = step >= window_start_step_ + delta_steps_;
                    if (!sigma && !deadline) return std::nullopt;
                    pending_.V = t;
                    pending_.pad_exit = sigma ? 's' : 'd';
                    phase_ = Phase::Dilution;
                    window_start_step_ = step;
                    break;  // re-evaluate dilution at this same instant
                }
                case Phase::Dilution: {
                    const RelativeEnergy re = relative_energy(pi, Mi_, geom_);
                    const int mlevel = Mi_ - 1 >= 1 ? Mi_ - 1 : 1;
                    const Marker mk = marker(mlevel, pi, geom_, cfg_.marker_quarter);
                    const bool guard_fired = re.wgeq >= cfg_.sigma_dil;
                    const bool diluted = mk == Marker::D && !guard_fired;
                    const bool capped = step >= window_start_step_ + cap_steps_;
                    if (!diluted && !guard_fired && !capped) return std::nullopt;
                    pending_.S = t;
                    pending_.marker_at_S = mk;
                    pending_.dil_exit = diluted ? 'm' : (guard_fired ? 's' : 'c');
                    phase_ = Phase::Dissipation;
                    window_start_step_ = step;
                    at_dissipation_entry_ = true;
                    break;
                }
                case Phase::Dissipation: {
                    const int L = Mi_ - 2 >= 0 ? Mi_ - 2 : 0;
                    pending_.level_clamped = Mi_ - 2 < 0;
                    const RelativeEnergy re = relative_energy(pi, L, geom_);
                    if (at_dissipation_entry_) {
                        pending_.wgeq_at_S = re.wgeq;
                        at_dissipation_entry_ = false;
                    }
                    const bool tau = re.w <= cfg_.tau_less;
                    const bool sigma = re.wgeq >= cfg_.sigma_dis;
                    const bool capped = step >= window_start_step_ + cap_steps_;
                    if (!tau && !sigma && !capped) return std::nullopt;
                    pending_.dis_exit = tau ? 't' : (sigma ? 's' : 'c');
                    return close_cycle(step, t, pi);
                }
            }
        }
        throw std::runtime_error("skeleton machine: phase cascade did not settle");
    }

    std::optional<JumpRecord> close_cycle(long long step, double t, const SpectralField& pi) {
        JumpRecord rec = pending_;
        pending_ = JumpRecord{};
        rec.i = i_;
        rec.Ti = Ti_;
        rec.Tnext = t;
        rec.Mi = Mi_;
        rec.median_at_jump = energy_median(pi, geom_);
        rec.Mnext = rec.median_at_jump < Mi_ ? Mi_ - 1 : rec.median_at_jump;
        rec.event = (rec.pad_exit == 'd' && rec.dil_exit == 'm' && rec.dis_exit == 't' &&
                     Mi_ >= 2)
                        ? 'A'
                        : 'B';
        rec.w_seminorm_pre = w_seminorm(pi, Mi_);
        rec.w_seminorm_post = w_seminorm(pi, rec.Mnext);

        i_ += 1;
        Ti_ = t;
        Mi_ = rec.Mnext;
        phase_ = Phase::Padding;
        window_start_step_ = step;
        return rec;
    }

    /// |w|_{gamma, M + k0} with w = Pi^>_M pi / |Pi^<_M pi|. Since k0 >= 1 the
    /// seminorm window sits strictly above the level-M high band, so it can be
    /// taken on pi directly and scaled by the low norm.
    double w_seminorm(const SpectralField& pi, int M) const {
        double low_sq, geq_sq;
        split_sq_norm(pi, geom_, M, low_sq, geq_sq);
        if (low_sq <= 0.0) throw WUndefined{};
        return std::sqrt(shifted_seminorm_sq(pi, cfg_.gamma, M + cfg_.k0, geom_) / low_sq);
    }

    SkeletonConfig cfg_;
    FreqGeometry geom_;
    double dt_;
    long long delta_steps_ = 1;
    long long cap_steps_ = 1;

    bool initialized_ = false;
    bool aborted_ = false;
    double abort_time_ = 0.0;
    std::string abort_reason_;

    int i_ = 0;
    double Ti_ = 0.0;
    int Mi_ = 1;
    Phase phase_ = Phase::Padding;
    long long window_start_step_ = 0;
    bool at_dissipation_entry_ = false;
    JumpRecord pending_;
};

enum class StopKind { TauLess, SigmaGeq, SigmaDiluted };

struct StopResult {
    double time = 0.0;
    bool fired = false;  // false means the window cap was returned
};

/// Offline stopping-time detector over a recorded stream of fields sampled at
/// grid times. Returns the first grid time >= window_start at which the
/// condition holds; tau_less and sigma_geq fall back to the cap
/// window_start + 1, the diluted stop scans to the end of the stream.
inline StopResult detect_stop(StopKind kind, int L, double beta, double window_start,
                              const std::vector<double>& times,
                              const std::vector<SpectralField>& fields,
                              const FreqGeometry& geom, double marker_quarter = 0.25) {
    if (times.size() != fields.size())
        throw std::invalid_argument("detect_stop: stream length mismatch");
    const double cap = window_start + 1.0;
    for (std::size_t n = 0; n < times.size(); ++n) {
        const double t = times[n];
        if (t < window_start) continue;
        if (kind != StopKind::SigmaDiluted && t > cap + 1e-12) break;
        bool hit = false;
        switch (kind) {
            case StopKind::TauLess:
                hit = relative_energy(fields[n], L, geom).w <= beta;
                break;
            case StopKind::SigmaGeq:
                hit = relative_energy(fields[n], L, geom).wgeq >= beta;
                break;
            case StopKind::SigmaDiluted:
                hit = marker(L, fields[n], geom, marker_quarter) == Marker::D;
                break;
        }
        if (hit) return {t, true};
    }
    if (kind == StopKind::SigmaDiluted)
        return {times.empty() ? window_start : times.back(), false};
    return {cap, false};
}

/// Summary statistics over an ensemble of jump records.
struct StoppingStats {
    int n_jumps = 0;
    double max_gap = 0.0;
    double mean_gap = 0.0;
    std::vector<int> gap_histogram;  // bins of width 0.25 on [0, 3.5)
    double frac_gap_above_eps = 0.0;
    double eps = 0.1;
    double frac_A = 0.0;
    double mean_dM = 0.0;
    double tail_rate = 0.0;  // fitted c in P(T_j <= t*) ~ exp(-c j)
    int tail_points = 0;
};

inline StoppingStats stopping_time_stats(const std::vector<std::vector<JumpRecord>>& per_traj,
                                         double t_star, double eps = 0.1) {
    StoppingStats st;
    st.eps = eps;
    st.gap_histogram.assign(14, 0);
    double gap_sum = 0.0, dm_sum = 0.0;
    int n_above = 0, n_A = 0;
    std::size_t max_jumps = 0;
    for (const auto& recs : per_traj) {
        max_jumps = std::max(max_jumps, recs.size());
        for (const JumpRecord& r : recs) {
            const double gap = r.Tnext - r.Ti;
            st.n_jumps += 1;
            gap_sum += gap;
            st.max_gap = std::max(st.max_gap, gap);
            const int bin = std::min<int>(static_cast<int>(gap / 0.25), 13);
            st.gap_histogram[bin] += 1;
            if (gap > eps) ++n_above;
            if (r.event == 'A') ++n_A;
            dm_sum += r.Mnext - r.Mi;
        }
    }
    if (st.n_jumps == 0) throw std::invalid_argument("stopping_time_stats: no records");
    st.mean_gap = gap_sum / st.n_jumps;
    st.frac_gap_above_eps = static_cast<double>(n_above) / st.n_jumps;
    st.frac_A = static_cast<double>(n_A) / st.n_jumps;
    st.mean_dM = dm_sum / st.n_jumps;

    // Tail of P(T_j <= t*) in j: least-squares slope of log p_j.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int pts = 0;
    for (std::size_t j = 1; j <= max_jumps; ++j) {
        int cnt = 0;
        for (const auto& recs : per_traj)
            if (recs.size() >= j && recs[j - 1].Tnext <= t_star) ++cnt;
        const double p = static_cast<double>(cnt) / per_traj.size();
        if (p <= 0.0 || p >= 1.0) continue;
        const double x = static_cast<double>(j), y = std::log(p);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++pts;
    }
    if (pts >= 2) {
        const double denom = pts * sxx - sx * sx;
        if (denom != 0.0) st.tail_rate = -(pts * sxy - sx * sy) / denom;
    }
    st.tail_points = pts;
    return st;
}

/// Drift regression for the relative energy: fits one-step increments of
/// |w|^2 against |w|^2 and reports rates per unit time. The theory predicts
/// slope_rate <= -2 nu_min Delta_L + R with R a bounded remainder; the report
/// carries the fitted slope, the constant term R_hat, and the residual
/// variance rate.
struct DriftReport {
    double slope_rate = 0.0;      // fitted d|w|^2 / (|w|^2 dt)
    double const_rate = 0.0;      // fitted intercept / dt (R_hat)
    double resid_var_rate = 0.0;  // residual variance / dt
    int n = 0;
    bool slope_ok = false;        // slope_rate <= -2 nu_min Delta_L (1 - tol) + R_hat
};

inline DriftReport dissipation_diagnostic(const std::vector<double>& wsq, double dt,
                                          double nu_min, double gap, double tol = 0.1) {
    if (wsq.size() < 51)
        throw std::invalid_argument("dissipation_diagnostic: segment too short (< 50 steps)");
    const int n = static_cast<int>(wsq.size()) - 1;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = wsq[i];
        const double y = wsq[i + 1] - wsq[i];
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    DriftReport rep;
    rep.n = n;
    const double denom = n * sxx - sx * sx;
    double slope = 0.0, icept = 0.0;
    if (denom != 0.0) {
        slope = (n * sxy - sx * sy) / denom;
        icept = (sy - slope * sx) / n;
    } else {
        icept = sy / n;
    }
    double rss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = (wsq[i + 1] - wsq[i]) - (slope * wsq[i] + icept);
        rss += r * r;
    }
    rep.slope_rate = slope / dt;
    rep.const_rate = icept / dt;
    rep.resid_var_rate = rss / n / dt;
    rep.slope_ok = rep.slope_rate <= -2.0 * nu_min * gap * (1.0 - tol) +
                                        std::max(rep.const_rate, 0.0);
    return rep;
}

}  // namespace projsde
