#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "projsde/rng.hpp"
#include "projsde/spectral_field.hpp"

namespace projsde {

enum class NoiseForm { DiagonalParametric, DiagonalTable, GeneralTable };

/// Coefficient tensor of a spatially homogeneous matrix-valued noise, stored
/// on its own truncated lattice (radius K_noise). Diagonal forms keep
/// Gamma^alpha_{beta,k} >= 0 per (alpha, beta, k); the general form keeps the
/// full 4-tensor Gamma^{alpha,alpha'}_{beta,beta',k}. Coefficients are even
/// in k so the driving field is real.
class NoiseSpec {
public:
    NoiseForm form = NoiseForm::DiagonalParametric;
    int m = 1;
    double c = 0.0;       // parametric amplitude
    double gamma0 = 0.0;  // parametric decay exponent

    static NoiseSpec parametric(int d, int m, int K_noise, double c, double gamma0) {
        if (c < 0.0) throw std::invalid_argument("noise: amplitude c must be >= 0");
        if (gamma0 <= 0.0) throw std::invalid_argument("noise: gamma0 must be > 0");
        NoiseSpec s;
        s.form = NoiseForm::DiagonalParametric;
        s.m = m;
        s.c = c;
        s.gamma0 = gamma0;
        s.lat_ = Lattice::make(d, K_noise);
        s.diag_.assign(static_cast<std::size_t>(m) * m * s.lat_->size(), 0.0);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                for (int i = 0; i < s.lat_->size(); ++i)
                    s.diag_[s.dix(a, b, i)] =
                        c * std::pow(1.0 + s.lat_->mode_abs(i), -2.0 * gamma0);
        return s;
    }

    /// entries: tuples (alpha, beta, k, value); the mirror at -k is implied.
    struct TableEntry {
        int alpha, beta;
        std::vector<int> k;
        double value;
    };
    static NoiseSpec diagonal_table(int d, int m, int K_noise,
                                    const std::vector<TableEntry>& entries) {
        NoiseSpec s;
        s.form = NoiseForm::DiagonalTable;
        s.m = m;
        s.lat_ = Lattice::make(d, K_noise);
        s.diag_.assign(static_cast<std::size_t>(m) * m * s.lat_->size(), 0.0);
        std::vector<int> seen(s.diag_.size(), -1);
        for (std::size_t e = 0; e < entries.size(); ++e) {
            const TableEntry& en = entries[e];
            if (en.alpha < 0 || en.alpha >= m || en.beta < 0 || en.beta >= m)
                throw std::invalid_argument("noise table: component index out of range");
            if (en.value < 0.0)
                throw std::invalid_argument("noise table: diagonal coefficients must be >= 0");
            const int idx = s.lat_->find(en.k);
            if (idx < 0) throw std::invalid_argument("noise table: mode outside noise lattice");
            const std::size_t slot = s.dix(en.alpha, en.beta, idx);
            const std::size_t mirror = s.dix(en.alpha, en.beta, s.lat_->neg_index(idx));
            if (seen[slot] >= 0)
                throw std::invalid_argument("noise table: duplicate entry at positions " +
                                            std::to_string(seen[slot]) + " and " +
                                            std::to_string(e));
            seen[slot] = static_cast<int>(e);
            if (mirror != slot) seen[mirror] = static_cast<int>(e);
            s.diag_[slot] = en.value;
            s.diag_[mirror] = en.value;
        }
        return s;
    }

    struct GeneralEntry {
        int alpha, alpha2, beta, beta2;
        std::vector<int> k;
        double value;
    };
    static NoiseSpec general_table(int d, int m, int K_noise,
                                   const std::vector<GeneralEntry>& entries) {
        NoiseSpec s;
        s.form = NoiseForm::GeneralTable;
        s.m = m;
        s.lat_ = Lattice::make(d, K_noise);
        s.gen_.assign(static_cast<std::size_t>(m) * m * m * m * s.lat_->size(), 0.0);
        for (const GeneralEntry& en : entries) {
            const int idx = s.lat_->find(en.k);
            if (idx < 0) throw std::invalid_argument("noise table: mode outside noise lattice");
            s.gen_[s.gix(en.alpha, en.alpha2, en.beta, en.beta2, idx)] = en.value;
            s.gen_[s.gix(en.alpha, en.alpha2, en.beta, en.beta2, s.lat_->neg_index(idx))] =
                en.value;
        }
        s.check_psd();
        return s;
    }

    const Lattice& lattice() const { return *lat_; }
    std::shared_ptr<const Lattice> lattice_ptr() const { return lat_; }
    bool is_diagonal() const { return form != NoiseForm::GeneralTable; }

    /// Gamma^alpha_{beta,k} for diagonal forms.
    double gamma_diag(int alpha, int beta, int mode) const { return diag_[dix(alpha, beta, mode)]; }

    /// Gamma^{alpha,alpha'}_{beta,beta',k} for any form.
    double gamma4(int alpha, int alpha2, int beta, int beta2, int mode) const {
        if (is_diagonal())
            return (alpha == alpha2 && beta == beta2) ? gamma_diag(alpha, beta, mode) : 0.0;
        return gen_[gix(alpha, alpha2, beta, beta2, mode)];
    }

    /// Max-entry envelope Gamma_bar at one mode.
    double gamma_bar(int mode) const {
        double v = 0.0;
        for (int a = 0; a < m; ++a)
            for (int a2 = 0; a2 < m; ++a2)
                for (int b = 0; b < m; ++b)
                    for (int b2 = 0; b2 < m; ++b2)
                        v = std::max(v, std::abs(gamma4(a, a2, b, b2, mode)));
        return v;
    }

private:
    std::size_t dix(int a, int b, int mode) const {
        return (static_cast<std::size_t>(a) * m + b) * lat_->size() + mode;
    }
    std::size_t gix(int a, int a2, int b, int b2, int mode) const {
        return (((static_cast<std::size_t>(a) * m + a2) * m + b) * m + b2) * lat_->size() + mode;
    }

    /// Per-mode covariance operator over composite indices (alpha, beta) must
    /// be symmetric PSD; checked by a Jacobi eigenvalue sweep for m <= 4.
    void check_psd() const {
        if (m > 4) return;
        const int n = m * m;
        for (int mode = 0; mode < lat_->size(); ++mode) {
            std::vector<double> A(static_cast<std::size_t>(n) * n);
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b)
                    for (int a2 = 0; a2 < m; ++a2)
                        for (int b2 = 0; b2 < m; ++b2)
                            A[static_cast<std::size_t>(a * m + b) * n + (a2 * m + b2)] =
                                gamma4(a, a2, b, b2, mode);
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j)
                    if (std::abs(A[i * n + j] - A[j * n + i]) > 1e-12)
                        throw std::invalid_argument(
                            "noise table: per-mode covariance is not symmetric");
            // cyclic Jacobi
            for (int sweep = 0; sweep < 64; ++sweep) {
                double off = 0.0;
                for (int p = 0; p < n; ++p)
                    for (int q = p + 1; q < n; ++q) off += A[p * n + q] * A[p * n + q];
                if (off < 1e-24) break;
                for (int p = 0; p < n; ++p)
                    for (int q = p + 1; q < n; ++q) {
                        const double apq = A[p * n + q];
                        if (std::abs(apq) < 1e-18) continue;
                        const double theta = 0.5 * (A[q * n + q] - A[p * n + p]) / apq;
                        const double t = (theta >= 0 ? 1.0 : -1.0) /
                                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                        const double cs = 1.0 / std::sqrt(t * t + 1.0);
                        const double sn = t * cs;
                        for (int r = 0; r < n; ++r) {
                            const double arp = A[r * n + p], arq = A[r * n + q];
                            A[r * n + p] = cs * arp - sn * arq;
                            A[r * n + q] = sn * arp + cs * arq;
                        }
                        for (int r = 0; r < n; ++r) {
                            const double apr = A[p * n + r], aqr = A[q * n + r];
                            A[p * n + r] = cs * apr - sn * aqr;
                            A[q * n + r] = sn * apr + cs * aqr;
                        }
                    }
            }
            for (int i = 0; i < n; ++i)
                if (A[i * n + i] < -1e-10)
                    throw std::invalid_argument(
                        "noise table: per-mode covariance not positive semidefinite");
        }
    }

    std::shared_ptr<const Lattice> lat_;
    std::vector<double> diag_;
    std::vector<double> gen_;
};

/// Lambda(0), its two trace contractions, and the sup-norm envelope
/// sum_k Gamma_bar_k. Exact finite sums over the stored noise modes.
struct CorrelationTensors {
    int m = 1;
    std::vector<double> lambda0;   // [((a*m+a2)*m+b)*m+b2]
    std::vector<double> tr;        // Tr(Lambda)^a_b = sum_g Lambda0[g,a,b,g]
    std::vector<double> tr_u;      // Tr^u(Lambda)^a_b = sum_g Lambda0[g,g,a,b]
    double envelope = 0.0;         // sum_k Gamma_bar_k >= sup_x |Lambda(x)|

    double l0(int a, int a2, int b, int b2) const {
        return lambda0[((static_cast<std::size_t>(a) * m + a2) * m + b) * m + b2];
    }
};

inline CorrelationTensors correlation_tensors(const NoiseSpec& spec) {
    CorrelationTensors ct;
    const int m = spec.m;
    ct.m = m;
    ct.lambda0.assign(static_cast<std::size_t>(m) * m * m * m, 0.0);
    ct.tr.assign(static_cast<std::size_t>(m) * m, 0.0);
    ct.tr_u.assign(static_cast<std::size_t>(m) * m, 0.0);
    const int n = spec.lattice().size();
    for (int a = 0; a < m; ++a)
        for (int a2 = 0; a2 < m; ++a2)
            for (int b = 0; b < m; ++b)
                for (int b2 = 0; b2 < m; ++b2) {
                    double s = 0.0;
                    for (int i = 0; i < n; ++i) s += spec.gamma4(a, a2, b, b2, i);
                    ct.lambda0[((static_cast<std::size_t>(a) * m + a2) * m + b) * m + b2] = s;
                }
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            double tr = 0.0, tru = 0.0;
            for (int g = 0; g < m; ++g) {
                tr += ct.l0(g, a, b, g);
                tru += ct.l0(g, g, a, b);
            }
            ct.tr[static_cast<std::size_t>(a) * m + b] = tr;
            ct.tr_u[static_cast<std::size_t>(a) * m + b] = tru;
        }
    for (int i = 0; i < n; ++i) ct.envelope += spec.gamma_bar(i);
    return ct;
}

/// One step's complex Brownian increments per (alpha, beta) pair and noise
/// mode, Hermitian in k (increment at -k is the conjugate, real at k = 0).
struct NoiseIncrement {
    std::shared_ptr<const Lattice> lattice;
    int m = 1;
    double dt = 0.0;
    std::vector<Complex> db;  // [(alpha*m+beta)*n + mode]

    Complex& at(int alpha, int beta, int mode) {
        return db[(static_cast<std::size_t>(alpha) * m + beta) * lattice->size() + mode];
    }
    const Complex& at(int alpha, int beta, int mode) const {
        return db[(static_cast<std::size_t>(alpha) * m + beta) * lattice->size() + mode];
    }
};

/// Draws one step of increments into a preallocated buffer. For k != 0 the
/// real and imaginary parts are independent with variance Gamma*dt/2 each, so
/// E|dB_k|^2 = Gamma*dt; k = 0 is real with variance Gamma*dt. Draws are
/// consumed in lexicographic (alpha, beta, representative-mode) order; zero
/// coefficients consume none.
inline void sample_increments_into(const NoiseSpec& spec, double dt, SplitMix64& rng,
                                   NoiseIncrement& inc) {
    if (!(dt > 0.0)) throw std::invalid_argument("sample_increments: dt must be > 0");
    if (!spec.is_diagonal())
        throw std::invalid_argument(
            "sample_increments: general (non-diagonal) tensors are unsupported");
    // keep the existing lattice handle when it already matches: refcount
    // traffic on the shared control block is visible in the hot loop
    if (inc.lattice.get() != spec.lattice_ptr().get()) inc.lattice = spec.lattice_ptr();
    inc.m = spec.m;
    inc.dt = dt;
    inc.db.assign(static_cast<std::size_t>(spec.m) * spec.m * inc.lattice->size(),
                  Complex{0.0, 0.0});
    for (int a = 0; a < spec.m; ++a)
        for (int b = 0; b < spec.m; ++b)
            for (int idx : inc.lattice->representatives()) {
                const double g = spec.gamma_diag(a, b, idx);
                if (g == 0.0) continue;
                const int nix = inc.lattice->neg_index(idx);
                if (nix == idx) {
                    inc.at(a, b, idx) = Complex{rng.next_normal() * std::sqrt(g * dt), 0.0};
                } else {
                    const double s = std::sqrt(0.5 * g * dt);
                    const Complex z{rng.next_normal() * s, rng.next_normal() * s};
                    inc.at(a, b, idx) = z;
                    inc.at(a, b, nix) = std::conj(z);
                }
            }
}

inline NoiseIncrement sample_increments(const NoiseSpec& spec, double dt, SplitMix64& rng) {
    NoiseIncrement inc;
    sample_increments_into(spec, dt, rng, inc);
    return inc;
}

/// Decay check |Gamma| <= C (1+|k|)^(-2 gamma0) over all stored modes.
struct DecayReport {
    bool pass = true;
    double worst_ratio = 0.0;
    std::vector<int> worst_mode;
};

inline DecayReport check_decay(const NoiseSpec& spec, double gamma0, double C) {
    DecayReport rep;
    const int n = spec.lattice().size();
    const int d = spec.lattice().dim();
    rep.worst_mode.assign(d, 0);
    for (int i = 0; i < n; ++i) {
        const double bound = C * std::pow(1.0 + spec.lattice().mode_abs(i), -2.0 * gamma0);
        const double v = spec.gamma_bar(i);
        const double ratio = bound > 0.0 ? v / bound : (v > 0.0 ? HUGE_VAL : 0.0);
        if (ratio > rep.worst_ratio) {
            rep.worst_ratio = ratio;
            const int* k = spec.lattice().mode(i);
            rep.worst_mode.assign(k, k + d);
        }
    }
    rep.pass = rep.worst_ratio <= 1.0 + 1e-9;  // parametric forms hit the bound exactly
    return rep;
}

/// Large-scale support condition: 1_A * 1_{B(M)} >= 1_{B(M+b)} for each
/// M in [K0, M_max], checked exhaustively: every |j| <= M+b must admit
/// l in A with |j - l| <= M.
struct SupportReport {
    bool pass = true;
    int first_failing_M = -1;
    std::vector<int> witness;  // a j with no valid shift, when failing
    std::vector<char> per_M;   // indexed from K0
};

inline SupportReport check_support_condition(const std::vector<std::vector<int>>& A, double b,
                                             int K0, int M_max, int d) {
    if (A.empty()) throw std::invalid_argument("support check: empty mode set");
    SupportReport rep;
    rep.per_M.assign(static_cast<std::size_t>(std::max(0, M_max - K0 + 1)), 1);
    for (int M = K0; M <= M_max; ++M) {
        const double R = M + b;
        const int Ri = static_cast<int>(std::floor(R));
        bool ok = true;
        std::vector<int> j(d, -Ri);
        std::vector<int> bad;
        while (ok) {
            double jn = 0.0;
            for (int i = 0; i < d; ++i) jn += static_cast<double>(j[i]) * j[i];
            if (std::sqrt(jn) <= R) {
                bool covered = false;
                for (const std::vector<int>& l : A) {
                    double sq = 0.0;
                    for (int i = 0; i < d; ++i) {
                        const double diff = j[i] - l[i];
                        sq += diff * diff;
                    }
                    if (std::sqrt(sq) <= static_cast<double>(M)) {
                        covered = true;
                        break;
                    }
                }
                if (!covered) {
                    ok = false;
                    bad = j;
                }
            }
            int i = d - 1;
            while (i >= 0 && j[i] == Ri) { j[i] = -Ri; --i; }
            if (i < 0) break;
            ++j[i];
        }
        if (!ok) {
            rep.per_M[M - K0] = 0;
            if (rep.pass) {
                rep.pass = false;
                rep.first_failing_M = M;
                rep.witness = bad;
            }
        }
    }
    return rep;
}

/// Axis descent step: l = -beta * sign(k_i0) e_i0 along the largest
/// coordinate, together with whether |k + l| <= |k| - beta/sqrt(d) + eps.
/// The bound is only guaranteed for |k| large (of order beta^2 / eps).
struct DescentStep {
    std::vector<int> l;
    bool bound_holds = false;
};

inline DescentStep descent_direction(const std::vector<int>& k, int beta, double eps) {
    if (beta < 1) throw std::invalid_argument("descent_direction: beta must be >= 1");
    if (!(eps > 0.0)) throw std::invalid_argument("descent_direction: eps must be > 0");
    const int d = static_cast<int>(k.size());
    int i0 = 0;
    for (int i = 1; i < d; ++i)
        if (std::abs(k[i]) > std::abs(k[i0])) i0 = i;
    DescentStep out;
    out.l.assign(d, 0);
    out.l[i0] = k[i0] >= 0 ? -beta : beta;
    double ksq = 0.0, ssq = 0.0;
    for (int i = 0; i < d; ++i) {
        ksq += static_cast<double>(k[i]) * k[i];
        const double s = k[i] + out.l[i];
        ssq += s * s;
    }
    out.bound_holds =
        std::sqrt(ssq) <= std::sqrt(ksq) - beta / std::sqrt(static_cast<double>(d)) + eps;
    return out;
}

}  // namespace projsde
