#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "projsde/bands.hpp"
#include "projsde/noise.hpp"
#include "projsde/norms.hpp"
#include "projsde/rng.hpp"

namespace projsde {

enum class DriftForm { Ito, StratonovichCorrected };

struct ModelParams {
    int d = 1;
    int m = 1;
    double a = 1.0;          // hyperviscosity exponent, >= 1
    std::vector<double> nu;  // per-component viscosity, > 0
    int K = 8;               // field truncation radius
    double dt = 1e-3;
    DriftForm drift_form = DriftForm::Ito;

    void validate() const {
        if (d < 1) throw std::invalid_argument("model: d must be >= 1");
        if (m < 1) throw std::invalid_argument("model: m must be >= 1");
        if (!(a >= 1.0)) throw std::invalid_argument("model: a must be >= 1");
        if (static_cast<int>(nu.size()) != m)
            throw std::invalid_argument("model: nu must have one entry per component");
        for (double v : nu)
            if (!(v > 0.0)) throw std::invalid_argument("model: nu must be > 0");
        if (K < 1) throw std::invalid_argument("model: K must be >= 1");
        if (!(dt > 0.0)) throw std::invalid_argument("model: dt must be > 0");
    }
};

/// Renormalized state: unit-norm direction pi plus the accumulated
/// log-radius log|u_t| - log|u_0|. Per-step renormalization keeps logr finite
/// even when the decay rates reach zeta_K ~ K^(2a).
struct SimState {
    double t = 0.0;
    double logr = 0.0;
    SpectralField pi;
};

struct TrajectoryDied : std::runtime_error {
    explicit TrajectoryDied(double t)
        : std::runtime_error("trajectory died: field vanished at t = " + std::to_string(t)),
          time(t) {}
    double time;
};

/// Precomputed index table for the convolution sum_l phi(k - l) dB(l):
/// for each representative field mode k and noise mode l it stores the field
/// index of k - l, or -1 when k - l falls off the truncated lattice
/// (Galerkin projection of the noise term).
class ConvolutionPlan {
public:
    ConvolutionPlan() = default;
    ConvolutionPlan(const Lattice& field, const Lattice& noise) {
        if (field.dim() != noise.dim())
            throw std::invalid_argument("convolution: dimension mismatch");
        const int d = field.dim();
        n_noise_ = noise.size();
        reps_ = field.representatives();
        table_.assign(reps_.size() * static_cast<std::size_t>(n_noise_), -1);
        std::vector<int> diff(d);
        for (std::size_t r = 0; r < reps_.size(); ++r) {
            const int* k = field.mode(reps_[r]);
            for (int l = 0; l < n_noise_; ++l) {
                const int* lk = noise.mode(l);
                for (int i = 0; i < d; ++i) diff[i] = k[i] - lk[i];
                table_[r * n_noise_ + l] = field.find(diff.data());
            }
        }
    }

    /// psi^{alpha,k} = sum_l sum_beta phi^{beta,k-l} dB^{alpha,beta}_l.
    /// Computed on representatives and mirrored, so Hermitian symmetry is
    /// exact and the k = 0 coefficient is exactly real.
    SpectralField apply(const SpectralField& phi, const NoiseIncrement& inc) const {
        SpectralField out(phi.lattice, phi.m);
        accumulate(phi, inc, out);
        return out;
    }

    /// out += convolution(phi, inc); out must be Hermitian on entry.
    void accumulate(const SpectralField& phi, const NoiseIncrement& inc,
                    SpectralField& out) const {
        const int m = phi.m;
        const int n = phi.lattice->size();
        for (int alpha = 0; alpha < m; ++alpha) {
            for (std::size_t r = 0; r < reps_.size(); ++r) {
                const int k = reps_[r];
                Complex acc{0.0, 0.0};
                const int* row = &table_[r * n_noise_];
                for (int beta = 0; beta < m; ++beta) {
                    const Complex* phi_b = &phi.coeffs[static_cast<std::size_t>(beta) * n];
                    const Complex* db =
                        &inc.db[(static_cast<std::size_t>(alpha) * m + beta) * n_noise_];
                    for (int l = 0; l < n_noise_; ++l) {
                        const int src = row[l];
                        if (src >= 0) acc += phi_b[src] * db[l];
                    }
                }
                const int nix = phi.lattice->neg_index(k);
                if (nix == k) acc.imag(0.0);
                out.at(alpha, k) += acc;
                if (nix != k) out.at(alpha, nix) += std::conj(acc);
            }
        }
    }

private:
    int n_noise_ = 0;
    std::vector<int> reps_;
    std::vector<int> table_;
};

/// Multiplies each coefficient by exp(-nu_alpha zeta_k dt): the exact flow of
/// the deterministic part.
inline SpectralField linear_decay(const SpectralField& phi, double dt, const ModelParams& p) {
    if (dt < 0.0) throw std::invalid_argument("linear_decay: dt must be >= 0");
    SpectralField out = phi;
    const int n = phi.lattice->size();
    for (int alpha = 0; alpha < phi.m; ++alpha)
        for (int i = 0; i < n; ++i) {
            const double z = eigenvalue(*phi.lattice, i, p.a);
            out.at(alpha, i) *= std::exp(-p.nu[alpha] * z * dt);
        }
    return out;
}

/// Standalone convolution of a field with one step of noise increments.
inline SpectralField apply_noise(const SpectralField& phi, const NoiseIncrement& inc) {
    ConvolutionPlan plan(*phi.lattice, *inc.lattice);
    return plan.apply(phi, inc);
}

/// Exponential Euler-Maruyama stepper for
///   du^alpha = -nu^alpha (-Lap)^a u^alpha dt + (u . dW)^alpha.
///
/// One step: u <- D (u + conv(u, dB)) with D = exp(-(nu_alpha zeta_k + s) dt)
/// and the noise evaluated at the left endpoint. The linear part is treated
/// exactly, which keeps the scheme stable for every dt. Under the
/// Stratonovich-corrected drift form the constant matrix -Tr(Lambda)/2 joins
/// the linear part (s = Tr(Lambda)^alpha_alpha / 2, diagonal for the noise
/// forms we can sample), so for spatially constant noise the corrected
/// log-radius differs from the Ito one by exactly Tr(Lambda) t / 2.
class Stepper {
public:
    Stepper(ModelParams params, NoiseSpec spec)
        : p_(std::move(params)), spec_(std::move(spec)) {
        p_.validate();
        if (spec_.lattice().dim() != p_.d)
            throw std::invalid_argument("stepper: noise dimension mismatch");
        lat_ = Lattice::make(p_.d, p_.K);
        geom_ = FreqGeometry(p_.nu, p_.a);
        plan_ = ConvolutionPlan(*lat_, spec_.lattice());
        tensors_ = correlation_tensors(spec_);

        decay_.assign(static_cast<std::size_t>(p_.m) * lat_->size(), 0.0);
        for (int alpha = 0; alpha < p_.m; ++alpha) {
            double strat = 0.0;
            if (p_.drift_form == DriftForm::StratonovichCorrected) {
                for (int b = 0; b < p_.m; ++b)
                    if (b != alpha &&
                        tensors_.tr[static_cast<std::size_t>(alpha) * p_.m + b] != 0.0)
                        throw std::invalid_argument(
                            "stepper: Stratonovich correction needs diagonal Tr(Lambda)");
                strat = 0.5 * tensors_.tr[static_cast<std::size_t>(alpha) * p_.m + alpha];
            }
            for (int i = 0; i < lat_->size(); ++i) {
                const double z = eigenvalue(*lat_, i, p_.a);
                decay_[static_cast<std::size_t>(alpha) * lat_->size() + i] =
                    std::exp(-(p_.nu[alpha] * z + strat) * p_.dt);
            }
        }
    }

    const ModelParams& params() const { return p_; }
    const NoiseSpec& noise() const { return spec_; }
    const FreqGeometry& geometry() const { return geom_; }
    const CorrelationTensors& tensors() const { return tensors_; }
    std::shared_ptr<const Lattice> lattice() const { return lat_; }

    /// Normalizes u0 into a state with logr = 0.
    SimState initial_state(const SpectralField& u0) const {
        const double r = u0.norm();
        if (!(r > 0.0)) throw std::invalid_argument("initial_state: zero field");
        SimState s;
        s.pi = u0;
        s.pi *= 1.0 / r;
        return s;
    }

    /// Per-trajectory scratch buffers; one per worker avoids per-step heap
    /// traffic in the hot loop.
    struct Workspace {
        NoiseIncrement inc;
        SpectralField next;
    };
    Workspace make_workspace() const {
        Workspace ws;
        ws.inc.lattice = spec_.lattice_ptr();
        ws.inc.m = p_.m;
        ws.inc.db.assign(static_cast<std::size_t>(p_.m) * p_.m * spec_.lattice().size(),
                         Complex{0.0, 0.0});
        ws.next = SpectralField(lat_, p_.m);
        return ws;
    }

    /// Deterministic core of one step, with the increments supplied.
    void apply_increment(SimState& s, const NoiseIncrement& inc, SpectralField& next) const {
        next.coeffs = s.pi.coeffs;  // lattice handle already agrees; no refcount churn
        next.m = s.pi.m;
        if (next.lattice.get() != s.pi.lattice.get()) next.lattice = s.pi.lattice;
        plan_.accumulate(s.pi, inc, next);
        const int n = lat_->size();
        for (int alpha = 0; alpha < p_.m; ++alpha) {
            const double* dec = &decay_[static_cast<std::size_t>(alpha) * n];
            Complex* row = &next.coeffs[static_cast<std::size_t>(alpha) * n];
            for (int i = 0; i < n; ++i) row[i] *= dec[i];
        }
        const double r = next.norm();
        if (!(r > 0.0) || !std::isfinite(r)) throw TrajectoryDied(s.t + inc.dt);
        next *= 1.0 / r;
        std::swap(s.pi, next);
        s.logr += std::log(r);
        s.t += inc.dt;
    }

    void apply_increment(SimState& s, const NoiseIncrement& inc) const {
        SpectralField next(lat_, p_.m);
        apply_increment(s, inc, next);
    }

    void step(SimState& s, SplitMix64& rng, Workspace& ws) const {
        sample_increments_into(spec_, p_.dt, rng, ws.inc);
        apply_increment(s, ws.inc, ws.next);
    }

    void step(SimState& s, SplitMix64& rng) const {
        Workspace ws = make_workspace();
        step(s, rng, ws);
    }

private:
    ModelParams p_;
    NoiseSpec spec_;
    std::shared_ptr<const Lattice> lat_;
    FreqGeometry geom_;
    ConvolutionPlan plan_;
    CorrelationTensors tensors_;
    std::vector<double> decay_;
};

}  // namespace projsde
