#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "projsde/integrator.hpp"

namespace projsde {

/// Radial/angular split u = r * pi with r = |u|, |pi| = 1.
inline std::pair<double, SpectralField> decompose(const SpectralField& u) {
    const double r = u.norm();
    if (!(r > 0.0)) throw std::invalid_argument("decompose: zero field");
    SpectralField pi = u;
    pi *= 1.0 / r;
    return {r, std::move(pi)};
}

/// Quartic noise form <piox2, Lambda pi^ox2> =
///   sum_{a,b,g,e} sum_k Gamma^{a,b}_{g,e,k} q^{ag}(-k) q^{be}(k),
/// with q^{ag}(k) = sum_m pi^{a,m} pi^{g,k-m} the Fourier coefficients of the
/// pointwise product. Sums are Galerkin-truncated to the stored lattices.
/// For diagonal nonnegative coefficients this is sum Gamma |q|^2 in [0, env].
inline double quartic_form(const SpectralField& pi, const NoiseSpec& spec) {
    const Lattice& nl = spec.lattice();
    const Lattice& fl = *pi.lattice;
    if (nl.dim() != fl.dim()) throw std::invalid_argument("quartic_form: dimension mismatch");
    const int d = fl.dim();
    const int m = pi.m;
    const int nf = fl.size();
    std::vector<Complex> q(static_cast<std::size_t>(m) * m);
    std::vector<int> diff(d);
    double total = 0.0;
    for (int kn = 0; kn < nl.size(); ++kn) {
        bool any = false;
        for (int a = 0; a < m && !any; ++a)
            for (int a2 = 0; a2 < m && !any; ++a2)
                for (int b = 0; b < m && !any; ++b)
                    for (int b2 = 0; b2 < m; ++b2)
                        if (spec.gamma4(a, a2, b, b2, kn) != 0.0) {
                            any = true;
                            break;
                        }
        if (!any) continue;
        // q^{ag}(k) for k = mode kn
        const int* k = nl.mode(kn);
        for (auto& z : q) z = Complex{0.0, 0.0};
        for (int i = 0; i < nf; ++i) {
            const int* mm = fl.mode(i);
            for (int t = 0; t < d; ++t) diff[t] = k[t] - mm[t];
            const int j = fl.find(diff.data());
            if (j < 0) continue;
            for (int a = 0; a < m; ++a)
                for (int g = 0; g < m; ++g)
                    q[static_cast<std::size_t>(a) * m + g] += pi.at(a, i) * pi.at(g, j);
        }
        // Hermitian pi gives q^{ag}(-k) = conj(q^{ag}(k)).
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                for (int g = 0; g < m; ++g)
                    for (int e = 0; e < m; ++e) {
                        const double gam = spec.gamma4(a, b, g, e, kn);
                        if (gam == 0.0) continue;
                        const Complex term = std::conj(q[static_cast<std::size_t>(a) * m + g]) *
                                             q[static_cast<std::size_t>(b) * m + e];
                        total += gam * term.real();
                    }
    }
    return total;
}

/// Ito-Stratonovich corrector C(pi, Lambda) =
///   <pi, pi . Tr^u(Lambda)> - 2 <pi^ox2, Lambda pi^ox2>.
inline double corrector(const SpectralField& pi, const NoiseSpec& spec,
                        const CorrelationTensors& ct) {
    const int m = pi.m;
    double first = 0.0;
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            const double tru = ct.tr_u[static_cast<std::size_t>(a) * m + b];
            if (tru == 0.0) continue;
            double ip = 0.0;  // <pi^a, pi^b> in L2
            for (int i = 0; i < pi.n_modes(); ++i)
                ip += (pi.at(a, i) * std::conj(pi.at(b, i))).real();
            first += tru * ip;
        }
    return first - 2.0 * quartic_form(pi, spec);
}

/// Drift sample of d log r: dissipation <pi, L pi> plus half the corrector.
struct FkSample {
    double t = 0.0;
    double dissipation = 0.0;  // <pi, L pi> = -sum nu zeta |pi_hat|^2, always <= 0
    double corrector = 0.0;
    double integrand = 0.0;    // dissipation + corrector / 2
};

inline double dissipation_form(const SpectralField& pi, const ModelParams& p) {
    double s = 0.0;
    for (int alpha = 0; alpha < pi.m; ++alpha)
        for (int i = 0; i < pi.n_modes(); ++i)
            s += p.nu[alpha] * eigenvalue(*pi.lattice, i, p.a) * std::norm(pi.at(alpha, i));
    return -s;
}

inline FkSample fk_integrand(const SpectralField& pi, const ModelParams& p, const NoiseSpec& spec,
                             const CorrelationTensors& ct, double t = 0.0) {
    FkSample out;
    out.t = t;
    out.dissipation = dissipation_form(pi, p);
    out.corrector = corrector(pi, spec, ct);
    out.integrand = out.dissipation + 0.5 * out.corrector;
    return out;
}

}  // namespace projsde
