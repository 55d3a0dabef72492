#pragma once

#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "projsde/runner.hpp"

namespace projsde {

/// Hermitian field with pseudo-random coefficients, |c_k| ~ (1+|k|)^(-slope),
/// normalized to unit L2 norm.
inline SpectralField random_unit_field(std::shared_ptr<const Lattice> lat, int m,
                                       SplitMix64& rng, double slope = 0.0) {
    SpectralField f(std::move(lat), m);
    for (int alpha = 0; alpha < m; ++alpha)
        for (int idx : f.lattice->representatives()) {
            const double env = std::pow(1.0 + f.lattice->mode_abs(idx), -slope);
            const Complex z{rng.next_normal() * env, rng.next_normal() * env};
            f.set_pair(alpha, idx, z);
        }
    const double r = f.norm();
    if (r > 0.0) f *= 1.0 / r;
    return f;
}

struct SelftestResult {
    int passed = 0;
    int failed = 0;
    std::vector<std::string> failures;

    void check(bool ok, const std::string& name) {
        if (ok) {
            ++passed;
        } else {
            ++failed;
            failures.push_back(name);
        }
    }
    bool all_passed() const { return failed == 0; }
};

/// Deterministic invariant battery across all modules; no Monte Carlo
/// tolerances beyond wide smoke bounds.
inline SelftestResult run_selftest_battery(std::ostream& os) {
    SelftestResult res;
    auto lat = Lattice::make(1, 12);
    FreqGeometry geom({1.0}, 1.0);
    SplitMix64 rng(20240601ULL);

    // eigenvalues and gaps
    {
        const std::vector<int> k34 = {3};
        res.check(eigenvalue(25, 1.0) == 25.0, "eigenvalue |k|^2=25, a=1");
        res.check(eigenvalue(0, 2.0) == 0.0, "eigenvalue zero mode");
        res.check(std::abs(eigenvalue(4, 1.5) - 8.0) < 1e-12, "eigenvalue |k|=2, a=3/2");
        res.check(eigenvalue_gap(5, 1.0) == 11.0, "gap L=5, a=1");
        res.check(eigenvalue_gap(0, 1.0) == 1.0, "gap L=0");
        res.check(std::abs(eigenvalue_gap(1, 2.0) - 15.0) < 1e-12, "gap L=1, a=2");
    }

    // band completeness, orthogonality, nesting
    {
        bool complete = true, pythagoras = true, nesting = true;
        for (int trial = 0; trial < 40; ++trial) {
            const SpectralField f = random_unit_field(lat, 1, rng, 0.6);
            const int L = trial % 6;
            const SpectralField lo = project(f, make_band(L, Band::Low, geom));
            const SpectralField ce = project(f, make_band(L, Band::Central, geom));
            const SpectralField hi = project(f, make_band(L, Band::High, geom));
            for (std::size_t i = 0; i < f.coeffs.size(); ++i)
                if (lo.coeffs[i] + ce.coeffs[i] + hi.coeffs[i] != f.coeffs[i]) complete = false;
            const double total = lo.sq_norm() + ce.sq_norm() + hi.sq_norm();
            if (std::abs(total - f.sq_norm()) > 1e-12 * f.sq_norm()) pythagoras = false;
            const SpectralField leq = project(f, make_band(L, Band::Leq, geom));
            const SpectralField lo1 = project(f, make_band(L + 1, Band::Low, geom));
            for (std::size_t i = 0; i < f.coeffs.size(); ++i)
                if (leq.coeffs[i] != lo1.coeffs[i]) nesting = false;
            if (L >= 1) {
                const SpectralField geq = project(f, make_band(L, Band::Geq, geom));
                const SpectralField hi1 = project(f, make_band(L - 1, Band::High, geom));
                for (std::size_t i = 0; i < f.coeffs.size(); ++i)
                    if (geq.coeffs[i] != hi1.coeffs[i]) nesting = false;
            }
        }
        res.check(complete, "band completeness");
        res.check(pythagoras, "band orthogonality");
        res.check(nesting, "band nesting");
    }

    // energy median on pinned examples
    {
        const SpectralField e0 = unit_mode_field(lat, 1, {0});
        const SpectralField e5 = unit_mode_field(lat, 1, {5});
        res.check(energy_median(e0, geom) == 1, "median of e_0");
        res.check(energy_median(e5, geom) == 5, "median of e_5");
        SpectralField mix(lat, 1);
        mix.set_pair(0, lat->find({1}), Complex{std::sqrt(0.2), 0.0});
        mix.set_pair(0, lat->find({7}), Complex{std::sqrt(0.3), 0.0});
        res.check(energy_median(mix, geom) == 7, "median of two-shell field");
    }

    // marker and relative energy
    {
        const SpectralField shell = unit_mode_field(lat, 1, {4});
        res.check(marker(4, shell, geom) == Marker::C, "marker concentrated shell");
        const SpectralField e0 = unit_mode_field(lat, 1, {0});
        res.check(marker(3, e0, geom) == Marker::D, "marker diluted at k=0");
        SpectralField two(lat, 1);
        two.set_pair(0, lat->find({0}), Complex{std::sqrt(0.8), 0.0});
        two.set_pair(0, lat->find({3}), Complex{std::sqrt(0.1), 0.0});  // 0.1 on each of +/-3
        const RelativeEnergy re = relative_energy(two, 2, geom);
        res.check(std::abs(re.w) < 1e-12, "relative energy w (central only)");
        res.check(std::abs(re.wgeq - 0.5) < 1e-12, "relative energy wgeq = 0.5");
    }

    // integrator: Hermitian symmetry and noise-free decay
    {
        ModelParams mp;
        mp.d = 1;
        mp.m = 1;
        mp.a = 1.0;
        mp.nu = {1.0};
        mp.K = 8;
        mp.dt = 1e-2;
        Stepper st(mp, NoiseSpec::parametric(1, 1, 4, 0.3, 2.5));
        SimState s = st.initial_state(random_unit_field(st.lattice(), 1, rng, 0.4));
        SplitMix64 path_rng(7ULL);
        bool herm = true, unit = true;
        for (int i = 0; i < 200; ++i) {
            st.step(s, path_rng);
            if (s.pi.hermitian_defect() != 0.0) herm = false;
            if (std::abs(s.pi.norm() - 1.0) > 1e-12) unit = false;
        }
        res.check(herm, "step preserves Hermitian symmetry exactly");
        res.check(unit, "step renormalizes");

        Stepper free_st(mp, NoiseSpec::parametric(1, 1, 0, 0.0, 2.5));
        SimState fs = free_st.initial_state(unit_mode_field(free_st.lattice(), 1, {3}));
        SplitMix64 r2(1ULL);
        for (int i = 0; i < 100; ++i) free_st.step(fs, r2);
        res.check(std::abs(fs.logr - (-9.0 * fs.t)) < 1e-9, "noise-free decay rate");
    }

    // sampler covariance smoke: E|dB|^2 = Gamma dt within 8 sigma
    {
        const NoiseSpec spec = NoiseSpec::parametric(1, 1, 2, 0.8, 1.0);
        SplitMix64 r3(99ULL);
        const int idx = spec.lattice().find({1});
        const double g = spec.gamma_diag(0, 0, idx);
        const int n = 20000;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const NoiseIncrement inc = sample_increments(spec, 0.01, r3);
            acc += std::norm(inc.at(0, 0, idx));
        }
        acc /= n;
        const double expected = g * 0.01;
        res.check(std::abs(acc - expected) <= 8.0 * expected / std::sqrt(double(n)),
                  "sampler second moment");
    }

    // GBM: constant drift integrand -Gamma0/2
    {
        const NoiseSpec gbm = NoiseSpec::diagonal_table(1, 1, 0, {{0, 0, {0}, 0.8}});
        const CorrelationTensors ct = correlation_tensors(gbm);
        ModelParams mp;
        mp.d = 1;
        mp.m = 1;
        mp.a = 1.0;
        mp.nu = {1.0};
        mp.K = 2;
        mp.dt = 1e-3;
        auto flat = Lattice::make(1, 2);
        const SpectralField e0 = unit_mode_field(flat, 1, {0});
        const FkSample fk = fk_integrand(e0, mp, gbm, ct);
        res.check(std::abs(fk.integrand + 0.4) < 1e-12, "constant-noise drift integrand");
    }

    // seeding: pinned vector, injectivity sample, determinism
    {
        res.check(derive_seed(42, 0) == kDeriveSeedVector42_0, "derive_seed pinned vector");
        bool distinct = true;
        const std::uint64_t a = derive_seed(1, 1);
        for (int i = 2; i < 2000; ++i)
            if (derive_seed(1, i) == a) distinct = false;
        res.check(distinct, "derive_seed distinctness sample");
    }
    {
        RunConfig cfg;
        cfg.model.d = 1;
        cfg.model.m = 1;
        cfg.model.nu = {1.0};
        cfg.model.K = 4;
        cfg.model.dt = 1e-2;
        cfg.K_noise = 2;
        cfg.noise_form = "diagonal-parametric";
        cfg.noise_c = 0.4;
        cfg.noise_gamma0 = 2.0;
        cfg.n_steps = 200;
        cfg.initial.type = "mode";
        cfg.initial.k = {1};
        Stepper st(cfg.model, cfg.make_noise());
        const SpectralField u0 =
            build_initial(cfg.initial, st.lattice(), cfg.model.m, st.geometry());
        SimulateOptions opt = detail::options_from(cfg);
        const RunRecord r1 = simulate_path(st, u0, cfg.n_steps, derive_seed(5, 0), opt);
        const RunRecord r2 = simulate_path(st, u0, cfg.n_steps, derive_seed(5, 0), opt);
        res.check(time_series_csv(r1) == time_series_csv(r2), "bit-identical repeat run");
    }

    os << "selftest: " << res.passed << " passed, " << res.failed << " failed\n";
    for (const std::string& f : res.failures) os << "  FAILED: " << f << "\n";
    return res;
}

}  // namespace projsde
