// Strong self-convergence probe: one Brownian path sampled at the finest
// dyadic level drives every coarser level (increments summed), and the
// terminal L2 error against the finest level is averaged over an ensemble
// before the log-log slope fit.
#pragma once

#include <cmath>
#include <vector>

#include "projsde/integrator.hpp"
#include "projsde/rng.hpp"
#include "projsde/selftest.hpp"

namespace convergence {

inline double self_convergence_slope(const projsde::NoiseSpec& spec, int K, double T,
                                     int base_steps, int levels, int n_paths,
                                     std::uint64_t seed) {
    using namespace projsde;
    const int fine_steps = base_steps << (levels - 1);
    const double fine_dt = T / fine_steps;
    ModelParams mp;
    mp.d = spec.lattice().dim();
    mp.m = spec.m;
    mp.a = 1.0;
    mp.nu.assign(spec.m, 1.0);
    mp.K = K;
    mp.dt = fine_dt;

    std::vector<Stepper> steppers;
    for (int level = 0; level < levels; ++level) {
        ModelParams p = mp;
        p.dt = fine_dt * (1 << (levels - 1 - level));
        steppers.emplace_back(p, spec);
    }

    std::vector<double> err_sq(levels - 1, 0.0);
    for (int path = 0; path < n_paths; ++path) {
        SplitMix64 rng(derive_seed(seed, path));
        std::vector<NoiseIncrement> fine(static_cast<std::size_t>(fine_steps));
        for (int i = 0; i < fine_steps; ++i) fine[i] = sample_increments(spec, fine_dt, rng);
        SplitMix64 frng(derive_seed(seed + 1, path));
        const SpectralField u0 =
            random_unit_field(steppers[0].lattice(), spec.m, frng, 0.8);

        auto terminal = [&](int level) {
            const int stride = 1 << (levels - 1 - level);
            SimState s = steppers[level].initial_state(u0);
            for (int i = 0; i < fine_steps; i += stride) {
                NoiseIncrement inc = fine[i];
                inc.dt = fine_dt * stride;
                for (int j = 1; j < stride; ++j)
                    for (std::size_t c = 0; c < inc.db.size(); ++c)
                        inc.db[c] += fine[i + j].db[c];
                steppers[level].apply_increment(s, inc);
            }
            SpectralField u = s.pi;
            u *= std::exp(s.logr);
            return u;
        };

        const SpectralField ref = terminal(levels - 1);
        for (int level = 0; level < levels - 1; ++level) {
            SpectralField diff = terminal(level);
            diff -= ref;
            err_sq[level] += diff.sq_norm();
        }
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = levels - 1;
    for (int level = 0; level < n; ++level) {
        const double x = std::log(T / (base_steps << level));
        const double y = 0.5 * std::log(err_sq[level] / n_paths);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace convergence
