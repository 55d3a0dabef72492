#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "projsde/median_machine.hpp"
#include "projsde/runner.hpp"
#include "projsde/selftest.hpp"

using namespace projsde;

namespace {

SpectralField two_mode(std::shared_ptr<const Lattice> lat, int k_lo, double m_lo, int k_hi,
                       double m_hi) {
    SpectralField f(std::move(lat), 1);
    if (k_lo == 0)
        f.at(0, f.lattice->find({0})) = Complex{std::sqrt(m_lo), 0.0};
    else
        f.set_pair(0, f.lattice->find({k_lo}), Complex{std::sqrt(m_lo / 2.0), 0.0});
    f.set_pair(0, f.lattice->find({k_hi}), Complex{std::sqrt(m_hi / 2.0), 0.0});
    return f;
}

}  // namespace

TEST_CASE("marker") {
    auto lat = Lattice::make(1, 10);
    FreqGeometry geom({1.0}, 1.0);
    SECTION("mass inside the two shells is concentrated") {
        // shell (L-1, L] at L = 6 carries everything; low part is empty
        const SpectralField f = unit_mode_field(lat, 1, {6});
        REQUIRE(marker(6, f, geom) == Marker::C);
    }
    SECTION("mass at k = 0 only is diluted for L >= 2") {
        const SpectralField f = unit_mode_field(lat, 1, {0});
        REQUIRE(marker(2, f, geom) == Marker::D);
        REQUIRE(marker(5, f, geom) == Marker::D);
    }
    SECTION("exact boundary counts as concentrated") {
        // |central shells| = 1/4 |low|: mass 1/17 in shell, 16/17 low
        SpectralField f = two_mode(lat, 0, 16.0 / 17.0, 5, 1.0 / 17.0);
        REQUIRE(std::sqrt(1.0 / 17.0) == Catch::Approx(0.25 * std::sqrt(16.0 / 17.0)));
        REQUIRE(marker(5, f, geom) == Marker::C);
    }
    SECTION("level below 1 rejected") {
        const SpectralField f = unit_mode_field(lat, 1, {3});
        REQUIRE_THROWS(marker(0, f, geom));
    }
}

TEST_CASE("relative energy") {
    auto lat = Lattice::make(1, 10);
    FreqGeometry geom({1.0}, 1.0);
    SECTION("low-band-only field") {
        const SpectralField f = unit_mode_field(lat, 1, {2});
        const RelativeEnergy re = relative_energy(f, 4, geom);
        REQUIRE(re.w == 0.0);
        REQUIRE(re.wgeq == 0.0);
    }
    SECTION("equal masses give unit ratios") {
        const SpectralField f = two_mode(lat, 1, 0.5, 8, 0.5);
        const RelativeEnergy re = relative_energy(f, 3, geom);
        REQUIRE(re.w == Catch::Approx(1.0));
        REQUIRE(re.wgeq == Catch::Approx(1.0));
    }
    SECTION("central mass counts only in wgeq") {
        const SpectralField f = two_mode(lat, 0, 0.8, 3, 0.2);
        const RelativeEnergy re = relative_energy(f, 2, geom);
        REQUIRE(re.w == 0.0);
        REQUIRE(re.wgeq == Catch::Approx(0.5));
    }
    SECTION("vanishing low band is an error") {
        const SpectralField f = unit_mode_field(lat, 1, {8});
        REQUIRE_THROWS_AS(relative_energy(f, 2, geom), WUndefined);
    }
}

TEST_CASE("offline stop detection") {
    auto lat = Lattice::make(1, 10);
    FreqGeometry geom({1.0}, 1.0);
    const double h = 0.01;

    SECTION("already below threshold fires at the window start") {
        std::vector<double> times;
        std::vector<SpectralField> fields;
        for (int n = 0; n < 50; ++n) {
            times.push_back(n * h);
            fields.push_back(two_mode(lat, 1, 0.9, 8, 0.1));  // w = 1/3 at L in (1,8)
        }
        const StopResult r = detect_stop(StopKind::TauLess, 4, 0.5, 0.1, times, fields, geom);
        REQUIRE(r.fired);
        REQUIRE(r.time == Catch::Approx(0.1));
    }
    SECTION("two-mode deterministic decay crosses at the predicted grid time") {
        // w(t) = sqrt(m_hi/m_lo) e^{-(zeta_hi - zeta_lo) t}; threshold 1/2
        const double m_hi = 0.5, m_lo = 0.5;
        const int k_lo = 2, k_hi = 7;
        const double rate = (49.0 - 4.0);
        std::vector<double> times;
        std::vector<SpectralField> fields;
        for (int n = 0; n < 300; ++n) {
            const double t = n * h;
            times.push_back(t);
            fields.push_back(
                two_mode(lat, k_lo, m_lo * std::exp(-2 * 4.0 * t), k_hi,
                         m_hi * std::exp(-2 * 49.0 * t)));
        }
        const StopResult r = detect_stop(StopKind::TauLess, 4, 0.5, 0.0, times, fields, geom);
        const double t_star = std::log(2.0 * std::sqrt(m_hi / m_lo)) / rate;
        REQUIRE(r.fired);
        REQUIRE(r.time == Catch::Approx(std::ceil(t_star / h) * h).margin(1e-12));
    }
    SECTION("guard never reached returns the cap") {
        std::vector<double> times;
        std::vector<SpectralField> fields;
        for (int n = 0; n < 300; ++n) {
            times.push_back(n * h);
            fields.push_back(two_mode(lat, 1, 0.6, 8, 0.4));  // wgeq ~ 0.816 < 3/2, constant
        }
        const StopResult r =
            detect_stop(StopKind::SigmaGeq, 4, 1.5, 0.05, times, fields, geom);
        REQUIRE_FALSE(r.fired);
        REQUIRE(r.time == Catch::Approx(1.05));
    }
    SECTION("diluted stop scans past the one-unit cap") {
        std::vector<double> times;
        std::vector<SpectralField> fields;
        for (int n = 0; n < 300; ++n) {
            const double t = n * h;
            times.push_back(t);
            // concentrated until the shell decays against k = 0 mass
            fields.push_back(two_mode(lat, 0, 0.01, 5, 0.99 * std::exp(-2 * 25.0 * t)));
        }
        const StopResult r = detect_stop(StopKind::SigmaDiluted, 5, 0.0, 0.0, times, fields,
                                         geom, 0.25);
        REQUIRE(r.fired);
        // crossing: sqrt(0.99) e^{-25 t} = (1/4) * 0.1
        const double t_star = std::log(std::sqrt(0.99) / 0.025) / 25.0;
        REQUIRE(r.time == Catch::Approx(std::ceil(t_star / h) * h).margin(1e-12));
    }
}

TEST_CASE("skeleton machine on a noise-free decaying path") {
    // u0 = e_5-dominant with a k = 0 seed: dissipation pulls the median to 1.
    ModelParams p;
    p.d = 1;
    p.m = 1;
    p.a = 1.0;
    p.nu = {1.0};
    p.K = 8;
    p.dt = 1e-3;
    Stepper st(p, NoiseSpec::parametric(1, 1, 0, 0.0, 2.0));
    SpectralField u0 = two_mode(st.lattice(), 0, 0.02, 5, 0.98);
    SkeletonConfig cfg;
    SkeletonMachine machine(cfg, st.geometry(), p.dt);
    SimState s = st.initial_state(u0);
    SplitMix64 rng(1);
    std::vector<JumpRecord> jumps;
    machine.observe(0, 0.0, s.pi);
    REQUIRE(machine.current_level() == energy_median(s.pi, st.geometry()));
    for (long long step = 1; step <= 6000; ++step) {
        st.step(s, rng);
        auto j = machine.observe(step, s.t, s.pi);
        if (j) jumps.push_back(*j);
    }
    REQUIRE_FALSE(machine.aborted());
    REQUIRE(!jumps.empty());
    for (const JumpRecord& r : jumps) {
        REQUIRE(r.Mnext >= r.Mi - 1);
        REQUIRE(r.Tnext - r.Ti <= 3.0 + p.dt);
        if (r.event == 'A') REQUIRE(r.Mnext == r.Mi - 1);
    }
    REQUIRE(machine.current_level() == 1);
}

TEST_CASE("skeleton machine aborts when the tracked low band vanishes") {
    ModelParams p;
    p.d = 1;
    p.m = 1;
    p.a = 1.0;
    p.nu = {1.0};
    p.K = 8;
    p.dt = 1e-3;
    Stepper st(p, NoiseSpec::parametric(1, 1, 0, 0.0, 2.0));
    const SpectralField u0 = unit_mode_field(st.lattice(), 1, {5});
    SkeletonMachine machine(SkeletonConfig{}, st.geometry(), p.dt);
    SimState s = st.initial_state(u0);
    SplitMix64 rng(2);
    machine.observe(0, 0.0, s.pi);
    for (long long step = 1; step <= 2000 && !machine.aborted(); ++step) {
        st.step(s, rng);
        machine.observe(step, s.t, s.pi);
    }
    REQUIRE(machine.aborted());
    REQUIRE_FALSE(machine.abort_reason().empty());
}

TEST_CASE("skeleton pathwise invariants over a noisy mini-ensemble") {
    ModelParams p;
    p.d = 1;
    p.m = 1;
    p.a = 1.0;
    p.nu = {1.0};
    p.K = 12;
    p.dt = 1e-3;
    const NoiseSpec spec = NoiseSpec::parametric(1, 1, 6, 0.5, 2.5);
    Stepper st(p, spec);
    const auto& geom = st.geometry();
    SkeletonConfig cfg;
    const double gamma = cfg.gamma;
    const double E_bound = std::sqrt(1.0 / 16.0 + (1.0 + 1.0 / 16.0) * 2.25);

    std::vector<std::vector<JumpRecord>> all_jumps;
    for (int traj = 0; traj < 6; ++traj) {
        SpectralField u0 = two_mode(st.lattice(), 0, 0.05, 8, 0.95);
        SimState s = st.initial_state(u0);
        SkeletonMachine machine(cfg, geom, p.dt);
        SplitMix64 rng(derive_seed(77, traj));
        std::vector<JumpRecord> jumps;
        machine.observe(0, 0.0, s.pi);
        for (long long step = 1; step <= 20000; ++step) {
            st.step(s, rng);
            auto j = machine.observe(step, s.t, s.pi);
            if (j) jumps.push_back(*j);
            if (machine.aborted()) break;
            // level-M band bound, one-grid-step grace at jump instants
            const int M_t = machine.current_level();
            double low_sq, geq_sq;
            split_sq_norm(s.pi, geom, M_t, low_sq, geq_sq);
            const bool ok_band = std::sqrt(geq_sq) <= 2.0 * std::sqrt(low_sq) + 1e-12;
            const bool ok_low = 1.0 <= std::sqrt(5.0 * low_sq) + 1e-12;
            if (!(ok_band && ok_low)) {
                REQUIRE(j.has_value());  // violations only at jump instants
            }
        }
        REQUIRE_FALSE(machine.aborted());
        for (const JumpRecord& r : jumps) {
            REQUIRE(r.Mnext >= r.Mi - 1);
            REQUIRE(r.Mi >= r.median_at_jump * 0 + 1);
            REQUIRE(r.Tnext - r.Ti <= 3.0 + p.dt + 1e-9);
            if (r.event == 'A') REQUIRE(r.Mnext == r.Mi - 1);
            // the new level never undercuts the field median
            REQUIRE(r.Mnext >= std::min(r.median_at_jump, r.Mi - 1));
            // diluted exits obey the explicit bound E < 2
            if (r.dil_exit == 'm') REQUIRE(r.wgeq_at_S <= E_bound + 1e-9);
            // seminorm jump control
            if (r.Mnext >= r.Mi) {
                REQUIRE(r.w_seminorm_post <= r.w_seminorm_pre + 1e-12);
            } else {
                const double cap =
                    5.0 * std::pow(2.0, 2.0 * gamma) *
                    (std::pow(geom.nu_min(), -gamma / p.a) + 1.0 +
                     0.5 * r.w_seminorm_pre * r.w_seminorm_pre);
                REQUIRE(r.w_seminorm_post * r.w_seminorm_post <= cap + 1e-9);
            }
        }
        all_jumps.push_back(std::move(jumps));
    }

    const StoppingStats stats = stopping_time_stats(all_jumps, 5.0);
    REQUIRE(stats.n_jumps > 0);
    REQUIRE(stats.max_gap <= 3.0 + p.dt + 1e-9);
    // started well above the bottom state: the skeleton median drifts down
    REQUIRE(stats.mean_dM < 0.0);
    INFO("A-fraction " << stats.frac_A << ", mean gap " << stats.mean_gap);
}

TEST_CASE("stopping statistics basics") {
    JumpRecord r;
    r.Ti = 0.0;
    r.Tnext = 1.25;
    r.Mi = 5;
    r.Mnext = 4;
    r.event = 'A';
    const StoppingStats st = stopping_time_stats({{r}}, 5.0);
    REQUIRE(st.n_jumps == 1);
    REQUIRE(st.gap_histogram[5] == 1);  // 1.25 lands in bin [1.25, 1.5)
    REQUIRE(st.frac_A == 1.0);
    REQUIRE(st.mean_dM == -1.0);
    REQUIRE_THROWS(stopping_time_stats({}, 1.0));
}

TEST_CASE("dissipation drift diagnostic") {
    SECTION("noise-free two-mode segment matches the deterministic rate") {
        // w^2 decays at exactly 2 nu (zeta_hi - zeta_lo) >= 2 nu Delta_L
        const double dt = 1e-3;
        const int L = 4;
        const double zlo = 16.0, zhi = 36.0;  // k = 4 and k = 6
        std::vector<double> wsq;
        for (int n = 0; n <= 400; ++n)
            wsq.push_back(0.25 * std::exp(-2.0 * (zhi - zlo) * n * dt));
        const DriftReport rep = dissipation_diagnostic(wsq, dt, 1.0, eigenvalue_gap(L, 1.0));
        REQUIRE(rep.slope_ok);
        REQUIRE(std::abs(rep.const_rate) <= 1e-6);
        REQUIRE(rep.slope_rate ==
                Catch::Approx((std::exp(-2.0 * (zhi - zlo) * dt) - 1.0) / dt).epsilon(1e-6));
    }
    SECTION("common multiplicative noise leaves the ratio dynamics intact") {
        // noise at k = 0 multiplies every mode identically, so w is the
        // deterministic ratio even though the path is random
        ModelParams p;
        p.d = 1;
        p.m = 1;
        p.a = 1.0;
        p.nu = {1.0};
        p.K = 8;
        p.dt = 1e-3;
        Stepper st(p, NoiseSpec::diagonal_table(1, 1, 0, {{0, 0, {0}, 0.6}}));
        SimState s = st.initial_state(two_mode(st.lattice(), 2, 0.7, 6, 0.3));
        SplitMix64 rng(3);
        std::vector<double> wsq;
        for (int i = 0; i <= 300; ++i) {
            const RelativeEnergy re = relative_energy(s.pi, 4, st.geometry());
            wsq.push_back(re.w * re.w);
            st.step(s, rng);
        }
        const DriftReport rep = dissipation_diagnostic(wsq, p.dt, 1.0, eigenvalue_gap(4, 1.0));
        REQUIRE(rep.slope_ok);
        REQUIRE(std::abs(rep.const_rate) <= 1e-6);
    }
    SECTION("noisy segment still satisfies the drift bound with slack") {
        ModelParams p;
        p.d = 1;
        p.m = 1;
        p.a = 1.0;
        p.nu = {1.0};
        p.K = 10;
        p.dt = 1e-3;
        const NoiseSpec spec = NoiseSpec::parametric(1, 1, 5, 0.4, 2.5);
        Stepper st(p, spec);
        SimState s = st.initial_state(two_mode(st.lattice(), 1, 0.7, 8, 0.3));
        SplitMix64 rng(4);
        std::vector<double> wsq;
        const int L = 5;
        for (int i = 0; i <= 2000; ++i) {
            const RelativeEnergy re = relative_energy(s.pi, L, st.geometry());
            if (re.wgeq >= 2.0) break;  // stay inside the guarded window
            wsq.push_back(re.w * re.w);
            st.step(s, rng);
        }
        const DriftReport rep =
            dissipation_diagnostic(wsq, p.dt, 1.0, eigenvalue_gap(L, 1.0), 0.5);
        REQUIRE(rep.slope_ok);
        INFO("slope " << rep.slope_rate << " const " << rep.const_rate << " resid "
                      << rep.resid_var_rate);
    }
    SECTION("short segments rejected") {
        std::vector<double> wsq(30, 1.0);
        REQUIRE_THROWS(dissipation_diagnostic(wsq, 1e-3, 1.0, 1.0));
    }
}
