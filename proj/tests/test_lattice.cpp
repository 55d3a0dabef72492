#include <catch2/catch_amalgamated.hpp>

#include "projsde/bands.hpp"
#include "projsde/norms.hpp"
#include "projsde/selftest.hpp"

using namespace projsde;

TEST_CASE("lattice enumeration is lexicographic and Hermitian-paired") {
    auto lat = Lattice::make(2, 3);
    REQUIRE(lat->dim() == 2);
    // lexicographic order: coordinates never decrease in lex comparison
    for (int i = 1; i < lat->size(); ++i) {
        const int* a = lat->mode(i - 1);
        const int* b = lat->mode(i);
        const bool less = a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
        REQUIRE(less);
    }
    for (int i = 0; i < lat->size(); ++i) {
        REQUIRE(lat->mode_sq(i) <= 9);
        const int nix = lat->neg_index(i);
        REQUIRE(lat->mode(nix)[0] == -lat->mode(i)[0]);
        REQUIRE(lat->mode(nix)[1] == -lat->mode(i)[1]);
        REQUIRE(lat->neg_index(nix) == i);
    }
    // zero mode is self-paired
    const int z = lat->find({0, 0});
    REQUIRE(lat->neg_index(z) == z);
    // representatives cover each pair exactly once
    int covered = 0;
    for (int idx : lat->representatives()) covered += (lat->neg_index(idx) == idx) ? 1 : 2;
    REQUIRE(covered == lat->size());
}

TEST_CASE("eigenvalues and gaps") {
    REQUIRE(eigenvalue(25, 1.0) == 25.0);     // k = (3,4), a = 1
    REQUIRE(eigenvalue(0, 3.0) == 0.0);       // zero mode
    REQUIRE(eigenvalue(4, 1.5) == Catch::Approx(8.0));  // k = (2,0), a = 3/2
    REQUIRE(eigenvalue_gap(5, 1.0) == 11.0);
    REQUIRE(eigenvalue_gap(0, 1.0) == 1.0);
    REQUIRE(eigenvalue_gap(1, 2.0) == Catch::Approx(15.0));
}

TEST_CASE("band projection basics") {
    auto lat = Lattice::make(1, 8);
    FreqGeometry geom({1.0}, 1.0);
    const SpectralField e5 = unit_mode_field(lat, 1, {5});

    SECTION("low band keeps |k| <= L") {
        const SpectralField p = project(e5, make_band(5, Band::Low, geom));
        REQUIRE(p.coeffs == e5.coeffs);
    }
    SECTION("geq is strict |k| > L") {
        const SpectralField keep = project(e5, make_band(4, Band::Geq, geom));
        REQUIRE(keep.coeffs == e5.coeffs);
        const SpectralField drop = project(e5, make_band(5, Band::Geq, geom));
        REQUIRE(drop.sq_norm() == 0.0);
    }
    SECTION("idempotent and linear") {
        const BandSpec b = make_band(3, Band::High, geom);
        SplitMix64 rng(3);
        const SpectralField f = random_unit_field(lat, 1, rng);
        const SpectralField p1 = project(f, b);
        const SpectralField p2 = project(p1, b);
        REQUIRE(p1.coeffs == p2.coeffs);
    }
}

TEST_CASE("per-component thresholds follow the dissipation rate") {
    // m = 2, nu = (1, 16), a = 1, L = 2: component 2 low band is
    // |k| <= 2 / sqrt(16) = 0.5, so only k = 0 survives.
    auto lat = Lattice::make(1, 4);
    FreqGeometry geom({1.0, 16.0}, 1.0);
    SpectralField f(lat, 2);
    f.set_pair(0, lat->find({1}), Complex{0.5, 0.0});
    f.set_pair(1, lat->find({1}), Complex{0.5, 0.0});
    f.at(1, lat->find({0})) = Complex{0.3, 0.0};
    const SpectralField low = project(f, make_band(2, Band::Low, geom));
    REQUIRE(std::norm(low.at(0, lat->find({1}))) > 0.0);   // comp 1: 1 <= 2
    REQUIRE(std::norm(low.at(1, lat->find({1}))) == 0.0);  // comp 2: 1 > 0.5
    REQUIRE(std::norm(low.at(1, lat->find({0}))) > 0.0);
}

TEST_CASE("shifted seminorm pinned values") {
    auto lat = Lattice::make(1, 8);
    FreqGeometry geom({1.0}, 1.0);
    const SpectralField e5 = unit_mode_field(lat, 1, {5});
    REQUIRE(shifted_seminorm(e5, 0.5, 3, geom) == Catch::Approx(std::sqrt(3.0)));
    // supported at or below L: empty sum
    const SpectralField e2 = unit_mode_field(lat, 1, {2});
    REQUIRE(shifted_seminorm(e2, 0.5, 2, geom) == 0.0);
}

TEST_CASE("half-regularity identity against the geq projection") {
    // |phi|^2_{1/2,L} = |P^geq_L phi|^2_{H^1/2} - sum_a L_a |P^geq_L phi^a|^2,
    // expanded term by term on the same summation range |k| > L_alpha.
    auto lat = Lattice::make(1, 12);
    FreqGeometry geom({1.0, 2.5}, 1.5);
    SplitMix64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const SpectralField f = random_unit_field(lat, 2, rng, 0.3);
        const int L = trial % 7;
        const double lhs = shifted_seminorm_sq(f, 0.5, L, geom);
        const SpectralField g = project(f, make_band(L, Band::Geq, geom));
        double rhs = sobolev_norm_sq(g, 0.5);
        for (int alpha = 0; alpha < 2; ++alpha) {
            double comp_sq = 0.0;
            for (int i = 0; i < g.n_modes(); ++i) comp_sq += std::norm(g.at(alpha, i));
            rhs -= geom.threshold(alpha, L) * comp_sq;
        }
        REQUIRE(lhs == Catch::Approx(rhs).margin(1e-12));
    }
}

TEST_CASE("sobolev norm pinned values") {
    auto lat = Lattice::make(1, 5);
    const SpectralField e0 = unit_mode_field(lat, 1, {0});
    REQUIRE(sobolev_norm(e0, 0.7) == Catch::Approx(1.0));
    const SpectralField e3 = unit_mode_field(lat, 1, {3});
    REQUIRE(sobolev_norm(e3, 1.0) == Catch::Approx(4.0));
    SplitMix64 rng(4);
    const SpectralField f = random_unit_field(lat, 1, rng);
    REQUIRE(sobolev_norm(f, 0.0) == Catch::Approx(f.norm()));
}

TEST_CASE("energy median") {
    auto lat = Lattice::make(1, 10);
    FreqGeometry geom({1.0}, 1.0);
    REQUIRE(energy_median(unit_mode_field(lat, 1, {0}), geom) == 1);
    REQUIRE(energy_median(unit_mode_field(lat, 1, {5}), geom) == 5);

    SECTION("two-shell field, brute-force oracle") {
        SpectralField f(lat, 1);
        f.set_pair(0, lat->find({1}), Complex{std::sqrt(0.2), 0.0});
        f.set_pair(0, lat->find({7}), Complex{std::sqrt(0.3), 0.0});
        // independent evaluation of the defining inequality for M = 1..7
        int oracle = -1;
        for (int M = 1; M <= 10 && oracle < 0; ++M) {
            double low = 0.0, geq = 0.0;
            for (int i = 0; i < f.n_modes(); ++i) {
                const double v = std::norm(f.at(0, i));
                if (f.lattice->mode_abs(i) <= geom.threshold(0, M))
                    low += v;
                else
                    geq += v;
            }
            if (std::sqrt(geq) <= std::sqrt(low)) oracle = M;
        }
        REQUIRE(oracle == 7);
        REQUIRE(energy_median(f, geom) == oracle);
    }
    SECTION("zero field has no median") {
        SpectralField z(lat, 1);
        REQUIRE_THROWS_AS(energy_median(z, geom), std::domain_error);
    }
    SECTION("median matches definition on random fields") {
        SplitMix64 rng(7);
        FreqGeometry g2({1.0, 3.0}, 1.0);
        for (int trial = 0; trial < 100; ++trial) {
            const SpectralField f = random_unit_field(lat, 2, rng, 0.2);
            const int M = energy_median(f, g2);
            double low_sq, geq_sq;
            split_sq_norm(f, g2, M, low_sq, geq_sq);
            REQUIRE(geq_sq <= low_sq);
            if (M > 1) {
                split_sq_norm(f, g2, M - 1, low_sq, geq_sq);
                REQUIRE(geq_sq > low_sq);
            }
        }
    }
}

TEST_CASE("field serialization round trip") {
    auto lat = Lattice::make(2, 4);
    SplitMix64 rng(5);
    const SpectralField f = random_unit_field(lat, 2, rng);
    const SpectralField g = from_bytes(lat, 2, to_bytes(f));
    REQUIRE(f.coeffs == g.coeffs);
}
