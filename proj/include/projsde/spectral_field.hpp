#pragma once

#include <complex>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <vector>

#include "projsde/lattice.hpp"

namespace projsde {

using Complex = std::complex<double>;

/// Fourier coefficients of an m-component real field on a truncated lattice.
///
/// All modes are stored; Hermitian symmetry (coefficient at -k equal to the
/// conjugate at k, real coefficient at k = 0) is an invariant that mutating
/// operations must preserve. The squared L2 norm is the plain coefficient sum
/// (unit-volume torus, no 2*pi factors).
struct SpectralField {
    std::shared_ptr<const Lattice> lattice;
    int m = 0;
    std::vector<Complex> coeffs;  // [alpha * n + mode]

    SpectralField() = default;
    SpectralField(std::shared_ptr<const Lattice> lat, int components)
        : lattice(std::move(lat)), m(components),
          coeffs(static_cast<std::size_t>(components) * lattice->size(), Complex{0.0, 0.0}) {
        if (components < 1) throw std::invalid_argument("field: component count must be >= 1");
    }

    int n_modes() const { return lattice->size(); }

    Complex& at(int alpha, int mode) {
        return coeffs[static_cast<std::size_t>(alpha) * lattice->size() + mode];
    }
    const Complex& at(int alpha, int mode) const {
        return coeffs[static_cast<std::size_t>(alpha) * lattice->size() + mode];
    }

    double sq_norm() const {
        double s = 0.0;
        for (const Complex& c : coeffs) s += std::norm(c);
        return s;
    }
    double norm() const { return std::sqrt(sq_norm()); }

    /// Sets the coefficient at (alpha, k) and its Hermitian mirror at -k.
    void set_pair(int alpha, int mode, Complex value) {
        const int nix = lattice->neg_index(mode);
        if (nix == mode) value.imag(0.0);
        at(alpha, mode) = value;
        at(alpha, nix) = std::conj(value);
    }

    /// Rebuilds the non-representative half from the representatives.
    void enforce_hermitian() {
        for (int alpha = 0; alpha < m; ++alpha)
            for (int idx : lattice->representatives()) {
                const int nix = lattice->neg_index(idx);
                if (nix == idx)
                    at(alpha, idx).imag(0.0);
                else
                    at(alpha, nix) = std::conj(at(alpha, idx));
            }
    }

    double hermitian_defect() const {
        double worst = 0.0;
        for (int alpha = 0; alpha < m; ++alpha)
            for (int idx = 0; idx < lattice->size(); ++idx) {
                const Complex diff = at(alpha, idx) - std::conj(at(alpha, lattice->neg_index(idx)));
                worst = std::max(worst, std::abs(diff));
            }
        return worst;
    }

    SpectralField& operator*=(double s) {
        for (Complex& c : coeffs) c *= s;
        return *this;
    }
    SpectralField& operator+=(const SpectralField& o) {
        for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] += o.coeffs[i];
        return *this;
    }
    SpectralField& operator-=(const SpectralField& o) {
        for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] -= o.coeffs[i];
        return *this;
    }
};

/// L2 inner product of real fields, sum over components and modes. Real up to rounding.
inline double inner(const SpectralField& a, const SpectralField& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.coeffs.size(); ++i)
        s += (a.coeffs[i] * std::conj(b.coeffs[i])).real();
    return s;
}

/// Unit-mass field on the +/-k mode pair (cosine profile for k != 0).
inline SpectralField unit_mode_field(std::shared_ptr<const Lattice> lat, int m,
                                     const std::vector<int>& k, int alpha = 0) {
    SpectralField f(std::move(lat), m);
    const int idx = f.lattice->find(k);
    if (idx < 0) throw std::invalid_argument("unit_mode_field: mode outside lattice");
    const int nix = f.lattice->neg_index(idx);
    if (nix == idx)
        f.at(alpha, idx) = Complex{1.0, 0.0};
    else
        f.set_pair(alpha, idx, Complex{std::sqrt(0.5), 0.0});
    return f;
}

/// Deterministic little-endian byte serialization: per component, modes in
/// lexicographic order, interleaved (re, im) doubles.
inline std::vector<unsigned char> to_bytes(const SpectralField& f) {
    std::vector<unsigned char> out(f.coeffs.size() * 2 * sizeof(double));
    std::size_t pos = 0;
    for (const Complex& c : f.coeffs) {
        const double re = c.real(), im = c.imag();
        std::memcpy(out.data() + pos, &re, sizeof(double));
        pos += sizeof(double);
        std::memcpy(out.data() + pos, &im, sizeof(double));
        pos += sizeof(double);
    }
    return out;
}

inline SpectralField from_bytes(std::shared_ptr<const Lattice> lat, int m,
                                const std::vector<unsigned char>& bytes) {
    SpectralField f(std::move(lat), m);
    if (bytes.size() != f.coeffs.size() * 2 * sizeof(double))
        throw std::invalid_argument("from_bytes: size mismatch");
    std::size_t pos = 0;
    for (Complex& c : f.coeffs) {
        double re, im;
        std::memcpy(&re, bytes.data() + pos, sizeof(double));
        pos += sizeof(double);
        std::memcpy(&im, bytes.data() + pos, sizeof(double));
        pos += sizeof(double);
        c = Complex{re, im};
    }
    return f;
}

}  // namespace projsde
