#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

namespace projsde {

/// Truncated integer frequency lattice {k in Z^d : |k| <= K} with Euclidean |k|.
///
/// Modes are enumerated in lexicographic order of their coordinates, so any
/// serialization derived from mode indices is bit-stable. Each mode knows the
/// index of its negation; a mode is a "representative" if it is the canonical
/// member of the pair {k, -k} (k = 0 is self-paired). Hermitian-symmetric
/// storage and noise sampling iterate over representatives only.
class Lattice {
public:
    Lattice(int d, int K) : d_(d), K_(K) {
        if (d < 1) throw std::invalid_argument("lattice: dimension must be >= 1");
        if (K < 0) throw std::invalid_argument("lattice: truncation radius must be >= 0");
        const long long side = 2LL * K + 1;
        long long box = 1;
        for (int i = 0; i < d; ++i) {
            box *= side;
            if (box > (1LL << 27))
                throw std::invalid_argument("lattice: mode box too large for dense index table");
        }
        pack_table_.assign(static_cast<std::size_t>(box), -1);

        std::vector<int> k(d, -K);
        const long long K2 = static_cast<long long>(K) * K;
        while (true) {
            long long sq = 0;
            for (int i = 0; i < d; ++i) sq += static_cast<long long>(k[i]) * k[i];
            if (sq <= K2) {
                pack_table_[pack(k.data())] = static_cast<int>(k2_.size());
                coords_.insert(coords_.end(), k.begin(), k.end());
                k2_.push_back(sq);
                kabs_.push_back(std::sqrt(static_cast<double>(sq)));
            }
            int i = d - 1;
            while (i >= 0 && k[i] == K) { k[i] = -K; --i; }
            if (i < 0) break;
            ++k[i];
        }

        const int n = size();
        neg_.resize(n);
        std::vector<int> nk(d);
        for (int idx = 0; idx < n; ++idx) {
            for (int i = 0; i < d; ++i) nk[i] = -coords_[static_cast<std::size_t>(idx) * d + i];
            neg_[idx] = pack_table_[pack(nk.data())];
        }
        for (int idx = 0; idx < n; ++idx)
            if (is_representative(idx)) reps_.push_back(idx);
    }

    static std::shared_ptr<const Lattice> make(int d, int K) {
        return std::make_shared<const Lattice>(d, K);
    }

    int dim() const { return d_; }
    int truncation() const { return K_; }
    int size() const { return static_cast<int>(k2_.size()); }

    const int* mode(int idx) const { return &coords_[static_cast<std::size_t>(idx) * d_]; }
    long long mode_sq(int idx) const { return k2_[idx]; }
    double mode_abs(int idx) const { return kabs_[idx]; }
    int neg_index(int idx) const { return neg_[idx]; }
    const std::vector<int>& representatives() const { return reps_; }

    /// Index of mode k, or -1 when k is outside the lattice.
    int find(const int* k) const {
        for (int i = 0; i < d_; ++i)
            if (k[i] < -K_ || k[i] > K_) return -1;
        return pack_table_[pack(k)];
    }
    int find(const std::vector<int>& k) const { return find(k.data()); }
    int find(std::initializer_list<int> k) const { return find(std::data(k)); }

    /// k is canonical in {k,-k} if its first nonzero coordinate is positive.
    bool is_representative(int idx) const {
        const int* k = mode(idx);
        for (int i = 0; i < d_; ++i) {
            if (k[i] > 0) return true;
            if (k[i] < 0) return false;
        }
        return true;  // k = 0
    }

private:
    std::size_t pack(const int* k) const {
        std::size_t p = 0;
        const std::size_t side = static_cast<std::size_t>(2 * K_ + 1);
        for (int i = 0; i < d_; ++i) p = p * side + static_cast<std::size_t>(k[i] + K_);
        return p;
    }

    int d_;
    int K_;
    std::vector<int> coords_;
    std::vector<long long> k2_;
    std::vector<double> kabs_;
    std::vector<int> neg_;
    std::vector<int> reps_;
    std::vector<int> pack_table_;
};

/// zeta_k = |k|^(2a), the dissipation eigenvalue of mode k.
inline double eigenvalue(long long k_sq, double a) {
    if (k_sq == 0) return 0.0;
    return std::pow(static_cast<double>(k_sq), a);
}

inline double eigenvalue(const Lattice& lat, int idx, double a) {
    return eigenvalue(lat.mode_sq(idx), a);
}

/// Delta_L = zeta_{L+1} - zeta_L, the one-dimensional eigenvalue gap.
inline double eigenvalue_gap(int L, double a) {
    if (L < 0) throw std::invalid_argument("eigenvalue_gap: L must be >= 0");
    const double zl1 = std::pow(static_cast<double>(L + 1), 2.0 * a);
    const double zl = L == 0 ? 0.0 : std::pow(static_cast<double>(L), 2.0 * a);
    return zl1 - zl;
}

}  // namespace projsde
