#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace longform {

using Rng = std::mt19937_64;

// splitmix64; used to derive independent substream seeds from one base seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(splitmix64(base) ^ splitmix64(stream * 0x9e3779b97f4a7c15ULL + 1));
}

inline Rng make_rng(std::uint64_t base, std::uint64_t stream) {
    return Rng(derive_seed(base, stream));
}

// Fills in Eigen storage order (column by column). One distribution instance
// per call, so the draw sequence is a pure function of the rng state.
inline void fill_gaussian(Eigen::Ref<Eigen::MatrixXd> m, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            m(i, j) = scale * unit(rng);
}

inline Eigen::VectorXd gaussian_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
    Eigen::VectorXd v(n);
    fill_gaussian(v, rng, scale);
    return v;
}

// k distinct values from [0, n), uniformly over ordered k-tuples
// (partial Fisher-Yates).
inline std::vector<int> sample_distinct(int n, int k, Rng& rng) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

}  // namespace longform
