#pragma once

// Shared helpers for the unit tests: brute-force reference implementations
// that share no code with the library.

#include <Eigen/Dense>

#include <complex>
#include <random>

#include "qsep/linalg.hpp"
#include "qsep/states.hpp"

namespace qsep::test {

using EMatrix = Eigen::MatrixXcd;

inline EMatrix to_eigen(const CMatrix& m) {
    EMatrix e(m.dim(), m.dim());
    for (std::size_t r = 0; r < m.dim(); ++r)
        for (std::size_t c = 0; c < m.dim(); ++c) e(r, c) = m(r, c);
    return e;
}

inline CMatrix from_eigen(const EMatrix& e) {
    CMatrix m(static_cast<std::size_t>(e.rows()));
    for (Eigen::Index r = 0; r < e.rows(); ++r)
        for (Eigen::Index c = 0; c < e.cols(); ++c) m(r, c) = e(r, c);
    return m;
}

/// Ginibre G G^dagger / Tr, full rank with probability one.
inline CMatrix random_density(std::size_t dim, Rng& rng) {
    std::normal_distribution<double> n;
    EMatrix g(dim, dim);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = {n(rng), n(rng)};
    EMatrix rho = g * g.adjoint();
    rho /= rho.trace();
    return from_eigen(rho);
}

inline CMatrix random_hermitian(std::size_t dim, Rng& rng) {
    std::normal_distribution<double> n;
    EMatrix g(dim, dim);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = {n(rng), n(rng)};
    return from_eigen((g + g.adjoint()) / 2.0);
}

/// Reduced state by explicit summation over bit patterns (qubit 0 = MSB).
inline CMatrix brute_partial_trace(const CMatrix& rho, unsigned keep_mask, unsigned n) {
    std::vector<unsigned> kept;
    for (unsigned q = 0; q < n; ++q)
        if (keep_mask & (1u << q)) kept.push_back(q);
    const std::size_t dk = std::size_t{1} << kept.size();
    CMatrix out(dk);
    const std::size_t dim = std::size_t{1} << n;
    auto bit = [n](std::size_t idx, unsigned q) { return (idx >> (n - 1 - q)) & 1u; };
    auto reduced = [&](std::size_t idx) {
        std::size_t r = 0;
        for (unsigned q : kept) r = 2 * r + bit(idx, q);
        return r;
    };
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            bool same = true;
            for (unsigned q = 0; q < n; ++q)
                if (!(keep_mask & (1u << q)) && bit(i, q) != bit(j, q)) same = false;
            if (same) out(reduced(i), reduced(j)) += rho(i, j);
        }
    return out;
}

inline CMatrix ket_density(std::initializer_list<std::pair<std::size_t, cdouble>> amps, std::size_t dim = 8) {
    std::vector<cdouble> psi(dim);
    double norm = 0.0;
    for (auto [i, a] : amps) psi[i] = a, norm += std::norm(a);
    for (auto& a : psi) a /= std::sqrt(norm);
    return CMatrix::outer(psi);
}

inline CMatrix ghz() { return ket_density({{0, 1.0}, {7, 1.0}}); }

inline CMatrix ghz_mixture() {
    CMatrix m(8);
    m(0, 0) = 0.5;
    m(7, 7) = 0.5;
    return m;
}

}  // namespace qsep::test
