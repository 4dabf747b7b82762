#include "qsep/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace qsep {

namespace {

void require_same_dim(const CMatrix& a, const CMatrix& b, const char* what) {
    if (a.dim() != b.dim()) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")");
    }
}

void require_register(const CMatrix& rho, QubitMask mask, unsigned n_qubits, const char* what) {
    if (n_qubits == 0 || n_qubits > 16 || rho.dim() != (std::size_t{1} << n_qubits)) {
        throw std::invalid_argument(std::string(what) + ": matrix dimension " + std::to_string(rho.dim()) +
                                    " does not match " + std::to_string(n_qubits) + " qubits");
    }
    if (mask == 0 || (mask >> n_qubits) != 0) {
        throw std::invalid_argument(std::string(what) + ": qubit subset is empty or out of range");
    }
}

// Basis-index bit that carries qubit q.
std::size_t index_bit(unsigned q, unsigned n_qubits) { return std::size_t{1} << (n_qubits - 1 - q); }

}  // namespace

CMatrix::CMatrix(std::size_t dim) : dim_(dim), data_(dim * dim, cdouble{}) {}

CMatrix::CMatrix(std::size_t dim, std::vector<cdouble> entries) : dim_(dim), data_(std::move(entries)) {
    if (data_.size() != dim * dim) {
        throw std::invalid_argument("CMatrix: entry count " + std::to_string(data_.size()) +
                                    " does not equal dim^2 for dim " + std::to_string(dim));
    }
}

CMatrix CMatrix::identity(std::size_t dim) {
    CMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
}

CMatrix CMatrix::diagonal(std::initializer_list<cdouble> diag) {
    CMatrix m(diag.size());
    std::size_t i = 0;
    for (auto d : diag) {
        m(i, i) = d;
        ++i;
    }
    return m;
}

CMatrix CMatrix::diagonal(std::span<const double> diag) {
    CMatrix m(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
}

CMatrix CMatrix::outer(std::span<const cdouble> psi) {
    CMatrix m(psi.size());
    for (std::size_t r = 0; r < psi.size(); ++r)
        for (std::size_t c = 0; c < psi.size(); ++c) m(r, c) = psi[r] * std::conj(psi[c]);
    return m;
}

CMatrix CMatrix::adjoint() const {
    CMatrix m(dim_);
    for (std::size_t r = 0; r < dim_; ++r)
        for (std::size_t c = 0; c < dim_; ++c) m(c, r) = std::conj((*this)(r, c));
    return m;
}

cdouble CMatrix::trace() const {
    cdouble t{};
    for (std::size_t i = 0; i < dim_; ++i) t += (*this)(i, i);
    return t;
}

double CMatrix::max_abs() const {
    double m = 0.0;
    for (const auto& z : data_) m = std::max(m, std::abs(z));
    return m;
}

double CMatrix::purity() const {
    // Tr(rho rho) = sum_ij rho_ij rho_ji
    double p = 0.0;
    for (std::size_t r = 0; r < dim_; ++r)
        for (std::size_t c = 0; c < dim_; ++c) p += std::real((*this)(r, c) * (*this)(c, r));
    return p;
}

CMatrix& CMatrix::operator+=(const CMatrix& o) {
    require_same_dim(*this, o, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

CMatrix& CMatrix::operator-=(const CMatrix& o) {
    require_same_dim(*this, o, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

CMatrix& CMatrix::operator*=(cdouble s) {
    for (auto& z : data_) z *= s;
    return *this;
}

CMatrix operator*(const CMatrix& a, const CMatrix& b) {
    require_same_dim(a, b, "operator*");
    const std::size_t n = a.dim();
    CMatrix m(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = 0; k < n; ++k) {
            const cdouble ark = a(r, k);
            if (ark == cdouble{}) continue;
            for (std::size_t c = 0; c < n; ++c) m(r, c) += ark * b(k, c);
        }
    return m;
}

double max_abs_diff(const CMatrix& a, const CMatrix& b) {
    require_same_dim(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

double hermiticity_defect(const CMatrix& h) {
    double m = 0.0;
    for (std::size_t r = 0; r < h.dim(); ++r)
        for (std::size_t c = r; c < h.dim(); ++c) m = std::max(m, std::abs(h(r, c) - std::conj(h(c, r))));
    return m;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
    const std::size_t na = a.dim(), nb = b.dim();
    CMatrix m(na * nb);
    for (std::size_t i = 0; i < na; ++i)
        for (std::size_t j = 0; j < na; ++j) {
            const cdouble aij = a(i, j);
            for (std::size_t k = 0; k < nb; ++k)
                for (std::size_t l = 0; l < nb; ++l) m(i * nb + k, j * nb + l) = aij * b(k, l);
        }
    return m;
}

std::vector<cdouble> apply(const CMatrix& m, std::span<const cdouble> v) {
    if (v.size() != m.dim()) throw std::invalid_argument("apply: vector length does not match matrix");
    std::vector<cdouble> out(m.dim());
    for (std::size_t r = 0; r < m.dim(); ++r) {
        cdouble s{};
        for (std::size_t c = 0; c < m.dim(); ++c) s += m(r, c) * v[c];
        out[r] = s;
    }
    return out;
}

QubitMask qubit_mask(std::initializer_list<unsigned> qubits) {
    QubitMask m = 0;
    for (auto q : qubits) m |= qubit_bit(q);
    return m;
}

CMatrix partial_trace(const CMatrix& rho, QubitMask keep, unsigned n_qubits) {
    require_register(rho, keep, n_qubits, "partial_trace");

    std::vector<std::size_t> kept_bits, traced_bits;
    for (unsigned q = 0; q < n_qubits; ++q)
        (keep & qubit_bit(q) ? kept_bits : traced_bits).push_back(index_bit(q, n_qubits));

    // Full basis index for (kept index, traced index), both read most-significant first.
    auto compose = [](std::size_t idx, const std::vector<std::size_t>& bits) {
        std::size_t full = 0;
        for (std::size_t j = 0; j < bits.size(); ++j)
            if (idx & (std::size_t{1} << (bits.size() - 1 - j))) full |= bits[j];
        return full;
    };

    const std::size_t dk = std::size_t{1} << kept_bits.size();
    const std::size_t dt = std::size_t{1} << traced_bits.size();
    std::vector<std::size_t> kept_full(dk), traced_full(dt);
    for (std::size_t i = 0; i < dk; ++i) kept_full[i] = compose(i, kept_bits);
    for (std::size_t t = 0; t < dt; ++t) traced_full[t] = compose(t, traced_bits);

    CMatrix out(dk);
    for (std::size_t r = 0; r < dk; ++r)
        for (std::size_t c = 0; c < dk; ++c) {
            cdouble s{};
            for (std::size_t t = 0; t < dt; ++t) s += rho(kept_full[r] | traced_full[t], kept_full[c] | traced_full[t]);
            out(r, c) = s;
        }
    return out;
}

CMatrix partial_transpose(const CMatrix& rho, QubitMask part, unsigned n_qubits) {
    require_register(rho, part, n_qubits, "partial_transpose");
    std::size_t bits = 0;
    for (unsigned q = 0; q < n_qubits; ++q)
        if (part & qubit_bit(q)) bits |= index_bit(q, n_qubits);

    const std::size_t n = rho.dim();
    CMatrix out(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            // exchange the `part` bits between row and column index
            const std::size_t r2 = (r & ~bits) | (c & bits);
            const std::size_t c2 = (c & ~bits) | (r & bits);
            out(r2, c2) = rho(r, c);
        }
    return out;
}

CMatrix permute_qubits(const CMatrix& rho, std::span<const unsigned> order, unsigned n_qubits) {
    if (order.size() != n_qubits || rho.dim() != (std::size_t{1} << n_qubits))
        throw std::invalid_argument("permute_qubits: order does not match register size");
    std::vector<bool> seen(n_qubits, false);
    for (auto q : order) {
        if (q >= n_qubits || seen[q]) throw std::invalid_argument("permute_qubits: order is not a permutation");
        seen[q] = true;
    }
    const std::size_t n = rho.dim();
    std::vector<std::size_t> src(n);
    for (std::size_t out_idx = 0; out_idx < n; ++out_idx) {
        std::size_t in_idx = 0;
        for (unsigned j = 0; j < n_qubits; ++j)
            if (out_idx & index_bit(j, n_qubits)) in_idx |= index_bit(order[j], n_qubits);
        src[out_idx] = in_idx;
    }
    CMatrix out(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) out(r, c) = rho(src[r], src[c]);
    return out;
}

std::vector<cdouble> EigResult::vector(std::size_t j) const {
    std::vector<cdouble> v(eigenvectors.dim());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = eigenvectors(i, j);
    return v;
}

EigResult hermitian_eig(const CMatrix& h) {
    const std::size_t n = h.dim();
    if (hermiticity_defect(h) > 1e-9) throw std::invalid_argument("hermitian_eig: input is not Hermitian");

    CMatrix a(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) a(r, c) = 0.5 * (h(r, c) + std::conj(h(c, r)));
    CMatrix v = CMatrix::identity(n);

    auto off_norm2 = [&] {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c)
                if (r != c) s += std::norm(a(r, c));
        return s;
    };
    double total2 = 0.0;
    for (auto z : a.data()) total2 += std::norm(z);
    const double stop2 = 1e-28 * total2;

    for (int sweep = 0; sweep < 100 && off_norm2() > stop2; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const cdouble apq = a(p, q);
                const double g = std::abs(apq);
                if (g == 0.0) continue;
                const double app = a(p, p).real(), aqq = a(q, q).real();
                const double tau = (aqq - app) / (2.0 * g);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const cdouble e = apq / g;
                const cdouble se = s * e, sec = s * std::conj(e);

                // A <- A V, V columns: p' = c e_p - s conj(e) e_q, q' = s e e_p + c e_q
                for (std::size_t k = 0; k < n; ++k) {
                    const cdouble akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - sec * akq;
                    a(k, q) = se * akp + c * akq;
                }
                // A <- V^dagger A
                for (std::size_t k = 0; k < n; ++k) {
                    const cdouble apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - se * aqk;
                    a(q, k) = sec * apk + c * aqk;
                }
                a(p, q) = a(q, p) = cdouble{};
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
                for (std::size_t k = 0; k < n; ++k) {
                    const cdouble vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - sec * vkq;
                    v(k, q) = se * vkp + c * vkq;
                }
            }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i).real() < a(j, j).real(); });

    EigResult res{std::vector<double>(n), CMatrix(n)};
    for (std::size_t j = 0; j < n; ++j) {
        res.eigenvalues[j] = a(order[j], order[j]).real();
        for (std::size_t i = 0; i < n; ++i) res.eigenvectors(i, j) = v(i, order[j]);
    }
    return res;
}

std::vector<double> hermitian_eigenvalues(const CMatrix& h) { return hermitian_eig(h).eigenvalues; }

}  // namespace qsep
