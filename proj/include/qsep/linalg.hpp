#pragma once

// Dense complex matrices for small qubit registers (dim = 2^n, n <= 5).
//
// Qubit 0 is the most significant bit of a basis index, so for three qubits
// |abc> has index 4a + 2b + c and kron(rho_A, kron(rho_B, rho_C)) is laid out
// with qubit A as the slowest-varying index.

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace qsep {

using cdouble = std::complex<double>;

class CMatrix {
public:
    CMatrix() = default;
    explicit CMatrix(std::size_t dim);
    CMatrix(std::size_t dim, std::vector<cdouble> entries);

    static CMatrix identity(std::size_t dim);
    static CMatrix diagonal(std::initializer_list<cdouble> diag);
    static CMatrix diagonal(std::span<const double> diag);
    /// |psi><psi| for an amplitude vector of length dim.
    static CMatrix outer(std::span<const cdouble> psi);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return data_.size(); }

    cdouble& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * dim_ + c]; }
    const cdouble& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * dim_ + c]; }

    std::span<cdouble> data() noexcept { return data_; }
    std::span<const cdouble> data() const noexcept { return data_; }

    CMatrix adjoint() const;
    cdouble trace() const;
    /// Largest entry modulus.
    double max_abs() const;
    /// Tr(rho^2) taken as a real number (Hermitian inputs).
    double purity() const;

    CMatrix& operator+=(const CMatrix& o);
    CMatrix& operator-=(const CMatrix& o);
    CMatrix& operator*=(cdouble s);

    friend CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
    friend CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
    friend CMatrix operator*(CMatrix a, cdouble s) { return a *= s; }
    friend CMatrix operator*(cdouble s, CMatrix a) { return a *= s; }
    friend CMatrix operator*(const CMatrix& a, const CMatrix& b);

    bool operator==(const CMatrix&) const = default;

private:
    std::size_t dim_ = 0;
    std::vector<cdouble> data_;
};

/// max_ij |a_ij - b_ij|; dimensions must agree.
double max_abs_diff(const CMatrix& a, const CMatrix& b);

/// Hermiticity defect max_ij |h_ij - conj(h_ji)|.
double hermiticity_defect(const CMatrix& h);

CMatrix kron(const CMatrix& a, const CMatrix& b);

/// Matrix-vector product.
std::vector<cdouble> apply(const CMatrix& m, std::span<const cdouble> v);

/// Qubit subsets are bitmasks over qubit indices: bit q set means qubit q is
/// in the set (qubit 0 = most significant basis bit).
using QubitMask = unsigned;

constexpr QubitMask qubit_bit(unsigned q) noexcept { return QubitMask{1} << q; }
QubitMask qubit_mask(std::initializer_list<unsigned> qubits);

/// Trace out every qubit not in `keep`; kept qubits retain their relative order.
/// Throws std::invalid_argument on dimension mismatch or an empty/out-of-range set.
CMatrix partial_trace(const CMatrix& rho, QubitMask keep, unsigned n_qubits);

/// Transpose the tensor indices belonging to `part` only.
CMatrix partial_transpose(const CMatrix& rho, QubitMask part, unsigned n_qubits);

/// Reorders tensor factors: output qubit j is input qubit order[j].
CMatrix permute_qubits(const CMatrix& rho, std::span<const unsigned> order, unsigned n_qubits);

struct EigResult {
    std::vector<double> eigenvalues;  // ascending
    CMatrix eigenvectors;             // column j pairs with eigenvalues[j]

    /// Column j as an amplitude vector.
    std::vector<cdouble> vector(std::size_t j) const;
};

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
/// The input is symmetrized first; a Hermiticity defect above 1e-9 is rejected
/// with std::invalid_argument.
EigResult hermitian_eig(const CMatrix& h);

/// Eigenvalues only (ascending).
std::vector<double> hermitian_eigenvalues(const CMatrix& h);

}  // namespace qsep
