#pragma once

// Random and parameterized three-qubit states.
//
// Every generator takes an explicit RNG stream; there is no global random
// state, so independent streams can run on separate threads.

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "qsep/linalg.hpp"

namespace qsep {

using Rng = std::mt19937_64;

inline constexpr unsigned kQubits = 3;
inline constexpr std::size_t kDim = 8;

/// Density matrices are carried as 8x8 CMatrix values. These tolerances
/// define a valid state.
struct DensityTolerance {
    double hermiticity = 1e-10;
    double trace = 1e-10;
    double min_eigenvalue = -1e-9;
};

/// True when `rho` is 8x8, Hermitian, unit-trace and PSD within `tol`.
bool is_density_matrix(const CMatrix& rho, const DensityTolerance& tol = {});

struct PureState {
    std::vector<cdouble> amplitudes;

    unsigned n_qubits() const;
    double norm() const;
    CMatrix density() const { return CMatrix::outer(amplitudes); }
};

PureState product_state(std::span<const PureState> qubits);

/// Single-qubit gate U(theta, phi, lambda) in the Euler-angle convention
/// [[cos t/2, -e^{i l} sin t/2], [e^{i p} sin t/2, e^{i(p+l)} cos t/2]].
CMatrix euler_unitary(double theta, double phi, double lambda);

// ---------------------------------------------------------------------------
// Pure states

/// Normalized vector of i.i.d. standard complex Gaussians (Haar measure).
PureState haar_random_pure(unsigned n_qubits, Rng& rng);

/// Kronecker product of three independent single-qubit Haar states.
PureState random_separable_pure(Rng& rng);

/// |0...0> followed by `depth` layers of random U(theta, phi, lambda) on every
/// qubit; with `entangling`, each layer ends with a CNOT on a random adjacent
/// pair in a random orientation. Throws std::invalid_argument for depth < 1.
PureState random_circuit_state(unsigned n_qubits, unsigned depth, bool entangling, Rng& rng);

inline constexpr unsigned kDefaultCircuitDepth = 4;

// ---------------------------------------------------------------------------
// Parameterized mixed generator

struct ParameterizedGenParams {
    std::array<double, 3> a{};        // per-qubit |0> amplitude, b_i = sqrt(1 - a_i^2)
    std::array<double, 3> phases{};   // phi_12, phi_13, phi_23
    std::array<double, 3> dephasing{};  // c_i, coherence scale of qubit i
    std::array<double, 9> euler{};    // (theta, phi, lambda) for qubits 1..3

    static ParameterizedGenParams sample(Rng& rng);
};

/// Phase-entangled product amplitudes, per-qubit dephasing, then local
/// Euler rotations. Throws std::invalid_argument on out-of-range parameters.
CMatrix parameterized_mixed(const ParameterizedGenParams& params);

/// Scales every coherence of `qubit` (entries whose row and column differ in
/// that qubit) by c; equals the single-qubit dephasing channel on the register.
CMatrix dephase_qubit(const CMatrix& rho, unsigned qubit, double c, unsigned n_qubits = kQubits);

/// U rho U^dagger.
CMatrix conjugate(const CMatrix& rho, const CMatrix& u);

// ---------------------------------------------------------------------------
// Mixed states

/// Convex combination. Throws std::invalid_argument unless the lists have equal
/// non-zero length, probabilities are non-negative and sum to 1 within 1e-12.
CMatrix mix(std::span<const CMatrix> states, std::span<const double> probs);

/// Haar pure state on n_src qubits traced down to the first three.
/// Throws std::invalid_argument unless n_src is 4 or 5.
CMatrix reduce_from_larger(unsigned n_src, Rng& rng);

/// Adds c to the largest eigenvalue and renormalizes the trace.
CMatrix boost_largest_eigenvalue(const CMatrix& rho, double c);

/// Hilbert-Schmidt random single-qubit state G G^dagger / Tr.
CMatrix random_mixed_qubit(Rng& rng);

/// rho_A (x) rho_B (x) rho_C with independent random mixed factors.
CMatrix random_mixed_product(Rng& rng);

/// Classical mixture over a random local orthonormal product basis, supported
/// on 2..8 basis products. Never a product state.
CMatrix random_zero_discord(Rng& rng);

/// Mixture of 2..4 random pure product states with random weights.
CMatrix random_discordant_separable(Rng& rng);

/// Mixed state with negativity above `min_negativity` on at least one cut,
/// drawn from Haar mixtures, entangled/separable blends, reductions from
/// 4-5 qubits, and the parameterized generator.
CMatrix random_mixed_entangled(Rng& rng, double min_negativity = 1e-6);

/// Random probability vector (flat Dirichlet).
std::vector<double> random_simplex(std::size_t n, Rng& rng);

// ---------------------------------------------------------------------------
// Two-dimensional map family

struct MapPoint {
    double u = 0.0;
    double v = 0.0;
    double p = 0.0;
    double a_param = 0.0;
    double phi = 0.0;
    double c_boost = 0.0;
};

/// Derived map parameters for a coordinate in [0,2]^2. The square ABCD is
/// [0.5,1.5]^2 with A=(0.5,0.5), B=(0.5,1.5), C=(1.5,1.5), D=(1.5,0.5);
/// the lower triangle (v < u) mirrors the upper one and carries an extra
/// eigenvalue boost. Throws std::invalid_argument outside the domain.
MapPoint map_point(double u, double v);

/// p |Psi_1><Psi_1| + (1-p) |Psi_2><Psi_2| with |Psi_i> = |psi_i>^{(x)3},
/// followed by the point's largest-eigenvalue boost.
CMatrix map_state(const MapPoint& pt);

}  // namespace qsep
