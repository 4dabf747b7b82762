#include "qsep/states.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "qsep/oracles.hpp"

namespace qsep {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

void require_range(double x, double lo, double hi, const char* what) {
    if (!(x >= lo && x <= hi)) {
        throw std::invalid_argument(std::string(what) + " = " + std::to_string(x) + " outside [" +
                                    std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
}

std::array<PureState, 2> random_qubit_basis(Rng& rng) {
    auto q = haar_random_pure(1, rng);
    const cdouble a = q.amplitudes[0], b = q.amplitudes[1];
    return {q, PureState{{-std::conj(b), std::conj(a)}}};
}

// Apply a single-qubit gate to `qubit` of a state vector.
void apply_1q(std::vector<cdouble>& psi, const CMatrix& u, unsigned qubit, unsigned n_qubits) {
    const std::size_t bit = std::size_t{1} << (n_qubits - 1 - qubit);
    for (std::size_t i = 0; i < psi.size(); ++i) {
        if (i & bit) continue;
        const cdouble x0 = psi[i], x1 = psi[i | bit];
        psi[i] = u(0, 0) * x0 + u(0, 1) * x1;
        psi[i | bit] = u(1, 0) * x0 + u(1, 1) * x1;
    }
}

void apply_cnot(std::vector<cdouble>& psi, unsigned control, unsigned target, unsigned n_qubits) {
    const std::size_t cb = std::size_t{1} << (n_qubits - 1 - control);
    const std::size_t tb = std::size_t{1} << (n_qubits - 1 - target);
    for (std::size_t i = 0; i < psi.size(); ++i)
        if ((i & cb) && !(i & tb)) std::swap(psi[i], psi[i | tb]);
}

CMatrix random_euler_unitary(Rng& rng) {
    return euler_unitary(uniform(rng, 0, kTwoPi), uniform(rng, 0, kTwoPi), uniform(rng, 0, kTwoPi));
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

bool is_density_matrix(const CMatrix& rho, const DensityTolerance& tol) {
    if (rho.dim() != kDim) return false;
    for (auto z : rho.data())
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    if (hermiticity_defect(rho) > tol.hermiticity) return false;
    if (std::abs(rho.trace() - 1.0) > tol.trace) return false;
    return hermitian_eigenvalues(rho).front() >= tol.min_eigenvalue;
}

unsigned PureState::n_qubits() const {
    unsigned n = 0;
    while ((std::size_t{1} << n) < amplitudes.size()) ++n;
    return n;
}

double PureState::norm() const {
    double s = 0.0;
    for (auto z : amplitudes) s += std::norm(z);
    return std::sqrt(s);
}

PureState product_state(std::span<const PureState> qubits) {
    std::vector<cdouble> amps{1.0};
    for (const auto& q : qubits) {
        std::vector<cdouble> next;
        next.reserve(amps.size() * q.amplitudes.size());
        for (auto x : amps)
            for (auto y : q.amplitudes) next.push_back(x * y);
        amps = std::move(next);
    }
    return PureState{std::move(amps)};
}

CMatrix euler_unitary(double theta, double phi, double lambda) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    return CMatrix(2, {c, -std::polar(s, lambda), std::polar(s, phi), std::polar(c, phi + lambda)});
}

PureState haar_random_pure(unsigned n_qubits, Rng& rng) {
    if (n_qubits < 1 || n_qubits > 5) throw std::invalid_argument("haar_random_pure: n_qubits must be in 1..5");
    std::normal_distribution<double> gauss(0.0, 1.0);
    PureState psi{std::vector<cdouble>(std::size_t{1} << n_qubits)};
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (auto& z : psi.amplitudes) {
            z = {gauss(rng), gauss(rng)};
            norm2 += std::norm(z);
        }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& z : psi.amplitudes) z *= inv;
    return psi;
}

PureState random_separable_pure(Rng& rng) {
    const std::array<PureState, 3> qubits{haar_random_pure(1, rng), haar_random_pure(1, rng),
                                          haar_random_pure(1, rng)};
    return product_state(qubits);
}

PureState random_circuit_state(unsigned n_qubits, unsigned depth, bool entangling, Rng& rng) {
    if (depth < 1) throw std::invalid_argument("random_circuit_state: depth must be >= 1");
    if (n_qubits < 1 || n_qubits > 5) throw std::invalid_argument("random_circuit_state: n_qubits must be in 1..5");
    std::vector<cdouble> psi(std::size_t{1} << n_qubits);
    psi[0] = 1.0;
    for (unsigned layer = 0; layer < depth; ++layer) {
        for (unsigned q = 0; q < n_qubits; ++q) apply_1q(psi, random_euler_unitary(rng), q, n_qubits);
        if (entangling && n_qubits > 1) {
            const auto lo = static_cast<unsigned>(uniform_index(rng, 0, n_qubits - 2));
            const bool flip = uniform_index(rng, 0, 1) == 1;
            apply_cnot(psi, flip ? lo + 1 : lo, flip ? lo : lo + 1, n_qubits);
        }
    }
    return PureState{std::move(psi)};
}

ParameterizedGenParams ParameterizedGenParams::sample(Rng& rng) {
    ParameterizedGenParams p;
    for (auto& x : p.a) x = uniform(rng, 0, 1);
    for (auto& x : p.phases) x = uniform(rng, 0, kTwoPi);
    for (auto& x : p.dephasing) x = uniform(rng, 0, 1);
    for (auto& x : p.euler) x = uniform(rng, 0, kTwoPi);
    return p;
}

CMatrix dephase_qubit(const CMatrix& rho, unsigned qubit, double c, unsigned n_qubits) {
    const std::size_t bit = std::size_t{1} << (n_qubits - 1 - qubit);
    CMatrix out = rho;
    for (std::size_t r = 0; r < rho.dim(); ++r)
        for (std::size_t col = 0; col < rho.dim(); ++col)
            if ((r & bit) != (col & bit)) out(r, col) *= c;
    return out;
}

CMatrix conjugate(const CMatrix& rho, const CMatrix& u) { return u * rho * u.adjoint(); }

CMatrix parameterized_mixed(const ParameterizedGenParams& params) {
    for (auto x : params.a) require_range(x, 0, 1, "a_i");
    for (auto x : params.dephasing) require_range(x, 0, 1, "c_i");
    for (auto x : params.phases) require_range(x, 0, kTwoPi, "phi_ij");
    for (auto x : params.euler) require_range(x, 0, kTwoPi, "euler angle");

    std::array<double, 3> b{};
    for (int i = 0; i < 3; ++i) b[i] = std::sqrt(1.0 - params.a[i] * params.a[i]);
    const double phi12 = params.phases[0], phi13 = params.phases[1], phi23 = params.phases[2];

    std::vector<cdouble> psi(kDim);
    for (std::size_t idx = 0; idx < kDim; ++idx) {
        const bool q1 = idx & 4, q2 = idx & 2, q3 = idx & 1;
        const double mag = (q1 ? b[0] : params.a[0]) * (q2 ? b[1] : params.a[1]) * (q3 ? b[2] : params.a[2]);
        const double phase = (q1 && q2 ? phi12 : 0.0) + (q1 && q3 ? phi13 : 0.0) + (q2 && q3 ? phi23 : 0.0);
        psi[idx] = std::polar(mag, phase);
    }

    CMatrix rho = CMatrix::outer(psi);
    for (unsigned q = 0; q < 3; ++q) rho = dephase_qubit(rho, q, params.dephasing[q]);

    const auto& e = params.euler;
    const CMatrix u = kron(euler_unitary(e[0], e[1], e[2]),
                           kron(euler_unitary(e[3], e[4], e[5]), euler_unitary(e[6], e[7], e[8])));
    return conjugate(rho, u);
}

CMatrix mix(std::span<const CMatrix> states, std::span<const double> probs) {
    if (states.empty() || states.size() != probs.size())
        throw std::invalid_argument("mix: states and probabilities must be non-empty lists of equal length");
    double total = 0.0;
    for (auto p : probs) {
        if (!(p >= 0.0)) throw std::invalid_argument("mix: negative probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mix: probabilities do not sum to 1");
    CMatrix out(states.front().dim());
    for (std::size_t i = 0; i < states.size(); ++i) out += states[i] * probs[i];
    return out;
}

CMatrix reduce_from_larger(unsigned n_src, Rng& rng) {
    if (n_src != 4 && n_src != 5) throw std::invalid_argument("reduce_from_larger: n_src must be 4 or 5");
    const auto psi = haar_random_pure(n_src, rng);
    return partial_trace(psi.density(), qubit_mask({0, 1, 2}), n_src);
}

CMatrix boost_largest_eigenvalue(const CMatrix& rho, double c) {
    if (!(c >= 0.0)) throw std::invalid_argument("boost_largest_eigenvalue: c must be non-negative");
    if (c == 0.0) return rho;
    const auto eig = hermitian_eig(rho);
    double total = 0.0;
    for (auto l : eig.eigenvalues) total += l;
    const auto top = eig.vector(eig.eigenvalues.size() - 1);
    CMatrix out = rho + CMatrix::outer(top) * c;
    out *= 1.0 / (total + c);
    return out;
}

std::vector<double> random_simplex(std::size_t n, Rng& rng) {
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> w(n);
    double total = 0.0;
    do {
        total = 0.0;
        for (auto& x : w) total += (x = expo(rng));
    } while (total == 0.0);
    for (auto& x : w) x /= total;
    // absorb rounding so the weights sum to one
    double rest = 1.0;
    for (std::size_t i = 0; i + 1 < n; ++i) rest -= w[i];
    w.back() = std::max(0.0, rest);
    return w;
}

CMatrix random_mixed_qubit(Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    CMatrix g(2);
    for (auto& z : g.data()) z = {gauss(rng), gauss(rng)};
    CMatrix rho = g * g.adjoint();
    rho *= 1.0 / rho.trace().real();
    return rho;
}

CMatrix random_mixed_product(Rng& rng) {
    const CMatrix a = random_mixed_qubit(rng);
    const CMatrix b = random_mixed_qubit(rng);
    return kron(a, kron(b, random_mixed_qubit(rng)));
}

CMatrix random_zero_discord(Rng& rng) {
    while (true) {
        const auto ba = random_qubit_basis(rng), bb = random_qubit_basis(rng), bc = random_qubit_basis(rng);
        std::array<std::size_t, 8> idx{0, 1, 2, 3, 4, 5, 6, 7};
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::size_t support = uniform_index(rng, 2, 8);
        const auto w = random_simplex(support, rng);

        CMatrix rho(kDim);
        for (std::size_t k = 0; k < support; ++k) {
            const std::size_t i = idx[k];
            const std::array<PureState, 3> f{ba[(i >> 2) & 1], bb[(i >> 1) & 1], bc[i & 1]};
            rho += product_state(f).density() * w[k];
        }
        if (!is_product(rho)) return rho;
    }
}

CMatrix random_discordant_separable(Rng& rng) {
    const std::size_t n = uniform_index(rng, 2, 4);
    std::vector<CMatrix> parts;
    for (std::size_t i = 0; i < n; ++i) parts.push_back(random_separable_pure(rng).density());
    const auto w = random_simplex(n, rng);
    return mix(parts, w);
}

CMatrix random_mixed_entangled(Rng& rng, double min_negativity) {
    while (true) {
        CMatrix rho;
        switch (uniform_index(rng, 0, 3)) {
            case 0: {  // Haar mixtures
                const std::size_t n = uniform_index(rng, 2, 3);
                std::vector<CMatrix> parts;
                for (std::size_t i = 0; i < n; ++i) parts.push_back(haar_random_pure(3, rng).density());
                rho = mix(parts, random_simplex(n, rng));
                break;
            }
            case 1: {  // entangled pure state blended with a separable one
                const CMatrix ent = uniform_index(rng, 0, 1) == 0
                                        ? haar_random_pure(3, rng).density()
                                        : random_circuit_state(3, kDefaultCircuitDepth, true, rng).density();
                const CMatrix sep = uniform_index(rng, 0, 1) == 0 ? random_separable_pure(rng).density()
                                                                  : random_mixed_product(rng);
                const double p = uniform(rng, 0.3, 1.0);
                const std::array<CMatrix, 2> parts{ent, sep};
                const std::array<double, 2> probs{p, 1.0 - p};
                rho = mix(parts, probs);
                break;
            }
            case 2:
                rho = reduce_from_larger(static_cast<unsigned>(uniform_index(rng, 4, 5)), rng);
                break;
            default:
                rho = parameterized_mixed(ParameterizedGenParams::sample(rng));
                break;
        }
        if (max_negativity(rho) > min_negativity) return rho;
    }
}

MapPoint map_point(double u, double v) {
    require_range(u, 0, 2, "map u");
    require_range(v, 0, 2, "map v");
    MapPoint pt{.u = u, .v = v};
    // upper triangle (v >= u) uses (u, v); the lower one is its mirror image
    const double s = v >= u ? u : v;
    const double t = v >= u ? v : u;
    pt.p = 0.5 * clamp01(t - 0.5);
    pt.a_param = std::numbers::sqrt2 / 2.0 * (1.0 - clamp01(s - 0.5));
    pt.phi = std::numbers::pi / 2.0 * clamp01((std::max(std::abs(u - 1.0), std::abs(v - 1.0)) - 0.5) / 0.5);
    pt.c_boost = clamp01(u + v - 3.0);
    if (v < u) pt.c_boost += clamp01(1.0 - (u + v) / 2.0);
    return pt;
}

CMatrix map_state(const MapPoint& pt) {
    const double a = pt.a_param;
    const double b = std::sqrt(std::max(0.0, 1.0 - a * a));
    const PureState psi1{{a, b}};
    const PureState psi2{{std::polar(b, -pt.phi / 2.0), -std::polar(a, pt.phi / 2.0)}};
    const std::array<PureState, 3> f1{psi1, psi1, psi1}, f2{psi2, psi2, psi2};
    const std::array<CMatrix, 2> parts{product_state(f1).density(), product_state(f2).density()};
    const std::array<double, 2> probs{pt.p, 1.0 - pt.p};
    return boost_largest_eigenvalue(mix(parts, probs), pt.c_boost);
}

}  // namespace qsep
