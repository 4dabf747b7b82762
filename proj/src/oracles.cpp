#include "qsep/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace qsep {

namespace {

constexpr unsigned kN = 3;

void require_three_qubits(const CMatrix& rho, const char* what) {
    if (rho.dim() != 8) throw std::invalid_argument(std::string(what) + ": expected an 8x8 density matrix");
}

// Qubit order placing the block-indexing subsystem first and the measured
// (block-forming) subsystem last.
std::array<unsigned, 3> block_order(Cut cut, MeasuredSide side) {
    const unsigned x = static_cast<unsigned>(cut);
    std::array<unsigned, 2> rest{};
    for (unsigned q = 0, j = 0; q < kN; ++q)
        if (q != x) rest[j++] = q;
    if (side == MeasuredSide::Small) return {rest[0], rest[1], x};
    return {x, rest[0], rest[1]};
}

using Block = std::vector<cdouble>;  // M x M row-major

double commutator_max(const Block& a, const Block& b, std::size_t m) {
    double worst = 0.0;
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < m; ++c) {
            cdouble s{};
            for (std::size_t k = 0; k < m; ++k) s += a[r * m + k] * b[k * m + c] - b[r * m + k] * a[k * m + c];
            worst = std::max(worst, std::abs(s));
        }
    return worst;
}

Block adjoint_block(const Block& a, std::size_t m) {
    Block out(m * m);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < m; ++c) out[c * m + r] = std::conj(a[r * m + c]);
    return out;
}

}  // namespace

std::string_view to_string(StateClass k) {
    switch (k) {
        case StateClass::Product: return "product";
        case StateClass::NonDiscordant: return "non-discordant";
        case StateClass::DiscordantSeparable: return "discordant-separable";
        case StateClass::Entangled: return "entangled";
    }
    return "unknown";
}

std::optional<StateClass> state_class_from_string(std::string_view s) {
    for (auto k : {StateClass::Product, StateClass::NonDiscordant, StateClass::DiscordantSeparable,
                   StateClass::Entangled})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

double negativity(const CMatrix& rho, Cut cut) {
    require_three_qubits(rho, "negativity");
    const auto pt = partial_transpose(rho, qubit_bit(static_cast<unsigned>(cut)), kN);
    double neg = 0.0;
    for (double l : hermitian_eigenvalues(pt))
        if (l < 0.0) neg -= l;
    return neg;
}

double max_negativity(const CMatrix& rho) {
    double m = 0.0;
    for (auto cut : kAllCuts) m = std::max(m, negativity(rho, cut));
    return m;
}

double discord_commutator_norm(const CMatrix& rho, Cut cut, MeasuredSide side) {
    require_three_qubits(rho, "zero_discord_check");
    const auto order = block_order(cut, side);
    const CMatrix sigma = permute_qubits(rho, order, kN);
    const std::size_t m = side == MeasuredSide::Small ? 2 : 4;
    const std::size_t n = 8 / m;

    std::vector<Block> blocks;
    blocks.reserve(n * n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t q = 0; q < n; ++q) {
            Block b(m * m);
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < m; ++c) b[r * m + c] = sigma(k * m + r, q * m + c);
            blocks.push_back(std::move(b));
        }

    double worst = 0.0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        worst = std::max(worst, commutator_max(blocks[i], adjoint_block(blocks[i], m), m));
        for (std::size_t j = i + 1; j < blocks.size(); ++j)
            worst = std::max(worst, commutator_max(blocks[i], blocks[j], m));
    }
    return worst;
}

bool zero_discord_check(const CMatrix& rho, Cut cut, MeasuredSide side) {
    const double eps = std::max(1e-10, 1e-8 * (1.0 + rho.max_abs()));
    return discord_commutator_norm(rho, cut, side) <= eps;
}

bool is_product(const CMatrix& rho) {
    require_three_qubits(rho, "is_product");
    const CMatrix ra = partial_trace(rho, qubit_mask({0}), kN);
    const CMatrix rb = partial_trace(rho, qubit_mask({1}), kN);
    const CMatrix rc = partial_trace(rho, qubit_mask({2}), kN);
    return max_abs_diff(rho, kron(ra, kron(rb, rc))) <= kProductTolerance;
}

std::uint16_t StateLabel::bits() const {
    std::uint16_t b = 0;
    if (is_product) b |= 1u << 0;
    if (separable()) b |= 1u << 1;
    if (zero_discord()) b |= 1u << 2;
    for (std::size_t i = 0; i < 3; ++i)
        if (entangled_cut[i]) b |= static_cast<std::uint16_t>(1u << (3 + i));
    for (std::size_t i = 0; i < 6; ++i)
        if (discordant_check[i]) b |= static_cast<std::uint16_t>(1u << (6 + i));
    return b;
}

StateLabel StateLabel::from_bits(std::uint16_t bits) {
    if (bits >> 12) throw std::invalid_argument("label bitfield uses reserved bits");
    StateLabel l;
    l.is_product = bits & 1u;
    const bool sep = bits & 2u;
    const bool zd = bits & 4u;
    bool any_ent = false, any_disc = false;
    for (std::size_t i = 0; i < 3; ++i) any_ent |= (l.entangled_cut[i] = (bits >> (3 + i)) & 1u);
    for (std::size_t i = 0; i < 6; ++i) any_disc |= (l.discordant_check[i] = (bits >> (6 + i)) & 1u);

    if (any_ent) {
        l.klass = StateClass::Entangled;
    } else if (l.is_product) {
        l.klass = StateClass::Product;
    } else if (!any_disc) {
        l.klass = StateClass::NonDiscordant;
    } else {
        l.klass = StateClass::DiscordantSeparable;
    }
    if (sep == any_ent || zd == any_disc || (l.is_product && (any_ent || any_disc)))
        throw std::invalid_argument("label bitfield is internally inconsistent");
    return l;
}

StateLabel classify(const CMatrix& rho, std::optional<bool> known_separable) {
    require_three_qubits(rho, "classify");
    StateLabel l;
    const bool forced_sep = known_separable.value_or(false);
    for (auto cut : kAllCuts) {
        const auto c = static_cast<std::size_t>(cut);
        l.entangled_cut[c] = !forced_sep && negativity(rho, cut) > kEntanglementTolerance;
        for (auto side : {MeasuredSide::Small, MeasuredSide::Large})
            l.discordant_check[discord_check_index(cut, side)] = !zero_discord_check(rho, cut, side);
    }
    const bool any_ent = std::ranges::any_of(l.entangled_cut, [](bool b) { return b; });
    const bool any_disc = std::ranges::any_of(l.discordant_check, [](bool b) { return b; });
    l.is_product = !any_ent && !any_disc && is_product(rho);

    if (any_ent) {
        l.klass = StateClass::Entangled;
    } else if (l.is_product) {
        l.klass = StateClass::Product;
    } else if (!any_disc) {
        l.klass = StateClass::NonDiscordant;
    } else {
        l.klass = StateClass::DiscordantSeparable;
    }
    return l;
}

}  // namespace qsep
