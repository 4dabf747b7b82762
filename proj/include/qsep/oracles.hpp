#pragma once

// Ground-truth labels for three-qubit states: PPT negativity per cut, the
// block-commutation zero-discord criterion, and the four-class taxonomy.

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "qsep/linalg.hpp"

namespace qsep {

/// One qubit against the other two: A|BC, B|AC, C|AB.
enum class Cut : unsigned { A = 0, B = 1, C = 2 };
inline constexpr std::array<Cut, 3> kAllCuts{Cut::A, Cut::B, Cut::C};

/// Which side of a cut forms the M x M blocks of the discord test.
/// `Small` blocks over the single qubit, `Large` over the qubit pair.
enum class MeasuredSide : unsigned { Small = 0, Large = 1 };

enum class StateClass : std::uint8_t { Product = 0, NonDiscordant = 1, DiscordantSeparable = 2, Entangled = 3 };

std::string_view to_string(StateClass k);
std::optional<StateClass> state_class_from_string(std::string_view s);

inline constexpr double kEntanglementTolerance = 1e-9;
inline constexpr double kProductTolerance = 1e-8;

/// Sum of |negative eigenvalues| of the partial transpose on the cut's qubit.
double negativity(const CMatrix& rho, Cut cut);
double max_negativity(const CMatrix& rho);

/// Block-commutation criterion: partition into blocks over `side`, each block
/// must be normal and all blocks must commute pairwise, with tolerance
/// 1e-8 * (1 + max|rho_ij|).
bool zero_discord_check(const CMatrix& rho, Cut cut, MeasuredSide side);

/// Largest commutator entry found by the criterion (diagnostics and tests).
double discord_commutator_norm(const CMatrix& rho, Cut cut, MeasuredSide side);

/// max|rho - rho_A (x) rho_B (x) rho_C| <= kProductTolerance.
bool is_product(const CMatrix& rho);

struct StateLabel {
    std::array<bool, 3> entangled_cut{};
    /// Index 2 * cut + side; true means discord was detected by that check.
    std::array<bool, 6> discordant_check{};
    bool is_product = false;
    StateClass klass = StateClass::Product;

    bool separable() const { return klass != StateClass::Entangled; }
    bool zero_discord() const { return klass == StateClass::Product || klass == StateClass::NonDiscordant; }

    /// bit0 product, bit1 separable, bit2 all six zero-discord checks pass,
    /// bits 3-5 entanglement per cut, bits 6-11 discord per check.
    std::uint16_t bits() const;
    /// Inverse of bits(); throws std::invalid_argument on inconsistent flags.
    static StateLabel from_bits(std::uint16_t bits);

    bool operator==(const StateLabel&) const = default;
};

constexpr std::size_t discord_check_index(Cut cut, MeasuredSide side) {
    return 2 * static_cast<std::size_t>(cut) + static_cast<std::size_t>(side);
}

/// Runs all nine checks plus the product test. With known_separable = true the
/// entanglement flags are forced false (construction beats the PPT test,
/// which is only necessary for 2x4 cuts).
StateLabel classify(const CMatrix& rho, std::optional<bool> known_separable = std::nullopt);

}  // namespace qsep
