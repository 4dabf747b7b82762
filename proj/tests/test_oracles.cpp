#include <doctest.h>

#include <numbers>

#include "qsep/oracles.hpp"
#include "qsep/states.hpp"
#include "support.hpp"

using namespace qsep;
using namespace qsep::test;

namespace {

constexpr std::array<MeasuredSide, 2> kSides{MeasuredSide::Small, MeasuredSide::Large};

CMatrix random_local_unitary(Rng& rng) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    auto u = [&] { return euler_unitary(angle(rng), angle(rng), angle(rng)); };
    return kron(u(), kron(u(), u()));
}

// p GHZ + (1 - p) I/8
CMatrix noisy_ghz(double p) { return ghz() * p + CMatrix::identity(8) * ((1.0 - p) / 8.0); }

}  // namespace

TEST_CASE("negativity of GHZ is one half on every cut") {
    for (Cut cut : kAllCuts) CHECK(negativity(ghz(), cut) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(max_negativity(ghz()) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("negativity of noisy GHZ follows (5p - 1) / 8") {
    for (double p : {0.0, 0.1, 0.2, 0.3, 0.5, 0.8, 1.0}) {
        const double expected = std::max(0.0, (5.0 * p - 1.0) / 8.0);
        for (Cut cut : kAllCuts) CHECK(negativity(noisy_ghz(p), cut) == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("negativity of a Bell pair times a qubit separates the cuts") {
    // (|00> + |11>)/sqrt2 on A,B with C in |0>
    const CMatrix rho = ket_density({{0, 1.0}, {6, 1.0}});
    CHECK(negativity(rho, Cut::A) == doctest::Approx(0.5));
    CHECK(negativity(rho, Cut::B) == doctest::Approx(0.5));
    CHECK(negativity(rho, Cut::C) == doctest::Approx(0.0));
}

TEST_CASE("negativity is invariant under local unitaries") {
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const CMatrix rho = random_density(8, rng);
        const CMatrix moved = conjugate(rho, random_local_unitary(rng));
        for (Cut cut : kAllCuts) CHECK(negativity(moved, cut) == doctest::Approx(negativity(rho, cut)).epsilon(1e-9));
    }
}

TEST_CASE("all six zero-discord checks pass on the GHZ mixture") {
    const CMatrix rho = ghz_mixture();
    for (Cut cut : kAllCuts)
        for (MeasuredSide side : kSides) {
            CHECK(zero_discord_check(rho, cut, side));
            CHECK(discord_commutator_norm(rho, cut, side) == 0.0);
        }
    const auto label = classify(rho);
    CHECK(label.klass == StateClass::NonDiscordant);
    CHECK_FALSE(label.is_product);
}

TEST_CASE("GHZ is discordant on every check") {
    for (Cut cut : kAllCuts)
        for (MeasuredSide side : kSides) CHECK_FALSE(zero_discord_check(ghz(), cut, side));
    CHECK(classify(ghz()).klass == StateClass::Entangled);
}

TEST_CASE("mixture of non-orthogonal products is discordant but separable") {
    // (|000><000| + |+10><+10|) / 2: B flags which non-orthogonal state A is in
    const CMatrix a = ket_density({{0, 1.0}});
    const CMatrix b = ket_density({{2, 1.0}, {6, 1.0}});
    const CMatrix rho = (a + b) * 0.5;
    const auto label = classify(rho, true);
    CHECK(label.klass == StateClass::DiscordantSeparable);
    CHECK(label.separable());
    CHECK_FALSE(label.zero_discord());
    CHECK(max_negativity(rho) < kEntanglementTolerance);
}

TEST_CASE("zero discord survives local unitaries") {
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const CMatrix rho = conjugate(ghz_mixture(), random_local_unitary(rng));
        for (Cut cut : kAllCuts)
            for (MeasuredSide side : kSides) CHECK(zero_discord_check(rho, cut, side));
    }
}

TEST_CASE("product test") {
    Rng rng(3);
    CHECK(is_product(ket_density({{0, 1.0}})));
    CHECK(is_product(CMatrix::identity(8) * 0.125));
    CHECK(is_product(random_mixed_product(rng)));
    CHECK_FALSE(is_product(ghz_mixture()));
    CHECK(classify(CMatrix::identity(8) * 0.125).klass == StateClass::Product);
}

TEST_CASE("oracle hierarchy: product implies zero discord implies zero negativity") {
    Rng rng(4);
    const std::array<CMatrix (*)(Rng&), 4> generators{random_mixed_product, random_zero_discord,
                                                      random_discordant_separable,
                                                      [](Rng& r) { return random_mixed_entangled(r); }};
    for (auto gen : generators)
        for (int i = 0; i < 1000; ++i) {
            const CMatrix rho = gen(rng);
            const auto l = classify(rho);
            const bool zd = std::none_of(l.discordant_check.begin(), l.discordant_check.end(), [](bool b) { return b; });
            if (l.is_product) REQUIRE(zd);
            if (zd) REQUIRE(max_negativity(rho) <= kEntanglementTolerance);
        }
}

TEST_CASE("label bits round-trip and reject inconsistent flags") {
    Rng rng(5);
    const std::array<CMatrix, 4> states{random_mixed_product(rng), ghz_mixture(), random_discordant_separable(rng), ghz()};
    for (const auto& rho : states) {
        const auto l = classify(rho);
        CHECK(StateLabel::from_bits(l.bits()) == l);
    }
    // product flag together with an entangled cut
    CHECK_THROWS_AS(StateLabel::from_bits(0b1001), std::invalid_argument);
}

TEST_CASE("class names round-trip") {
    for (auto k : {StateClass::Product, StateClass::NonDiscordant, StateClass::DiscordantSeparable, StateClass::Entangled})
        CHECK(state_class_from_string(to_string(k)) == k);
    CHECK_FALSE(state_class_from_string("bogus").has_value());
}
