#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "properties.hpp"
#include "qsep/errors.hpp"
#include "qsep/oracles.hpp"
#include "qsep/separator.hpp"
#include "support.hpp"

using namespace qsep;
using namespace qsep::test;

namespace {

SeparatorConfig small_config(bool use_fc = true, bool tied = true) {
    SeparatorConfig cfg;
    cfg.n_k = 3;
    cfg.fc_depth = 2;
    cfg.use_fc = use_fc;
    cfg.tie_weights = tied;
    return cfg;
}

std::vector<CMatrix> some_states(std::size_t n, Rng& rng) {
    std::vector<CMatrix> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(random_density(8, rng));
    return out;
}

}  // namespace

TEST_CASE("loss is the mean absolute entry difference") {
    // |000> against I/8: (7/8 + 7 * 1/8) / 64
    CHECK(reconstruction_loss(ket_density({{0, 1.0}}), CMatrix::identity(8) * 0.125) == doctest::Approx(0.02734375).epsilon(1e-15));
    CHECK(reconstruction_loss(ghz(), ghz()) == 0.0);
    CHECK_THROWS_AS(reconstruction_loss(CMatrix(4), CMatrix(4)), std::invalid_argument);
}

TEST_CASE("baseline reconstructs products exactly and the GHZ mixture as I/8") {
    Rng rng(1);
    const CMatrix p = random_mixed_product(rng);
    CHECK(baseline_forward(p).loss < 1e-15);
    const auto r = baseline_forward(ghz_mixture());
    CHECK(max_abs_diff(r.rho_hat, CMatrix::identity(8) * 0.125) < 1e-15);
    // diagonal: 2 * 3/8 + 6 * 1/8, over 64
    CHECK(r.loss == doctest::Approx(0.0234375).epsilon(1e-15));
}

TEST_CASE("identity kernels without FC layers are the partial-trace model") {
    CHECK(identity_partial_trace_error(50, 2) <= 1e-12);
}

TEST_CASE("tied weights make the model equivariant under qubit permutations") {
    CHECK(permutation_equivariance_error(8, 3) <= 1e-10);
}

TEST_CASE("untied weights are not equivariant in general") {
    Rng rng(4);
    auto p = SeparatorParams::initialized(small_config(true, false), rng, 0.3);
    const CMatrix rho = random_density(8, rng);
    const std::array<unsigned, 3> swap{1, 0, 2};
    CHECK(std::abs(forward(permute_qubits(rho, swap, 3), p).loss - forward(rho, p).loss) > 1e-8);
}

TEST_CASE("effective kernels are symmetric under exchange of the traced qubits") {
    Rng rng(5);
    Kernel k;
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& x : k) x = u(rng);
    const auto e = effective_kernel(small_config(), k);
    const std::array<std::size_t, 4> s{0, 2, 1, 3};
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b) CHECK(e[a * 4 + b] == doctest::Approx(e[s[a] * 4 + s[b]]).epsilon(1e-15));
    // untied kernels pass through unchanged
    CHECK(effective_kernel(small_config(true, false), k) == k);
}

TEST_CASE("decoder output is a sum of products by construction") {
    const auto r = decoder_separability(200, 6);
    CHECK(r.form_error <= 1e-12);
    CHECK(r.all_density);
    CHECK(r.max_negativity <= 1e-12);
}

TEST_CASE("analytic gradient matches central differences") {
    const auto r = gradient_fd_check(200, 7);
    CHECK(r.coordinates == 200);
    CHECK(r.worst_relative_error <= 1e-4);
}

TEST_CASE("gradient and losses do not depend on the thread count") {
    Rng rng(8);
    const auto p = SeparatorParams::initialized(small_config(), rng);
    const auto batch = some_states(150, rng);
    const auto one = loss_and_gradient(p, batch, 1);
    const auto three = loss_and_gradient(p, batch, 3);
    CHECK(one.mean_loss == three.mean_loss);
    CHECK(std::equal(one.gradient.values().begin(), one.gradient.values().end(), three.gradient.values().begin()));
    CHECK(batch_losses(p, batch, 1) == batch_losses(p, batch, 4));
}

TEST_CASE("forward and batch losses agree") {
    Rng rng(9);
    const auto p = SeparatorParams::initialized(small_config(), rng);
    const auto batch = some_states(5, rng);
    const auto losses = batch_losses(p, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto r = forward(batch[i], p);
        CHECK(r.loss == doctest::Approx(losses[i]).epsilon(1e-14));
        CHECK(r.loss == doctest::Approx(reconstruction_loss(batch[i], r.rho_hat)).epsilon(1e-12));
        CHECK(r.rho_hat.trace().real() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("initialization is seeded and near identity") {
    Rng a(10), b(10);
    const auto pa = SeparatorParams::initialized(SeparatorConfig{}, a);
    const auto pb = SeparatorParams::initialized(SeparatorConfig{}, b);
    CHECK(std::equal(pa.values().begin(), pa.values().end(), pb.values().begin()));
    CHECK(kernel_identity_deviation(pa) < 0.05);
    CHECK(kernel_identity_deviation(SeparatorParams::identity(SeparatorConfig{})) == 0.0);
    for (int c = 0; c < pa.config().n_k; ++c) {
        const auto k = pa.kernel(0, c, Part::Re);
        for (int i = 0; i < 16; ++i) CHECK(std::abs(k[i] - (i % 5 == 0 ? 1.0 : 0.0)) <= 0.05);
    }
}

TEST_CASE("kernel deviation is scale invariant") {
    auto p = SeparatorParams::identity(small_config(false));
    for (int c = 0; c < 3; ++c)
        for (auto part : {Part::Re, Part::Im})
            for (auto& x : p.kernel(0, c, part)) x *= 2.5;
    CHECK(kernel_identity_deviation(p) < 1e-15);
    p.kernel(0, 0, Part::Re)[1] = 1.6;
    CHECK(kernel_identity_deviation(p) > 0.0);
}

TEST_CASE("config validation") {
    SeparatorConfig cfg;
    cfg.n_k = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.n_k = 2;
    cfg.fc_depth = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK(activation_from_string(to_string(Activation::Tanh)) == Activation::Tanh);
    CHECK_THROWS_AS(activation_from_string("gelu"), std::invalid_argument);
}

TEST_CASE("checkpoints round-trip exactly") {
    Rng rng(11);
    auto cfg = small_config(true, false);
    cfg.activation = Activation::Tanh;
    const auto p = SeparatorParams::initialized(cfg, rng);
    const TrainingMeta meta{7, 0.0123, 99};
    const auto back = checkpoint_from_json(checkpoint_json(p, meta));
    CHECK(back.params.config() == cfg);
    CHECK(std::equal(p.values().begin(), p.values().end(), back.params.values().begin()));
    CHECK(back.meta.epoch == 7);
    CHECK(back.meta.seed == 99);

    const auto path = std::filesystem::temp_directory_path() / "qsep_ckpt_test.json";
    save_checkpoint(path, p, meta);
    CHECK(std::equal(p.values().begin(), p.values().end(), load_checkpoint(path).params.values().begin()));
    std::filesystem::remove(path);
}

TEST_CASE("malformed checkpoints are format errors") {
    CHECK_THROWS_AS(checkpoint_from_json("not json"), FormatError);
    CHECK_THROWS_AS(checkpoint_from_json("{}"), FormatError);
    Rng rng(12);
    auto j = nlohmann::json::parse(checkpoint_json(SeparatorParams::initialized(small_config(), rng), {}));
    j["kernels"][0][1][0].push_back(1.0);  // 17 weights in one kernel
    CHECK_THROWS_AS(checkpoint_from_json(j.dump()), FormatError);
    j = nlohmann::json::parse(checkpoint_json(SeparatorParams::initialized(small_config(), rng), {}));
    j["format_version"] = 2;
    CHECK_THROWS_AS(checkpoint_from_json(j.dump()), FormatError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/qsep.json"), std::exception);
}

TEST_CASE("kernel export writes one block per kernel") {
    const auto p = SeparatorParams::identity(small_config());
    const auto path = std::filesystem::temp_directory_path() / "qsep_kernels_test.csv";
    export_kernels_csv(path, p);
    std::ifstream in(path);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') ++rows;
    CHECK(rows == 1 + 3 * 2 * 4);  // header, then 4 rows per (channel, part)
    std::filesystem::remove(path);
}
