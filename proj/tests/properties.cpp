#include "properties.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "qsep/dataset.hpp"
#include "qsep/oracles.hpp"
#include "qsep/separator.hpp"
#include "support.hpp"

namespace qsep::test {

namespace {

constexpr std::array<std::array<unsigned, 3>, 6> kPermutations{
    {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

SeparatorParams perturbed_model(SeparatorConfig cfg, Rng& rng, double spread) {
    auto p = SeparatorParams::initialized(cfg, rng, 0.3);
    std::uniform_real_distribution<double> u(-spread, spread);
    for (auto& v : p.values()) v += u(rng);
    return p;
}

std::vector<CMatrix> mixed_batch(std::size_t n, Rng& rng) {
    std::vector<CMatrix> out;
    for (std::size_t i = 0; i < n; ++i) {
        switch (i % 4) {
            case 0: out.push_back(random_density(8, rng)); break;
            case 1: out.push_back(random_zero_discord(rng)); break;
            case 2: out.push_back(random_discordant_separable(rng)); break;
            default: out.push_back(haar_random_pure(3, rng).density()); break;
        }
    }
    return out;
}

Factor2 to_factor(const CMatrix& m) { return {{m(0, 0), m(0, 1), m(1, 0), m(1, 1)}}; }

}  // namespace

FdReport gradient_fd_check(std::size_t coordinates, std::uint64_t seed) {
    Rng rng(seed);
    FdReport report;
    for (bool tied : {true, false}) {
        SeparatorConfig cfg;
        cfg.n_k = 3;
        cfg.fc_depth = 2;
        cfg.tie_weights = tied;
        const auto params = perturbed_model(cfg, rng, 0.1);
        const auto batch = mixed_batch(6, rng);
        const auto grad = gradient(params, batch);
        std::uniform_int_distribution<std::size_t> pick(0, params.size() - 1);
        const std::size_t n = tied ? coordinates / 2 : coordinates - coordinates / 2;
        for (std::size_t t = 0; t < n; ++t) {
            const std::size_t i = pick(rng);
            const double h = 1e-6;
            auto plus = params, minus = params;
            plus.values()[i] += h;
            minus.values()[i] -= h;
            const auto lp = batch_losses(plus, batch), lm = batch_losses(minus, batch);
            double fd = 0.0;
            for (std::size_t k = 0; k < batch.size(); ++k) fd += (lp[k] - lm[k]) / (2.0 * h);
            fd /= static_cast<double>(batch.size());
            const double an = grad.values()[i];
            const double err = std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), 1e-6);
            report.worst_relative_error = std::max(report.worst_relative_error, err);
            ++report.coordinates;
        }
    }
    return report;
}

double identity_partial_trace_error(std::size_t n_states, std::uint64_t seed) {
    Rng rng(seed);
    SeparatorConfig cfg;
    cfg.n_k = 4;
    cfg.use_fc = false;
    const auto id = SeparatorParams::identity(cfg);
    const Kernel eye{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    double worst = 0.0;
    for (std::size_t s = 0; s < n_states; ++s) {
        const CMatrix rho = s % 2 ? random_density(8, rng) : haar_random_pure(3, rng).density();
        const CMatrix ref = kron(brute_partial_trace(rho, 1, 3), kron(brute_partial_trace(rho, 2, 3), brute_partial_trace(rho, 4, 3)));
        worst = std::max(worst, max_abs_diff(forward(rho, id).rho_hat, ref));
        for (unsigned q = 0; q < 3; ++q) {
            const CMatrix marginal = brute_partial_trace(rho, 1u << q, 3);
            const auto re = extract_qubit(rho, static_cast<Qubit>(q), eye, Part::Re);
            const auto im = extract_qubit(rho, static_cast<Qubit>(q), eye, Part::Im);
            for (std::size_t t = 0; t < 4; ++t) {
                worst = std::max(worst, std::abs(re[t] - marginal.data()[t].real()));
                worst = std::max(worst, std::abs(im[t] - marginal.data()[t].imag()));
            }
        }
    }
    return worst;
}

double permutation_equivariance_error(std::size_t n_states, std::uint64_t seed) {
    Rng rng(seed);
    SeparatorConfig cfg;
    cfg.n_k = 5;
    cfg.fc_depth = 3;
    const auto params = perturbed_model(cfg, rng, 0.2);
    double worst = 0.0;
    for (const auto& rho : mixed_batch(n_states, rng)) {
        const auto base = forward(rho, params);
        for (const auto& perm : kPermutations) {
            const auto moved = forward(permute_qubits(rho, perm, 3), params);
            worst = std::max(worst, std::abs(moved.loss - base.loss));
            worst = std::max(worst, max_abs_diff(moved.rho_hat, permute_qubits(base.rho_hat, perm, 3)));
        }
    }
    return worst;
}

DecoderReport decoder_separability(std::size_t n_trials, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> n;
    DecoderReport report;
    for (std::size_t t = 0; t < n_trials; ++t) {
        const std::size_t channels = 1 + t % 6;
        // arbitrary complex factors: the output must be the normalized Kronecker sum
        std::vector<std::array<Factor2, 3>> any(channels), psd(channels);
        CMatrix sum(8);
        for (std::size_t c = 0; c < channels; ++c) {
            std::array<CMatrix, 3> m;
            for (unsigned q = 0; q < 3; ++q) {
                m[q] = CMatrix(2, {cdouble(n(rng), n(rng)), cdouble(n(rng), n(rng)), cdouble(n(rng), n(rng)),
                                   cdouble(n(rng), n(rng))});
                any[c][q] = to_factor(m[q]);
                psd[c][q] = to_factor(random_density(2, rng));
            }
            sum += kron(m[0], kron(m[1], m[2]));
        }
        const CMatrix explicit_sum = sum * (1.0 / sum.trace().real());
        report.form_error = std::max(report.form_error, max_abs_diff(decode(any), explicit_sum) / std::max(1.0, explicit_sum.max_abs()));
        const CMatrix out = decode(psd);
        report.all_density = report.all_density && is_density_matrix(out);
        report.max_negativity = std::max(report.max_negativity, max_negativity(out));
    }
    return report;
}

}  // namespace qsep::test
