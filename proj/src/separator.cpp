#include "qsep/separator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "qsep/errors.hpp"
#include "qsep/parallel.hpp"

namespace qsep {

namespace {

constexpr std::size_t kChunk = 64;
constexpr double kTraceGuard = 1e-9;

// Exchange of the two traced qubits inside a 4-dim kernel index.
constexpr std::array<std::size_t, 4> kSwap{0, 2, 1, 3};

double activate(Activation a, double z) { return a == Activation::Relu ? (z > 0.0 ? z : 0.0) : std::tanh(z); }

// Derivative expressed through the pre-activation z.
double activate_grad(Activation a, double z) {
    if (a == Activation::Relu) return z > 0.0 ? 1.0 : 0.0;
    const double t = std::tanh(z);
    return 1.0 - t * t;
}

struct EffectiveKernels {
    std::vector<Kernel> k;  // index (path * n_k + channel) * 2 + part
    int n_k = 0;
    const Kernel& at(int path, int channel, Part part) const {
        return k[(static_cast<std::size_t>(path) * n_k + channel) * 2 + static_cast<std::size_t>(part)];
    }
};

EffectiveKernels effective_kernels(const SeparatorParams& params) {
    const auto& cfg = params.config();
    EffectiveKernels e;
    e.n_k = cfg.n_k;
    e.k.reserve(static_cast<std::size_t>(cfg.paths()) * cfg.n_k * 2);
    for (int p = 0; p < cfg.paths(); ++p)
        for (int c = 0; c < cfg.n_k; ++c)
            for (auto part : {Part::Re, Part::Im}) e.k.push_back(effective_kernel(cfg, params.kernel(p, c, part)));
    return e;
}

// Precomputed extraction row indices: idx[qubit][i][k].
struct IndexTable {
    std::array<std::array<std::array<std::size_t, 4>, 2>, 3> idx{};
    IndexTable() {
        for (unsigned x = 0; x < 3; ++x)
            for (std::size_t i = 0; i < 2; ++i)
                for (std::size_t k = 0; k < 4; ++k) idx[x][i][k] = extraction_index(static_cast<Qubit>(x), i, k);
    }
};
const IndexTable& index_table() {
    static const IndexTable t;
    return t;
}

std::array<double, 4> extract_with(const CMatrix& rho, unsigned qubit, const Kernel& kern, Part part) {
    const auto& r = index_table().idx[qubit];
    std::array<double, 4> out{};
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < 4; ++k)
                for (std::size_t q = 0; q < 4; ++q) {
                    const cdouble z = rho(r[i][k], r[j][q]);
                    s += kern[k * 4 + q] * (part == Part::Re ? z.real() : z.imag());
                }
            out[i * 2 + j] = s;
        }
    return out;
}

using Mat8 = std::array<cdouble, 64>;
using Mat4 = std::array<cdouble, 16>;

Mat4 kron2(const Factor2& a, const Factor2& b) {
    Mat4 m{};
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t k = 0; k < 2; ++k)
                for (std::size_t l = 0; l < 2; ++l) m[(2 * i + k) * 4 + 2 * j + l] = a.m[i * 2 + j] * b.m[k * 2 + l];
    return m;
}

struct DecodeResult {
    CMatrix rho_hat;
    Mat8 s{};
    double norm = 1.0;
    bool guarded = false;
};

DecodeResult decode_impl(std::span<const std::array<Factor2, 3>> factors) {
    DecodeResult d;
    for (const auto& f : factors) {
        const Mat4 bc = kron2(f[1], f[2]);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) {
                const cdouble a = f[0].m[i * 2 + j];
                for (std::size_t r = 0; r < 4; ++r)
                    for (std::size_t c = 0; c < 4; ++c) d.s[(4 * i + r) * 8 + 4 * j + c] += a * bc[r * 4 + c];
            }
    }
    double tr = 0.0;
    for (std::size_t i = 0; i < 8; ++i) tr += d.s[i * 9].real();
    d.guarded = !(std::abs(tr) > kTraceGuard);
    d.norm = d.guarded ? static_cast<double>(std::max<std::size_t>(factors.size(), 1)) : tr;
    d.rho_hat = CMatrix(8);
    for (std::size_t i = 0; i < 64; ++i) d.rho_hat.data()[i] = d.s[i] / d.norm;
    return d;
}

// Gradient of the loss with respect to each factor, given dL/d rho_hat.
void decode_backward(std::span<const std::array<Factor2, 3>> factors, const DecodeResult& d, const Mat8& g_hat,
                     std::span<std::array<Factor2, 3>> g_factors) {
    Mat8 gs{};
    double gdot = 0.0;
    for (std::size_t i = 0; i < 64; ++i) gdot += g_hat[i].real() * d.s[i].real() + g_hat[i].imag() * d.s[i].imag();
    for (std::size_t i = 0; i < 64; ++i) gs[i] = g_hat[i] / d.norm;
    if (!d.guarded)
        for (std::size_t i = 0; i < 8; ++i) gs[i * 9] -= gdot / (d.norm * d.norm);

    for (std::size_t ch = 0; ch < factors.size(); ++ch) {
        const auto& f = factors[ch];
        auto& g = g_factors[ch];
        const Mat4 bc = kron2(f[1], f[2]);
        const Mat4 ab = kron2(f[0], f[1]);
        g = {};
        // qubit A: sum over the trailing 4x4 index
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) {
                cdouble s{};
                for (std::size_t r = 0; r < 4; ++r)
                    for (std::size_t c = 0; c < 4; ++c) s += gs[(4 * i + r) * 8 + 4 * j + c] * std::conj(bc[r * 4 + c]);
                g[0].m[i * 2 + j] = s;
            }
        // qubit C: sum over the leading 4x4 index
        for (std::size_t m = 0; m < 2; ++m)
            for (std::size_t n = 0; n < 2; ++n) {
                cdouble s{};
                for (std::size_t r = 0; r < 4; ++r)
                    for (std::size_t c = 0; c < 4; ++c) s += gs[(2 * r + m) * 8 + 2 * c + n] * std::conj(ab[r * 4 + c]);
                g[2].m[m * 2 + n] = s;
            }
        // qubit B: sum over A and C indices
        for (std::size_t k = 0; k < 2; ++k)
            for (std::size_t l = 0; l < 2; ++l) {
                cdouble s{};
                for (std::size_t i = 0; i < 2; ++i)
                    for (std::size_t j = 0; j < 2; ++j) {
                        const cdouble a = std::conj(f[0].m[i * 2 + j]);
                        for (std::size_t m = 0; m < 2; ++m)
                            for (std::size_t n = 0; n < 2; ++n)
                                s += gs[(4 * i + 2 * k + m) * 8 + 4 * j + 2 * l + n] * a * std::conj(f[2].m[m * 2 + n]);
                    }
                g[1].m[k * 2 + l] = s;
            }
    }
}

// dL/d rho_hat for the L1 loss, packed as (d/dRe) + i (d/dIm).
Mat8 loss_grad(const CMatrix& rho, const CMatrix& rho_hat) {
    Mat8 g{};
    for (std::size_t i = 0; i < 64; ++i) {
        const cdouble diff = rho.data()[i] - rho_hat.data()[i];
        const double mag = std::abs(diff);
        if (mag > 0.0) g[i] = -diff / (mag * 64.0);
    }
    return g;
}

void require_states(std::span<const CMatrix> states) {
    for (const auto& s : states)
        if (s.dim() != 8) throw std::invalid_argument("separator: expected 8x8 input matrices");
}

// Forward (and optionally backward) over one chunk of samples.
struct ChunkOutput {
    std::vector<double> losses;
    std::vector<std::vector<std::array<Factor2, 3>>> factors;  // filled when requested
};

ChunkOutput run_chunk(const SeparatorParams& params, const EffectiveKernels& ek, std::span<const CMatrix> states,
                      SeparatorParams* grad, bool keep_factors) {
    const auto& cfg = params.config();
    const int w = cfg.width();
    const int depth = cfg.use_fc ? cfg.fc_depth : 0;
    const Eigen::Index b = static_cast<Eigen::Index>(states.size());

    // activations[x][l]: l = 0 features, 1..depth layer outputs; pre[x][l] pre-activations
    std::array<std::vector<Eigen::MatrixXd>, 3> act, pre;
    for (unsigned x = 0; x < 3; ++x) {
        const int path = cfg.path_of(static_cast<Qubit>(x));
        Eigen::MatrixXd feat(w, b);
        for (Eigen::Index s = 0; s < b; ++s)
            for (int c = 0; c < cfg.n_k; ++c)
                for (auto part : {Part::Re, Part::Im}) {
                    const auto e = extract_with(states[s], x, ek.at(path, c, part), part);
                    for (int t = 0; t < 4; ++t) feat(c * 8 + static_cast<int>(part) * 4 + t, s) = e[t];
                }
        act[x].push_back(std::move(feat));
        for (int l = 0; l < depth; ++l) {
            Eigen::MatrixXd z = params.fc_weight(path, l) * act[x][l];
            z.colwise() += params.fc_bias(path, l);
            Eigen::MatrixXd h = z;
            if (l + 1 < depth) h = z.unaryExpr([&](double v) { return activate(cfg.activation, v); });
            pre[x].push_back(std::move(z));
            act[x].push_back(std::move(h));
        }
    }

    ChunkOutput out;
    out.losses.resize(states.size());
    if (keep_factors) out.factors.resize(states.size());

    std::array<Eigen::MatrixXd, 3> g_out;
    if (grad)
        for (auto& g : g_out) g = Eigen::MatrixXd::Zero(w, b);

    std::vector<std::array<Factor2, 3>> factors(cfg.n_k), g_factors(cfg.n_k);
    for (Eigen::Index s = 0; s < b; ++s) {
        for (int c = 0; c < cfg.n_k; ++c)
            for (unsigned x = 0; x < 3; ++x) {
                const auto& o = act[x].back();
                for (int t = 0; t < 4; ++t) factors[c][x].m[t] = {o(c * 8 + t, s), o(c * 8 + 4 + t, s)};
            }
        const DecodeResult d = decode_impl(factors);
        out.losses[s] = reconstruction_loss(states[s], d.rho_hat);
        if (keep_factors) out.factors[s] = factors;
        if (!grad) continue;

        decode_backward(factors, d, loss_grad(states[s], d.rho_hat), g_factors);
        for (int c = 0; c < cfg.n_k; ++c)
            for (unsigned x = 0; x < 3; ++x)
                for (int t = 0; t < 4; ++t) {
                    g_out[x](c * 8 + t, s) = g_factors[c][x].m[t].real();
                    g_out[x](c * 8 + 4 + t, s) = g_factors[c][x].m[t].imag();
                }
    }
    if (!grad) return out;

    // FC backward, then kernel gradients on the effective kernels.
    std::vector<Kernel> g_eff(ek.k.size(), Kernel{});
    for (unsigned x = 0; x < 3; ++x) {
        const int path = cfg.path_of(static_cast<Qubit>(x));
        Eigen::MatrixXd g = std::move(g_out[x]);  // gradient w.r.t. act[x][l + 1]
        for (int l = depth - 1; l >= 0; --l) {
            if (l + 1 < depth) {
                const auto& z = pre[x][l];
                for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] *= activate_grad(cfg.activation, z.data()[i]);
            }
            grad->fc_weight(path, l).noalias() += g * act[x][l].transpose();
            grad->fc_bias(path, l) += g.rowwise().sum();
            g = params.fc_weight(path, l).transpose() * g;
        }
        const auto& r = index_table().idx[x];
        for (Eigen::Index s = 0; s < b; ++s) {
            const CMatrix& rho = states[s];
            for (int c = 0; c < cfg.n_k; ++c)
                for (auto part : {Part::Re, Part::Im}) {
                    Kernel& gk = g_eff[(static_cast<std::size_t>(path) * cfg.n_k + c) * 2 + static_cast<std::size_t>(part)];
                    for (std::size_t i = 0; i < 2; ++i)
                        for (std::size_t j = 0; j < 2; ++j) {
                            const double go = g(c * 8 + static_cast<int>(part) * 4 + static_cast<int>(i * 2 + j), s);
                            if (go == 0.0) continue;
                            for (std::size_t k = 0; k < 4; ++k)
                                for (std::size_t q = 0; q < 4; ++q) {
                                    const cdouble z = rho(r[i][k], r[j][q]);
                                    gk[k * 4 + q] += go * (part == Part::Re ? z.real() : z.imag());
                                }
                        }
                }
        }
    }
    for (int p = 0; p < cfg.paths(); ++p)
        for (int c = 0; c < cfg.n_k; ++c)
            for (auto part : {Part::Re, Part::Im}) {
                const Kernel& ge = g_eff[(static_cast<std::size_t>(p) * cfg.n_k + c) * 2 + static_cast<std::size_t>(part)];
                auto dst = grad->kernel(p, c, part);
                for (std::size_t k = 0; k < 4; ++k)
                    for (std::size_t q = 0; q < 4; ++q) {
                        // chain rule through the symmetrization of tied kernels
                        const double v = cfg.tie_weights ? 0.5 * (ge[k * 4 + q] + ge[kSwap[k] * 4 + kSwap[q]])
                                                         : ge[k * 4 + q];
                        dst[k * 4 + q] += v;
                    }
            }
    return out;
}

std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }

std::span<const CMatrix> chunk_of(std::span<const CMatrix> all, std::size_t t) {
    const std::size_t lo = t * kChunk;
    return all.subspan(lo, std::min(kChunk, all.size() - lo));
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

void SeparatorConfig::validate() const {
    if (n_k < 1) throw std::invalid_argument("SeparatorConfig: n_k must be >= 1");
    if (fc_depth < 1) throw std::invalid_argument("SeparatorConfig: fc_depth must be >= 1");
}

SeparatorParams::SeparatorParams(SeparatorConfig config) : config_(config) {
    config_.validate();
    fc_offset_ = static_cast<std::size_t>(config_.paths()) * config_.n_k * 2 * 16;
    std::size_t total = fc_offset_;
    if (config_.use_fc) {
        const auto w = static_cast<std::size_t>(config_.width());
        total += static_cast<std::size_t>(config_.paths()) * config_.fc_depth * (w * w + w);
    }
    values_.assign(total, 0.0);
}

std::size_t SeparatorParams::kernel_offset(int path, int channel, Part part) const {
    if (path < 0 || path >= config_.paths() || channel < 0 || channel >= config_.n_k)
        throw std::out_of_range("kernel index out of range");
    return ((static_cast<std::size_t>(path) * config_.n_k + channel) * 2 + static_cast<std::size_t>(part)) * 16;
}

std::size_t SeparatorParams::weight_offset(int path, int layer) const {
    if (!config_.use_fc || path < 0 || path >= config_.paths() || layer < 0 || layer >= config_.fc_depth)
        throw std::out_of_range("FC layer index out of range");
    const auto w = static_cast<std::size_t>(config_.width());
    return fc_offset_ + (static_cast<std::size_t>(path) * config_.fc_depth + layer) * (w * w + w);
}

std::span<double> SeparatorParams::kernel(int path, int channel, Part part) {
    return std::span<double>(values_).subspan(kernel_offset(path, channel, part), 16);
}
std::span<const double> SeparatorParams::kernel(int path, int channel, Part part) const {
    return std::span<const double>(values_).subspan(kernel_offset(path, channel, part), 16);
}

Eigen::Map<RowMatrix> SeparatorParams::fc_weight(int path, int layer) {
    return {values_.data() + weight_offset(path, layer), config_.width(), config_.width()};
}
Eigen::Map<const RowMatrix> SeparatorParams::fc_weight(int path, int layer) const {
    return {values_.data() + weight_offset(path, layer), config_.width(), config_.width()};
}
Eigen::Map<Eigen::VectorXd> SeparatorParams::fc_bias(int path, int layer) {
    const auto w = static_cast<std::size_t>(config_.width());
    return {values_.data() + weight_offset(path, layer) + w * w, config_.width()};
}
Eigen::Map<const Eigen::VectorXd> SeparatorParams::fc_bias(int path, int layer) const {
    const auto w = static_cast<std::size_t>(config_.width());
    return {values_.data() + weight_offset(path, layer) + w * w, config_.width()};
}

void SeparatorParams::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

bool SeparatorParams::all_finite() const {
    return std::ranges::all_of(values_, [](double v) { return std::isfinite(v); });
}

SeparatorParams SeparatorParams::identity(SeparatorConfig config) {
    SeparatorParams p(config);
    for (int path = 0; path < config.paths(); ++path) {
        for (int c = 0; c < config.n_k; ++c)
            for (auto part : {Part::Re, Part::Im}) {
                auto k = p.kernel(path, c, part);
                for (int i = 0; i < 4; ++i) k[i * 5] = 1.0;
            }
        if (!config.use_fc) continue;
        for (int l = 0; l < config.fc_depth; ++l) p.fc_weight(path, l).setIdentity();
    }
    return p;
}

SeparatorParams SeparatorParams::initialized(SeparatorConfig config, Rng& rng, double kernel_noise) {
    SeparatorParams p = identity(config);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t i = 0; i < p.fc_offset_; ++i) p.values_[i] += kernel_noise * u(rng);
    if (config.use_fc) {
        // scaled so the perturbation of each output stays near kernel_noise
        const double fc_noise = kernel_noise / std::sqrt(static_cast<double>(config.width()));
        for (int path = 0; path < config.paths(); ++path)
            for (int l = 0; l < config.fc_depth; ++l) {
                auto w = p.fc_weight(path, l);
                for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] += fc_noise * u(rng);
            }
    }
    return p;
}

std::size_t extraction_index(Qubit qubit, std::size_t i, std::size_t k) {
    switch (qubit) {
        case Qubit::A: return 4 * i + k;
        case Qubit::B: return 2 * i + 4 * (k / 2) + (k % 2);
        case Qubit::C: return i + 2 * k;
    }
    return 0;
}

std::array<double, 4> extract_qubit(const CMatrix& rho, Qubit qubit, std::span<const double> kernel, Part part) {
    if (rho.dim() != 8 || kernel.size() != 16) throw std::invalid_argument("extract_qubit: shape mismatch");
    Kernel k{};
    std::copy(kernel.begin(), kernel.end(), k.begin());
    return extract_with(rho, static_cast<unsigned>(qubit), k, part);
}

Kernel effective_kernel(const SeparatorConfig& config, std::span<const double> stored) {
    Kernel k{};
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b)
            k[a * 4 + b] = config.tie_weights ? 0.5 * (stored[a * 4 + b] + stored[kSwap[a] * 4 + kSwap[b]])
                                              : stored[a * 4 + b];
    return k;
}

Eigen::VectorXd fc_forward(const Eigen::VectorXd& features, int path, const SeparatorParams& params) {
    const auto& cfg = params.config();
    if (features.size() != cfg.width())
        throw std::invalid_argument("fc_forward: expected " + std::to_string(cfg.width()) + " features, got " +
                                    std::to_string(features.size()));
    if (!cfg.use_fc) return features;
    Eigen::VectorXd h = features;
    for (int l = 0; l < cfg.fc_depth; ++l) {
        Eigen::VectorXd z = params.fc_weight(path, l) * h + params.fc_bias(path, l);
        h = l + 1 < cfg.fc_depth ? z.unaryExpr([&](double v) { return activate(cfg.activation, v); }).eval() : z;
    }
    return h;
}

CMatrix decode(std::span<const std::array<Factor2, 3>> factors) { return decode_impl(factors).rho_hat; }

double reconstruction_loss(const CMatrix& rho, const CMatrix& rho_hat) {
    if (rho.dim() != 8 || rho_hat.dim() != 8) throw std::invalid_argument("loss: expected 8x8 matrices");
    double s = 0.0;
    for (std::size_t i = 0; i < 64; ++i) s += std::abs(rho.data()[i] - rho_hat.data()[i]);
    return s / 64.0;
}

Reconstruction forward(const CMatrix& rho, const SeparatorParams& params) {
    const std::array<CMatrix, 1> one{rho};
    require_states(one);
    auto out = run_chunk(params, effective_kernels(params), one, nullptr, true);
    Reconstruction r;
    r.per_qubit_factors = std::move(out.factors.front());
    r.rho_hat = decode(r.per_qubit_factors);
    r.loss = out.losses.front();
    return r;
}

Reconstruction baseline_forward(const CMatrix& rho) {
    if (rho.dim() != 8) throw std::invalid_argument("baseline_forward: expected an 8x8 matrix");
    std::array<Factor2, 3> f;
    for (unsigned q = 0; q < 3; ++q) {
        const CMatrix r = partial_trace(rho, qubit_bit(q), 3);
        for (std::size_t t = 0; t < 4; ++t) f[q].m[t] = r.data()[t];
    }
    Reconstruction rec;
    rec.per_qubit_factors = {f};
    rec.rho_hat = kron(f[0].matrix(), kron(f[1].matrix(), f[2].matrix()));
    rec.loss = reconstruction_loss(rho, rec.rho_hat);
    return rec;
}

LossAndGradient loss_and_gradient(const SeparatorParams& params, std::span<const CMatrix> batch, unsigned threads) {
    if (batch.empty()) throw std::invalid_argument("gradient: batch must be non-empty");
    require_states(batch);
    const auto ek = effective_kernels(params);
    const std::size_t n_chunks = chunk_count(batch.size());
    std::vector<SeparatorParams> grads(n_chunks, SeparatorParams(params.config()));
    std::vector<double> loss_sums(n_chunks, 0.0);
    parallel_for(n_chunks, threads, [&](std::size_t t) {
        const auto out = run_chunk(params, ek, chunk_of(batch, t), &grads[t], false);
        for (double l : out.losses) loss_sums[t] += l;
    });

    LossAndGradient res{0.0, SeparatorParams(params.config())};
    auto total = res.gradient.values();
    for (std::size_t t = 0; t < n_chunks; ++t) {
        res.mean_loss += loss_sums[t];
        const auto g = grads[t].values();
        for (std::size_t i = 0; i < total.size(); ++i) total[i] += g[i];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    res.mean_loss *= inv;
    for (auto& v : total) v *= inv;
    return res;
}

SeparatorParams gradient(const SeparatorParams& params, std::span<const CMatrix> batch, unsigned threads) {
    return loss_and_gradient(params, batch, threads).gradient;
}

std::vector<double> batch_losses(const SeparatorParams& params, std::span<const CMatrix> states, unsigned threads) {
    require_states(states);
    const auto ek = effective_kernels(params);
    std::vector<double> losses(states.size());
    parallel_for(chunk_count(states.size()), threads, [&](std::size_t t) {
        const auto out = run_chunk(params, ek, chunk_of(states, t), nullptr, false);
        std::copy(out.losses.begin(), out.losses.end(), losses.begin() + static_cast<std::ptrdiff_t>(t * kChunk));
    });
    return losses;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string checkpoint_json(const SeparatorParams& params, const TrainingMeta& meta) {
    using nlohmann::json;
    const auto& cfg = params.config();
    json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["config"] = {{"n_k", cfg.n_k},
                   {"use_fc", cfg.use_fc},
                   {"fc_depth", cfg.fc_depth},
                   {"tie_weights", cfg.tie_weights},
                   {"activation", to_string(cfg.activation)}};

    json kernels = json::array();
    for (int p = 0; p < cfg.paths(); ++p) {
        json path = json::array();
        for (int c = 0; c < cfg.n_k; ++c) {
            json chan = json::array();
            for (auto part : {Part::Re, Part::Im}) {
                const auto k = params.kernel(p, c, part);
                chan.push_back(std::vector<double>(k.begin(), k.end()));
            }
            path.push_back(std::move(chan));
        }
        kernels.push_back(std::move(path));
    }
    j["kernels"] = std::move(kernels);

    json fc = json::array();
    if (cfg.use_fc)
        for (int p = 0; p < cfg.paths(); ++p) {
            json layers = json::array();
            for (int l = 0; l < cfg.fc_depth; ++l) {
                const auto w = params.fc_weight(p, l);
                const auto b = params.fc_bias(p, l);
                layers.push_back({{"weight", std::vector<double>(w.data(), w.data() + w.size())},
                                  {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
            }
            fc.push_back(std::move(layers));
        }
    j["fc"] = std::move(fc);
    j["training_meta"] = {{"epoch", meta.epoch}, {"val_loss", meta.val_loss}, {"seed", meta.seed}};
    // max_digits10 output keeps doubles bit-exact through the text round trip
    return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
    using nlohmann::json;
    try {
        const json j = json::parse(text);
        if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
            throw FormatError("unsupported checkpoint format_version " + j.at("format_version").dump());
        const auto& jc = j.at("config");
        SeparatorConfig cfg;
        cfg.n_k = jc.at("n_k").get<int>();
        cfg.use_fc = jc.at("use_fc").get<bool>();
        cfg.fc_depth = jc.at("fc_depth").get<int>();
        cfg.tie_weights = jc.at("tie_weights").get<bool>();
        cfg.activation = activation_from_string(jc.at("activation").get<std::string>());
        cfg.validate();

        SeparatorParams params(cfg);
        const auto& kernels = j.at("kernels");
        if (kernels.size() != static_cast<std::size_t>(cfg.paths())) throw FormatError("checkpoint: kernel path count");
        for (int p = 0; p < cfg.paths(); ++p) {
            if (kernels[p].size() != static_cast<std::size_t>(cfg.n_k)) throw FormatError("checkpoint: channel count");
            for (int c = 0; c < cfg.n_k; ++c)
                for (auto part : {Part::Re, Part::Im}) {
                    const auto v = kernels[p][c].at(static_cast<std::size_t>(part)).get<std::vector<double>>();
                    if (v.size() != 16) throw FormatError("checkpoint: kernel must have 16 weights");
                    std::copy(v.begin(), v.end(), params.kernel(p, c, part).begin());
                }
        }
        if (cfg.use_fc) {
            const auto& fc = j.at("fc");
            if (fc.size() != static_cast<std::size_t>(cfg.paths())) throw FormatError("checkpoint: fc path count");
            for (int p = 0; p < cfg.paths(); ++p) {
                if (fc[p].size() != static_cast<std::size_t>(cfg.fc_depth)) throw FormatError("checkpoint: fc depth");
                for (int l = 0; l < cfg.fc_depth; ++l) {
                    const auto w = fc[p][l].at("weight").get<std::vector<double>>();
                    const auto b = fc[p][l].at("bias").get<std::vector<double>>();
                    auto wm = params.fc_weight(p, l);
                    auto bm = params.fc_bias(p, l);
                    if (w.size() != static_cast<std::size_t>(wm.size()) || b.size() != static_cast<std::size_t>(bm.size()))
                        throw FormatError("checkpoint: fc layer shape");
                    std::copy(w.begin(), w.end(), wm.data());
                    std::copy(b.begin(), b.end(), bm.data());
                }
            }
        }
        if (!params.all_finite()) throw FormatError("checkpoint: non-finite weight");

        TrainingMeta meta;
        const auto& jm = j.at("training_meta");
        meta.epoch = jm.at("epoch").get<int>();
        meta.val_loss = jm.at("val_loss").get<double>();
        meta.seed = jm.at("seed").get<std::uint64_t>();
        return {std::move(params), meta};
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const SeparatorParams& params, const TrainingMeta& meta) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
        out << checkpoint_json(params, meta);
        if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_json(ss.str());
}

void export_kernels_csv(const std::filesystem::path& path, const SeparatorParams& params) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    out << "path,channel,part,row,k0,k1,k2,k3\n";
    const auto& cfg = params.config();
    for (int p = 0; p < cfg.paths(); ++p)
        for (int c = 0; c < cfg.n_k; ++c)
            for (auto part : {Part::Re, Part::Im}) {
                const Kernel k = effective_kernel(cfg, params.kernel(p, c, part));
                for (int r = 0; r < 4; ++r) {
                    out << p << ',' << c << ',' << (part == Part::Re ? "re" : "im") << ',' << r;
                    for (int q = 0; q < 4; ++q) out << ',' << k[r * 4 + q];
                    out << '\n';
                }
            }
}

double kernel_identity_deviation(const SeparatorParams& params) {
    const auto& cfg = params.config();
    double total = 0.0;
    std::size_t n = 0;
    for (int p = 0; p < cfg.paths(); ++p)
        for (int c = 0; c < cfg.n_k; ++c)
            for (auto part : {Part::Re, Part::Im}) {
                const Kernel k = effective_kernel(cfg, params.kernel(p, c, part));
                const double scale = (k[0] + k[5] + k[10] + k[15]) / 4.0;
                double dev = 0.0;
                for (int i = 0; i < 16; ++i) dev += std::abs(k[i] - (i % 5 == 0 ? scale : 0.0));
                total += dev / 16.0;
                ++n;
            }
    return total / static_cast<double>(n);
}

}  // namespace qsep
