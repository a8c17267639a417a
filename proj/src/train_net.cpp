#include "srmnet/train_net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#if defined(__AVX512F__) && defined(__AVX512DQ__)
#include <immintrin.h>
#define SRMNET_AVX512 1
#endif

#include <json.hpp>

#include "srmnet/parallel.hpp"
#include "srmnet/rng.hpp"

namespace srmnet {

namespace {

// Flat layout offsets (see pack_params).
constexpr std::size_t kAcrossW = 0;
constexpr std::size_t kAcrossB = 64;
constexpr std::size_t kAlongW = 68;
constexpr std::size_t kAlongB = 96;
constexpr std::size_t kCbW = 100;
constexpr std::size_t kCbB = 424;
constexpr std::size_t kFcW = 505;
constexpr std::size_t kFcB = 829;
constexpr std::size_t kTotal = 831;

// Codeword loops run over a padded count so they vectorize cleanly; padded
// entries carry a huge negative bias and never survive the exp gate.
constexpr int kPad = 96;

// exp(x) is treated as zero below this; e^-15 ~ 3e-7 of the winning
// channel's mass is far below every tolerance in use, and the gate keeps the
// backward cost proportional to the handful of codewords with
// non-negligible probability.
constexpr double kExpGate = -15.0;

// exp for x in [-31, 0]: 2^i * 2^f split with a degree-6 polynomial for the
// fractional part; relative error ~2e-5, branch-free so the site loops
// vectorize. The double path keeps libm exp.
inline float fast_exp_neg(float x) {
    const float t = x * 1.4426950408889634f;
    const float fi = std::floor(t);
    const float f = t - fi;
    float p = 1.5403530393e-4f;
    p = p * f + 1.3333558146e-3f;
    p = p * f + 9.6181291076e-3f;
    p = p * f + 5.5504108664e-2f;
    p = p * f + 2.4022650696e-1f;
    p = p * f + 6.9314718056e-1f;
    p = p * f + 1.0f;
    const float scale = std::bit_cast<float>(static_cast<std::uint32_t>(static_cast<int>(fi) + 127) << 23);
    return p * scale;
}

template <typename S>
struct Engine {
    // prepared parameters; [half] index 0 = along, 1 = across
    int kernel_h[2];
    int kernel_w[2];
    std::vector<S> kernels[2];  // 4 kernels each, flattened back to back
    S conv_bias[2][4];
    alignas(64) S ct[4][kPad];  // ct[n][k] = c_k[n]
    alignas(64) S eps[kPad];
    S cw[kPad][4];              // row-major codewords for the sparse backward
    S fc[2][kFeatureDim];
    S fcb[2];
    S alpha;
    S input_scale;

    explicit Engine(const NetParams& p, double alpha_override = -1.0) {
        const ConvBank* banks[2] = {&p.bank_along, &p.bank_across};
        for (int h = 0; h < 2; ++h) {
            const ConvBank& bank = *banks[h];
            if (bank.filters() != 4) throw std::invalid_argument("conv bank must have 4 filters");
            kernel_h[h] = bank.kernel_h;
            kernel_w[h] = bank.kernel_w;
            const std::size_t ksz = static_cast<std::size_t>(bank.kernel_h) * bank.kernel_w;
            kernels[h].resize(4 * ksz);
            for (int n = 0; n < 4; ++n) {
                for (std::size_t i = 0; i < ksz; ++i) {
                    kernels[h][n * ksz + i] = static_cast<S>(bank.weights[static_cast<std::size_t>(n)][i]);
                }
                conv_bias[h][n] = static_cast<S>(bank.biases[static_cast<std::size_t>(n)]);
            }
        }
        for (int k = 0; k < kPad; ++k) {
            for (int n = 0; n < 4; ++n) {
                const double w = k < Codebook::kWords ? p.codebook.word(k, n) : 0.0;
                ct[n][k] = static_cast<S>(w);
                cw[k][n] = static_cast<S>(w);
            }
            eps[k] = k < Codebook::kWords ? static_cast<S>(p.codebook.biases[static_cast<std::size_t>(k)])
                                          : static_cast<S>(-1e30);
        }
        for (int j = 0; j < 2; ++j) {
            for (int d = 0; d < kFeatureDim; ++d) fc[j][d] = static_cast<S>(p.fc_weights[static_cast<std::size_t>(j * kFeatureDim + d)]);
            fcb[j] = static_cast<S>(p.fc_biases[static_cast<std::size_t>(j)]);
        }
        alpha = static_cast<S>(alpha_override > 0.0 ? alpha_override : p.alpha);
        input_scale = static_cast<S>(p.input_scale);
    }

    struct Workspace {
        std::vector<S> oriented[2];  // scaled patch / scaled transpose
        int ow[2], oh[2];
        std::vector<S> zbuf[4];                // per path, channel-planar conv outputs
        std::vector<std::uint32_t> trace_begin[4];
        std::vector<std::uint32_t> trace_k[4];
        std::vector<S> trace_p[4];
        std::vector<S> dzplan;  // channel-planar conv-output gradient, one path at a time
        double pooled[4][kPad];
        Feature feature;
        std::array<double, 2> logits{};
        double half_sites[2] = {0, 0};
    };

    static int path_of(int orientation, int half) { return orientation * 2 + half; }

    void prepare_input(const Plane& patch, Workspace& ws) const {
        const int w = patch.width, h = patch.height;
        ws.ow[0] = w;
        ws.oh[0] = h;
        ws.ow[1] = h;
        ws.oh[1] = w;
        ws.oriented[0].resize(patch.size());
        ws.oriented[1].resize(patch.size());
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const S v = static_cast<S>(patch.at(y, x)) * input_scale;
                ws.oriented[0][static_cast<std::size_t>(y) * w + x] = v;
                ws.oriented[1][static_cast<std::size_t>(x) * h + y] = v;
            }
        }
    }

    // Conv outputs are stored channel-planar (z[n * sites + s]); per-tap axpy
    // rows keep every loop unit-stride.
    void conv_path(int orientation, int half, Workspace& ws) const {
        const int W = ws.ow[orientation], H = ws.oh[orientation];
        const int kh = kernel_h[half], kw = kernel_w[half];
        const int ow = W - kw + 1, oh = H - kh + 1;
        if (ow < 1 || oh < 1) throw std::invalid_argument("patch too small for the network");
        auto& z = ws.zbuf[path_of(orientation, half)];
        const std::size_t sites = static_cast<std::size_t>(ow) * oh;
        z.resize(sites * 4);
        const S* in = ws.oriented[orientation].data();
        const std::size_t ksz = static_cast<std::size_t>(kh) * kw;
        for (int n = 0; n < 4; ++n) {
            S* zn = z.data() + static_cast<std::size_t>(n) * sites;
            std::fill(zn, zn + sites, conv_bias[half][n]);
            const S* kern = kernels[half].data() + n * ksz;
            for (int u = 0; u < kh; ++u) {
                for (int v = 0; v < kw; ++v) {
                    const S w = kern[static_cast<std::size_t>(u) * kw + v];
                    for (int y = 0; y < oh; ++y) {
                        S* zrow = zn + static_cast<std::size_t>(y) * ow;
                        const S* irow = in + static_cast<std::size_t>(y + u) * W + v;
                        for (int x = 0; x < ow; ++x) zrow[x] += w * irow[x];
                    }
                }
            }
        }
    }

#ifdef SRMNET_AVX512
    // Hand-vectorized score/soft-max/pooling pass for the single-precision
    // training engine: scores stay in registers, the exp gate becomes a lane
    // mask, and active channels are recorded with compress stores.
    void score_path_f(int orientation, int half, Workspace& ws, bool keep_traces) const
        requires std::is_same_v<S, float>
    {
        constexpr int kBlocks = kPad / 16;
        const int path = path_of(orientation, half);
        const auto& z = ws.zbuf[path];
        const std::size_t sites = z.size() / 4;
        double* pooled = ws.pooled[path];
        std::fill(pooled, pooled + kPad, 0.0);
        auto& tb = ws.trace_begin[path];
        auto& tk = ws.trace_k[path];
        auto& tp = ws.trace_p[path];
        std::size_t cursor = 0;
        if (keep_traces) {
            tb.assign(sites + 1, 0);
            tk.resize(sites * 20 + kPad);
            tp.resize(sites * 20 + kPad);
        }

        const __m512 alphav = _mm512_set1_ps(alpha);
        const __m512 gatev = _mm512_set1_ps(static_cast<float>(kExpGate));
        const __m512 log2e = _mm512_set1_ps(1.4426950408889634f);
        const __m512 c6 = _mm512_set1_ps(1.5403530393e-4f);
        const __m512 c5 = _mm512_set1_ps(1.3333558146e-3f);
        const __m512 c4 = _mm512_set1_ps(9.6181291076e-3f);
        const __m512 c3 = _mm512_set1_ps(5.5504108664e-2f);
        const __m512 c2 = _mm512_set1_ps(2.4022650696e-1f);
        const __m512 c1 = _mm512_set1_ps(6.9314718056e-1f);
        const __m512 one = _mm512_set1_ps(1.0f);
        const __m512i bias127 = _mm512_set1_epi32(127);

        __m512 epsv[kBlocks], ct0v[kBlocks], ct1v[kBlocks], ct2v[kBlocks], ct3v[kBlocks];
        __m512i idxv[kBlocks];
        const __m512i iota = _mm512_set_epi32(15, 14, 13, 12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0);
        for (int b = 0; b < kBlocks; ++b) {
            epsv[b] = _mm512_load_ps(eps + b * 16);
            ct0v[b] = _mm512_load_ps(ct[0] + b * 16);
            ct1v[b] = _mm512_load_ps(ct[1] + b * 16);
            ct2v[b] = _mm512_load_ps(ct[2] + b * 16);
            ct3v[b] = _mm512_load_ps(ct[3] + b * 16);
            idxv[b] = _mm512_add_epi32(_mm512_set1_epi32(b * 16), iota);
        }

        const float* zp0 = z.data();
        const float* zp1 = z.data() + sites;
        const float* zp2 = z.data() + 2 * sites;
        const float* zp3 = z.data() + 3 * sites;
        for (std::size_t s = 0; s < sites; ++s) {
            if (keep_traces && cursor + kPad > tk.size()) {
                tk.resize(tk.size() * 2);
                tp.resize(tp.size() * 2);
            }
            const __m512 z0 = _mm512_set1_ps(zp0[s]);
            const __m512 z1 = _mm512_set1_ps(zp1[s]);
            const __m512 z2 = _mm512_set1_ps(zp2[s]);
            const __m512 z3 = _mm512_set1_ps(zp3[s]);
            __m512 m[kBlocks];
            __m512 maxv = _mm512_set1_ps(-1e38f);
            for (int b = 0; b < kBlocks; ++b) {
                __m512 acc = _mm512_fmadd_ps(z0, ct0v[b], epsv[b]);
                acc = _mm512_fmadd_ps(z1, ct1v[b], acc);
                acc = _mm512_fmadd_ps(z2, ct2v[b], acc);
                acc = _mm512_fmadd_ps(z3, ct3v[b], acc);
                m[b] = acc;
                maxv = _mm512_max_ps(maxv, acc);
            }
            const __m512 mxv = _mm512_set1_ps(_mm512_reduce_max_ps(maxv));

            __m512 e[kBlocks];
            __mmask16 live[kBlocks];
            __m512 esumv = _mm512_setzero_ps();
            for (int b = 0; b < kBlocks; ++b) {
                const __m512 t = _mm512_mul_ps(alphav, _mm512_sub_ps(m[b], mxv));
                live[b] = _mm512_cmp_ps_mask(t, gatev, _CMP_GT_OQ);
                const __m512 y = _mm512_mul_ps(_mm512_max_ps(t, gatev), log2e);
                const __m512 fi = _mm512_roundscale_ps(y, 0x09);  // floor
                const __m512 f = _mm512_sub_ps(y, fi);
                __m512 p = _mm512_fmadd_ps(c6, f, c5);
                p = _mm512_fmadd_ps(p, f, c4);
                p = _mm512_fmadd_ps(p, f, c3);
                p = _mm512_fmadd_ps(p, f, c2);
                p = _mm512_fmadd_ps(p, f, c1);
                p = _mm512_fmadd_ps(p, f, one);
                const __m512i bits = _mm512_slli_epi32(_mm512_add_epi32(_mm512_cvtps_epi32(fi), bias127), 23);
                const __m512 ev = _mm512_maskz_mul_ps(live[b], p, _mm512_castsi512_ps(bits));
                e[b] = ev;
                esumv = _mm512_add_ps(esumv, ev);
            }
            const float inv = 1.0f / _mm512_reduce_add_ps(esumv);
            const __m512 invv = _mm512_set1_ps(inv);
            for (int b = 0; b < kBlocks; ++b) {
                const __m512 pv = _mm512_mul_ps(e[b], invv);
                const __m512d lo = _mm512_cvtps_pd(_mm512_castps512_ps256(pv));
                const __m512d hi = _mm512_cvtps_pd(_mm512_extractf32x8_ps(pv, 1));
                double* dst = pooled + b * 16;
                _mm512_storeu_pd(dst, _mm512_add_pd(_mm512_loadu_pd(dst), lo));
                _mm512_storeu_pd(dst + 8, _mm512_add_pd(_mm512_loadu_pd(dst + 8), hi));
                if (keep_traces) {
                    _mm512_mask_compressstoreu_epi32(tk.data() + cursor, live[b], idxv[b]);
                    _mm512_mask_compressstoreu_ps(tp.data() + cursor, live[b], pv);
                    cursor += static_cast<unsigned>(_mm_popcnt_u32(live[b]));
                }
            }
            if (keep_traces) tb[s + 1] = static_cast<std::uint32_t>(cursor);
        }
    }
#endif

    // Matching scores + soft-max + pooling over one path; optionally records
    // the per-site active set for the backward pass. Loops are split so each
    // pass vectorizes, with fixed-pattern partial reductions keeping results
    // independent of the build's vector width choices at a given binary.
    void score_path(int orientation, int half, Workspace& ws, bool keep_traces) const {
#ifdef SRMNET_AVX512
        if constexpr (std::is_same_v<S, float>) {
            score_path_f(orientation, half, ws, keep_traces);
            return;
        }
#endif
        const int path = path_of(orientation, half);
        const auto& z = ws.zbuf[path];
        const std::size_t sites = z.size() / 4;
        double* pooled = ws.pooled[path];
        std::fill(pooled, pooled + kPad, 0.0);
        auto& tb = ws.trace_begin[path];
        auto& tk = ws.trace_k[path];
        auto& tp = ws.trace_p[path];
        if (keep_traces) {
            tb.assign(sites + 1, 0);
            tk.clear();
            tp.clear();
            tk.reserve(sites * 16);
            tp.reserve(sites * 16);
        }
        alignas(64) S m[kPad];
        alignas(64) S e[kPad];
        const S gate = static_cast<S>(kExpGate);
        const S* zp0 = z.data();
        const S* zp1 = z.data() + sites;
        const S* zp2 = z.data() + 2 * sites;
        const S* zp3 = z.data() + 3 * sites;
        for (std::size_t s = 0; s < sites; ++s) {
            const S z0 = zp0[s], z1 = zp1[s], z2 = zp2[s], z3 = zp3[s];
            for (int k = 0; k < kPad; ++k) {
                m[k] = eps[k] + z0 * ct[0][k] + z1 * ct[1][k] + z2 * ct[2][k] + z3 * ct[3][k];
            }
            alignas(64) S mx16[16];
            for (int j = 0; j < 16; ++j) mx16[j] = m[j];
            for (int b = 1; b < kPad / 16; ++b) {
                for (int j = 0; j < 16; ++j) mx16[j] = std::max(mx16[j], m[b * 16 + j]);
            }
            S mx = mx16[0];
            for (int j = 1; j < 16; ++j) mx = std::max(mx, mx16[j]);

            if constexpr (std::is_same_v<S, float>) {
                for (int k = 0; k < kPad; ++k) {
                    const float t = alpha * (m[k] - mx);
                    const float ex = fast_exp_neg(std::max(t, gate));
                    e[k] = t > gate ? ex : 0.0f;
                }
            } else {
                for (int k = 0; k < kPad; ++k) {
                    const double t = alpha * (m[k] - mx);
                    e[k] = t > gate ? std::exp(t) : 0.0;
                }
            }
            alignas(64) S sum16[16];
            for (int j = 0; j < 16; ++j) sum16[j] = e[j];
            for (int b = 1; b < kPad / 16; ++b) {
                for (int j = 0; j < 16; ++j) sum16[j] += e[b * 16 + j];
            }
            S esum = 0;
            for (int j = 0; j < 16; ++j) esum += sum16[j];
            const S inv = S(1) / esum;

            if (keep_traces) {
                for (int k = 0; k < Codebook::kWords; ++k) {
                    if (e[k] > S(0)) {
                        const S p = e[k] * inv;
                        pooled[k] += static_cast<double>(p);
                        tk.push_back(static_cast<std::uint32_t>(k));
                        tp.push_back(p);
                    }
                }
                tb[s + 1] = static_cast<std::uint32_t>(tk.size());
            } else {
                for (int k = 0; k < kPad; ++k) {
                    pooled[k] += static_cast<double>(e[k] * inv);
                }
            }
        }
    }

    void forward(const Plane& patch, Workspace& ws, bool keep_traces) const {
        prepare_input(patch, ws);
        ws.half_sites[0] = ws.half_sites[1] = 0.0;
        for (int o = 0; o < 2; ++o) {
            for (int h = 0; h < 2; ++h) {
                conv_path(o, h, ws);
                score_path(o, h, ws, keep_traces);
                ws.half_sites[h] += static_cast<double>(ws.zbuf[path_of(o, h)].size() / 4);
            }
        }
        ws.feature.assign(kFeatureDim, 0.0);
        for (int h = 0; h < 2; ++h) {
            const int off = h == 0 ? 0 : kHistBins;
            for (int k = 0; k < kHistBins; ++k) {
                ws.feature[static_cast<std::size_t>(off + k)] =
                    (ws.pooled[path_of(0, h)][k] + ws.pooled[path_of(1, h)][k]) / ws.half_sites[h];
            }
        }
        for (int j = 0; j < 2; ++j) {
            double acc = static_cast<double>(fcb[j]);
            for (int d = 0; d < kFeatureDim; ++d) acc += static_cast<double>(fc[j][d]) * ws.feature[static_cast<std::size_t>(d)];
            ws.logits[static_cast<std::size_t>(j)] = acc;
        }
    }

    // Full example gradient; forward must have been run with traces.
    void backward(int label, Workspace& ws, std::vector<double>& grads) const {
        const std::array<double, 2> soft = {
            1.0 / (1.0 + std::exp(ws.logits[1] - ws.logits[0])),
            1.0 / (1.0 + std::exp(ws.logits[0] - ws.logits[1])),
        };
        double dlogits[2];
        for (int j = 0; j < 2; ++j) dlogits[j] = soft[static_cast<std::size_t>(j)] - (label == j ? 1.0 : 0.0);

        double* gfc = grads.data() + kFcW;
        double* gfcb = grads.data() + kFcB;
        double dfeat[kFeatureDim];
        for (int d = 0; d < kFeatureDim; ++d) {
            gfc[0 * kFeatureDim + d] += dlogits[0] * ws.feature[static_cast<std::size_t>(d)];
            gfc[1 * kFeatureDim + d] += dlogits[1] * ws.feature[static_cast<std::size_t>(d)];
            dfeat[d] = dlogits[0] * static_cast<double>(fc[0][d]) + dlogits[1] * static_cast<double>(fc[1][d]);
        }
        gfcb[0] += dlogits[0];
        gfcb[1] += dlogits[1];

        double* gcw = grads.data() + kCbW;
        double* gcb = grads.data() + kCbB;
        for (int h = 0; h < 2; ++h) {
            alignas(64) S dpvec[kPad] = {};
            const int off = h == 0 ? 0 : kHistBins;
            for (int k = 0; k < kHistBins; ++k) {
                dpvec[k] = static_cast<S>(dfeat[off + k] / ws.half_sites[h]);
            }
            const int kh = kernel_h[h], kw = kernel_w[h];
            const std::size_t ksz = static_cast<std::size_t>(kh) * kw;
            double* gkw = grads.data() + (h == 0 ? kAlongW : kAcrossW);
            double* gkb = grads.data() + (h == 0 ? kAlongB : kAcrossB);
            for (int o = 0; o < 2; ++o) {
                const int path = path_of(o, h);
                const int W = ws.ow[o];
                const int ow = W - kw + 1;
                const int oh = ws.oh[o] - kh + 1;
                const auto& z = ws.zbuf[path];
                const std::size_t sites = z.size() / 4;
                const auto& tb = ws.trace_begin[path];
                const auto& tk = ws.trace_k[path];
                const auto& tp = ws.trace_p[path];

                // Sparse pass: soft-max Jacobian over the active channels,
                // codeword gradients, and the conv-output gradient planes.
                ws.dzplan.assign(sites * 4, S(0));
                S* dzp = ws.dzplan.data();
                const S* zp0 = z.data();
                const S* zp1 = z.data() + sites;
                const S* zp2 = z.data() + 2 * sites;
                const S* zp3 = z.data() + 3 * sites;
                for (std::size_t s = 0; s < sites; ++s) {
                    const std::uint32_t begin = tb[s], end = tb[s + 1];
                    if (begin == end) continue;
                    const S zs0 = zp0[s], zs1 = zp1[s], zs2 = zp2[s], zs3 = zp3[s];
                    S dot = 0;
                    for (std::uint32_t j = begin; j < end; ++j) dot += dpvec[tk[j]] * tp[j];
                    S dz0 = 0, dz1 = 0, dz2 = 0, dz3 = 0;
                    for (std::uint32_t j = begin; j < end; ++j) {
                        const int k = tk[j];
                        const S dm = alpha * tp[j] * (dpvec[k] - dot);
                        gcb[k] += static_cast<double>(dm);
                        double* gw = gcw + static_cast<std::size_t>(k) * 4;
                        gw[0] += static_cast<double>(dm * zs0);
                        gw[1] += static_cast<double>(dm * zs1);
                        gw[2] += static_cast<double>(dm * zs2);
                        gw[3] += static_cast<double>(dm * zs3);
                        dz0 += dm * cw[k][0];
                        dz1 += dm * cw[k][1];
                        dz2 += dm * cw[k][2];
                        dz3 += dm * cw[k][3];
                    }
                    dzp[s] = dz0;
                    dzp[sites + s] = dz1;
                    dzp[2 * sites + s] = dz2;
                    dzp[3 * sites + s] = dz3;
                }

                // Dense pass: each kernel-weight gradient is the correlation
                // of the dz plane with the input, unit stride in x.
                const S* in = ws.oriented[o].data();
                for (int n = 0; n < 4; ++n) {
                    const S* dzn = dzp + static_cast<std::size_t>(n) * sites;
                    double bias_acc = 0.0;
                    for (std::size_t s = 0; s < sites; ++s) bias_acc += static_cast<double>(dzn[s]);
                    gkb[n] += bias_acc;
                    double* gk = gkw + static_cast<std::size_t>(n) * ksz;
                    for (int u = 0; u < kh; ++u) {
                        for (int v = 0; v < kw; ++v) {
                            double acc = 0.0;
                            for (int y = 0; y < oh; ++y) {
                                const S* dzrow = dzn + static_cast<std::size_t>(y) * ow;
                                const S* irow = in + static_cast<std::size_t>(y + u) * W + v;
                                alignas(64) S part[16] = {};
                                int x = 0;
                                for (; x + 16 <= ow; x += 16) {
                                    for (int j = 0; j < 16; ++j) part[j] += dzrow[x + j] * irow[x + j];
                                }
                                S row_acc = 0;
                                for (; x < ow; ++x) row_acc += dzrow[x] * irow[x];
                                for (int j = 0; j < 16; ++j) row_acc += part[j];
                                acc += static_cast<double>(row_acc);
                            }
                            gk[static_cast<std::size_t>(u) * kw + v] += acc;
                        }
                    }
                }
            }
        }
    }

    double example_loss_and_grad(const Plane& patch, int label, Workspace& ws, std::vector<double>& grads) const {
        forward(patch, ws, true);
        backward(label, ws, grads);
        return cross_entropy(ws.logits, label);
    }
};

bool finite_params(const NetParams& p) {
    auto flat = pack_params(p);
    for (double v : flat) {
        if (!std::isfinite(v)) return false;
    }
    return std::isfinite(p.alpha) && p.alpha > 0.0 && std::isfinite(p.input_scale);
}

}  // namespace

NetParams init_net_params(double delta, double input_scale, double alpha, std::uint64_t seed) {
    if (!(delta > 0.0) || !(input_scale > 0.0) || !(alpha > 0.0)) {
        throw std::invalid_argument("delta, input_scale and alpha must be positive");
    }
    NetParams p;
    p.bank_across = build_across_bank();
    p.bank_along = build_along_bank();
    p.codebook = build_codebook(delta * input_scale);
    Rng rng(derive_seed(seed, 0xFC));
    for (auto& w : p.fc_weights) w = rng.uniform(-0.01, 0.01);
    p.fc_biases = {0.0, 0.0};
    p.alpha = alpha;
    p.input_scale = input_scale;
    return p;
}

std::size_t param_count() { return kTotal; }

std::vector<double> pack_params(const NetParams& p) {
    std::vector<double> flat(kTotal);
    auto put_bank = [&](const ConvBank& bank, std::size_t woff, std::size_t boff, std::size_t ksz) {
        for (int n = 0; n < 4; ++n) {
            for (std::size_t i = 0; i < ksz; ++i) flat[woff + n * ksz + i] = bank.weights[static_cast<std::size_t>(n)][i];
            flat[boff + static_cast<std::size_t>(n)] = bank.biases[static_cast<std::size_t>(n)];
        }
    };
    put_bank(p.bank_across, kAcrossW, kAcrossB, 16);
    put_bank(p.bank_along, kAlongW, kAlongB, 7);
    std::copy(p.codebook.words.begin(), p.codebook.words.end(), flat.begin() + kCbW);
    std::copy(p.codebook.biases.begin(), p.codebook.biases.end(), flat.begin() + kCbB);
    std::copy(p.fc_weights.begin(), p.fc_weights.end(), flat.begin() + kFcW);
    std::copy(p.fc_biases.begin(), p.fc_biases.end(), flat.begin() + kFcB);
    return flat;
}

void unpack_params(std::span<const double> flat, NetParams& p) {
    if (flat.size() != kTotal) throw std::invalid_argument("parameter vector size mismatch");
    auto get_bank = [&](ConvBank& bank, std::size_t woff, std::size_t boff, std::size_t ksz) {
        for (int n = 0; n < 4; ++n) {
            for (std::size_t i = 0; i < ksz; ++i) bank.weights[static_cast<std::size_t>(n)][i] = flat[woff + n * ksz + i];
            bank.biases[static_cast<std::size_t>(n)] = flat[boff + static_cast<std::size_t>(n)];
        }
    };
    get_bank(p.bank_across, kAcrossW, kAcrossB, 16);
    get_bank(p.bank_along, kAlongW, kAlongB, 7);
    std::copy(flat.begin() + kCbW, flat.begin() + kCbB, p.codebook.words.begin());
    std::copy(flat.begin() + kCbB, flat.begin() + kFcW, p.codebook.biases.begin());
    std::copy(flat.begin() + kFcW, flat.begin() + kFcB, p.fc_weights.begin());
    p.fc_biases[0] = flat[kFcB];
    p.fc_biases[1] = flat[kFcB + 1];
}

const std::vector<TensorRange>& tensor_layout() {
    static const std::vector<TensorRange> layout = {
        {"bank_across.weights", kAcrossW, kAcrossB}, {"bank_across.biases", kAcrossB, kAlongW},
        {"bank_along.weights", kAlongW, kAlongB},    {"bank_along.biases", kAlongB, kCbW},
        {"codebook.words", kCbW, kCbB},              {"codebook.biases", kCbB, kFcW},
        {"fc.weights", kFcW, kFcB},                  {"fc.biases", kFcB, kTotal},
    };
    return layout;
}

std::vector<double> softmax_layer(const std::vector<double>& scores, double alpha) {
    if (scores.empty()) throw std::invalid_argument("empty score vector");
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    const double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> p(scores.size());
    double total = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        p[k] = std::exp(alpha * (scores[k] - mx));
        total += p[k];
    }
    for (double& v : p) v /= total;
    return p;
}

double cross_entropy(const std::array<double, 2>& logits, int label) {
    if (label != 0 && label != 1) throw std::invalid_argument("binary label expected");
    const double mx = std::max(logits[0], logits[1]);
    const double lse = mx + std::log(std::exp(logits[0] - mx) + std::exp(logits[1] - mx));
    return lse - logits[static_cast<std::size_t>(label)];
}

std::array<double, 2> forward_train(const Plane& patch, const NetParams& params, ForwardCache* cache) {
    if (!finite_params(params)) throw std::invalid_argument("non-finite network parameters");
    Engine<double> engine(params);
    Engine<double>::Workspace ws;
    engine.forward(patch, ws, false);
    if (cache) {
        cache->patch = patch;
        cache->feature = ws.feature;
        cache->logits = ws.logits;
        cache->params_revision = params.revision;
    }
    return ws.logits;
}

Feature forward_soft_feature(const Plane& patch, const NetParams& params, double alpha_override) {
    Engine<double> engine(params, alpha_override);
    Engine<double>::Workspace ws;
    engine.forward(patch, ws, false);
    return ws.feature;
}

std::vector<double> backward(const NetParams& params, const ForwardCache& cache, int label) {
    if (cache.params_revision != params.revision) {
        throw std::runtime_error("stale forward cache: parameters have changed");
    }
    Engine<double> engine(params);
    Engine<double>::Workspace ws;
    std::vector<double> grads(kTotal, 0.0);
    engine.example_loss_and_grad(cache.patch, label, ws, grads);
    return grads;
}

void adam_step(NetParams& params, const std::vector<double>& grads, AdamState& state, const TrainConfig& cfg) {
    if (grads.size() != kTotal) throw std::invalid_argument("gradient vector size mismatch");
    if (state.first_moment.empty()) {
        state.first_moment.assign(kTotal, 0.0);
        state.second_moment.assign(kTotal, 0.0);
    }
    if (state.first_moment.size() != kTotal || state.second_moment.size() != kTotal) {
        throw std::invalid_argument("optimizer state size mismatch");
    }
    std::vector<bool> frozen(kTotal, false);
    auto freeze_range = [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) frozen[i] = true;
    };
    if (cfg.freeze_banks) freeze_range(kAcrossW, kCbW);
    if (cfg.freeze_codebook) freeze_range(kCbW, kFcW);
    if (cfg.freeze_fc) freeze_range(kFcW, kTotal);

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
    auto flat = pack_params(params);
    for (std::size_t i = 0; i < kTotal; ++i) {
        if (frozen[i]) continue;
        const double g = grads[i] + cfg.weight_decay * flat[i];
        state.first_moment[i] = cfg.adam_beta1 * state.first_moment[i] + (1.0 - cfg.adam_beta1) * g;
        state.second_moment[i] = cfg.adam_beta2 * state.second_moment[i] + (1.0 - cfg.adam_beta2) * g * g;
        const double mhat = state.first_moment[i] / bc1;
        const double vhat = state.second_moment[i] / bc2;
        flat[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
    }
    unpack_params(flat, params);
    params.revision += 1;
}

double loss_and_grad(const Plane& patch, int label, const NetParams& params, std::vector<double>& grads) {
    const Engine<float> engine(params);
    thread_local Engine<float>::Workspace ws;
    grads.assign(kTotal, 0.0);
    return engine.example_loss_and_grad(patch, label, ws, grads);
}

std::array<double, 2> predict_logits(const Plane& patch, const NetParams& params) {
    const Engine<float> engine(params);
    thread_local Engine<float>::Workspace ws;
    engine.forward(patch, ws, false);
    return ws.logits;
}

TrainResult train(const PatchSource& data, const TrainConfig& cfg, const NetParams& init) {
    const std::size_t n = data.size();
    if (n == 0) throw std::invalid_argument("empty training set");
    for (std::size_t i = 0; i < n; ++i) {
        const int label = data.label(i);
        if (label != 0 && label != 1) throw std::invalid_argument("non-binary training label");
    }
    if (cfg.batch_size < 1 || cfg.epochs < 1) throw std::invalid_argument("invalid training configuration");

    TrainResult result;
    result.params = init;
    AdamState state;
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::vector<std::vector<double>> slot_grads(batch);
    std::vector<double> slot_loss(batch, 0.0);
    std::vector<double> mean_grads(kTotal);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, 0x1000u + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t count = std::min(batch, n - start);
            const Engine<float> engine(result.params);
            parallel_for(count, [&](std::size_t slot) {
                thread_local Engine<float>::Workspace ws;
                slot_grads[slot].assign(kTotal, 0.0);
                const std::size_t idx = order[start + slot];
                slot_loss[slot] =
                    engine.example_loss_and_grad(data.patch(idx), data.label(idx), ws, slot_grads[slot]);
            });
            std::fill(mean_grads.begin(), mean_grads.end(), 0.0);
            for (std::size_t slot = 0; slot < count; ++slot) {  // fixed reduction order
                epoch_loss += slot_loss[slot];
                for (std::size_t i = 0; i < kTotal; ++i) mean_grads[i] += slot_grads[slot][i];
            }
            const double inv = 1.0 / static_cast<double>(count);
            for (double& g : mean_grads) g *= inv;
            adam_step(result.params, mean_grads, state, cfg);
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(n));
    }
    return result;
}

namespace {

nlohmann::json bank_json(const ConvBank& bank) {
    return {{"kernel_h", bank.kernel_h}, {"kernel_w", bank.kernel_w}, {"weights", bank.weights}, {"biases", bank.biases}};
}

ConvBank bank_from(const nlohmann::json& j) {
    ConvBank bank;
    bank.kernel_h = j.at("kernel_h").get<int>();
    bank.kernel_w = j.at("kernel_w").get<int>();
    bank.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    bank.biases = j.at("biases").get<std::vector<double>>();
    return bank;
}

}  // namespace

void save_net(const NetParams& params, const TrainMeta& meta, const std::string& path) {
    nlohmann::json j{
        {"magic", "srmnet-model"},
        {"version", 1},
        {"alpha", params.alpha},
        {"input_scale", params.input_scale},
        {"layer_order", {"conv_banks", "matching_scores", "softmax", "avg_pool", "fc"}},
        {"bank_along", bank_json(params.bank_along)},
        {"bank_across", bank_json(params.bank_across)},
        {"codebook", {{"words", params.codebook.words}, {"biases", params.codebook.biases}}},
        {"fc_weights", params.fc_weights},
        {"fc_biases", params.fc_biases},
        {"training",
         {{"epochs_run", meta.epochs_run},
          {"final_loss", meta.final_loss},
          {"init_delta", meta.init_delta},
          {"learning_rate", meta.cfg.learning_rate},
          {"weight_decay", meta.cfg.weight_decay},
          {"batch_size", meta.cfg.batch_size},
          {"seed", meta.cfg.seed}}},
    };
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << j.dump(2) << "\n";
}

NetParams load_net(const std::string& path, TrainMeta* meta) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("magic", "") != std::string("srmnet-model")) throw std::runtime_error("not a model file: " + path);
    NetParams p;
    p.alpha = j.at("alpha").get<double>();
    p.input_scale = j.at("input_scale").get<double>();
    p.bank_along = bank_from(j.at("bank_along"));
    p.bank_across = bank_from(j.at("bank_across"));
    p.codebook.words = j.at("codebook").at("words").get<std::vector<double>>();
    p.codebook.biases = j.at("codebook").at("biases").get<std::vector<double>>();
    const auto fcw = j.at("fc_weights").get<std::vector<double>>();
    const auto fcb = j.at("fc_biases").get<std::vector<double>>();
    if (fcw.size() != p.fc_weights.size() || fcb.size() != 2) throw std::runtime_error("model file: fc shape mismatch");
    std::copy(fcw.begin(), fcw.end(), p.fc_weights.begin());
    p.fc_biases = {fcb[0], fcb[1]};
    if (meta) {
        const auto& t = j.at("training");
        meta->epochs_run = t.value("epochs_run", 0);
        meta->final_loss = t.value("final_loss", 0.0);
        meta->init_delta = t.value("init_delta", 0.0);
        meta->cfg.learning_rate = t.value("learning_rate", 0.0);
        meta->cfg.weight_decay = t.value("weight_decay", 0.0);
        meta->cfg.batch_size = t.value("batch_size", 0);
        meta->cfg.seed = t.value("seed", static_cast<std::uint64_t>(0));
    }
    return p;
}

}  // namespace srmnet
