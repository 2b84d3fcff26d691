#pragma once

// Low-level numeric kernels behind the tensor layers.
//
// Two implementations live side by side:
//   kernels::serial  straightforward loops, kept as the reference for tests
//                    and as the baseline in bench/.
//   kernels::omp     packed/blocked GEMM and OpenMP-parallel loops used by
//                    the network.
//
// Every parallel loop partitions OUTPUT elements only; each output is reduced
// by a single thread in a fixed order, so results do not depend on the thread
// count.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

namespace ausc::kernels {

enum class Trans { No, Yes };

namespace detail {
template <typename T>
inline T load(const T* m, std::size_t ld, Trans t, std::size_t r, std::size_t c) {
    return t == Trans::No ? m[r * ld + c] : m[c * ld + r];
}
}  // namespace detail

/// Same-padding split for a window of extent `k` moving with `stride` over
/// `n` cells producing `out` outputs. The odd cell goes after (bottom/right).
struct Padding {
    std::size_t before = 0;
    std::size_t after = 0;
};

inline Padding same_padding(std::size_t n, std::size_t k, std::size_t stride) {
    const std::size_t out = (n + stride - 1) / stride;
    const std::size_t need = (out - 1) * stride + k;
    const std::size_t total = need > n ? need - n : 0;
    return {total / 2, total - total / 2};
}

// ---------------------------------------------------------------------------
namespace serial {

/// C = alpha * op(A) * op(B) + beta * C, row-major, naive triple loop.
template <typename T>
void gemm(Trans ta, Trans tb, std::size_t M, std::size_t N, std::size_t K, T alpha, const T* A,
          std::size_t lda, const T* B, std::size_t ldb, T beta, T* C, std::size_t ldc) {
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            T acc{0};
            for (std::size_t k = 0; k < K; ++k) {
                acc += detail::load(A, lda, ta, i, k) * detail::load(B, ldb, tb, k, j);
            }
            C[i * ldc + j] = alpha * acc + (beta == T{0} ? T{0} : beta * C[i * ldc + j]);
        }
    }
}

/// Direct same-padded cross-correlation.
/// in: cin x h x w, k: cout x cin x kh x kw, bias: cout, out: cout x h x w.
template <typename T>
void conv2d_direct(const T* in, std::size_t cin, std::size_t h, std::size_t w, const T* k,
                   const T* bias, std::size_t cout, std::size_t kh, std::size_t kw, T* out) {
    const auto ph = same_padding(h, kh, 1).before;
    const auto pw = same_padding(w, kw, 1).before;
    for (std::size_t co = 0; co < cout; ++co) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                T acc = bias ? bias[co] : T{0};
                for (std::size_t ci = 0; ci < cin; ++ci) {
                    for (std::size_t dy = 0; dy < kh; ++dy) {
                        const auto iy = static_cast<std::ptrdiff_t>(y + dy) - static_cast<std::ptrdiff_t>(ph);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t dx = 0; dx < kw; ++dx) {
                            const auto ix = static_cast<std::ptrdiff_t>(x + dx) - static_cast<std::ptrdiff_t>(pw);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            acc += in[(ci * h + iy) * w + ix] * k[((co * cin + ci) * kh + dy) * kw + dx];
                        }
                    }
                }
                out[(co * h + y) * w + x] = acc;
            }
        }
    }
}

/// Same-padded max pooling; padding cells act as -inf. `argmax` receives the
/// flat input index of each selected cell (ties -> smallest flat index).
template <typename T>
void maxpool(const T* in, std::size_t c, std::size_t h, std::size_t w, std::size_t ph,
             std::size_t pw, std::size_t sh, std::size_t sw, T* out, std::size_t* argmax) {
    const std::size_t oh = (h + sh - 1) / sh, ow = (w + sw - 1) / sw;
    const auto pt = same_padding(h, ph, sh).before;
    const auto pl = same_padding(w, pw, sw).before;
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                T best = -std::numeric_limits<T>::infinity();
                std::size_t best_idx = 0;
                bool found = false;
                for (std::size_t dy = 0; dy < ph; ++dy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * sh + dy) - static_cast<std::ptrdiff_t>(pt);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t dx = 0; dx < pw; ++dx) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * sw + dx) - static_cast<std::ptrdiff_t>(pl);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        const std::size_t idx = (ch * h + iy) * w + ix;
                        if (!found || in[idx] > best || (in[idx] == best && idx < best_idx)) {
                            best = in[idx];
                            best_idx = idx;
                            found = true;
                        }
                    }
                }
                out[(ch * oh + oy) * ow + ox] = best;
                argmax[(ch * oh + oy) * ow + ox] = best_idx;
            }
        }
    }
}

}  // namespace serial

// ---------------------------------------------------------------------------
namespace omp {

namespace detail {

// Register tile: MR rows by NR columns of C, NR = two 512-bit vectors.
template <typename T>
struct Tile {
    static constexpr std::size_t MR = 6;
    static constexpr std::size_t NR = 128 / sizeof(T);
};

constexpr std::size_t KC = 256;
constexpr std::size_t MC = 96;
constexpr std::size_t NC = 2048;

template <typename T>
void pack_a(Trans ta, const T* A, std::size_t lda, std::size_t i0, std::size_t mc, std::size_t k0,
            std::size_t kc, T alpha, T* dst) {
    constexpr std::size_t MR = Tile<T>::MR;
    for (std::size_t p = 0; p < mc; p += MR) {
        const std::size_t rows = std::min(MR, mc - p);
        for (std::size_t k = 0; k < kc; ++k) {
            for (std::size_t r = 0; r < MR; ++r) {
                dst[r] = r < rows ? alpha * ausc::kernels::detail::load(A, lda, ta, i0 + p + r, k0 + k) : T{0};
            }
            dst += MR;
        }
    }
}

template <typename T>
void pack_b(Trans tb, const T* B, std::size_t ldb, std::size_t k0, std::size_t kc, std::size_t j0,
            std::size_t nc, T* dst) {
    constexpr std::size_t NR = Tile<T>::NR;
    for (std::size_t p = 0; p < nc; p += NR) {
        const std::size_t cols = std::min(NR, nc - p);
        for (std::size_t k = 0; k < kc; ++k) {
            if (tb == Trans::No && cols == NR) {
                const T* src = B + (k0 + k) * ldb + j0 + p;
                std::copy(src, src + NR, dst);
            } else {
                for (std::size_t c = 0; c < NR; ++c) {
                    dst[c] = c < cols ? ausc::kernels::detail::load(B, ldb, tb, k0 + k, j0 + p + c) : T{0};
                }
            }
            dst += NR;
        }
    }
}

template <typename T>
void micro_kernel(std::size_t kc, const T* __restrict a, const T* __restrict b, T* C,
                  std::size_t ldc, std::size_t rows, std::size_t cols) {
    constexpr std::size_t MR = Tile<T>::MR;
    constexpr std::size_t NR = Tile<T>::NR;
    alignas(64) T acc[MR][NR] = {};
    for (std::size_t k = 0; k < kc; ++k) {
#pragma GCC unroll 6
        for (std::size_t r = 0; r < MR; ++r) {
            const T av = a[r];
#pragma omp simd
            for (std::size_t c = 0; c < NR; ++c) acc[r][c] += av * b[c];
        }
        a += MR;
        b += NR;
    }
    for (std::size_t r = 0; r < rows; ++r) {
        T* crow = C + r * ldc;
        for (std::size_t c = 0; c < cols; ++c) crow[c] += acc[r][c];
    }
}

}  // namespace detail

/// C = alpha * op(A) * op(B) + beta * C, row-major. Blocked and packed; the
/// reduction order over K is fixed by the blocking, never by scheduling.
template <typename T>
void gemm(Trans ta, Trans tb, std::size_t M, std::size_t N, std::size_t K, T alpha, const T* A,
          std::size_t lda, const T* B, std::size_t ldb, T beta, T* C, std::size_t ldc) {
    using detail::KC;
    using detail::MC;
    using detail::NC;
    constexpr std::size_t MR = detail::Tile<T>::MR;
    constexpr std::size_t NR = detail::Tile<T>::NR;

    if (M == 0 || N == 0) return;
    for (std::size_t i = 0; i < M; ++i) {
        T* row = C + i * ldc;
        if (beta == T{0}) std::fill(row, row + N, T{0});
        else if (beta != T{1}) for (std::size_t j = 0; j < N; ++j) row[j] *= beta;
    }
    if (K == 0 || alpha == T{0}) return;

    std::vector<T> bpack(((std::min(NC, N) + NR - 1) / NR) * NR * KC);
    for (std::size_t j0 = 0; j0 < N; j0 += NC) {
        const std::size_t nc = std::min(NC, N - j0);
        const std::size_t npanels = (nc + NR - 1) / NR;
        for (std::size_t k0 = 0; k0 < K; k0 += KC) {
            const std::size_t kc = std::min(KC, K - k0);
            detail::pack_b(tb, B, ldb, k0, kc, j0, nc, bpack.data());
            const std::size_t mblocks = (M + MC - 1) / MC;
#pragma omp parallel
            {
                std::vector<T> apack(((MC + MR - 1) / MR) * MR * kc);
#pragma omp for schedule(static)
                for (std::size_t mb = 0; mb < mblocks; ++mb) {
                    const std::size_t i0 = mb * MC;
                    const std::size_t mc = std::min(MC, M - i0);
                    detail::pack_a(ta, A, lda, i0, mc, k0, kc, alpha, apack.data());
                    for (std::size_t jp = 0; jp < npanels; ++jp) {
                        const std::size_t cols = std::min(NR, nc - jp * NR);
                        for (std::size_t ip = 0; ip < mc; ip += MR) {
                            detail::micro_kernel(kc, apack.data() + ip * kc, bpack.data() + jp * NR * kc,
                                                 C + (i0 + ip) * ldc + j0 + jp * NR, ldc,
                                                 std::min(MR, mc - ip), cols);
                        }
                    }
                }
            }
        }
    }
}

/// Unfolds a cin x h x w image into a (cin*kh*kw) x (h*w) matrix for a
/// same-padded stride-1 convolution.
template <typename T>
void im2col(const T* in, std::size_t cin, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, T* col) {
    const auto ph = same_padding(h, kh, 1).before;
    const auto pw = same_padding(w, kw, 1).before;
    const std::size_t rows = cin * kh * kw;
#pragma omp parallel for schedule(static)
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t ci = r / (kh * kw), dy = (r / kw) % kh, dx = r % kw;
        T* dst = col + r * h * w;
        for (std::size_t y = 0; y < h; ++y) {
            const auto iy = static_cast<std::ptrdiff_t>(y + dy) - static_cast<std::ptrdiff_t>(ph);
            T* drow = dst + y * w;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                std::fill(drow, drow + w, T{0});
                continue;
            }
            const T* srow = in + (ci * h + iy) * w;
            for (std::size_t x = 0; x < w; ++x) {
                const auto ix = static_cast<std::ptrdiff_t>(x + dx) - static_cast<std::ptrdiff_t>(pw);
                drow[x] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? T{0} : srow[ix];
            }
        }
    }
}

/// Adjoint of im2col: scatters column gradients back onto the image grid.
/// Each input channel is accumulated by one thread in a fixed (dy, dx) order.
template <typename T>
void col2im(const T* col, std::size_t cin, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, T* in_grad) {
    const auto ph = same_padding(h, kh, 1).before;
    const auto pw = same_padding(w, kw, 1).before;
#pragma omp parallel for schedule(static)
    for (std::size_t ci = 0; ci < cin; ++ci) {
        T* dst = in_grad + ci * h * w;
        std::fill(dst, dst + h * w, T{0});
        for (std::size_t dy = 0; dy < kh; ++dy) {
            for (std::size_t dx = 0; dx < kw; ++dx) {
                const T* src = col + ((ci * kh + dy) * kw + dx) * h * w;
                for (std::size_t y = 0; y < h; ++y) {
                    const auto iy = static_cast<std::ptrdiff_t>(y + dy) - static_cast<std::ptrdiff_t>(ph);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t x = 0; x < w; ++x) {
                        const auto ix = static_cast<std::ptrdiff_t>(x + dx) - static_cast<std::ptrdiff_t>(pw);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        dst[iy * w + ix] += src[y * w + x];
                    }
                }
            }
        }
    }
}

/// Parallel same-padded max pooling, identical semantics to serial::maxpool.
template <typename T>
void maxpool(const T* in, std::size_t c, std::size_t h, std::size_t w, std::size_t ph,
             std::size_t pw, std::size_t sh, std::size_t sw, T* out, std::size_t* argmax) {
#pragma omp parallel for schedule(static)
    for (std::size_t ch = 0; ch < c; ++ch) {
        serial::maxpool(in + ch * h * w, 1, h, w, ph, pw, sh, sw,
                        out + ch * ((h + sh - 1) / sh) * ((w + sw - 1) / sw),
                        argmax + ch * ((h + sh - 1) / sh) * ((w + sw - 1) / sw));
        // serial::maxpool indexes relative to its own channel base.
        const std::size_t n = ((h + sh - 1) / sh) * ((w + sw - 1) / sw);
        std::size_t* am = argmax + ch * n;
        for (std::size_t i = 0; i < n; ++i) am[i] += ch * h * w;
    }
}

}  // namespace omp

}  // namespace ausc::kernels
