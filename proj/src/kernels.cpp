#include "adnet/kernels.hpp"

#include <cmath>
#include <cstring>
#include <vector>

namespace adnet::kernels {
namespace {

// Conv microkernel: a tile of COB output channels by T output columns, all
// accumulated in registers. Every output element sees the reduction sequence
// (ci, kh, kw) as one fma chain; COB and T only add independent chains.
template <typename Real, int COB, int T>
inline void conv_tile(const Real* in_plane, std::size_t hp_stride, std::size_t wp,
                      const Real* ker, std::size_t cin, std::size_t kplane_stride,
                      const Real* bias, std::size_t h, std::size_t x0, Real* out,
                      std::size_t out_plane_stride, std::size_t wout) {
  Real acc[COB][T] = {};
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const Real* base = in_plane + (ci * hp_stride + h) * wp + x0;
    const Real* k = ker + ci * 9;
    for (int kh = 0; kh < 3; ++kh) {
      const Real* row = base + static_cast<std::size_t>(kh) * wp;
      for (int kw = 0; kw < 3; ++kw) {
        const Real* src = row + kw;
        for (int c = 0; c < COB; ++c) {
          const Real wv = k[static_cast<std::size_t>(c) * kplane_stride + kh * 3 + kw];
          for (int t = 0; t < T; ++t) acc[c][t] = std::fma(wv, src[t], acc[c][t]);
        }
      }
    }
  }
  for (int c = 0; c < COB; ++c) {
    Real* dst = out + static_cast<std::size_t>(c) * out_plane_stride + h * wout + x0;
    for (int t = 0; t < T; ++t) dst[t] = acc[c][t] + bias[c];
  }
}

template <typename Real, int COB>
inline void conv_rows(const Real* in_plane, std::size_t hp_stride, std::size_t wp,
                      const Real* ker, std::size_t cin, std::size_t kplane_stride,
                      const Real* bias, Real* out, std::size_t out_plane_stride,
                      std::size_t hout, std::size_t wout) {
  for (std::size_t h = 0; h < hout; ++h) {
    std::size_t x = 0;
    for (; x + 16 <= wout; x += 16)
      conv_tile<Real, COB, 16>(in_plane, hp_stride, wp, ker, cin, kplane_stride, bias, h,
                               x, out, out_plane_stride, wout);
    for (; x + 8 <= wout; x += 8)
      conv_tile<Real, COB, 8>(in_plane, hp_stride, wp, ker, cin, kplane_stride, bias, h,
                              x, out, out_plane_stride, wout);
    for (; x + 4 <= wout; x += 4)
      conv_tile<Real, COB, 4>(in_plane, hp_stride, wp, ker, cin, kplane_stride, bias, h,
                              x, out, out_plane_stride, wout);
    for (; x < wout; ++x)
      conv_tile<Real, COB, 1>(in_plane, hp_stride, wp, ker, cin, kplane_stride, bias, h,
                              x, out, out_plane_stride, wout);
  }
}

// Multi-lane dot product with a fixed combine order: deterministic for a
// given length, vectorizable because the lanes are independent chains.
template <typename Real>
inline Real lane_dot(const Real* a, const Real* b, std::size_t len) {
  constexpr std::size_t L = 8;
  Real lanes[L] = {};
  std::size_t x = 0;
  for (; x + L <= len; x += L)
    for (std::size_t l = 0; l < L; ++l) lanes[l] = std::fma(a[x + l], b[x + l], lanes[l]);
  Real tail{};
  for (; x < len; ++x) tail = std::fma(a[x], b[x], tail);
  Real s{};
  for (std::size_t l = 0; l < L; ++l) s += lanes[l];
  return s + tail;
}

template <typename Real>
inline void axpy(Real* dst, const Real* src, Real a, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i) dst[i] = std::fma(a, src[i], dst[i]);
}

}  // namespace

template <typename Real>
void pad3x3(const Real* in, std::size_t n, std::size_t c, std::size_t h, std::size_t w,
            Real* pad) {
  const std::size_t hp = h + 2, wp = w + 2;
  std::memset(pad, 0, n * c * hp * wp * sizeof(Real));
  for (std::size_t i = 0; i < n * c; ++i) {
    const Real* src = in + i * h * w;
    Real* dst = pad + i * hp * wp + wp + 1;  // skip top border row and left column
    for (std::size_t y = 0; y < h; ++y)
      std::memcpy(dst + y * wp, src + y * w, w * sizeof(Real));
  }
}

template <typename Real>
void conv3x3_forward(const Real* pad, std::size_t n, std::size_t cin, std::size_t h,
                     std::size_t w, const Real* ker, const Real* bias, std::size_t cout,
                     Real* out) {
  const std::size_t wp = w + 2;
  const std::size_t kplane = cin * 9;
  for (std::size_t b = 0; b < n; ++b) {
    const Real* in_plane = pad + b * cin * (h + 2) * wp;
    Real* out_batch = out + b * cout * h * w;
    std::size_t co = 0;
    for (; co + 4 <= cout; co += 4)
      conv_rows<Real, 4>(in_plane, h + 2, wp, ker + co * kplane, cin, kplane, bias + co,
                         out_batch + co * h * w, h * w, h, w);
    for (; co < cout; ++co)
      conv_rows<Real, 1>(in_plane, h + 2, wp, ker + co * kplane, cin, kplane, bias + co,
                         out_batch + co * h * w, h * w, h, w);
  }
}

template <typename Real>
void conv3x3_backward(const Real* pad, std::size_t n, std::size_t cin, std::size_t h,
                      std::size_t w, const Real* ker, std::size_t cout, const Real* gout,
                      Real* gin, Real* gker, Real* gbias) {
  const std::size_t hp = h + 2, wp = w + 2;
  std::vector<Real> gpad(cin * hp * wp);
  for (std::size_t b = 0; b < n; ++b) {
    const Real* pad_b = pad + b * cin * hp * wp;
    const Real* gout_b = gout + b * cout * h * w;
    std::fill(gpad.begin(), gpad.end(), Real(0));
    for (std::size_t co = 0; co < cout; ++co) {
      const Real* gplane = gout_b + co * h * w;
      const Real* kc = ker + co * cin * 9;
      Real* gkc = gker + co * cin * 9;
      Real gb{};
      for (std::size_t y = 0; y < h; ++y) {
        const Real* grow = gplane + y * w;
        for (std::size_t x = 0; x < w; ++x) gb += grow[x];
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const Real* prow = pad_b + (ci * hp + y) * wp;
          Real* gprow = gpad.data() + (ci * hp + y) * wp;
          const Real* k = kc + ci * 9;
          Real* gk = gkc + ci * 9;
          for (int kh = 0; kh < 3; ++kh) {
            const Real* pr = prow + static_cast<std::size_t>(kh) * wp;
            Real* gpr = gprow + static_cast<std::size_t>(kh) * wp;
            for (int kw = 0; kw < 3; ++kw) {
              gk[kh * 3 + kw] += lane_dot(grow, pr + kw, w);
              axpy(gpr + kw, grow, k[kh * 3 + kw], w);
            }
          }
        }
      }
      gbias[co] += gb;
    }
    // crop the padded gradient back onto gin
    Real* gin_b = gin + b * cin * h * w;
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t y = 0; y < h; ++y) {
        const Real* src = gpad.data() + (ci * hp + y + 1) * wp + 1;
        Real* dst = gin_b + (ci * h + y) * w;
        for (std::size_t x = 0; x < w; ++x) dst[x] += src[x];
      }
  }
}

template <typename Real>
void maxpool2_forward(const Real* in, std::size_t n, std::size_t c, std::size_t h,
                      std::size_t w, Real* out, std::uint32_t* argmax) {
  const std::size_t ho = h / 2, wo = w / 2;
  for (std::size_t i = 0; i < n * c; ++i) {
    const Real* plane = in + i * h * w;
    Real* oplane = out + i * ho * wo;
    std::uint32_t* aplane = argmax + i * ho * wo;
    const std::uint32_t plane_base = static_cast<std::uint32_t>(i * h * w);
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t x = 0; x < wo; ++x) {
        const std::size_t i00 = (2 * y) * w + 2 * x;
        std::size_t best = i00;
        Real bv = plane[i00];
        const std::size_t cand[3] = {i00 + 1, i00 + w, i00 + w + 1};
        for (std::size_t k = 0; k < 3; ++k)
          if (plane[cand[k]] > bv) {
            bv = plane[cand[k]];
            best = cand[k];
          }
        oplane[y * wo + x] = bv;
        aplane[y * wo + x] = plane_base + static_cast<std::uint32_t>(best);
      }
  }
}

template <typename Real>
void maxpool2_backward(const std::uint32_t* argmax, std::size_t out_numel,
                       const Real* gout, Real* gin) {
  for (std::size_t i = 0; i < out_numel; ++i) gin[argmax[i]] += gout[i];
}

template <typename Real>
void fc_forward(const Real* in, std::size_t n, std::size_t din, const Real* w,
                const Real* b, std::size_t dout, Real* out) {
  for (std::size_t i = 0; i < n; ++i) {
    Real* orow = out + i * dout;
    std::memcpy(orow, b, dout * sizeof(Real));
    const Real* irow = in + i * din;
    for (std::size_t d = 0; d < din; ++d) axpy(orow, w + d * dout, irow[d], dout);
  }
}

template <typename Real>
void fc_backward(const Real* in, std::size_t n, std::size_t din, const Real* w,
                 std::size_t dout, const Real* gout, Real* gin, Real* gw, Real* gb) {
  for (std::size_t i = 0; i < n; ++i) {
    const Real* grow = gout + i * dout;
    const Real* irow = in + i * din;
    Real* girow = gin + i * din;
    for (std::size_t o = 0; o < dout; ++o) gb[o] += grow[o];
    for (std::size_t d = 0; d < din; ++d) {
      axpy(gw + d * dout, grow, irow[d], dout);
      girow[d] += lane_dot(grow, w + d * dout, dout);
    }
  }
}

#define ADNET_INSTANTIATE(Real)                                                          \
  template void pad3x3<Real>(const Real*, std::size_t, std::size_t, std::size_t,         \
                             std::size_t, Real*);                                        \
  template void conv3x3_forward<Real>(const Real*, std::size_t, std::size_t,             \
                                      std::size_t, std::size_t, const Real*,             \
                                      const Real*, std::size_t, Real*);                  \
  template void conv3x3_backward<Real>(const Real*, std::size_t, std::size_t,            \
                                       std::size_t, std::size_t, const Real*,            \
                                       std::size_t, const Real*, Real*, Real*, Real*);   \
  template void maxpool2_forward<Real>(const Real*, std::size_t, std::size_t,            \
                                       std::size_t, std::size_t, Real*, std::uint32_t*); \
  template void maxpool2_backward<Real>(const std::uint32_t*, std::size_t, const Real*,  \
                                        Real*);                                          \
  template void fc_forward<Real>(const Real*, std::size_t, std::size_t, const Real*,     \
                                 const Real*, std::size_t, Real*);                       \
  template void fc_backward<Real>(const Real*, std::size_t, std::size_t, const Real*,    \
                                  std::size_t, const Real*, Real*, Real*, Real*);

ADNET_INSTANTIATE(double)
ADNET_INSTANTIATE(float)
#undef ADNET_INSTANTIATE

}  // namespace adnet::kernels
