#pragma once

#include <cstddef>
#include <cstdint>

namespace adnet::kernels {

// 3x3 convolution, stride 1, zero padding 1 (output spatial size == input).
// All kernels are deterministic: the floating-point reduction order per
// output element is fixed at (ci, kh, kw) with fused multiply-add, so the
// result is reproducible and matches a straight quadruple-loop computing the
// same fma chain.

// pad: [N,C,H+2,W+2] zero border copy of in: [N,C,H,W].
template <typename Real>
void pad3x3(const Real* in, std::size_t n, std::size_t c, std::size_t h, std::size_t w,
            Real* pad);

// out[N,Cout,H,W] from pad[N,Cin,H+2,W+2], ker[Cout,Cin,3,3], bias[Cout].
template <typename Real>
void conv3x3_forward(const Real* pad, std::size_t n, std::size_t cin, std::size_t h,
                     std::size_t w, const Real* ker, const Real* bias, std::size_t cout,
                     Real* out);

// Accumulates (+=) into gin[N,Cin,H,W], gker[Cout,Cin,3,3], gbias[Cout].
template <typename Real>
void conv3x3_backward(const Real* pad, std::size_t n, std::size_t cin, std::size_t h,
                      std::size_t w, const Real* ker, std::size_t cout, const Real* gout,
                      Real* gin, Real* gker, Real* gbias);

// 2x2 max pooling, stride 2, floor semantics (odd trailing row/col dropped).
// argmax records the flat input index of each window maximum; ties go to the
// first occurrence in row-major window order.
template <typename Real>
void maxpool2_forward(const Real* in, std::size_t n, std::size_t c, std::size_t h,
                      std::size_t w, Real* out, std::uint32_t* argmax);

template <typename Real>
void maxpool2_backward(const std::uint32_t* argmax, std::size_t out_numel,
                       const Real* gout, Real* gin);

// Fully connected: out[N,Dout] = in[N,Din] * w[Din,Dout] + b.
template <typename Real>
void fc_forward(const Real* in, std::size_t n, std::size_t din, const Real* w,
                const Real* b, std::size_t dout, Real* out);

// Accumulates (+=) into gin[N,Din], gw[Din,Dout], gb[Dout].
template <typename Real>
void fc_backward(const Real* in, std::size_t n, std::size_t din, const Real* w,
                 std::size_t dout, const Real* gout, Real* gin, Real* gw, Real* gb);

}  // namespace adnet::kernels
