#pragma once

#include <cstddef>

// Compute kernels behind the network code. Each kernel exists twice: an
// OpenMP-parallel version used everywhere, and a plain serial reference the
// tests diff against (bench/ times both). Parallel loops own disjoint output
// ranges, so results are bitwise identical for any thread count.

namespace autolap::kernels {

// Grain below which the parallel versions do not spawn a team.
inline constexpr size_t kParallelGrain = 16 * 1024;

// C[m,n] = A[m,k] * B[k,n]
template <class S>
void matmul(const S* a, const S* b, S* c, int m, int k, int n);
template <class S>
void matmul_serial(const S* a, const S* b, S* c, int m, int k, int n);

// C[m,n] = A[k,m]^T * B[k,n]
template <class S>
void matmul_tn(const S* a, const S* b, S* c, int m, int k, int n);
template <class S>
void matmul_tn_serial(const S* a, const S* b, S* c, int m, int k, int n);

// C[m,n] = A[m,k] * B[n,k]^T
template <class S>
void matmul_nt(const S* a, const S* b, S* c, int m, int k, int n);
template <class S>
void matmul_nt_serial(const S* a, const S* b, S* c, int m, int k, int n);

// x: [n, cin, h, w], w: [cout, cin, kh, kw], y: [n, cout, oh, ow]
struct ConvDims {
    int n, cin, h, w;
    int cout, kh, kw;
    int stride, pad;
    int oh() const { return (h + 2 * pad - kh) / stride + 1; }
    int ow() const { return (w + 2 * pad - kw) / stride + 1; }
};

template <class S>
void conv2d_forward(const S* x, const S* w, const S* bias, S* y, const ConvDims& d);
template <class S>
void conv2d_forward_serial(const S* x, const S* w, const S* bias, S* y, const ConvDims& d);

// dy: [n, cout, oh, ow]; outputs are overwritten, not accumulated.
template <class S>
void conv2d_backward(const S* x, const S* w, const S* dy, S* dx, S* dw, S* db,
                     const ConvDims& d);
template <class S>
void conv2d_backward_serial(const S* x, const S* w, const S* dy, S* dx, S* dw, S* db,
                            const ConvDims& d);

extern template void matmul<float>(const float*, const float*, float*, int, int, int);
extern template void matmul<double>(const double*, const double*, double*, int, int, int);
extern template void matmul_serial<float>(const float*, const float*, float*, int, int, int);
extern template void matmul_serial<double>(const double*, const double*, double*, int, int, int);
extern template void matmul_tn<float>(const float*, const float*, float*, int, int, int);
extern template void matmul_tn<double>(const double*, const double*, double*, int, int, int);
extern template void matmul_tn_serial<float>(const float*, const float*, float*, int, int, int);
extern template void matmul_tn_serial<double>(const double*, const double*, double*, int, int, int);
extern template void matmul_nt<float>(const float*, const float*, float*, int, int, int);
extern template void matmul_nt<double>(const double*, const double*, double*, int, int, int);
extern template void matmul_nt_serial<float>(const float*, const float*, float*, int, int, int);
extern template void matmul_nt_serial<double>(const double*, const double*, double*, int, int, int);
extern template void conv2d_forward<float>(const float*, const float*, const float*, float*, const ConvDims&);
extern template void conv2d_forward<double>(const double*, const double*, const double*, double*, const ConvDims&);
extern template void conv2d_forward_serial<float>(const float*, const float*, const float*, float*, const ConvDims&);
extern template void conv2d_forward_serial<double>(const double*, const double*, const double*, double*, const ConvDims&);
extern template void conv2d_backward<float>(const float*, const float*, const float*, float*, float*, float*, const ConvDims&);
extern template void conv2d_backward<double>(const double*, const double*, const double*, double*, double*, double*, const ConvDims&);
extern template void conv2d_backward_serial<float>(const float*, const float*, const float*, float*, float*, float*, const ConvDims&);
extern template void conv2d_backward_serial<double>(const double*, const double*, const double*, double*, double*, double*, const ConvDims&);

}  // namespace autolap::kernels
