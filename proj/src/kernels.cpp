#include "autolap/kernels.hpp"

#include <cstring>

namespace autolap::kernels {

// ---------------------------------------------------------------- matmul ---

template <class S>
void matmul_serial(const S* a, const S* b, S* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        S* crow = c + (size_t)i * n;
        for (int j = 0; j < n; ++j) crow[j] = S(0);
        for (int p = 0; p < k; ++p) {
            const S aip = a[(size_t)i * k + p];
            const S* brow = b + (size_t)p * n;
            for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

template <class S>
void matmul(const S* a, const S* b, S* c, int m, int k, int n) {
    const size_t work = (size_t)m * k * n;
#pragma omp parallel for schedule(static) if (work >= kParallelGrain)
    for (int i = 0; i < m; ++i) {
        S* crow = c + (size_t)i * n;
        for (int j = 0; j < n; ++j) crow[j] = S(0);
        for (int p = 0; p < k; ++p) {
            const S aip = a[(size_t)i * k + p];
            const S* brow = b + (size_t)p * n;
            for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

template <class S>
void matmul_tn_serial(const S* a, const S* b, S* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        S* crow = c + (size_t)i * n;
        for (int j = 0; j < n; ++j) crow[j] = S(0);
        for (int p = 0; p < k; ++p) {
            const S aip = a[(size_t)p * m + i];
            const S* brow = b + (size_t)p * n;
            for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

template <class S>
void matmul_tn(const S* a, const S* b, S* c, int m, int k, int n) {
    const size_t work = (size_t)m * k * n;
#pragma omp parallel for schedule(static) if (work >= kParallelGrain)
    for (int i = 0; i < m; ++i) {
        S* crow = c + (size_t)i * n;
        for (int j = 0; j < n; ++j) crow[j] = S(0);
        for (int p = 0; p < k; ++p) {
            const S aip = a[(size_t)p * m + i];
            const S* brow = b + (size_t)p * n;
            for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

template <class S>
void matmul_nt_serial(const S* a, const S* b, S* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const S* arow = a + (size_t)i * k;
        S* crow = c + (size_t)i * n;
        for (int j = 0; j < n; ++j) {
            const S* brow = b + (size_t)j * k;
            S acc = S(0);
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = acc;
        }
    }
}

template <class S>
void matmul_nt(const S* a, const S* b, S* c, int m, int k, int n) {
    const size_t work = (size_t)m * k * n;
#pragma omp parallel for schedule(static) if (work >= kParallelGrain)
    for (int i = 0; i < m; ++i) {
        const S* arow = a + (size_t)i * k;
        S* crow = c + (size_t)i * n;
        for (int j = 0; j < n; ++j) {
            const S* brow = b + (size_t)j * k;
            S acc = S(0);
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = acc;
        }
    }
}

// ---------------------------------------------------------------- conv2d ---

template <class S>
static inline S conv_pixel(const S* x, const S* w, const ConvDims& d,
                           int img, int oc, int oy, int ox) {
    S acc = S(0);
    const int iy0 = oy * d.stride - d.pad;
    const int ix0 = ox * d.stride - d.pad;
    for (int ic = 0; ic < d.cin; ++ic) {
        const S* xc = x + ((size_t)img * d.cin + ic) * d.h * d.w;
        const S* wc = w + ((size_t)oc * d.cin + ic) * d.kh * d.kw;
        for (int ky = 0; ky < d.kh; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= d.h) continue;
            for (int kx = 0; kx < d.kw; ++kx) {
                const int ix = ix0 + kx;
                if (ix < 0 || ix >= d.w) continue;
                acc += xc[(size_t)iy * d.w + ix] * wc[(size_t)ky * d.kw + kx];
            }
        }
    }
    return acc;
}

template <class S>
void conv2d_forward_serial(const S* x, const S* w, const S* bias, S* y, const ConvDims& d) {
    const int oh = d.oh(), ow = d.ow();
    for (int img = 0; img < d.n; ++img)
        for (int oc = 0; oc < d.cout; ++oc) {
            const S b = bias ? bias[oc] : S(0);
            S* yp = y + ((size_t)img * d.cout + oc) * oh * ow;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox)
                    yp[(size_t)oy * ow + ox] = b + conv_pixel(x, w, d, img, oc, oy, ox);
        }
}

template <class S>
void conv2d_forward(const S* x, const S* w, const S* bias, S* y, const ConvDims& d) {
    const int oh = d.oh(), ow = d.ow();
    const int planes = d.n * d.cout;
    const size_t work = (size_t)planes * oh * ow * d.cin * d.kh * d.kw;
#pragma omp parallel for schedule(static) if (work >= kParallelGrain)
    for (int plane = 0; plane < planes; ++plane) {
        const int img = plane / d.cout;
        const int oc = plane % d.cout;
        const S b = bias ? bias[oc] : S(0);
        S* yp = y + (size_t)plane * oh * ow;
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                yp[(size_t)oy * ow + ox] = b + conv_pixel(x, w, d, img, oc, oy, ox);
    }
}

// dx accumulates over out-channels, dw/db over images and pixels. Each
// parallel loop owns a disjoint slice of the tensor it writes.

template <class S>
static void conv_dx_plane(const S* w, const S* dy, S* dx, const ConvDims& d,
                          int img, int ic, int oh, int ow) {
    S* dxc = dx + ((size_t)img * d.cin + ic) * d.h * d.w;
    std::memset(dxc, 0, sizeof(S) * (size_t)d.h * d.w);
    for (int oc = 0; oc < d.cout; ++oc) {
        const S* dyp = dy + ((size_t)img * d.cout + oc) * oh * ow;
        const S* wc = w + ((size_t)oc * d.cin + ic) * d.kh * d.kw;
        for (int oy = 0; oy < oh; ++oy) {
            const int iy0 = oy * d.stride - d.pad;
            for (int ox = 0; ox < ow; ++ox) {
                const int ix0 = ox * d.stride - d.pad;
                const S g = dyp[(size_t)oy * ow + ox];
                for (int ky = 0; ky < d.kh; ++ky) {
                    const int iy = iy0 + ky;
                    if (iy < 0 || iy >= d.h) continue;
                    for (int kx = 0; kx < d.kw; ++kx) {
                        const int ix = ix0 + kx;
                        if (ix < 0 || ix >= d.w) continue;
                        dxc[(size_t)iy * d.w + ix] += g * wc[(size_t)ky * d.kw + kx];
                    }
                }
            }
        }
    }
}

template <class S>
static void conv_dw_filter(const S* x, const S* dy, S* dw, S* db, const ConvDims& d,
                           int oc, int oh, int ow) {
    S* dwoc = dw + (size_t)oc * d.cin * d.kh * d.kw;
    std::memset(dwoc, 0, sizeof(S) * (size_t)d.cin * d.kh * d.kw);
    S bacc = S(0);
    for (int img = 0; img < d.n; ++img) {
        const S* dyp = dy + ((size_t)img * d.cout + oc) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            const int iy0 = oy * d.stride - d.pad;
            for (int ox = 0; ox < ow; ++ox) {
                const int ix0 = ox * d.stride - d.pad;
                const S g = dyp[(size_t)oy * ow + ox];
                bacc += g;
                for (int ic = 0; ic < d.cin; ++ic) {
                    const S* xc = x + ((size_t)img * d.cin + ic) * d.h * d.w;
                    S* dwc = dwoc + (size_t)ic * d.kh * d.kw;
                    for (int ky = 0; ky < d.kh; ++ky) {
                        const int iy = iy0 + ky;
                        if (iy < 0 || iy >= d.h) continue;
                        for (int kx = 0; kx < d.kw; ++kx) {
                            const int ix = ix0 + kx;
                            if (ix < 0 || ix >= d.w) continue;
                            dwc[(size_t)ky * d.kw + kx] += g * xc[(size_t)iy * d.w + ix];
                        }
                    }
                }
            }
        }
    }
    if (db) db[oc] = bacc;
}

template <class S>
void conv2d_backward_serial(const S* x, const S* w, const S* dy, S* dx, S* dw, S* db,
                            const ConvDims& d) {
    const int oh = d.oh(), ow = d.ow();
    if (dx)
        for (int img = 0; img < d.n; ++img)
            for (int ic = 0; ic < d.cin; ++ic) conv_dx_plane(w, dy, dx, d, img, ic, oh, ow);
    if (dw)
        for (int oc = 0; oc < d.cout; ++oc) conv_dw_filter(x, dy, dw, db, d, oc, oh, ow);
}

template <class S>
void conv2d_backward(const S* x, const S* w, const S* dy, S* dx, S* dw, S* db,
                     const ConvDims& d) {
    const int oh = d.oh(), ow = d.ow();
    const size_t work = (size_t)d.n * d.cout * oh * ow * d.cin * d.kh * d.kw;
    if (dx) {
        const int planes = d.n * d.cin;
#pragma omp parallel for schedule(static) if (work >= kParallelGrain)
        for (int plane = 0; plane < planes; ++plane)
            conv_dx_plane(w, dy, dx, d, plane / d.cin, plane % d.cin, oh, ow);
    }
    if (dw) {
#pragma omp parallel for schedule(static) if (work >= kParallelGrain)
        for (int oc = 0; oc < d.cout; ++oc) conv_dw_filter(x, dy, dw, db, d, oc, oh, ow);
    }
}

template void matmul<float>(const float*, const float*, float*, int, int, int);
template void matmul<double>(const double*, const double*, double*, int, int, int);
template void matmul_serial<float>(const float*, const float*, float*, int, int, int);
template void matmul_serial<double>(const double*, const double*, double*, int, int, int);
template void matmul_tn<float>(const float*, const float*, float*, int, int, int);
template void matmul_tn<double>(const double*, const double*, double*, int, int, int);
template void matmul_tn_serial<float>(const float*, const float*, float*, int, int, int);
template void matmul_tn_serial<double>(const double*, const double*, double*, int, int, int);
template void matmul_nt<float>(const float*, const float*, float*, int, int, int);
template void matmul_nt<double>(const double*, const double*, double*, int, int, int);
template void matmul_nt_serial<float>(const float*, const float*, float*, int, int, int);
template void matmul_nt_serial<double>(const double*, const double*, double*, int, int, int);
template void conv2d_forward<float>(const float*, const float*, const float*, float*, const ConvDims&);
template void conv2d_forward<double>(const double*, const double*, const double*, double*, const ConvDims&);
template void conv2d_forward_serial<float>(const float*, const float*, const float*, float*, const ConvDims&);
template void conv2d_forward_serial<double>(const double*, const double*, const double*, double*, const ConvDims&);
template void conv2d_backward<float>(const float*, const float*, const float*, float*, float*, float*, const ConvDims&);
template void conv2d_backward<double>(const double*, const double*, const double*, double*, double*, double*, const ConvDims&);
template void conv2d_backward_serial<float>(const float*, const float*, const float*, float*, float*, float*, const ConvDims&);
template void conv2d_backward_serial<double>(const double*, const double*, const double*, double*, double*, double*, const ConvDims&);

}  // namespace autolap::kernels
