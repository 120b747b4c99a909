// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

// Differentiable building blocks on 5D tensors laid out as [B, C, X, Y, Z]
// with x varying fastest in memory (matching VoxelGrid).

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mavseg/nn/tensor.hpp"

namespace mavseg::nn {

struct Geo {
  std::size_t b, c, x, y, z;
  std::size_t vox() const { return x * y * z; }
  Shape shape() const { return {b, c, x, y, z}; }
};

template <class T>
Geo geo(const Tensor<T>& t, const char* op) {
  if (t.rank() != 5) throw ValidationError(std::string(op) + ": expected a 5D tensor, got " + shape_str(t.shape()));
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), t.dim(4)};
}

// ---------------------------------------------------------------------------
// Convolution

namespace detail {

template <class T>
void check_conv_args(const Geo& in, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t stride,
                     std::size_t padding) {
  require(weight.rank() == 5, "conv3: weight must be [Co,Ci,k,k,k]");
  const std::size_t k = weight.dim(2);
  require(weight.dim(1) == in.c, "conv3: weight expects " + std::to_string(weight.dim(1)) + " input channels, got " +
                                     std::to_string(in.c));
  require(weight.dim(3) == k && weight.dim(4) == k, "conv3: kernel must be cubic");
  require(bias.size() == weight.dim(0), "conv3: bias length must equal output channels");
  require(stride >= 1, "conv3: stride must be >= 1");
  for (std::size_t d : {in.x, in.y, in.z})
    require(d + 2 * padding >= k, "conv3: kernel larger than padded input");
}

/// Zero-padded copy of one channel volume.
template <class T>
void pad_into(const T* src, const Geo& g, std::size_t p, T* dst) {
  const std::size_t px = g.x + 2 * p, py = g.y + 2 * p;
  for (std::size_t z = 0; z < g.z; ++z)
    for (std::size_t y = 0; y < g.y; ++y)
      std::copy_n(src + (z * g.y + y) * g.x, g.x, dst + ((z + p) * py + (y + p)) * px + p);
}

template <class T>
void unpad_add(const T* src, const Geo& g, std::size_t p, T* dst) {
  const std::size_t px = g.x + 2 * p, py = g.y + 2 * p;
  for (std::size_t z = 0; z < g.z; ++z)
    for (std::size_t y = 0; y < g.y; ++y) {
      const T* s = src + ((z + p) * py + (y + p)) * px + p;
      T* d = dst + (z * g.y + y) * g.x;
      for (std::size_t x = 0; x < g.x; ++x) d[x] += s[x];
    }
}

template <class T>
T dot(const T* __restrict a, const T* __restrict b, std::size_t n) {
  T s = 0;
#pragma omp simd reduction(+ : s)
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

/// Stride-1 "same" convolution (k = 2p + 1). Works in padded coordinates so
/// every kernel tap becomes one contiguous axpy / dot over the whole volume;
/// positions in the padding are computed and discarded.
template <class T>
Tensor<T> conv3_same(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  const Geo in = geo(input, "conv3");
  const std::size_t co_n = weight.dim(0), k = weight.dim(2), p = k / 2, kk = k * k * k;
  const std::size_t px = in.x + 2 * p, py = in.y + 2 * p, pz = in.z + 2 * p, pv = px * py * pz;
  // Output span in padded coordinates and per-tap input offsets.
  const std::size_t first = (p * py + p) * px + p;
  const std::size_t span = ((in.z - 1 + p) * py + (in.y - 1 + p)) * px + (in.x - 1 + p) + 1 - first;
  std::vector<std::ptrdiff_t> offs(kk);
  for (std::size_t kz = 0; kz < k; ++kz)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx)
        offs[(kz * k + ky) * k + kx] = (static_cast<std::ptrdiff_t>(kz) - static_cast<std::ptrdiff_t>(p)) *
                                           static_cast<std::ptrdiff_t>(px * py) +
                                       (static_cast<std::ptrdiff_t>(ky) - static_cast<std::ptrdiff_t>(p)) *
                                           static_cast<std::ptrdiff_t>(px) +
                                       static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(p);
  const Geo out{in.b, co_n, in.x, in.y, in.z};

  auto pad_batch = [=](const T* x, std::size_t b) {
    std::vector<T> xp(in.c * pv, T(0));
    for (std::size_t ci = 0; ci < in.c; ++ci) pad_into(x + (b * in.c + ci) * in.vox(), in, p, xp.data() + ci * pv);
    return xp;
  };

  std::vector<T> y(out.b * out.c * out.vox());
  {
    const T* wp = weight.data().data();
    const T* bp = bias.data().data();
    std::vector<T> yp(pv);
    for (std::size_t b = 0; b < in.b; ++b) {
      const auto xp = pad_batch(input.data().data(), b);
      for (std::size_t co = 0; co < co_n; ++co) {
        std::fill(yp.begin(), yp.end(), bp[co]);
        T* __restrict yo = yp.data() + first;
        for (std::size_t ci = 0; ci < in.c; ++ci)
          for (std::size_t t = 0; t < kk; ++t) {
            const T w = wp[(co * in.c + ci) * kk + t];
            const T* __restrict xs = xp.data() + ci * pv + static_cast<std::ptrdiff_t>(first) + offs[t];
            for (std::size_t i = 0; i < span; ++i) yo[i] += w * xs[i];
          }
        T* dst = y.data() + (b * co_n + co) * out.vox();
        for (std::size_t z = 0; z < in.z; ++z)
          for (std::size_t yy = 0; yy < in.y; ++yy)
            std::copy_n(yp.data() + ((z + p) * py + (yy + p)) * px + p, in.x, dst + (z * in.y + yy) * in.x);
      }
    }
  }

  return Tensor<T>::make(out.shape(), std::move(y), {input, weight, bias}, [=](Node<T>& n) {
    const T* go = n.grad.data();
    const T* x = n.parents[0]->value.data();
    const T* wp = n.parents[1]->value.data();
    T* gx = parent_grad(n, 0);
    T* gw = parent_grad(n, 1);
    T* gb = parent_grad(n, 2);
    std::vector<T> gop(pv), gxp;
    for (std::size_t b = 0; b < in.b; ++b) {
      const auto xp = gw ? pad_batch(x, b) : std::vector<T>{};
      if (gx) gxp.assign(in.c * pv, T(0));
      for (std::size_t co = 0; co < co_n; ++co) {
        const T* gob = go + (b * co_n + co) * out.vox();
        if (gb) {
          T s = 0;
          for (std::size_t i = 0; i < out.vox(); ++i) s += gob[i];
          gb[co] += s;
        }
        // Padding positions of the output gradient must be zero.
        std::fill(gop.begin(), gop.end(), T(0));
        pad_into(gob, out, p, gop.data());
        const T* __restrict g = gop.data() + first;
        for (std::size_t ci = 0; ci < in.c; ++ci)
          for (std::size_t t = 0; t < kk; ++t) {
            const std::size_t wi = (co * in.c + ci) * kk + t;
            const std::ptrdiff_t at = static_cast<std::ptrdiff_t>(ci * pv + first) + offs[t];
            if (gw) gw[wi] += dot(g, xp.data() + at, span);
            if (gx) {
              const T w = wp[wi];
              T* __restrict gi = gxp.data() + at;
              for (std::size_t i = 0; i < span; ++i) gi[i] += w * g[i];
            }
          }
      }
      if (gx)
        for (std::size_t ci = 0; ci < in.c; ++ci) unpad_add(gxp.data() + ci * pv, in, p, gx + (b * in.c + ci) * in.vox());
    }
  });
}

/// Reference path for any stride and padding.
template <class T>
Tensor<T> conv3_direct(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t stride,
                       std::size_t padding) {
  const Geo in = geo(input, "conv3");
  const std::size_t co_n = weight.dim(0), k = weight.dim(2);

  const auto out_extent = [&](std::size_t n) { return (n + 2 * padding - k) / stride + 1; };
  const Geo out{in.b, co_n, out_extent(in.x), out_extent(in.y), out_extent(in.z)};
  const std::size_t kk = k * k * k;

  // Valid output index range [lo, hi) for kernel offset kofs along an axis.
  struct Span {
    std::size_t lo, hi;
  };
  auto valid = [&](std::size_t kofs, std::size_t n_in, std::size_t n_out) {
    // i = o*stride + kofs - padding must lie in [0, n_in).
    long long lo = static_cast<long long>(padding) - static_cast<long long>(kofs);
    lo = lo <= 0 ? 0 : (lo + static_cast<long long>(stride) - 1) / static_cast<long long>(stride);
    long long hi_i = static_cast<long long>(n_in) - 1 + static_cast<long long>(padding) - static_cast<long long>(kofs);
    long long hi = hi_i < 0 ? 0 : hi_i / static_cast<long long>(stride) + 1;
    hi = std::min<long long>(hi, static_cast<long long>(n_out));
    if (lo > hi) lo = hi;
    return Span{static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
  };
  std::vector<Span> sx(k), sy(k), sz(k);
  for (std::size_t o = 0; o < k; ++o) {
    sx[o] = valid(o, in.x, out.x);
    sy[o] = valid(o, in.y, out.y);
    sz[o] = valid(o, in.z, out.z);
  }

  // Visits every (output row, input row, weight index, kx) tuple of one (b, co, ci)
  // plane pair. Captures by value: the backward closure keeps a copy.
  auto for_each_row = [=](std::size_t b, std::size_t co, std::size_t ci, auto&& f) {
    const std::size_t wbase = (co * in.c + ci) * kk;
    const std::size_t obase = (b * out.c + co) * out.vox();
    const std::size_t ibase = (b * in.c + ci) * in.vox();
    for (std::size_t kz = 0; kz < k; ++kz)
      for (std::size_t oz = sz[kz].lo; oz < sz[kz].hi; ++oz) {
        const std::size_t iz = oz * stride + kz - padding;
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t oy = sy[ky].lo; oy < sy[ky].hi; ++oy) {
            const std::size_t iy = oy * stride + ky - padding;
            const std::size_t orow = obase + (oz * out.y + oy) * out.x;
            const std::size_t irow = ibase + (iz * in.y + iy) * in.x;
            for (std::size_t kx = 0; kx < k; ++kx) f(orow, irow, wbase + (kz * k + ky) * k + kx, kx);
          }
      }
  };

  std::vector<T> y(out.b * out.c * out.vox());
  {
    const T* xp = input.data().data();
    const T* wp = weight.data().data();
    const T* bp = bias.data().data();
    for (std::size_t b = 0; b < in.b; ++b)
      for (std::size_t co = 0; co < co_n; ++co) {
        T* yb = y.data() + (b * out.c + co) * out.vox();
        std::fill(yb, yb + out.vox(), bp[co]);
        for (std::size_t ci = 0; ci < in.c; ++ci)
          for_each_row(b, co, ci, [&](std::size_t orow, std::size_t irow, std::size_t wi, std::size_t kx) {
            const T w = wp[wi];
            T* __restrict yo = y.data() + orow;
            const T* __restrict xi = xp + irow;
            const std::size_t lo = sx[kx].lo, hi = sx[kx].hi;
            if (stride == 1) {
              const T* __restrict xs = xi + (static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(padding));
              for (std::size_t ox = lo; ox < hi; ++ox) yo[ox] += w * xs[ox];
            } else {
              for (std::size_t ox = lo; ox < hi; ++ox) yo[ox] += w * xi[ox * stride + kx - padding];
            }
          });
      }
  }

  return Tensor<T>::make(out.shape(), std::move(y), {input, weight, bias}, [=](Node<T>& n) {
    const T* go = n.grad.data();
    const T* xp = n.parents[0]->value.data();
    const T* wp = n.parents[1]->value.data();
    T* gx = parent_grad(n, 0);
    T* gw = parent_grad(n, 1);
    T* gb = parent_grad(n, 2);
    std::vector<T> acc(out.x);
    for (std::size_t b = 0; b < in.b; ++b)
      for (std::size_t co = 0; co < co_n; ++co) {
        const T* gob = go + (b * out.c + co) * out.vox();
        if (gb) {
          T s = 0;
          for (std::size_t i = 0; i < out.vox(); ++i) s += gob[i];
          gb[co] += s;
        }
        for (std::size_t ci = 0; ci < in.c; ++ci) {
          if (gx)
            for_each_row(b, co, ci, [&](std::size_t orow, std::size_t irow, std::size_t wi, std::size_t kx) {
              const T w = wp[wi];
              const T* __restrict g = go + orow;
              T* __restrict gi = gx + irow;
              const std::size_t lo = sx[kx].lo, hi = sx[kx].hi;
              if (stride == 1) {
                T* __restrict gs = gi + (static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(padding));
                for (std::size_t ox = lo; ox < hi; ++ox) gs[ox] += w * g[ox];
              } else {
                for (std::size_t ox = lo; ox < hi; ++ox) gi[ox * stride + kx - padding] += w * g[ox];
              }
            });
          if (gw) {
            // Per weight tap, accumulate elementwise products across rows, then reduce once.
            const std::size_t wbase = (co * in.c + ci) * kk;
            const std::size_t obase = (b * out.c + co) * out.vox();
            const std::size_t ibase = (b * in.c + ci) * in.vox();
            for (std::size_t kz = 0; kz < k; ++kz)
              for (std::size_t ky = 0; ky < k; ++ky)
                for (std::size_t kx = 0; kx < k; ++kx) {
                  std::fill(acc.begin(), acc.end(), T(0));
                  const std::size_t lo = sx[kx].lo, hi = sx[kx].hi;
                  for (std::size_t oz = sz[kz].lo; oz < sz[kz].hi; ++oz) {
                    const std::size_t iz = oz * stride + kz - padding;
                    for (std::size_t oy = sy[ky].lo; oy < sy[ky].hi; ++oy) {
                      const std::size_t iy = oy * stride + ky - padding;
                      const T* __restrict g = go + obase + (oz * out.y + oy) * out.x;
                      const T* __restrict xi = xp + ibase + (iz * in.y + iy) * in.x;
                      T* __restrict a = acc.data();
                      if (stride == 1) {
                        const T* __restrict xs = xi + (static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(padding));
                        for (std::size_t ox = lo; ox < hi; ++ox) a[ox] += g[ox] * xs[ox];
                      } else {
                        for (std::size_t ox = lo; ox < hi; ++ox) a[ox] += g[ox] * xi[ox * stride + kx - padding];
                      }
                    }
                  }
                  T s = 0;
                  for (std::size_t ox = lo; ox < hi; ++ox) s += acc[ox];
                  gw[wbase + (kz * k + ky) * k + kx] += s;
                }
          }
        }
      }
  });
}

}  // namespace detail

/// 3D cross-correlation with cubic kernel, zero padding and equal stride on all
/// axes. weight: [Co, Ci, k, k, k], bias: [Co].
template <class T>
Tensor<T> conv3(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t stride = 1,
                std::size_t padding = 1) {
  detail::check_conv_args(geo(input, "conv3"), weight, bias, stride, padding);
  if (stride == 1 && weight.dim(2) == 2 * padding + 1) return detail::conv3_same(input, weight, bias);
  return detail::conv3_direct(input, weight, bias, stride, padding);
}

// ---------------------------------------------------------------------------
// Pointwise

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> y(x.size());
  const auto xv = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] > T(0) ? xv[i] : T(0);
  if (detail::branch_hash)
    for (std::size_t i = 0; i < y.size(); ++i) detail::mix_branch(xv[i] > T(0));
  return Tensor<T>::make(x.shape(), std::move(y), {x}, [](Node<T>& n) {
    T* gx = parent_grad(n, 0);
    const auto& xv = n.parents[0]->value;
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      if (xv[i] > T(0)) gx[i] += n.grad[i];
  });
}

template <class T>
T sigmoid_scalar(T z) {
  return z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> y(x.size());
  const auto xv = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = sigmoid_scalar(xv[i]);
  return Tensor<T>::make(x.shape(), std::move(y), {x}, [](Node<T>& n) {
    T* gx = parent_grad(n, 0);
    for (std::size_t i = 0; i < n.grad.size(); ++i) gx[i] += n.grad[i] * n.value[i] * (T(1) - n.value[i]);
  });
}

/// Sum of x * weights (weights constant). Used to reduce arbitrary outputs to a
/// scalar, e.g. for gradient checks.
template <class T>
Tensor<T> dot_const(const Tensor<T>& x, const std::vector<T>& weights) {
  require(weights.size() == x.size(), "dot_const: size mismatch");
  T s = 0;
  const auto xv = x.data();
  for (std::size_t i = 0; i < weights.size(); ++i) s += xv[i] * weights[i];
  return Tensor<T>::make({1}, {s}, {x}, [weights](Node<T>& n) {
    T* gx = parent_grad(n, 0);
    const T g = n.grad[0];
    for (std::size_t i = 0; i < weights.size(); ++i) gx[i] += g * weights[i];
  });
}

// ---------------------------------------------------------------------------
// Normalization

/// Per (sample, channel) standardization over the spatial axes, no affine.
template <class T>
Tensor<T> instance_norm(const Tensor<T>& x, T eps = T(1e-5)) {
  const Geo g = geo(x, "instance_norm");
  const std::size_t v = g.vox();
  std::vector<T> y(x.size());
  std::vector<T> inv_std(g.b * g.c);
  const auto xv = x.data();
  for (std::size_t bc = 0; bc < g.b * g.c; ++bc) {
    const T* xp = xv.data() + bc * v;
    T mean = 0;
    for (std::size_t i = 0; i < v; ++i) mean += xp[i];
    mean /= static_cast<T>(v);
    T var = 0;
    for (std::size_t i = 0; i < v; ++i) var += (xp[i] - mean) * (xp[i] - mean);
    var /= static_cast<T>(v);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[bc] = is;
    T* yp = y.data() + bc * v;
    for (std::size_t i = 0; i < v; ++i) yp[i] = (xp[i] - mean) * is;
  }
  return Tensor<T>::make(x.shape(), std::move(y), {x}, [g, v, inv_std](Node<T>& n) {
    T* gx = parent_grad(n, 0);
    for (std::size_t bc = 0; bc < g.b * g.c; ++bc) {
      const T* dy = n.grad.data() + bc * v;
      const T* yp = n.value.data() + bc * v;
      T mdy = 0, mdyy = 0;
      for (std::size_t i = 0; i < v; ++i) {
        mdy += dy[i];
        mdyy += dy[i] * yp[i];
      }
      mdy /= static_cast<T>(v);
      mdyy /= static_cast<T>(v);
      T* gp = gx + bc * v;
      for (std::size_t i = 0; i < v; ++i) gp[i] += inv_std[bc] * (dy[i] - mdy - yp[i] * mdyy);
    }
  });
}

// ---------------------------------------------------------------------------
// Resolution changes

/// 2x2x2 max pooling, stride 2. Spatial dims must be even. Gradient goes to the
/// first maximum of each window.
template <class T>
Tensor<T> maxpool2(const Tensor<T>& x) {
  const Geo g = geo(x, "maxpool2");
  require(g.x % 2 == 0 && g.y % 2 == 0 && g.z % 2 == 0, "maxpool2: spatial dims must be even, got " + shape_str(x.shape()));
  const Geo o{g.b, g.c, g.x / 2, g.y / 2, g.z / 2};
  std::vector<T> y(o.b * o.c * o.vox());
  std::vector<std::size_t> arg(y.size());
  const auto xv = x.data();
  std::size_t idx = 0;
  for (std::size_t bc = 0; bc < g.b * g.c; ++bc)
    for (std::size_t z = 0; z < o.z; ++z)
      for (std::size_t yy = 0; yy < o.y; ++yy)
        for (std::size_t xx = 0; xx < o.x; ++xx, ++idx) {
          std::size_t best = 0;
          T bv = 0;
          bool first = true;
          for (std::size_t dz = 0; dz < 2; ++dz)
            for (std::size_t dy = 0; dy < 2; ++dy)
              for (std::size_t dx = 0; dx < 2; ++dx) {
                const std::size_t i = bc * g.vox() + ((2 * z + dz) * g.y + (2 * yy + dy)) * g.x + 2 * xx + dx;
                if (first || xv[i] > bv) {
                  bv = xv[i];
                  best = i;
                  first = false;
                }
              }
          y[idx] = bv;
          arg[idx] = best;
          detail::mix_branch(best);
        }
  return Tensor<T>::make(o.shape(), std::move(y), {x}, [arg = std::move(arg)](Node<T>& n) {
    T* gx = parent_grad(n, 0);
    for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += n.grad[i];
  });
}

/// Nearest-neighbour 2x upsampling; the backward pass sums the 8 replicas.
template <class T>
Tensor<T> upsample_nearest2(const Tensor<T>& x) {
  const Geo g = geo(x, "upsample_nearest2");
  const Geo o{g.b, g.c, g.x * 2, g.y * 2, g.z * 2};
  std::vector<T> y(o.b * o.c * o.vox());
  const auto xv = x.data();
  for (std::size_t bc = 0; bc < g.b * g.c; ++bc)
    for (std::size_t z = 0; z < o.z; ++z)
      for (std::size_t yy = 0; yy < o.y; ++yy) {
        const T* src = xv.data() + bc * g.vox() + ((z / 2) * g.y + yy / 2) * g.x;
        T* dst = y.data() + bc * o.vox() + (z * o.y + yy) * o.x;
        for (std::size_t xx = 0; xx < o.x; ++xx) dst[xx] = src[xx / 2];
      }
  return Tensor<T>::make(o.shape(), std::move(y), {x}, [g, o](Node<T>& n) {
    T* gx = parent_grad(n, 0);
    for (std::size_t bc = 0; bc < g.b * g.c; ++bc)
      for (std::size_t z = 0; z < o.z; ++z)
        for (std::size_t yy = 0; yy < o.y; ++yy) {
          T* dst = gx + bc * g.vox() + ((z / 2) * g.y + yy / 2) * g.x;
          const T* src = n.grad.data() + bc * o.vox() + (z * o.y + yy) * o.x;
          for (std::size_t xx = 0; xx < o.x; ++xx) dst[xx / 2] += src[xx];
        }
  });
}

// ---------------------------------------------------------------------------
// Channel plumbing

/// Concatenation along the channel axis.
template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "concat_channels: no inputs");
  const Geo g0 = geo(parts[0], "concat_channels");
  std::size_t c_total = 0;
  std::vector<std::size_t> cs;
  for (auto& p : parts) {
    const Geo g = geo(p, "concat_channels");
    require(g.b == g0.b && g.x == g0.x && g.y == g0.y && g.z == g0.z,
            "concat_channels: shape mismatch " + shape_str(p.shape()) + " vs " + shape_str(parts[0].shape()));
    cs.push_back(g.c);
    c_total += g.c;
  }
  const std::size_t v = g0.vox();
  const Geo o{g0.b, c_total, g0.x, g0.y, g0.z};
  std::vector<T> y(o.b * o.c * v);
  for (std::size_t b = 0; b < o.b; ++b) {
    std::size_t c0 = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const T* src = parts[p].data().data() + b * cs[p] * v;
      std::copy(src, src + cs[p] * v, y.data() + (b * c_total + c0) * v);
      c0 += cs[p];
    }
  }
  return Tensor<T>::make(o.shape(), std::move(y), parts, [cs, c_total, v, batch = o.b](Node<T>& n) {
    for (std::size_t b = 0; b < batch; ++b) {
      std::size_t c0 = 0;
      for (std::size_t p = 0; p < cs.size(); ++p) {
        if (T* gp = parent_grad(n, p)) {
          const T* src = n.grad.data() + (b * c_total + c0) * v;
          T* dst = gp + b * cs[p] * v;
          for (std::size_t i = 0; i < cs[p] * v; ++i) dst[i] += src[i];
        }
        c0 += cs[p];
      }
    }
  });
}

/// Channels [start, start + count).
template <class T>
Tensor<T> narrow_channels(const Tensor<T>& x, std::size_t start, std::size_t count) {
  const Geo g = geo(x, "narrow_channels");
  require(count > 0 && start + count <= g.c, "narrow_channels: range outside channel axis");
  const std::size_t v = g.vox();
  const Geo o{g.b, count, g.x, g.y, g.z};
  std::vector<T> y(o.b * count * v);
  for (std::size_t b = 0; b < g.b; ++b) {
    const T* src = x.data().data() + (b * g.c + start) * v;
    std::copy(src, src + count * v, y.data() + b * count * v);
  }
  return Tensor<T>::make(o.shape(), std::move(y), {x}, [g, start, count, v](Node<T>& n) {
    T* gx = parent_grad(n, 0);
    for (std::size_t b = 0; b < g.b; ++b) {
      const T* src = n.grad.data() + b * count * v;
      T* dst = gx + (b * g.c + start) * v;
      for (std::size_t i = 0; i < count * v; ++i) dst[i] += src[i];
    }
  });
}

}  // namespace mavseg::nn
