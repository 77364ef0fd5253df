#pragma once

#include <cmath>
#include <vector>

#include "nnlm/tensor.hpp"

namespace nnlm::reference {

// Direct-loop serial counterparts of nnlm::kernels. Kept for tests and benchmarks only:
// they define the expected results and run in double for finite-difference checks.

template <class T>
using Tn = BasicTensor<T>;

template <class T>
Tn<T> conv3d_forward(const Tn<T>& x, const std::vector<T>& w, const std::vector<T>& b, int cout, const Stride& s) {
  const Shape& xs = x.shape();
  const Dims od = conv_output_dims(xs.dims, s);
  Tn<T> y(Shape{xs.n, cout, od});
  for (int n = 0; n < xs.n; ++n)
    for (int co = 0; co < cout; ++co)
      for (int oz = 0; oz < od.z; ++oz)
        for (int oy = 0; oy < od.y; ++oy)
          for (int ox = 0; ox < od.x; ++ox) {
            T acc = b[co];
            for (int ci = 0; ci < xs.c; ++ci)
              for (int kz = 0; kz < 3; ++kz)
                for (int ky = 0; ky < 3; ++ky)
                  for (int kx = 0; kx < 3; ++kx) {
                    const int ix = ox * s[0] + kx - 1, iy = oy * s[1] + ky - 1, iz = oz * s[2] + kz - 1;
                    if (!xs.dims.contains(ix, iy, iz)) continue;
                    acc += w[((static_cast<std::size_t>(co) * xs.c + ci) * 27) + kz * 9 + ky * 3 + kx] *
                           x.channel(n, ci)[xs.dims.index(ix, iy, iz)];
                  }
            y.channel(n, co)[od.index(ox, oy, oz)] = acc;
          }
  return y;
}

/// dx overwritten; dw and db overwritten.
template <class T>
void conv3d_backward(const Tn<T>& x, const Tn<T>& dy, const std::vector<T>& w, const Stride& s, Tn<T>& dx,
                     std::vector<T>& dw, std::vector<T>& db) {
  const Shape& xs = x.shape();
  const Shape& ys = dy.shape();
  dx = Tn<T>(xs);
  dw.assign(w.size(), T(0));
  db.assign(ys.c, T(0));
  for (int n = 0; n < xs.n; ++n)
    for (int co = 0; co < ys.c; ++co)
      for (int oz = 0; oz < ys.dims.z; ++oz)
        for (int oy = 0; oy < ys.dims.y; ++oy)
          for (int ox = 0; ox < ys.dims.x; ++ox) {
            const T g = dy.channel(n, co)[ys.dims.index(ox, oy, oz)];
            db[co] += g;
            for (int ci = 0; ci < xs.c; ++ci)
              for (int kz = 0; kz < 3; ++kz)
                for (int ky = 0; ky < 3; ++ky)
                  for (int kx = 0; kx < 3; ++kx) {
                    const int ix = ox * s[0] + kx - 1, iy = oy * s[1] + ky - 1, iz = oz * s[2] + kz - 1;
                    if (!xs.dims.contains(ix, iy, iz)) continue;
                    const std::size_t wi = ((static_cast<std::size_t>(co) * xs.c + ci) * 27) + kz * 9 + ky * 3 + kx;
                    const std::size_t xi = xs.dims.index(ix, iy, iz);
                    dw[wi] += g * x.channel(n, ci)[xi];
                    dx.channel(n, ci)[xi] += g * w[wi];
                  }
          }
}

template <class T>
Tn<T> upconv_forward(const Tn<T>& x, const std::vector<T>& w, const std::vector<T>& b, int cout, const Stride& s) {
  const Shape& xs = x.shape();
  const int kv = s[0] * s[1] * s[2];
  const Dims od = upsample_dims(xs.dims, s);
  Tn<T> y(Shape{xs.n, cout, od});
  for (int n = 0; n < xs.n; ++n)
    for (int co = 0; co < cout; ++co)
      for (int oz = 0; oz < od.z; ++oz)
        for (int oy = 0; oy < od.y; ++oy)
          for (int ox = 0; ox < od.x; ++ox) {
            const int kx = ox % s[0], ky = oy % s[1], kz = oz % s[2];
            const int t = kx + s[0] * (ky + s[1] * kz);
            const std::size_t xi = xs.dims.index(ox / s[0], oy / s[1], oz / s[2]);
            T acc = b[co];
            for (int ci = 0; ci < xs.c; ++ci)
              acc += w[(static_cast<std::size_t>(ci) * cout + co) * kv + t] * x.channel(n, ci)[xi];
            y.channel(n, co)[od.index(ox, oy, oz)] = acc;
          }
  return y;
}

template <class T>
void upconv_backward(const Tn<T>& x, const Tn<T>& dy, const std::vector<T>& w, const Stride& s, Tn<T>& dx,
                     std::vector<T>& dw, std::vector<T>& db) {
  const Shape& xs = x.shape();
  const Shape& ys = dy.shape();
  const int kv = s[0] * s[1] * s[2];
  dx = Tn<T>(xs);
  dw.assign(w.size(), T(0));
  db.assign(ys.c, T(0));
  for (int n = 0; n < xs.n; ++n)
    for (int co = 0; co < ys.c; ++co)
      for (int oz = 0; oz < ys.dims.z; ++oz)
        for (int oy = 0; oy < ys.dims.y; ++oy)
          for (int ox = 0; ox < ys.dims.x; ++ox) {
            const T g = dy.channel(n, co)[ys.dims.index(ox, oy, oz)];
            db[co] += g;
            const int t = ox % s[0] + s[0] * (oy % s[1] + s[1] * (oz % s[2]));
            const std::size_t xi = xs.dims.index(ox / s[0], oy / s[1], oz / s[2]);
            for (int ci = 0; ci < xs.c; ++ci) {
              const std::size_t wi = (static_cast<std::size_t>(ci) * ys.c + co) * kv + t;
              dw[wi] += g * x.channel(n, ci)[xi];
              dx.channel(n, ci)[xi] += g * w[wi];
            }
          }
}

/// Instance norm (eps 1e-5) with affine parameters, then LeakyReLU(0.01).
template <class T>
Tn<T> norm_act_forward(const Tn<T>& x, const std::vector<T>& gamma, const std::vector<T>& beta) {
  const Shape& s = x.shape();
  Tn<T> y(s);
  const std::size_t m = s.plane();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* in = x.channel(n, c);
      T mu = 0;
      for (std::size_t i = 0; i < m; ++i) mu += in[i];
      mu /= static_cast<T>(m);
      T var = 0;
      for (std::size_t i = 0; i < m; ++i) var += (in[i] - mu) * (in[i] - mu);
      var /= static_cast<T>(m);
      const T inv = T(1) / std::sqrt(var + T(1e-5));
      for (std::size_t i = 0; i < m; ++i) {
        const T v = gamma[c] * (in[i] - mu) * inv + beta[c];
        y.channel(n, c)[i] = v > 0 ? v : T(0.01) * v;
      }
    }
  return y;
}

template <class T>
void norm_act_backward(const Tn<T>& x, const Tn<T>& dy, const std::vector<T>& gamma, const std::vector<T>& beta,
                       Tn<T>& dx, std::vector<T>& dgamma, std::vector<T>& dbeta) {
  const Shape& s = x.shape();
  dx = Tn<T>(s);
  dgamma.assign(s.c, T(0));
  dbeta.assign(s.c, T(0));
  const std::size_t m = s.plane();
  const T md = static_cast<T>(m);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* in = x.channel(n, c);
      T mu = 0;
      for (std::size_t i = 0; i < m; ++i) mu += in[i];
      mu /= md;
      T var = 0;
      for (std::size_t i = 0; i < m; ++i) var += (in[i] - mu) * (in[i] - mu);
      var /= md;
      const T inv = T(1) / std::sqrt(var + T(1e-5));
      std::vector<T> g(m), xhat(m);
      T sum_g = 0, sum_gx = 0;
      for (std::size_t i = 0; i < m; ++i) {
        xhat[i] = (in[i] - mu) * inv;
        const T pre = gamma[c] * xhat[i] + beta[c];
        g[i] = dy.channel(n, c)[i] * (pre > 0 ? T(1) : T(0.01));
        sum_g += g[i];
        sum_gx += g[i] * xhat[i];
      }
      dgamma[c] += sum_gx;
      dbeta[c] += sum_g;
      for (std::size_t i = 0; i < m; ++i)
        dx.channel(n, c)[i] = gamma[c] * inv * (g[i] - sum_g / md - xhat[i] * sum_gx / md);
    }
}

}  // namespace nnlm::reference
