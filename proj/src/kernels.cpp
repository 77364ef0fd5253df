#include "nnlm/kernels.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "nnlm/error.hpp"

namespace nnlm::kernels {
namespace {

constexpr int kTaps = 27;

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Output columns ox whose source column ox*s + kx - 1 lies inside [0, in).
std::pair<int, int> valid_columns(int kx, int s, int in, int out) {
  const int lo = std::clamp(-floor_div(kx - 1, s), 0, out);
  const int hi = std::clamp(floor_div(in - kx, s) + 1, lo, out);
  return {lo, hi};
}

void im2col(const float* x, int cin, const Dims& in, const Dims& out, const Stride& s, float* col) {
  const std::size_t nout = out.count();
  const std::size_t in_plane = in.count();
#pragma omp parallel for collapse(2) schedule(static)
  for (int ci = 0; ci < cin; ++ci) {
    for (int tap = 0; tap < kTaps; ++tap) {
      const int kz = tap / 9, ky = (tap / 3) % 3, kx = tap % 3;
      float* dst = col + (static_cast<std::size_t>(ci) * kTaps + tap) * nout;
      const float* src = x + static_cast<std::size_t>(ci) * in_plane;
      const auto [ox_lo, ox_hi] = valid_columns(kx, s[0], in.x, out.x);
      for (int oz = 0; oz < out.z; ++oz) {
        const int iz = oz * s[2] + kz - 1;
        for (int oy = 0; oy < out.y; ++oy, dst += out.x) {
          const int iy = oy * s[1] + ky - 1;
          if (iz < 0 || iz >= in.z || iy < 0 || iy >= in.y) {
            std::memset(dst, 0, sizeof(float) * out.x);
            continue;
          }
          const float* row = src + (static_cast<std::size_t>(iz) * in.y + iy) * in.x;
          for (int ox = 0; ox < ox_lo; ++ox) dst[ox] = 0.0f;
          if (s[0] == 1) {
            std::memcpy(dst + ox_lo, row + ox_lo + kx - 1, sizeof(float) * (ox_hi - ox_lo));
          } else {
            for (int ox = ox_lo; ox < ox_hi; ++ox) dst[ox] = row[ox * s[0] + kx - 1];
          }
          for (int ox = ox_hi; ox < out.x; ++ox) dst[ox] = 0.0f;
        }
      }
    }
  }
}

void col2im(const float* col, int cin, const Dims& in, const Dims& out, const Stride& s, float* dx) {
  const std::size_t nout = out.count();
  const std::size_t in_plane = in.count();
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < cin; ++ci) {
    float* dst = dx + static_cast<std::size_t>(ci) * in_plane;
    std::fill(dst, dst + in_plane, 0.0f);
    for (int tap = 0; tap < kTaps; ++tap) {
      const int kz = tap / 9, ky = (tap / 3) % 3, kx = tap % 3;
      const float* src = col + (static_cast<std::size_t>(ci) * kTaps + tap) * nout;
      const auto [ox_lo, ox_hi] = valid_columns(kx, s[0], in.x, out.x);
      for (int oz = 0; oz < out.z; ++oz) {
        const int iz = oz * s[2] + kz - 1;
        for (int oy = 0; oy < out.y; ++oy, src += out.x) {
          const int iy = oy * s[1] + ky - 1;
          if (iz < 0 || iz >= in.z || iy < 0 || iy >= in.y) continue;
          float* row = dst + (static_cast<std::size_t>(iz) * in.y + iy) * in.x;
          for (int ox = ox_lo; ox < ox_hi; ++ox) row[ox * s[0] + kx - 1] += src[ox];
        }
      }
    }
  }
}

std::size_t kernel_volume(const Stride& s) { return static_cast<std::size_t>(s[0]) * s[1] * s[2]; }

}  // namespace

void conv3d_forward(const Tensor& x, std::span<const float> weight, std::span<const float> bias, int out_channels,
                    const Stride& stride, Tensor& y, Workspace& ws) {
  const Shape& xs = x.shape();
  const int cin = xs.c;
  const std::size_t k = static_cast<std::size_t>(cin) * kTaps;
  if (weight.size() != static_cast<std::size_t>(out_channels) * k || bias.size() != static_cast<std::size_t>(out_channels))
    throw ContractError("conv3d weight shape mismatch");
  const Dims od = conv_output_dims(xs.dims, stride);
  y.reshape(Shape{xs.n, out_channels, od});
  const std::size_t nout = od.count();
  ws.col.resize(k * nout);
  for (int n = 0; n < xs.n; ++n) {
    im2col(x.sample(n), cin, xs.dims, od, stride, ws.col.data());
    float* out = y.sample(n);
#pragma omp parallel for schedule(static)
    for (int co = 0; co < out_channels; ++co) std::fill(out + co * nout, out + (co + 1) * nout, bias[co]);
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, out_channels, static_cast<int>(nout),
                static_cast<int>(k), 1.0f, weight.data(), static_cast<int>(k), ws.col.data(),
                static_cast<int>(nout), 1.0f, out, static_cast<int>(nout));
  }
}

void conv3d_backward(const Tensor& x, const Tensor& dy, std::span<const float> weight, const Stride& stride,
                     Tensor* dx, std::span<float> dweight, std::span<float> dbias, Workspace& ws) {
  const Shape& xs = x.shape();
  const Shape& ys = dy.shape();
  const int cin = xs.c, cout = ys.c;
  const std::size_t k = static_cast<std::size_t>(cin) * kTaps;
  const std::size_t nout = ys.plane();
  if (dweight.size() != weight.size() || dbias.size() != static_cast<std::size_t>(cout))
    throw ContractError("conv3d gradient buffer mismatch");
  ws.col.resize(k * nout);
  if (dx) dx->reshape(xs);

#pragma omp parallel for schedule(static)
  for (int co = 0; co < cout; ++co) {
    double acc = 0.0;
    for (int n = 0; n < ys.n; ++n) {
      const float* g = dy.channel(n, co);
      for (std::size_t i = 0; i < nout; ++i) acc += g[i];
    }
    dbias[co] += static_cast<float>(acc);
  }

  for (int n = 0; n < xs.n; ++n) {
    im2col(x.sample(n), cin, xs.dims, ys.dims, stride, ws.col.data());
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, cout, static_cast<int>(k), static_cast<int>(nout), 1.0f,
                dy.sample(n), static_cast<int>(nout), ws.col.data(), static_cast<int>(nout), 1.0f, dweight.data(),
                static_cast<int>(k));
    if (!dx) continue;
    cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(k), static_cast<int>(nout), cout, 1.0f,
                weight.data(), static_cast<int>(k), dy.sample(n), static_cast<int>(nout), 0.0f, ws.col.data(),
                static_cast<int>(nout));
    col2im(ws.col.data(), cin, xs.dims, ys.dims, stride, dx->sample(n));
  }
}

void upconv_forward(const Tensor& x, std::span<const float> weight, std::span<const float> bias, int out_channels,
                    const Stride& stride, Tensor& y, Workspace& ws) {
  const Shape& xs = x.shape();
  const std::size_t kv = kernel_volume(stride);
  const std::size_t rows = static_cast<std::size_t>(out_channels) * kv;
  if (weight.size() != static_cast<std::size_t>(xs.c) * rows || bias.size() != static_cast<std::size_t>(out_channels))
    throw ContractError("upconv weight shape mismatch");
  const Dims od = upsample_dims(xs.dims, stride);
  y.reshape(Shape{xs.n, out_channels, od});
  const std::size_t nin = xs.plane();
  ws.tmp.resize(rows * nin);
  const Dims in = xs.dims;
  for (int n = 0; n < xs.n; ++n) {
    cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(rows), static_cast<int>(nin), xs.c, 1.0f,
                weight.data(), static_cast<int>(rows), x.sample(n), static_cast<int>(nin), 0.0f, ws.tmp.data(),
                static_cast<int>(nin));
#pragma omp parallel for schedule(static)
    for (int co = 0; co < out_channels; ++co) {
      float* out = y.channel(n, co);
      for (std::size_t t = 0; t < kv; ++t) {
        const int kx = static_cast<int>(t) % stride[0];
        const int ky = (static_cast<int>(t) / stride[0]) % stride[1];
        const int kz = static_cast<int>(t) / (stride[0] * stride[1]);
        const float* src = ws.tmp.data() + (co * kv + t) * nin;
        for (int iz = 0; iz < in.z; ++iz)
          for (int iy = 0; iy < in.y; ++iy)
            for (int ix = 0; ix < in.x; ++ix, ++src)
              out[od.index(ix * stride[0] + kx, iy * stride[1] + ky, iz * stride[2] + kz)] = *src + bias[co];
      }
    }
  }
}

void upconv_backward(const Tensor& x, const Tensor& dy, std::span<const float> weight, const Stride& stride,
                     Tensor* dx, std::span<float> dweight, std::span<float> dbias, Workspace& ws) {
  const Shape& xs = x.shape();
  const Shape& ys = dy.shape();
  const int cout = ys.c;
  const std::size_t kv = kernel_volume(stride);
  const std::size_t rows = static_cast<std::size_t>(cout) * kv;
  if (dweight.size() != weight.size() || dbias.size() != static_cast<std::size_t>(cout))
    throw ContractError("upconv gradient buffer mismatch");
  const std::size_t nin = xs.plane();
  const Dims in = xs.dims, od = ys.dims;
  ws.tmp.resize(rows * nin);
  if (dx) dx->reshape(xs);

#pragma omp parallel for schedule(static)
  for (int co = 0; co < cout; ++co) {
    double acc = 0.0;
    for (int n = 0; n < ys.n; ++n) {
      const float* g = dy.channel(n, co);
      for (std::size_t i = 0; i < ys.plane(); ++i) acc += g[i];
    }
    dbias[co] += static_cast<float>(acc);
  }

  for (int n = 0; n < xs.n; ++n) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < cout; ++co) {
      const float* g = dy.channel(n, co);
      for (std::size_t t = 0; t < kv; ++t) {
        const int kx = static_cast<int>(t) % stride[0];
        const int ky = (static_cast<int>(t) / stride[0]) % stride[1];
        const int kz = static_cast<int>(t) / (stride[0] * stride[1]);
        float* dst = ws.tmp.data() + (co * kv + t) * nin;
        for (int iz = 0; iz < in.z; ++iz)
          for (int iy = 0; iy < in.y; ++iy)
            for (int ix = 0; ix < in.x; ++ix, ++dst)
              *dst = g[od.index(ix * stride[0] + kx, iy * stride[1] + ky, iz * stride[2] + kz)];
      }
    }
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, xs.c, static_cast<int>(rows), static_cast<int>(nin), 1.0f,
                x.sample(n), static_cast<int>(nin), ws.tmp.data(), static_cast<int>(nin), 1.0f, dweight.data(),
                static_cast<int>(rows));
    if (!dx) continue;
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, xs.c, static_cast<int>(nin), static_cast<int>(rows), 1.0f,
                weight.data(), static_cast<int>(rows), ws.tmp.data(), static_cast<int>(nin), 0.0f, dx->sample(n),
                static_cast<int>(nin));
  }
}

void norm_act_forward(const Tensor& x, std::span<const float> gamma, std::span<const float> beta, Tensor& y,
                      std::vector<float>& mean, std::vector<float>& inv_std) {
  const Shape& s = x.shape();
  y.reshape(s);
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  const std::size_t m = s.plane();
  mean.resize(planes);
  inv_std.resize(planes);
#pragma omp parallel for schedule(static)
  for (std::size_t p = 0; p < planes; ++p) {
    const int c = static_cast<int>(p % s.c);
    const float* in = x.ptr() + p * m;
    float* out = y.ptr() + p * m;
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) sum += in[i];
    const double mu = sum / static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) ss += (in[i] - mu) * (in[i] - mu);
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(m) + kNormEpsilon);
    mean[p] = static_cast<float>(mu);
    inv_std[p] = static_cast<float>(inv);
    const float scale = static_cast<float>(gamma[c] * inv);
    const float shift = static_cast<float>(beta[c] - gamma[c] * inv * mu);
    for (std::size_t i = 0; i < m; ++i) {
      const float v = in[i] * scale + shift;
      out[i] = v > 0.0f ? v : kLeakySlope * v;
    }
  }
}

void norm_act_backward(const Tensor& x, const Tensor& y, Tensor& dy, std::span<const float> gamma,
                       const std::vector<float>& mean, const std::vector<float>& inv_std, Tensor& dx,
                       std::span<float> dgamma, std::span<float> dbeta) {
  const Shape& s = x.shape();
  dx.reshape(s);
  const std::size_t m = s.plane();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < s.c; ++c) {
    double dg = 0.0, db = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const std::size_t p = static_cast<std::size_t>(n) * s.c + c;
      const float* in = x.ptr() + p * m;
      const float* out = y.ptr() + p * m;
      float* g = dy.ptr() + p * m;
      float* d = dx.ptr() + p * m;
      const double mu = mean[p], inv = inv_std[p];
      double sum_g = 0.0, sum_gx = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (!(out[i] > 0.0f)) g[i] *= kLeakySlope;
        const double xhat = (in[i] - mu) * inv;
        sum_g += g[i];
        sum_gx += g[i] * xhat;
      }
      dg += sum_gx;
      db += sum_g;
      const double md = static_cast<double>(m);
      const double a = gamma[c] * inv;
      const double mean_g = sum_g / md, mean_gx = sum_gx / md;
      for (std::size_t i = 0; i < m; ++i) {
        const double xhat = (in[i] - mu) * inv;
        d[i] = static_cast<float>(a * (g[i] - mean_g - xhat * mean_gx));
      }
    }
    dgamma[c] += static_cast<float>(dg);
    dbeta[c] += static_cast<float>(db);
  }
}

void concat_channels(const Tensor& a, const Tensor& b, Tensor& out) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.n != bs.n || !(as.dims == bs.dims)) throw ContractError("concat operands differ in batch or extent");
  out.reshape(Shape{as.n, as.c + bs.c, as.dims});
  for (int n = 0; n < as.n; ++n) {
    std::copy(a.sample(n), a.sample(n) + as.sample(), out.sample(n));
    std::copy(b.sample(n), b.sample(n) + bs.sample(), out.sample(n) + as.sample());
  }
}

void split_channels(const Tensor& d, Tensor& da, Tensor& db_accumulate) {
  const Shape& as = da.shape();
  const Shape& bs = db_accumulate.shape();
  for (int n = 0; n < as.n; ++n) {
    const float* src = d.sample(n);
    std::copy(src, src + as.sample(), da.sample(n));
    float* dst = db_accumulate.sample(n);
    const float* tail = src + as.sample();
    for (std::size_t i = 0; i < bs.sample(); ++i) dst[i] += tail[i];
  }
}

void add_inplace(Tensor& dst, const Tensor& src) {
  if (!(dst.shape() == src.shape())) throw ContractError("add_inplace shape mismatch");
  float* d = dst.ptr();
  const float* s = src.ptr();
  const std::size_t n = dst.shape().count();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) d[i] += s[i];
}

}  // namespace nnlm::kernels
