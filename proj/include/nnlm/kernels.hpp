#pragma once

#include <span>
#include <vector>

#include "nnlm/tensor.hpp"

namespace nnlm::kernels {

// Data-parallel float kernels used by the network. Outer loops are OpenMP-parallel over
// disjoint outputs and matrix products go through BLAS, so results do not depend on the
// thread count. Serial double-capable counterparts live in reference_kernels.hpp.

/// Scratch buffers reused across calls.
struct Workspace {
  std::vector<float> col;
  std::vector<float> tmp;
};

// 3x3x3 convolution, padding 1. Weight layout [out][in][kz][ky][kx].
void conv3d_forward(const Tensor& x, std::span<const float> weight, std::span<const float> bias, int out_channels,
                    const Stride& stride, Tensor& y, Workspace& ws);
/// Accumulates into dweight/dbias; overwrites dx when non-null.
void conv3d_backward(const Tensor& x, const Tensor& dy, std::span<const float> weight, const Stride& stride,
                     Tensor* dx, std::span<float> dweight, std::span<float> dbias, Workspace& ws);

// Transposed convolution with kernel == stride (non-overlapping). Weight layout
// [in][out][kz][ky][kx]; stride (1,1,1) is a pointwise convolution.
void upconv_forward(const Tensor& x, std::span<const float> weight, std::span<const float> bias, int out_channels,
                    const Stride& stride, Tensor& y, Workspace& ws);
void upconv_backward(const Tensor& x, const Tensor& dy, std::span<const float> weight, const Stride& stride,
                     Tensor* dx, std::span<float> dweight, std::span<float> dbias, Workspace& ws);

inline constexpr float kNormEpsilon = 1e-5f;
inline constexpr float kLeakySlope = 0.01f;

/// Instance normalization with affine parameters followed by LeakyReLU(0.01).
/// Saves per-(n, c) mean and inverse std for the backward pass.
void norm_act_forward(const Tensor& x, std::span<const float> gamma, std::span<const float> beta, Tensor& y,
                      std::vector<float>& mean, std::vector<float>& inv_std);
/// `y` is the forward output; dy is consumed in place as scratch.
void norm_act_backward(const Tensor& x, const Tensor& y, Tensor& dy, std::span<const float> gamma,
                       const std::vector<float>& mean, const std::vector<float>& inv_std, Tensor& dx,
                       std::span<float> dgamma, std::span<float> dbeta);

/// Channel concatenation [a, b].
void concat_channels(const Tensor& a, const Tensor& b, Tensor& out);
/// Splits a gradient of [a, b] back into its parts; `db` is accumulated, `da` overwritten.
void split_channels(const Tensor& d, Tensor& da, Tensor& db_accumulate);

void add_inplace(Tensor& dst, const Tensor& src);

}  // namespace nnlm::kernels
