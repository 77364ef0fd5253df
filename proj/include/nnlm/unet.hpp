#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nnlm/io_util.hpp"
#include "nnlm/kernels.hpp"
#include "nnlm/plan.hpp"
#include "nnlm/rng.hpp"

namespace nnlm {

struct Param {
  std::string name;
  std::vector<float> value;
  std::vector<float> grad;
};

/// Plain U-Net topology: two conv-norm-act blocks per stage, strided-conv downsampling,
/// transposed-conv upsampling, skip concatenation, pointwise head producing logits.
struct NetworkSpec {
  int input_channels = 1;
  int output_channels = 1;
  std::vector<int> widths;
  /// Stride of the first convolution of each stage; stage 0 is (1,1,1).
  std::vector<Stride> strides;
  std::array<int, 3> patch_size{32, 32, 32};
  int max_channels = 128;

  [[nodiscard]] int stages() const { return static_cast<int>(widths.size()); }
  void validate() const;
};

NetworkSpec network_spec_from_plan(const Plan& plan);
Json network_spec_to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const Json& j);

class UNet {
public:
  UNet(NetworkSpec spec, std::uint64_t seed);

  [[nodiscard]] const NetworkSpec& spec() const { return spec_; }

  /// Logits of shape N x output_channels x input extent. Input extent must be divisible by
  /// the accumulated strides. Activations are kept for backward().
  const Tensor& forward(const Tensor& input);
  /// Accumulates parameter gradients for the last forward().
  void backward(const Tensor& dlogits);

  void zero_grad();
  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;
  [[nodiscard]] std::size_t parameter_count() const;

private:
  struct ConvBlock {
    Param weight, bias, gamma, beta;
    int cin = 0, cout = 0;
    Stride stride{1, 1, 1};
    const Tensor* input = nullptr;
    Tensor z, a, dz, dpre, dinput;
    std::vector<float> mean, inv_std;
  };
  struct UpConv {
    Param weight, bias;
    int cin = 0, cout = 0;
    Stride stride{1, 1, 1};
    const Tensor* input = nullptr;
    Tensor out, dinput;
  };
  struct EncoderStage {
    std::vector<ConvBlock> blocks;
    Tensor dout;
  };
  struct DecoderStage {
    UpConv up;
    Tensor cat, dup;
    std::vector<ConvBlock> blocks;
  };

  ConvBlock make_block(const std::string& name, int cin, int cout, const Stride& stride, Rng& rng);
  UpConv make_up(const std::string& name, int cin, int cout, const Stride& stride, Rng& rng);
  const Tensor& run_block(ConvBlock& b, const Tensor& x);
  const Tensor& back_block(ConvBlock& b, const Tensor& da, bool need_input_grad = true);

  NetworkSpec spec_;
  std::vector<EncoderStage> encoder_;
  std::vector<DecoderStage> decoder_;  // decoder_[s] ends at resolution of encoder stage s
  UpConv head_;
  Tensor input_;
  kernels::Workspace ws_;
};

/// SGD with Nesterov momentum and L2 weight decay, with global gradient-norm clipping.
class SgdNesterov {
public:
  SgdNesterov(double momentum, double weight_decay, double clip_norm = 12.0)
      : momentum_(momentum), weight_decay_(weight_decay), clip_norm_(clip_norm) {}

  /// Returns the pre-clipping gradient norm. A non-finite norm skips the update.
  double step(const std::vector<Param*>& params, double lr);

  std::vector<std::vector<float>>& buffers() { return buffers_; }
  const std::vector<std::vector<float>>& buffers() const { return buffers_; }

private:
  double momentum_;
  double weight_decay_;
  double clip_norm_;
  std::vector<std::vector<float>> buffers_;
};

}  // namespace nnlm
