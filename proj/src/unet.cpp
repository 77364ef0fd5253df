#include "nnlm/unet.hpp"

#include <cmath>

namespace nnlm {

void NetworkSpec::validate() const {
  if (widths.empty() || widths.size() != strides.size()) throw ConfigError("network spec has no stages");
  if (input_channels < 1 || output_channels < 1) throw ConfigError("channel counts must be >= 1");
  for (int w : widths) {
    if (w < 1 || w > max_channels) throw ConfigError("stage width outside [1, max_channels]");
  }
  for (int a = 0; a < 3; ++a) {
    int total = 1;
    for (const auto& s : strides) total *= s[a];
    if (patch_size[a] % total != 0)
      throw ConfigError("patch size " + std::to_string(patch_size[a]) + " is not divisible by the pooling factor " +
                        std::to_string(total));
    if (patch_size[a] / total < 4 && total > 1)
      throw ConfigError("patch is pooled below 4 voxels along axis " + std::to_string(a));
  }
}

NetworkSpec network_spec_from_plan(const Plan& plan) {
  plan.validate();
  NetworkSpec spec;
  spec.output_channels = plan.class_count();
  spec.patch_size = plan.patch_size;
  spec.max_channels = plan.max_channels;
  const int stages = 1 + std::max({plan.num_pool_per_axis[0], plan.num_pool_per_axis[1], plan.num_pool_per_axis[2]});
  for (int s = 0; s < stages; ++s) {
    spec.widths.push_back(std::min(plan.base_channels << s, plan.max_channels));
    Stride st{1, 1, 1};
    if (s > 0) {
      for (int a = 0; a < 3; ++a) st[a] = plan.num_pool_per_axis[a] >= s ? 2 : 1;
    }
    spec.strides.push_back(st);
  }
  spec.validate();
  return spec;
}

Json network_spec_to_json(const NetworkSpec& spec) {
  Json j;
  j["input_channels"] = spec.input_channels;
  j["output_channels"] = spec.output_channels;
  j["widths"] = spec.widths;
  j["strides"] = spec.strides;
  j["patch_size"] = spec.patch_size;
  j["max_channels"] = spec.max_channels;
  return j;
}

NetworkSpec network_spec_from_json(const Json& j) {
  NetworkSpec spec;
  spec.input_channels = j.at("input_channels").get<int>();
  spec.output_channels = j.at("output_channels").get<int>();
  spec.widths = j.at("widths").get<std::vector<int>>();
  spec.strides = j.at("strides").get<std::vector<Stride>>();
  spec.patch_size = j.at("patch_size").get<std::array<int, 3>>();
  spec.max_channels = j.at("max_channels").get<int>();
  spec.validate();
  return spec;
}

namespace {

Param make_param(std::string name, std::size_t n, float fill) {
  return Param{std::move(name), std::vector<float>(n, fill), std::vector<float>(n, 0.0f)};
}

// He initialisation for LeakyReLU(0.01) inputs.
void he_normal(Param& p, std::size_t fan_in, Rng& rng) {
  const double sd = std::sqrt(2.0 / (1.0 + 1e-4) / static_cast<double>(fan_in));
  for (auto& v : p.value) v = static_cast<float>(sd * normal(rng));
}

}  // namespace

UNet::ConvBlock UNet::make_block(const std::string& name, int cin, int cout, const Stride& stride, Rng& rng) {
  ConvBlock b;
  b.cin = cin;
  b.cout = cout;
  b.stride = stride;
  b.weight = make_param(name + ".conv.weight", static_cast<std::size_t>(cout) * cin * 27, 0.0f);
  he_normal(b.weight, static_cast<std::size_t>(cin) * 27, rng);
  b.bias = make_param(name + ".conv.bias", cout, 0.0f);
  b.gamma = make_param(name + ".norm.weight", cout, 1.0f);
  b.beta = make_param(name + ".norm.bias", cout, 0.0f);
  return b;
}

UNet::UpConv UNet::make_up(const std::string& name, int cin, int cout, const Stride& stride, Rng& rng) {
  UpConv u;
  u.cin = cin;
  u.cout = cout;
  u.stride = stride;
  const std::size_t kv = static_cast<std::size_t>(stride[0]) * stride[1] * stride[2];
  u.weight = make_param(name + ".weight", static_cast<std::size_t>(cin) * cout * kv, 0.0f);
  he_normal(u.weight, static_cast<std::size_t>(cin), rng);
  u.bias = make_param(name + ".bias", cout, 0.0f);
  return u;
}

UNet::UNet(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  Rng rng = make_rng(seed, "network_init");
  const int stages = spec_.stages();
  encoder_.resize(stages);
  int cin = spec_.input_channels;
  for (int s = 0; s < stages; ++s) {
    const int w = spec_.widths[s];
    const std::string prefix = "encoder." + std::to_string(s);
    encoder_[s].blocks.push_back(make_block(prefix + ".0", cin, w, spec_.strides[s], rng));
    encoder_[s].blocks.push_back(make_block(prefix + ".1", w, w, Stride{1, 1, 1}, rng));
    cin = w;
  }
  decoder_.resize(stages - 1);
  for (int s = stages - 2; s >= 0; --s) {
    const int w = spec_.widths[s];
    const std::string prefix = "decoder." + std::to_string(s);
    DecoderStage& d = decoder_[s];
    d.up = make_up(prefix + ".up", spec_.widths[s + 1], w, spec_.strides[s + 1], rng);
    d.blocks.push_back(make_block(prefix + ".0", 2 * w, w, Stride{1, 1, 1}, rng));
    d.blocks.push_back(make_block(prefix + ".1", w, w, Stride{1, 1, 1}, rng));
  }
  head_ = make_up("head", spec_.widths[0], spec_.output_channels, Stride{1, 1, 1}, rng);
}

const Tensor& UNet::run_block(ConvBlock& b, const Tensor& x) {
  b.input = &x;
  kernels::conv3d_forward(x, b.weight.value, b.bias.value, b.cout, b.stride, b.z, ws_);
  kernels::norm_act_forward(b.z, b.gamma.value, b.beta.value, b.a, b.mean, b.inv_std);
  return b.a;
}

const Tensor& UNet::back_block(ConvBlock& b, const Tensor& da, bool need_input_grad) {
  b.dz = da;
  kernels::norm_act_backward(b.z, b.a, b.dz, b.gamma.value, b.mean, b.inv_std, b.dpre, b.gamma.grad, b.beta.grad);
  kernels::conv3d_backward(*b.input, b.dpre, b.weight.value, b.stride, need_input_grad ? &b.dinput : nullptr, b.weight.grad, b.bias.grad, ws_);
  return b.dinput;
}

const Tensor& UNet::forward(const Tensor& input) {
  if (input.shape().c != spec_.input_channels) throw ContractError("network input has the wrong channel count");
  input_ = input;
  const Tensor* h = &input_;
  for (auto& stage : encoder_) {
    for (auto& b : stage.blocks) h = &run_block(b, *h);
  }
  for (int s = static_cast<int>(decoder_.size()) - 1; s >= 0; --s) {
    DecoderStage& d = decoder_[s];
    d.up.input = h;
    kernels::upconv_forward(*h, d.up.weight.value, d.up.bias.value, d.up.cout, d.up.stride, d.up.out, ws_);
    kernels::concat_channels(d.up.out, encoder_[s].blocks.back().a, d.cat);
    h = &d.cat;
    for (auto& b : d.blocks) h = &run_block(b, *h);
  }
  head_.input = h;
  kernels::upconv_forward(*h, head_.weight.value, head_.bias.value, head_.cout, head_.stride, head_.out, ws_);
  return head_.out;
}

void UNet::backward(const Tensor& dlogits) {
  if (!(dlogits.shape() == head_.out.shape())) throw ContractError("gradient shape does not match logits");
  kernels::upconv_backward(*head_.input, dlogits, head_.weight.value, head_.stride, &head_.dinput, head_.weight.grad,
                           head_.bias.grad, ws_);
  for (auto& stage : encoder_) {
    stage.dout.reshape(stage.blocks.back().a.shape());
    stage.dout.fill(0.0f);
  }
  const Tensor* d = &head_.dinput;
  for (std::size_t s = 0; s < decoder_.size(); ++s) {
    DecoderStage& dec = decoder_[s];
    for (auto it = dec.blocks.rbegin(); it != dec.blocks.rend(); ++it) d = &back_block(*it, *d);
    dec.dup.reshape(dec.up.out.shape());
    kernels::split_channels(*d, dec.dup, encoder_[s].dout);
    kernels::upconv_backward(*dec.up.input, dec.dup, dec.up.weight.value, dec.up.stride, &dec.up.dinput,
                             dec.up.weight.grad, dec.up.bias.grad, ws_);
    d = &dec.up.dinput;
  }
  // d now holds the gradient w.r.t. the bottleneck output.
  for (int s = static_cast<int>(encoder_.size()) - 1; s >= 0; --s) {
    EncoderStage& enc = encoder_[s];
    kernels::add_inplace(enc.dout, *d);
    d = &enc.dout;
    for (auto it = enc.blocks.rbegin(); it != enc.blocks.rend(); ++it) {
      const bool network_input = s == 0 && std::next(it) == enc.blocks.rend();
      d = &back_block(*it, *d, !network_input);
    }
  }
}

void UNet::zero_grad() {
  for (Param* p : parameters()) std::fill(p->grad.begin(), p->grad.end(), 0.0f);
}

std::vector<Param*> UNet::parameters() {
  std::vector<Param*> out;
  const auto add_block = [&](ConvBlock& b) {
    out.insert(out.end(), {&b.weight, &b.bias, &b.gamma, &b.beta});
  };
  for (auto& st : encoder_)
    for (auto& b : st.blocks) add_block(b);
  for (int s = static_cast<int>(decoder_.size()) - 1; s >= 0; --s) {
    out.push_back(&decoder_[s].up.weight);
    out.push_back(&decoder_[s].up.bias);
    for (auto& b : decoder_[s].blocks) add_block(b);
  }
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

std::vector<const Param*> UNet::parameters() const {
  auto ps = const_cast<UNet*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

std::size_t UNet::parameter_count() const {
  std::size_t n = 0;
  for (const Param* p : parameters()) n += p->value.size();
  return n;
}

double SgdNesterov::step(const std::vector<Param*>& params, double lr) {
  if (buffers_.size() != params.size()) {
    buffers_.clear();
    for (const Param* p : params) buffers_.emplace_back(p->value.size(), 0.0f);
  }
  double sq = 0.0;
  for (const Param* p : params)
    for (float g : p->grad) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) return norm;  // leave parameters untouched; caller aborts
  const double scale = norm > clip_norm_ ? clip_norm_ / (norm + 1e-6) : 1.0;
  const float mu = static_cast<float>(momentum_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    std::vector<float>& buf = buffers_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const float g = static_cast<float>(p.grad[j] * scale + weight_decay_ * p.value[j]);
      buf[j] = mu * buf[j] + g;
      p.value[j] -= static_cast<float>(lr) * (g + mu * buf[j]);
    }
  }
  return norm;
}

}  // namespace nnlm
