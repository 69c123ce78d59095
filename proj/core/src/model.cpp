#include "mtseg/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace mtseg {
inline namespace MTSEG_ABI {

namespace {

Conv3dLayer make_conv(int in_c, int out_c, int k, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(in_c) * k * k * k;
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  std::vector<Real> w(static_cast<std::size_t>(out_c) * in_c * k * k * k);
  for (Real& v : w) v = static_cast<Real>(normal(rng));
  return {Tensor(Shape{out_c, in_c, k, k, k}, std::move(w), true), Tensor::zeros(Shape{1, out_c, 1, 1, 1}, true)};
}

BatchNormLayer make_bn(int channels) {
  return {Tensor::full(Shape{1, channels, 1, 1, 1}, Real(1), true), Tensor::zeros(Shape{1, channels, 1, 1, 1}, true),
          BatchNormState(channels)};
}

DoubleConv make_block(int in_c, int out_c, std::mt19937_64& rng) {
  DoubleConv b;
  b.conv1 = make_conv(in_c, out_c, 3, rng);
  b.bn1 = make_bn(out_c);
  b.conv2 = make_conv(out_c, out_c, 3, rng);
  b.bn2 = make_bn(out_c);
  return b;
}

Tensor run_block(DoubleConv& b, const Tensor& x, Mode mode) {
  Tensor h = relu(batchnorm3d(conv3d(x, b.conv1.weight, b.conv1.bias), b.bn1.scale, b.bn1.shift, b.bn1.state, mode));
  return relu(batchnorm3d(conv3d(h, b.conv2.weight, b.conv2.bias), b.bn2.scale, b.bn2.shift, b.bn2.state, mode));
}

}  // namespace

void validate_config(const UnetConfig& config) {
  if (config.in_channels < 1) throw std::invalid_argument("UnetConfig: in_channels must be >= 1");
  if (config.encoder_filters.size() != 4) throw std::invalid_argument("UnetConfig: encoder_filters needs exactly 4 entries");
  for (int f : config.encoder_filters) {
    if (f < 1) throw std::invalid_argument("UnetConfig: filter counts must be >= 1");
  }
  if (config.seg_classes < 1) throw std::invalid_argument("UnetConfig: seg_classes must be >= 1");
}

template <typename Fn>
void MtUnet::visit_blocks(Fn&& fn) const {
  for (int i = 0; i < 3; ++i) fn("enc" + std::to_string(i), encoder_[static_cast<std::size_t>(i)]);
  fn(std::string("bottleneck"), bottleneck_);
  for (int i = 2; i >= 0; --i) fn("dec" + std::to_string(i), decoder_[static_cast<std::size_t>(i)]);
}

template <typename Fn>
void MtUnet::visit_blocks(Fn&& fn) {
  for (int i = 0; i < 3; ++i) fn("enc" + std::to_string(i), encoder_[static_cast<std::size_t>(i)]);
  fn(std::string("bottleneck"), bottleneck_);
  for (int i = 2; i >= 0; --i) fn("dec" + std::to_string(i), decoder_[static_cast<std::size_t>(i)]);
}

MtUnet::MtUnet(const UnetConfig& config) : config_(config) {
  validate_config(config_);
  const auto& f = config_.encoder_filters;
  std::mt19937_64 rng(config_.seed);
  encoder_[0] = make_block(config_.in_channels, f[0], rng);
  encoder_[1] = make_block(f[0], f[1], rng);
  encoder_[2] = make_block(f[1], f[2], rng);
  bottleneck_ = make_block(f[2], f[3], rng);
  decoder_[2] = make_block(f[2] + f[3], f[2], rng);
  decoder_[1] = make_block(f[1] + f[2], f[1], rng);
  decoder_[0] = make_block(f[0] + f[1], f[0], rng);
  seg_head_ = make_conv(f[0], config_.seg_classes, 1, rng);
  if (config_.multitask) recon_head_ = make_conv(f[0], 1, 1, rng);
}

ForwardResult MtUnet::forward(const Tensor& input, Mode mode) {
  const Shape s = input.shape();
  if (s.c != config_.in_channels) {
    throw std::invalid_argument("MtUnet: expected " + std::to_string(config_.in_channels) + " input channels, got " +
                                std::to_string(s.c));
  }
  if (s.x % 8 || s.y % 8 || s.z % 8) {
    throw std::invalid_argument("MtUnet: spatial dims must be divisible by 8, got " + s.str());
  }
  std::array<Tensor, 3> skips;
  Tensor h = input;
  for (std::size_t i = 0; i < 3; ++i) {
    skips[i] = run_block(encoder_[i], h, mode);
    h = maxpool3d_2(skips[i]);
  }
  h = run_block(bottleneck_, h, mode);
  for (int i = 2; i >= 0; --i) {
    const auto idx = static_cast<std::size_t>(i);
    h = run_block(decoder_[idx], concat_channels(skips[idx], upsample3d_2(h)), mode);
  }
  ForwardResult out;
  out.seg = sigmoid(conv3d(h, seg_head_.weight, seg_head_.bias));
  if (recon_head_) out.recon = conv3d(h, recon_head_->weight, recon_head_->bias);
  return out;
}

std::vector<std::pair<std::string, Tensor>> MtUnet::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  visit_blocks([&out](const std::string& name, const DoubleConv& b) {
    out.emplace_back(name + ".conv1.weight", b.conv1.weight);
    out.emplace_back(name + ".conv1.bias", b.conv1.bias);
    out.emplace_back(name + ".bn1.scale", b.bn1.scale);
    out.emplace_back(name + ".bn1.shift", b.bn1.shift);
    out.emplace_back(name + ".conv2.weight", b.conv2.weight);
    out.emplace_back(name + ".conv2.bias", b.conv2.bias);
    out.emplace_back(name + ".bn2.scale", b.bn2.scale);
    out.emplace_back(name + ".bn2.shift", b.bn2.shift);
  });
  out.emplace_back("seg_head.weight", seg_head_.weight);
  out.emplace_back("seg_head.bias", seg_head_.bias);
  if (recon_head_) {
    out.emplace_back("recon_head.weight", recon_head_->weight);
    out.emplace_back("recon_head.bias", recon_head_->bias);
  }
  return out;
}

std::vector<Tensor> MtUnet::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t MtUnet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += t.size();
  return n;
}

std::vector<NamedTensor> MtUnet::state_dict() const {
  std::vector<NamedTensor> out;
  for (const auto& [name, t] : named_parameters()) {
    out.push_back({name, t.shape(), std::vector<Real>(t.values().begin(), t.values().end())});
  }
  visit_blocks([&out](const std::string& name, const DoubleConv& b) {
    const auto add_stats = [&](const std::string& bn, const BatchNormState& s) {
      const int c = static_cast<int>(s.running_mean.size());
      out.push_back({name + "." + bn + ".running_mean", Shape{1, c, 1, 1, 1}, s.running_mean});
      out.push_back({name + "." + bn + ".running_var", Shape{1, c, 1, 1, 1}, s.running_var});
    };
    add_stats("bn1", b.bn1.state);
    add_stats("bn2", b.bn2.state);
  });
  return out;
}

void MtUnet::load_state_dict(const std::vector<NamedTensor>& state) {
  std::vector<std::pair<std::string, std::span<Real>>> slots;
  for (auto& [name, t] : named_parameters()) {
    Tensor handle = t;
    slots.emplace_back(name, handle.mutable_values());
  }
  visit_blocks([&slots](const std::string& name, DoubleConv& b) {
    slots.emplace_back(name + ".bn1.running_mean", std::span<Real>(b.bn1.state.running_mean));
    slots.emplace_back(name + ".bn1.running_var", std::span<Real>(b.bn1.state.running_var));
    slots.emplace_back(name + ".bn2.running_mean", std::span<Real>(b.bn2.state.running_mean));
    slots.emplace_back(name + ".bn2.running_var", std::span<Real>(b.bn2.state.running_var));
  });
  if (slots.size() != state.size()) {
    throw std::invalid_argument("load_state_dict: expected " + std::to_string(slots.size()) + " tensors, got " +
                                std::to_string(state.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].first != state[i].name || slots[i].second.size() != state[i].values.size()) {
      throw std::invalid_argument("load_state_dict: entry " + std::to_string(i) + " is '" + state[i].name +
                                  "', expected '" + slots[i].first + "' of matching size");
    }
    std::copy(state[i].values.begin(), state[i].values.end(), slots[i].second.begin());
  }
}

MtUnet MtUnet::clone() const {
  MtUnet copy(config_);
  copy.load_state_dict(state_dict());
  return copy;
}

void MtUnet::zero_grad() {
  for (auto& [name, t] : named_parameters()) {
    Tensor handle = t;
    handle.zero_grad();
  }
}

MtUnet build_model(const UnetConfig& config) { return MtUnet(config); }

}  // namespace MTSEG_ABI
}  // namespace mtseg
