#pragma once

// Finite-difference cases for every differentiable operation plus a small
// U-Net. Shared by the gradient unit tests and the acceptance binary; 64-bit
// translation units only.

#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "mtseg/losses.hpp"
#include "mtseg/model.hpp"
#include "mtseg/ops.hpp"

namespace mtseg_test {

struct GradCase {
  std::string name;
  double tolerance;  ///< max relative error allowed
  std::function<GradReport()> run;
};

inline constexpr double kElementwiseTolerance = 1e-6;
inline constexpr double kCompositeTolerance = 1e-4;

// The model check perturbs thousands of relu/maxpool inputs at once; a small
// step keeps kinks out of the stencil and the floor absorbs roundoff on
// near-zero gradients of an O(1) loss.
inline constexpr double kModelStep = 1e-6;
inline constexpr double kModelFloor = 1e-4;

/// Uniform in +-[lo, hi], keeping values away from the kinks at zero.
inline Tensor signed_away_from_zero(Shape shape, std::mt19937_64& rng, double lo = 0.1, double hi = 1.0) {
  std::uniform_real_distribution<double> mag(lo, hi);
  std::bernoulli_distribution sign(0.5);
  std::vector<Real> v(shape.count());
  for (auto& x : v) x = sign(rng) ? mag(rng) : -mag(rng);
  return Tensor(shape, std::move(v), true);
}

inline Tensor binary_target(Shape shape, std::mt19937_64& rng) {
  std::bernoulli_distribution bit(0.3);
  std::vector<Real> v(shape.count());
  for (auto& x : v) x = bit(rng) ? 1.0 : 0.0;
  return Tensor(shape, std::move(v), false);
}

inline std::vector<GradCase> gradient_cases() {
  using namespace mtseg;
  std::vector<GradCase> cases;

  cases.push_back({"relu", kElementwiseTolerance, [] {
                     std::mt19937_64 rng(1);
                     Tensor x = signed_away_from_zero({2, 2, 3, 3, 3}, rng);
                     return check_gradients([=] { return weighted_sum(relu(x)); }, {x}, 54);
                   }});
  cases.push_back({"sigmoid", kElementwiseTolerance, [] {
                     std::mt19937_64 rng(2);
                     Tensor x = random_tensor({2, 2, 3, 3, 3}, rng, -3.0, 3.0);
                     return check_gradients([=] { return weighted_sum(sigmoid(x)); }, {x}, 54);
                   }});
  cases.push_back({"add", kElementwiseTolerance, [] {
                     std::mt19937_64 rng(3);
                     Tensor a = random_tensor({1, 2, 3, 2, 2}, rng);
                     Tensor b = random_tensor({1, 2, 3, 2, 2}, rng);
                     return check_gradients([=] { return weighted_sum(add(a, b)); }, {a, b});
                   }});
  cases.push_back({"scale", kElementwiseTolerance, [] {
                     std::mt19937_64 rng(4);
                     Tensor a = random_tensor({1, 2, 3, 2, 2}, rng);
                     return check_gradients([=] { return weighted_sum(scale(a, Real(-1.75))); }, {a});
                   }});
  cases.push_back({"concat_channels", kCompositeTolerance, [] {
                     std::mt19937_64 rng(5);
                     Tensor a = random_tensor({2, 2, 2, 2, 2}, rng);
                     Tensor b = random_tensor({2, 3, 2, 2, 2}, rng);
                     return check_gradients([=] { return weighted_sum(concat_channels(a, b)); }, {a, b});
                   }});
  cases.push_back({"upsample3d_2", kCompositeTolerance, [] {
                     std::mt19937_64 rng(6);
                     Tensor a = random_tensor({1, 2, 2, 3, 2}, rng);
                     return check_gradients([=] { return weighted_sum(upsample3d_2(a)); }, {a});
                   }});
  cases.push_back({"maxpool3d_2", kCompositeTolerance, [] {
                     std::mt19937_64 rng(7);
                     Tensor a = random_tensor({2, 2, 4, 4, 2}, rng);
                     return check_gradients([=] { return weighted_sum(maxpool3d_2(a)); }, {a}, 64);
                   }});
  cases.push_back({"conv3d_same", kCompositeTolerance, [] {
                     std::mt19937_64 rng(8);
                     Tensor x = random_tensor({2, 2, 4, 3, 5}, rng);
                     Tensor w = random_tensor({3, 2, 3, 3, 3}, rng);
                     Tensor b = random_tensor({1, 3, 1, 1, 1}, rng);
                     return check_gradients([=] { return weighted_sum(conv3d(x, w, b)); }, {x, w, b});
                   }});
  cases.push_back({"conv3d_valid", kCompositeTolerance, [] {
                     std::mt19937_64 rng(9);
                     Tensor x = random_tensor({1, 2, 5, 4, 4}, rng);
                     Tensor w = random_tensor({2, 2, 3, 3, 3}, rng);
                     return check_gradients([=] { return weighted_sum(conv3d(x, w, Tensor(), Padding::none)); },
                                            {x, w});
                   }});
  cases.push_back({"conv3d_pointwise", kCompositeTolerance, [] {
                     std::mt19937_64 rng(10);
                     Tensor x = random_tensor({2, 3, 2, 3, 2}, rng);
                     Tensor w = random_tensor({2, 3, 1, 1, 1}, rng);
                     Tensor b = random_tensor({1, 2, 1, 1, 1}, rng);
                     return check_gradients([=] { return weighted_sum(conv3d(x, w, b)); }, {x, w, b});
                   }});
  cases.push_back({"batchnorm3d_train", kCompositeTolerance, [] {
                     std::mt19937_64 rng(11);
                     Tensor x = random_tensor({2, 3, 3, 2, 2}, rng, -2.0, 2.0);
                     Tensor g = random_tensor({1, 3, 1, 1, 1}, rng, 0.5, 1.5);
                     Tensor b = random_tensor({1, 3, 1, 1, 1}, rng);
                     return check_gradients(
                         [=] {
                           BatchNormState state(3);
                           return weighted_sum(batchnorm3d(x, g, b, state, Mode::train));
                         },
                         {x, g, b});
                   }});
  cases.push_back({"batchnorm3d_eval", kCompositeTolerance, [] {
                     std::mt19937_64 rng(12);
                     Tensor x = random_tensor({2, 3, 2, 2, 2}, rng, -2.0, 2.0);
                     Tensor g = random_tensor({1, 3, 1, 1, 1}, rng, 0.5, 1.5);
                     Tensor b = random_tensor({1, 3, 1, 1, 1}, rng);
                     BatchNormState state(3);
                     state.running_mean = {0.1, -0.2, 0.3};
                     state.running_var = {0.5, 1.5, 2.0};
                     return check_gradients(
                         [=]() mutable { return weighted_sum(batchnorm3d(x, g, b, state, Mode::eval)); }, {x, g, b});
                   }});
  cases.push_back({"bce", kCompositeTolerance, [] {
                     std::mt19937_64 rng(13);
                     Tensor p = random_tensor({2, 2, 2, 2, 2}, rng, 0.05, 0.95);
                     Tensor t = binary_target({2, 2, 2, 2, 2}, rng);
                     return check_gradients([=] { return bce(p, t); }, {p});
                   }});
  cases.push_back({"soft_dice_loss", kCompositeTolerance, [] {
                     std::mt19937_64 rng(14);
                     Tensor p = random_tensor({2, 2, 2, 2, 2}, rng, 0.05, 0.95);
                     Tensor t = binary_target({2, 2, 2, 2, 2}, rng);
                     return check_gradients([=] { return soft_dice_loss(p, t); }, {p});
                   }});
  cases.push_back({"l2", kCompositeTolerance, [] {
                     std::mt19937_64 rng(15);
                     Tensor r = random_tensor({2, 1, 3, 2, 2}, rng);
                     Tensor t = random_tensor({2, 1, 3, 2, 2}, rng);
                     return check_gradients([=] { return l2(r, t); }, {r, t});
                   }});
  cases.push_back({"loss1", kCompositeTolerance, [] {
                     std::mt19937_64 rng(16);
                     Tensor p = random_tensor({1, 2, 3, 3, 2}, rng, 0.05, 0.95);
                     Tensor t = binary_target({1, 2, 3, 3, 2}, rng);
                     return check_gradients([=] { return loss1(p, t); }, {p});
                   }});
  cases.push_back({"loss2", kCompositeTolerance, [] {
                     std::mt19937_64 rng(17);
                     Tensor p = random_tensor({1, 2, 3, 3, 2}, rng, 0.05, 0.95);
                     Tensor t = binary_target({1, 2, 3, 3, 2}, rng);
                     Tensor r = random_tensor({1, 1, 3, 3, 2}, rng);
                     Tensor rt = random_tensor({1, 1, 3, 3, 2}, rng, 0.0, 1.0, false);
                     return check_gradients([=] { return loss2(p, t, r, rt, 0.8); }, {p, r});
                   }});
  cases.push_back({"micro_unet", kCompositeTolerance, [] {
                     UnetConfig cfg;
                     cfg.encoder_filters = {3, 3, 3, 3};
                     cfg.multitask = true;
                     cfg.seed = 21;
                     auto model = std::make_shared<MtUnet>(cfg);
                     std::mt19937_64 rng(18);
                     Tensor x = random_tensor({2, 1, 8, 8, 8}, rng, 0.0, 1.0);
                     Tensor t = binary_target({2, 2, 8, 8, 8}, rng);
                     Tensor rt = random_tensor({2, 1, 8, 8, 8}, rng, 0.0, 1.0, false);
                     std::vector<Tensor> inputs = model->parameters();
                     inputs.push_back(x);
                     return check_gradients(
                         [=] {
                           const ForwardResult out = model->forward(x, Mode::train);
                           return loss2(out.seg, t, *out.recon, rt, 0.8);
                         },
                         inputs, 8, kModelStep, kModelFloor);
                   }});
  return cases;
}

}  // namespace mtseg_test
