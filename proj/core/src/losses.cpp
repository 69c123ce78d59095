#include "mtseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mtseg/ops.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

namespace {

void require_match(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace

void validate_loss_config(const LossConfig& config) {
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (!(config.dice_epsilon > 0.0)) throw std::invalid_argument("dice_epsilon must be positive");
  if (!(config.bce_clamp > 0.0 && config.bce_clamp < 0.5)) throw std::invalid_argument("bce_clamp must lie in (0, 0.5)");
}

Tensor bce(const Tensor& probs, const Tensor& target, double clamp) {
  require_match(probs, target, "bce");
  const auto p = probs.values();
  const auto t = target.values();
  const double n = static_cast<double>(p.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(static_cast<double>(p[i]), clamp, 1.0 - clamp);
    sum -= t[i] * std::log(pc) + (1.0 - t[i]) * std::log(1.0 - pc);
  }
  return Tensor::make_result(Shape{}, {static_cast<Real>(sum / n)}, {probs, target}, [clamp, n](detail::TensorImpl& self) {
    auto& pn = *self.parents[0];
    auto& tn = *self.parents[1];
    const double g = self.grad[0] / n;
    if (pn.requires_grad) {
      auto gp = pn.grad_buffer();
      for (std::size_t i = 0; i < gp.size(); ++i) {
        const double pv = pn.values[i];
        if (pv < clamp || pv > 1.0 - clamp) continue;
        const double tv = tn.values[i];
        gp[i] += static_cast<Real>(g * (-tv / pv + (1.0 - tv) / (1.0 - pv)));
      }
    }
    if (tn.requires_grad) {
      auto gt = tn.grad_buffer();
      for (std::size_t i = 0; i < gt.size(); ++i) {
        const double pc = std::clamp(static_cast<double>(pn.values[i]), clamp, 1.0 - clamp);
        gt[i] += static_cast<Real>(g * (std::log(1.0 - pc) - std::log(pc)));
      }
    }
  });
}

Tensor soft_dice_loss(const Tensor& probs, const Tensor& target, double epsilon) {
  require_match(probs, target, "soft_dice_loss");
  const Shape s = probs.shape();
  const int C = s.c;
  const int N = s.n;
  const std::size_t S = s.spatial();
  std::vector<double> inter(static_cast<std::size_t>(C), 0.0);
  std::vector<double> denom(static_cast<std::size_t>(C), 0.0);
  const auto p = probs.values();
  const auto t = target.values();
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * S;
      for (std::size_t i = 0; i < S; ++i) {
        inter[static_cast<std::size_t>(c)] += static_cast<double>(p[off + i]) * t[off + i];
        denom[static_cast<std::size_t>(c)] += static_cast<double>(p[off + i]) + t[off + i];
      }
    }
  }
  double loss = 0.0;
  for (int c = 0; c < C; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    loss += 1.0 - (2.0 * inter[ci] + epsilon) / (denom[ci] + epsilon);
  }
  loss /= C;
  return Tensor::make_result(Shape{}, {static_cast<Real>(loss)}, {probs, target},
                             [=](detail::TensorImpl& self) {
                               const double g = self.grad[0] / C;
                               auto& pn = *self.parents[0];
                               auto& tn = *self.parents[1];
                               for (int n = 0; n < N; ++n) {
                                 for (int c = 0; c < C; ++c) {
                                   const auto ci = static_cast<std::size_t>(c);
                                   const double num = 2.0 * inter[ci] + epsilon;
                                   const double den = denom[ci] + epsilon;
                                   const std::size_t off = (static_cast<std::size_t>(n) * C + c) * S;
                                   // d/dp [-(num/den)] = -(2 t den - num) / den^2
                                   if (pn.requires_grad) {
                                     auto gp = pn.grad_buffer();
                                     for (std::size_t i = 0; i < S; ++i) {
                                       gp[off + i] += static_cast<Real>(g * -(2.0 * tn.values[off + i] * den - num) / (den * den));
                                     }
                                   }
                                   if (tn.requires_grad) {
                                     auto gt = tn.grad_buffer();
                                     for (std::size_t i = 0; i < S; ++i) {
                                       gt[off + i] += static_cast<Real>(g * -(2.0 * pn.values[off + i] * den - num) / (den * den));
                                     }
                                   }
                                 }
                               }
                             });
}

Tensor l2(const Tensor& recon, const Tensor& target) {
  require_match(recon, target, "l2");
  const auto r = recon.values();
  const auto t = target.values();
  const double n = static_cast<double>(r.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = static_cast<double>(r[i]) - t[i];
    sum += d * d;
  }
  return Tensor::make_result(Shape{}, {static_cast<Real>(sum / n)}, {recon, target}, [n](detail::TensorImpl& self) {
    auto& rn = *self.parents[0];
    auto& tn = *self.parents[1];
    const double g = 2.0 * self.grad[0] / n;
    for (std::size_t i = 0; i < rn.values.size(); ++i) {
      const double d = static_cast<double>(rn.values[i]) - tn.values[i];
      if (rn.requires_grad) rn.grad_buffer()[i] += static_cast<Real>(g * d);
      if (tn.requires_grad) tn.grad_buffer()[i] -= static_cast<Real>(g * d);
    }
  });
}

Tensor loss1(const Tensor& probs, const Tensor& target, const LossConfig& config) {
  return add(bce(probs, target, config.bce_clamp), soft_dice_loss(probs, target, config.dice_epsilon));
}

Tensor loss2(const Tensor& probs, const Tensor& seg_target, const Tensor& recon, const Tensor& recon_target,
             double alpha, const LossConfig& config) {
  LossConfig checked = config;
  checked.alpha = alpha;
  validate_loss_config(checked);
  return add(scale(loss1(probs, seg_target, config), static_cast<Real>(alpha)),
             scale(l2(recon, recon_target), static_cast<Real>(1.0 - alpha)));
}

std::vector<double> dice_score(const Tensor& probs, const Tensor& target, double threshold) {
  require_match(probs, target, "dice_score");
  const Shape s = probs.shape();
  const std::size_t S = s.spatial();
  std::vector<double> out(static_cast<std::size_t>(s.c));
  const auto p = probs.values();
  const auto t = target.values();
  for (int c = 0; c < s.c; ++c) {
    std::size_t a = 0, b = 0, both = 0;
    for (int n = 0; n < s.n; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * S;
      for (std::size_t i = 0; i < S; ++i) {
        const bool pa = p[off + i] >= threshold;
        const bool tb = t[off + i] > 0.5;
        a += pa;
        b += tb;
        both += pa && tb;
      }
    }
    out[static_cast<std::size_t>(c)] =
        (a + b == 0) ? 1.0 : 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
  }
  return out;
}

}  // namespace MTSEG_ABI
}  // namespace mtseg
