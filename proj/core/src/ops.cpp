#include "mtseg/ops.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace mtseg {
inline namespace MTSEG_ABI {

namespace {

struct Extent {
  int x, y, z;
  std::size_t count() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
};

// Copies `planes` consecutive (z, y, x) blocks into zero-padded blocks.
std::vector<Real> pad_planes(const Real* src, int planes, Extent in, int pad) {
  const Extent p{in.x + 2 * pad, in.y + 2 * pad, in.z + 2 * pad};
  std::vector<Real> out(static_cast<std::size_t>(planes) * p.count(), Real(0));
  for (int pl = 0; pl < planes; ++pl) {
    const Real* s = src + static_cast<std::size_t>(pl) * in.count();
    Real* d = out.data() + static_cast<std::size_t>(pl) * p.count();
    for (int z = 0; z < in.z; ++z) {
      for (int y = 0; y < in.y; ++y) {
        const Real* srow = s + (static_cast<std::size_t>(z) * in.y + y) * in.x;
        Real* drow = d + (static_cast<std::size_t>(z + pad) * p.y + (y + pad)) * p.x + pad;
        std::copy(srow, srow + in.x, drow);
      }
    }
  }
  return out;
}

// dst[i] += w * src[i] for i < n.
inline void axpy(Real* __restrict dst, const Real* __restrict src, Real w, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += w * src[i];
}

// Fixed-width partial sums: vectorizable, and the summation order depends only
// on the lengths involved, never on threading.
struct Lanes {
  static constexpr std::size_t kWidth = 16;
  Real v[kWidth] = {};

  void add_dot(const Real* __restrict a, const Real* __restrict b, std::size_t n) {
    std::size_t i = 0;
    for (; i + kWidth <= n; i += kWidth) {
      for (std::size_t l = 0; l < kWidth; ++l) v[l] += a[i + l] * b[i + l];
    }
    for (std::size_t l = 0; i < n; ++i, ++l) v[l] += a[i] * b[i];
  }
  Real sum() const {
    Real s = 0;
    for (Real x : v) s += x;
    return s;
  }
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace

// Output positions are computed in the padded input's strides: position j of a
// plane maps to input index j + offset(kz, ky, kx). Every tap then becomes one
// contiguous axpy of length `span`; entries whose x or y fall outside the
// output are scratch and never read back.
Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias, Padding padding) {
  const Shape is = input.shape();
  const Shape ws = weight.shape();
  if (ws.c != is.c) {
    throw std::invalid_argument("conv3d: weight expects " + std::to_string(ws.c) + " input channels, got " +
                                std::to_string(is.c));
  }
  if (ws.x != ws.y || ws.x != ws.z || ws.x % 2 == 0) throw std::invalid_argument("conv3d: kernel must be odd and cubic");
  if (bias.defined() && bias.shape() != Shape{1, ws.n, 1, 1, 1}) {
    throw std::invalid_argument("conv3d: bias shape " + bias.shape().str() + " does not match out channels");
  }
  const int K = ws.x;
  const int K3 = K * K * K;
  const int pad = padding == Padding::same ? K / 2 : 0;
  const Extent in{is.x, is.y, is.z};
  const Extent pe{is.x + 2 * pad, is.y + 2 * pad, is.z + 2 * pad};
  const Extent oe{pe.x - K + 1, pe.y - K + 1, pe.z - K + 1};
  if (oe.x < 1 || oe.y < 1 || oe.z < 1) throw std::invalid_argument("conv3d: input smaller than kernel");
  const int N = is.n, CI = is.c, CO = ws.n;
  const Shape os{N, CO, oe.x, oe.y, oe.z};
  const std::size_t OS = oe.count();
  const std::size_t PS = pe.count();
  const std::size_t sy = static_cast<std::size_t>(pe.x);
  const std::size_t sz = sy * static_cast<std::size_t>(pe.y);
  const std::size_t span = static_cast<std::size_t>(oe.z - 1) * sz + static_cast<std::size_t>(oe.y - 1) * sy +
                           static_cast<std::size_t>(oe.x);
  std::vector<std::size_t> offsets(static_cast<std::size_t>(K3));
  for (int kz = 0; kz < K; ++kz) {
    for (int ky = 0; ky < K; ++ky) {
      for (int kx = 0; kx < K; ++kx) {
        offsets[static_cast<std::size_t>((kz * K + ky) * K + kx)] = kz * sz + ky * sy + static_cast<std::size_t>(kx);
      }
    }
  }

  auto padded = std::make_shared<std::vector<Real>>(pad_planes(input.values().data(), N * CI, in, pad));
  std::vector<Real> out(os.count());
  const Real* W = weight.values().data();
  const Real* B = bias.defined() ? bias.values().data() : nullptr;

#pragma omp parallel for schedule(static)
  for (int job = 0; job < N * CO; ++job) {
    const int n = job / CO;
    const int co = job % CO;
    std::vector<Real> acc(span, B ? B[co] : Real(0));
    for (int ci = 0; ci < CI; ++ci) {
      const Real* w = W + (static_cast<std::size_t>(co) * CI + ci) * K3;
      const Real* ip = padded->data() + (static_cast<std::size_t>(n) * CI + ci) * PS;
      for (int k = 0; k < K3; ++k) axpy(acc.data(), ip + offsets[static_cast<std::size_t>(k)], w[k], span);
    }
    Real* o = out.data() + static_cast<std::size_t>(job) * OS;
    for (int z = 0; z < oe.z; ++z) {
      for (int y = 0; y < oe.y; ++y) {
        const Real* src = acc.data() + static_cast<std::size_t>(z) * sz + static_cast<std::size_t>(y) * sy;
        std::copy(src, src + oe.x, o + (static_cast<std::size_t>(z) * oe.y + y) * oe.x);
      }
    }
  }

  std::vector<Tensor> parents{input, weight};
  if (bias.defined()) parents.push_back(bias);
  return Tensor::make_result(os, std::move(out), std::move(parents), [=](detail::TensorImpl& self) {
    const Real* g = self.grad.data();
    auto& in_node = *self.parents[0];
    auto& w_node = *self.parents[1];

    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      auto gb = self.parents[2]->grad_buffer();
      for (int co = 0; co < CO; ++co) {
        Real s = 0;
        for (int n = 0; n < N; ++n) {
          const Real* go = g + (static_cast<std::size_t>(n) * CO + co) * OS;
          for (std::size_t i = 0; i < OS; ++i) s += go[i];
        }
        gb[static_cast<std::size_t>(co)] += s;
      }
    }
    if (!w_node.requires_grad && !in_node.requires_grad) return;

    // Output gradient scattered into the padded-stride layout, zero in the
    // scratch positions so they drop out of every product below.
    std::vector<Real> gs(static_cast<std::size_t>(N) * CO * span, Real(0));
    for (int plane = 0; plane < N * CO; ++plane) {
      const Real* go = g + static_cast<std::size_t>(plane) * OS;
      Real* dst = gs.data() + static_cast<std::size_t>(plane) * span;
      for (int z = 0; z < oe.z; ++z) {
        for (int y = 0; y < oe.y; ++y) {
          const Real* src = go + (static_cast<std::size_t>(z) * oe.y + y) * oe.x;
          std::copy(src, src + oe.x, dst + static_cast<std::size_t>(z) * sz + static_cast<std::size_t>(y) * sy);
        }
      }
    }

    if (w_node.requires_grad) {
      auto gw = w_node.grad_buffer();
#pragma omp parallel for schedule(static)
      for (int job = 0; job < CO * CI; ++job) {
        const int co = job / CI;
        const int ci = job % CI;
        for (int k = 0; k < K3; ++k) {
          Lanes lanes;
          for (int n = 0; n < N; ++n) {
            const Real* gp = gs.data() + (static_cast<std::size_t>(n) * CO + co) * span;
            const Real* ip = padded->data() + (static_cast<std::size_t>(n) * CI + ci) * PS +
                             offsets[static_cast<std::size_t>(k)];
            lanes.add_dot(gp, ip, span);
          }
          gw[static_cast<std::size_t>(job) * K3 + k] += lanes.sum();
        }
      }
    }

    if (in_node.requires_grad) {
      const Real* Wv = w_node.values.data();
      auto gi = in_node.grad_buffer();
#pragma omp parallel for schedule(static)
      for (int job = 0; job < N * CI; ++job) {
        const int n = job / CI;
        const int ci = job % CI;
        std::vector<Real> gp(PS, Real(0));
        for (int co = 0; co < CO; ++co) {
          const Real* w = Wv + (static_cast<std::size_t>(co) * CI + ci) * K3;
          const Real* go = gs.data() + (static_cast<std::size_t>(n) * CO + co) * span;
          for (int k = 0; k < K3; ++k) axpy(gp.data() + offsets[static_cast<std::size_t>(k)], go, w[k], span);
        }
        Real* dst = gi.data() + static_cast<std::size_t>(job) * in.count();
        for (int z = 0; z < in.z; ++z) {
          for (int y = 0; y < in.y; ++y) {
            const Real* src = gp.data() + static_cast<std::size_t>(z + pad) * sz + static_cast<std::size_t>(y + pad) * sy + pad;
            Real* drow = dst + (static_cast<std::size_t>(z) * in.y + y) * in.x;
            for (int x = 0; x < in.x; ++x) drow[x] += src[x];
          }
        }
      }
    }
  });
}

Tensor maxpool3d_2(const Tensor& input) {
  const Shape is = input.shape();
  if (is.x % 2 || is.y % 2 || is.z % 2) throw std::invalid_argument("maxpool3d_2: spatial dims must be even, got " + is.str());
  const Shape os{is.n, is.c, is.x / 2, is.y / 2, is.z / 2};
  const int planes = is.n * is.c;
  const std::size_t IS = is.spatial();
  const std::size_t OS = os.spatial();
  std::vector<Real> out(os.count());
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(os.count());
  const Real* in = input.values().data();
  for (int p = 0; p < planes; ++p) {
    const Real* ip = in + static_cast<std::size_t>(p) * IS;
    for (int z = 0; z < os.z; ++z) {
      for (int y = 0; y < os.y; ++y) {
        for (int x = 0; x < os.x; ++x) {
          std::size_t best = 0;
          Real best_v = 0;
          bool first = true;
          for (int dz = 0; dz < 2; ++dz) {
            for (int dy = 0; dy < 2; ++dy) {
              for (int dx = 0; dx < 2; ++dx) {
                const std::size_t idx = (static_cast<std::size_t>(2 * z + dz) * is.y + (2 * y + dy)) * is.x + (2 * x + dx);
                if (first || ip[idx] > best_v) {
                  best = idx;
                  best_v = ip[idx];
                  first = false;
                }
              }
            }
          }
          const std::size_t o = static_cast<std::size_t>(p) * OS + (static_cast<std::size_t>(z) * os.y + y) * os.x + x;
          out[o] = best_v;
          (*argmax)[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  return Tensor::make_result(os, std::move(out), {input}, [=](detail::TensorImpl& self) {
    auto gi = self.parents[0]->grad_buffer();
    for (int p = 0; p < planes; ++p) {
      for (std::size_t o = 0; o < OS; ++o) {
        const std::size_t flat = static_cast<std::size_t>(p) * OS + o;
        gi[static_cast<std::size_t>(p) * IS + (*argmax)[flat]] += self.grad[flat];
      }
    }
  });
}

Tensor upsample3d_2(const Tensor& input) {
  const Shape is = input.shape();
  const Shape os{is.n, is.c, 2 * is.x, 2 * is.y, 2 * is.z};
  const int planes = is.n * is.c;
  const std::size_t IS = is.spatial();
  const std::size_t OS = os.spatial();
  std::vector<Real> out(os.count());
  const Real* in = input.values().data();
  for (int p = 0; p < planes; ++p) {
    for (int z = 0; z < os.z; ++z) {
      for (int y = 0; y < os.y; ++y) {
        const Real* irow = in + static_cast<std::size_t>(p) * IS + (static_cast<std::size_t>(z / 2) * is.y + y / 2) * is.x;
        Real* orow = out.data() + static_cast<std::size_t>(p) * OS + (static_cast<std::size_t>(z) * os.y + y) * os.x;
        for (int x = 0; x < os.x; ++x) orow[x] = irow[x / 2];
      }
    }
  }
  return Tensor::make_result(os, std::move(out), {input}, [=](detail::TensorImpl& self) {
    auto gi = self.parents[0]->grad_buffer();
    for (int p = 0; p < planes; ++p) {
      for (int z = 0; z < os.z; ++z) {
        for (int y = 0; y < os.y; ++y) {
          Real* irow = gi.data() + static_cast<std::size_t>(p) * IS + (static_cast<std::size_t>(z / 2) * is.y + y / 2) * is.x;
          const Real* grow = self.grad.data() + static_cast<std::size_t>(p) * OS + (static_cast<std::size_t>(z) * os.y + y) * os.x;
          for (int x = 0; x < os.x; ++x) irow[x / 2] += grow[x];
        }
      }
    }
  });
}

Tensor batchnorm3d(const Tensor& input, const Tensor& scale, const Tensor& shift, BatchNormState& state, Mode mode) {
  const Shape is = input.shape();
  const int C = is.c;
  const Shape ps{1, C, 1, 1, 1};
  if (scale.shape() != ps || shift.shape() != ps) throw std::invalid_argument("batchnorm3d: scale/shift must be " + ps.str());
  if (state.running_mean.size() != static_cast<std::size_t>(C) || state.running_var.size() != static_cast<std::size_t>(C)) {
    throw std::invalid_argument("batchnorm3d: running state has wrong channel count");
  }
  const int N = is.n;
  const std::size_t S = is.spatial();
  const double M = static_cast<double>(N) * static_cast<double>(S);
  const Real* x = input.values().data();
  const Real* gamma = scale.values().data();
  const Real* beta = shift.values().data();

  auto xhat = std::make_shared<std::vector<Real>>(is.count());
  auto inv_std = std::make_shared<std::vector<Real>>(static_cast<std::size_t>(C));
  std::vector<Real> out(is.count());
  for (int c = 0; c < C; ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == Mode::train) {
      for (int n = 0; n < N; ++n) {
        const Real* xp = x + (static_cast<std::size_t>(n) * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) mean += xp[i];
      }
      mean /= M;
      for (int n = 0; n < N; ++n) {
        const Real* xp = x + (static_cast<std::size_t>(n) * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) {
          const double d = xp[i] - mean;
          var += d * d;
        }
      }
      var /= M;
      const double unbiased = M > 1.0 ? var * M / (M - 1.0) : var;
      const std::size_t ci = static_cast<std::size_t>(c);
      state.running_mean[ci] = static_cast<Real>((1.0 - state.momentum) * state.running_mean[ci] + state.momentum * mean);
      state.running_var[ci] = static_cast<Real>((1.0 - state.momentum) * state.running_var[ci] + state.momentum * unbiased);
    } else {
      mean = state.running_mean[static_cast<std::size_t>(c)];
      var = state.running_var[static_cast<std::size_t>(c)];
    }
    const double istd = 1.0 / std::sqrt(var + state.eps);
    (*inv_std)[static_cast<std::size_t>(c)] = static_cast<Real>(istd);
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * S;
      for (std::size_t i = 0; i < S; ++i) {
        const Real h = static_cast<Real>((x[off + i] - mean) * istd);
        (*xhat)[off + i] = h;
        out[off + i] = gamma[c] * h + beta[c];
      }
    }
  }

  return Tensor::make_result(is, std::move(out), {input, scale, shift}, [=](detail::TensorImpl& self) {
    const Real* g = self.grad.data();
    auto& in_node = *self.parents[0];
    auto& scale_node = *self.parents[1];
    auto& shift_node = *self.parents[2];
    const Real* gam = scale_node.values.data();
    for (int c = 0; c < C; ++c) {
      double sum_g = 0.0;
      double sum_gx = 0.0;
      for (int n = 0; n < N; ++n) {
        const std::size_t off = (static_cast<std::size_t>(n) * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) {
          sum_g += g[off + i];
          sum_gx += static_cast<double>(g[off + i]) * (*xhat)[off + i];
        }
      }
      if (scale_node.requires_grad) scale_node.grad_buffer()[static_cast<std::size_t>(c)] += static_cast<Real>(sum_gx);
      if (shift_node.requires_grad) shift_node.grad_buffer()[static_cast<std::size_t>(c)] += static_cast<Real>(sum_g);
      if (!in_node.requires_grad) continue;
      auto gi = in_node.grad_buffer();
      const double k = static_cast<double>(gam[c]) * (*inv_std)[static_cast<std::size_t>(c)];
      for (int n = 0; n < N; ++n) {
        const std::size_t off = (static_cast<std::size_t>(n) * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) {
          if (mode == Mode::train) {
            gi[off + i] += static_cast<Real>(k * (g[off + i] - sum_g / M - (*xhat)[off + i] * sum_gx / M));
          } else {
            gi[off + i] += static_cast<Real>(k * g[off + i]);
          }
        }
      }
    }
  });
}

Tensor relu(const Tensor& input) {
  std::vector<Real> out(input.values().begin(), input.values().end());
  for (Real& v : out) v = v > Real(0) ? v : Real(0);
  return Tensor::make_result(input.shape(), std::move(out), {input}, [](detail::TensorImpl& self) {
    auto& in = *self.parents[0];
    auto gi = in.grad_buffer();
    for (std::size_t i = 0; i < gi.size(); ++i) {
      if (in.values[i] > Real(0)) gi[i] += self.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& input) {
  std::vector<Real> out(input.size());
  const auto in = input.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Real v = in[i];
    if (v >= 0) {
      out[i] = Real(1) / (Real(1) + std::exp(-v));
    } else {
      const Real e = std::exp(v);
      out[i] = e / (Real(1) + e);
    }
  }
  return Tensor::make_result(input.shape(), std::move(out), {input}, [](detail::TensorImpl& self) {
    auto gi = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < gi.size(); ++i) {
      const Real y = self.values[i];
      gi[i] += self.grad[i] * y * (Real(1) - y);
    }
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape as = a.shape();
  const Shape bs = b.shape();
  if (as.n != bs.n || as.x != bs.x || as.y != bs.y || as.z != bs.z) {
    throw std::invalid_argument("concat_channels: incompatible shapes " + as.str() + " and " + bs.str());
  }
  const Shape os{as.n, as.c + bs.c, as.x, as.y, as.z};
  const std::size_t S = as.spatial();
  const std::size_t a_block = static_cast<std::size_t>(as.c) * S;
  const std::size_t b_block = static_cast<std::size_t>(bs.c) * S;
  std::vector<Real> out(os.count());
  for (int n = 0; n < as.n; ++n) {
    const auto av = a.values().subspan(static_cast<std::size_t>(n) * a_block, a_block);
    const auto bv = b.values().subspan(static_cast<std::size_t>(n) * b_block, b_block);
    Real* dst = out.data() + static_cast<std::size_t>(n) * (a_block + b_block);
    std::copy(av.begin(), av.end(), dst);
    std::copy(bv.begin(), bv.end(), dst + a_block);
  }
  const int N = as.n;
  return Tensor::make_result(os, std::move(out), {a, b}, [=](detail::TensorImpl& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (int n = 0; n < N; ++n) {
      const Real* g = self.grad.data() + static_cast<std::size_t>(n) * (a_block + b_block);
      if (pa.requires_grad) {
        Real* ga = pa.grad_buffer().data() + static_cast<std::size_t>(n) * a_block;
        for (std::size_t i = 0; i < a_block; ++i) ga[i] += g[i];
      }
      if (pb.requires_grad) {
        Real* gb = pb.grad_buffer().data() + static_cast<std::size_t>(n) * b_block;
        for (std::size_t i = 0; i < b_block; ++i) gb[i] += g[a_block + i];
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<Real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::TensorImpl& self) {
    for (auto& parent : self.parents) {
      if (!parent->requires_grad) continue;
      auto g = parent->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor scale(const Tensor& a, Real factor) {
  std::vector<Real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * a.values()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a}, [factor](detail::TensorImpl& self) {
    auto g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

}  // namespace MTSEG_ABI
}  // namespace mtseg
