#include <algorithm>
#include <limits>
#include <memory>
#include <string>
#include <utility>

#include "nasrl/autodiff/ops.hpp"
#include "nasrl/errors.hpp"
#include "nasrl/simd/kernels.hpp"

namespace nasrl::ad {

namespace {

using detail::Node;

std::vector<double>* parent_grad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

struct Geometry {
  std::size_t n, c, h, w;
  bool batched;
};

Geometry image_geometry(const Tensor& t, const char* op) {
  if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2), false};
  if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), true};
  throw DimensionError(std::string(op) + ": expected [C,H,W] or [N,C,H,W], got " +
                       shape_str(t.shape()));
}

// Leading padding along one axis; the trailing side gets the remainder.
std::size_t leading_pad(std::size_t in, std::size_t kernel, std::size_t stride, PadMode mode) {
  if (mode == PadMode::valid) return 0;
  const std::size_t out = conv_out_size(in, kernel, stride, mode);
  const std::size_t needed = (out - 1) * stride + kernel;
  return needed > in ? (needed - in) / 2 : 0;
}

void check_window(std::size_t h, std::size_t w, std::size_t k, std::size_t stride, PadMode mode,
                  const char* op) {
  if (stride == 0) throw ContractError(std::string(op) + ": stride must be positive");
  if (k == 0) throw ContractError(std::string(op) + ": kernel must be positive");
  if (mode == PadMode::valid && (k > h || k > w))
    throw ContractError(std::string(op) + ": kernel " + std::to_string(k) +
                        " larger than unpadded input " + std::to_string(h) + "x" +
                        std::to_string(w));
}

}  // namespace

std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, PadMode mode) {
  if (stride == 0) throw ContractError("stride must be positive");
  if (mode == PadMode::same_size) return (in + stride - 1) / stride;
  if (kernel > in) throw ContractError("kernel larger than input in valid mode");
  return (in - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, std::size_t stride, PadMode mode) {
  return conv2d(input, weight, Tensor(), stride, mode);
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              PadMode mode) {
  const Geometry g = image_geometry(input, "conv2d");
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3))
    throw DimensionError("conv2d: weight must be [Co,Ci,k,k], got " + shape_str(weight.shape()));
  if (weight.dim(1) != g.c)
    throw DimensionError("conv2d: input has " + std::to_string(g.c) +
                         " channels, weight expects " + std::to_string(weight.dim(1)));
  const std::size_t co = weight.dim(0);
  const std::size_t k = weight.dim(2);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != co))
    throw DimensionError("conv2d: bias must be [" + std::to_string(co) + "]");
  check_window(g.h, g.w, k, stride, mode, "conv2d");

  const std::size_t oh = conv_out_size(g.h, k, stride, mode);
  const std::size_t ow = conv_out_size(g.w, k, stride, mode);
  const std::size_t pt = leading_pad(g.h, k, stride, mode);
  const std::size_t pl = leading_pad(g.w, k, stride, mode);
  const std::size_t pix = oh * ow;
  const std::size_t rows = g.n * pix;
  const std::size_t kdim = g.c * k * k;

  // im2row: one row per (sample, output pixel), columns ordered (ci, ky, kx)
  // to match the flattened weight layout.
  auto cols = std::make_shared<std::vector<double>>(rows * kdim, 0.0);
  const auto x = input.data();
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double* r = cols->data() + ((n * pix) + oy * ow + ox) * kdim;
        for (std::size_t ci = 0; ci < g.c; ++ci)
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                      static_cast<std::ptrdiff_t>(pt);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                        static_cast<std::ptrdiff_t>(pl);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
              r[(ci * k + ky) * k + kx] = x[((n * g.c + ci) * g.h + iy) * g.w + ix];
            }
          }
      }

  const auto& kern = simd::active_kernels();
  std::vector<double> prod(rows * co);
  kern.gemm_nt(cols->data(), weight.data().data(), prod.data(), rows, co, kdim);

  std::vector<double> out(g.n * co * pix);
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t c = 0; c < co; ++c) {
      const double b = bias.defined() ? bias[c] : 0.0;
      for (std::size_t p = 0; p < pix; ++p)
        out[(n * co + c) * pix + p] = prod[(n * pix + p) * co + c] + b;
    }

  Shape shape = g.batched ? Shape{g.n, co, oh, ow} : Shape{co, oh, ow};
  std::vector<Tensor> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return make_result(
      std::move(shape), std::move(out), std::move(inputs),
      [g, co, k, stride, oh, ow, pt, pl, pix, rows, kdim, cols, has_bias](Node& self) {
        const auto& kern = simd::active_kernels();
        std::vector<double> gprod(rows * co);
        for (std::size_t n = 0; n < g.n; ++n)
          for (std::size_t c = 0; c < co; ++c)
            for (std::size_t p = 0; p < pix; ++p)
              gprod[(n * pix + p) * co + c] = self.grad[(n * co + c) * pix + p];

        if (auto* gw = parent_grad(self, 1))
          kern.gemm_tn_acc(gprod.data(), cols->data(), gw->data(), co, kdim, rows);
        if (has_bias)
          if (auto* gb = parent_grad(self, 2))
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t c = 0; c < co; ++c) (*gb)[c] += gprod[r * co + c];
        if (auto* gx = parent_grad(self, 0)) {
          std::vector<double> gcols(rows * kdim, 0.0);
          kern.gemm_nn_acc(gprod.data(), self.parents[1]->data.data(), gcols.data(), rows, kdim,
                           co);
          for (std::size_t n = 0; n < g.n; ++n)
            for (std::size_t oy = 0; oy < oh; ++oy)
              for (std::size_t ox = 0; ox < ow; ++ox) {
                const double* r = gcols.data() + ((n * pix) + oy * ow + ox) * kdim;
                for (std::size_t ci = 0; ci < g.c; ++ci)
                  for (std::size_t ky = 0; ky < k; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                              static_cast<std::ptrdiff_t>(pt);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                      const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                                static_cast<std::ptrdiff_t>(pl);
                      if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                      (*gx)[((n * g.c + ci) * g.h + iy) * g.w + ix] += r[(ci * k + ky) * k + kx];
                    }
                  }
              }
        }
      });
}

Tensor maxpool2d(const Tensor& input, std::size_t kernel, std::size_t stride, PadMode mode) {
  const Geometry g = image_geometry(input, "maxpool2d");
  check_window(g.h, g.w, kernel, stride, mode, "maxpool2d");
  const std::size_t oh = conv_out_size(g.h, kernel, stride, mode);
  const std::size_t ow = conv_out_size(g.w, kernel, stride, mode);
  const std::size_t pt = leading_pad(g.h, kernel, stride, mode);
  const std::size_t pl = leading_pad(g.w, kernel, stride, mode);

  const auto x = input.data();
  std::vector<double> out(g.n * g.c * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t nc = 0; nc < g.n * g.c; ++nc)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = std::numeric_limits<std::size_t>::max();
        // Row-major scan with strict '>' keeps the lowest flat index on ties.
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(pt);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                      static_cast<std::ptrdiff_t>(pl);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            const std::size_t idx = (nc * g.h + iy) * g.w + ix;
            if (best_idx == std::numeric_limits<std::size_t>::max() || x[idx] > best) {
              best = x[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (nc * oh + oy) * ow + ox;
        out[o] = best;
        argmax[o] = best_idx;
      }

  Shape shape = g.batched ? Shape{g.n, g.c, oh, ow} : Shape{g.c, oh, ow};
  return make_result(std::move(shape), std::move(out), {input},
                     [argmax = std::move(argmax)](Node& self) {
                       if (auto* gx = parent_grad(self, 0))
                         for (std::size_t o = 0; o < argmax.size(); ++o)
                           (*gx)[argmax[o]] += self.grad[o];
                     });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2) throw DimensionError("linear: weight must be rank 2");
  const std::size_t m = weight.dim(0);
  const std::size_t nin = weight.dim(1);
  std::size_t batch;
  Shape shape;
  if (input.rank() == 1 && input.dim(0) == nin) {
    batch = 1;
    shape = {m};
  } else if (input.rank() == 2 && input.dim(1) == nin) {
    batch = input.dim(0);
    shape = {batch, m};
  } else {
    throw DimensionError("linear: input " + shape_str(input.shape()) + " vs weight " +
                         shape_str(weight.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != m))
    throw DimensionError("linear: bias must be [" + std::to_string(m) + "]");

  const auto& kern = simd::active_kernels();
  std::vector<double> out(batch * m);
  kern.gemm_nt(input.data().data(), weight.data().data(), out.data(), batch, m, nin);
  if (bias.defined())
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < m; ++j) out[b * m + j] += bias[j];

  std::vector<Tensor> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return make_result(std::move(shape), std::move(out), std::move(inputs),
                     [batch, m, nin, has_bias](Node& self) {
                       const auto& kern = simd::active_kernels();
                       if (auto* gw = parent_grad(self, 1))
                         kern.gemm_tn_acc(self.grad.data(), self.parents[0]->data.data(),
                                          gw->data(), m, nin, batch);
                       if (has_bias)
                         if (auto* gb = parent_grad(self, 2))
                           for (std::size_t b = 0; b < batch; ++b)
                             for (std::size_t j = 0; j < m; ++j) (*gb)[j] += self.grad[b * m + j];
                       if (auto* gx = parent_grad(self, 0))
                         kern.gemm_nn_acc(self.grad.data(), self.parents[1]->data.data(),
                                          gx->data(), batch, nin, m);
                     });
}

Tensor pad_to_exact(const Tensor& featmap, std::size_t target_len) {
  const Geometry g = image_geometry(featmap, "pad_to_exact");
  if (g.c == 0 || target_len % g.c != 0)
    throw ConfigError("pad_to_exact: target length " + std::to_string(target_len) +
                      " is not divisible by " + std::to_string(g.c) + " channels");
  const std::size_t per_channel = target_len / g.c;
  std::size_t side = 0;
  while ((side + 1) * (side + 1) <= per_channel) ++side;
  if (side * side != per_channel)
    throw ConfigError("pad_to_exact: " + std::to_string(per_channel) +
                      " cells per channel is not a square");

  // Signed offset of the input inside the target grid: positive pads, negative crops.
  const auto offset = [side](std::size_t in) {
    return side >= in ? static_cast<std::ptrdiff_t>((side - in) / 2)
                      : -static_cast<std::ptrdiff_t>((in - side) / 2);
  };
  const std::ptrdiff_t oy = offset(g.h);
  const std::ptrdiff_t ox = offset(g.w);

  // map[o] = flat input index feeding output o, or npos for padding.
  constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> map(g.n * target_len, npos);
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t c = 0; c < g.c; ++c)
      for (std::size_t ty = 0; ty < side; ++ty) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(ty) - oy;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
        for (std::size_t tx = 0; tx < side; ++tx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(tx) - ox;
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
          map[n * target_len + (c * side + ty) * side + tx] =
              ((n * g.c + c) * g.h + iy) * g.w + ix;
        }
      }

  const auto x = featmap.data();
  std::vector<double> out(map.size(), 0.0);
  for (std::size_t o = 0; o < map.size(); ++o)
    if (map[o] != npos) out[o] = x[map[o]];

  Shape shape = g.batched ? Shape{g.n, target_len} : Shape{target_len};
  return make_result(std::move(shape), std::move(out), {featmap},
                     [map = std::move(map)](Node& self) {
                       if (auto* gx = parent_grad(self, 0))
                         for (std::size_t o = 0; o < map.size(); ++o)
                           if (map[o] != npos) (*gx)[map[o]] += self.grad[o];
                     });
}

}  // namespace nasrl::ad
