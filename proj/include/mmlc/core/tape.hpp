#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmlc/core/tensor.hpp"

namespace mmlc {

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

template <typename S>
struct ParamBlock {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;
  Tensor<S> m;  // Adam first moment
  Tensor<S> v;  // Adam second moment
};

// Handle into a Tape's node list.
struct Val {
  int i = -1;
};

// Reverse-mode tape over a fixed op set. A tape records one forward pass;
// backward() replays the recorded closures in reverse. Tapes are rebuilt
// per batch; parameters live outside in ParamBlocks.
template <typename S>
class Tape {
 public:
  Val leaf(Tensor<S> v) { return push(std::move(v), false, nullptr); }

  Val param(ParamBlock<S>& p, bool trainable = true) {
    return push(p.value, trainable, trainable ? &p : nullptr);
  }

  const Tensor<S>& value(Val v) const { return node(v).value; }
  Tensor<S>& grad(Val v) { return node(v).grad; }

  bool needs_grad(Val v) const { return node(v).needs_grad; }

  // Seeds d(loss)/d(loss) = 1 and propagates to all parameter leaves.
  // After the call, every trainable param leaf has accumulated its gradient
  // into the bound ParamBlock::grad.
  void backward(Val loss) {
    if (nodes_.empty()) throw std::logic_error("backward before forward");
    Node& ln = node(loss);
    if (ln.value.size() != 1) throw std::logic_error("backward needs a scalar loss");
    if (!ln.needs_grad) throw std::logic_error("loss does not depend on trainable parameters");
    ln.grad[0] = S(1);
    for (int i = loss.i; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.needs_grad && n.back) n.back();
    }
    for (Node& n : nodes_) {
      if (n.bound) n.bound->grad.array() += n.grad.array();
    }
  }

  // ---- ops ----------------------------------------------------------

  // y = x * W^T + b, x:[B,I] W:[O,I] b:[O]
  Val linear(Val xv, Val wv, Val bv) {
    const Tensor<S>& x = value(xv);
    const Tensor<S>& w = value(wv);
    const Tensor<S>& b = value(bv);
    require(x.ndim() == 2, "linear: input must be [batch, features]");
    require(w.ndim() == 2 && b.ndim() == 1, "linear: bad parameter rank");
    const int batch = x.dim(0), in = x.dim(1), out = w.dim(0);
    if (w.dim(1) != in || b.dim(0) != out) {
      throw ShapeError("linear: x" + Tensor<S>::shape_str(x.shape()) + " vs W" +
                       Tensor<S>::shape_str(w.shape()) + " b" +
                       Tensor<S>::shape_str(b.shape()));
    }
    Tensor<S> y({batch, out});
    y.mat().noalias() = x.mat() * w.mat().transpose();
    y.mat().rowwise() += b.mat(1, out).row(0);
    Val yv = push(std::move(y), any_grad({xv, wv, bv}), nullptr);
    if (node(yv).needs_grad) {
      node(yv).back = [this, xv, wv, bv, yv] {
        const auto& dy = grad(yv);
        if (needs_grad(xv)) grad(xv).mat().noalias() += dy.mat() * value(wv).mat();
        if (needs_grad(wv)) grad(wv).mat().noalias() += dy.mat().transpose() * value(xv).mat();
        if (needs_grad(bv)) {
          const int out = value(bv).dim(0);
          grad(bv).mat(1, out).row(0) += dy.mat().colwise().sum();
        }
      };
    }
    return yv;
  }

  Val relu(Val xv) {
    const Tensor<S>& x = value(xv);
    Tensor<S> y(x.shape());
    y.array() = x.array().max(S(0));
    Val yv = push(std::move(y), needs_grad(xv), nullptr);
    if (node(yv).needs_grad) {
      node(yv).back = [this, xv, yv] {
        grad(xv).array() +=
            grad(yv).array() * (value(xv).array() > S(0)).template cast<S>();
      };
    }
    return yv;
  }

  Val concat_cols(const std::vector<Val>& parts) {
    require(!parts.empty(), "concat: empty input");
    const int batch = value(parts[0]).dim(0);
    int total = 0;
    bool ng = false;
    for (Val p : parts) {
      require(value(p).ndim() == 2 && value(p).dim(0) == batch, "concat: ragged inputs");
      total += value(p).dim(1);
      ng = ng || needs_grad(p);
    }
    Tensor<S> y({batch, total});
    int at = 0;
    for (Val p : parts) {
      const int c = value(p).dim(1);
      y.mat().middleCols(at, c) = value(p).mat();
      at += c;
    }
    Val yv = push(std::move(y), ng, nullptr);
    if (ng) {
      node(yv).back = [this, parts, yv] {
        int at = 0;
        for (Val p : parts) {
          const int c = value(p).dim(1);
          if (needs_grad(p)) grad(p).mat() += grad(yv).mat().middleCols(at, c);
          at += c;
        }
      };
    }
    return yv;
  }

  Val slice_cols(Val xv, int from, int len) {
    const Tensor<S>& x = value(xv);
    require(x.ndim() == 2, "slice: input must be 2-d");
    require(from >= 0 && len >= 1 && from + len <= x.dim(1), "slice: range out of bounds");
    Tensor<S> y({x.dim(0), len});
    y.mat() = x.mat().middleCols(from, len);
    Val yv = push(std::move(y), needs_grad(xv), nullptr);
    if (node(yv).needs_grad) {
      node(yv).back = [this, xv, yv, from, len] {
        grad(xv).mat().middleCols(from, len) += grad(yv).mat();
      };
    }
    return yv;
  }

  Val reshape(Val xv, std::vector<int> shape) {
    Tensor<S> y = value(xv).reshaped(shape);
    Val yv = push(std::move(y), needs_grad(xv), nullptr);
    if (node(yv).needs_grad) {
      node(yv).back = [this, xv, yv] { grad(xv).array() += grad(yv).array(); };
    }
    return yv;
  }

  // Sum over batch of squared error, divided by `normalizer` (the component
  // dimension in all the losses used here). Returns a scalar node.
  Val mse_sum_batch(Val pv, Val tv, S normalizer) {
    const Tensor<S>& p = value(pv);
    const Tensor<S>& t = value(tv);
    if (!p.same_shape(t)) {
      throw ShapeError("mse: pred" + Tensor<S>::shape_str(p.shape()) + " vs target" +
                       Tensor<S>::shape_str(t.shape()));
    }
    require(normalizer > S(0), "mse: normalizer must be positive");
    Tensor<S> y({1});
    y[0] = (p.array() - t.array()).square().sum() / normalizer;
    Val yv = push(std::move(y), any_grad({pv, tv}), nullptr);
    if (node(yv).needs_grad) {
      node(yv).back = [this, pv, tv, yv, normalizer] {
        const S g = grad(yv)[0] * S(2) / normalizer;
        if (needs_grad(pv))
          grad(pv).array() += g * (value(pv).array() - value(tv).array());
        if (needs_grad(tv))
          grad(tv).array() -= g * (value(pv).array() - value(tv).array());
      };
    }
    return yv;
  }

  Val add(Val av, Val bv) {
    const Tensor<S>& a = value(av);
    const Tensor<S>& b = value(bv);
    if (!a.same_shape(b)) {
      throw ShapeError("add: " + Tensor<S>::shape_str(a.shape()) + " vs " +
                       Tensor<S>::shape_str(b.shape()));
    }
    Tensor<S> y(a.shape());
    y.array() = a.array() + b.array();
    Val yv = push(std::move(y), any_grad({av, bv}), nullptr);
    if (node(yv).needs_grad) {
      node(yv).back = [this, av, bv, yv] {
        if (needs_grad(av)) grad(av).array() += grad(yv).array();
        if (needs_grad(bv)) grad(bv).array() += grad(yv).array();
      };
    }
    return yv;
  }

  // x:[B,H,W,Ci], kernel:[kh,kw,Ci,Co]; out extent = (in + 2p - k)/s + 1.
  Val conv2d(Val xv, Val kv, Val bv, int stride, int pad) {
    const Tensor<S>& x = value(xv);
    const Tensor<S>& k = value(kv);
    require(x.ndim() == 4 && k.ndim() == 4, "conv2d: need [B,H,W,C] input and 4-d kernel");
    const int batch = x.dim(0), h = x.dim(1), w = x.dim(2), ci = x.dim(3);
    const int kh = k.dim(0), kw = k.dim(1), co = k.dim(3);
    if (k.dim(2) != ci) {
      throw ShapeError("conv2d: input channels " + std::to_string(ci) +
                       " vs kernel " + std::to_string(k.dim(2)));
    }
    const int oh = out_extent(h, kh, stride, pad);
    const int ow = out_extent(w, kw, stride, pad);
    require(oh >= 1 && ow >= 1, "conv2d: kernel larger than padded input");

    auto cols = std::make_shared<Tensor<S>>(
        std::vector<int>{batch * oh * ow, kh * kw * ci});
    im2col(x, kh, kw, stride, pad, oh, ow, *cols);

    Tensor<S> y({batch, oh, ow, co});
    const Eigen::Index rows = static_cast<Eigen::Index>(batch) * oh * ow;
    y.mat(rows, co).noalias() = cols->mat() * k.mat(kh * kw * ci, co);
    y.mat(rows, co).rowwise() += value(bv).mat(1, co).row(0);

    Val yv = push(std::move(y), any_grad({xv, kv, bv}), nullptr);
    if (node(yv).needs_grad) {
      node(yv).back = [this, xv, kv, bv, yv, cols, stride, pad, kh, kw, ci, co, oh, ow, batch, h, w] {
        const Eigen::Index rows = static_cast<Eigen::Index>(batch) * oh * ow;
        auto dy = grad(yv).mat(rows, co);
        if (needs_grad(kv)) {
          grad(kv).mat(kh * kw * ci, co).noalias() += cols->mat().transpose() * dy;
        }
        if (needs_grad(bv)) grad(bv).mat(1, co).row(0) += dy.colwise().sum();
        if (needs_grad(xv)) {
          Tensor<S> dcols({batch * oh * ow, kh * kw * ci});
          dcols.mat().noalias() = dy * value(kv).mat(kh * kw * ci, co).transpose();
          col2im_add(dcols, kh, kw, stride, pad, oh, ow, grad(xv));
        }
      };
    }
    return yv;
  }

  // Transposed convolution. x:[B,Hi,Wi,Ci], kernel:[Ci,kh,kw,Co];
  // out extent = (in - 1)*s + k - 2p (inverse of the conv relation).
  Val deconv2d(Val xv, Val kv, Val bv, int stride, int pad) {
    const Tensor<S>& x = value(xv);
    const Tensor<S>& k = value(kv);
    require(x.ndim() == 4 && k.ndim() == 4, "deconv2d: need [B,H,W,C] input and 4-d kernel");
    const int batch = x.dim(0), hi = x.dim(1), wi = x.dim(2), ci = x.dim(3);
    const int kh = k.dim(1), kw = k.dim(2), co = k.dim(3);
    if (k.dim(0) != ci) {
      throw ShapeError("deconv2d: input channels " + std::to_string(ci) +
                       " vs kernel " + std::to_string(k.dim(0)));
    }
    const int ho = (hi - 1) * stride + kh - 2 * pad;
    const int wo = (wi - 1) * stride + kw - 2 * pad;
    require(ho >= 1 && wo >= 1, "deconv2d: degenerate output");

    const Eigen::Index rows = static_cast<Eigen::Index>(batch) * hi * wi;
    Tensor<S> cols({batch * hi * wi, kh * kw * co});
    cols.mat().noalias() = x.mat(rows, ci) * k.mat(ci, kh * kw * co);

    Tensor<S> y({batch, ho, wo, co});
    col2im_add(cols, kh, kw, stride, pad, hi, wi, y);
    y.mat(static_cast<Eigen::Index>(batch) * ho * wo, co).rowwise() +=
        value(bv).mat(1, co).row(0);

    Val yv = push(std::move(y), any_grad({xv, kv, bv}), nullptr);
    if (node(yv).needs_grad) {
      node(yv).back = [this, xv, kv, bv, yv, stride, pad, kh, kw, ci, co, hi, wi, batch] {
        const Eigen::Index rows = static_cast<Eigen::Index>(batch) * hi * wi;
        Tensor<S> dcols({batch * hi * wi, kh * kw * co});
        im2col(grad(yv), kh, kw, stride, pad, hi, wi, dcols);
        if (needs_grad(kv)) {
          grad(kv).mat(ci, kh * kw * co).noalias() +=
              value(xv).mat(rows, ci).transpose() * dcols.mat();
        }
        if (needs_grad(xv)) {
          grad(xv).mat(rows, ci).noalias() +=
              dcols.mat() * value(kv).mat(ci, kh * kw * co).transpose();
        }
        if (needs_grad(bv)) {
          const int ho = (hi - 1) * stride + kh - 2 * pad;
          const int wo = (wi - 1) * stride + kw - 2 * pad;
          grad(bv).mat(1, co).row(0) +=
              grad(yv).mat(static_cast<Eigen::Index>(batch) * ho * wo, co).colwise().sum();
        }
      };
    }
    return yv;
  }

  static int out_extent(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
  }

 private:
  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    bool needs_grad = false;
    std::function<void()> back;
    ParamBlock<S>* bound = nullptr;
  };

  Node& node(Val v) { return nodes_.at(static_cast<std::size_t>(v.i)); }
  const Node& node(Val v) const { return nodes_.at(static_cast<std::size_t>(v.i)); }

  bool any_grad(std::initializer_list<Val> vs) const {
    for (Val v : vs)
      if (needs_grad(v)) return true;
    return false;
  }

  Val push(Tensor<S> value, bool needs_grad, ParamBlock<S>* bound) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.bound = bound;
    if (needs_grad) n.grad = Tensor<S>::zeros(n.value.shape());
    nodes_.push_back(std::move(n));
    return Val{static_cast<int>(nodes_.size()) - 1};
  }

  static void require(bool ok, const char* msg) {
    if (!ok) throw ShapeError(msg);
  }

  // Gather k x k patches over the output grid into rows of `cols`.
  // Patch layout per row: (u, v, channel), matching the kernel flattening.
  static void im2col(const Tensor<S>& img, int kh, int kw, int stride, int pad,
                     int oh, int ow, Tensor<S>& cols) {
    const int batch = img.dim(0), h = img.dim(1), w = img.dim(2), c = img.dim(3);
    const S* src = img.data();
    S* dst = cols.data();
    const Eigen::Index row_len = static_cast<Eigen::Index>(kh) * kw * c;
    Eigen::Index r = 0;
    for (int b = 0; b < batch; ++b) {
      const S* sb = src + static_cast<Eigen::Index>(b) * h * w * c;
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j, ++r) {
          S* out = dst + r * row_len;
          const int y0 = i * stride - pad;
          const int x0 = j * stride - pad;
          for (int u = 0; u < kh; ++u) {
            const int y = y0 + u;
            S* orow = out + static_cast<Eigen::Index>(u) * kw * c;
            if (y < 0 || y >= h) {
              std::fill(orow, orow + static_cast<Eigen::Index>(kw) * c, S(0));
              continue;
            }
            if (x0 >= 0 && x0 + kw <= w) {
              const S* srow = sb + (static_cast<Eigen::Index>(y) * w + x0) * c;
              std::copy(srow, srow + static_cast<Eigen::Index>(kw) * c, orow);
            } else {
              for (int v = 0; v < kw; ++v) {
                const int xx = x0 + v;
                S* op = orow + static_cast<Eigen::Index>(v) * c;
                if (xx < 0 || xx >= w) {
                  std::fill(op, op + c, S(0));
                } else {
                  const S* sp = sb + (static_cast<Eigen::Index>(y) * w + xx) * c;
                  std::copy(sp, sp + c, op);
                }
              }
            }
          }
        }
      }
    }
  }

  // Scatter-add: exact adjoint of im2col with the same geometry.
  static void col2im_add(const Tensor<S>& cols, int kh, int kw, int stride,
                         int pad, int oh, int ow, Tensor<S>& img) {
    const int batch = img.dim(0), h = img.dim(1), w = img.dim(2), c = img.dim(3);
    const S* src = cols.data();
    S* dst = img.data();
    const Eigen::Index row_len = static_cast<Eigen::Index>(kh) * kw * c;
    Eigen::Index r = 0;
    for (int b = 0; b < batch; ++b) {
      S* db = dst + static_cast<Eigen::Index>(b) * h * w * c;
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j, ++r) {
          const S* in = src + r * row_len;
          const int y0 = i * stride - pad;
          const int x0 = j * stride - pad;
          for (int u = 0; u < kh; ++u) {
            const int y = y0 + u;
            if (y < 0 || y >= h) continue;
            const S* irow = in + static_cast<Eigen::Index>(u) * kw * c;
            for (int v = 0; v < kw; ++v) {
              const int xx = x0 + v;
              if (xx < 0 || xx >= w) continue;
              S* dp = db + (static_cast<Eigen::Index>(y) * w + xx) * c;
              const S* ip = irow + static_cast<Eigen::Index>(v) * c;
              for (int ch = 0; ch < c; ++ch) dp[ch] += ip[ch];
            }
          }
        }
      }
    }
  }

  std::vector<Node> nodes_;
};

}  // namespace mmlc
