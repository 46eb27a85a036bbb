#include "cycledance/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace cycledance {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;
using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

namespace {

thread_local bool g_recording = true;

void check_finite(const std::vector<double>& v, const char* where) {
  for (double x : v) {
    if (!std::isfinite(x))
      throw NumericError(std::string(where) + ": non-finite value encountered");
  }
}

NodePtr make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return n;
}

bool track(std::initializer_list<const Tensor*> ins) {
  if (!g_recording) return false;
  for (const Tensor* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

/// Creates an op node: runs the forward once, wires recompute/backward only
/// when some input requires grad (otherwise the result is a plain constant).
Tensor make_op(const char* op, Shape shape, std::initializer_list<const Tensor*> ins,
               std::function<void(Node&)> recompute, std::function<void(Node&)> bwd) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value.resize(numel(n->shape));
  n->op = op;
  for (const Tensor* t : ins) n->inputs.push_back(t->node_ptr());
  n->recompute = std::move(recompute);
  n->recompute(*n);
  check_finite(n->value, op);
  if (track(ins)) {
    n->requires_grad = true;
    n->is_leaf = false;
    n->backward = std::move(bwd);
  } else {
    n->inputs.clear();
    n->recompute = nullptr;
  }
  return Tensor::wrap(std::move(n));
}

void accumulate(Node& dst, const std::vector<double>& g) {
  if (!dst.requires_grad) return;
  dst.ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) dst.grad[i] += g[i];
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ValidationError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                          " vs " + shape_str(b.shape()));
}

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                     const char* op) {
  if (in + 2 * pad < k)
    throw ValidationError(std::string(op) + ": kernel " + std::to_string(k) +
                          " larger than padded input " + std::to_string(in + 2 * pad));
  return (in + 2 * pad - k) / stride + 1;
}

// im2col for 1-D conv: cols is [Cin*K, OT].
void im2col1d(const std::vector<double>& x, std::size_t cin, std::size_t t,
              std::size_t k, std::size_t stride, std::size_t pad,
              std::size_t ot, std::vector<double>& cols) {
  cols.assign(cin * k * ot, 0.0);
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t kk = 0; kk < k; ++kk) {
      double* row = cols.data() + (c * k + kk) * ot;
      const double* src = x.data() + c * t;
      for (std::size_t o = 0; o < ot; ++o) {
        std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(o * stride + kk) -
                            static_cast<std::ptrdiff_t>(pad);
        if (ti >= 0 && ti < static_cast<std::ptrdiff_t>(t)) row[o] = src[ti];
      }
    }
}

void col2im1d(const std::vector<double>& cols, std::size_t cin, std::size_t t,
              std::size_t k, std::size_t stride, std::size_t pad,
              std::size_t ot, std::vector<double>& dx) {
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double* row = cols.data() + (c * k + kk) * ot;
      double* dst = dx.data() + c * t;
      for (std::size_t o = 0; o < ot; ++o) {
        std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(o * stride + kk) -
                            static_cast<std::ptrdiff_t>(pad);
        if (ti >= 0 && ti < static_cast<std::ptrdiff_t>(t)) dst[ti] += row[o];
      }
    }
}

// im2col for 2-D conv: cols is [Cin*KH*KW, OH*OW].
void im2col2d(const std::vector<double>& x, std::size_t cin, std::size_t h, std::size_t w,
              std::size_t kh, std::size_t kw, std::size_t sh, std::size_t sw,
              std::size_t ph, std::size_t pw, std::size_t oh, std::size_t ow,
              std::vector<double>& cols) {
  cols.assign(cin * kh * kw * oh * ow, 0.0);
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t ki = 0; ki < kh; ++ki)
      for (std::size_t kj = 0; kj < kw; ++kj) {
        double* row = cols.data() + ((c * kh + ki) * kw + kj) * (oh * ow);
        const double* src = x.data() + c * h * w;
        for (std::size_t oi = 0; oi < oh; ++oi) {
          std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(oi * sh + ki) -
                              static_cast<std::ptrdiff_t>(ph);
          if (hi < 0 || hi >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t oj = 0; oj < ow; ++oj) {
            std::ptrdiff_t wi = static_cast<std::ptrdiff_t>(oj * sw + kj) -
                                static_cast<std::ptrdiff_t>(pw);
            if (wi >= 0 && wi < static_cast<std::ptrdiff_t>(w))
              row[oi * ow + oj] = src[hi * w + wi];
          }
        }
      }
}

void col2im2d(const std::vector<double>& cols, std::size_t cin, std::size_t h,
              std::size_t w, std::size_t kh, std::size_t kw, std::size_t sh,
              std::size_t sw, std::size_t ph, std::size_t pw, std::size_t oh,
              std::size_t ow, std::vector<double>& dx) {
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t ki = 0; ki < kh; ++ki)
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const double* row = cols.data() + ((c * kh + ki) * kw + kj) * (oh * ow);
        double* dst = dx.data() + c * h * w;
        for (std::size_t oi = 0; oi < oh; ++oi) {
          std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(oi * sh + ki) -
                              static_cast<std::ptrdiff_t>(ph);
          if (hi < 0 || hi >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t oj = 0; oj < ow; ++oj) {
            std::ptrdiff_t wi = static_cast<std::ptrdiff_t>(oj * sw + kj) -
                                static_cast<std::ptrdiff_t>(pw);
            if (wi >= 0 && wi < static_cast<std::ptrdiff_t>(w))
              dst[hi * w + wi] += row[oi * ow + oj];
          }
        }
      }
}

// Maps a flat index through an axis split: outer * (axis) * inner.
struct AxisSplit {
  std::size_t outer = 1, axis = 1, inner = 1;
  AxisSplit(const Shape& s, std::size_t ax) {
    for (std::size_t i = 0; i < ax; ++i) outer *= s[i];
    axis = s[ax];
    for (std::size_t i = ax + 1; i < s.size(); ++i) inner *= s[i];
  }
};

}  // namespace

NoGradGuard::NoGradGuard() : prev_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = prev_; }
bool NoGradGuard::recording() { return g_recording; }

double Tensor::item() const {
  if (size() != 1)
    throw ValidationError("item: tensor has " + std::to_string(size()) + " elements");
  return node_->value[0];
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty())
    throw ValidationError("grad: no gradient present (run backward first)");
  return node_->grad;
}

void Tensor::set_data(const std::vector<double>& values) {
  if (!node_->is_leaf) throw ValidationError("set_data: only leaf tensors are mutable");
  if (values.size() != node_->value.size())
    throw ValidationError("set_data: size mismatch");
  check_finite(values, "set_data");
  node_->value = values;
}

Tensor tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  if (numel(shape) != data.size())
    throw ValidationError("tensor: shape " + shape_str(shape) + " wants " +
                          std::to_string(numel(shape)) + " values, got " +
                          std::to_string(data.size()));
  for (std::size_t d : shape)
    if (d == 0) throw ValidationError("tensor: zero extent in shape " + shape_str(shape));
  check_finite(data, "tensor");
  return Tensor::wrap(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor zeros(Shape shape, bool requires_grad) {
  std::vector<double> data(numel(shape), 0.0);
  return tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor full(Shape shape, double value, bool requires_grad) {
  std::vector<double> data(numel(shape), value);
  return tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor scalar(double value) { return tensor({}, {value}); }

// ---- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  return make_op(
      "add", a.shape(), {&a, &b},
      [](Node& n) {
        const auto& x = n.inputs[0]->value;
        const auto& y = n.inputs[1]->value;
        for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] + y[i];
      },
      [](Node& n) {
        accumulate(*n.inputs[0], n.grad);
        accumulate(*n.inputs[1], n.grad);
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  return make_op(
      "sub", a.shape(), {&a, &b},
      [](Node& n) {
        const auto& x = n.inputs[0]->value;
        const auto& y = n.inputs[1]->value;
        for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] - y[i];
      },
      [](Node& n) {
        accumulate(*n.inputs[0], n.grad);
        if (n.inputs[1]->requires_grad) {
          Node& b = *n.inputs[1];
          b.ensure_grad();
          for (std::size_t i = 0; i < n.grad.size(); ++i) b.grad[i] -= n.grad[i];
        }
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  return make_op(
      "mul", a.shape(), {&a, &b},
      [](Node& n) {
        const auto& x = n.inputs[0]->value;
        const auto& y = n.inputs[1]->value;
        for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] * y[i];
      },
      [](Node& n) {
        Node& a = *n.inputs[0];
        Node& b = *n.inputs[1];
        if (a.requires_grad) {
          a.ensure_grad();
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            a.grad[i] += n.grad[i] * b.value[i];
        }
        if (b.requires_grad) {
          b.ensure_grad();
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            b.grad[i] += n.grad[i] * a.value[i];
        }
      });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor add_scalar(const Tensor& a, double c) {
  return make_op(
      "add_scalar", a.shape(), {&a},
      [c](Node& n) {
        const auto& x = n.inputs[0]->value;
        for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] + c;
      },
      [](Node& n) { accumulate(*n.inputs[0], n.grad); });
}

Tensor mul_scalar(const Tensor& a, double c) {
  return make_op(
      "mul_scalar", a.shape(), {&a},
      [c](Node& n) {
        const auto& x = n.inputs[0]->value;
        for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] * c;
      },
      [c](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.requires_grad) return;
        a.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) a.grad[i] += c * n.grad[i];
      });
}

Tensor add_rowvec(const Tensor& mat, const Tensor& vec) {
  if (mat.ndim() != 2 || vec.ndim() != 1 || mat.dim(1) != vec.dim(0))
    throw ValidationError("add_rowvec: shape mismatch " + shape_str(mat.shape()) +
                          " vs " + shape_str(vec.shape()));
  std::size_t rows = mat.dim(0), cols = mat.dim(1);
  return make_op(
      "add_rowvec", mat.shape(), {&mat, &vec},
      [rows, cols](Node& n) {
        const auto& m = n.inputs[0]->value;
        const auto& v = n.inputs[1]->value;
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c)
            n.value[r * cols + c] = m[r * cols + c] + v[c];
      },
      [rows, cols](Node& n) {
        accumulate(*n.inputs[0], n.grad);
        Node& v = *n.inputs[1];
        if (!v.requires_grad) return;
        v.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) v.grad[c] += n.grad[r * cols + c];
      });
}

Tensor add_colvec(const Tensor& mat, const Tensor& vec) {
  if (mat.ndim() != 2 || vec.ndim() != 1 || mat.dim(0) != vec.dim(0))
    throw ValidationError("add_colvec: shape mismatch " + shape_str(mat.shape()) +
                          " vs " + shape_str(vec.shape()));
  std::size_t rows = mat.dim(0), cols = mat.dim(1);
  return make_op(
      "add_colvec", mat.shape(), {&mat, &vec},
      [rows, cols](Node& n) {
        const auto& m = n.inputs[0]->value;
        const auto& v = n.inputs[1]->value;
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c)
            n.value[r * cols + c] = m[r * cols + c] + v[r];
      },
      [rows, cols](Node& n) {
        accumulate(*n.inputs[0], n.grad);
        Node& v = *n.inputs[1];
        if (!v.requires_grad) return;
        v.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) v.grad[r] += n.grad[r * cols + c];
      });
}

// ---- matmul ----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw ValidationError("matmul: shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
  std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  return make_op(
      "matmul", {n, m}, {&a, &b},
      [n, k, m](Node& nd) {
        CMap A(nd.inputs[0]->value.data(), n, k);
        CMap B(nd.inputs[1]->value.data(), k, m);
        MMap O(nd.value.data(), n, m);
        O.noalias() = A * B;
      },
      [n, k, m](Node& nd) {
        CMap A(nd.inputs[0]->value.data(), n, k);
        CMap B(nd.inputs[1]->value.data(), k, m);
        CMap G(nd.grad.data(), n, m);
        Node& a = *nd.inputs[0];
        Node& b = *nd.inputs[1];
        if (a.requires_grad) {
          a.ensure_grad();
          MMap dA(a.grad.data(), n, k);
          dA.noalias() += G * B.transpose();
        }
        if (b.requires_grad) {
          b.ensure_grad();
          MMap dB(b.grad.data(), k, m);
          dB.noalias() += A.transpose() * G;
        }
      });
}

// ---- convolutions ----------------------------------------------------------

Tensor conv1d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad) {
  if (x.ndim() != 2 || w.ndim() != 3)
    throw ValidationError("conv1d: expects x [Cin,T] and w [Cout,Cin,K], got " +
                          shape_str(x.shape()) + " and " + shape_str(w.shape()));
  if (x.dim(0) != w.dim(1))
    throw ValidationError("conv1d: input channels " + std::to_string(x.dim(0)) +
                          " != kernel channels " + std::to_string(w.dim(1)));
  if (stride == 0) throw ValidationError("conv1d: stride must be positive");
  std::size_t cin = x.dim(0), t = x.dim(1), cout = w.dim(0), k = w.dim(2);
  std::size_t ot = conv_out(t, k, stride, pad, "conv1d");
  return make_op(
      "conv1d", {cout, ot}, {&x, &w},
      [cin, t, cout, k, stride, pad, ot](Node& n) {
        std::vector<double> cols;
        im2col1d(n.inputs[0]->value, cin, t, k, stride, pad, ot, cols);
        CMap W(n.inputs[1]->value.data(), cout, cin * k);
        CMap C(cols.data(), cin * k, ot);
        MMap O(n.value.data(), cout, ot);
        O.noalias() = W * C;
      },
      [cin, t, cout, k, stride, pad, ot](Node& n) {
        Node& x = *n.inputs[0];
        Node& w = *n.inputs[1];
        CMap G(n.grad.data(), cout, ot);
        if (w.requires_grad) {
          std::vector<double> cols;
          im2col1d(x.value, cin, t, k, stride, pad, ot, cols);
          CMap C(cols.data(), cin * k, ot);
          w.ensure_grad();
          MMap dW(w.grad.data(), cout, cin * k);
          dW.noalias() += G * C.transpose();
        }
        if (x.requires_grad) {
          CMap W(w.value.data(), cout, cin * k);
          std::vector<double> dcols(cin * k * ot);
          MMap dC(dcols.data(), cin * k, ot);
          dC.noalias() = W.transpose() * G;
          x.ensure_grad();
          col2im1d(dcols, cin, t, k, stride, pad, ot, x.grad);
        }
      });
}

Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride_h,
              std::size_t stride_w, std::size_t pad_h, std::size_t pad_w) {
  if (x.ndim() != 3 || w.ndim() != 4)
    throw ValidationError("conv2d: expects x [Cin,H,W] and w [Cout,Cin,KH,KW], got " +
                          shape_str(x.shape()) + " and " + shape_str(w.shape()));
  if (x.dim(0) != w.dim(1))
    throw ValidationError("conv2d: input channels " + std::to_string(x.dim(0)) +
                          " != kernel channels " + std::to_string(w.dim(1)));
  if (stride_h == 0 || stride_w == 0)
    throw ValidationError("conv2d: stride must be positive");
  std::size_t cin = x.dim(0), h = x.dim(1), ww = x.dim(2);
  std::size_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  std::size_t oh = conv_out(h, kh, stride_h, pad_h, "conv2d");
  std::size_t ow = conv_out(ww, kw, stride_w, pad_w, "conv2d");
  return make_op(
      "conv2d", {cout, oh, ow}, {&x, &w},
      [=](Node& n) {
        std::vector<double> cols;
        im2col2d(n.inputs[0]->value, cin, h, ww, kh, kw, stride_h, stride_w, pad_h,
                 pad_w, oh, ow, cols);
        CMap W(n.inputs[1]->value.data(), cout, cin * kh * kw);
        CMap C(cols.data(), cin * kh * kw, oh * ow);
        MMap O(n.value.data(), cout, oh * ow);
        O.noalias() = W * C;
      },
      [=](Node& n) {
        Node& x = *n.inputs[0];
        Node& w = *n.inputs[1];
        CMap G(n.grad.data(), cout, oh * ow);
        if (w.requires_grad) {
          std::vector<double> cols;
          im2col2d(x.value, cin, h, ww, kh, kw, stride_h, stride_w, pad_h, pad_w, oh,
                   ow, cols);
          CMap C(cols.data(), cin * kh * kw, oh * ow);
          w.ensure_grad();
          MMap dW(w.grad.data(), cout, cin * kh * kw);
          dW.noalias() += G * C.transpose();
        }
        if (x.requires_grad) {
          CMap W(w.value.data(), cout, cin * kh * kw);
          std::vector<double> dcols(cin * kh * kw * oh * ow);
          MMap dC(dcols.data(), cin * kh * kw, oh * ow);
          dC.noalias() = W.transpose() * G;
          x.ensure_grad();
          col2im2d(dcols, cin, h, ww, kh, kw, stride_h, stride_w, pad_h, pad_w, oh, ow,
                   x.grad);
        }
      });
}

// ---- pixel shuffle ----------------------------------------------------------

Tensor pixel_shuffle1d(const Tensor& x, std::size_t r) {
  if (x.ndim() != 2 || r == 0 || x.dim(0) % r != 0)
    throw ValidationError("pixel_shuffle1d: channels " + shape_str(x.shape()) +
                          " not divisible by r=" + std::to_string(r));
  std::size_t c = x.dim(0) / r, t = x.dim(1);
  return make_op(
      "pixel_shuffle1d", {c, t * r}, {&x},
      [c, t, r](Node& n) {
        const auto& in = n.inputs[0]->value;
        for (std::size_t ci = 0; ci < c; ++ci)
          for (std::size_t ti = 0; ti < t; ++ti)
            for (std::size_t j = 0; j < r; ++j)
              n.value[ci * (t * r) + ti * r + j] = in[(ci * r + j) * t + ti];
      },
      [c, t, r](Node& n) {
        Node& x = *n.inputs[0];
        if (!x.requires_grad) return;
        x.ensure_grad();
        for (std::size_t ci = 0; ci < c; ++ci)
          for (std::size_t ti = 0; ti < t; ++ti)
            for (std::size_t j = 0; j < r; ++j)
              x.grad[(ci * r + j) * t + ti] += n.grad[ci * (t * r) + ti * r + j];
      });
}

Tensor pixel_shuffle2d(const Tensor& x, std::size_t r) {
  if (x.ndim() != 3 || r == 0 || x.dim(0) % (r * r) != 0)
    throw ValidationError("pixel_shuffle2d: channels " + shape_str(x.shape()) +
                          " not divisible by r^2=" + std::to_string(r * r));
  std::size_t c = x.dim(0) / (r * r), h = x.dim(1), w = x.dim(2);
  return make_op(
      "pixel_shuffle2d", {c, h * r, w * r}, {&x},
      [c, h, w, r](Node& n) {
        const auto& in = n.inputs[0]->value;
        for (std::size_t ci = 0; ci < c; ++ci)
          for (std::size_t hi = 0; hi < h; ++hi)
            for (std::size_t wi = 0; wi < w; ++wi)
              for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < r; ++j)
                  n.value[ci * (h * r * w * r) + (hi * r + i) * (w * r) + wi * r + j] =
                      in[(ci * r * r + i * r + j) * h * w + hi * w + wi];
      },
      [c, h, w, r](Node& n) {
        Node& x = *n.inputs[0];
        if (!x.requires_grad) return;
        x.ensure_grad();
        for (std::size_t ci = 0; ci < c; ++ci)
          for (std::size_t hi = 0; hi < h; ++hi)
            for (std::size_t wi = 0; wi < w; ++wi)
              for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < r; ++j)
                  x.grad[(ci * r * r + i * r + j) * h * w + hi * w + wi] +=
                      n.grad[ci * (h * r * w * r) + (hi * r + i) * (w * r) + wi * r + j];
      });
}

// ---- nonlinearities ----------------------------------------------------------

Tensor sigmoid(const Tensor& a) {
  return make_op(
      "sigmoid", a.shape(), {&a},
      [](Node& n) {
        const auto& x = n.inputs[0]->value;
        for (std::size_t i = 0; i < x.size(); ++i)
          n.value[i] = 1.0 / (1.0 + std::exp(-x[i]));
      },
      [](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.requires_grad) return;
        a.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          double y = n.value[i];
          a.grad[i] += n.grad[i] * y * (1.0 - y);
        }
      });
}

Tensor log(const Tensor& a) {
  for (double v : a.data())
    if (v <= 0.0)
      throw ValidationError("log: non-positive input " + std::to_string(v));
  return make_op(
      "log", a.shape(), {&a},
      [](Node& n) {
        const auto& x = n.inputs[0]->value;
        for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = std::log(x[i]);
      },
      [](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.requires_grad) return;
        a.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          a.grad[i] += n.grad[i] / a.value[i];
      });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  if (axis >= a.ndim())
    throw ValidationError("softmax: axis " + std::to_string(axis) +
                          " out of range for " + shape_str(a.shape()));
  AxisSplit sp(a.shape(), axis);
  return make_op(
      "softmax", a.shape(), {&a},
      [sp](Node& n) {
        const auto& x = n.inputs[0]->value;
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t i = 0; i < sp.inner; ++i) {
            std::size_t base = o * sp.axis * sp.inner + i;
            double mx = x[base];
            for (std::size_t k = 1; k < sp.axis; ++k)
              mx = std::max(mx, x[base + k * sp.inner]);
            double z = 0.0;
            for (std::size_t k = 0; k < sp.axis; ++k) {
              double e = std::exp(x[base + k * sp.inner] - mx);
              n.value[base + k * sp.inner] = e;
              z += e;
            }
            for (std::size_t k = 0; k < sp.axis; ++k) n.value[base + k * sp.inner] /= z;
          }
      },
      [sp](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.requires_grad) return;
        a.ensure_grad();
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t i = 0; i < sp.inner; ++i) {
            std::size_t base = o * sp.axis * sp.inner + i;
            double dot = 0.0;
            for (std::size_t k = 0; k < sp.axis; ++k)
              dot += n.grad[base + k * sp.inner] * n.value[base + k * sp.inner];
            for (std::size_t k = 0; k < sp.axis; ++k) {
              std::size_t idx = base + k * sp.inner;
              a.grad[idx] += n.value[idx] * (n.grad[idx] - dot);
            }
          }
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.ndim() == 0) throw ValidationError("layer_norm: scalar input");
  std::size_t d = x.shape().back();
  if (gain.ndim() != 1 || bias.ndim() != 1 || gain.dim(0) != d || bias.dim(0) != d)
    throw ValidationError("layer_norm: gain/bias must be [" + std::to_string(d) +
                          "], got " + shape_str(gain.shape()) + " and " +
                          shape_str(bias.shape()));
  std::size_t rows = x.size() / d;
  return make_op(
      "layer_norm", x.shape(), {&x, &gain, &bias},
      [rows, d, eps](Node& n) {
        const auto& xv = n.inputs[0]->value;
        const auto& g = n.inputs[1]->value;
        const auto& b = n.inputs[2]->value;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* row = xv.data() + r * d;
          double mu = 0.0;
          for (std::size_t j = 0; j < d; ++j) mu += row[j];
          mu /= static_cast<double>(d);
          double var = 0.0;
          for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
          var /= static_cast<double>(d);
          double inv = 1.0 / std::sqrt(var + eps);
          for (std::size_t j = 0; j < d; ++j)
            n.value[r * d + j] = (row[j] - mu) * inv * g[j] + b[j];
        }
      },
      [rows, d, eps](Node& n) {
        Node& x = *n.inputs[0];
        Node& g = *n.inputs[1];
        Node& b = *n.inputs[2];
        if (g.requires_grad) g.ensure_grad();
        if (b.requires_grad) b.ensure_grad();
        if (x.requires_grad) x.ensure_grad();
        std::vector<double> xhat(d), gh(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* row = x.value.data() + r * d;
          const double* gr = n.grad.data() + r * d;
          double mu = 0.0;
          for (std::size_t j = 0; j < d; ++j) mu += row[j];
          mu /= static_cast<double>(d);
          double var = 0.0;
          for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
          var /= static_cast<double>(d);
          double inv = 1.0 / std::sqrt(var + eps);
          for (std::size_t j = 0; j < d; ++j) xhat[j] = (row[j] - mu) * inv;
          if (g.requires_grad)
            for (std::size_t j = 0; j < d; ++j) g.grad[j] += gr[j] * xhat[j];
          if (b.requires_grad)
            for (std::size_t j = 0; j < d; ++j) b.grad[j] += gr[j];
          if (x.requires_grad) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              gh[j] = gr[j] * g.value[j];
              m1 += gh[j];
              m2 += gh[j] * xhat[j];
            }
            m1 /= static_cast<double>(d);
            m2 /= static_cast<double>(d);
            for (std::size_t j = 0; j < d; ++j)
              x.grad[r * d + j] += (gh[j] - m1 - xhat[j] * m2) * inv;
          }
        }
      });
}

// ---- reductions ---------------------------------------------------------------

Tensor sum(const Tensor& a) {
  return make_op(
      "sum", {}, {&a},
      [](Node& n) {
        double s = 0.0;
        for (double v : n.inputs[0]->value) s += v;
        n.value[0] = s;
      },
      [](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.requires_grad) return;
        a.ensure_grad();
        for (double& g : a.grad) g += n.grad[0];
      });
}

Tensor mean(const Tensor& a) {
  std::size_t n_el = a.size();
  return make_op(
      "mean", {}, {&a},
      [n_el](Node& n) {
        double s = 0.0;
        for (double v : n.inputs[0]->value) s += v;
        n.value[0] = s / static_cast<double>(n_el);
      },
      [n_el](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.requires_grad) return;
        a.ensure_grad();
        double g = n.grad[0] / static_cast<double>(n_el);
        for (double& gv : a.grad) gv += g;
      });
}

// ---- structural ops -------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape new_shape) {
  if (numel(new_shape) != a.size())
    throw ValidationError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                          shape_str(new_shape));
  return make_op(
      "reshape", std::move(new_shape), {&a},
      [](Node& n) { n.value = n.inputs[0]->value; },
      [](Node& n) { accumulate(*n.inputs[0], n.grad); });
}

Tensor transpose2d(const Tensor& a) {
  if (a.ndim() != 2)
    throw ValidationError("transpose2d: expects rank 2, got " + shape_str(a.shape()));
  std::size_t r = a.dim(0), c = a.dim(1);
  return make_op(
      "transpose2d", {c, r}, {&a},
      [r, c](Node& n) {
        const auto& x = n.inputs[0]->value;
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) n.value[j * r + i] = x[i * c + j];
      },
      [r, c](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.requires_grad) return;
        a.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) a.grad[i * c + j] += n.grad[j * r + i];
      });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ValidationError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size())
    throw ValidationError("concat: axis " + std::to_string(axis) + " out of range");
  Shape out = s0;
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Shape& sp = parts[p].shape();
    if (sp.size() != s0.size())
      throw ValidationError("concat: rank mismatch " + shape_str(s0) + " vs " +
                            shape_str(sp));
    for (std::size_t i = 0; i < s0.size(); ++i)
      if (i != axis && sp[i] != s0[i])
        throw ValidationError("concat: shape mismatch " + shape_str(s0) + " vs " +
                              shape_str(sp));
    out[axis] += sp[axis];
  }
  AxisSplit sp_out(out, axis);
  std::vector<std::size_t> extents;
  std::vector<const Tensor*> ptrs;
  for (const auto& p : parts) {
    extents.push_back(p.dim(axis));
    ptrs.push_back(&p);
  }
  auto node = std::make_shared<Node>();
  node->shape = out;
  node->value.resize(numel(out));
  node->op = "concat";
  for (const auto& p : parts) node->inputs.push_back(p.node_ptr());
  node->recompute = [sp_out, extents](Node& n) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < n.inputs.size(); ++p) {
      std::size_t block = extents[p] * sp_out.inner;
      const auto& src = n.inputs[p]->value;
      for (std::size_t o = 0; o < sp_out.outer; ++o)
        std::copy(src.begin() + o * block, src.begin() + (o + 1) * block,
                  n.value.begin() + o * sp_out.axis * sp_out.inner + offset);
      offset += block;
    }
  };
  node->recompute(*node);
  bool rec = g_recording;
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (rec && any) {
    node->requires_grad = true;
    node->is_leaf = false;
    node->backward = [sp_out, extents](Node& n) {
      std::size_t offset = 0;
      for (std::size_t p = 0; p < n.inputs.size(); ++p) {
        std::size_t block = extents[p] * sp_out.inner;
        Node& in = *n.inputs[p];
        if (in.requires_grad) {
          in.ensure_grad();
          for (std::size_t o = 0; o < sp_out.outer; ++o) {
            const double* g = n.grad.data() + o * sp_out.axis * sp_out.inner + offset;
            double* dst = in.grad.data() + o * block;
            for (std::size_t i = 0; i < block; ++i) dst[i] += g[i];
          }
        }
        offset += block;
      }
    };
  } else {
    node->inputs.clear();
    node->recompute = nullptr;
  }
  return Tensor::wrap(std::move(node));
}

Tensor narrow(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len) {
  if (axis >= a.ndim())
    throw ValidationError("narrow: axis " + std::to_string(axis) + " out of range");
  if (len == 0 || start + len > a.dim(axis))
    throw ValidationError("narrow: slice [" + std::to_string(start) + "," +
                          std::to_string(start + len) + ") out of range for " +
                          shape_str(a.shape()));
  Shape out = a.shape();
  out[axis] = len;
  AxisSplit sp(a.shape(), axis);
  return make_op(
      "narrow", out, {&a},
      [sp, start, len](Node& n) {
        const auto& x = n.inputs[0]->value;
        std::size_t block = len * sp.inner;
        for (std::size_t o = 0; o < sp.outer; ++o)
          std::copy(x.begin() + (o * sp.axis + start) * sp.inner,
                    x.begin() + (o * sp.axis + start) * sp.inner + block,
                    n.value.begin() + o * block);
      },
      [sp, start, len](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.requires_grad) return;
        a.ensure_grad();
        std::size_t block = len * sp.inner;
        for (std::size_t o = 0; o < sp.outer; ++o) {
          const double* g = n.grad.data() + o * block;
          double* dst = a.grad.data() + (o * sp.axis + start) * sp.inner;
          for (std::size_t i = 0; i < block; ++i) dst[i] += g[i];
        }
      });
}

Tensor l1_distance(const Tensor& a, const Tensor& b) {
  require_same_shape("l1_distance", a, b);
  std::size_t n_el = a.size();
  return make_op(
      "l1_distance", {}, {&a, &b},
      [n_el](Node& n) {
        const auto& x = n.inputs[0]->value;
        const auto& y = n.inputs[1]->value;
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
        n.value[0] = s / static_cast<double>(n_el);
      },
      [n_el](Node& n) {
        Node& a = *n.inputs[0];
        Node& b = *n.inputs[1];
        double g = n.grad[0] / static_cast<double>(n_el);
        if (a.requires_grad) a.ensure_grad();
        if (b.requires_grad) b.ensure_grad();
        for (std::size_t i = 0; i < a.value.size(); ++i) {
          double d = a.value[i] - b.value[i];
          double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
          if (a.requires_grad) a.grad[i] += g * s;
          if (b.requires_grad) b.grad[i] -= g * s;
        }
      });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw ValidationError("clamp: lo > hi");
  return make_op(
      "clamp", a.shape(), {&a},
      [lo, hi](Node& n) {
        const auto& x = n.inputs[0]->value;
        for (std::size_t i = 0; i < x.size(); ++i)
          n.value[i] = std::min(std::max(x[i], lo), hi);
      },
      [lo, hi](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.requires_grad) return;
        a.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          if (a.value[i] >= lo && a.value[i] <= hi) a.grad[i] += n.grad[i];
      });
}

Tensor glu(const Tensor& a, const Tensor& b) {
  require_same_shape("glu", a, b);
  return mul(a, sigmoid(b));
}

Tensor detach(const Tensor& a) {
  return Tensor::wrap(make_leaf(a.shape(), a.data(), false));
}

// ---- backward -----------------------------------------------------------------

namespace {

std::vector<NodePtr> topo_order(const NodePtr& root) {
  // Iterative post-order DFS: inputs land before consumers.
  std::vector<NodePtr> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      NodePtr child = node->inputs[next++];
      if (visited.insert(child.get()).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

void backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw ValidationError("backward: loss must be scalar, got " +
                          shape_str(loss.shape()));
  auto order = topo_order(loss.node_ptr());
  // Interior grads reset per sweep; leaf grads accumulate across sweeps.
  for (auto& n : order)
    if (!n->is_leaf) n->grad.assign(n->value.size(), 0.0);
  Node* root = loss.node_ptr().get();
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node& n = **it;
    if (!n.is_leaf && n.backward) n.backward(n);
  }
}

Graph::Graph(const Tensor& root) { order_ = topo_order(root.node_ptr()); }

std::vector<Graph::NodeInfo> Graph::nodes() const {
  std::vector<NodeInfo> out;
  out.reserve(order_.size());
  std::unordered_map<Node*, std::size_t> ids;
  for (std::size_t i = 0; i < order_.size(); ++i) ids[order_[i].get()] = i;
  for (const auto& n : order_) {
    NodeInfo info;
    info.op = n->op;
    info.value = &n->value;
    for (const auto& in : n->inputs) info.input_ids.push_back(ids.at(in.get()));
    out.push_back(std::move(info));
  }
  return out;
}

void Graph::replay() {
  for (const auto& n : order_)
    if (n->recompute) n->recompute(*n);
}

}  // namespace cycledance
