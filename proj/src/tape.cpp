#include "lptgnn/tape.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>

#include "lptgnn/errors.hpp"

namespace lptgnn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Strides of `shape` right-aligned against a broadcast result of rank
// `out_rank`; broadcast modes (extent 1 against a larger extent) get stride 0.
std::vector<std::int64_t> broadcast_strides(const Shape& shape, const Shape& out, int out_rank) {
  std::vector<std::int64_t> strides(static_cast<std::size_t>(out_rank), 0);
  std::vector<std::int64_t> own = row_major_strides(shape);
  int offset = out_rank - static_cast<int>(shape.size());
  for (int i = 0; i < static_cast<int>(shape.size()); ++i) {
    std::int64_t extent = shape[static_cast<std::size_t>(i)];
    if (extent == out[static_cast<std::size_t>(i + offset)])
      strides[static_cast<std::size_t>(i + offset)] = own[static_cast<std::size_t>(i)];
  }
  return strides;
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  int rank = std::max(a.size(), b.size());
  Shape out(static_cast<std::size_t>(rank), 1);
  for (int i = 0; i < rank; ++i) {
    int ia = static_cast<int>(a.size()) - rank + i;
    int ib = static_cast<int>(b.size()) - rank + i;
    std::int64_t da = ia >= 0 ? a[static_cast<std::size_t>(ia)] : 1;
    std::int64_t db = ib >= 0 ? b[static_cast<std::size_t>(ib)] : 1;
    if (da != db && da != 1 && db != 1)
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    out[static_cast<std::size_t>(i)] = std::max(da, db);
  }
  return out;
}

Tensor reduce_to_shape(const Tensor& src, const Shape& target) {
  Tensor out(target);
  const Shape& s = src.shape();
  std::vector<std::int64_t> tstrides = broadcast_strides(target, s, static_cast<int>(s.size()));
  std::vector<std::int64_t> idx(s.size(), 0);
  std::int64_t flat = 0;
  if (src.numel() == 0) return out;
  do {
    std::int64_t t = 0;
    for (std::size_t i = 0; i < s.size(); ++i) t += idx[i] * tstrides[i];
    out[t] += src[flat];
    ++flat;
  } while (advance_index(idx, s));
  return out;
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax_rows expects a matrix, got " + shape_str(logits.shape()));
  std::int64_t rows = logits.dim(0), cols = logits.dim(1);
  Tensor out(logits.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* in = logits.data() + r * cols;
    double* o = out.data() + r * cols;
    double m = in[0];
    for (std::int64_t c = 1; c < cols; ++c) m = std::max(m, in[c]);
    double z = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) {
      o[c] = std::exp(in[c] - m);
      z += o[c];
    }
    for (std::int64_t c = 0; c < cols; ++c) o[c] /= z;
  }
  return out;
}

Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&, int)> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Node& Tape::node(Var v) {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw ShapeError("invalid tape variable");
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw ShapeError("invalid tape variable");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Tensor& Tape::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.grad_alloc) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_alloc = true;
  }
  return n.grad;
}

void Tape::accumulate(int id, const Tensor& delta) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  grad_buffer(id).add_(delta);
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.grad_alloc) throw ShapeError("gradient was not computed for this variable");
  return n.grad;
}

bool Tape::has_grad(Var v) const { return node(v).grad_alloc; }

void Tape::backward(Var loss) {
  Node& top = node(loss);
  if (top.value.numel() != 1 || top.value.rank() != 0)
    throw ShapeError("backward expects a scalar loss, got " + shape_str(top.value.shape()));
  if (swept_) throw ShapeError("backward may run once per tape");
  swept_ = true;
  if (!top.requires_grad) return;
  grad_buffer(loss.id)[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad_alloc && n.backprop) n.backprop(*this, i);
  }
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

Var Tape::add(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (!va.same_shape(vb))
    throw ShapeError("add shape mismatch: " + shape_str(va.shape()) + " vs " + shape_str(vb.shape()));
  Tensor out = va;
  out.add_(vb);
  bool req = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(out), req, [a, b](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  });
}

Var Tape::scale(Var x, double factor) {
  Tensor out = value(x);
  out.scale_(factor);
  return push(std::move(out), node(x).requires_grad, [x, factor](Tape& t, int self) {
    Tensor g = t.nodes_[static_cast<std::size_t>(self)].grad;
    g.scale_(factor);
    t.accumulate(x.id, g);
  });
}

Var Tape::add_bias(Var x, Var bias) {
  const Tensor& vx = value(x);
  const Tensor& vb = value(bias);
  int lead = vx.rank() - vb.rank();
  bool trailing_match = lead >= 0;
  for (int i = 0; trailing_match && i < vb.rank(); ++i)
    trailing_match = vx.dim(lead + i) == vb.dim(i);
  if (!trailing_match)
    throw ShapeError("bias " + shape_str(vb.shape()) + " does not match trailing modes of " +
                     shape_str(vx.shape()));
  Tensor out = vx;
  std::int64_t span = vb.numel();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += vb[i % span];
  bool req = node(x).requires_grad || node(bias).requires_grad;
  Shape bshape = vb.shape();
  return push(std::move(out), req, [x, bias, bshape](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    t.accumulate(x.id, g);
    if (t.nodes_[static_cast<std::size_t>(bias.id)].requires_grad)
      t.accumulate(bias.id, reduce_to_shape(g, bshape));
  });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  Shape oshape = broadcast_shape(va.shape(), vb.shape());
  int orank = static_cast<int>(oshape.size());
  std::vector<std::int64_t> sa = broadcast_strides(va.shape(), oshape, orank);
  std::vector<std::int64_t> sb = broadcast_strides(vb.shape(), oshape, orank);
  Tensor out(oshape);
  std::vector<std::int64_t> idx(oshape.size(), 0);
  std::int64_t flat = 0;
  do {
    std::int64_t ia = 0, ib = 0;
    for (std::size_t i = 0; i < oshape.size(); ++i) {
      ia += idx[i] * sa[i];
      ib += idx[i] * sb[i];
    }
    out[flat++] = va[ia] * vb[ib];
  } while (advance_index(idx, oshape));
  bool req = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(out), req, [a, b, oshape, sa, sb](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    bool need_a = t.nodes_[static_cast<std::size_t>(a.id)].requires_grad;
    bool need_b = t.nodes_[static_cast<std::size_t>(b.id)].requires_grad;
    Tensor ga = need_a ? Tensor::zeros(va.shape()) : Tensor();
    Tensor gb = need_b ? Tensor::zeros(vb.shape()) : Tensor();
    std::vector<std::int64_t> idx(oshape.size(), 0);
    std::int64_t flat = 0;
    do {
      std::int64_t ia = 0, ib = 0;
      for (std::size_t i = 0; i < oshape.size(); ++i) {
        ia += idx[i] * sa[i];
        ib += idx[i] * sb[i];
      }
      if (need_a) ga[ia] += g[flat] * vb[ib];
      if (need_b) gb[ib] += g[flat] * va[ia];
      ++flat;
    } while (advance_index(idx, oshape));
    if (need_a) t.accumulate(a.id, ga);
    if (need_b) t.accumulate(b.id, gb);
  });
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.rank() != 2 || vb.rank() != 2 || va.dim(1) != vb.dim(0))
    throw ShapeError("matmul shape mismatch: " + shape_str(va.shape()) + " x " + shape_str(vb.shape()));
  std::int64_t m = va.dim(0), k = va.dim(1), n = vb.dim(1);
  Tensor out(Shape{m, n});
  MatMap(out.data(), m, n).noalias() =
      ConstMatMap(va.data(), m, k) * ConstMatMap(vb.data(), k, n);
  bool req = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(out), req, [a, b, m, k, n](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    ConstMatMap gm(g.data(), m, n);
    if (t.nodes_[static_cast<std::size_t>(a.id)].requires_grad) {
      Tensor ga(Shape{m, k});
      MatMap(ga.data(), m, k).noalias() = gm * ConstMatMap(t.value(b).data(), k, n).transpose();
      t.accumulate(a.id, ga);
    }
    if (t.nodes_[static_cast<std::size_t>(b.id)].requires_grad) {
      Tensor gb(Shape{k, n});
      MatMap(gb.data(), k, n).noalias() = ConstMatMap(t.value(a).data(), m, k).transpose() * gm;
      t.accumulate(b.id, gb);
    }
  });
}

Var Tape::relu(Var x) {
  Tensor out = value(x);
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::max(out[i], 0.0);
  return push(std::move(out), node(x).requires_grad, [x](Tape& t, int self) {
    Tensor g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Tensor& vx = t.value(x);
    for (std::int64_t i = 0; i < g.numel(); ++i)
      if (vx[i] <= 0.0) g[i] = 0.0;
    t.accumulate(x.id, g);
  });
}

Var Tape::permute(Var x, const std::vector<int>& perm) {
  const Tensor& vx = value(x);
  int r = vx.rank();
  std::vector<bool> seen(static_cast<std::size_t>(r), false);
  if (static_cast<int>(perm.size()) != r)
    throw ShapeError("permute rank mismatch for " + shape_str(vx.shape()));
  for (int p : perm) {
    if (p < 0 || p >= r || seen[static_cast<std::size_t>(p)])
      throw ShapeError("invalid permutation for " + shape_str(vx.shape()));
    seen[static_cast<std::size_t>(p)] = true;
  }
  Shape oshape(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) oshape[static_cast<std::size_t>(i)] = vx.dim(perm[static_cast<std::size_t>(i)]);
  std::vector<std::int64_t> in_strides = row_major_strides(vx.shape());
  Tensor out(oshape);
  std::vector<std::int64_t> idx(oshape.size(), 0);
  std::int64_t flat = 0;
  if (out.numel() > 0) {
    do {
      std::int64_t src = 0;
      for (std::size_t i = 0; i < oshape.size(); ++i) src += idx[i] * in_strides[static_cast<std::size_t>(perm[i])];
      out[flat++] = vx[src];
    } while (advance_index(idx, oshape));
  }
  return push(std::move(out), node(x).requires_grad,
              [x, perm, oshape, in_strides](Tape& t, int self) {
                const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
                Tensor gx = Tensor::zeros(t.value(x).shape());
                std::vector<std::int64_t> idx(oshape.size(), 0);
                std::int64_t flat = 0;
                do {
                  std::int64_t src = 0;
                  for (std::size_t i = 0; i < oshape.size(); ++i)
                    src += idx[i] * in_strides[static_cast<std::size_t>(perm[i])];
                  gx[src] += g[flat++];
                } while (advance_index(idx, oshape));
                t.accumulate(x.id, gx);
              });
}

Var Tape::reshape(Var x, Shape shape) {
  Tensor out = value(x).reshaped(shape);
  Shape orig = value(x).shape();
  return push(std::move(out), node(x).requires_grad, [x, orig](Tape& t, int self) {
    t.accumulate(x.id, t.nodes_[static_cast<std::size_t>(self)].grad.reshaped(orig));
  });
}

Var Tape::sum_axis(Var x, int axis) {
  const Tensor& vx = value(x);
  if (axis < 0 || axis >= vx.rank())
    throw ShapeError("sum_axis mode out of range for " + shape_str(vx.shape()));
  Shape oshape;
  for (int i = 0; i < vx.rank(); ++i)
    if (i != axis) oshape.push_back(vx.dim(i));
  std::int64_t outer = 1, extent = vx.dim(axis), inner = 1;
  for (int i = 0; i < axis; ++i) outer *= vx.dim(i);
  for (int i = axis + 1; i < vx.rank(); ++i) inner *= vx.dim(i);
  Tensor out(oshape.empty() ? Shape{} : oshape);
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t e = 0; e < extent; ++e)
      for (std::int64_t i = 0; i < inner; ++i)
        out[o * inner + i] += vx[(o * extent + e) * inner + i];
  return push(std::move(out), node(x).requires_grad,
              [x, outer, extent, inner](Tape& t, int self) {
                const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
                Tensor gx = Tensor::zeros(t.value(x).shape());
                for (std::int64_t o = 0; o < outer; ++o)
                  for (std::int64_t e = 0; e < extent; ++e)
                    for (std::int64_t i = 0; i < inner; ++i)
                      gx[(o * extent + e) * inner + i] = g[o * inner + i];
                t.accumulate(x.id, gx);
              });
}

Var Tape::sum_all(Var x) {
  const Tensor& vx = value(x);
  double s = 0.0;
  for (std::int64_t i = 0; i < vx.numel(); ++i) s += vx[i];
  return push(Tensor::scalar(s), node(x).requires_grad, [x](Tape& t, int self) {
    double g = t.nodes_[static_cast<std::size_t>(self)].grad[0];
    Tensor gx = Tensor::full(t.value(x).shape(), g);
    t.accumulate(x.id, gx);
  });
}

Var Tape::max_axis0(Var x) {
  const Tensor& vx = value(x);
  if (vx.rank() < 1) throw ShapeError("max_axis0 needs rank >= 1");
  std::int64_t extent = vx.dim(0);
  std::int64_t inner = vx.numel() / extent;
  Shape oshape(vx.shape().begin() + 1, vx.shape().end());
  Tensor out(oshape.empty() ? Shape{} : oshape);
  std::vector<std::int64_t> argmax(static_cast<std::size_t>(inner), 0);
  for (std::int64_t i = 0; i < inner; ++i) {
    double best = vx[i];
    std::int64_t arg = 0;
    for (std::int64_t e = 1; e < extent; ++e) {
      double v = vx[e * inner + i];
      if (v > best) {
        best = v;
        arg = e;
      }
    }
    out[i] = best;
    argmax[static_cast<std::size_t>(i)] = arg;
  }
  return push(std::move(out), node(x).requires_grad,
              [x, inner, argmax](Tape& t, int self) {
                const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
                Tensor gx = Tensor::zeros(t.value(x).shape());
                for (std::int64_t i = 0; i < inner; ++i)
                  gx[argmax[static_cast<std::size_t>(i)] * inner + i] = g[i];
                t.accumulate(x.id, gx);
              });
}

Var Tape::stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows needs at least one input");
  const Shape& elem = value(rows[0]).shape();
  for (const Var& r : rows)
    if (value(r).shape() != elem)
      throw ShapeError("stack_rows inputs must share a shape");
  std::int64_t span = value(rows[0]).numel();
  Shape oshape{static_cast<std::int64_t>(rows.size())};
  oshape.insert(oshape.end(), elem.begin(), elem.end());
  Tensor out(oshape);
  bool req = false;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Tensor& v = value(rows[r]);
    std::copy(v.data(), v.data() + span, out.data() + static_cast<std::int64_t>(r) * span);
    req = req || node(rows[r]).requires_grad;
  }
  std::vector<Var> parents = rows;
  return push(std::move(out), req, [parents, span, elem](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    for (std::size_t r = 0; r < parents.size(); ++r) {
      Tensor slice(elem);
      std::copy(g.data() + static_cast<std::int64_t>(r) * span,
                g.data() + static_cast<std::int64_t>(r + 1) * span, slice.data());
      t.accumulate(parents[r].id, slice);
    }
  });
}

Var Tape::aggregate_rows(Var x, const std::vector<std::vector<std::int64_t>>& groups) {
  const Tensor& vx = value(x);
  if (vx.rank() != 2) throw ShapeError("aggregate_rows expects a matrix, got " + shape_str(vx.shape()));
  std::int64_t rows = vx.dim(0), d = vx.dim(1);
  if (groups.empty()) throw ShapeError("aggregate_rows needs at least one group");
  Tensor out(Shape{static_cast<std::int64_t>(groups.size()), d});
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw ShapeError("aggregate_rows group " + std::to_string(g) + " is empty");
    for (std::int64_t idx : groups[g]) {
      if (idx < 0 || idx >= rows)
        throw ShapeError("aggregate_rows index " + std::to_string(idx) + " out of range");
      for (std::int64_t c = 0; c < d; ++c)
        out[static_cast<std::int64_t>(g) * d + c] += vx[idx * d + c];
    }
    double inv = 1.0 / static_cast<double>(groups[g].size());
    for (std::int64_t c = 0; c < d; ++c) out[static_cast<std::int64_t>(g) * d + c] *= inv;
  }
  return push(std::move(out), node(x).requires_grad, [x, groups, d](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    Tensor gx = Tensor::zeros(t.value(x).shape());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      double inv = 1.0 / static_cast<double>(groups[gi].size());
      for (std::int64_t idx : groups[gi])
        for (std::int64_t c = 0; c < d; ++c)
          gx[idx * d + c] += g[static_cast<std::int64_t>(gi) * d + c] * inv;
    }
    t.accumulate(x.id, gx);
  });
}

Var Tape::conv2d(Var x, Var weight, Var bias) {
  const Tensor& vx = value(x);
  const Tensor& vw = value(weight);
  const Tensor& vb = value(bias);
  if (vx.rank() != 3 || vw.rank() != 4 || vb.rank() != 1)
    throw ShapeError("conv2d expects x (C,H,W), weight (O,C,k,k), bias (O)");
  std::int64_t C = vx.dim(0), H = vx.dim(1), W = vx.dim(2);
  std::int64_t O = vw.dim(0), k = vw.dim(2);
  if (vw.dim(1) != C || vw.dim(3) != k || k % 2 == 0 || vb.dim(0) != O)
    throw ShapeError("conv2d weight " + shape_str(vw.shape()) + " incompatible with input " +
                     shape_str(vx.shape()));
  std::int64_t pad = k / 2;
  std::int64_t patch = C * k * k, cols = H * W;
  Tensor im2col(Shape{patch, cols});
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t di = 0; di < k; ++di)
      for (std::int64_t dj = 0; dj < k; ++dj) {
        std::int64_t row = (c * k + di) * k + dj;
        for (std::int64_t h = 0; h < H; ++h) {
          std::int64_t xi = h + di - pad;
          if (xi < 0 || xi >= H) continue;
          for (std::int64_t w = 0; w < W; ++w) {
            std::int64_t xj = w + dj - pad;
            if (xj < 0 || xj >= W) continue;
            im2col[row * cols + h * W + w] = vx[(c * H + xi) * W + xj];
          }
        }
      }
  Tensor out(Shape{O, H, W});
  MatMap(out.data(), O, cols).noalias() =
      ConstMatMap(vw.data(), O, patch) * ConstMatMap(im2col.data(), patch, cols);
  for (std::int64_t o = 0; o < O; ++o)
    for (std::int64_t i = 0; i < cols; ++i) out[o * cols + i] += vb[o];
  bool req = node(x).requires_grad || node(weight).requires_grad || node(bias).requires_grad;
  return push(std::move(out), req,
              [x, weight, bias, im2col = std::move(im2col), C, H, W, O, k, pad, patch,
               cols](Tape& t, int self) {
                const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
                ConstMatMap gm(g.data(), O, cols);
                if (t.nodes_[static_cast<std::size_t>(weight.id)].requires_grad) {
                  Tensor gw(Shape{O, C, k, k});
                  MatMap(gw.data(), O, patch).noalias() =
                      gm * ConstMatMap(im2col.data(), patch, cols).transpose();
                  t.accumulate(weight.id, gw);
                }
                if (t.nodes_[static_cast<std::size_t>(bias.id)].requires_grad) {
                  Tensor gb(Shape{O});
                  for (std::int64_t o = 0; o < O; ++o)
                    for (std::int64_t i = 0; i < cols; ++i) gb[o] += g[o * cols + i];
                  t.accumulate(bias.id, gb);
                }
                if (t.nodes_[static_cast<std::size_t>(x.id)].requires_grad) {
                  Tensor cols_grad(Shape{patch, cols});
                  MatMap(cols_grad.data(), patch, cols).noalias() =
                      ConstMatMap(t.value(weight).data(), O, patch).transpose() * gm;
                  Tensor gx(Shape{C, H, W});
                  for (std::int64_t c = 0; c < C; ++c)
                    for (std::int64_t di = 0; di < k; ++di)
                      for (std::int64_t dj = 0; dj < k; ++dj) {
                        std::int64_t row = (c * k + di) * k + dj;
                        for (std::int64_t h = 0; h < H; ++h) {
                          std::int64_t xi = h + di - pad;
                          if (xi < 0 || xi >= H) continue;
                          for (std::int64_t w = 0; w < W; ++w) {
                            std::int64_t xj = w + dj - pad;
                            if (xj < 0 || xj >= W) continue;
                            gx[(c * H + xi) * W + xj] += cols_grad[row * cols + h * W + w];
                          }
                        }
                      }
                  t.accumulate(x.id, gx);
                }
              });
}

Var Tape::maxpool2d(Var x) {
  const Tensor& vx = value(x);
  if (vx.rank() != 3) throw ShapeError("maxpool2d expects (C,H,W), got " + shape_str(vx.shape()));
  std::int64_t C = vx.dim(0), H = vx.dim(1), W = vx.dim(2);
  std::int64_t Ho = H / 2, Wo = W / 2;
  if (Ho == 0 || Wo == 0) throw ShapeError("maxpool2d input too small: " + shape_str(vx.shape()));
  Tensor out(Shape{C, Ho, Wo});
  std::vector<std::int64_t> argmax(static_cast<std::size_t>(C * Ho * Wo));
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t h = 0; h < Ho; ++h)
      for (std::int64_t w = 0; w < Wo; ++w) {
        std::int64_t best_idx = (c * H + 2 * h) * W + 2 * w;
        double best = vx[best_idx];
        for (std::int64_t di = 0; di < 2; ++di)
          for (std::int64_t dj = 0; dj < 2; ++dj) {
            std::int64_t idx = (c * H + 2 * h + di) * W + 2 * w + dj;
            if (vx[idx] > best) {
              best = vx[idx];
              best_idx = idx;
            }
          }
        out[(c * Ho + h) * Wo + w] = best;
        argmax[static_cast<std::size_t>((c * Ho + h) * Wo + w)] = best_idx;
      }
  return push(std::move(out), node(x).requires_grad,
              [x, argmax = std::move(argmax)](Tape& t, int self) {
                const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
                Tensor gx = Tensor::zeros(t.value(x).shape());
                for (std::int64_t i = 0; i < g.numel(); ++i)
                  gx[argmax[static_cast<std::size_t>(i)]] += g[i];
                t.accumulate(x.id, gx);
              });
}

Var Tape::batchnorm_train(Var x, Var gamma, Var beta, BatchNormStats* stats) {
  const Tensor& vx = value(x);
  if (vx.rank() != 2) throw ShapeError("batchnorm expects (B,d), got " + shape_str(vx.shape()));
  std::int64_t B = vx.dim(0), d = vx.dim(1);
  if (value(gamma).shape() != Shape{d} || value(beta).shape() != Shape{d})
    throw ShapeError("batchnorm parameter shape mismatch");
  Tensor mean(Shape{d}), var(Shape{d});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < d; ++c) mean[c] += vx[b * d + c];
  mean.scale_(1.0 / static_cast<double>(B));
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < d; ++c) {
      double diff = vx[b * d + c] - mean[c];
      var[c] += diff * diff;
    }
  var.scale_(1.0 / static_cast<double>(B));
  if (stats) {
    stats->mean = mean;
    stats->var = var;
  }
  Tensor invstd(Shape{d});
  for (std::int64_t c = 0; c < d; ++c) invstd[c] = 1.0 / std::sqrt(var[c] + kBatchNormEps);
  Tensor xhat(Shape{B, d});
  Tensor out(Shape{B, d});
  const Tensor& vg = value(gamma);
  const Tensor& vbeta = value(beta);
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < d; ++c) {
      double h = (vx[b * d + c] - mean[c]) * invstd[c];
      xhat[b * d + c] = h;
      out[b * d + c] = vg[c] * h + vbeta[c];
    }
  bool req = node(x).requires_grad || node(gamma).requires_grad || node(beta).requires_grad;
  return push(std::move(out), req,
              [x, gamma, beta, xhat = std::move(xhat), invstd = std::move(invstd), B,
               d](Tape& t, int self) {
                const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
                Tensor dgamma(Shape{d}), dbeta(Shape{d});
                for (std::int64_t b = 0; b < B; ++b)
                  for (std::int64_t c = 0; c < d; ++c) {
                    dgamma[c] += g[b * d + c] * xhat[b * d + c];
                    dbeta[c] += g[b * d + c];
                  }
                if (t.nodes_[static_cast<std::size_t>(x.id)].requires_grad) {
                  const Tensor& vg = t.value(gamma);
                  Tensor gx(Shape{B, d});
                  double invB = 1.0 / static_cast<double>(B);
                  for (std::int64_t b = 0; b < B; ++b)
                    for (std::int64_t c = 0; c < d; ++c)
                      gx[b * d + c] = vg[c] * invstd[c] *
                                      (g[b * d + c] - invB * dbeta[c] -
                                       xhat[b * d + c] * invB * dgamma[c]);
                  t.accumulate(x.id, gx);
                }
                t.accumulate(gamma.id, dgamma);
                t.accumulate(beta.id, dbeta);
              });
}

Var Tape::batchnorm_eval(Var x, Var gamma, Var beta, const Tensor& running_mean,
                         const Tensor& running_var) {
  const Tensor& vx = value(x);
  if (vx.rank() != 2) throw ShapeError("batchnorm expects (B,d), got " + shape_str(vx.shape()));
  std::int64_t B = vx.dim(0), d = vx.dim(1);
  if (running_mean.shape() != Shape{d} || running_var.shape() != Shape{d})
    throw ShapeError("batchnorm running statistic shape mismatch");
  Tensor invstd(Shape{d});
  for (std::int64_t c = 0; c < d; ++c)
    invstd[c] = 1.0 / std::sqrt(running_var[c] + kBatchNormEps);
  Tensor xhat(Shape{B, d});
  Tensor out(Shape{B, d});
  const Tensor& vg = value(gamma);
  const Tensor& vbeta = value(beta);
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < d; ++c) {
      double h = (vx[b * d + c] - running_mean[c]) * invstd[c];
      xhat[b * d + c] = h;
      out[b * d + c] = vg[c] * h + vbeta[c];
    }
  bool req = node(x).requires_grad || node(gamma).requires_grad || node(beta).requires_grad;
  return push(std::move(out), req,
              [x, gamma, beta, xhat = std::move(xhat), invstd = std::move(invstd), B,
               d](Tape& t, int self) {
                const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
                Tensor dgamma(Shape{d}), dbeta(Shape{d});
                for (std::int64_t b = 0; b < B; ++b)
                  for (std::int64_t c = 0; c < d; ++c) {
                    dgamma[c] += g[b * d + c] * xhat[b * d + c];
                    dbeta[c] += g[b * d + c];
                  }
                if (t.nodes_[static_cast<std::size_t>(x.id)].requires_grad) {
                  const Tensor& vg = t.value(gamma);
                  Tensor gx(Shape{B, d});
                  for (std::int64_t b = 0; b < B; ++b)
                    for (std::int64_t c = 0; c < d; ++c)
                      gx[b * d + c] = g[b * d + c] * vg[c] * invstd[c];
                  t.accumulate(x.id, gx);
                }
                t.accumulate(gamma.id, dgamma);
                t.accumulate(beta.id, dbeta);
              });
}

Var Tape::softmax_ce_sum(Var logits, const std::vector<int>& labels) {
  const Tensor& vl = value(logits);
  if (vl.rank() != 2) throw ShapeError("softmax_ce_sum expects (B,C), got " + shape_str(vl.shape()));
  std::int64_t B = vl.dim(0), C = vl.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != B)
    throw ShapeError("softmax_ce_sum label count mismatch");
  for (int y : labels)
    if (y < 0 || y >= C) throw ShapeError("softmax_ce_sum label out of range");
  Tensor probs = softmax_rows(vl);
  double loss = 0.0;
  for (std::int64_t b = 0; b < B; ++b) {
    double p = probs[b * C + labels[static_cast<std::size_t>(b)]];
    loss -= std::log(std::max(p, 1e-300));
  }
  return push(Tensor::scalar(loss), node(logits).requires_grad,
              [logits, labels, probs = std::move(probs), B, C](Tape& t, int self) {
                double up = t.nodes_[static_cast<std::size_t>(self)].grad[0];
                Tensor gl(Shape{B, C});
                for (std::int64_t b = 0; b < B; ++b)
                  for (std::int64_t c = 0; c < C; ++c) {
                    double delta = (c == labels[static_cast<std::size_t>(b)]) ? 1.0 : 0.0;
                    gl[b * C + c] = up * (probs[b * C + c] - delta);
                  }
                t.accumulate(logits.id, gl);
              });
}

}  // namespace lptgnn
