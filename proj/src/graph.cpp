#include "hiergen/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hiergen {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

void check_partition(const std::vector<Span>& spans, std::size_t n) {
  std::size_t expect = 0;
  for (const auto& s : spans) {
    if (s.begin != expect || s.end <= s.begin)
      throw ShapeError("sentence spans must be non-empty and contiguous");
    expect = s.end;
  }
  if (expect != n) throw ShapeError("sentence spans cover " + std::to_string(expect) + " of " + std::to_string(n) + " positions");
}

template <typename Real>
void softmax_inplace(std::span<Real> values) {
  if (values.empty()) return;
  const Real top = *std::max_element(values.begin(), values.end());
  Real total = 0;
  for (auto& x : values) {
    x = std::exp(x - top);
    total += x;
  }
  for (auto& x : values) x /= total;
}

template <typename Real>
Real log_sum_exp(std::span<const Real> values) {
  const Real top = *std::max_element(values.begin(), values.end());
  Real total = 0;
  for (auto x : values) total += std::exp(x - top);
  return top + std::log(total);
}

template void softmax_inplace<float>(std::span<float>);
template void softmax_inplace<double>(std::span<double>);
template float log_sum_exp<float>(std::span<const float>);
template double log_sum_exp<double>(std::span<const double>);

namespace {

template <typename Real>
Real sigmoid_of(Real x) {
  return x >= 0 ? Real(1) / (Real(1) + std::exp(-x)) : std::exp(x) / (Real(1) + std::exp(x));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

template <typename Real>
NodeId Graph<Real>::push(Tensor<Real> value, bool needs_grad) {
  Node n;
  n.owned = std::move(value);
  n.needs_grad = needs_grad && record_;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

template <typename Real>
void Graph<Real>::on_backward(NodeId out, std::function<void()> fn) {
  if (nodes_[out].needs_grad) nodes_[out].backward = std::move(fn);
}

template <typename Real>
NodeId Graph<Real>::constant(Tensor<Real> value) {
  return push(std::move(value), false);
}

template <typename Real>
NodeId Graph<Real>::parameter(const Tensor<Real>& value, Tensor<Real>* grad) {
  Node n;
  n.ref = &value;
  n.param_grad = grad;
  n.needs_grad = record_ && grad != nullptr;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

template <typename Real>
const Tensor<Real>& Graph<Real>::value(NodeId id) const {
  const Node& n = nodes_.at(id);
  return n.ref ? *n.ref : n.owned;
}

template <typename Real>
void Graph<Real>::backward(NodeId root) {
  if (!record_) throw std::logic_error("backward on a graph built without recording");
  require(v(root).size() == 1, "backward root must be a scalar");
  for (auto& n : nodes_)
    if (n.needs_grad) n.grad.assign(n.ref ? n.ref->size() : n.owned.size(), Real(0));
  if (!nodes_[root].needs_grad) return;
  nodes_[root].grad[0] = Real(1);
  for (NodeId i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad) continue;
    if (n.backward) n.backward();
    if (n.param_grad) {
      auto& dst = n.param_grad->data;
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
    }
  }
}

template <typename Real>
NodeId Graph<Real>::add(NodeId a, NodeId b) {
  require(v(a).shape == v(b).shape, "add: shape mismatch " + shape_string(v(a).shape) + " vs " + shape_string(v(b).shape));
  Tensor<Real> out = v(a);
  const auto& bv = v(b).data;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv[i];
  const NodeId o = push(std::move(out), needs(a) || needs(b));
  on_backward(o, [this, a, b, o] {
    for (NodeId x : {a, b})
      if (needs(x))
        for (std::size_t i = 0; i < g(o).size(); ++i) g(x)[i] += g(o)[i];
  });
  return o;
}

template <typename Real>
NodeId Graph<Real>::add_bias(NodeId x, NodeId bias) {
  const std::size_t cols = v(x).cols();
  require(v(bias).size() == cols, "add_bias: bias length does not match columns");
  Tensor<Real> out = v(x);
  const auto& bv = v(bias).data;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < cols; ++c) out(r, c) += bv[c];
  const NodeId o = push(std::move(out), needs(x) || needs(bias));
  on_backward(o, [this, x, bias, o, cols] {
    const auto& go = g(o);
    if (needs(x))
      for (std::size_t i = 0; i < go.size(); ++i) g(x)[i] += go[i];
    if (needs(bias))
      for (std::size_t i = 0; i < go.size(); ++i) g(bias)[i % cols] += go[i];
  });
  return o;
}

template <typename Real>
NodeId Graph<Real>::scale(NodeId x, Real factor) {
  Tensor<Real> out = v(x);
  for (auto& e : out.data) e *= factor;
  const NodeId o = push(std::move(out), needs(x));
  on_backward(o, [this, x, o, factor] {
    for (std::size_t i = 0; i < g(o).size(); ++i) g(x)[i] += factor * g(o)[i];
  });
  return o;
}

template <typename Real>
NodeId Graph<Real>::mul(NodeId a, NodeId b) {
  require(v(a).shape == v(b).shape, "mul: shape mismatch");
  Tensor<Real> out = v(a);
  const auto& bv = v(b).data;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv[i];
  const NodeId o = push(std::move(out), needs(a) || needs(b));
  on_backward(o, [this, a, b, o] {
    const auto& go = g(o);
    const auto& av = v(a).data;
    const auto& bv = v(b).data;
    if (needs(a))
      for (std::size_t i = 0; i < go.size(); ++i) g(a)[i] += go[i] * bv[i];
    if (needs(b))
      for (std::size_t i = 0; i < go.size(); ++i) g(b)[i] += go[i] * av[i];
  });
  return o;
}

template <typename Real>
NodeId Graph<Real>::matmul(NodeId a, NodeId b, bool transpose_b) {
  const auto& A = v(a);
  const auto& B = v(b);
  require(A.rank() == 2 && B.rank() == 2, "matmul: operands must be matrices");
  const std::size_t n = A.shape[0], k = A.shape[1];
  const std::size_t m = transpose_b ? B.shape[0] : B.shape[1];
  require((transpose_b ? B.shape[1] : B.shape[0]) == k,
          "matmul: inner dimensions differ " + shape_string(A.shape) + " vs " + shape_string(B.shape));
  Tensor<Real> out({n, m});
  if (transpose_b) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        Real acc = 0;
        const Real* ar = A.row(i);
        const Real* br = B.row(j);
        for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
        out(i, j) = acc;
      }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      Real* orow = out.row(i);
      for (std::size_t p = 0; p < k; ++p) {
        const Real av = A(i, p);
        if (av == Real(0)) continue;
        const Real* brow = B.row(p);
        for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
      }
    }
  }
  const NodeId o = push(std::move(out), needs(a) || needs(b));
  on_backward(o, [this, a, b, o, n, k, m, transpose_b] {
    const auto& A = v(a);
    const auto& B = v(b);
    const Real* go = g(o).data();
    if (needs(a)) {
      Real* ga = g(a).data();
      // dA = dC * B^T (or dC * B when B was transposed)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          const Real d = go[i * m + j];
          if (d == Real(0)) continue;
          if (transpose_b) {
            const Real* br = B.row(j);
            for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += d * br[p];
          } else {
            for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += d * B.data[p * m + j];
          }
        }
    }
    if (needs(b)) {
      Real* gb = g(b).data();
      for (std::size_t i = 0; i < n; ++i) {
        const Real* ar = A.row(i);
        for (std::size_t j = 0; j < m; ++j) {
          const Real d = go[i * m + j];
          if (d == Real(0)) continue;
          if (transpose_b) {
            for (std::size_t p = 0; p < k; ++p) gb[j * k + p] += d * ar[p];
          } else {
            for (std::size_t p = 0; p < k; ++p) gb[p * m + j] += d * ar[p];
          }
        }
      }
    }
  });
  return o;
}

template <typename Real>
NodeId Graph<Real>::sigmoid(NodeId x) {
  Tensor<Real> out = v(x);
  for (auto& e : out.data) e = sigmoid_of(e);
  const NodeId o = push(std::move(out), needs(x));
  on_backward(o, [this, x, o] {
    const auto& y = v(o).data;
    for (std::size_t i = 0; i < y.size(); ++i) g(x)[i] += g(o)[i] * y[i] * (Real(1) - y[i]);
  });
  return o;
}

template <typename Real>
NodeId Graph<Real>::glu(NodeId x) {
  const auto& X = v(x);
  require(X.rank() >= 1 && X.shape.back() % 2 == 0,
          "glu: last dimension must be even, got " + shape_string(X.shape));
  const std::size_t width = X.shape.back();
  const std::size_t half = width / 2;
  const std::size_t rows = X.size() / width;
  Shape shape = X.shape;
  shape.back() = half;
  Tensor<Real> out(shape);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < half; ++c)
      out.data[r * half + c] = X.data[r * width + c] * sigmoid_of(X.data[r * width + half + c]);
  const NodeId o = push(std::move(out), needs(x));
  on_backward(o, [this, x, o, rows, half, width] {
    const auto& X = v(x).data;
    auto& gx = g(x);
    const auto& go = g(o);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < half; ++c) {
        const Real a = X[r * width + c];
        const Real s = sigmoid_of(X[r * width + half + c]);
        const Real d = go[r * half + c];
        gx[r * width + c] += d * s;
        gx[r * width + half + c] += d * a * s * (Real(1) - s);
      }
  });
  return o;
}

template <typename Real>
NodeId Graph<Real>::conv1d(NodeId x, NodeId kernel, NodeId bias, std::size_t left_pad, std::size_t right_pad) {
  const auto& X = v(x);
  const auto& W = v(kernel);
  require(X.rank() == 2 && W.rank() == 3, "conv1d: expected L x d_in input and w x d_in x d_out kernel");
  const std::size_t len = X.shape[0], din = X.shape[1];
  const std::size_t width = W.shape[0], dout = W.shape[2];
  require(W.shape[1] == din, "conv1d: kernel input width does not match input");
  require(v(bias).size() == dout, "conv1d: bias length does not match output width");
  require(width >= 1 && width <= len + left_pad + right_pad,
          "conv1d: kernel width " + std::to_string(width) + " exceeds padded input length " +
              std::to_string(len + left_pad + right_pad));
  const std::size_t out_len = len + left_pad + right_pad - width + 1;
  Tensor<Real> out({out_len, dout});
  const auto& bv = v(bias).data;
  for (std::size_t t = 0; t < out_len; ++t) {
    Real* orow = out.row(t);
    for (std::size_t o = 0; o < dout; ++o) orow[o] = bv[o];
    for (std::size_t k = 0; k < width; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(left_pad);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      const Real* xrow = X.row(static_cast<std::size_t>(src));
      const Real* wk = W.data.data() + k * din * dout;
      for (std::size_t i = 0; i < din; ++i) {
        const Real xv = xrow[i];
        const Real* wrow = wk + i * dout;
        for (std::size_t o = 0; o < dout; ++o) orow[o] += xv * wrow[o];
      }
    }
  }
  const NodeId o = push(std::move(out), needs(x) || needs(kernel) || needs(bias));
  on_backward(o, [this, x, kernel, bias, o, len, din, width, dout, out_len, left_pad] {
    const auto& X = v(x);
    const auto& W = v(kernel);
    const auto& go = g(o);
    if (needs(bias))
      for (std::size_t t = 0; t < out_len; ++t)
        for (std::size_t c = 0; c < dout; ++c) g(bias)[c] += go[t * dout + c];
    for (std::size_t t = 0; t < out_len; ++t) {
      const Real* grow = go.data() + t * dout;
      for (std::size_t k = 0; k < width; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(left_pad);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
        const std::size_t s = static_cast<std::size_t>(src);
        for (std::size_t i = 0; i < din; ++i) {
          const std::size_t wbase = (k * din + i) * dout;
          if (needs(x)) {
            Real acc = 0;
            for (std::size_t c = 0; c < dout; ++c) acc += grow[c] * W.data[wbase + c];
            g(x)[s * din + i] += acc;
          }
          if (needs(kernel)) {
            const Real xv = X.data[s * din + i];
            Real* gw = g(kernel).data() + wbase;
            for (std::size_t c = 0; c < dout; ++c) gw[c] += xv * grow[c];
          }
        }
      }
    }
  });
  return o;
}

template <typename Real>
NodeId Graph<Real>::embedding(NodeId table, std::span<const TokenId> ids) {
  const auto& T = v(table);
  require(T.rank() == 2, "embedding: table must be a matrix");
  const std::size_t vocab = T.shape[0], dim = T.shape[1];
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab)
      throw InvalidId("id " + std::to_string(ids[i]) + " outside table of " + std::to_string(vocab) + " rows");
    rows[i] = static_cast<std::size_t>(ids[i]);
  }
  Tensor<Real> out({ids.size(), dim});
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(T.row(rows[i]), dim, out.row(i));
  const NodeId o = push(std::move(out), needs(table));
  on_backward(o, [this, table, o, rows = std::move(rows), dim] {
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t c = 0; c < dim; ++c) g(table)[rows[i] * dim + c] += g(o)[i * dim + c];
  });
  return o;
}

namespace {

// dx = y * (dy - sum(dy * y)) over one softmax group.
template <typename Real>
void softmax_backward(const Real* y, const Real* dy, Real* dx, std::size_t n) {
  Real dot = 0;
  for (std::size_t i = 0; i < n; ++i) dot += dy[i] * y[i];
  for (std::size_t i = 0; i < n; ++i) dx[i] += y[i] * (dy[i] - dot);
}

}  // namespace

template <typename Real>
NodeId Graph<Real>::softmax_rows(NodeId x) {
  Tensor<Real> out = v(x);
  const std::size_t cols = out.cols();
  for (std::size_t r = 0; r < out.rows(); ++r) softmax_inplace(std::span<Real>(out.row(r), cols));
  const NodeId o = push(std::move(out), needs(x));
  on_backward(o, [this, x, o, cols] {
    const auto& y = v(o);
    for (std::size_t r = 0; r < y.rows(); ++r)
      softmax_backward(y.row(r), g(o).data() + r * cols, g(x).data() + r * cols, cols);
  });
  return o;
}

template <typename Real>
NodeId Graph<Real>::causal_softmax_rows(NodeId x) {
  const auto& X = v(x);
  require(X.rank() == 2, "causal_softmax_rows: expected a matrix");
  Tensor<Real> out(X.shape);
  const std::size_t rows = X.shape[0], cols = X.shape[1];
  require(rows <= cols + 1, "causal_softmax_rows: more rows than prefix positions");
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(X.row(r), r, out.row(r));
    softmax_inplace(std::span<Real>(out.row(r), r));
  }
  const NodeId o = push(std::move(out), needs(x));
  on_backward(o, [this, x, o, rows, cols] {
    const auto& y = v(o);
    for (std::size_t r = 0; r < rows; ++r)
      softmax_backward(y.row(r), g(o).data() + r * cols, g(x).data() + r * cols, r);
  });
  return o;
}

template <typename Real>
NodeId Graph<Real>::segment_softmax_rows(NodeId x, std::vector<Span> spans) {
  Tensor<Real> out = v(x);
  const std::size_t cols = out.cols();
  check_partition(spans, cols);
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (const auto& s : spans) softmax_inplace(std::span<Real>(out.row(r) + s.begin, s.size()));
  const NodeId o = push(std::move(out), needs(x));
  on_backward(o, [this, x, o, cols, spans = std::move(spans)] {
    const auto& y = v(o);
    for (std::size_t r = 0; r < y.rows(); ++r)
      for (const auto& s : spans)
        softmax_backward(y.row(r) + s.begin, g(o).data() + r * cols + s.begin, g(x).data() + r * cols + s.begin,
                         s.size());
  });
  return o;
}

template <typename Real>
NodeId Graph<Real>::normalize_rows(NodeId x) {
  Tensor<Real> out = v(x);
  const std::size_t cols = out.cols();
  std::vector<Real> sums(out.rows());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    Real s = 0;
    for (std::size_t c = 0; c < cols; ++c) s += out(r, c);
    if (!(s > Real(0))) throw NumericalError("normalize_rows: non-positive row sum");
    sums[r] = s;
    for (std::size_t c = 0; c < cols; ++c) out(r, c) /= s;
  }
  const NodeId o = push(std::move(out), needs(x));
  on_backward(o, [this, x, o, cols, sums = std::move(sums)] {
    const auto& y = v(o);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const Real* dy = g(o).data() + r * cols;
      Real dot = 0;
      for (std::size_t c = 0; c < cols; ++c) dot += dy[c] * y(r, c);
      for (std::size_t c = 0; c < cols; ++c) g(x)[r * cols + c] += (dy[c] - dot) / sums[r];
    }
  });
  return o;
}

template <typename Real>
NodeId Graph<Real>::cross_entropy(NodeId logits, std::span<const TokenId> targets) {
  const auto& L = v(logits);
  require(L.rank() == 2 && L.shape[0] == targets.size(), "cross_entropy: one target per logits row required");
  const std::size_t rows = L.shape[0], vocab = L.shape[1];
  Tensor<Real> probs(L.shape);
  Real total = 0;
  std::vector<std::size_t> tgt(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= vocab)
      throw InvalidId("target id " + std::to_string(targets[r]) + " outside vocabulary of " + std::to_string(vocab));
    tgt[r] = static_cast<std::size_t>(targets[r]);
    std::span<const Real> row(L.row(r), vocab);
    const Real lse = log_sum_exp(row);
    total += lse - row[tgt[r]];
    for (std::size_t c = 0; c < vocab; ++c) probs(r, c) = std::exp(row[c] - lse);
  }
  const NodeId o = push(Tensor<Real>({1}, {total}), needs(logits));
  on_backward(o, [this, logits, o, probs = std::move(probs), tgt = std::move(tgt), vocab] {
    const Real d = g(o)[0];
    auto& gl = g(logits);
    for (std::size_t r = 0; r < tgt.size(); ++r) {
      for (std::size_t c = 0; c < vocab; ++c) gl[r * vocab + c] += d * probs(r, c);
      gl[r * vocab + tgt[r]] -= d;
    }
  });
  return o;
}

template <typename Real>
NodeId Graph<Real>::sum(NodeId x) {
  Real total = 0;
  for (auto e : v(x).data) total += e;
  const NodeId o = push(Tensor<Real>({1}, {total}), needs(x));
  on_backward(o, [this, x, o] {
    for (auto& e : g(x)) e += g(o)[0];
  });
  return o;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace hiergen
