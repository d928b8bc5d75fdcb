#include "inrv/graph.hpp"

#include <cmath>
#include <sstream>

#include "inrv/errors.hpp"
#include "inrv/kernels.hpp"

namespace inrv {

namespace {

constexpr std::size_t kParallelElems = 1 << 15;

template <class F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  const auto in = a.data();
  auto dst = out.data();
  const auto n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel for schedule(static) if (in.size() >= kParallelElems)
  for (std::ptrdiff_t i = 0; i < n; ++i) dst[i] = f(in[i]);
  return out;
}

template <class F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  const auto x = a.data();
  const auto y = b.data();
  auto dst = out.data();
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static) if (x.size() >= kParallelElems)
  for (std::ptrdiff_t i = 0; i < n; ++i) dst[i] = f(x[i], y[i]);
  return out;
}

// grads[j] += contribution, taking ownership when grads[j] is still empty.
void accumulate(Tensor& slot, Tensor contribution) {
  if (slot.empty()) {
    slot = std::move(contribution);
    return;
  }
  auto dst = slot.data();
  const auto src = contribution.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

double serial_sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::AddRow: return "add_row";
    case Op::Relu: return "relu";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Square: return "square";
    case Op::Sqrt: return "sqrt";
    case Op::Log: return "log";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::ClampMin: return "clamp_min";
    case Op::Concat: return "concat";
    case Op::Slice: return "slice";
    case Op::Reshape: return "reshape";
    case Op::ReduceSum: return "reduce_sum";
    case Op::ReduceMean: return "reduce_mean";
    case Op::ColumnSum: return "column_sum";
    case Op::ColumnMean: return "column_mean";
  }
  return "unknown";
}

const Tensor& Gradients::at(NodeId id) const {
  auto it = grads_.find(id.index);
  if (it == grads_.end()) throw Error("no gradient for node #" + std::to_string(id.index));
  return it->second;
}

Tensor& Gradients::at(NodeId id) {
  auto it = grads_.find(id.index);
  if (it == grads_.end()) throw Error("no gradient for node #" + std::to_string(id.index));
  return it->second;
}

const Graph::Node& Graph::node(NodeId id) const {
  if (id.index >= nodes_.size()) throw Error("unknown node #" + std::to_string(id.index));
  return nodes_[id.index];
}

std::string Graph::describe(NodeId id) const {
  const auto& n = node(id);
  std::ostringstream os;
  os << '#' << id.index << ' ' << op_name(n.op);
  if (!n.name.empty()) os << " '" << n.name << '\'';
  os << ' ' << shape_string(n.shape);
  return os.str();
}

NodeId Graph::push(Node n) {
  for (auto in : n.inputs) {
    if (nodes_[in.index].requires_grad) n.requires_grad = true;
  }
  nodes_.push_back(std::move(n));
  values_.emplace_back();
  evaluated_upto_.reset();
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

NodeId Graph::leaf(Shape shape, bool requires_grad, std::string name) {
  Node n;
  n.op = Op::Leaf;
  n.shape = std::move(shape);
  n.requires_grad = requires_grad;
  n.name = std::move(name);
  if (n.shape.empty() || shape_size(n.shape) == 0) throw ShapeError("leaf '" + n.name + "' has an empty shape");
  return push(std::move(n));
}

NodeId Graph::leaf(Tensor value, std::string name) {
  const auto id = leaf(value.shape(), value.requires_grad(), std::move(name));
  bind(id, std::move(value));
  return id;
}

void Graph::bind(NodeId id, Tensor value) {
  auto& n = nodes_.at(id.index);
  if (n.op != Op::Leaf) throw Error("cannot bind non-leaf node " + describe(id));
  if (value.shape() != n.shape) {
    throw ShapeError("bind " + describe(id) + ": value has shape " + shape_string(value.shape()));
  }
  if (!value.all_finite()) throw NumericError("non-finite value bound to " + describe(id));
  values_[id.index] = std::move(value);
  n.bound = true;
  evaluated_upto_.reset();
}

NodeId Graph::unary(Op op, NodeId a, double scalar) {
  Node n;
  n.op = op;
  n.inputs = {a};
  n.shape = node(a).shape;
  n.scalar = scalar;
  return push(std::move(n));
}

NodeId Graph::binary_same_shape(Op op, NodeId a, NodeId b) {
  if (node(a).shape != node(b).shape) {
    throw ShapeError(std::string(op_name(op)) + " at node #" + std::to_string(nodes_.size()) +
                     ": shape mismatch " + describe(a) + " vs " + describe(b));
  }
  Node n;
  n.op = op;
  n.inputs = {a, b};
  n.shape = node(a).shape;
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const auto& sa = node(a).shape;
  const auto& sb = node(b).shape;
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw ShapeError("matmul at node #" + std::to_string(nodes_.size()) + ": incompatible " + describe(a) +
                     " and " + describe(b));
  }
  Node n;
  n.op = Op::MatMul;
  n.inputs = {a, b};
  n.shape = {sa[0], sb[1]};
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) { return binary_same_shape(Op::Add, a, b); }
NodeId Graph::sub(NodeId a, NodeId b) { return binary_same_shape(Op::Sub, a, b); }
NodeId Graph::mul(NodeId a, NodeId b) { return binary_same_shape(Op::Mul, a, b); }
NodeId Graph::div(NodeId a, NodeId b) { return binary_same_shape(Op::Div, a, b); }

NodeId Graph::add_row(NodeId a, NodeId row) {
  const auto& sa = node(a).shape;
  const auto& sr = node(row).shape;
  if (sa.size() != 2 || shape_size(sr) != sa[1]) {
    throw ShapeError("add_row at node #" + std::to_string(nodes_.size()) + ": cannot broadcast " +
                     describe(row) + " over " + describe(a));
  }
  Node n;
  n.op = Op::AddRow;
  n.inputs = {a, row};
  n.shape = sa;
  return push(std::move(n));
}

NodeId Graph::relu(NodeId a) { return unary(Op::Relu, a); }
NodeId Graph::sin(NodeId a) { return unary(Op::Sin, a); }
NodeId Graph::cos(NodeId a) { return unary(Op::Cos, a); }
NodeId Graph::square(NodeId a) { return unary(Op::Square, a); }
NodeId Graph::sqrt(NodeId a) { return unary(Op::Sqrt, a); }
NodeId Graph::log(NodeId a) { return unary(Op::Log, a); }
NodeId Graph::scale(NodeId a, double factor) { return unary(Op::Scale, a, factor); }
NodeId Graph::add_scalar(NodeId a, double value) { return unary(Op::AddScalar, a, value); }
NodeId Graph::clamp_min(NodeId a, double floor) { return unary(Op::ClampMin, a, floor); }

NodeId Graph::concat(const std::vector<NodeId>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero inputs");
  const Shape first = node(parts.front()).shape;
  const std::string where = "concat at node #" + std::to_string(nodes_.size());
  if (first.size() > 2 || axis >= first.size()) throw ShapeError(where + ": bad axis for " + describe(parts.front()));
  Shape out = first;
  out[axis] = 0;
  for (auto p : parts) {
    const auto& s = node(p).shape;
    if (s.size() != first.size()) throw ShapeError(where + ": rank mismatch " + describe(p));
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) throw ShapeError(where + ": extent mismatch " + describe(p));
    }
    out[axis] += s[axis];
  }
  Node n;
  n.op = Op::Concat;
  n.inputs = parts;
  n.shape = out;
  n.axis = axis;
  return push(std::move(n));
}

NodeId Graph::slice(NodeId a, std::size_t offset, std::size_t length) {
  const auto total = shape_size(node(a).shape);
  if (length == 0 || offset + length > total) {
    throw ShapeError("slice at node #" + std::to_string(nodes_.size()) + ": range [" + std::to_string(offset) +
                     ", " + std::to_string(offset + length) + ") outside " + describe(a));
  }
  Node n;
  n.op = Op::Slice;
  n.inputs = {a};
  n.shape = {length};
  n.offset = offset;
  return push(std::move(n));
}

NodeId Graph::reshape(NodeId a, Shape shape) {
  if (shape_size(shape) != shape_size(node(a).shape) || shape_size(shape) == 0) {
    throw ShapeError("reshape at node #" + std::to_string(nodes_.size()) + ": cannot view " + describe(a) +
                     " as " + shape_string(shape));
  }
  Node n;
  n.op = Op::Reshape;
  n.inputs = {a};
  n.shape = std::move(shape);
  return push(std::move(n));
}

NodeId Graph::row(NodeId a, std::size_t r) {
  const auto& s = node(a).shape;
  if (s.size() != 2 || r >= s[0]) throw ShapeError("row " + std::to_string(r) + " outside " + describe(a));
  return slice(a, r * s[1], s[1]);
}

NodeId Graph::reduce_sum(NodeId a, std::optional<std::size_t> axis) {
  Node n;
  n.inputs = {a};
  if (!axis) {
    n.op = Op::ReduceSum;
    n.shape = {1};
  } else {
    const auto& s = node(a).shape;
    if (*axis != 0 || s.size() != 2) throw ShapeError("reduce_sum over axis 0 needs a rank-2 input, got " + describe(a));
    n.op = Op::ColumnSum;
    n.shape = {s[1]};
  }
  return push(std::move(n));
}

NodeId Graph::reduce_mean(NodeId a, std::optional<std::size_t> axis) {
  Node n;
  n.inputs = {a};
  if (!axis) {
    n.op = Op::ReduceMean;
    n.shape = {1};
  } else {
    const auto& s = node(a).shape;
    if (*axis != 0 || s.size() != 2) throw ShapeError("reduce_mean over axis 0 needs a rank-2 input, got " + describe(a));
    n.op = Op::ColumnMean;
    n.shape = {s[1]};
  }
  return push(std::move(n));
}

const Tensor& Graph::value(NodeId id) const {
  const auto& v = values_.at(id.index);
  if (v.empty()) throw Error("node " + describe(id) + " has no value; evaluate first");
  return v;
}

void Graph::compute(std::size_t i) {
  const Node& n = nodes_[i];
  auto in = [&](std::size_t k) -> const Tensor& { return values_[n.inputs[k].index]; };
  Tensor out;
  switch (n.op) {
    case Op::Leaf:
      if (!n.bound) throw Error("leaf " + describe(NodeId{static_cast<std::uint32_t>(i)}) + " is not bound");
      return;
    case Op::MatMul: {
      const auto& a = in(0);
      const auto& b = in(1);
      out = Tensor(n.shape);
      kernels::matmul(a.data(), b.data(), out.data(), a.dim(0), a.dim(1), b.dim(1));
      break;
    }
    case Op::Add: out = map_binary(in(0), in(1), [](double x, double y) { return x + y; }); break;
    case Op::Sub: out = map_binary(in(0), in(1), [](double x, double y) { return x - y; }); break;
    case Op::Mul: out = map_binary(in(0), in(1), [](double x, double y) { return x * y; }); break;
    case Op::Div: out = map_binary(in(0), in(1), [](double x, double y) { return x / y; }); break;
    case Op::AddRow: {
      const auto& a = in(0);
      out = Tensor(n.shape);
      kernels::add_row(a.data(), in(1).data(), out.data(), a.dim(0), a.dim(1));
      break;
    }
    case Op::Relu: out = map_unary(in(0), [](double x) { return x > 0.0 ? x : 0.0; }); break;
    case Op::Sin: out = map_unary(in(0), [](double x) { return std::sin(x); }); break;
    case Op::Cos: out = map_unary(in(0), [](double x) { return std::cos(x); }); break;
    case Op::Square: out = map_unary(in(0), [](double x) { return x * x; }); break;
    case Op::Sqrt: out = map_unary(in(0), [](double x) { return std::sqrt(x); }); break;
    case Op::Log: out = map_unary(in(0), [](double x) { return std::log(x); }); break;
    case Op::Scale: {
      const double s = n.scalar;
      out = map_unary(in(0), [s](double x) { return x * s; });
      break;
    }
    case Op::AddScalar: {
      const double s = n.scalar;
      out = map_unary(in(0), [s](double x) { return x + s; });
      break;
    }
    case Op::ClampMin: {
      const double f = n.scalar;
      out = map_unary(in(0), [f](double x) { return x > f ? x : f; });
      break;
    }
    case Op::Concat: {
      out = Tensor(n.shape);
      auto dst = out.data();
      if (n.axis == 0) {
        std::size_t pos = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const auto src = in(k).data();
          std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(pos));
          pos += src.size();
        }
      } else {
        const std::size_t rows = n.shape[0];
        const std::size_t cols = n.shape[1];
        std::size_t col0 = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const auto& part = in(k);
          const std::size_t w = part.dim(1);
          for (std::size_t r = 0; r < rows; ++r) {
            const auto src = part.row(r);
            std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(r * cols + col0));
          }
          col0 += w;
        }
      }
      break;
    }
    case Op::Slice: {
      const auto src = in(0).data().subspan(n.offset, n.shape[0]);
      out = Tensor(n.shape, std::vector<double>(src.begin(), src.end()));
      break;
    }
    case Op::Reshape: out = in(0).reshaped(n.shape); break;
    case Op::ReduceSum: out = Tensor::scalar(serial_sum(in(0).data())); break;
    case Op::ReduceMean: {
      const auto& a = in(0);
      out = Tensor::scalar(serial_sum(a.data()) / static_cast<double>(a.size()));
      break;
    }
    case Op::ColumnSum:
    case Op::ColumnMean: {
      const auto& a = in(0);
      out = Tensor(n.shape);
      kernels::column_sum(a.data(), out.data(), a.dim(0), a.dim(1));
      if (n.op == Op::ColumnMean) {
        const double rows = static_cast<double>(a.dim(0));
        for (auto& v : out.data()) v /= rows;
      }
      break;
    }
  }
  if (!out.all_finite()) {
    throw NumericError("non-finite value produced at node " + describe(NodeId{static_cast<std::uint32_t>(i)}));
  }
  values_[i] = std::move(out);
}

const Tensor& Graph::evaluate(NodeId output) {
  if (output.index >= nodes_.size()) throw Error("unknown node #" + std::to_string(output.index));
  for (std::size_t i = 0; i <= output.index; ++i) compute(i);
  evaluated_upto_ = output.index;
  return values_[output.index];
}

void Graph::propagate(std::size_t i, const Tensor& g, std::vector<Tensor>& grads) const {
  const Node& n = nodes_[i];
  auto in = [&](std::size_t k) -> const Tensor& { return values_[n.inputs[k].index]; };
  auto wants = [&](std::size_t k) { return nodes_[n.inputs[k].index].requires_grad; };
  auto give = [&](std::size_t k, Tensor t) { accumulate(grads[n.inputs[k].index], std::move(t)); };
  const Tensor& out = values_[i];

  switch (n.op) {
    case Op::Leaf: return;
    case Op::MatMul: {
      const auto& a = in(0);
      const auto& b = in(1);
      const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
      if (wants(0)) {
        Tensor ga(a.shape());
        kernels::matmul_nt(g.data(), b.data(), ga.data(), m, p, k);
        give(0, std::move(ga));
      }
      if (wants(1)) {
        Tensor gb(b.shape());
        kernels::matmul_tn(a.data(), g.data(), gb.data(), m, k, p);
        give(1, std::move(gb));
      }
      return;
    }
    case Op::Add:
      if (wants(0)) give(0, g);
      if (wants(1)) give(1, g);
      return;
    case Op::Sub:
      if (wants(0)) give(0, g);
      if (wants(1)) give(1, map_unary(g, [](double x) { return -x; }));
      return;
    case Op::Mul:
      if (wants(0)) give(0, map_binary(g, in(1), [](double x, double y) { return x * y; }));
      if (wants(1)) give(1, map_binary(g, in(0), [](double x, double y) { return x * y; }));
      return;
    case Op::Div: {
      const auto& b = in(1);
      if (wants(0)) give(0, map_binary(g, b, [](double x, double y) { return x / y; }));
      if (wants(1)) {
        // d(a/b)/db = -(a/b)/b
        Tensor q = map_binary(out, b, [](double x, double y) { return -x / y; });
        give(1, map_binary(g, q, [](double x, double y) { return x * y; }));
      }
      return;
    }
    case Op::AddRow: {
      if (wants(0)) give(0, g);
      if (wants(1)) {
        const auto& rowv = in(1);
        Tensor gr(rowv.shape());
        kernels::column_sum(g.data(), gr.data(), g.dim(0), g.dim(1));
        give(1, std::move(gr));
      }
      return;
    }
    case Op::Relu:
      give(0, map_binary(g, in(0), [](double x, double a) { return a > 0.0 ? x : 0.0; }));
      return;
    case Op::Sin:
      give(0, map_binary(g, in(0), [](double x, double a) { return x * std::cos(a); }));
      return;
    case Op::Cos:
      give(0, map_binary(g, in(0), [](double x, double a) { return -x * std::sin(a); }));
      return;
    case Op::Square:
      give(0, map_binary(g, in(0), [](double x, double a) { return 2.0 * a * x; }));
      return;
    case Op::Sqrt:
      give(0, map_binary(g, out, [](double x, double s) { return x / (2.0 * s); }));
      return;
    case Op::Log:
      give(0, map_binary(g, in(0), [](double x, double a) { return x / a; }));
      return;
    case Op::Scale: {
      const double s = n.scalar;
      give(0, map_unary(g, [s](double x) { return x * s; }));
      return;
    }
    case Op::AddScalar: give(0, g); return;
    case Op::ClampMin: {
      const double f = n.scalar;
      give(0, map_binary(g, in(0), [f](double x, double a) { return a > f ? x : 0.0; }));
      return;
    }
    case Op::Concat: {
      const auto src = g.data();
      if (n.axis == 0) {
        std::size_t pos = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const auto& part = in(k);
          if (wants(k)) {
            auto piece = src.subspan(pos, part.size());
            give(k, Tensor(part.shape(), std::vector<double>(piece.begin(), piece.end())));
          }
          pos += part.size();
        }
      } else {
        const std::size_t rows = n.shape[0];
        const std::size_t cols = n.shape[1];
        std::size_t col0 = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const auto& part = in(k);
          const std::size_t w = part.dim(1);
          if (wants(k)) {
            Tensor gp(part.shape());
            for (std::size_t r = 0; r < rows; ++r) {
              auto piece = src.subspan(r * cols + col0, w);
              std::copy(piece.begin(), piece.end(), gp.row(r).begin());
            }
            give(k, std::move(gp));
          }
          col0 += w;
        }
      }
      return;
    }
    case Op::Slice: {
      auto& slot = grads[n.inputs[0].index];
      if (slot.empty()) slot = Tensor(in(0).shape());
      auto dst = slot.data().subspan(n.offset, n.shape[0]);
      const auto src = g.data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      return;
    }
    case Op::Reshape: give(0, g.reshaped(in(0).shape())); return;
    case Op::ReduceSum:
    case Op::ReduceMean: {
      const auto& a = in(0);
      const double v = n.op == Op::ReduceSum ? g[0] : g[0] / static_cast<double>(a.size());
      give(0, Tensor(a.shape(), v));
      return;
    }
    case Op::ColumnSum:
    case Op::ColumnMean: {
      const auto& a = in(0);
      const double div = n.op == Op::ColumnSum ? 1.0 : static_cast<double>(a.dim(0));
      Tensor ga(a.shape());
      for (std::size_t r = 0; r < a.dim(0); ++r) {
        auto dst = ga.row(r);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = g[j] / div;
      }
      give(0, std::move(ga));
      return;
    }
  }
}

Gradients Graph::backward(NodeId loss) {
  if (loss.index >= nodes_.size()) throw Error("unknown node #" + std::to_string(loss.index));
  if (!evaluated_upto_ || *evaluated_upto_ < loss.index) {
    throw Error("backward called before evaluate for node " + describe(loss));
  }
  if (shape_size(nodes_[loss.index].shape) != 1) {
    throw ShapeError("backward needs a scalar loss, got " + describe(loss));
  }
  std::vector<Tensor> grads(loss.index + 1);
  grads[loss.index] = Tensor(nodes_[loss.index].shape, 1.0);
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    if (!nodes_[i].requires_grad || grads[i].empty()) continue;
    if (nodes_[i].op == Op::Leaf) continue;
    propagate(i, grads[i], grads);
    if (i != loss.index) grads[i] = Tensor();  // release intermediate memory early
  }
  Gradients out;
  for (std::size_t i = 0; i <= loss.index; ++i) {
    const auto& n = nodes_[i];
    if (n.op != Op::Leaf || !n.requires_grad) continue;
    Tensor g = grads[i].empty() ? Tensor(n.shape) : std::move(grads[i]);
    if (!g.all_finite()) {
      throw NumericError("non-finite gradient for " + describe(NodeId{static_cast<std::uint32_t>(i)}));
    }
    out.grads_.emplace(static_cast<std::uint32_t>(i), std::move(g));
  }
  return out;
}

std::uint64_t Graph::activation_signature() const {
  std::uint64_t h = 1469598103934665603ull;
  auto feed = [&](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.op != Op::Relu && n.op != Op::ClampMin) continue;
    const auto& a = values_[n.inputs[0].index];
    if (a.empty()) continue;
    const double pivot = n.op == Op::Relu ? 0.0 : n.scalar;
    std::uint64_t word = 0;
    int bits = 0;
    for (double v : a.data()) {
      word = (word << 1) | (v > pivot ? 1u : 0u);
      if (++bits == 64) {
        feed(word);
        word = 0;
        bits = 0;
      }
    }
    feed(word);
    feed(static_cast<std::uint64_t>(i));
  }
  return h;
}

}  // namespace inrv
