#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "inrv/tensor.hpp"

namespace inrv {

struct NodeId {
  std::uint32_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  Div,
  AddRow,
  Relu,
  Sin,
  Cos,
  Square,
  Sqrt,
  Log,
  Scale,
  AddScalar,
  ClampMin,
  Concat,
  Slice,
  Reshape,
  ReduceSum,
  ReduceMean,
  ColumnSum,
  ColumnMean,
};

const char* op_name(Op op);

// Leaf gradients produced by Graph::backward, keyed by leaf node.
class Gradients {
 public:
  bool contains(NodeId id) const { return grads_.contains(id.index); }
  const Tensor& at(NodeId id) const;
  Tensor& at(NodeId id);
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Graph;
  std::unordered_map<std::uint32_t, Tensor> grads_;
};

// Reverse-mode differentiation over dense tensors. Nodes are appended in
// topological order (an op can only reference existing nodes), shapes are
// inferred on construction, values are computed by evaluate() and cached for
// backward(), which walks the nodes in exact reverse order.
//
// Not thread-safe; independent graphs may be used on different threads.
class Graph {
 public:
  // Declares an input. Bind a value before evaluating.
  NodeId leaf(Shape shape, bool requires_grad, std::string name = {});
  // Declares and binds in one step; requires_grad is taken from the tensor.
  NodeId leaf(Tensor value, std::string name = {});
  void bind(NodeId id, Tensor value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  // a[m x n] + row[n], the row broadcast over every row of a.
  NodeId add_row(NodeId a, NodeId row);
  NodeId relu(NodeId a);
  NodeId sin(NodeId a);
  NodeId cos(NodeId a);
  NodeId square(NodeId a);
  NodeId sqrt(NodeId a);
  NodeId log(NodeId a);
  NodeId scale(NodeId a, double factor);
  NodeId add_scalar(NodeId a, double value);
  NodeId clamp_min(NodeId a, double floor);
  // Rank-1 inputs join along axis 0; rank-2 inputs along `axis` (0 or 1).
  NodeId concat(const std::vector<NodeId>& parts, std::size_t axis = 0);
  // Flat slice of the row-major data; the result is rank 1.
  NodeId slice(NodeId a, std::size_t offset, std::size_t length);
  NodeId reshape(NodeId a, Shape shape);
  NodeId row(NodeId a, std::size_t r);
  // Full reductions return shape {1}; with axis = 0 a rank-2 input reduces
  // over its rows to a rank-1 vector.
  NodeId reduce_sum(NodeId a, std::optional<std::size_t> axis = std::nullopt);
  NodeId reduce_mean(NodeId a, std::optional<std::size_t> axis = std::nullopt);

  // Computes every node up to and including `output`.
  const Tensor& evaluate(NodeId output);
  Gradients backward(NodeId loss);

  const Tensor& value(NodeId id) const;
  const Shape& shape(NodeId id) const { return node(id).shape; }
  bool requires_grad(NodeId id) const { return node(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Hash of the sign pattern of every evaluated relu input and clamp_min
  // input. Equal signatures mean the graph ran through the same linear
  // pieces, which is what finite-difference checks need.
  std::uint64_t activation_signature() const;

 private:
  struct Node {
    Op op = Op::Leaf;
    std::vector<NodeId> inputs;
    Shape shape;
    bool requires_grad = false;
    bool bound = false;
    double scalar = 0.0;
    std::size_t offset = 0;
    std::size_t axis = 0;
    std::string name;
  };

  const Node& node(NodeId id) const;
  NodeId push(Node n);
  NodeId unary(Op op, NodeId a, double scalar = 0.0);
  NodeId binary_same_shape(Op op, NodeId a, NodeId b);
  std::string describe(NodeId id) const;

  void compute(std::size_t i);
  void propagate(std::size_t i, const Tensor& grad, std::vector<Tensor>& grads) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> values_;
  std::optional<std::size_t> evaluated_upto_;
};

}  // namespace inrv
