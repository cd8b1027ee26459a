#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "enmloc/diff/tensor.hpp"

namespace enmloc::diff {

using NodeId = std::size_t;

/// Four-corner lookup into a feature table: one row per batch sample.
/// dweight_dx/dy are the derivatives of the weights w.r.t. the query point
/// and are only read when a point gradient is requested.
struct GatherRow {
  std::array<std::uint32_t, 4> index{};
  std::array<double, 4> weight{};
  std::array<double, 4> dweight_dx{};
  std::array<double, 4> dweight_dy{};
};

/// Reverse-mode tape over batched activations.
///
/// Every node value is a (width x batch) Matrix: row c holds feature c for
/// all samples. The tape is rebuilt for each forward pass; reset() keeps the
/// allocated buffers so repeated passes of the same graph do not allocate.
/// Parameter gradients are accumulated into ParamTensor::grad.
class Tape {
 public:
  explicit Tape(std::size_t batch = 1) { reset(batch); }

  void reset(std::size_t batch);
  std::size_t batch() const { return batch_; }
  std::size_t size() const { return count_; }

  /// Leaf holding `values` (width x batch).
  NodeId input(const Matrix& values, bool requires_grad = true);
  /// Leaf of the given width whose values the caller fills via mutable_value().
  NodeId input(std::size_t width, bool requires_grad = true);
  Matrix& mutable_value(NodeId id);

  /// W x + b. `bias` may be null.
  NodeId affine(ParamTensor& weight, ParamTensor* bias, NodeId x);
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  /// x * [pre > 0] elementwise; the derivative of a ReLU applied to a tangent.
  /// No gradient flows into `pre`.
  NodeId relu_mask(NodeId x, NodeId pre);
  NodeId concat(NodeId a, NodeId b);
  /// Bilinear-style gather: out[c][n] = sum_k weight_k * table[index_k][c].
  /// With track_point_grad, backward() also yields d(out)/d(query point).
  NodeId gather(ParamTensor& table, std::span<const GatherRow> rows,
                bool track_point_grad = false);

  const Matrix& value(NodeId id) const;
  /// Gradient w.r.t. a node's value; available after backward().
  const Matrix& grad(NodeId id) const;
  /// (2 x batch) gradient w.r.t. the query points of a gather node.
  const Matrix& point_grad(NodeId id) const;

  struct Seed {
    NodeId node;
    const Matrix* grad;  // same shape as the node value
  };

  /// Propagates the seeds to every node, leaf and parameter on the tape.
  /// A tape can be consumed once; throws StateError on a second call.
  void backward(std::span<const Seed> seeds);
  void backward(NodeId node, const Matrix& output_grad);
  /// Seeds every entry of `node` with the same scalar.
  void backward(NodeId node, double output_grad);

  bool consumed() const { return consumed_; }

 private:
  enum class Op { kInput, kAffine, kRelu, kSigmoid, kReluMask, kConcat, kGather };

  struct Node {
    Op op = Op::kInput;
    NodeId a = 0;
    NodeId b = 0;
    ParamTensor* weight = nullptr;
    ParamTensor* bias = nullptr;
    bool requires_grad = false;
    bool track_point_grad = false;
    Matrix value;
    Matrix grad;
    Matrix point_grad;
    std::vector<GatherRow> rows;
  };

  Node& push(Op op, std::size_t width);
  const Node& node(NodeId id) const;
  void backward_node(Node& n);

  std::vector<Node> nodes_;
  std::size_t count_ = 0;
  std::size_t batch_ = 1;
  bool consumed_ = false;
};

}  // namespace enmloc::diff
