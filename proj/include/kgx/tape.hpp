#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kgx/tensor.hpp"

namespace kgx {

// Reverse-mode autodiff over a tape of executed operations. Each op runs
// eagerly, records itself, and caches its forward value; backward() walks the
// record in reverse. Node ids are indices into the tape, so creation order is
// already a topological order.
//
// There is no broadcasting beyond the explicit scalar ops; shapes must match
// exactly, which turns silent shape bugs into immediate errors.
class Tape {
 public:
  using NodeId = std::uint32_t;
  static constexpr NodeId kNone = ~NodeId{0};

  NodeId leaf(Tensor value);      // differentiable input (parameter slice)
  NodeId constant(Tensor value);  // non-differentiable input

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId matmul(NodeId a, NodeId b);

  NodeId concat_rows(NodeId a, NodeId b);  // axis 0
  NodeId concat_cols(NodeId a, NodeId b);  // last axis
  NodeId concat_rows(std::span<const NodeId> parts);

  // axis 0 collapses rows, axis 1 collapses columns (2-d input).
  NodeId sum(NodeId a, int axis);
  NodeId mean(NodeId a, int axis);
  NodeId sum_all(NodeId a);
  NodeId mean_all(NodeId a);

  NodeId gather(NodeId src, std::vector<std::uint32_t> rows);
  // Mean of src rows per group; groups.size() == src rows. Groups with no
  // member come out as zero rows.
  NodeId scatter_mean(NodeId src, std::vector<std::uint32_t> groups, std::size_t n_groups);

  NodeId sigmoid(NodeId a);
  NodeId log_sigmoid(NodeId a);  // numerically stable log(sigmoid(x))
  NodeId relu(NodeId a);
  NodeId log(NodeId a);
  NodeId softmax_rows(NodeId a);  // softmax along the last axis

  NodeId l1_norm_rows(NodeId a);  // [n x d] -> [n]
  NodeId l2_norm_rows(NodeId a);

  // Interleaved-complex ops: last axis holds (re, im) pairs.
  NodeId complex_hadamard(NodeId a, NodeId b);
  NodeId complex_conjugate(NodeId a);
  NodeId complex_divide(NodeId a, NodeId b);
  // Phases [.. x k] -> unit-modulus complex [.. x 2k].
  NodeId polar_unit(NodeId theta);

  NodeId scale(NodeId a, double c);
  NodeId add_scalar(NodeId a, double c);
  NodeId neg(NodeId a) { return scale(a, -1.0); }
  NodeId reshape(NodeId a, Shape shape);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

  // Gradients of a scalar loss w.r.t. every node, aligned by node id.
  // Nodes that do not reach the loss (or sit under constants) get an empty
  // tensor; leaves always get a tensor, zero-filled when unreached.
  std::vector<Tensor> backward(NodeId loss) const;

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kConstant,
    kAdd,
    kSub,
    kMul,
    kMatmul,
    kConcatRows,
    kConcatCols,
    kSum0,
    kSum1,
    kMean0,
    kMean1,
    kSumAll,
    kMeanAll,
    kGather,
    kScatterMean,
    kSigmoid,
    kLogSigmoid,
    kRelu,
    kLog,
    kSoftmaxRows,
    kL1NormRows,
    kL2NormRows,
    kComplexHadamard,
    kComplexConjugate,
    kComplexDivide,
    kPolarUnit,
    kScale,
    kAddScalar,
    kReshape,
  };

  struct Node {
    Op op;
    NodeId a = kNone;
    NodeId b = kNone;
    Tensor value;
    double scalar = 0.0;
    std::vector<std::uint32_t> indices;  // gather rows / scatter groups
    std::size_t groups = 0;
    bool needs_grad = false;
  };

  NodeId push(Node node);
  bool tracked(NodeId id) const { return nodes_[id].needs_grad; }
  const Tensor& val(NodeId id) const { return nodes_[id].value; }
  static void check_same_shape(const char* op, const Tensor& a, const Tensor& b);
  static void check_complex(const char* op, const Tensor& t);

  std::vector<Node> nodes_;
};

}  // namespace kgx
