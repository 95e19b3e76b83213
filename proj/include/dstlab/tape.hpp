#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dstlab/tensor.hpp"

namespace dstlab {

struct NodeId {
    std::uint32_t v = UINT32_MAX;
    bool valid() const { return v != UINT32_MAX; }
    friend bool operator==(NodeId a, NodeId b) { return a.v == b.v; }
};

// Reverse-mode tape over dense tensors. Nodes are appended in topological
// order by construction; values are computed eagerly; backward() runs the
// adjoint sweep from a scalar seed. Storage lives in arenas that reset()
// recycles, so rebuilding a graph every step does not churn the allocator.
class Tape {
public:
    Tape() = default;

    // Drops all nodes but keeps arena capacity.
    void reset();

    NodeId leaf(const Tensor& t, bool trainable = false);
    NodeId constant_scalar(double v);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId add_const(NodeId a, double c);
    NodeId matvec(NodeId w, NodeId x);
    NodeId dot(NodeId a, NodeId b);
    NodeId sum_nodes(std::span<const NodeId> xs);
    NodeId mean_nodes(std::span<const NodeId> xs);
    NodeId concat(std::span<const NodeId> xs);
    NodeId sigmoid(NodeId a);
    NodeId tanh(NodeId a);
    NodeId relu(NodeId a);
    NodeId log(NodeId a);
    NodeId softmax(NodeId a);
    NodeId cosine(NodeId u, NodeId v, double eps = 1e-8);
    NodeId pick(NodeId a, std::int64_t index);
    NodeId stack(std::span<const NodeId> scalars);
    NodeId scale_by(NodeId a, NodeId s);

    // Adjoint sweep from a scalar seed node. May be called repeatedly on the
    // same graph; each call starts from fresh zero adjoints.
    void backward(NodeId seed);

    std::size_t node_count() const { return nodes_.size(); }

    std::span<const double> values(NodeId id) const;
    double value_scalar(NodeId id) const;
    Tensor value_tensor(NodeId id) const;

    // Zero tensor when the node was not reached by the last backward().
    Tensor grad_tensor(NodeId id) const;
    bool grad_defined(NodeId id) const;
    std::span<const double> grad_span(NodeId id) const;

private:
    enum class Op : std::uint8_t {
        kLeaf, kAdd, kSub, kMul, kScale, kAddConst, kMatVec, kDot, kSumNodes,
        kConcat, kSigmoid, kTanh, kRelu, kLog, kSoftmax, kCosine, kPick,
        kStack, kScaleBy,
    };

    static constexpr std::uint32_t kNone = UINT32_MAX;

    struct Node {
        Op op;
        std::uint8_t rank;
        std::int32_t rows, cols;  // vector: rows=len, cols=1; matrix: rows x cols
        std::uint32_t a = kNone, b = kNone;
        std::uint32_t in_ofs = 0, in_count = 0;  // variadic inputs
        std::uint32_t vofs = 0, len = 0;
        std::uint32_t gofs = kNone;
        std::uint32_t aux = kNone;
        double c = 0.0;
        std::int64_t index = 0;
        bool trainable = false;
    };

    NodeId push(Node n);
    NodeId unary(Op op, NodeId a);
    NodeId binary_same_shape(Op op, NodeId a, NodeId b);
    double* ensure_grad(std::uint32_t id);
    double* val_ptr(std::uint32_t id) { return varena_.data() + nodes_[id].vofs; }
    const double* val_ptr(std::uint32_t id) const { return varena_.data() + nodes_[id].vofs; }
    const Node& node(NodeId id) const;

    std::vector<Node> nodes_;
    std::vector<double> varena_;
    std::vector<double> garena_;
    std::vector<double> aux_;
    std::vector<std::uint32_t> inputs_;
};

// GRU recurrence built from tape primitives:
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   hc = tanh(Wh x + Uh (r .* h) + bh)
//   h' = (1 - z) .* h + z .* hc
struct GruNodes {
    NodeId wz, uz, bz;
    NodeId wr, ur, br;
    NodeId wh, uh, bh;
};

NodeId gru_cell(Tape& tape, NodeId x, NodeId h_prev, const GruNodes& p);

}  // namespace dstlab
