#include "dstlab/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dstlab/kernels.hpp"

namespace dstlab {

namespace {
const kernels::Ops& K() { return kernels::active(); }
}  // namespace

void Tape::reset() {
    nodes_.clear();
    varena_.clear();
    garena_.clear();
    aux_.clear();
    inputs_.clear();
}

const Tape::Node& Tape::node(NodeId id) const {
    if (!id.valid() || id.v >= nodes_.size()) {
        throw std::invalid_argument("tape: invalid node id");
    }
    return nodes_[id.v];
}

NodeId Tape::push(Node n) {
    nodes_.push_back(n);
    return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

NodeId Tape::leaf(const Tensor& t, bool trainable) {
    if (t.size() == 0) {
        throw std::invalid_argument("tape: leaf tensor is empty");
    }
    Node n{};
    n.op = Op::kLeaf;
    n.rank = static_cast<std::uint8_t>(t.rank());
    n.rows = static_cast<std::int32_t>(t.rows());
    n.cols = static_cast<std::int32_t>(t.cols());
    n.len = static_cast<std::uint32_t>(t.size());
    n.vofs = static_cast<std::uint32_t>(varena_.size());
    n.trainable = trainable;
    varena_.insert(varena_.end(), t.data(), t.data() + t.size());
    return push(n);
}

NodeId Tape::constant_scalar(double v) { return leaf(Tensor::scalar(v)); }

NodeId Tape::unary(Op op, NodeId a) {
    const Node& na = node(a);
    Node n{};
    n.op = op;
    n.rank = na.rank;
    n.rows = na.rows;
    n.cols = na.cols;
    n.len = na.len;
    n.a = a.v;
    n.vofs = static_cast<std::uint32_t>(varena_.size());
    varena_.resize(varena_.size() + n.len);
    const double* x = val_ptr(a.v);
    double* out = varena_.data() + n.vofs;
    switch (op) {
        case Op::kSigmoid: K().sigmoid(x, out, n.len); break;
        case Op::kTanh: K().tanh(x, out, n.len); break;
        case Op::kRelu: K().relu(x, out, n.len); break;
        case Op::kLog: K().log(x, out, n.len); break;
        default: throw std::logic_error("tape: bad unary op");
    }
    return push(n);
}

NodeId Tape::binary_same_shape(Op op, NodeId a, NodeId b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.len != nb.len || na.rows != nb.rows || na.cols != nb.cols) {
        throw std::invalid_argument("tape: shape mismatch in elementwise op");
    }
    Node n{};
    n.op = op;
    n.rank = na.rank;
    n.rows = na.rows;
    n.cols = na.cols;
    n.len = na.len;
    n.a = a.v;
    n.b = b.v;
    n.vofs = static_cast<std::uint32_t>(varena_.size());
    varena_.resize(varena_.size() + n.len);
    const double* xa = val_ptr(a.v);
    const double* xb = val_ptr(b.v);
    double* out = varena_.data() + n.vofs;
    switch (op) {
        case Op::kAdd: K().add(xa, xb, out, n.len); break;
        case Op::kSub: K().sub(xa, xb, out, n.len); break;
        case Op::kMul: K().mul(xa, xb, out, n.len); break;
        default: throw std::logic_error("tape: bad binary op");
    }
    return push(n);
}

NodeId Tape::add(NodeId a, NodeId b) { return binary_same_shape(Op::kAdd, a, b); }
NodeId Tape::sub(NodeId a, NodeId b) { return binary_same_shape(Op::kSub, a, b); }
NodeId Tape::mul(NodeId a, NodeId b) { return binary_same_shape(Op::kMul, a, b); }
NodeId Tape::sigmoid(NodeId a) { return unary(Op::kSigmoid, a); }
NodeId Tape::tanh(NodeId a) { return unary(Op::kTanh, a); }
NodeId Tape::relu(NodeId a) { return unary(Op::kRelu, a); }
NodeId Tape::log(NodeId a) { return unary(Op::kLog, a); }

NodeId Tape::scale(NodeId a, double c) {
    const Node& na = node(a);
    Node n{};
    n.op = Op::kScale;
    n.rank = na.rank;
    n.rows = na.rows;
    n.cols = na.cols;
    n.len = na.len;
    n.a = a.v;
    n.c = c;
    n.vofs = static_cast<std::uint32_t>(varena_.size());
    varena_.resize(varena_.size() + n.len);
    K().scale(val_ptr(a.v), c, varena_.data() + n.vofs, n.len);
    return push(n);
}

NodeId Tape::add_const(NodeId a, double c) {
    const Node& na = node(a);
    Node n{};
    n.op = Op::kAddConst;
    n.rank = na.rank;
    n.rows = na.rows;
    n.cols = na.cols;
    n.len = na.len;
    n.a = a.v;
    n.c = c;
    n.vofs = static_cast<std::uint32_t>(varena_.size());
    varena_.resize(varena_.size() + n.len);
    const double* x = val_ptr(a.v);
    double* out = varena_.data() + n.vofs;
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] = x[i] + c;
    return push(n);
}

NodeId Tape::matvec(NodeId w, NodeId x) {
    const Node& nw = node(w);
    const Node& nx = node(x);
    if (nw.rank != 2 || nx.rank != 1 || nw.cols != nx.rows) {
        throw std::invalid_argument("tape: matvec dimension mismatch");
    }
    Node n{};
    n.op = Op::kMatVec;
    n.rank = 1;
    n.rows = nw.rows;
    n.cols = 1;
    n.len = static_cast<std::uint32_t>(nw.rows);
    n.a = w.v;
    n.b = x.v;
    n.vofs = static_cast<std::uint32_t>(varena_.size());
    varena_.resize(varena_.size() + n.len);
    K().matvec(val_ptr(w.v), val_ptr(x.v), varena_.data() + n.vofs,
               static_cast<std::size_t>(nw.rows), static_cast<std::size_t>(nw.cols));
    return push(n);
}

NodeId Tape::dot(NodeId a, NodeId b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.rank != 1 || nb.rank != 1 || na.len != nb.len) {
        throw std::invalid_argument("tape: dot requires equal-length vectors");
    }
    Node n{};
    n.op = Op::kDot;
    n.rank = 0;
    n.rows = 1;
    n.cols = 1;
    n.len = 1;
    n.a = a.v;
    n.b = b.v;
    n.vofs = static_cast<std::uint32_t>(varena_.size());
    varena_.push_back(K().dot(val_ptr(a.v), val_ptr(b.v), na.len));
    return push(n);
}

NodeId Tape::sum_nodes(std::span<const NodeId> xs) {
    if (xs.empty()) {
        throw std::invalid_argument("tape: sum_nodes needs at least one input");
    }
    const Node& n0 = node(xs[0]);
    for (NodeId id : xs) {
        const Node& ni = node(id);
        if (ni.len != n0.len || ni.rows != n0.rows || ni.cols != n0.cols) {
            throw std::invalid_argument("tape: sum_nodes shape mismatch");
        }
    }
    Node n{};
    n.op = Op::kSumNodes;
    n.rank = n0.rank;
    n.rows = n0.rows;
    n.cols = n0.cols;
    n.len = n0.len;
    n.in_ofs = static_cast<std::uint32_t>(inputs_.size());
    n.in_count = static_cast<std::uint32_t>(xs.size());
    for (NodeId id : xs) inputs_.push_back(id.v);
    n.vofs = static_cast<std::uint32_t>(varena_.size());
    varena_.resize(varena_.size() + n.len, 0.0);
    double* out = varena_.data() + n.vofs;
    for (NodeId id : xs) {
        K().axpy(1.0, val_ptr(id.v), out, n.len);
    }
    return push(n);
}

NodeId Tape::mean_nodes(std::span<const NodeId> xs) {
    return scale(sum_nodes(xs), 1.0 / static_cast<double>(xs.size()));
}

NodeId Tape::concat(std::span<const NodeId> xs) {
    if (xs.empty()) {
        throw std::invalid_argument("tape: concat needs at least one input");
    }
    std::uint32_t total = 0;
    for (NodeId id : xs) {
        const Node& ni = node(id);
        if (ni.rank > 1) {
            throw std::invalid_argument("tape: concat takes scalars/vectors");
        }
        total += ni.len;
    }
    Node n{};
    n.op = Op::kConcat;
    n.rank = 1;
    n.rows = static_cast<std::int32_t>(total);
    n.cols = 1;
    n.len = total;
    n.in_ofs = static_cast<std::uint32_t>(inputs_.size());
    n.in_count = static_cast<std::uint32_t>(xs.size());
    for (NodeId id : xs) inputs_.push_back(id.v);
    n.vofs = static_cast<std::uint32_t>(varena_.size());
    varena_.resize(varena_.size() + total);
    double* out = varena_.data() + n.vofs;
    for (NodeId id : xs) {
        const Node& ni = nodes_[id.v];
        std::copy_n(val_ptr(id.v), ni.len, out);
        out += ni.len;
    }
    return push(n);
}

NodeId Tape::softmax(NodeId a) {
    const Node& na = node(a);
    if (na.rank != 1 || na.len < 1) {
        throw std::invalid_argument("tape: softmax requires a non-empty vector");
    }
    Node n{};
    n.op = Op::kSoftmax;
    n.rank = 1;
    n.rows = na.rows;
    n.cols = 1;
    n.len = na.len;
    n.a = a.v;
    n.vofs = static_cast<std::uint32_t>(varena_.size());
    varena_.resize(varena_.size() + n.len);
    const double* x = val_ptr(a.v);
    double* out = varena_.data() + n.vofs;
    double mx = x[0];
    for (std::uint32_t i = 1; i < n.len; ++i) mx = std::max(mx, x[i]);
    double z = 0.0;
    for (std::uint32_t i = 0; i < n.len; ++i) {
        out[i] = std::exp(x[i] - mx);
        z += out[i];
    }
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] /= z;
    return push(n);
}

NodeId Tape::cosine(NodeId u, NodeId v, double eps) {
    const Node& nu = node(u);
    const Node& nv = node(v);
    if (nu.rank != 1 || nv.rank != 1 || nu.len != nv.len) {
        throw std::invalid_argument("tape: cosine requires equal-length vectors");
    }
    const double* xu = val_ptr(u.v);
    const double* xv = val_ptr(v.v);
    const double d = K().dot(xu, xv, nu.len);
    const double norm_u = std::sqrt(K().dot(xu, xu, nu.len));
    const double norm_v = std::sqrt(K().dot(xv, xv, nv.len));
    const double denom = norm_u * norm_v + eps;
    Node n{};
    n.op = Op::kCosine;
    n.rank = 0;
    n.rows = 1;
    n.cols = 1;
    n.len = 1;
    n.a = u.v;
    n.b = v.v;
    n.aux = static_cast<std::uint32_t>(aux_.size());
    aux_.push_back(d);
    aux_.push_back(norm_u);
    aux_.push_back(norm_v);
    aux_.push_back(denom);
    n.vofs = static_cast<std::uint32_t>(varena_.size());
    varena_.push_back(d / denom);
    return push(n);
}

NodeId Tape::pick(NodeId a, std::int64_t index) {
    const Node& na = node(a);
    if (na.rank != 1 || index < 0 || index >= na.rows) {
        throw std::invalid_argument("tape: pick index out of range");
    }
    Node n{};
    n.op = Op::kPick;
    n.rank = 0;
    n.rows = 1;
    n.cols = 1;
    n.len = 1;
    n.a = a.v;
    n.index = index;
    n.vofs = static_cast<std::uint32_t>(varena_.size());
    varena_.push_back(val_ptr(a.v)[index]);
    return push(n);
}

NodeId Tape::stack(std::span<const NodeId> scalars) {
    if (scalars.empty()) {
        throw std::invalid_argument("tape: stack needs at least one input");
    }
    for (NodeId id : scalars) {
        if (node(id).len != 1) {
            throw std::invalid_argument("tape: stack takes scalar nodes");
        }
    }
    Node n{};
    n.op = Op::kStack;
    n.rank = 1;
    n.rows = static_cast<std::int32_t>(scalars.size());
    n.cols = 1;
    n.len = static_cast<std::uint32_t>(scalars.size());
    n.in_ofs = static_cast<std::uint32_t>(inputs_.size());
    n.in_count = n.len;
    for (NodeId id : scalars) inputs_.push_back(id.v);
    n.vofs = static_cast<std::uint32_t>(varena_.size());
    for (NodeId id : scalars) varena_.push_back(*val_ptr(id.v));
    return push(n);
}

NodeId Tape::scale_by(NodeId a, NodeId s) {
    const Node& na = node(a);
    const Node& ns = node(s);
    if (ns.len != 1) {
        throw std::invalid_argument("tape: scale_by needs a scalar multiplier");
    }
    Node n{};
    n.op = Op::kScaleBy;
    n.rank = na.rank;
    n.rows = na.rows;
    n.cols = na.cols;
    n.len = na.len;
    n.a = a.v;
    n.b = s.v;
    n.vofs = static_cast<std::uint32_t>(varena_.size());
    varena_.resize(varena_.size() + n.len);
    K().scale(val_ptr(a.v), *val_ptr(s.v), varena_.data() + n.vofs, n.len);
    return push(n);
}

double* Tape::ensure_grad(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.gofs == kNone) {
        n.gofs = static_cast<std::uint32_t>(garena_.size());
        garena_.resize(garena_.size() + n.len, 0.0);
    }
    return garena_.data() + n.gofs;
}

void Tape::backward(NodeId seed) {
    const Node& s = node(seed);
    if (s.len != 1 || s.rank != 0) {
        throw std::invalid_argument("tape: backward seed must be a scalar node");
    }
    garena_.clear();
    // Total adjoint storage is bounded by total value storage; reserving it
    // keeps pointers into garena_ stable across ensure_grad calls below.
    garena_.reserve(varena_.size());
    for (Node& n : nodes_) n.gofs = kNone;
    ensure_grad(seed.v)[0] = 1.0;

    for (std::uint32_t id = seed.v + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.gofs == kNone) continue;
        const double* g = garena_.data() + n.gofs;
        switch (n.op) {
            case Op::kLeaf:
                break;
            case Op::kAdd:
                K().axpy(1.0, g, ensure_grad(n.a), n.len);
                K().axpy(1.0, g, ensure_grad(n.b), n.len);
                break;
            case Op::kSub:
                K().axpy(1.0, g, ensure_grad(n.a), n.len);
                K().axpy(-1.0, g, ensure_grad(n.b), n.len);
                break;
            case Op::kMul:
                K().mul_acc(g, val_ptr(n.b), ensure_grad(n.a), n.len);
                K().mul_acc(g, val_ptr(n.a), ensure_grad(n.b), n.len);
                break;
            case Op::kScale:
                K().axpy(n.c, g, ensure_grad(n.a), n.len);
                break;
            case Op::kAddConst:
                K().axpy(1.0, g, ensure_grad(n.a), n.len);
                break;
            case Op::kMatVec: {
                const Node& nw = nodes_[n.a];
                K().outer_acc(g, val_ptr(n.b), ensure_grad(n.a),
                              static_cast<std::size_t>(nw.rows), static_cast<std::size_t>(nw.cols));
                K().matvec_t_acc(val_ptr(n.a), g, ensure_grad(n.b),
                                 static_cast<std::size_t>(nw.rows), static_cast<std::size_t>(nw.cols));
                break;
            }
            case Op::kDot:
                K().axpy(g[0], val_ptr(n.b), ensure_grad(n.a), nodes_[n.a].len);
                K().axpy(g[0], val_ptr(n.a), ensure_grad(n.b), nodes_[n.a].len);
                break;
            case Op::kSumNodes:
                for (std::uint32_t i = 0; i < n.in_count; ++i) {
                    K().axpy(1.0, g, ensure_grad(inputs_[n.in_ofs + i]), n.len);
                }
                break;
            case Op::kConcat: {
                const double* gp = g;
                for (std::uint32_t i = 0; i < n.in_count; ++i) {
                    const std::uint32_t in = inputs_[n.in_ofs + i];
                    K().axpy(1.0, gp, ensure_grad(in), nodes_[in].len);
                    gp += nodes_[in].len;
                }
                break;
            }
            case Op::kSigmoid:
                K().sigmoid_bwd(val_ptr(id), g, ensure_grad(n.a), n.len);
                break;
            case Op::kTanh:
                K().tanh_bwd(val_ptr(id), g, ensure_grad(n.a), n.len);
                break;
            case Op::kRelu:
                K().relu_bwd(val_ptr(n.a), g, ensure_grad(n.a), n.len);
                break;
            case Op::kLog:
                K().div_acc(g, val_ptr(n.a), ensure_grad(n.a), n.len);
                break;
            case Op::kSoftmax: {
                const double* y = val_ptr(id);
                const double sdot = K().dot(g, y, n.len);
                K().softmax_bwd(y, g, sdot, ensure_grad(n.a), n.len);
                break;
            }
            case Op::kCosine: {
                const double* auxd = aux_.data() + n.aux;
                const double d = auxd[0], norm_u = auxd[1], norm_v = auxd[2], denom = auxd[3];
                const double g0 = g[0];
                const double* xu = val_ptr(n.a);
                const double* xv = val_ptr(n.b);
                double* gu = ensure_grad(n.a);
                double* gv = ensure_grad(n.b);
                K().axpy(g0 / denom, xv, gu, nodes_[n.a].len);
                K().axpy(g0 / denom, xu, gv, nodes_[n.a].len);
                if (norm_u > 0.0 && norm_v > 0.0) {
                    const double t = d / (denom * denom);
                    K().axpy(-g0 * t * norm_v / norm_u, xu, gu, nodes_[n.a].len);
                    K().axpy(-g0 * t * norm_u / norm_v, xv, gv, nodes_[n.a].len);
                }
                break;
            }
            case Op::kPick:
                ensure_grad(n.a)[n.index] += g[0];
                break;
            case Op::kStack:
                for (std::uint32_t i = 0; i < n.in_count; ++i) {
                    ensure_grad(inputs_[n.in_ofs + i])[0] += g[i];
                }
                break;
            case Op::kScaleBy: {
                K().axpy(*val_ptr(n.b), g, ensure_grad(n.a), n.len);
                ensure_grad(n.b)[0] += K().dot(g, val_ptr(n.a), n.len);
                break;
            }
        }
    }
}

std::span<const double> Tape::values(NodeId id) const {
    const Node& n = node(id);
    return {varena_.data() + n.vofs, n.len};
}

double Tape::value_scalar(NodeId id) const {
    const Node& n = node(id);
    if (n.len != 1) {
        throw std::invalid_argument("tape: node is not a scalar");
    }
    return varena_[n.vofs];
}

Tensor Tape::value_tensor(NodeId id) const {
    const Node& n = node(id);
    const double* v = varena_.data() + n.vofs;
    if (n.rank == 0) return Tensor::scalar(v[0]);
    if (n.rank == 1) return Tensor::from_vector(std::vector<double>(v, v + n.len));
    return Tensor::from_matrix(n.rows, n.cols, std::vector<double>(v, v + n.len));
}

bool Tape::grad_defined(NodeId id) const { return node(id).gofs != kNone; }

std::span<const double> Tape::grad_span(NodeId id) const {
    const Node& n = node(id);
    if (n.gofs == kNone) return {};
    return {garena_.data() + n.gofs, n.len};
}

Tensor Tape::grad_tensor(NodeId id) const {
    const Node& n = node(id);
    std::vector<double> out(n.len, 0.0);
    if (n.gofs != kNone) {
        const double* g = garena_.data() + n.gofs;
        out.assign(g, g + n.len);
    }
    if (n.rank == 0) return Tensor::scalar(out[0]);
    if (n.rank == 1) return Tensor::from_vector(std::move(out));
    return Tensor::from_matrix(n.rows, n.cols, std::move(out));
}

NodeId gru_cell(Tape& t, NodeId x, NodeId h_prev, const GruNodes& p) {
    NodeId z = t.sigmoid(t.add(t.add(t.matvec(p.wz, x), t.matvec(p.uz, h_prev)), p.bz));
    NodeId r = t.sigmoid(t.add(t.add(t.matvec(p.wr, x), t.matvec(p.ur, h_prev)), p.br));
    NodeId hc = t.tanh(t.add(t.add(t.matvec(p.wh, x), t.matvec(p.uh, t.mul(r, h_prev))), p.bh));
    NodeId one_minus_z = t.add_const(t.scale(z, -1.0), 1.0);
    return t.add(t.mul(one_minus_z, h_prev), t.mul(z, hc));
}

}  // namespace dstlab
