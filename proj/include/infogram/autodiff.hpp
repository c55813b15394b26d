#pragma once

#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "infogram/tensor.hpp"

namespace infogram::ad {

enum class Op {
    leaf,
    matmul,
    bmm, // batched A_b * B_b^T over a shared leading axis
    transpose,
    add,
    scale,
    hadamard,
    mul_elementwise,
    layernorm,
    l2norm_rows,
    frobenius_sq,
    log2_scalar,
    trace_normalize,
    divide_scalar,
    sum,
    sigmoid,
    gelu,
    reshape,
    structure_loss,
};

struct Node {
    Tensor value;
    Op op = Op::leaf;
    std::vector<Node*> parents;
    bool requires_grad = false;
    double payload = 0.0; // constant factor for scale
    std::size_t id = 0;
};

/// Gradients keyed by leaf node identity.  Leaves created with
/// requires_grad=false never appear; leaves the root does not depend on
/// are also absent (their gradient is identically zero).
class GradientMap {
public:
    bool contains(const Node* leaf) const { return grads_.count(leaf) > 0; }
    const Tensor& at(const Node* leaf) const;
    std::size_t size() const { return grads_.size(); }

    std::unordered_map<const Node*, Tensor> grads_;
};

/// Eager evaluation tape.  Every operation validates shapes, computes its
/// value immediately and appends a node; node pointers stay valid for the
/// lifetime of the tape.
class Tape {
public:
    Node* leaf(Tensor value, bool requires_grad);
    Node* constant(Tensor value) { return leaf(std::move(value), false); }

    /// Generic entry point; ops with structural arguments (reshape) have
    /// dedicated methods below.
    Node* record(Op op, std::vector<Node*> inputs, double payload = 0.0);

    Node* matmul(Node* a, Node* b) { return record(Op::matmul, {a, b}); }
    Node* bmm(Node* a, Node* b) { return record(Op::bmm, {a, b}); }
    Node* transpose(Node* a) { return record(Op::transpose, {a}); }
    Node* add(Node* a, Node* b) { return record(Op::add, {a, b}); }
    Node* scale(Node* a, double c) { return record(Op::scale, {a}, c); }
    Node* hadamard(Node* a, Node* b) { return record(Op::hadamard, {a, b}); }
    Node* mul_elementwise(Node* a, Node* b) { return record(Op::mul_elementwise, {a, b}); }
    Node* layernorm(Node* x, Node* gain, Node* bias) {
        return record(Op::layernorm, {x, gain, bias});
    }
    Node* l2norm_rows(Node* x) { return record(Op::l2norm_rows, {x}); }
    Node* frobenius_sq(Node* x) { return record(Op::frobenius_sq, {x}); }
    Node* log2_scalar(Node* x) { return record(Op::log2_scalar, {x}); }
    Node* trace_normalize(Node* x) { return record(Op::trace_normalize, {x}); }
    Node* divide_scalar(Node* x, Node* s) { return record(Op::divide_scalar, {x, s}); }
    Node* sum(Node* x) { return record(Op::sum, {x}); }
    Node* sigmoid(Node* x) { return record(Op::sigmoid, {x}); }
    Node* gelu(Node* x) { return record(Op::gelu, {x}); }
    Node* reshape(Node* x, std::vector<std::size_t> shape);
    /// Mean binary cross-entropy of sigmoid(logits) against a binary
    /// target plus a smoothed complement-of-overlap term per sample.
    Node* structure_loss(Node* logits, Node* target) {
        return record(Op::structure_loss, {logits, target});
    }

    std::size_t size() const { return nodes_.size(); }

private:
    Node* append(Tensor value, Op op, std::vector<Node*> parents, double payload);
    std::deque<Node> nodes_;
};

/// Reverse-mode sweep from a scalar root.  Single pass; releases nothing,
/// so it may be called on any scalar node of a live tape.
GradientMap backward(Node* root);

/// Max relative error between the analytic gradient of f at x and central
/// finite differences with the given step.  f receives a fresh tape and a
/// leaf for x and must return a scalar node.
double finite_diff_check(const std::function<Node*(Tape&, Node*)>& f,
                         const Tensor& x, double step);

} // namespace infogram::ad
