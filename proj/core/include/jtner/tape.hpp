#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "jtner/tensor.hpp"

namespace jtner {

using GradMap = std::map<std::string, Tensor>;

/// Reverse-mode autodiff over a flat record of operations.
///
/// Ops evaluate eagerly: each builder method computes the forward value,
/// validates it is finite, and appends a record with whatever the backward
/// rule needs. Records are in topological order by construction, so
/// backward() is a single reverse sweep that visits each record once.
///
/// A tape and its tensors are confined to one thread. Parameters bound via
/// param() must stay alive and unmodified until backward() has run.
class Tape {
public:
    // --- graph inputs -----------------------------------------------------

    /// Constant input; never receives a gradient.
    int input(Tensor value);

    /// Owned differentiable variable. If named, its gradient appears in the
    /// map returned by backward().
    int variable(Tensor value, std::string name = "");

    /// Bind an external parameter tensor as a leaf. The tape reads its value
    /// in place (no copy); backward() fills both the returned GradMap and the
    /// tensor's grad slot. Respects t.requires_grad.
    int param(Tensor& t, const std::string& name);

    // --- operations -------------------------------------------------------

    int matmul(int a, int b);
    int transpose(int a);
    int add(int a, int b);          // elementwise, same shape
    int mul(int a, int b);          // elementwise, same shape
    int add_row_vec(int a, int v);  // a[m,n] + v[n] broadcast over rows
    int scale(int a, double c);
    int tanh_op(int a);
    int gelu(int a);
    int sum(int a);   // -> scalar
    int mean(int a);  // -> scalar
    int reshape(int a, std::vector<int> shape);
    int slice_rows(int a, int row_begin, int row_end);
    int concat_rows(const std::vector<int>& parts);
    int layer_norm(int x, int gain, int bias, double eps = 1e-5);
    int embedding_lookup(int table, const std::vector<int>& ids);
    int softmax_rows(int x);
    int cross_entropy(int logits, const std::vector<int>& targets);
    int logistic_loss(int scores, const std::vector<int>& labels);

    // --- results ----------------------------------------------------------

    const Tensor& value(int id) const;

    /// Reverse sweep from a scalar loss. Gradients accumulate additively
    /// across every use of a node. Returns name -> gradient for all named
    /// leaves reachable from the loss; bound params also get their grad slot
    /// set. One backward per tape.
    GradMap backward(int loss);

    /// Gradient of any node after backward(); zeros if unreached.
    Tensor grad(int id) const;

    std::size_t num_records() const { return nodes_.size(); }

private:
    enum class Op {
        kInput,
        kLeaf,
        kMatMul,
        kTranspose,
        kAdd,
        kMul,
        kAddRowVec,
        kScale,
        kTanh,
        kGelu,
        kSum,
        kMean,
        kReshape,
        kSliceRows,
        kConcatRows,
        kLayerNorm,
        kEmbedding,
        kSoftmaxRows,
        kCrossEntropy,
        kLogisticLoss,
    };

    struct Node {
        Op op;
        std::vector<int> in;
        Tensor val;            // owned value (unused for bound leaves)
        Tensor* bound = nullptr;  // external param storage
        std::vector<double> grad;
        std::vector<int> aux;      // ids / targets / slice bounds
        std::vector<double> aux_d; // saved stats for backward
        double c = 0.0;
        bool needs_grad = false;
        std::string name;
    };

    const Tensor& val_of(const Node& n) const { return n.bound ? *n.bound : n.val; }
    Node& node(int id);
    const Node& node(int id) const;
    int push(Node n);
    bool any_needs_grad(const std::vector<int>& in) const;
    std::vector<double>& ensure_grad(int id);
    void check_finite(const Tensor& t, const char* what) const;
    void backward_one(int id);

    std::deque<Node> nodes_;
    bool backward_done_ = false;
};

}  // namespace jtner
