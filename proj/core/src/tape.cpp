#include "jtner/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "jtner/errors.hpp"

namespace jtner {

namespace {

// Numerically stable sigmoid.
double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Tape::Node& Tape::node(int id) {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) {
        throw ContractError("tape node id " + std::to_string(id) + " out of range");
    }
    return nodes_[static_cast<std::size_t>(id)];
}

const Tape::Node& Tape::node(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) {
        throw ContractError("tape node id " + std::to_string(id) + " out of range");
    }
    return nodes_[static_cast<std::size_t>(id)];
}

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

bool Tape::any_needs_grad(const std::vector<int>& in) const {
    return std::any_of(in.begin(), in.end(), [&](int id) { return node(id).needs_grad; });
}

void Tape::check_finite(const Tensor& t, const char* what) const {
    if (!t.all_finite()) {
        throw NumericError(std::string(what) + " produced or received non-finite values");
    }
}

const Tensor& Tape::value(int id) const { return val_of(node(id)); }

int Tape::input(Tensor value) {
    check_finite(value, "input");
    Node n;
    n.op = Op::kInput;
    n.val = std::move(value);
    return push(std::move(n));
}

int Tape::variable(Tensor value, std::string name) {
    check_finite(value, "variable");
    Node n;
    n.op = Op::kInput;
    n.val = std::move(value);
    n.needs_grad = true;
    n.name = std::move(name);
    return push(std::move(n));
}

int Tape::param(Tensor& t, const std::string& name) {
    check_finite(t, "param");
    Node n;
    n.op = Op::kLeaf;
    n.bound = &t;
    n.needs_grad = t.requires_grad;
    n.name = name;
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.shape.size() != 2 || B.shape.size() != 2 || A.cols() != B.rows()) {
        throw ShapeError("matmul shape mismatch: " + shape_str(A.shape) + " x " + shape_str(B.shape));
    }
    const int m = A.rows(), k = A.cols(), p = B.cols();
    Tensor out({m, p});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < p; ++j) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t) acc += A.at(i, t) * B.at(t, j);
            out.at(i, j) = acc;
        }
    }
    check_finite(out, "matmul");
    Node n;
    n.op = Op::kMatMul;
    n.in = {a, b};
    n.val = std::move(out);
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::transpose(int a) {
    const Tensor& A = value(a);
    if (A.shape.size() != 2) throw ShapeError("transpose expects a matrix, got " + shape_str(A.shape));
    Tensor out({A.cols(), A.rows()});
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) out.at(j, i) = A.at(i, j);
    Node n;
    n.op = Op::kTranspose;
    n.in = {a};
    n.val = std::move(out);
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::add(int a, int b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) {
        throw ShapeError("add shape mismatch: " + shape_str(A.shape) + " vs " + shape_str(B.shape));
    }
    Tensor out(A.shape);
    for (std::size_t i = 0; i < A.data.size(); ++i) out.data[i] = A.data[i] + B.data[i];
    check_finite(out, "add");
    Node n;
    n.op = Op::kAdd;
    n.in = {a, b};
    n.val = std::move(out);
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::mul(int a, int b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) {
        throw ShapeError("mul shape mismatch: " + shape_str(A.shape) + " vs " + shape_str(B.shape));
    }
    Tensor out(A.shape);
    for (std::size_t i = 0; i < A.data.size(); ++i) out.data[i] = A.data[i] * B.data[i];
    check_finite(out, "mul");
    Node n;
    n.op = Op::kMul;
    n.in = {a, b};
    n.val = std::move(out);
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::add_row_vec(int a, int v) {
    const Tensor& A = value(a);
    const Tensor& V = value(v);
    if (A.shape.size() != 2 || V.shape.size() != 1 || V.shape[0] != A.cols()) {
        throw ShapeError("add_row_vec shape mismatch: " + shape_str(A.shape) + " + " + shape_str(V.shape));
    }
    Tensor out(A.shape);
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) out.at(i, j) = A.at(i, j) + V.data[static_cast<std::size_t>(j)];
    check_finite(out, "add_row_vec");
    Node n;
    n.op = Op::kAddRowVec;
    n.in = {a, v};
    n.val = std::move(out);
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::scale(int a, double c) {
    const Tensor& A = value(a);
    Tensor out(A.shape);
    for (std::size_t i = 0; i < A.data.size(); ++i) out.data[i] = A.data[i] * c;
    check_finite(out, "scale");
    Node n;
    n.op = Op::kScale;
    n.in = {a};
    n.val = std::move(out);
    n.c = c;
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::tanh_op(int a) {
    const Tensor& A = value(a);
    Tensor out(A.shape);
    for (std::size_t i = 0; i < A.data.size(); ++i) out.data[i] = std::tanh(A.data[i]);
    Node n;
    n.op = Op::kTanh;
    n.in = {a};
    n.val = std::move(out);
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::gelu(int a) {
    const Tensor& A = value(a);
    Tensor out(A.shape);
    for (std::size_t i = 0; i < A.data.size(); ++i) {
        const double x = A.data[i];
        out.data[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    }
    check_finite(out, "gelu");
    Node n;
    n.op = Op::kGelu;
    n.in = {a};
    n.val = std::move(out);
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::sum(int a) {
    const Tensor& A = value(a);
    double acc = 0.0;
    for (double x : A.data) acc += x;
    Tensor out = Tensor::scalar(acc);
    check_finite(out, "sum");
    Node n;
    n.op = Op::kSum;
    n.in = {a};
    n.val = std::move(out);
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::mean(int a) {
    const Tensor& A = value(a);
    if (A.size() == 0) throw ContractError("mean of an empty tensor");
    double acc = 0.0;
    for (double x : A.data) acc += x;
    Tensor out = Tensor::scalar(acc / static_cast<double>(A.size()));
    check_finite(out, "mean");
    Node n;
    n.op = Op::kMean;
    n.in = {a};
    n.val = std::move(out);
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::reshape(int a, std::vector<int> shape) {
    const Tensor& A = value(a);
    if (shape_numel(shape) != A.size()) {
        throw ShapeError("reshape " + shape_str(A.shape) + " -> " + shape_str(shape) + " changes element count");
    }
    Tensor out(std::move(shape), A.data);
    Node n;
    n.op = Op::kReshape;
    n.in = {a};
    n.val = std::move(out);
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::slice_rows(int a, int row_begin, int row_end) {
    const Tensor& A = value(a);
    if (A.shape.size() != 2) throw ShapeError("slice_rows expects a matrix, got " + shape_str(A.shape));
    if (row_begin < 0 || row_end > A.rows() || row_begin >= row_end) {
        throw IndexError("slice_rows [" + std::to_string(row_begin) + "," + std::to_string(row_end) +
                         ") out of range for " + shape_str(A.shape));
    }
    const int rows = row_end - row_begin;
    Tensor out({rows, A.cols()});
    std::copy(A.data.begin() + static_cast<std::ptrdiff_t>(row_begin) * A.cols(),
              A.data.begin() + static_cast<std::ptrdiff_t>(row_end) * A.cols(), out.data.begin());
    Node n;
    n.op = Op::kSliceRows;
    n.in = {a};
    n.val = std::move(out);
    n.aux = {row_begin, row_end};
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::concat_rows(const std::vector<int>& parts) {
    if (parts.empty()) throw ContractError("concat_rows of zero tensors");
    int cols = -1;
    int rows = 0;
    for (int id : parts) {
        const Tensor& P = value(id);
        const std::vector<int>& s = P.shape;
        int c, r;
        if (s.size() == 2) {
            r = s[0];
            c = s[1];
        } else if (s.size() == 1) {
            r = s[0];
            c = 1;
        } else {
            throw ShapeError("concat_rows expects vectors or matrices, got " + shape_str(s));
        }
        if (cols == -1) cols = c;
        if (c != cols) {
            throw ShapeError("concat_rows column mismatch: " + std::to_string(cols) + " vs " + std::to_string(c));
        }
        rows += r;
    }
    Tensor out = cols == 1 ? Tensor({rows}) : Tensor({rows, cols});
    std::size_t off = 0;
    for (int id : parts) {
        const Tensor& P = value(id);
        std::copy(P.data.begin(), P.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
        off += P.data.size();
    }
    Node n;
    n.op = Op::kConcatRows;
    n.in = parts;
    n.val = std::move(out);
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::layer_norm(int x, int gain, int bias, double eps) {
    const Tensor& X = value(x);
    const Tensor& G = value(gain);
    const Tensor& B = value(bias);
    if (X.shape.size() != 2 || G.shape.size() != 1 || B.shape.size() != 1 || G.shape[0] != X.cols() ||
        B.shape[0] != X.cols()) {
        throw ShapeError("layer_norm shape mismatch: x=" + shape_str(X.shape) + " gain=" + shape_str(G.shape) +
                         " bias=" + shape_str(B.shape));
    }
    const int rows = X.rows(), d = X.cols();
    Tensor out(X.shape);
    std::vector<double> stats;  // mean, inv_std per row
    stats.reserve(static_cast<std::size_t>(rows) * 2);
    for (int r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += X.at(r, j);
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double dv = X.at(r, j) - mean;
            var += dv * dv;
        }
        var /= d;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < d; ++j) {
            out.at(r, j) = (X.at(r, j) - mean) * inv_std * G.data[static_cast<std::size_t>(j)] +
                           B.data[static_cast<std::size_t>(j)];
        }
        stats.push_back(mean);
        stats.push_back(inv_std);
    }
    check_finite(out, "layer_norm");
    Node n;
    n.op = Op::kLayerNorm;
    n.in = {x, gain, bias};
    n.val = std::move(out);
    n.aux_d = std::move(stats);
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::embedding_lookup(int table, const std::vector<int>& ids) {
    const Tensor& T = value(table);
    if (T.shape.size() != 2) throw ShapeError("embedding table must be a matrix, got " + shape_str(T.shape));
    if (ids.empty()) throw ContractError("embedding_lookup with no ids");
    Tensor out({static_cast<int>(ids.size()), T.cols()});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const int id = ids[i];
        if (id < 0 || id >= T.rows()) {
            throw IndexError("embedding id " + std::to_string(id) + " out of range [0," +
                             std::to_string(T.rows()) + ")");
        }
        for (int j = 0; j < T.cols(); ++j) out.at(static_cast<int>(i), j) = T.at(id, j);
    }
    Node n;
    n.op = Op::kEmbedding;
    n.in = {table};
    n.val = std::move(out);
    n.aux = ids;
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::softmax_rows(int x) {
    const Tensor& X = value(x);
    if (X.shape.size() != 2 || X.cols() < 1) {
        throw ShapeError("softmax_rows expects [n,k] with k >= 1, got " + shape_str(X.shape));
    }
    check_finite(X, "softmax_rows");  // spec: non-finite input is a numeric-domain error
    Tensor out(X.shape);
    for (int r = 0; r < X.rows(); ++r) {
        // Max-subtraction keeps exp in range; mathematically equal to the
        // plain definition.
        double mx = X.at(r, 0);
        for (int j = 1; j < X.cols(); ++j) mx = std::max(mx, X.at(r, j));
        double denom = 0.0;
        for (int j = 0; j < X.cols(); ++j) {
            const double e = std::exp(X.at(r, j) - mx);
            out.at(r, j) = e;
            denom += e;
        }
        for (int j = 0; j < X.cols(); ++j) out.at(r, j) /= denom;
    }
    check_finite(out, "softmax_rows");
    Node n;
    n.op = Op::kSoftmaxRows;
    n.in = {x};
    n.val = std::move(out);
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::cross_entropy(int logits, const std::vector<int>& targets) {
    const Tensor& X = value(logits);
    if (X.shape.size() != 2) throw ShapeError("cross_entropy expects [n,k] logits, got " + shape_str(X.shape));
    if (static_cast<int>(targets.size()) != X.rows()) {
        throw ContractError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                            std::to_string(X.rows()) + " rows");
    }
    const int rows = X.rows(), k = X.cols();
    double total = 0.0;
    std::vector<double> probs(static_cast<std::size_t>(rows) * k);
    for (int r = 0; r < rows; ++r) {
        const int t = targets[static_cast<std::size_t>(r)];
        if (t < 0 || t >= k) {
            throw IndexError("cross_entropy target " + std::to_string(t) + " out of range [0," +
                             std::to_string(k) + ") at row " + std::to_string(r));
        }
        double mx = X.at(r, 0);
        for (int j = 1; j < k; ++j) mx = std::max(mx, X.at(r, j));
        double denom = 0.0;
        for (int j = 0; j < k; ++j) {
            const double e = std::exp(X.at(r, j) - mx);
            probs[static_cast<std::size_t>(r) * k + j] = e;
            denom += e;
        }
        for (int j = 0; j < k; ++j) probs[static_cast<std::size_t>(r) * k + j] /= denom;
        total += (mx + std::log(denom)) - X.at(r, t);  // log-sum-exp minus target logit
    }
    Tensor out = Tensor::scalar(total / rows);
    check_finite(out, "cross_entropy");
    Node n;
    n.op = Op::kCrossEntropy;
    n.in = {logits};
    n.val = std::move(out);
    n.aux = targets;
    n.aux_d = std::move(probs);
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

int Tape::logistic_loss(int scores, const std::vector<int>& labels) {
    const Tensor& S = value(scores);
    if (static_cast<std::int64_t>(labels.size()) != S.size()) {
        throw ContractError("logistic_loss: " + std::to_string(labels.size()) + " labels for " +
                            std::to_string(S.size()) + " scores");
    }
    if (labels.empty()) throw ContractError("logistic_loss over zero tokens");
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y != 0 && y != 1) throw ContractError("logistic_loss label must be 0/1, got " + std::to_string(y));
        const double s = S.data[i];
        // Stable form of -[y log sigma(s) + (1-y) log(1 - sigma(s))].
        total += std::max(s, 0.0) - s * y + std::log1p(std::exp(-std::abs(s)));
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(labels.size()));
    check_finite(out, "logistic_loss");
    Node n;
    n.op = Op::kLogisticLoss;
    n.in = {scores};
    n.val = std::move(out);
    n.aux = labels;
    n.needs_grad = any_needs_grad(n.in);
    return push(std::move(n));
}

std::vector<double>& Tape::ensure_grad(int id) {
    Node& n = node(id);
    if (n.grad.empty()) n.grad.assign(val_of(n).data.size(), 0.0);
    return n.grad;
}

Tensor Tape::grad(int id) const {
    const Node& n = node(id);
    Tensor g(val_of(n).shape);
    if (!n.grad.empty()) g.data = n.grad;
    return g;
}

void Tape::backward_one(int id) {
    Node& n = node(id);
    const std::vector<double>& up = n.grad;
    switch (n.op) {
        case Op::kInput:
        case Op::kLeaf:
            break;
        case Op::kMatMul: {
            const Tensor& A = value(n.in[0]);
            const Tensor& B = value(n.in[1]);
            const int m = A.rows(), k = A.cols(), p = B.cols();
            if (node(n.in[0]).needs_grad) {
                std::vector<double>& ga = ensure_grad(n.in[0]);
                for (int i = 0; i < m; ++i)
                    for (int t = 0; t < k; ++t) {
                        double acc = 0.0;
                        for (int j = 0; j < p; ++j) acc += up[static_cast<std::size_t>(i) * p + j] * B.at(t, j);
                        ga[static_cast<std::size_t>(i) * k + t] += acc;
                    }
            }
            if (node(n.in[1]).needs_grad) {
                std::vector<double>& gb = ensure_grad(n.in[1]);
                for (int t = 0; t < k; ++t)
                    for (int j = 0; j < p; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < m; ++i) acc += A.at(i, t) * up[static_cast<std::size_t>(i) * p + j];
                        gb[static_cast<std::size_t>(t) * p + j] += acc;
                    }
            }
            break;
        }
        case Op::kTranspose: {
            if (!node(n.in[0]).needs_grad) break;
            const Tensor& A = value(n.in[0]);
            std::vector<double>& ga = ensure_grad(n.in[0]);
            const int r = A.rows(), c = A.cols();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    ga[static_cast<std::size_t>(i) * c + j] += up[static_cast<std::size_t>(j) * r + i];
            break;
        }
        case Op::kAdd: {
            for (int which = 0; which < 2; ++which) {
                if (!node(n.in[static_cast<std::size_t>(which)]).needs_grad) continue;
                std::vector<double>& g = ensure_grad(n.in[static_cast<std::size_t>(which)]);
                for (std::size_t i = 0; i < up.size(); ++i) g[i] += up[i];
            }
            break;
        }
        case Op::kMul: {
            const Tensor& A = value(n.in[0]);
            const Tensor& B = value(n.in[1]);
            if (node(n.in[0]).needs_grad) {
                std::vector<double>& ga = ensure_grad(n.in[0]);
                for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * B.data[i];
            }
            if (node(n.in[1]).needs_grad) {
                std::vector<double>& gb = ensure_grad(n.in[1]);
                for (std::size_t i = 0; i < up.size(); ++i) gb[i] += up[i] * A.data[i];
            }
            break;
        }
        case Op::kAddRowVec: {
            const Tensor& A = value(n.in[0]);
            const int rows = A.rows(), cols = A.cols();
            if (node(n.in[0]).needs_grad) {
                std::vector<double>& ga = ensure_grad(n.in[0]);
                for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i];
            }
            if (node(n.in[1]).needs_grad) {
                std::vector<double>& gv = ensure_grad(n.in[1]);
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j) gv[static_cast<std::size_t>(j)] += up[static_cast<std::size_t>(i) * cols + j];
            }
            break;
        }
        case Op::kScale: {
            if (!node(n.in[0]).needs_grad) break;
            std::vector<double>& g = ensure_grad(n.in[0]);
            for (std::size_t i = 0; i < up.size(); ++i) g[i] += n.c * up[i];
            break;
        }
        case Op::kTanh: {
            if (!node(n.in[0]).needs_grad) break;
            std::vector<double>& g = ensure_grad(n.in[0]);
            for (std::size_t i = 0; i < up.size(); ++i) {
                const double y = n.val.data[i];
                g[i] += up[i] * (1.0 - y * y);
            }
            break;
        }
        case Op::kGelu: {
            if (!node(n.in[0]).needs_grad) break;
            const Tensor& A = value(n.in[0]);
            std::vector<double>& g = ensure_grad(n.in[0]);
            for (std::size_t i = 0; i < up.size(); ++i) {
                const double x = A.data[i];
                const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                g[i] += up[i] * (cdf + x * pdf);
            }
            break;
        }
        case Op::kSum: {
            if (!node(n.in[0]).needs_grad) break;
            std::vector<double>& g = ensure_grad(n.in[0]);
            for (double& v : g) v += up[0];
            break;
        }
        case Op::kMean: {
            if (!node(n.in[0]).needs_grad) break;
            std::vector<double>& g = ensure_grad(n.in[0]);
            const double s = up[0] / static_cast<double>(g.size());
            for (double& v : g) v += s;
            break;
        }
        case Op::kReshape: {
            if (!node(n.in[0]).needs_grad) break;
            std::vector<double>& g = ensure_grad(n.in[0]);
            for (std::size_t i = 0; i < up.size(); ++i) g[i] += up[i];
            break;
        }
        case Op::kSliceRows: {
            if (!node(n.in[0]).needs_grad) break;
            const Tensor& A = value(n.in[0]);
            std::vector<double>& g = ensure_grad(n.in[0]);
            const std::size_t off = static_cast<std::size_t>(n.aux[0]) * A.cols();
            for (std::size_t i = 0; i < up.size(); ++i) g[off + i] += up[i];
            break;
        }
        case Op::kConcatRows: {
            std::size_t off = 0;
            for (int part : n.in) {
                const Tensor& P = value(part);
                if (node(part).needs_grad) {
                    std::vector<double>& g = ensure_grad(part);
                    for (std::size_t i = 0; i < P.data.size(); ++i) g[i] += up[off + i];
                }
                off += P.data.size();
            }
            break;
        }
        case Op::kLayerNorm: {
            const Tensor& X = value(n.in[0]);
            const Tensor& G = value(n.in[1]);
            const int rows = X.rows(), d = X.cols();
            const bool need_x = node(n.in[0]).needs_grad;
            const bool need_g = node(n.in[1]).needs_grad;
            const bool need_b = node(n.in[2]).needs_grad;
            std::vector<double>* gx = need_x ? &ensure_grad(n.in[0]) : nullptr;
            std::vector<double>* gg = need_g ? &ensure_grad(n.in[1]) : nullptr;
            std::vector<double>* gb = need_b ? &ensure_grad(n.in[2]) : nullptr;
            for (int r = 0; r < rows; ++r) {
                const double mean = n.aux_d[static_cast<std::size_t>(r) * 2];
                const double inv_std = n.aux_d[static_cast<std::size_t>(r) * 2 + 1];
                double sum_dyg = 0.0, sum_dyg_xhat = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double xhat = (X.at(r, j) - mean) * inv_std;
                    const double dyg = up[static_cast<std::size_t>(r) * d + j] * G.data[static_cast<std::size_t>(j)];
                    sum_dyg += dyg;
                    sum_dyg_xhat += dyg * xhat;
                }
                for (int j = 0; j < d; ++j) {
                    const double xhat = (X.at(r, j) - mean) * inv_std;
                    const double dy = up[static_cast<std::size_t>(r) * d + j];
                    if (gx) {
                        const double dyg = dy * G.data[static_cast<std::size_t>(j)];
                        (*gx)[static_cast<std::size_t>(r) * d + j] +=
                            inv_std / d * (d * dyg - sum_dyg - xhat * sum_dyg_xhat);
                    }
                    if (gg) (*gg)[static_cast<std::size_t>(j)] += dy * xhat;
                    if (gb) (*gb)[static_cast<std::size_t>(j)] += dy;
                }
            }
            break;
        }
        case Op::kEmbedding: {
            if (!node(n.in[0]).needs_grad) break;
            const Tensor& T = value(n.in[0]);
            std::vector<double>& g = ensure_grad(n.in[0]);
            const int d = T.cols();
            for (std::size_t i = 0; i < n.aux.size(); ++i) {
                const std::size_t row = static_cast<std::size_t>(n.aux[i]);
                for (int j = 0; j < d; ++j) g[row * d + j] += up[i * d + j];
            }
            break;
        }
        case Op::kSoftmaxRows: {
            if (!node(n.in[0]).needs_grad) break;
            const Tensor& Y = n.val;
            std::vector<double>& g = ensure_grad(n.in[0]);
            const int rows = Y.rows(), k = Y.cols();
            for (int r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (int j = 0; j < k; ++j) dot += up[static_cast<std::size_t>(r) * k + j] * Y.at(r, j);
                for (int j = 0; j < k; ++j)
                    g[static_cast<std::size_t>(r) * k + j] += (up[static_cast<std::size_t>(r) * k + j] - dot) * Y.at(r, j);
            }
            break;
        }
        case Op::kCrossEntropy: {
            if (!node(n.in[0]).needs_grad) break;
            const Tensor& X = value(n.in[0]);
            std::vector<double>& g = ensure_grad(n.in[0]);
            const int rows = X.rows(), k = X.cols();
            const double s = up[0] / rows;
            for (int r = 0; r < rows; ++r) {
                const int t = n.aux[static_cast<std::size_t>(r)];
                for (int j = 0; j < k; ++j) {
                    double p = n.aux_d[static_cast<std::size_t>(r) * k + j];
                    if (j == t) p -= 1.0;
                    g[static_cast<std::size_t>(r) * k + j] += s * p;
                }
            }
            break;
        }
        case Op::kLogisticLoss: {
            if (!node(n.in[0]).needs_grad) break;
            const Tensor& S = value(n.in[0]);
            std::vector<double>& g = ensure_grad(n.in[0]);
            const double sc = up[0] / static_cast<double>(n.aux.size());
            for (std::size_t i = 0; i < n.aux.size(); ++i) {
                g[i] += sc * (sigmoid(S.data[i]) - n.aux[i]);
            }
            break;
        }
    }
}

GradMap Tape::backward(int loss) {
    Node& ln = node(loss);
    if (val_of(ln).size() != 1) {
        throw ContractError("backward requires a scalar loss, got shape " + shape_str(val_of(ln).shape));
    }
    if (backward_done_) throw ContractError("backward already ran on this tape");
    backward_done_ = true;
    ensure_grad(loss)[0] = 1.0;
    for (int id = loss; id >= 0; --id) {
        Node& n = node(id);
        if (!n.needs_grad || n.grad.empty()) continue;
        backward_one(id);
    }
    GradMap out;
    for (Node& n : nodes_) {
        if ((n.op != Op::kLeaf && n.op != Op::kInput) || n.name.empty() || !n.needs_grad) continue;
        Tensor g(val_of(n).shape);
        if (!n.grad.empty()) g.data = n.grad;
        if (n.bound) n.bound->grad = g.data;
        out[n.name] = std::move(g);
    }
    return out;
}

}  // namespace jtner
