// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace toktrack {

// Dense row-major f64 tensor with reverse-mode autodiff. Ranks 1 and 2 are
// what the model uses; a scalar is shape {1, 1}. Gradients are recorded on a
// per-thread tape (Graph) rebuilt each forward pass.
struct Tensor {
    std::vector<int> shape;
    std::shared_ptr<std::vector<double>> data;
    mutable std::shared_ptr<std::vector<double>> grad; // allocated lazily, same size as data
    bool requires_grad = false;

    Tensor() = default;
    Tensor(std::vector<int> shp, bool req_grad = false);

    static Tensor zeros(std::vector<int> shp, bool req_grad = false);
    static Tensor full(std::vector<int> shp, double value, bool req_grad = false);
    static Tensor scalar(double value, bool req_grad = false);
    static Tensor from_rows(const std::vector<std::vector<double>>& rows, bool req_grad = false);

    int rank() const { return static_cast<int>(shape.size()); }
    int rows() const;
    int cols() const;
    std::size_t numel() const { return data ? data->size() : 0; }

    double& at(int r, int c);
    double at(int r, int c) const;
    double value() const; // numel()==1

    void ensure_grad() const;
    void zero_grad() const;

    // Leaf sharing this tensor's storage but cut from the tape.
    Tensor detach() const;
    // Deep copy of the values (fresh storage, no tape link).
    Tensor clone_data() const;
};

// Row-major boolean matrix used for attention masks.
struct BoolMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> cells;

    BoolMatrix() = default;
    BoolMatrix(int r, int c, bool fill = false)
        : rows(r), cols(c), cells(static_cast<std::size_t>(r) * c, fill ? 1 : 0) {}
    bool at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c] != 0; }
    void set(int r, int c, bool v) { cells[static_cast<std::size_t>(r) * cols + c] = v ? 1 : 0; }
};

// Tape of one forward pass: ops append themselves in execution order, which
// is a topological order by construction; backward() walks it in reverse.
class Graph {
  public:
    void backward(Tensor& loss);
    void record(std::function<void()> backward_fn);
    std::size_t size() const { return ops_.size(); }
    void clear() { ops_.clear(); }

  private:
    std::vector<std::function<void()>> ops_;
};

// RAII activation of a thread-local tape. Ops record gradients only while a
// scope is live; inference runs without one and pays no tape cost.
class GraphScope {
  public:
    explicit GraphScope(Graph& g);
    ~GraphScope();
    GraphScope(const GraphScope&) = delete;
    GraphScope& operator=(const GraphScope&) = delete;
};

Graph* active_graph();

// Multiply-add counter for the current thread, incremented by matmul.
// Used by the efficiency instrumentation and reporting.
std::uint64_t flop_count();
void reset_flop_count();

// --- ops -------------------------------------------------------------------
// All ops validate shapes, check outputs for NaN/Inf, and register a backward
// rule on the active tape when any input requires grad.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

Tensor add_const(const Tensor& x, double c);
Tensor scale(const Tensor& x, double c);
Tensor pow_const(const Tensor& x, double p);

Tensor neg(const Tensor& x);
Tensor exp_t(const Tensor& x);
Tensor sqrt_t(const Tensor& x);
Tensor abs_t(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor gelu(const Tensor& x);

// Broadcast-add a [1,d] row vector to every row of x [n,d].
Tensor add_rows(const Tensor& x, const Tensor& row);

// axis 1: softmax across each row; axis 0: across each column.
Tensor softmax(const Tensor& x, int axis = 1);

// Row softmax where mask=false entries behave as -inf logits: their weight is
// exactly zero and no gradient reaches them. A fully blocked row is an error.
Tensor masked_softmax(const Tensor& x, const BoolMatrix& mask);

// Per-row layer norm, epsilon 1e-6 inside the variance root.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta);

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& indices);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, int start, int len);
Tensor slice_cols(const Tensor& x, int start, int len);
Tensor concat_cols(const std::vector<Tensor>& parts);

// Rows listed in `indices` are replaced by the broadcast row vector.
Tensor replace_rows(const Tensor& x, const Tensor& row, const std::vector<int>& indices);

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// Mean over rows of -log softmax(logits)[target]; backward is
// (softmax - onehot) / n_rows.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets);

// Scaled dot-product attention with boolean mask (mask[i][j]=true means query
// i may attend to key j). Blocked weights are exactly zero.
Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const BoolMatrix& mask);

// --- validation harness ------------------------------------------------------

// Max over coordinates of |autodiff - central difference| / max(1, |fd|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

} // namespace toktrack
