// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include "toktrack/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "toktrack/errors.hpp"

namespace toktrack {

namespace {

thread_local Graph* g_active_graph = nullptr;
thread_local std::uint64_t g_flops = 0;

std::size_t shape_numel(const std::vector<int>& shp) {
    std::size_t n = 1;
    for (int d : shp) {
        if (d <= 0) throw ShapeError("tensor dimension must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return shp.empty() ? 0 : n;
}

void check_finite(const Tensor& t, const char* op) {
    for (double v : *t.data) {
        if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite value in output");
    }
}

// Also allocates the input's grad buffer NOW so the lambda's by-value copy
// shares it with the caller's tensor; allocating inside the lambda would
// write gradients into a buffer the caller never sees.
bool want_grad(const Tensor& t) {
    if (g_active_graph == nullptr || !t.requires_grad) return false;
    t.ensure_grad();
    return true;
}

// Marks `out` as an op output and preallocates zeroed grad storage so that
// backward rules can accumulate unconditionally.
void mark_output(Tensor& out, bool rec) {
    out.requires_grad = rec;
    if (rec) out.ensure_grad();
}

void require_2d(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected rank-2 tensor");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape) throw ShapeError(std::string(op) + ": shape mismatch");
}

} // namespace

Tensor::Tensor(std::vector<int> shp, bool req_grad) : shape(std::move(shp)), requires_grad(req_grad) {
    data = std::make_shared<std::vector<double>>(shape_numel(shape), 0.0);
    if (req_grad) ensure_grad();
}

Tensor Tensor::zeros(std::vector<int> shp, bool req_grad) { return Tensor(std::move(shp), req_grad); }

Tensor Tensor::full(std::vector<int> shp, double value, bool req_grad) {
    Tensor t(std::move(shp), req_grad);
    std::fill(t.data->begin(), t.data->end(), value);
    return t;
}

Tensor Tensor::scalar(double value, bool req_grad) { return full({1, 1}, value, req_grad); }

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows, bool req_grad) {
    if (rows.empty()) throw ShapeError("from_rows: no rows");
    const int r = static_cast<int>(rows.size());
    const int c = static_cast<int>(rows[0].size());
    Tensor t({r, c}, req_grad);
    for (int i = 0; i < r; ++i) {
        if (static_cast<int>(rows[i].size()) != c) throw ShapeError("from_rows: ragged rows");
        std::copy(rows[i].begin(), rows[i].end(), t.data->begin() + static_cast<std::size_t>(i) * c);
    }
    return t;
}

int Tensor::rows() const {
    if (rank() == 1) return shape[0];
    if (rank() == 2) return shape[0];
    throw ShapeError("rows(): unsupported rank");
}

int Tensor::cols() const {
    if (rank() == 1) return 1;
    if (rank() == 2) return shape[1];
    throw ShapeError("cols(): unsupported rank");
}

double& Tensor::at(int r, int c) { return (*data)[static_cast<std::size_t>(r) * cols() + c]; }
double Tensor::at(int r, int c) const { return (*data)[static_cast<std::size_t>(r) * cols() + c]; }

double Tensor::value() const {
    if (numel() != 1) throw ShapeError("value(): tensor is not a scalar");
    return (*data)[0];
}

void Tensor::ensure_grad() const {
    if (!grad) grad = std::make_shared<std::vector<double>>(data->size(), 0.0);
}

void Tensor::zero_grad() const {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
}

Tensor Tensor::detach() const {
    Tensor t;
    t.shape = shape;
    t.data = data;
    t.requires_grad = false;
    return t;
}

Tensor Tensor::clone_data() const {
    Tensor t;
    t.shape = shape;
    t.data = std::make_shared<std::vector<double>>(*data);
    t.requires_grad = false;
    return t;
}

void Graph::record(std::function<void()> backward_fn) { ops_.push_back(std::move(backward_fn)); }

void Graph::backward(Tensor& loss) {
    if (loss.numel() != 1) throw ShapeError("backward: loss must be a scalar");
    if (!loss.requires_grad) throw ShapeError("backward: loss does not require grad");
    loss.ensure_grad();
    (*loss.grad)[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

GraphScope::GraphScope(Graph& g) {
    if (g_active_graph != nullptr) throw Error("GraphScope: a graph is already active on this thread");
    g_active_graph = &g;
}

GraphScope::~GraphScope() { g_active_graph = nullptr; }

Graph* active_graph() { return g_active_graph; }

std::uint64_t flop_count() { return g_flops; }
void reset_flop_count() { g_flops = 0; }

// --- matmul ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const int m = a.shape[0], k = a.shape[1], k2 = b.shape[0], n = b.shape[1];
    if (k != k2) throw ShapeError("matmul: inner dimensions do not match");

    const bool ga = want_grad(a);
    const bool gb = want_grad(b);
    const bool rec = ga || gb;
    Tensor out({m, n});
    // i-k-j order keeps both B and C row accesses contiguous.
    const double* pa = a.data->data();
    const double* pb = b.data->data();
    double* pc = out.data->data();
    for (int i = 0; i < m; ++i) {
        const double* arow = pa + static_cast<std::size_t>(i) * k;
        double* crow = pc + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = pb + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    g_flops += static_cast<std::uint64_t>(m) * k * n;
    check_finite(out, "matmul");
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([a, b, out, m, k, n]() mutable {
            const double* pg = out.grad->data();
            if (a.requires_grad) {
                a.ensure_grad();
                double* pga = a.grad->data();
                const double* pbv = b.data->data();
                // dA = dC * B^T
                for (int i = 0; i < m; ++i) {
                    const double* grow = pg + static_cast<std::size_t>(i) * n;
                    double* garow = pga + static_cast<std::size_t>(i) * k;
                    for (int kk = 0; kk < k; ++kk) {
                        const double* brow = pbv + static_cast<std::size_t>(kk) * n;
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        garow[kk] += acc;
                    }
                }
                g_flops += static_cast<std::uint64_t>(m) * k * n;
            }
            if (b.requires_grad) {
                b.ensure_grad();
                double* pgb = b.grad->data();
                const double* pav = a.data->data();
                // dB = A^T * dC
                for (int kk = 0; kk < k; ++kk) {
                    double* gbrow = pgb + static_cast<std::size_t>(kk) * n;
                    for (int i = 0; i < m; ++i) {
                        const double av = pav[static_cast<std::size_t>(i) * k + kk];
                        if (av == 0.0) continue;
                        const double* grow = pg + static_cast<std::size_t>(i) * n;
                        for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                    }
                }
                g_flops += static_cast<std::uint64_t>(m) * k * n;
            }
        });
    }
    return out;
}

Tensor transpose(const Tensor& x) {
    require_2d(x, "transpose");
    const int r = x.shape[0], c = x.shape[1];
    const bool rec = want_grad(x);
    Tensor out({c, r});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.at(j, i) = x.at(i, j);
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([x, out, r, c]() mutable {
            x.ensure_grad();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    (*x.grad)[static_cast<std::size_t>(i) * c + j] += (*out.grad)[static_cast<std::size_t>(j) * r + i];
        });
    }
    return out;
}

// --- elementwise binaries ------------------------------------------------------

namespace {

// fwd(a_i, b_i) -> out_i; bwd fills (da_i, db_i) multipliers given inputs.
template <typename Fwd, typename DA, typename DB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, DA da_fn, DB db_fn) {
    require_same_shape(a, b, name);
    const bool ga = want_grad(a);
    const bool gb = want_grad(b);
    const bool rec = ga || gb;
    Tensor out(a.shape);
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = fwd((*a.data)[i], (*b.data)[i]);
    check_finite(out, name);
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([a, b, out, da_fn, db_fn, n]() mutable {
            if (a.requires_grad) {
                a.ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    (*a.grad)[i] += (*out.grad)[i] * da_fn((*a.data)[i], (*b.data)[i]);
            }
            if (b.requires_grad) {
                b.ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    (*b.grad)[i] += (*out.grad)[i] * db_fn((*a.data)[i], (*b.data)[i]);
            }
        });
    }
    return out;
}

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& x, const char* name, Fwd fwd, Bwd dfn) {
    const bool rec = want_grad(x);
    Tensor out(x.shape);
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = fwd((*x.data)[i]);
    check_finite(out, name);
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([x, out, dfn, n]() mutable {
            x.ensure_grad();
            for (std::size_t i = 0; i < n; ++i) (*x.grad)[i] += (*out.grad)[i] * dfn((*x.data)[i], (*out.data)[i]);
        });
    }
    return out;
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Tensor divide(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "divide", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "minimum", [](double x, double y) { return x < y ? x : y; },
        [](double x, double y) { return x <= y ? 1.0 : 0.0; }, [](double x, double y) { return x > y ? 1.0 : 0.0; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "maximum", [](double x, double y) { return x > y ? x : y; },
        [](double x, double y) { return x >= y ? 1.0 : 0.0; }, [](double x, double y) { return x < y ? 1.0 : 0.0; });
}

Tensor add_const(const Tensor& x, double c) {
    return unary_op(
        x, "add_const", [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor scale(const Tensor& x, double c) {
    return unary_op(
        x, "scale", [c](double v) { return v * c; }, [c](double, double) { return c; });
}

Tensor pow_const(const Tensor& x, double p) {
    return unary_op(
        x, "pow_const", [p](double v) { return std::pow(v, p); },
        [p](double v, double) { return p * std::pow(v, p - 1.0); });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor exp_t(const Tensor& x) {
    return unary_op(
        x, "exp", [](double v) { return std::exp(v); }, [](double, double o) { return o; });
}

Tensor sqrt_t(const Tensor& x) {
    return unary_op(
        x, "sqrt",
        [](double v) {
            if (v < 0.0) throw DomainError("sqrt: negative input");
            return std::sqrt(v);
        },
        [](double, double o) { return 0.5 / o; });
}

Tensor abs_t(const Tensor& x) {
    return unary_op(
        x, "abs", [](double v) { return std::fabs(v); },
        [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor sigmoid(const Tensor& x) {
    return unary_op(
        x, "sigmoid",
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double o) { return o * (1.0 - o); });
}

Tensor gelu(const Tensor& x) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt_2pi = 0.3989422804014326779;
    return unary_op(
        x, "gelu", [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
        [](double v, double) {
            const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            return cdf + v * pdf;
        });
}

Tensor add_rows(const Tensor& x, const Tensor& row) {
    require_2d(x, "add_rows");
    require_2d(row, "add_rows");
    if (row.shape[0] != 1 || row.shape[1] != x.shape[1]) throw ShapeError("add_rows: row vector shape mismatch");
    const int r = x.shape[0], c = x.shape[1];
    const bool gx = want_grad(x);
    const bool grow = want_grad(row);
    const bool rec = gx || grow;
    Tensor out({r, c});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.at(i, j) = x.at(i, j) + row.at(0, j);
    check_finite(out, "add_rows");
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([x, row, out, r, c]() mutable {
            if (x.requires_grad) {
                x.ensure_grad();
                for (std::size_t i = 0; i < x.numel(); ++i) (*x.grad)[i] += (*out.grad)[i];
            }
            if (row.requires_grad) {
                row.ensure_grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) (*row.grad)[j] += (*out.grad)[static_cast<std::size_t>(i) * c + j];
            }
        });
    }
    return out;
}

// --- softmax family --------------------------------------------------------

namespace {

// Shared backward for (masked) softmax rows: dx = s * (dy - sum(dy * s)).
void softmax_row_backward(const double* s, const double* dy, double* dx, int n) {
    double dot = 0.0;
    for (int j = 0; j < n; ++j) dot += dy[j] * s[j];
    for (int j = 0; j < n; ++j) dx[j] += s[j] * (dy[j] - dot);
}

} // namespace

Tensor softmax(const Tensor& x, int axis) {
    require_2d(x, "softmax");
    if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
    if (axis == 0) return transpose(softmax(transpose(x), 1));

    const int r = x.shape[0], c = x.shape[1];
    const bool rec = want_grad(x);
    Tensor out({r, c});
    for (int i = 0; i < r; ++i) {
        double mx = x.at(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, x.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            const double e = std::exp(x.at(i, j) - mx);
            out.at(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < c; ++j) out.at(i, j) /= sum;
    }
    check_finite(out, "softmax");
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([x, out, r, c]() mutable {
            x.ensure_grad();
            for (int i = 0; i < r; ++i) {
                const std::size_t off = static_cast<std::size_t>(i) * c;
                softmax_row_backward(out.data->data() + off, out.grad->data() + off, x.grad->data() + off, c);
            }
        });
    }
    return out;
}

Tensor masked_softmax(const Tensor& x, const BoolMatrix& mask) {
    require_2d(x, "masked_softmax");
    const int r = x.shape[0], c = x.shape[1];
    if (mask.rows != r || mask.cols != c) throw ShapeError("masked_softmax: mask shape mismatch");
    const bool rec = want_grad(x);
    Tensor out({r, c});
    for (int i = 0; i < r; ++i) {
        double mx = -1.0;
        bool any = false;
        for (int j = 0; j < c; ++j) {
            if (!mask.at(i, j)) continue;
            const double v = x.at(i, j);
            mx = any ? std::max(mx, v) : v;
            any = true;
        }
        if (!any) throw MaskError("masked_softmax: query row " + std::to_string(i) + " has no allowed key");
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            if (mask.at(i, j)) {
                const double e = std::exp(x.at(i, j) - mx);
                out.at(i, j) = e;
                sum += e;
            } else {
                out.at(i, j) = 0.0; // -inf logit: exactly zero weight
            }
        }
        for (int j = 0; j < c; ++j) out.at(i, j) /= sum;
    }
    check_finite(out, "masked_softmax");
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([x, out, r, c]() mutable {
            x.ensure_grad();
            for (int i = 0; i < r; ++i) {
                const std::size_t off = static_cast<std::size_t>(i) * c;
                // Blocked columns carry s=0, so they receive zero gradient.
                softmax_row_backward(out.data->data() + off, out.grad->data() + off, x.grad->data() + off, c);
            }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    require_2d(x, "layer_norm");
    const int r = x.shape[0], c = x.shape[1];
    if (gamma.numel() != static_cast<std::size_t>(c) || beta.numel() != static_cast<std::size_t>(c))
        throw ShapeError("layer_norm: gamma/beta size mismatch");
    constexpr double eps = 1e-6;
    const bool gx = want_grad(x);
    const bool gg = want_grad(gamma);
    const bool gb = want_grad(beta);
    const bool rec = gx || gg || gb;
    Tensor out({r, c});
    // Keep x_hat for the backward pass.
    auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(r) * c);
    auto inv_sigma = std::make_shared<std::vector<double>>(r);
    for (int i = 0; i < r; ++i) {
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += x.at(i, j);
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = x.at(i, j) - mean;
            var += d * d;
        }
        var /= c;
        const double inv = 1.0 / std::sqrt(var + eps);
        (*inv_sigma)[i] = inv;
        for (int j = 0; j < c; ++j) {
            const double h = (x.at(i, j) - mean) * inv;
            (*xhat)[static_cast<std::size_t>(i) * c + j] = h;
            out.at(i, j) = h * (*gamma.data)[j] + (*beta.data)[j];
        }
    }
    check_finite(out, "layer_norm");
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([x, gamma, beta, out, xhat, inv_sigma, r, c]() mutable {
            for (int i = 0; i < r; ++i) {
                const std::size_t off = static_cast<std::size_t>(i) * c;
                const double* h = xhat->data() + off;
                const double* dy = out.grad->data() + off;
                if (gamma.requires_grad) {
                    gamma.ensure_grad();
                    for (int j = 0; j < c; ++j) (*gamma.grad)[j] += dy[j] * h[j];
                }
                if (beta.requires_grad) {
                    beta.ensure_grad();
                    for (int j = 0; j < c; ++j) (*beta.grad)[j] += dy[j];
                }
                if (x.requires_grad) {
                    x.ensure_grad();
                    double mean_dh = 0.0, mean_dh_h = 0.0;
                    for (int j = 0; j < c; ++j) {
                        const double dh = dy[j] * (*gamma.data)[j];
                        mean_dh += dh;
                        mean_dh_h += dh * h[j];
                    }
                    mean_dh /= c;
                    mean_dh_h /= c;
                    const double inv = (*inv_sigma)[i];
                    for (int j = 0; j < c; ++j) {
                        const double dh = dy[j] * (*gamma.data)[j];
                        (*x.grad)[off + j] += inv * (dh - mean_dh - h[j] * mean_dh_h);
                    }
                }
            }
        });
    }
    return out;
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& indices) {
    require_2d(table, "embedding_lookup");
    const int rows_in = table.shape[0], d = table.shape[1];
    const int n = static_cast<int>(indices.size());
    if (n == 0) throw ShapeError("embedding_lookup: empty index list");
    for (int idx : indices) {
        if (idx < 0 || idx >= rows_in)
            throw VocabRangeError("embedding_lookup: index " + std::to_string(idx) + " out of table");
    }
    const bool rec = want_grad(table);
    Tensor out({n, d});
    for (int i = 0; i < n; ++i)
        std::copy(table.data->begin() + static_cast<std::size_t>(indices[i]) * d,
                  table.data->begin() + static_cast<std::size_t>(indices[i] + 1) * d,
                  out.data->begin() + static_cast<std::size_t>(i) * d);
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([table, out, indices, d, n]() mutable {
            table.ensure_grad();
            for (int i = 0; i < n; ++i) {
                const std::size_t src = static_cast<std::size_t>(i) * d;
                const std::size_t dst = static_cast<std::size_t>(indices[i]) * d;
                for (int j = 0; j < d; ++j) (*table.grad)[dst + j] += (*out.grad)[src + j];
            }
        });
    }
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no parts");
    const int c = parts[0].cols();
    int r = 0;
    bool rec = false;
    for (const auto& p : parts) {
        require_2d(p, "concat_rows");
        if (p.shape[1] != c) throw ShapeError("concat_rows: column mismatch");
        r += p.shape[0];
        rec |= want_grad(p);
    }
    Tensor out({r, c});
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.data->begin(), p.data->end(), out.data->begin() + off);
        off += p.numel();
    }
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([parts, out]() mutable {
            std::size_t o = 0;
            for (auto& p : parts) {
                if (p.requires_grad) {
                    p.ensure_grad();
                    for (std::size_t i = 0; i < p.numel(); ++i) (*p.grad)[i] += (*out.grad)[o + i];
                }
                o += p.numel();
            }
        });
    }
    return out;
}

Tensor slice_rows(const Tensor& x, int start, int len) {
    require_2d(x, "slice_rows");
    const int r = x.shape[0], c = x.shape[1];
    if (start < 0 || len <= 0 || start + len > r) throw ShapeError("slice_rows: range out of bounds");
    const bool rec = want_grad(x);
    Tensor out({len, c});
    std::copy(x.data->begin() + static_cast<std::size_t>(start) * c,
              x.data->begin() + static_cast<std::size_t>(start + len) * c, out.data->begin());
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([x, out, start, c, len]() mutable {
            x.ensure_grad();
            const std::size_t off = static_cast<std::size_t>(start) * c;
            for (std::size_t i = 0; i < out.numel(); ++i) (*x.grad)[off + i] += (*out.grad)[i];
        });
    }
    return out;
}

Tensor slice_cols(const Tensor& x, int start, int len) {
    require_2d(x, "slice_cols");
    const int r = x.shape[0], c = x.shape[1];
    if (start < 0 || len <= 0 || start + len > c) throw ShapeError("slice_cols: range out of bounds");
    const bool rec = want_grad(x);
    Tensor out({r, len});
    for (int i = 0; i < r; ++i)
        std::copy(x.data->begin() + static_cast<std::size_t>(i) * c + start,
                  x.data->begin() + static_cast<std::size_t>(i) * c + start + len,
                  out.data->begin() + static_cast<std::size_t>(i) * len);
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([x, out, start, r, c, len]() mutable {
            x.ensure_grad();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < len; ++j)
                    (*x.grad)[static_cast<std::size_t>(i) * c + start + j] +=
                        (*out.grad)[static_cast<std::size_t>(i) * len + j];
        });
    }
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    const int r = parts[0].rows();
    int c = 0;
    bool rec = false;
    for (const auto& p : parts) {
        require_2d(p, "concat_cols");
        if (p.shape[0] != r) throw ShapeError("concat_cols: row mismatch");
        c += p.shape[1];
        rec |= want_grad(p);
    }
    Tensor out({r, c});
    int coff = 0;
    for (const auto& p : parts) {
        const int pc = p.shape[1];
        for (int i = 0; i < r; ++i)
            std::copy(p.data->begin() + static_cast<std::size_t>(i) * pc,
                      p.data->begin() + static_cast<std::size_t>(i + 1) * pc,
                      out.data->begin() + static_cast<std::size_t>(i) * c + coff);
        coff += pc;
    }
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([parts, out, r, c]() mutable {
            int coff2 = 0;
            for (auto& p : parts) {
                const int pc = p.shape[1];
                if (p.requires_grad) {
                    p.ensure_grad();
                    for (int i = 0; i < r; ++i)
                        for (int j = 0; j < pc; ++j)
                            (*p.grad)[static_cast<std::size_t>(i) * pc + j] +=
                                (*out.grad)[static_cast<std::size_t>(i) * c + coff2 + j];
                }
                coff2 += pc;
            }
        });
    }
    return out;
}

Tensor replace_rows(const Tensor& x, const Tensor& row, const std::vector<int>& indices) {
    require_2d(x, "replace_rows");
    require_2d(row, "replace_rows");
    const int r = x.shape[0], c = x.shape[1];
    if (row.shape[0] != 1 || row.shape[1] != c) throw ShapeError("replace_rows: row vector shape mismatch");
    std::vector<std::uint8_t> replaced(r, 0);
    for (int idx : indices) {
        if (idx < 0 || idx >= r) throw ShapeError("replace_rows: index out of bounds");
        replaced[idx] = 1;
    }
    const bool gx = want_grad(x);
    const bool grow = want_grad(row);
    const bool rec = gx || grow;
    Tensor out({r, c});
    for (int i = 0; i < r; ++i) {
        if (replaced[i])
            std::copy(row.data->begin(), row.data->end(), out.data->begin() + static_cast<std::size_t>(i) * c);
        else
            std::copy(x.data->begin() + static_cast<std::size_t>(i) * c,
                      x.data->begin() + static_cast<std::size_t>(i + 1) * c,
                      out.data->begin() + static_cast<std::size_t>(i) * c);
    }
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([x, row, out, replaced, r, c]() mutable {
            if (x.requires_grad) {
                x.ensure_grad();
                for (int i = 0; i < r; ++i) {
                    if (replaced[i]) continue;
                    for (int j = 0; j < c; ++j)
                        (*x.grad)[static_cast<std::size_t>(i) * c + j] +=
                            (*out.grad)[static_cast<std::size_t>(i) * c + j];
                }
            }
            if (row.requires_grad) {
                row.ensure_grad();
                for (int i = 0; i < r; ++i) {
                    if (!replaced[i]) continue;
                    for (int j = 0; j < c; ++j)
                        (*row.grad)[j] += (*out.grad)[static_cast<std::size_t>(i) * c + j];
                }
            }
        });
    }
    return out;
}

Tensor sum_all(const Tensor& x) {
    const bool rec = want_grad(x);
    double s = 0.0;
    for (double v : *x.data) s += v;
    Tensor out = Tensor::scalar(s);
    check_finite(out, "sum_all");
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([x, out]() mutable {
            x.ensure_grad();
            const double g = (*out.grad)[0];
            for (std::size_t i = 0; i < x.numel(); ++i) (*x.grad)[i] += g;
        });
    }
    return out;
}

Tensor mean_all(const Tensor& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.numel())); }

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
    require_2d(logits, "cross_entropy");
    const int r = logits.shape[0], c = logits.shape[1];
    if (static_cast<int>(targets.size()) != r) throw ShapeError("cross_entropy: one target per row required");
    for (int t : targets)
        if (t < 0 || t >= c) throw VocabRangeError("cross_entropy: target out of vocabulary");

    const bool rec = want_grad(logits);
    auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(r) * c);
    double loss = 0.0;
    for (int i = 0; i < r; ++i) {
        double mx = logits.at(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            const double e = std::exp(logits.at(i, j) - mx);
            (*probs)[static_cast<std::size_t>(i) * c + j] = e;
            sum += e;
        }
        for (int j = 0; j < c; ++j) (*probs)[static_cast<std::size_t>(i) * c + j] /= sum;
        // log p = logit - mx - log(sum)
        loss -= (logits.at(i, targets[i]) - mx - std::log(sum));
    }
    loss /= r;
    Tensor out = Tensor::scalar(loss);
    check_finite(out, "cross_entropy");
    mark_output(out, rec);
    if (rec) {
        g_active_graph->record([logits, out, probs, targets, r, c]() mutable {
            logits.ensure_grad();
            const double g = (*out.grad)[0] / r;
            for (int i = 0; i < r; ++i) {
                for (int j = 0; j < c; ++j) {
                    double p = (*probs)[static_cast<std::size_t>(i) * c + j];
                    if (j == targets[i]) p -= 1.0;
                    (*logits.grad)[static_cast<std::size_t>(i) * c + j] += g * p;
                }
            }
        });
    }
    return out;
}

Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const BoolMatrix& mask) {
    require_2d(q, "masked_attention");
    require_2d(k, "masked_attention");
    require_2d(v, "masked_attention");
    if (q.shape[1] != k.shape[1]) throw ShapeError("masked_attention: q/k width mismatch");
    if (k.shape[0] != v.shape[0]) throw ShapeError("masked_attention: k/v row mismatch");
    if (mask.rows != q.shape[0] || mask.cols != k.shape[0])
        throw ShapeError("masked_attention: mask shape mismatch");
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(q.shape[1]));
    Tensor scores = matmul(scale(q, inv_scale), transpose(k));
    Tensor weights = masked_softmax(scores, mask);
    return matmul(weights, v);
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
    // Autodiff gradient.
    Tensor xr = x.clone_data();
    xr.requires_grad = true;
    xr.ensure_grad();
    {
        Graph g;
        GraphScope scope(g);
        Tensor y = f(xr);
        if (y.numel() != 1) throw ShapeError("grad_check: f must be scalar-valued");
        if (!std::isfinite(y.value())) throw NumericError("grad_check: f(x) is not finite");
        g.backward(y);
    }
    // Central differences, no tape.
    Tensor xp = x.clone_data();
    double max_err = 0.0;
    for (std::size_t i = 0; i < xp.numel(); ++i) {
        const double orig = (*xp.data)[i];
        (*xp.data)[i] = orig + h;
        const double fp = f(xp).value();
        (*xp.data)[i] = orig - h;
        const double fm = f(xp).value();
        (*xp.data)[i] = orig;
        const double fd = (fp - fm) / (2.0 * h);
        const double ad = (*xr.grad)[i];
        const double err = std::fabs(ad - fd) / std::max(1.0, std::fabs(fd));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

} // namespace toktrack
