#include "uprompt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace uprompt {

namespace {

// Allocates the output node and wires parents + grad buffers when a graph is
// being recorded. The backward closure is attached by the caller afterwards.
template <class T>
Tensor<T> op_result(std::vector<int> shape, std::initializer_list<Tensor<T>> parents) {
    Tensor<T> out = Tensor<T>::zeros(std::move(shape));
    if (!grad_enabled()) {
        return out;
    }
    bool any = false;
    for (const auto& p : parents) {
        any = any || p.check().requires_grad;
    }
    if (!any) {
        return out;
    }
    auto& n = out.check();
    n.requires_grad = true;
    n.grad.assign(n.numel(), T(0));
    for (const auto& p : parents) {
        n.parents.push_back(p.node());
    }
    return out;
}

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str<T>(a.shape()) +
                         " vs " + shape_str<T>(b.shape()));
    }
}

template <class T>
void require_rank(const Tensor<T>& a, int rank, const char* op) {
    if (a.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_str<T>(a.shape()));
    }
}

}  // namespace

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "add");
    Tensor<T> out = op_result<T>(a.shape(), {a, b});
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        out.values()[i] = a.values()[i] + b.values()[i];
    }
    if (out.requires_grad()) {
        auto an = a.node();
        auto bn = b.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, bn, self, n]() {
            if (an->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) an->grad[i] += self->grad[i];
            }
            if (bn->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) bn->grad[i] += self->grad[i];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "sub");
    Tensor<T> out = op_result<T>(a.shape(), {a, b});
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        out.values()[i] = a.values()[i] - b.values()[i];
    }
    if (out.requires_grad()) {
        auto an = a.node();
        auto bn = b.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, bn, self, n]() {
            if (an->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) an->grad[i] += self->grad[i];
            }
            if (bn->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) bn->grad[i] -= self->grad[i];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "mul");
    Tensor<T> out = op_result<T>(a.shape(), {a, b});
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        out.values()[i] = a.values()[i] * b.values()[i];
    }
    if (out.requires_grad()) {
        auto an = a.node();
        auto bn = b.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, bn, self, n]() {
            if (an->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) an->grad[i] += self->grad[i] * bn->values[i];
            }
            if (bn->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) bn->grad[i] += self->grad[i] * an->values[i];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    Tensor<T> out = op_result<T>(a.shape(), {a});
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        out.values()[i] = a.values()[i] * c;
    }
    if (out.requires_grad()) {
        auto an = a.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, self, c, n]() {
            for (std::size_t i = 0; i < n; ++i) an->grad[i] += self->grad[i] * c;
        };
    }
    return out;
}

template <class T>
Tensor<T> add_rowvec(const Tensor<T>& a, const Tensor<T>& v) {
    require_rank(a, 2, "add_rowvec");
    require_rank(v, 1, "add_rowvec");
    const int R = a.rows(), C = a.cols();
    if (v.cols() != C) {
        throw ShapeError("add_rowvec: vector width " + std::to_string(v.cols()) +
                         " does not match matrix width " + std::to_string(C));
    }
    Tensor<T> out = op_result<T>(a.shape(), {a, v});
    for (int r = 0; r < R; ++r) {
        for (int c = 0; c < C; ++c) {
            out.values()[r * C + c] = a.values()[r * C + c] + v.values()[c];
        }
    }
    if (out.requires_grad()) {
        auto an = a.node();
        auto vn = v.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, vn, self, R, C]() {
            if (an->requires_grad) {
                for (std::size_t i = 0; i < static_cast<std::size_t>(R) * C; ++i) {
                    an->grad[i] += self->grad[i];
                }
            }
            if (vn->requires_grad) {
                for (int r = 0; r < R; ++r) {
                    for (int c = 0; c < C; ++c) vn->grad[c] += self->grad[r * C + c];
                }
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const int M = a.rows(), K = a.cols(), N = b.cols();
    if (b.rows() != K) {
        throw ShapeError("matmul: inner dims differ, " + shape_str<T>(a.shape()) + " . " +
                         shape_str<T>(b.shape()));
    }
    Tensor<T> out = op_result<T>({M, N}, {a, b});
    const T* A = a.values().data();
    const T* B = b.values().data();
    T* O = out.values().data();
    for (int i = 0; i < M; ++i) {
        for (int k = 0; k < K; ++k) {
            const T aik = A[i * K + k];
            if (aik == T(0)) continue;
            const T* brow = B + k * N;
            T* orow = O + i * N;
            for (int j = 0; j < N; ++j) orow[j] += aik * brow[j];
        }
    }
    if (out.requires_grad()) {
        auto an = a.node();
        auto bn = b.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, bn, self, M, K, N]() {
            const T* G = self->grad.data();
            if (an->requires_grad) {
                const T* B = bn->values.data();
                for (int i = 0; i < M; ++i) {
                    for (int k = 0; k < K; ++k) {
                        T acc = T(0);
                        const T* grow = G + i * N;
                        const T* brow = B + k * N;
                        for (int j = 0; j < N; ++j) acc += grow[j] * brow[j];
                        an->grad[i * K + k] += acc;
                    }
                }
            }
            if (bn->requires_grad) {
                const T* A = an->values.data();
                for (int i = 0; i < M; ++i) {
                    const T* grow = G + i * N;
                    for (int k = 0; k < K; ++k) {
                        const T aik = A[i * K + k];
                        if (aik == T(0)) continue;
                        T* brow = bn->grad.data() + k * N;
                        for (int j = 0; j < N; ++j) brow[j] += aik * grow[j];
                    }
                }
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank(a, 2, "matmul_nt");
    require_rank(b, 2, "matmul_nt");
    const int M = a.rows(), K = a.cols(), N = b.rows();
    if (b.cols() != K) {
        throw ShapeError("matmul_nt: inner dims differ, " + shape_str<T>(a.shape()) + " . " +
                         shape_str<T>(b.shape()) + "^T");
    }
    Tensor<T> out = op_result<T>({M, N}, {a, b});
    const T* A = a.values().data();
    const T* B = b.values().data();
    T* O = out.values().data();
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < N; ++j) {
            T acc = T(0);
            const T* arow = A + i * K;
            const T* brow = B + j * K;
            for (int k = 0; k < K; ++k) acc += arow[k] * brow[k];
            O[i * N + j] = acc;
        }
    }
    if (out.requires_grad()) {
        auto an = a.node();
        auto bn = b.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, bn, self, M, K, N]() {
            const T* G = self->grad.data();
            if (an->requires_grad) {
                const T* B = bn->values.data();
                for (int i = 0; i < M; ++i) {
                    for (int j = 0; j < N; ++j) {
                        const T g = G[i * N + j];
                        if (g == T(0)) continue;
                        const T* brow = B + j * K;
                        T* arow = an->grad.data() + i * K;
                        for (int k = 0; k < K; ++k) arow[k] += g * brow[k];
                    }
                }
            }
            if (bn->requires_grad) {
                const T* A = an->values.data();
                for (int i = 0; i < M; ++i) {
                    const T* arow = A + i * K;
                    for (int j = 0; j < N; ++j) {
                        const T g = G[i * N + j];
                        if (g == T(0)) continue;
                        T* brow = bn->grad.data() + j * K;
                        for (int k = 0; k < K; ++k) brow[k] += g * arow[k];
                    }
                }
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> matvec(const Tensor<T>& m, const Tensor<T>& v) {
    require_rank(m, 2, "matvec");
    require_rank(v, 1, "matvec");
    const int R = m.rows(), C = m.cols();
    if (v.cols() != C) {
        throw ShapeError("matvec: vector length " + std::to_string(v.cols()) +
                         " does not match matrix width " + std::to_string(C));
    }
    Tensor<T> out = op_result<T>({R}, {m, v});
    for (int r = 0; r < R; ++r) {
        T acc = T(0);
        for (int c = 0; c < C; ++c) acc += m.values()[r * C + c] * v.values()[c];
        out.values()[r] = acc;
    }
    if (out.requires_grad()) {
        auto mn = m.node();
        auto vn = v.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [mn, vn, self, R, C]() {
            if (mn->requires_grad) {
                for (int r = 0; r < R; ++r) {
                    const T g = self->grad[r];
                    for (int c = 0; c < C; ++c) mn->grad[r * C + c] += g * vn->values[c];
                }
            }
            if (vn->requires_grad) {
                for (int r = 0; r < R; ++r) {
                    const T g = self->grad[r];
                    for (int c = 0; c < C; ++c) vn->grad[c] += g * mn->values[r * C + c];
                }
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
    Tensor<T> out = op_result<T>(a.shape(), {a});
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        out.values()[i] = a.values()[i] > T(0) ? a.values()[i] : T(0);
    }
    if (out.requires_grad()) {
        auto an = a.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, self, n]() {
            for (std::size_t i = 0; i < n; ++i) {
                if (an->values[i] > T(0)) an->grad[i] += self->grad[i];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> gelu(const Tensor<T>& a) {
    constexpr double k0 = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double k1 = 0.044715;
    Tensor<T> out = op_result<T>(a.shape(), {a});
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(a.values()[i]);
        const double t = std::tanh(k0 * (x + k1 * x * x * x));
        out.values()[i] = static_cast<T>(0.5 * x * (1.0 + t));
    }
    if (out.requires_grad()) {
        auto an = a.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, self, n]() {
            for (std::size_t i = 0; i < n; ++i) {
                const double x = static_cast<double>(an->values[i]);
                const double t = std::tanh(k0 * (x + k1 * x * x * x));
                const double du = k0 * (1.0 + 3.0 * k1 * x * x);
                const double dydx = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
                an->grad[i] += self->grad[i] * static_cast<T>(dydx);
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> softmax_rows(const Tensor<T>& a) {
    const int R = a.rows(), C = a.cols();
    std::vector<int> valid(static_cast<std::size_t>(R), C);
    return softmax_rows_masked(a, valid);
}

template <class T>
Tensor<T> softmax_rows_masked(const Tensor<T>& a, const std::vector<int>& valid) {
    const int R = a.rows(), C = a.cols();
    if (static_cast<int>(valid.size()) != R) {
        throw ShapeError("softmax_rows_masked: valid count list has " +
                         std::to_string(valid.size()) + " entries for " + std::to_string(R) +
                         " rows");
    }
    for (int r = 0; r < R; ++r) {
        if (valid[r] < 1 || valid[r] > C) {
            throw IndexError("softmax_rows_masked: row " + std::to_string(r) +
                             " valid count " + std::to_string(valid[r]) + " outside [1," +
                             std::to_string(C) + "]");
        }
    }
    Tensor<T> out = op_result<T>(a.shape(), {a});
    for (int r = 0; r < R; ++r) {
        const int V = valid[r];
        const T* x = a.values().data() + static_cast<std::size_t>(r) * C;
        T* p = out.values().data() + static_cast<std::size_t>(r) * C;
        T m = x[0];
        for (int c = 1; c < V; ++c) m = std::max(m, x[c]);
        T s = T(0);
        for (int c = 0; c < V; ++c) {
            p[c] = std::exp(x[c] - m);
            s += p[c];
        }
        for (int c = 0; c < V; ++c) p[c] /= s;
        // columns >= V stay exactly zero
    }
    if (out.requires_grad()) {
        auto an = a.node();
        Node<T>* self = out.node().get();
        std::vector<int> vcopy = valid;
        out.check().backward_fn = [an, self, vcopy, R, C]() {
            for (int r = 0; r < R; ++r) {
                const int V = vcopy[r];
                const T* p = self->values.data() + static_cast<std::size_t>(r) * C;
                const T* g = self->grad.data() + static_cast<std::size_t>(r) * C;
                T dot = T(0);
                for (int c = 0; c < V; ++c) dot += g[c] * p[c];
                T* da = an->grad.data() + static_cast<std::size_t>(r) * C;
                for (int c = 0; c < V; ++c) da[c] += p[c] * (g[c] - dot);
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> log_softmax_rows(const Tensor<T>& a) {
    const int R = a.rows(), C = a.cols();
    Tensor<T> out = op_result<T>(a.shape(), {a});
    for (int r = 0; r < R; ++r) {
        const T* x = a.values().data() + static_cast<std::size_t>(r) * C;
        T* y = out.values().data() + static_cast<std::size_t>(r) * C;
        T m = x[0];
        for (int c = 1; c < C; ++c) m = std::max(m, x[c]);
        T s = T(0);
        for (int c = 0; c < C; ++c) s += std::exp(x[c] - m);
        const T lse = m + std::log(s);
        for (int c = 0; c < C; ++c) y[c] = x[c] - lse;
    }
    if (out.requires_grad()) {
        auto an = a.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, self, R, C]() {
            for (int r = 0; r < R; ++r) {
                const T* y = self->values.data() + static_cast<std::size_t>(r) * C;
                const T* g = self->grad.data() + static_cast<std::size_t>(r) * C;
                T gsum = T(0);
                for (int c = 0; c < C; ++c) gsum += g[c];
                T* da = an->grad.data() + static_cast<std::size_t>(r) * C;
                for (int c = 0; c < C; ++c) da[c] += g[c] - std::exp(y[c]) * gsum;
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> layer_norm_rows(const Tensor<T>& a, const Tensor<T>& gain, const Tensor<T>& bias,
                          T eps) {
    require_rank(a, 2, "layer_norm_rows");
    require_rank(gain, 1, "layer_norm_rows");
    require_rank(bias, 1, "layer_norm_rows");
    const int R = a.rows(), C = a.cols();
    if (gain.cols() != C || bias.cols() != C) {
        throw ShapeError("layer_norm_rows: gain/bias width must equal row width " +
                         std::to_string(C));
    }
    Tensor<T> out = op_result<T>(a.shape(), {a, gain, bias});
    std::vector<T> xhat(static_cast<std::size_t>(R) * C);
    std::vector<T> inv_std(static_cast<std::size_t>(R));
    for (int r = 0; r < R; ++r) {
        const T* x = a.values().data() + static_cast<std::size_t>(r) * C;
        T mu = T(0);
        for (int c = 0; c < C; ++c) mu += x[c];
        mu /= T(C);
        T var = T(0);
        for (int c = 0; c < C; ++c) {
            const T d = x[c] - mu;
            var += d * d;
        }
        var /= T(C);
        const T inv = T(1) / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(r)] = inv;
        T* xh = xhat.data() + static_cast<std::size_t>(r) * C;
        T* y = out.values().data() + static_cast<std::size_t>(r) * C;
        for (int c = 0; c < C; ++c) {
            xh[c] = (x[c] - mu) * inv;
            y[c] = gain.values()[c] * xh[c] + bias.values()[c];
        }
    }
    if (out.requires_grad()) {
        auto an = a.node();
        auto gn = gain.node();
        auto bn = bias.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, gn, bn, self, xhat = std::move(xhat),
                                   inv_std = std::move(inv_std), R, C]() {
            for (int r = 0; r < R; ++r) {
                const T* g = self->grad.data() + static_cast<std::size_t>(r) * C;
                const T* xh = xhat.data() + static_cast<std::size_t>(r) * C;
                if (gn->requires_grad) {
                    for (int c = 0; c < C; ++c) gn->grad[c] += g[c] * xh[c];
                }
                if (bn->requires_grad) {
                    for (int c = 0; c < C; ++c) bn->grad[c] += g[c];
                }
                if (an->requires_grad) {
                    T m1 = T(0), m2 = T(0);
                    for (int c = 0; c < C; ++c) {
                        const T gg = g[c] * gn->values[c];
                        m1 += gg;
                        m2 += gg * xh[c];
                    }
                    m1 /= T(C);
                    m2 /= T(C);
                    const T inv = inv_std[static_cast<std::size_t>(r)];
                    T* da = an->grad.data() + static_cast<std::size_t>(r) * C;
                    for (int c = 0; c < C; ++c) {
                        const T gg = g[c] * gn->values[c];
                        da[c] += (gg - m1 - xh[c] * m2) * inv;
                    }
                }
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> gather_rows(const Tensor<T>& table, const std::vector<int>& ids) {
    require_rank(table, 2, "gather_rows");
    const int R = table.rows(), C = table.cols();
    for (int id : ids) {
        if (id < 0 || id >= R) {
            throw IndexError("gather_rows: id " + std::to_string(id) + " outside table of " +
                             std::to_string(R) + " rows");
        }
    }
    const int N = static_cast<int>(ids.size());
    Tensor<T> out = op_result<T>({N, C}, {table});
    for (int i = 0; i < N; ++i) {
        const T* src = table.values().data() + static_cast<std::size_t>(ids[i]) * C;
        T* dst = out.values().data() + static_cast<std::size_t>(i) * C;
        std::copy(src, src + C, dst);
    }
    if (out.requires_grad()) {
        auto tn = table.node();
        Node<T>* self = out.node().get();
        std::vector<int> idc = ids;
        out.check().backward_fn = [tn, self, idc, N, C]() {
            for (int i = 0; i < N; ++i) {
                const T* g = self->grad.data() + static_cast<std::size_t>(i) * C;
                T* dst = tn->grad.data() + static_cast<std::size_t>(idc[i]) * C;
                for (int c = 0; c < C; ++c) dst[c] += g[c];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank(a, 2, "concat_rows");
    require_rank(b, 2, "concat_rows");
    if (a.cols() != b.cols()) {
        throw ShapeError("concat_rows: column counts differ, " + shape_str<T>(a.shape()) +
                         " vs " + shape_str<T>(b.shape()));
    }
    const int Ra = a.rows(), Rb = b.rows(), C = a.cols();
    Tensor<T> out = op_result<T>({Ra + Rb, C}, {a, b});
    std::copy(a.values().begin(), a.values().end(), out.values().begin());
    std::copy(b.values().begin(), b.values().end(),
              out.values().begin() + static_cast<std::size_t>(Ra) * C);
    if (out.requires_grad()) {
        auto an = a.node();
        auto bn = b.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, bn, self, Ra, Rb, C]() {
            if (an->requires_grad) {
                for (std::size_t i = 0; i < static_cast<std::size_t>(Ra) * C; ++i) {
                    an->grad[i] += self->grad[i];
                }
            }
            if (bn->requires_grad) {
                const std::size_t off = static_cast<std::size_t>(Ra) * C;
                for (std::size_t i = 0; i < static_cast<std::size_t>(Rb) * C; ++i) {
                    bn->grad[i] += self->grad[off + i];
                }
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank(a, 2, "concat_cols");
    require_rank(b, 2, "concat_cols");
    if (a.rows() != b.rows()) {
        throw ShapeError("concat_cols: row counts differ, " + shape_str<T>(a.shape()) + " vs " +
                         shape_str<T>(b.shape()));
    }
    const int R = a.rows(), Ca = a.cols(), Cb = b.cols();
    Tensor<T> out = op_result<T>({R, Ca + Cb}, {a, b});
    for (int r = 0; r < R; ++r) {
        const T* pa = a.values().data() + static_cast<std::size_t>(r) * Ca;
        const T* pb = b.values().data() + static_cast<std::size_t>(r) * Cb;
        T* po = out.values().data() + static_cast<std::size_t>(r) * (Ca + Cb);
        std::copy(pa, pa + Ca, po);
        std::copy(pb, pb + Cb, po + Ca);
    }
    if (out.requires_grad()) {
        auto an = a.node();
        auto bn = b.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, bn, self, R, Ca, Cb]() {
            for (int r = 0; r < R; ++r) {
                const T* g = self->grad.data() + static_cast<std::size_t>(r) * (Ca + Cb);
                if (an->requires_grad) {
                    T* da = an->grad.data() + static_cast<std::size_t>(r) * Ca;
                    for (int c = 0; c < Ca; ++c) da[c] += g[c];
                }
                if (bn->requires_grad) {
                    T* db = bn->grad.data() + static_cast<std::size_t>(r) * Cb;
                    for (int c = 0; c < Cb; ++c) db[c] += g[Ca + c];
                }
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> concat_vec(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank(a, 1, "concat_vec");
    require_rank(b, 1, "concat_vec");
    const int Na = a.cols(), Nb = b.cols();
    Tensor<T> out = op_result<T>({Na + Nb}, {a, b});
    std::copy(a.values().begin(), a.values().end(), out.values().begin());
    std::copy(b.values().begin(), b.values().end(), out.values().begin() + Na);
    if (out.requires_grad()) {
        auto an = a.node();
        auto bn = b.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, bn, self, Na, Nb]() {
            if (an->requires_grad) {
                for (int i = 0; i < Na; ++i) an->grad[i] += self->grad[i];
            }
            if (bn->requires_grad) {
                for (int i = 0; i < Nb; ++i) bn->grad[i] += self->grad[Na + i];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> slice_rows(const Tensor<T>& a, int r0, int r1) {
    require_rank(a, 2, "slice_rows");
    const int R = a.rows(), C = a.cols();
    if (r0 < 0 || r1 > R || r0 >= r1) {
        throw IndexError("slice_rows: range [" + std::to_string(r0) + "," + std::to_string(r1) +
                         ") invalid for " + std::to_string(R) + " rows");
    }
    const int N = r1 - r0;
    Tensor<T> out = op_result<T>({N, C}, {a});
    std::copy(a.values().begin() + static_cast<std::size_t>(r0) * C,
              a.values().begin() + static_cast<std::size_t>(r1) * C, out.values().begin());
    if (out.requires_grad()) {
        auto an = a.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, self, r0, N, C]() {
            const std::size_t off = static_cast<std::size_t>(r0) * C;
            for (std::size_t i = 0; i < static_cast<std::size_t>(N) * C; ++i) {
                an->grad[off + i] += self->grad[i];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> slice_cols(const Tensor<T>& a, int c0, int c1) {
    require_rank(a, 2, "slice_cols");
    const int R = a.rows(), C = a.cols();
    if (c0 < 0 || c1 > C || c0 >= c1) {
        throw IndexError("slice_cols: range [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") invalid for " + std::to_string(C) + " cols");
    }
    const int N = c1 - c0;
    Tensor<T> out = op_result<T>({R, N}, {a});
    for (int r = 0; r < R; ++r) {
        const T* src = a.values().data() + static_cast<std::size_t>(r) * C + c0;
        std::copy(src, src + N, out.values().data() + static_cast<std::size_t>(r) * N);
    }
    if (out.requires_grad()) {
        auto an = a.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, self, c0, R, C, N]() {
            for (int r = 0; r < R; ++r) {
                const T* g = self->grad.data() + static_cast<std::size_t>(r) * N;
                T* da = an->grad.data() + static_cast<std::size_t>(r) * C + c0;
                for (int c = 0; c < N; ++c) da[c] += g[c];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> slice_vec(const Tensor<T>& a, int i0, int i1) {
    require_rank(a, 1, "slice_vec");
    const int N = a.cols();
    if (i0 < 0 || i1 > N || i0 >= i1) {
        throw IndexError("slice_vec: range [" + std::to_string(i0) + "," + std::to_string(i1) +
                         ") invalid for length " + std::to_string(N));
    }
    Tensor<T> out = op_result<T>({i1 - i0}, {a});
    std::copy(a.values().begin() + i0, a.values().begin() + i1, out.values().begin());
    if (out.requires_grad()) {
        auto an = a.node();
        Node<T>* self = out.node().get();
        const int n = i1 - i0;
        out.check().backward_fn = [an, self, i0, n]() {
            for (int i = 0; i < n; ++i) an->grad[i0 + i] += self->grad[i];
        };
    }
    return out;
}

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
    Tensor<T> out = op_result<T>({}, {a});
    T acc = T(0);
    for (T v : a.values()) acc += v;
    out.values()[0] = acc;
    if (out.requires_grad()) {
        auto an = a.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, self]() {
            const T g = self->grad[0];
            for (auto& d : an->grad) d += g;
        };
    }
    return out;
}

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
    if (a.numel() == 0) {
        throw ShapeError("mean of an empty tensor");
    }
    Tensor<T> out = op_result<T>({}, {a});
    T acc = T(0);
    for (T v : a.values()) acc += v;
    const T n = static_cast<T>(a.numel());
    out.values()[0] = acc / n;
    if (out.requires_grad()) {
        auto an = a.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, self, n]() {
            const T g = self->grad[0] / n;
            for (auto& d : an->grad) d += g;
        };
    }
    return out;
}

template <class T>
Tensor<T> dropout(const Tensor<T>& a, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0) {
        throw ConfigError("dropout rate must lie in [0,1), got " + std::to_string(p));
    }
    if (p == 0.0 || !grad_enabled()) {
        return a;
    }
    Tensor<T> out = op_result<T>(a.shape(), {a});
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    std::vector<T> mask(a.numel());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.uniform() < p ? T(0) : keep_scale;
        out.values()[i] = a.values()[i] * mask[i];
    }
    if (out.requires_grad()) {
        auto an = a.node();
        Node<T>* self = out.node().get();
        out.check().backward_fn = [an, self, mask = std::move(mask)]() {
            for (std::size_t i = 0; i < mask.size(); ++i) {
                an->grad[i] += self->grad[i] * mask[i];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> cross_entropy_rows(const Tensor<T>& logits, const std::vector<int>& targets,
                             int ignore_index) {
    const int R = logits.rows(), C = logits.cols();
    if (static_cast<int>(targets.size()) != R) {
        throw ShapeError("cross_entropy_rows: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(R) + " rows");
    }
    int scored = 0;
    for (int t : targets) {
        if (t == ignore_index) continue;
        if (t < 0 || t >= C) {
            throw IndexError("cross_entropy_rows: target " + std::to_string(t) +
                             " outside [0," + std::to_string(C) + ")");
        }
        ++scored;
    }
    if (scored == 0) {
        throw DataError("cross_entropy_rows: every row is ignored");
    }
    Tensor<T> out = op_result<T>({}, {logits});
    std::vector<T> probs(static_cast<std::size_t>(R) * C, T(0));
    T total = T(0);
    for (int r = 0; r < R; ++r) {
        if (targets[static_cast<std::size_t>(r)] == ignore_index) continue;
        const T* x = logits.values().data() + static_cast<std::size_t>(r) * C;
        T m = x[0];
        for (int c = 1; c < C; ++c) m = std::max(m, x[c]);
        T s = T(0);
        T* p = probs.data() + static_cast<std::size_t>(r) * C;
        for (int c = 0; c < C; ++c) {
            p[c] = std::exp(x[c] - m);
            s += p[c];
        }
        for (int c = 0; c < C; ++c) p[c] /= s;
        const T lse = m + std::log(s);
        total += lse - x[targets[static_cast<std::size_t>(r)]];
    }
    out.values()[0] = total / static_cast<T>(scored);
    if (out.requires_grad()) {
        auto ln = logits.node();
        Node<T>* self = out.node().get();
        std::vector<int> tc = targets;
        out.check().backward_fn = [ln, self, tc, probs = std::move(probs), ignore_index, R, C,
                                   scored]() {
            const T g = self->grad[0] / static_cast<T>(scored);
            for (int r = 0; r < R; ++r) {
                const int t = tc[static_cast<std::size_t>(r)];
                if (t == ignore_index) continue;
                const T* p = probs.data() + static_cast<std::size_t>(r) * C;
                T* da = ln->grad.data() + static_cast<std::size_t>(r) * C;
                for (int c = 0; c < C; ++c) {
                    da[c] += g * (p[c] - (c == t ? T(1) : T(0)));
                }
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, int target) {
    // the single-row form has no ignore sentinel; any out-of-range target is
    // a caller bug
    if (target < 0 || target >= logits.cols()) {
        throw IndexError("cross_entropy: target " + std::to_string(target) + " outside [0," +
                         std::to_string(logits.cols()) + ")");
    }
    return cross_entropy_rows(logits, std::vector<int>{target}, -1);
}

template <class T>
int argmax(const std::vector<T>& v) {
    if (v.empty()) {
        throw IndexError("argmax of an empty vector");
    }
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) {
            best = i;
        }
    }
    return best;
}

template <class T>
T logsumexp(const std::vector<T>& v) {
    if (v.empty()) {
        throw IndexError("logsumexp of an empty vector");
    }
    T m = v[0];
    for (T x : v) m = std::max(m, x);
    T s = T(0);
    for (T x : v) s += std::exp(x - m);
    return m + std::log(s);
}

#define UPROMPT_INSTANTIATE_OPS(T)                                                               \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                               \
    template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                               \
    template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                               \
    template Tensor<T> scale<T>(const Tensor<T>&, T);                                            \
    template Tensor<T> add_rowvec<T>(const Tensor<T>&, const Tensor<T>&);                        \
    template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                            \
    template Tensor<T> matmul_nt<T>(const Tensor<T>&, const Tensor<T>&);                         \
    template Tensor<T> matvec<T>(const Tensor<T>&, const Tensor<T>&);                            \
    template Tensor<T> relu<T>(const Tensor<T>&);                                                \
    template Tensor<T> gelu<T>(const Tensor<T>&);                                                \
    template Tensor<T> softmax_rows<T>(const Tensor<T>&);                                        \
    template Tensor<T> softmax_rows_masked<T>(const Tensor<T>&, const std::vector<int>&);        \
    template Tensor<T> log_softmax_rows<T>(const Tensor<T>&);                                    \
    template Tensor<T> layer_norm_rows<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                          T);                                                    \
    template Tensor<T> gather_rows<T>(const Tensor<T>&, const std::vector<int>&);                \
    template Tensor<T> concat_rows<T>(const Tensor<T>&, const Tensor<T>&);                       \
    template Tensor<T> concat_cols<T>(const Tensor<T>&, const Tensor<T>&);                       \
    template Tensor<T> concat_vec<T>(const Tensor<T>&, const Tensor<T>&);                        \
    template Tensor<T> slice_rows<T>(const Tensor<T>&, int, int);                                \
    template Tensor<T> slice_cols<T>(const Tensor<T>&, int, int);                                \
    template Tensor<T> slice_vec<T>(const Tensor<T>&, int, int);                                 \
    template Tensor<T> sum<T>(const Tensor<T>&);                                                 \
    template Tensor<T> mean<T>(const Tensor<T>&);                                                \
    template Tensor<T> dropout<T>(const Tensor<T>&, double, Rng&);                               \
    template Tensor<T> cross_entropy_rows<T>(const Tensor<T>&, const std::vector<int>&, int);    \
    template Tensor<T> cross_entropy<T>(const Tensor<T>&, int);                                  \
    template int argmax<T>(const std::vector<T>&);                                               \
    template T logsumexp<T>(const std::vector<T>&);

UPROMPT_INSTANTIATE_OPS(float)
UPROMPT_INSTANTIATE_OPS(double)

#undef UPROMPT_INSTANTIATE_OPS

}  // namespace uprompt
