#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "uprompt/errors.hpp"
#include "uprompt/rng.hpp"

namespace uprompt {

/// While a guard is alive, newly built ops record no graph (inference mode).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

/// Shared storage behind a Tensor handle. Ops append parents and a backward
/// closure; Tensor::backward walks the graph once in reverse topological
/// order and accumulates into grad.
template <class T>
struct Node {
    std::vector<int> shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;
    bool trainable = false;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void()> backward_fn;

    std::size_t numel() const { return values.size(); }
};

/// Value-semantics handle over a shared autodiff node. Rank 0 (scalar),
/// 1 (vector) and 2 (row-major matrix) shapes are supported.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, T value);
    static Tensor from(std::vector<int> shape, std::vector<T> values);
    static Tensor scalar(T value);
    /// Independent normal entries, mean 0 and the given stddev.
    static Tensor randn(std::vector<int> shape, Rng& rng, T stddev = T(1));

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return check().shape; }
    int rank() const { return static_cast<int>(shape().size()); }
    std::size_t numel() const { return check().numel(); }
    /// Rows/cols of a rank-2 tensor (rank-1 counts as a single row).
    int rows() const;
    int cols() const;

    std::vector<T>& values() { return check().values; }
    const std::vector<T>& values() const { return check().values; }
    std::vector<T>& grad() { return check().grad; }
    const std::vector<T>& grad() const { return check().grad; }

    T item() const;
    T at(int i) const;
    T at(int r, int c) const;

    bool requires_grad() const { return check().requires_grad; }
    Tensor& set_requires_grad(bool v);
    bool trainable() const { return check().trainable; }
    /// Marks the tensor as an optimizer target (implies requires_grad).
    Tensor& set_trainable(bool v);

    /// Copy of the values with no graph attached.
    Tensor detached() const;

    /// Reverse accumulation from this node; tensor must be scalar-shaped
    /// unless a seed gradient of matching size is supplied.
    void backward();
    void backward(const std::vector<T>& seed);

    /// Clears grad on this node and every ancestor.
    void zero_grad_graph();

    std::shared_ptr<Node<T>> node() const { return node_; }
    Node<T>& check() const {
        if (!node_) {
            throw IndexError("tensor handle is empty");
        }
        return *node_;
    }

private:
    std::shared_ptr<Node<T>> node_;
};

template <class T>
std::size_t shape_numel(const std::vector<int>& shape);

template <class T>
std::string shape_str(const std::vector<int>& shape);

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace uprompt
