#include "uprompt/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace uprompt {

namespace {
thread_local int no_grad_depth = 0;
}

NoGradGuard::NoGradGuard() { ++no_grad_depth; }
NoGradGuard::~NoGradGuard() { --no_grad_depth; }

bool grad_enabled() { return no_grad_depth == 0; }

template <class T>
std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) {
            throw ShapeError("negative dimension in shape");
        }
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

template <class T>
std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

template <class T>
Tensor<T> Tensor<T>::zeros(std::vector<int> shape) {
    auto node = std::make_shared<Node<T>>();
    const std::size_t n = shape_numel<T>(shape);
    node->shape = std::move(shape);
    node->values.assign(n, T(0));
    return Tensor(std::move(node));
}

template <class T>
Tensor<T> Tensor<T>::full(std::vector<int> shape, T value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.values().begin(), t.values().end(), value);
    return t;
}

template <class T>
Tensor<T> Tensor<T>::from(std::vector<int> shape, std::vector<T> values) {
    if (shape_numel<T>(shape) != values.size()) {
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str<T>(shape));
    }
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    return Tensor(std::move(node));
}

template <class T>
Tensor<T> Tensor<T>::scalar(T value) {
    return from({}, {value});
}

template <class T>
Tensor<T> Tensor<T>::randn(std::vector<int> shape, Rng& rng, T stddev) {
    Tensor t = zeros(std::move(shape));
    for (auto& v : t.values()) {
        v = static_cast<T>(rng.normal()) * stddev;
    }
    return t;
}

template <class T>
int Tensor<T>::rows() const {
    const auto& s = shape();
    if (s.size() == 2) return s[0];
    if (s.size() == 1) return 1;
    throw ShapeError("rows() needs rank 1 or 2, got shape " + shape_str<T>(s));
}

template <class T>
int Tensor<T>::cols() const {
    const auto& s = shape();
    if (s.size() == 2) return s[1];
    if (s.size() == 1) return s[0];
    throw ShapeError("cols() needs rank 1 or 2, got shape " + shape_str<T>(s));
}

template <class T>
T Tensor<T>::item() const {
    if (numel() != 1) {
        throw ShapeError("item() needs exactly one element, tensor has " +
                         std::to_string(numel()));
    }
    return values()[0];
}

template <class T>
T Tensor<T>::at(int i) const {
    if (i < 0 || static_cast<std::size_t>(i) >= numel()) {
        throw IndexError("flat index " + std::to_string(i) + " out of range");
    }
    return values()[static_cast<std::size_t>(i)];
}

template <class T>
T Tensor<T>::at(int r, int c) const {
    const int R = rows(), C = cols();
    if (r < 0 || r >= R || c < 0 || c >= C) {
        throw IndexError("index (" + std::to_string(r) + "," + std::to_string(c) +
                         ") out of range for " + shape_str<T>(shape()));
    }
    return values()[static_cast<std::size_t>(r) * C + c];
}

template <class T>
Tensor<T>& Tensor<T>::set_requires_grad(bool v) {
    // grad stays unallocated until a backward pass actually reaches the node
    check().requires_grad = v;
    return *this;
}

template <class T>
Tensor<T>& Tensor<T>::set_trainable(bool v) {
    check().trainable = v;
    if (v) set_requires_grad(true);
    return *this;
}

template <class T>
Tensor<T> Tensor<T>::detached() const {
    return from(shape(), values());
}

namespace {

// Iterative post-order over parents; avoids recursion depth limits on long
// training graphs.
template <class T>
std::vector<Node<T>*> topo_order(Node<T>* root) {
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node<T>* parent = node->parents[idx].get();
            ++idx;
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;  // children appear after all their parents are emitted
}

}  // namespace

template <class T>
void Tensor<T>::backward() {
    if (numel() != 1) {
        throw ShapeError("backward() without a seed needs a scalar output");
    }
    backward({T(1)});
}

template <class T>
void Tensor<T>::backward(const std::vector<T>& seed) {
    Node<T>& root = check();
    if (!root.requires_grad) {
        throw NumericError("backward() on a tensor that does not require grad");
    }
    if (seed.size() != root.numel()) {
        throw ShapeError("seed gradient size does not match output size");
    }
    auto order = topo_order<T>(&root);
    for (Node<T>* n : order) {
        if (n->grad.size() != n->numel()) {
            n->grad.assign(n->numel(), T(0));
        } else if (n->backward_fn || !n->parents.empty()) {
            // interior grads are per-pass scratch; only leaves accumulate
            // across backward calls
            std::fill(n->grad.begin(), n->grad.end(), T(0));
        }
    }
    for (std::size_t i = 0; i < seed.size(); ++i) {
        root.grad[i] += seed[i];
    }
    // order holds parents-before-children; traverse children first
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) {
            (*it)->backward_fn();
        }
    }
}

template <class T>
void Tensor<T>::zero_grad_graph() {
    auto order = topo_order<T>(&check());
    for (Node<T>* n : order) {
        std::fill(n->grad.begin(), n->grad.end(), T(0));
    }
}

template std::size_t shape_numel<float>(const std::vector<int>&);
template std::size_t shape_numel<double>(const std::vector<int>&);
template std::string shape_str<float>(const std::vector<int>&);
template std::string shape_str<double>(const std::vector<int>&);
template class Tensor<float>;
template class Tensor<double>;

}  // namespace uprompt
