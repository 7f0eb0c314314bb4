#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "nar/core/error.hpp"
#include "nar/numerics/tensor.hpp"

namespace nar::ad {

class Tape;

/// Handle to a value recorded on a tape.
class Var {
public:
    Var() = default;

    Tape* tape() const { return tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

    inline const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Backward rule: receives the tape and the gradient of the recorded output, and
/// accumulates into the inputs' gradient buffers.
using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

/// Wengert list for reverse-mode differentiation. Nodes are appended in evaluation order, so
/// the list is topologically sorted by construction; backward() walks it once in reverse.
///
/// Not thread-safe. Independent tapes may run concurrently over shared read-only tensors.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Value with no gradient.
    Var constant(Tensor value) { return push(std::move(value), nullptr, false, {}); }

    /// Owned leaf that receives a gradient.
    Var variable(Tensor value) { return push(std::move(value), nullptr, true, {}); }

    /// Borrowed leaf that receives a gradient. `external` must outlive the tape.
    Var watch(const Tensor& external) { return push(Tensor(), &external, true, {}); }

    /// Borrowed leaf without a gradient. `external` must outlive the tape.
    Var borrow(const Tensor& external) { return push(Tensor(), &external, false, {}); }

    /// Records a primitive application. The output requires a gradient when any input does;
    /// `fn` is dropped otherwise.
    Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
        bool needs_grad = false;
        for (const auto& v : inputs) {
            check_owner(v);
            needs_grad = needs_grad || nodes_[v.id()].requires_grad;
        }
        if (debug_finite_ && !value.all_finite()) {
            throw InvalidArgument("non-finite value produced on tape (node " + std::to_string(nodes_.size()) + ")");
        }
        return push(std::move(value), nullptr, needs_grad, needs_grad ? std::move(fn) : BackwardFn{});
    }
    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
        return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
    }

    const Tensor& value(std::size_t id) const {
        const Node& n = nodes_[id];
        return n.external ? *n.external : n.value;
    }
    bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }

    /// Gradient buffer of `v`, zero-initialised on first access. For use inside backward rules.
    Tensor& grad_buffer(const Var& v) {
        Node& n = nodes_[v.id()];
        if (!n.has_grad) {
            n.grad = Tensor(value(v.id()).shape());
            n.has_grad = true;
        }
        return n.grad;
    }

    /// Reverse pass from a scalar `loss`. May be called once per tape.
    void backward(const Var& loss) {
        check_owner(loss);
        if (value(loss.id()).size() != 1) {
            throw InvalidArgument("backward: loss must be a scalar, got shape " + shape_string(loss.shape()));
        }
        Tensor& seed = grad_buffer(loss);
        seed[0] += 1.0;
        for (std::size_t i = loss.id() + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.has_grad || !n.backward) continue;
            n.backward(*this, n.grad);
        }
    }

    /// Gradient of the last backward() with respect to `v`; zeros when `v` was not reached.
    Tensor gradient(const Var& v) const {
        check_owner(v);
        const Node& n = nodes_[v.id()];
        return n.has_grad ? n.grad : Tensor(value(v.id()).shape());
    }

    std::size_t size() const { return nodes_.size(); }

    /// Throw on any non-finite forward value (off by default; enabled in debug builds).
    void set_debug_finite(bool on) { debug_finite_ = on; }

private:
    struct Node {
        Tensor value;
        const Tensor* external = nullptr;
        Tensor grad;
        bool has_grad = false;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Var push(Tensor value, const Tensor* external, bool needs_grad, BackwardFn fn) {
        Node n;
        n.value = std::move(value);
        n.external = external;
        n.requires_grad = needs_grad;
        n.backward = std::move(fn);
        nodes_.push_back(std::move(n));
        return Var(this, nodes_.size() - 1);
    }

    void check_owner(const Var& v) const {
        if (v.tape() != this) throw InvalidArgument("variable belongs to a different tape");
    }

    std::deque<Node> nodes_;
#ifdef NDEBUG
    bool debug_finite_ = false;
#else
    bool debug_finite_ = true;
#endif
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

}  // namespace nar::ad
