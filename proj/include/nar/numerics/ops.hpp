#pragma once

// Differentiable primitives over ad::Tape.
//
// Matrices are row-major; rank-1 tensors act as a single row. Binary elementwise ops accept
// equal shapes, a row vector broadcast over the leading axis, or a one-element tensor.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nar/core/error.hpp"
#include "nar/numerics/tape.hpp"
#include "nar/numerics/tensor.hpp"

namespace nar::ad {

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

inline ConstMap cmap(const Tensor& t) {
    return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
inline MutMap mmap(Tensor& t) {
    return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

inline Tape& same_tape(std::initializer_list<Var> vs) {
    Tape* t = nullptr;
    for (const auto& v : vs) {
        if (!v.valid()) throw InvalidArgument("uninitialised variable");
        if (t && v.tape() != t) throw InvalidArgument("variables from different tapes");
        t = v.tape();
    }
    return *t;
}

enum class Bcast { none, row, scalar };

inline Bcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() == b.rows() && a.cols() == b.cols()) return Bcast::none;
    if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::row;
    if (b.size() == 1) return Bcast::scalar;
    throw ShapeError(std::string(op) + ": cannot broadcast " + shape_string(b.shape()) + " onto " +
                     shape_string(a.shape()));
}

inline std::size_t bindex(Bcast k, std::size_t i, std::size_t cols) {
    switch (k) {
        case Bcast::none: return i;
        case Bcast::row: return i % cols;
        case Bcast::scalar: return 0;
    }
    return i;
}

/// Elementwise map; `dydx(x, y)` is the derivative given input x and output y.
template <class Fn, class Dfn>
Var unary(const Var& a, Fn f, Dfn dydx) {
    Tape& tape = *a.tape();
    const Tensor& x = a.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    return tape.record(std::move(out), {a}, [a, dydx, self = tape.size()](Tape& t, const Tensor& g) {
        const Tensor& xv = a.value();
        const Tensor& yv = t.value(self);
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dydx(xv[i], yv[i]);
    });
}

}  // namespace detail

/// a @ b for a [m x k], b [k x n].
inline Var matmul(const Var& a, const Var& b) {
    Tape& tape = detail::same_tape({a, b});
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (bv.rank() != 2 || av.cols() != bv.rows()) {
        throw ShapeError("matmul: " + shape_string(av.shape()) + " @ " + shape_string(bv.shape()));
    }
    Tensor out({av.rows(), bv.cols()});
    detail::mmap(out).noalias() = detail::cmap(av) * detail::cmap(bv);
    return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
        const auto gm = detail::cmap(g);
        if (t.requires_grad(a)) detail::mmap(t.grad_buffer(a)).noalias() += gm * detail::cmap(b.value()).transpose();
        if (t.requires_grad(b)) detail::mmap(t.grad_buffer(b)).noalias() += detail::cmap(a.value()).transpose() * gm;
    });
}

/// a @ b^T for a [m x k], b [n x k].
inline Var matmul_nt(const Var& a, const Var& b) {
    Tape& tape = detail::same_tape({a, b});
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.cols()) {
        throw ShapeError("matmul_nt: " + shape_string(av.shape()) + " @ " + shape_string(bv.shape()) + "^T");
    }
    Tensor out({av.rows(), bv.rows()});
    detail::mmap(out).noalias() = detail::cmap(av) * detail::cmap(bv).transpose();
    return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
        const auto gm = detail::cmap(g);
        if (t.requires_grad(a)) detail::mmap(t.grad_buffer(a)).noalias() += gm * detail::cmap(b.value());
        if (t.requires_grad(b)) detail::mmap(t.grad_buffer(b)).noalias() += gm.transpose() * detail::cmap(a.value());
    });
}

inline Var add(const Var& a, const Var& b) {
    Tape& tape = detail::same_tape({a, b});
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const auto k = detail::broadcast_kind(av, bv, "add");
    const std::size_t c = av.cols();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[detail::bindex(k, i, c)];
    return tape.record(std::move(out), {a, b}, [a, b, k, c](Tape& t, const Tensor& g) {
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.grad_buffer(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[detail::bindex(k, i, c)] += g[i];
        }
    });
}

inline Var sub(const Var& a, const Var& b) {
    Tape& tape = detail::same_tape({a, b});
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const auto k = detail::broadcast_kind(av, bv, "sub");
    const std::size_t c = av.cols();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[detail::bindex(k, i, c)];
    return tape.record(std::move(out), {a, b}, [a, b, k, c](Tape& t, const Tensor& g) {
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.grad_buffer(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[detail::bindex(k, i, c)] -= g[i];
        }
    });
}

/// Elementwise product.
inline Var mul(const Var& a, const Var& b) {
    Tape& tape = detail::same_tape({a, b});
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const auto k = detail::broadcast_kind(av, bv, "mul");
    const std::size_t c = av.cols();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[detail::bindex(k, i, c)];
    return tape.record(std::move(out), {a, b}, [a, b, k, c](Tape& t, const Tensor& g) {
        const Tensor& x = a.value();
        const Tensor& y = b.value();
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[detail::bindex(k, i, c)];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.grad_buffer(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[detail::bindex(k, i, c)] += g[i] * x[i];
        }
    });
}

/// alpha * a + beta.
inline Var affine(const Var& a, double alpha, double beta) {
    Tape& tape = *a.tape();
    const Tensor& av = a.value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = alpha * av[i] + beta;
    return tape.record(std::move(out), {a}, [a, alpha](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += alpha * g[i];
    });
}

inline Var scale(const Var& a, double alpha) { return affine(a, alpha, 0.0); }

inline Var relu(const Var& a) {
    return detail::unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline Var sigmoid(const Var& a) {
    return detail::unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

inline Var tanh(const Var& a) {
    return detail::unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

/// Row-wise softmax with max subtraction.
inline Var softmax_rows(const Var& a) {
    Tape& tape = *a.tape();
    const Tensor& x = a.value();
    const std::size_t r = x.rows(), c = x.cols();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < r; ++i) {
        const double* row = &x.data()[i * c];
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) m = std::max(m, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            out[i * c + j] = std::exp(row[j] - m);
            z += out[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
    }
    return tape.record(std::move(out), {a}, [a, r, c, self = tape.size()](Tape& t, const Tensor& g) {
        const Tensor& s = t.value(self);
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * s[i * c + j];
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += s[i * c + j] * (g[i * c + j] - dot);
        }
    });
}

/// Concatenation along the last axis; all parts share the row count.
inline Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw InvalidArgument("concat_cols: no inputs");
    Tape& tape = *parts[0].tape();
    const std::size_t r = parts[0].rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.rows() != r) throw ShapeError("concat_cols: row counts differ");
        total += p.cols();
    }
    Tensor out({r, total});
    std::size_t off = 0;
    for (const auto& p : parts) {
        const Tensor& v = p.value();
        const std::size_t c = v.cols();
        for (std::size_t i = 0; i < r; ++i) {
            std::copy_n(&v.data()[i * c], c, &out.data()[i * total + off]);
        }
        off += c;
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return tape.record(std::move(out), parts, [inputs, r, total](Tape& t, const Tensor& g) {
        std::size_t off = 0;
        for (const auto& p : inputs) {
            const std::size_t c = p.cols();
            if (t.requires_grad(p)) {
                Tensor& gp = t.grad_buffer(p);
                for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += g[i * total + off + j];
                }
            }
            off += c;
        }
    });
}
inline Var concat_cols(std::initializer_list<Var> parts) {
    return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

/// Concatenation along the leading axis; all parts share the column count.
inline Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw InvalidArgument("concat_rows: no inputs");
    Tape& tape = *parts[0].tape();
    const std::size_t c = parts[0].cols();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.cols() != c) throw ShapeError("concat_rows: column counts differ");
        total += p.rows();
    }
    Tensor out({total, c});
    std::size_t off = 0;
    for (const auto& p : parts) {
        const Tensor& v = p.value();
        std::copy(v.data().begin(), v.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
        off += v.size();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return tape.record(std::move(out), parts, [inputs](Tape& t, const Tensor& g) {
        std::size_t off = 0;
        for (const auto& p : inputs) {
            const std::size_t len = p.value().size();
            if (t.requires_grad(p)) {
                Tensor& gp = t.grad_buffer(p);
                for (std::size_t i = 0; i < len; ++i) gp[i] += g[off + i];
            }
            off += len;
        }
    });
}
inline Var concat_rows(std::initializer_list<Var> parts) {
    return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

inline Var sum(const Var& a) {
    Tape& tape = *a.tape();
    double s = 0.0;
    for (double x : a.value().data()) s += x;
    return tape.record(Tensor::scalar(s), {a}, [a](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
    });
}

inline Var mean(const Var& a) {
    const auto n = static_cast<double>(a.value().size());
    if (n == 0) throw InvalidArgument("mean of empty tensor");
    return scale(sum(a), 1.0 / n);
}

enum class Reduce { sum, mean, max };

/// Reduction of a matrix along `axis` (0: over rows -> [1 x c], 1: over cols -> [r x 1]).
/// Max routes the gradient to the first maximal entry.
inline Var reduce(const Var& a, int axis, Reduce kind) {
    if (axis != 0 && axis != 1) throw InvalidArgument("reduce: axis must be 0 or 1");
    Tape& tape = *a.tape();
    const Tensor& x = a.value();
    const std::size_t r = x.rows(), c = x.cols();
    const std::size_t outer = axis == 0 ? c : r;
    const std::size_t inner = axis == 0 ? r : c;
    if (inner == 0) throw InvalidArgument("reduce over an empty axis");
    auto at = [&](std::size_t o, std::size_t k) { return axis == 0 ? k * c + o : o * c + k; };
    Tensor out(axis == 0 ? Shape{1, c} : Shape{r, 1});
    std::vector<std::size_t> arg(kind == Reduce::max ? outer : 0);
    for (std::size_t o = 0; o < outer; ++o) {
        if (kind == Reduce::max) {
            std::size_t best = at(o, 0);
            for (std::size_t k = 1; k < inner; ++k) {
                if (x[at(o, k)] > x[best]) best = at(o, k);
            }
            arg[o] = best;
            out[o] = x[best];
        } else {
            double s = 0.0;
            for (std::size_t k = 0; k < inner; ++k) s += x[at(o, k)];
            out[o] = kind == Reduce::mean ? s / static_cast<double>(inner) : s;
        }
    }
    return tape.record(std::move(out), {a}, [a, kind, arg, outer, inner, axis, c](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t o = 0; o < outer; ++o) {
            if (kind == Reduce::max) {
                ga[arg[o]] += g[o];
                continue;
            }
            const double w = kind == Reduce::mean ? g[o] / static_cast<double>(inner) : g[o];
            for (std::size_t k = 0; k < inner; ++k) ga[axis == 0 ? k * c + o : o * c + k] += w;
        }
    });
}

/// Rows of `a` selected by `index` (repeats allowed).
inline Var gather_rows(const Var& a, std::vector<std::size_t> index) {
    Tape& tape = *a.tape();
    const Tensor& x = a.value();
    const std::size_t c = x.cols();
    Tensor out({index.size(), c});
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= x.rows()) throw ShapeError("gather_rows: index out of range");
        std::copy_n(&x.data()[index[i] * c], c, &out.data()[i * c]);
    }
    return tape.record(std::move(out), {a}, [a, index = std::move(index), c](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < index.size(); ++i) {
            for (std::size_t j = 0; j < c; ++j) ga[index[i] * c + j] += g[i * c + j];
        }
    });
}

/// out[index[i]] += a[i]; out has `rows` rows.
inline Var scatter_add_rows(const Var& a, std::vector<std::size_t> index, std::size_t rows) {
    Tape& tape = *a.tape();
    const Tensor& x = a.value();
    if (index.size() != x.rows()) throw ShapeError("scatter_add_rows: one index per row required");
    const std::size_t c = x.cols();
    Tensor out({rows, c});
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= rows) throw ShapeError("scatter_add_rows: index out of range");
        for (std::size_t j = 0; j < c; ++j) out[index[i] * c + j] += x[i * c + j];
    }
    return tape.record(std::move(out), {a}, [a, index = std::move(index), c](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < index.size(); ++i) {
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[index[i] * c + j];
        }
    });
}

/// Elementwise max over the rows sharing a segment id: out[s] = max{a[i] : index[i] == s}.
/// Segments with no rows yield zeros. Gradient goes to the first maximal row per channel.
inline Var segment_max_rows(const Var& a, std::vector<std::size_t> index, std::size_t rows) {
    Tape& tape = *a.tape();
    const Tensor& x = a.value();
    if (index.size() != x.rows()) throw ShapeError("segment_max_rows: one index per row required");
    const std::size_t c = x.cols();
    constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::vector<std::size_t> arg(rows * c, none);
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= rows) throw ShapeError("segment_max_rows: index out of range");
        for (std::size_t j = 0; j < c; ++j) {
            std::size_t& best = arg[index[i] * c + j];
            if (best == none || x[i * c + j] > x[best]) best = i * c + j;
        }
    }
    Tensor out({rows, c});
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = arg[k] == none ? 0.0 : x[arg[k]];
    return tape.record(std::move(out), {a}, [a, arg = std::move(arg)](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t k = 0; k < arg.size(); ++k) {
            if (arg[k] != none) ga[arg[k]] += g[k];
        }
    });
}

inline Var reshape(const Var& a, Shape shape) {
    Tape& tape = *a.tape();
    Tensor out = a.value().reshaped(std::move(shape));
    return tape.record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

inline Var transpose(const Var& a) {
    Tape& tape = *a.tape();
    const Tensor& x = a.value();
    const std::size_t r = x.rows(), c = x.cols();
    Tensor out({c, r});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
    }
    return tape.record(std::move(out), {a}, [a, r, c](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
        }
    });
}

/// x @ W + b, with x [m x d_in], W [d_in x d_out], b [d_out].
inline Var linear(const Var& x, const Var& w, const Var& b) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    if (wv.rank() != 2 || xv.cols() != wv.rows() || b.value().size() != wv.cols()) {
        throw ShapeError("linear: x " + shape_string(xv.shape()) + ", W " + shape_string(wv.shape()) + ", b " +
                         shape_string(b.shape()));
    }
    return add(matmul(x, w), b);
}

// ----------------------------------------------------------------------------------------
// Losses (scalar outputs, averaged)

/// Mean over rows of -log softmax(logits)[row, target[row]].
inline Var softmax_cross_entropy(const Var& logits, std::vector<std::size_t> target) {
    Tape& tape = *logits.tape();
    const Tensor& x = logits.value();
    const std::size_t r = x.rows(), c = x.cols();
    if (target.size() != r) throw ShapeError("softmax_cross_entropy: one target per row required");
    Tensor probs({r, c});
    double loss = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        if (target[i] >= c) throw ShapeError("softmax_cross_entropy: target out of range");
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) m = std::max(m, x[i * c + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(x[i * c + j] - m);
        const double lse = m + std::log(z);
        loss += lse - x[i * c + target[i]];
        for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(x[i * c + j] - lse);
    }
    loss /= static_cast<double>(r);
    return tape.record(Tensor::scalar(loss), {logits},
                       [logits, probs = std::move(probs), target = std::move(target), r, c](Tape& t, const Tensor& g) {
                           Tensor& gl = t.grad_buffer(logits);
                           const double w = g[0] / static_cast<double>(r);
                           for (std::size_t i = 0; i < r; ++i) {
                               for (std::size_t j = 0; j < c; ++j) {
                                   gl[i * c + j] += w * (probs[i * c + j] - (j == target[i] ? 1.0 : 0.0));
                               }
                           }
                       });
}

/// Mean binary cross-entropy of sigmoid(logits) against 0/1 targets.
inline Var sigmoid_bce(const Var& logits, Tensor target) {
    Tape& tape = *logits.tape();
    const Tensor& x = logits.value();
    if (target.size() != x.size()) throw ShapeError("sigmoid_bce: target size mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        loss += std::max(x[i], 0.0) - x[i] * target[i] + std::log1p(std::exp(-std::abs(x[i])));
    }
    const auto n = static_cast<double>(x.size());
    return tape.record(Tensor::scalar(loss / n), {logits},
                       [logits, target = std::move(target), n](Tape& t, const Tensor& g) {
                           const Tensor& xv = logits.value();
                           Tensor& gl = t.grad_buffer(logits);
                           for (std::size_t i = 0; i < xv.size(); ++i) {
                               gl[i] += g[0] * (stable_sigmoid(xv[i]) - target[i]) / n;
                           }
                       });
}

/// Mean squared error.
inline Var mse(const Var& pred, Tensor target) {
    Tape& tape = *pred.tape();
    const Tensor& x = pred.value();
    if (target.size() != x.size()) throw ShapeError("mse: target size mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) loss += (x[i] - target[i]) * (x[i] - target[i]);
    const auto n = static_cast<double>(x.size());
    return tape.record(Tensor::scalar(loss / n), {pred}, [pred, target = std::move(target), n](Tape& t, const Tensor& g) {
        const Tensor& xv = pred.value();
        Tensor& gp = t.grad_buffer(pred);
        for (std::size_t i = 0; i < xv.size(); ++i) gp[i] += g[0] * 2.0 * (xv[i] - target[i]) / n;
    });
}

}  // namespace nar::ad
