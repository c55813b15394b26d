#include "infogram/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "infogram/error.hpp"
#include "infogram/linalg.hpp"

namespace infogram::ad {

namespace {

constexpr double kLayerNormEps = 1e-5;

double sigmoid_stable(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_stable(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

bool is_bias_broadcast(const Tensor& a, const Tensor& b) {
    return b.rank() == 1 && a.rank() >= 2 && b.shape()[0] == a.shape().back();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(who) + ": operand shapes differ");
}

} // namespace

const Tensor& GradientMap::at(const Node* leaf) const {
    auto it = grads_.find(leaf);
    if (it == grads_.end())
        throw ContractError("gradient map: no entry for this leaf");
    return it->second;
}

Node* Tape::append(Tensor value, Op op, std::vector<Node*> parents, double payload) {
    bool rg = false;
    for (const Node* p : parents) rg = rg || p->requires_grad;
    nodes_.push_back(Node{std::move(value), op, std::move(parents), rg, payload,
                          nodes_.size()});
    return &nodes_.back();
}

Node* Tape::leaf(Tensor value, bool requires_grad) {
    Node* n = append(std::move(value), Op::leaf, {}, 0.0);
    n->requires_grad = requires_grad;
    return n;
}

Node* Tape::reshape(Node* x, std::vector<std::size_t> shape) {
    return append(x->value.reshaped(std::move(shape)), Op::reshape, {x}, 0.0);
}

Node* Tape::record(Op op, std::vector<Node*> inputs, double payload) {
    auto arity = [&](std::size_t k) {
        if (inputs.size() != k)
            throw ContractError("record: wrong input count for op");
    };
    switch (op) {
    case Op::leaf:
    case Op::reshape:
        throw ContractError("record: op needs its dedicated entry point");

    case Op::matmul: {
        arity(2);
        Tensor out = infogram::matmul(inputs[0]->value, inputs[1]->value);
        return append(std::move(out), op, std::move(inputs), 0.0);
    }

    case Op::bmm: {
        arity(2);
        const Tensor& a = inputs[0]->value;
        const Tensor& b = inputs[1]->value;
        if (a.rank() != 3 || b.rank() != 3)
            throw ShapeError("bmm: both operands must be 3-d");
        std::size_t bs = a.shape()[0], n = a.shape()[1], d = a.shape()[2];
        std::size_t p = b.shape()[1];
        if (b.shape()[0] != bs || b.shape()[2] != d)
            throw ShapeError("bmm: batch or feature dimensions differ");
        Tensor out({bs, n, p});
        for (std::size_t s = 0; s < bs; ++s)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < p; ++j) {
                    const double* ra = a.data().data() + (s * n + i) * d;
                    const double* rb = b.data().data() + (s * p + j) * d;
                    double acc = 0.0;
                    for (std::size_t l = 0; l < d; ++l) acc += ra[l] * rb[l];
                    out[(s * n + i) * p + j] = acc;
                }
        return append(std::move(out), op, std::move(inputs), 0.0);
    }

    case Op::transpose: {
        arity(1);
        Tensor out = infogram::transpose(inputs[0]->value);
        return append(std::move(out), op, std::move(inputs), 0.0);
    }

    case Op::add: {
        arity(2);
        const Tensor& a = inputs[0]->value;
        const Tensor& b = inputs[1]->value;
        Tensor out = a;
        if (is_bias_broadcast(a, b)) {
            std::size_t d = b.shape()[0], rows = a.numel() / d;
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < d; ++c) out[r * d + c] += b[c];
        } else {
            require_same_shape(a, b, "add");
            for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
        }
        return append(std::move(out), op, std::move(inputs), 0.0);
    }

    case Op::scale: {
        arity(1);
        if (!std::isfinite(payload)) throw ContractError("scale: non-finite factor");
        Tensor out = inputs[0]->value;
        for (double& v : out.data()) v *= payload;
        return append(std::move(out), op, std::move(inputs), payload);
    }

    case Op::hadamard:
    case Op::mul_elementwise: {
        arity(2);
        require_same_shape(inputs[0]->value, inputs[1]->value, "mul_elementwise");
        Tensor out = inputs[0]->value;
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= inputs[1]->value[i];
        return append(std::move(out), op, std::move(inputs), 0.0);
    }

    case Op::layernorm: {
        arity(3);
        const Tensor& x = inputs[0]->value;
        const Tensor& gain = inputs[1]->value;
        const Tensor& bias = inputs[2]->value;
        if (x.rank() != 2) throw ShapeError("layernorm: input must be 2-d");
        std::size_t rows = x.shape()[0], d = x.shape()[1];
        if (gain.rank() != 1 || gain.shape()[0] != d ||
            bias.rank() != 1 || bias.shape()[0] != d)
            throw ShapeError("layernorm: gain/bias must be vectors of the row width");
        Tensor out({rows, d});
        for (std::size_t r = 0; r < rows; ++r) {
            double mu = 0.0;
            for (std::size_t c = 0; c < d; ++c) mu += x.at(r, c);
            mu /= static_cast<double>(d);
            double var = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                double dv = x.at(r, c) - mu;
                var += dv * dv;
            }
            var /= static_cast<double>(d);
            double inv = 1.0 / std::sqrt(var + kLayerNormEps);
            for (std::size_t c = 0; c < d; ++c)
                out.at(r, c) = gain[c] * (x.at(r, c) - mu) * inv + bias[c];
        }
        return append(std::move(out), op, std::move(inputs), 0.0);
    }

    case Op::l2norm_rows: {
        arity(1);
        Tensor out = l2_normalize_rows(inputs[0]->value);
        return append(std::move(out), op, std::move(inputs), 0.0);
    }

    case Op::frobenius_sq: {
        arity(1);
        double f = 0.0;
        for (double v : inputs[0]->value.data()) f += v * v;
        return append(Tensor::scalar(f), op, std::move(inputs), 0.0);
    }

    case Op::log2_scalar: {
        arity(1);
        double x = inputs[0]->value.value();
        if (x <= 0.0)
            throw NumericError("log2_scalar: argument " + std::to_string(x) +
                               " is not positive");
        return append(Tensor::scalar(std::log2(x)), op, std::move(inputs), 0.0);
    }

    case Op::trace_normalize: {
        arity(1);
        const Tensor& x = inputs[0]->value;
        if (x.rank() != 2 || x.shape()[0] != x.shape()[1])
            throw ShapeError("trace_normalize: input must be square 2-d");
        std::size_t n = x.shape()[0];
        double t = 0.0;
        for (std::size_t i = 0; i < n; ++i) t += x.at(i, i);
        if (t <= 1e-300)
            throw DegenerateError("trace_normalize: trace is not positive");
        Tensor out = x;
        for (double& v : out.data()) v /= t;
        return append(std::move(out), op, std::move(inputs), 0.0);
    }

    case Op::divide_scalar: {
        arity(2);
        double s = inputs[1]->value.value();
        if (s == 0.0) throw DegenerateError("divide_scalar: zero denominator");
        Tensor out = inputs[0]->value;
        for (double& v : out.data()) v /= s;
        return append(std::move(out), op, std::move(inputs), 0.0);
    }

    case Op::sum: {
        arity(1);
        double s = 0.0;
        for (double v : inputs[0]->value.data()) s += v;
        return append(Tensor::scalar(s), op, std::move(inputs), 0.0);
    }

    case Op::sigmoid: {
        arity(1);
        Tensor out = inputs[0]->value;
        for (double& v : out.data()) v = sigmoid_stable(v);
        return append(std::move(out), op, std::move(inputs), 0.0);
    }

    case Op::gelu: {
        arity(1);
        Tensor out = inputs[0]->value;
        for (double& v : out.data()) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
        return append(std::move(out), op, std::move(inputs), 0.0);
    }

    case Op::structure_loss: {
        arity(2);
        const Tensor& logits = inputs[0]->value;
        const Tensor& target = inputs[1]->value;
        if (logits.rank() != 2) throw ShapeError("structure_loss: logits must be 2-d");
        require_same_shape(logits, target, "structure_loss");
        for (double v : target.data())
            if (v != 0.0 && v != 1.0)
                throw ContractError("structure_loss: target must be binary");
        std::size_t b = logits.shape()[0], k = logits.shape()[1];
        double bce = 0.0;
        double overlap = 0.0;
        for (std::size_t r = 0; r < b; ++r) {
            double pt = 0.0, psum = 0.0, tsum = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                double l = logits.at(r, c);
                double t = target.at(r, c);
                bce += t * softplus_stable(-l) + (1.0 - t) * softplus_stable(l);
                double p = sigmoid_stable(l);
                pt += p * t;
                psum += p;
                tsum += t;
            }
            double u = pt + 1.0;
            double v = psum + tsum - pt + 1.0;
            overlap += 1.0 - u / v;
        }
        double loss = bce / static_cast<double>(b * k) + overlap / static_cast<double>(b);
        return append(Tensor::scalar(loss), op, std::move(inputs), 0.0);
    }
    }
    throw ContractError("record: unknown op");
}

namespace {

void accumulate(std::unordered_map<const Node*, Tensor>& grads, const Node* n,
                Tensor g) {
    auto it = grads.find(n);
    if (it == grads.end()) {
        grads.emplace(n, std::move(g));
        return;
    }
    Tensor& acc = it->second;
    for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += g[i];
}

void backprop_node(const Node* n, const Tensor& g,
                   std::unordered_map<const Node*, Tensor>& grads) {
    switch (n->op) {
    case Op::leaf:
        return;

    case Op::matmul: {
        const Tensor& a = n->parents[0]->value;
        const Tensor& b = n->parents[1]->value;
        if (n->parents[0]->requires_grad)
            accumulate(grads, n->parents[0], matmul_nt(g, b));
        if (n->parents[1]->requires_grad)
            accumulate(grads, n->parents[1], matmul(transpose(a), g));
        return;
    }

    case Op::bmm: {
        const Tensor& a = n->parents[0]->value;
        const Tensor& b = n->parents[1]->value;
        std::size_t bs = a.shape()[0], rows = a.shape()[1], d = a.shape()[2];
        std::size_t p = b.shape()[1];
        if (n->parents[0]->requires_grad) {
            Tensor da(a.shape());
            for (std::size_t s = 0; s < bs; ++s)
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < p; ++j) {
                        double gv = g[(s * rows + i) * p + j];
                        if (gv == 0.0) continue;
                        for (std::size_t l = 0; l < d; ++l)
                            da[(s * rows + i) * d + l] += gv * b[(s * p + j) * d + l];
                    }
            accumulate(grads, n->parents[0], std::move(da));
        }
        if (n->parents[1]->requires_grad) {
            Tensor db(b.shape());
            for (std::size_t s = 0; s < bs; ++s)
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < p; ++j) {
                        double gv = g[(s * rows + i) * p + j];
                        if (gv == 0.0) continue;
                        for (std::size_t l = 0; l < d; ++l)
                            db[(s * p + j) * d + l] += gv * a[(s * rows + i) * d + l];
                    }
            accumulate(grads, n->parents[1], std::move(db));
        }
        return;
    }

    case Op::transpose:
        if (n->parents[0]->requires_grad)
            accumulate(grads, n->parents[0], transpose(g));
        return;

    case Op::add: {
        const Tensor& a = n->parents[0]->value;
        const Tensor& b = n->parents[1]->value;
        if (n->parents[0]->requires_grad) accumulate(grads, n->parents[0], g);
        if (n->parents[1]->requires_grad) {
            if (is_bias_broadcast(a, b)) {
                std::size_t d = b.shape()[0], rows = a.numel() / d;
                Tensor db({d});
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < d; ++c) db[c] += g[r * d + c];
                accumulate(grads, n->parents[1], std::move(db));
            } else {
                accumulate(grads, n->parents[1], g);
            }
        }
        return;
    }

    case Op::scale: {
        if (!n->parents[0]->requires_grad) return;
        Tensor da = g;
        for (double& v : da.data()) v *= n->payload;
        accumulate(grads, n->parents[0], std::move(da));
        return;
    }

    case Op::hadamard:
    case Op::mul_elementwise: {
        const Tensor& a = n->parents[0]->value;
        const Tensor& b = n->parents[1]->value;
        if (n->parents[0]->requires_grad) {
            Tensor da = g;
            for (std::size_t i = 0; i < da.numel(); ++i) da[i] *= b[i];
            accumulate(grads, n->parents[0], std::move(da));
        }
        if (n->parents[1]->requires_grad) {
            Tensor db = g;
            for (std::size_t i = 0; i < db.numel(); ++i) db[i] *= a[i];
            accumulate(grads, n->parents[1], std::move(db));
        }
        return;
    }

    case Op::layernorm: {
        const Tensor& x = n->parents[0]->value;
        const Tensor& gain = n->parents[1]->value;
        std::size_t rows = x.shape()[0], d = x.shape()[1];
        double dd = static_cast<double>(d);
        Tensor dx({rows, d});
        Tensor dgain({d});
        Tensor dbias({d});
        for (std::size_t r = 0; r < rows; ++r) {
            double mu = 0.0;
            for (std::size_t c = 0; c < d; ++c) mu += x.at(r, c);
            mu /= dd;
            double var = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                double dv = x.at(r, c) - mu;
                var += dv * dv;
            }
            var /= dd;
            double inv = 1.0 / std::sqrt(var + kLayerNormEps);
            // dxh is the gradient w.r.t. the normalized activations; the
            // input gradient removes its mean and its projection onto xh.
            double mean_dxh = 0.0, mean_dxh_xh = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                double xh = (x.at(r, c) - mu) * inv;
                double dxh = g[r * d + c] * gain[c];
                mean_dxh += dxh;
                mean_dxh_xh += dxh * xh;
            }
            mean_dxh /= dd;
            mean_dxh_xh /= dd;
            for (std::size_t c = 0; c < d; ++c) {
                double xh = (x.at(r, c) - mu) * inv;
                double dxh = g[r * d + c] * gain[c];
                dx.at(r, c) = inv * (dxh - mean_dxh - xh * mean_dxh_xh);
                dgain[c] += g[r * d + c] * xh;
                dbias[c] += g[r * d + c];
            }
        }
        if (n->parents[0]->requires_grad) accumulate(grads, n->parents[0], std::move(dx));
        if (n->parents[1]->requires_grad) accumulate(grads, n->parents[1], std::move(dgain));
        if (n->parents[2]->requires_grad) accumulate(grads, n->parents[2], std::move(dbias));
        return;
    }

    case Op::l2norm_rows: {
        if (!n->parents[0]->requires_grad) return;
        const Tensor& x = n->parents[0]->value;
        const Tensor& y = n->value;
        std::size_t rows = x.shape()[0], d = x.shape()[1];
        Tensor dx({rows, d});
        for (std::size_t r = 0; r < rows; ++r) {
            double sq = 0.0, gy = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                sq += x.at(r, c) * x.at(r, c);
                gy += g[r * d + c] * y.at(r, c);
            }
            double norm = std::sqrt(sq);
            for (std::size_t c = 0; c < d; ++c)
                dx.at(r, c) = (g[r * d + c] - y.at(r, c) * gy) / norm;
        }
        accumulate(grads, n->parents[0], std::move(dx));
        return;
    }

    case Op::frobenius_sq: {
        if (!n->parents[0]->requires_grad) return;
        Tensor dx = n->parents[0]->value;
        double g0 = g.value();
        for (double& v : dx.data()) v *= 2.0 * g0;
        accumulate(grads, n->parents[0], std::move(dx));
        return;
    }

    case Op::log2_scalar: {
        if (!n->parents[0]->requires_grad) return;
        double x = n->parents[0]->value.value();
        accumulate(grads, n->parents[0], Tensor::scalar(g.value() / (x * M_LN2)));
        return;
    }

    case Op::trace_normalize: {
        if (!n->parents[0]->requires_grad) return;
        const Tensor& x = n->parents[0]->value;
        std::size_t d = x.shape()[0];
        double t = 0.0;
        for (std::size_t i = 0; i < d; ++i) t += x.at(i, i);
        double gx = inner(g, x);
        Tensor dx = g;
        for (double& v : dx.data()) v /= t;
        for (std::size_t i = 0; i < d; ++i) dx.at(i, i) -= gx / (t * t);
        accumulate(grads, n->parents[0], std::move(dx));
        return;
    }

    case Op::divide_scalar: {
        const Tensor& x = n->parents[0]->value;
        double s = n->parents[1]->value.value();
        if (n->parents[0]->requires_grad) {
            Tensor dx = g;
            for (double& v : dx.data()) v /= s;
            accumulate(grads, n->parents[0], std::move(dx));
        }
        if (n->parents[1]->requires_grad)
            accumulate(grads, n->parents[1], Tensor::scalar(-inner(g, x) / (s * s)));
        return;
    }

    case Op::sum: {
        if (!n->parents[0]->requires_grad) return;
        Tensor dx(n->parents[0]->value.shape());
        double g0 = g.value();
        for (double& v : dx.data()) v = g0;
        accumulate(grads, n->parents[0], std::move(dx));
        return;
    }

    case Op::sigmoid: {
        if (!n->parents[0]->requires_grad) return;
        Tensor dx = g;
        for (std::size_t i = 0; i < dx.numel(); ++i) {
            double y = n->value[i];
            dx[i] *= y * (1.0 - y);
        }
        accumulate(grads, n->parents[0], std::move(dx));
        return;
    }

    case Op::gelu: {
        if (!n->parents[0]->requires_grad) return;
        const Tensor& x = n->parents[0]->value;
        Tensor dx = g;
        for (std::size_t i = 0; i < dx.numel(); ++i) {
            double v = x[i];
            double cdf = 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
            double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
            dx[i] *= cdf + v * pdf;
        }
        accumulate(grads, n->parents[0], std::move(dx));
        return;
    }

    case Op::reshape:
        if (n->parents[0]->requires_grad)
            accumulate(grads, n->parents[0], g.reshaped(n->parents[0]->value.shape()));
        return;

    case Op::structure_loss: {
        if (!n->parents[0]->requires_grad) return;
        const Tensor& logits = n->parents[0]->value;
        const Tensor& target = n->parents[1]->value;
        std::size_t b = logits.shape()[0], k = logits.shape()[1];
        double g0 = g.value();
        Tensor dl({b, k});
        for (std::size_t r = 0; r < b; ++r) {
            double pt = 0.0, psum = 0.0, tsum = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                double p = sigmoid_stable(logits.at(r, c));
                pt += p * target.at(r, c);
                psum += p;
                tsum += target.at(r, c);
            }
            double u = pt + 1.0;
            double v = psum + tsum - pt + 1.0;
            for (std::size_t c = 0; c < k; ++c) {
                double t = target.at(r, c);
                double p = sigmoid_stable(logits.at(r, c));
                double d_bce = (p - t) / static_cast<double>(b * k);
                double d_ratio = (t * v - u * (1.0 - t)) / (v * v);
                double d_overlap = -d_ratio * p * (1.0 - p) / static_cast<double>(b);
                dl.at(r, c) = g0 * (d_bce + d_overlap);
            }
        }
        accumulate(grads, n->parents[0], std::move(dl));
        return;
    }
    }
}

} // namespace

GradientMap backward(Node* root) {
    if (!root->value.is_scalar())
        throw ContractError("backward: root must be scalar, has " +
                            std::to_string(root->value.numel()) + " elements");

    // Reachable subgraph in reverse creation order; creation order is
    // topological because the tape is eager.
    std::vector<const Node*> order;
    std::vector<const Node*> stack{root};
    std::unordered_map<const Node*, bool> seen;
    while (!stack.empty()) {
        const Node* n = stack.back();
        stack.pop_back();
        if (seen.count(n)) continue;
        seen[n] = true;
        order.push_back(n);
        for (Node* p : n->parents) stack.push_back(p);
    }
    std::sort(order.begin(), order.end(),
              [](const Node* a, const Node* b) { return a->id > b->id; });

    std::unordered_map<const Node*, Tensor> grads;
    grads.emplace(root, Tensor::scalar(1.0));
    for (const Node* n : order) {
        if (!n->requires_grad) continue;
        auto it = grads.find(n);
        if (it == grads.end()) continue;
        backprop_node(n, it->second, grads);
    }

    GradientMap out;
    for (const Node* n : order)
        if (n->op == Op::leaf && n->requires_grad) {
            auto it = grads.find(n);
            if (it != grads.end()) out.grads_.emplace(n, std::move(it->second));
        }
    return out;
}

double finite_diff_check(const std::function<Node*(Tape&, Node*)>& f,
                         const Tensor& x, double step) {
    if (!(step > 0.0) || !std::isfinite(step))
        throw ContractError("finite_diff_check: step must be positive and finite");

    Tape tape;
    Node* leaf = tape.leaf(x, true);
    Node* root = f(tape, leaf);
    if (!root->value.is_scalar())
        throw ContractError("finite_diff_check: f must produce a scalar");
    if (!std::isfinite(root->value.value()))
        throw NumericError("finite_diff_check: f is not finite at x");
    GradientMap gm = backward(root);
    Tensor analytic = gm.contains(leaf) ? gm.at(leaf) : Tensor(x.shape());

    auto eval = [&](const Tensor& point) {
        Tape t;
        Node* l = t.leaf(point, false);
        double v = f(t, l)->value.value();
        if (!std::isfinite(v))
            throw NumericError("finite_diff_check: f is not finite at a probe point");
        return v;
    };

    double worst = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        Tensor hi = x, lo = x;
        hi[i] += step;
        lo[i] -= step;
        double numeric = (eval(hi) - eval(lo)) / (2.0 * step);
        double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-8});
        worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
    }
    return worst;
}

} // namespace infogram::ad
