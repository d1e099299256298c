#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dtcorl/rng.hpp"
#include "dtcorl/tensor.hpp"

namespace dtcorl {

/// Trainable tensor with gradient and optimizer slots.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;

    Parameter() = default;
    Parameter(std::string n, int rows, int cols)
        : name(std::move(n)), value(rows, cols), grad(rows, cols), adam_m(rows, cols), adam_v(rows, cols) {}

    void init_uniform_fan_in(int fan_in, Rng& rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
        for (auto& x : value.v) x = rng.uniform(-bound, bound);
    }

    void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

/// Recorded computation graph for one forward pass. Nodes are 2D tensors;
/// backward() runs the reverse sweep and accumulates parameter gradients.
class Tape {
  public:
    using Var = int;

    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void(Tape&)> back;
        bool needs_grad = false;
    };

    const Tensor& val(Var i) const { return nodes_[static_cast<size_t>(i)].val; }
    Tensor& grad(Var i) { return nodes_[static_cast<size_t>(i)].grad; }
    bool needs_grad(Var i) const { return nodes_[static_cast<size_t>(i)].needs_grad; }

    Var input(Tensor t) {
        Node n;
        n.val = std::move(t);
        n.needs_grad = false;
        nodes_.push_back(std::move(n));
        return static_cast<Var>(nodes_.size()) - 1;
    }

    Var param(Parameter& p) {
        Node n;
        n.val = p.value;
        n.grad = Tensor::zeros_like(p.value);
        n.needs_grad = true;
        Parameter* pp = &p;
        const Var self = static_cast<Var>(nodes_.size());
        n.back = [self, pp](Tape& t) {
            const Tensor& g = t.grad(self);
            for (size_t i = 0; i < g.v.size(); ++i) pp->grad.v[i] += g.v[i];
        };
        nodes_.push_back(std::move(n));
        return self;
    }

    Var add(Var a, Var b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (!ta.same_shape(tb)) throw std::invalid_argument("tape add: shape mismatch");
        Tensor out = ta;
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += tb.v[i];
        return make(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
            const Tensor& g = t.grad(self);
            t.accum(a, g);
            t.accum(b, g);
        });
    }

    Var sub(Var a, Var b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (!ta.same_shape(tb)) throw std::invalid_argument("tape sub: shape mismatch");
        Tensor out = ta;
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= tb.v[i];
        return make(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
            const Tensor& g = t.grad(self);
            t.accum(a, g);
            if (t.needs_grad(b)) {
                Tensor neg = g;
                for (auto& x : neg.v) x = -x;
                t.accum(b, neg);
            }
        });
    }

    Var mul(Var a, Var b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (!ta.same_shape(tb)) throw std::invalid_argument("tape mul: shape mismatch");
        Tensor out = ta;
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= tb.v[i];
        return make(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
            const Tensor& g = t.grad(self);
            if (t.needs_grad(a)) {
                Tensor da = g;
                for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= t.val(b).v[i];
                t.accum(a, da);
            }
            if (t.needs_grad(b)) {
                Tensor db = g;
                for (size_t i = 0; i < db.v.size(); ++i) db.v[i] *= t.val(a).v[i];
                t.accum(b, db);
            }
        });
    }

    Var scale(Var a, double c) {
        Tensor out = val(a);
        for (auto& x : out.v) x *= c;
        return make(std::move(out), {a}, [a, c](Tape& t, Var self) {
            Tensor g = t.grad(self);
            for (auto& x : g.v) x *= c;
            t.accum(a, g);
        });
    }

    Var add_scalar(Var a, double c) {
        Tensor out = val(a);
        for (auto& x : out.v) x += c;
        return make(std::move(out), {a},
                    [a](Tape& t, Var self) { t.accum(a, t.grad(self)); });
    }

    /// Broadcasts a (1 x D) bias over the rows of a (N x D) matrix.
    Var add_rowvec(Var a, Var bias) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(bias);
        if (tb.rows != 1 || tb.cols != ta.cols)
            throw std::invalid_argument("add_rowvec: bias must be 1 x cols");
        Tensor out = ta;
        for (int r = 0; r < out.rows; ++r)
            for (int c = 0; c < out.cols; ++c) out.at(r, c) += tb.at(0, c);
        return make(std::move(out), {a, bias}, [a, bias](Tape& t, Var self) {
            const Tensor& g = t.grad(self);
            t.accum(a, g);
            if (t.needs_grad(bias)) {
                Tensor db(1, g.cols);
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < g.cols; ++c) db.at(0, c) += g.at(r, c);
                t.accum(bias, db);
            }
        });
    }

    Var matmul_op(Var a, Var b) {
        Tensor out = matmul(val(a), val(b));
        return make(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
            const Tensor& g = t.grad(self);
            if (t.needs_grad(a)) t.accum(a, matmul_nt(g, t.val(b)));
            if (t.needs_grad(b)) t.accum(b, matmul_tn(t.val(a), g));
        });
    }

    Var relu(Var a) {
        Tensor out = val(a);
        for (auto& x : out.v) x = x > 0.0 ? x : 0.0;
        return make(std::move(out), {a}, [a](Tape& t, Var self) {
            Tensor g = t.grad(self);
            const Tensor& in = t.val(a);
            for (size_t i = 0; i < g.v.size(); ++i)
                if (in.v[i] <= 0.0) g.v[i] = 0.0;
            t.accum(a, g);
        });
    }

    Var tanh_op(Var a) {
        Tensor out = val(a);
        for (auto& x : out.v) x = std::tanh(x);
        return make(std::move(out), {a}, [a](Tape& t, Var self) {
            Tensor g = t.grad(self);
            const Tensor& y = t.val(self);
            for (size_t i = 0; i < g.v.size(); ++i) g.v[i] *= 1.0 - y.v[i] * y.v[i];
            t.accum(a, g);
        });
    }

    /// Smooth GELU (tanh approximation); smoothness keeps finite-difference
    /// gradient checks clean.
    Var gelu(Var a) {
        Tensor out = val(a);
        for (auto& x : out.v) x = gelu_fwd(x);
        return make(std::move(out), {a}, [a](Tape& t, Var self) {
            Tensor g = t.grad(self);
            const Tensor& in = t.val(a);
            for (size_t i = 0; i < g.v.size(); ++i) g.v[i] *= gelu_dx(in.v[i]);
            t.accum(a, g);
        });
    }

    /// Row-wise layer normalization with learned gain/bias (both 1 x D).
    Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5) {
        const Tensor& in = val(x);
        const Tensor& g = val(gain);
        const Tensor& b = val(bias);
        if (g.rows != 1 || g.cols != in.cols || b.rows != 1 || b.cols != in.cols)
            throw std::invalid_argument("layer_norm: gain/bias must be 1 x cols");
        const int N = in.rows, D = in.cols;
        Tensor out(N, D);
        Tensor xhat(N, D);
        std::vector<double> inv_sigma(static_cast<size_t>(N));
        for (int r = 0; r < N; ++r) {
            double mean = 0.0;
            for (int c = 0; c < D; ++c) mean += in.at(r, c);
            mean /= D;
            double var = 0.0;
            for (int c = 0; c < D; ++c) {
                const double d = in.at(r, c) - mean;
                var += d * d;
            }
            var /= D;
            const double is = 1.0 / std::sqrt(var + eps);
            inv_sigma[static_cast<size_t>(r)] = is;
            for (int c = 0; c < D; ++c) {
                const double xh = (in.at(r, c) - mean) * is;
                xhat.at(r, c) = xh;
                out.at(r, c) = g.at(0, c) * xh + b.at(0, c);
            }
        }
        auto xh_shared = std::make_shared<Tensor>(std::move(xhat));
        auto is_shared = std::make_shared<std::vector<double>>(std::move(inv_sigma));
        return make(std::move(out), {x, gain, bias},
                    [x, gain, bias, xh_shared, is_shared](Tape& t, Var self) {
            const Tensor& dy = t.grad(self);
            const Tensor& gn = t.val(gain);
            const int N = dy.rows, D = dy.cols;
            if (t.needs_grad(gain)) {
                Tensor dg(1, D);
                for (int r = 0; r < N; ++r)
                    for (int c = 0; c < D; ++c) dg.at(0, c) += dy.at(r, c) * xh_shared->at(r, c);
                t.accum(gain, dg);
            }
            if (t.needs_grad(bias)) {
                Tensor db(1, D);
                for (int r = 0; r < N; ++r)
                    for (int c = 0; c < D; ++c) db.at(0, c) += dy.at(r, c);
                t.accum(bias, db);
            }
            if (t.needs_grad(x)) {
                Tensor dx(N, D);
                for (int r = 0; r < N; ++r) {
                    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                    for (int c = 0; c < D; ++c) {
                        const double dxh = dy.at(r, c) * gn.at(0, c);
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xh_shared->at(r, c);
                    }
                    mean_dxhat /= D;
                    mean_dxhat_xhat /= D;
                    const double is = (*is_shared)[static_cast<size_t>(r)];
                    for (int c = 0; c < D; ++c) {
                        const double dxh = dy.at(r, c) * gn.at(0, c);
                        dx.at(r, c) = is * (dxh - mean_dxhat - xh_shared->at(r, c) * mean_dxhat_xhat);
                    }
                }
                t.accum(x, dx);
            }
        });
    }

    /// Multi-head causal self-attention over a batch of equal-length
    /// sequences. q, k, v are (batch*seq x d_model); the output at sequence
    /// position i depends only on positions <= i of the same sample.
    Var causal_self_attention(Var q, Var k, Var v, int batch, int seq, int heads) {
        const Tensor& tq = val(q);
        const int d_model = tq.cols;
        if (tq.rows != batch * seq) throw std::invalid_argument("attention: row count mismatch");
        if (d_model % heads != 0) throw std::invalid_argument("attention: heads must divide d_model");
        const int dh = d_model / heads;
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
        const Tensor& tk = val(k);
        const Tensor& tv = val(v);

        Tensor out(batch * seq, d_model);
        // Softmax probabilities, stored per (sample, head) for the backward pass.
        auto probs = std::make_shared<std::vector<double>>(
            static_cast<size_t>(batch) * heads * seq * seq, 0.0);

        for (int b = 0; b < batch; ++b) {
            const int row0 = b * seq;
            for (int h = 0; h < heads; ++h) {
                const int col0 = h * dh;
                double* pa = &(*probs)[((static_cast<size_t>(b) * heads) + h) * seq * seq];
                for (int i = 0; i < seq; ++i) {
                    // scores over positions j <= i
                    double maxs = -1e300;
                    for (int j = 0; j <= i; ++j) {
                        double s = 0.0;
                        for (int c = 0; c < dh; ++c)
                            s += tq.at(row0 + i, col0 + c) * tk.at(row0 + j, col0 + c);
                        s *= inv_sqrt;
                        pa[i * seq + j] = s;
                        maxs = std::max(maxs, s);
                    }
                    double z = 0.0;
                    for (int j = 0; j <= i; ++j) {
                        const double e = std::exp(pa[i * seq + j] - maxs);
                        pa[i * seq + j] = e;
                        z += e;
                    }
                    for (int j = 0; j <= i; ++j) pa[i * seq + j] /= z;
                    for (int c = 0; c < dh; ++c) {
                        double acc = 0.0;
                        for (int j = 0; j <= i; ++j) acc += pa[i * seq + j] * tv.at(row0 + j, col0 + c);
                        out.at(row0 + i, col0 + c) = acc;
                    }
                }
            }
        }
        return make(std::move(out), {q, k, v},
                    [q, k, v, batch, seq, heads, dh, inv_sqrt, probs](Tape& t, Var self) {
            const Tensor& dout = t.grad(self);
            const Tensor& tq = t.val(q);
            const Tensor& tk = t.val(k);
            const Tensor& tv = t.val(v);
            Tensor dq(tq.rows, tq.cols), dk(tk.rows, tk.cols), dv(tv.rows, tv.cols);
            std::vector<double> drow(static_cast<size_t>(seq));
            for (int b = 0; b < batch; ++b) {
                const int row0 = b * seq;
                for (int h = 0; h < heads; ++h) {
                    const int col0 = h * dh;
                    const double* pa = &(*probs)[((static_cast<size_t>(b) * heads) + h) * seq * seq];
                    for (int i = 0; i < seq; ++i) {
                        // dA_ij = sum_c dout_ic * v_jc ; dV_jc += A_ij * dout_ic
                        double dot = 0.0;
                        for (int j = 0; j <= i; ++j) {
                            double da = 0.0;
                            for (int c = 0; c < dh; ++c)
                                da += dout.at(row0 + i, col0 + c) * tv.at(row0 + j, col0 + c);
                            drow[static_cast<size_t>(j)] = da;
                            dot += da * pa[i * seq + j];
                            for (int c = 0; c < dh; ++c)
                                dv.at(row0 + j, col0 + c) += pa[i * seq + j] * dout.at(row0 + i, col0 + c);
                        }
                        for (int j = 0; j <= i; ++j) {
                            const double ds = pa[i * seq + j] * (drow[static_cast<size_t>(j)] - dot) * inv_sqrt;
                            if (ds == 0.0) continue;
                            for (int c = 0; c < dh; ++c) {
                                dq.at(row0 + i, col0 + c) += ds * tk.at(row0 + j, col0 + c);
                                dk.at(row0 + j, col0 + c) += ds * tq.at(row0 + i, col0 + c);
                            }
                        }
                    }
                }
            }
            t.accum(q, dq);
            t.accum(k, dk);
            t.accum(v, dv);
        });
    }

    /// Replaces flagged rows with a learned (1 x D) row; the original content
    /// of a replaced row has no influence on the output.
    Var replace_masked_rows(Var x, const std::vector<char>& flags, Var mask_row) {
        const Tensor& in = val(x);
        const Tensor& mr = val(mask_row);
        if (static_cast<int>(flags.size()) != in.rows)
            throw std::invalid_argument("replace_masked_rows: flag count mismatch");
        if (mr.rows != 1 || mr.cols != in.cols)
            throw std::invalid_argument("replace_masked_rows: mask row must be 1 x cols");
        Tensor out = in;
        for (int r = 0; r < in.rows; ++r)
            if (flags[static_cast<size_t>(r)])
                for (int c = 0; c < in.cols; ++c) out.at(r, c) = mr.at(0, c);
        auto fl = std::make_shared<std::vector<char>>(flags);
        return make(std::move(out), {x, mask_row}, [x, mask_row, fl](Tape& t, Var self) {
            const Tensor& g = t.grad(self);
            if (t.needs_grad(x)) {
                Tensor dx(g.rows, g.cols);
                for (int r = 0; r < g.rows; ++r)
                    if (!(*fl)[static_cast<size_t>(r)])
                        for (int c = 0; c < g.cols; ++c) dx.at(r, c) = g.at(r, c);
                t.accum(x, dx);
            }
            if (t.needs_grad(mask_row)) {
                Tensor dm(1, g.cols);
                for (int r = 0; r < g.rows; ++r)
                    if ((*fl)[static_cast<size_t>(r)])
                        for (int c = 0; c < g.cols; ++c) dm.at(0, c) += g.at(r, c);
                t.accum(mask_row, dm);
            }
        });
    }

    /// Interleaves T per-position token matrices (each batch x D) into the
    /// (batch*T x D) layout used by the attention op.
    Var stack_token_rows(const std::vector<Var>& tokens, int batch) {
        if (tokens.empty()) throw std::invalid_argument("stack_token_rows: no tokens");
        const int T = static_cast<int>(tokens.size());
        const int D = val(tokens[0]).cols;
        Tensor out(batch * T, D);
        for (int p = 0; p < T; ++p) {
            const Tensor& tok = val(tokens[static_cast<size_t>(p)]);
            if (tok.rows != batch || tok.cols != D)
                throw std::invalid_argument("stack_token_rows: token shape mismatch");
            for (int b = 0; b < batch; ++b)
                for (int c = 0; c < D; ++c) out.at(b * T + p, c) = tok.at(b, c);
        }
        auto toks = std::make_shared<std::vector<Var>>(tokens);
        return make_multi(std::move(out), tokens, [toks, batch, T, D](Tape& t, Var self) {
            const Tensor& g = t.grad(self);
            for (int p = 0; p < T; ++p) {
                const Var tok = (*toks)[static_cast<size_t>(p)];
                if (!t.needs_grad(tok)) continue;
                Tensor dg(batch, D);
                for (int b = 0; b < batch; ++b)
                    for (int c = 0; c < D; ++c) dg.at(b, c) = g.at(b * T + p, c);
                t.accum(tok, dg);
            }
        });
    }

    /// Adds learned positional rows: row b*T+p of x gets row p of pos.
    Var add_positional(Var x, Var pos, int batch, int seq) {
        const Tensor& in = val(x);
        const Tensor& tp = val(pos);
        if (in.rows != batch * seq || tp.rows < seq || tp.cols != in.cols)
            throw std::invalid_argument("add_positional: shape mismatch");
        Tensor out = in;
        for (int b = 0; b < batch; ++b)
            for (int p = 0; p < seq; ++p)
                for (int c = 0; c < in.cols; ++c) out.at(b * seq + p, c) += tp.at(p, c);
        return make(std::move(out), {x, pos}, [x, pos, batch, seq](Tape& t, Var self) {
            const Tensor& g = t.grad(self);
            t.accum(x, g);
            if (t.needs_grad(pos)) {
                const Tensor& tp = t.val(pos);
                Tensor dp(tp.rows, tp.cols);
                for (int b = 0; b < batch; ++b)
                    for (int p = 0; p < seq; ++p)
                        for (int c = 0; c < g.cols; ++c) dp.at(p, c) += g.at(b * seq + p, c);
                t.accum(pos, dp);
            }
        });
    }

    Var gather_rows(Var x, const std::vector<int>& idx) {
        const Tensor& in = val(x);
        Tensor out(static_cast<int>(idx.size()), in.cols);
        for (size_t r = 0; r < idx.size(); ++r)
            for (int c = 0; c < in.cols; ++c) out.at(static_cast<int>(r), c) = in.at(idx[r], c);
        auto id = std::make_shared<std::vector<int>>(idx);
        return make(std::move(out), {x}, [x, id](Tape& t, Var self) {
            if (!t.needs_grad(x)) return;
            const Tensor& g = t.grad(self);
            Tensor dx(t.val(x).rows, t.val(x).cols);
            for (size_t r = 0; r < id->size(); ++r)
                for (int c = 0; c < g.cols; ++c) dx.at((*id)[r], c) += g.at(static_cast<int>(r), c);
            t.accum(x, dx);
        });
    }

    Var slice_cols(Var x, int c0, int c1) {
        const Tensor& in = val(x);
        if (c0 < 0 || c1 > in.cols || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
        Tensor out(in.rows, c1 - c0);
        for (int r = 0; r < in.rows; ++r)
            for (int c = c0; c < c1; ++c) out.at(r, c - c0) = in.at(r, c);
        return make(std::move(out), {x}, [x, c0, c1](Tape& t, Var self) {
            if (!t.needs_grad(x)) return;
            const Tensor& g = t.grad(self);
            Tensor dx(t.val(x).rows, t.val(x).cols);
            for (int r = 0; r < g.rows; ++r)
                for (int c = c0; c < c1; ++c) dx.at(r, c) = g.at(r, c - c0);
            t.accum(x, dx);
        });
    }

    Var concat_cols(Var a, Var b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (ta.rows != tb.rows) throw std::invalid_argument("concat_cols: row mismatch");
        Tensor out(ta.rows, ta.cols + tb.cols);
        for (int r = 0; r < ta.rows; ++r) {
            for (int c = 0; c < ta.cols; ++c) out.at(r, c) = ta.at(r, c);
            for (int c = 0; c < tb.cols; ++c) out.at(r, ta.cols + c) = tb.at(r, c);
        }
        const int ca = ta.cols;
        return make(std::move(out), {a, b}, [a, b, ca](Tape& t, Var self) {
            const Tensor& g = t.grad(self);
            if (t.needs_grad(a)) {
                Tensor da(g.rows, ca);
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < ca; ++c) da.at(r, c) = g.at(r, c);
                t.accum(a, da);
            }
            if (t.needs_grad(b)) {
                Tensor db(g.rows, g.cols - ca);
                for (int r = 0; r < g.rows; ++r)
                    for (int c = ca; c < g.cols; ++c) db.at(r, c - ca) = g.at(r, c);
                t.accum(b, db);
            }
        });
    }

    /// Hard clamp; gradient passes only where the input lies inside [lo, hi].
    Var clamp(Var x, double lo, double hi) {
        Tensor out = val(x);
        for (auto& v : out.v) v = v < lo ? lo : (v > hi ? hi : v);
        return make(std::move(out), {x}, [x, lo, hi](Tape& t, Var self) {
            Tensor g = t.grad(self);
            const Tensor& in = t.val(x);
            for (size_t i = 0; i < g.v.size(); ++i)
                if (in.v[i] < lo || in.v[i] > hi) g.v[i] = 0.0;
            t.accum(x, g);
        });
    }

    /// Inverted dropout. Identity when training is false or rate is zero.
    Var dropout(Var x, double rate, Rng& rng, bool training) {
        if (!training || rate <= 0.0) return x;
        const Tensor& in = val(x);
        auto mask = std::make_shared<std::vector<double>>(in.v.size());
        const double keep = 1.0 - rate;
        Tensor out = in;
        for (size_t i = 0; i < in.v.size(); ++i) {
            const double m = rng.uniform01() < rate ? 0.0 : 1.0 / keep;
            (*mask)[i] = m;
            out.v[i] *= m;
        }
        return make(std::move(out), {x}, [x, mask](Tape& t, Var self) {
            Tensor g = t.grad(self);
            for (size_t i = 0; i < g.v.size(); ++i) g.v[i] *= (*mask)[i];
            t.accum(x, g);
        });
    }

    /// Mean over all entries, returned as a 1x1 scalar node.
    Var mean_all(Var x) {
        const Tensor& in = val(x);
        double acc = 0.0;
        for (double v : in.v) acc += v;
        const double inv_n = 1.0 / static_cast<double>(in.v.size());
        Tensor out(1, 1);
        out.at(0, 0) = acc * inv_n;
        return make(std::move(out), {x}, [x, inv_n](Tape& t, Var self) {
            const double g = t.grad(self).at(0, 0) * inv_n;
            Tensor dx(t.val(x).rows, t.val(x).cols, g);
            t.accum(x, dx);
        });
    }

    /// Mean squared error between pred and a constant target over the rows
    /// whose valid flag is set. Returns a 1x1 scalar.
    Var mse_rows(Var pred, const Tensor& target, const std::vector<char>& valid) {
        const Tensor& p = val(pred);
        if (!p.same_shape(target) || static_cast<int>(valid.size()) != p.rows)
            throw std::invalid_argument("mse_rows: shape mismatch");
        int count = 0;
        for (char f : valid) count += f ? 1 : 0;
        if (count == 0) throw std::invalid_argument("mse_rows: empty batch");
        const double inv = 1.0 / (static_cast<double>(count) * p.cols);
        double acc = 0.0;
        for (int r = 0; r < p.rows; ++r) {
            if (!valid[static_cast<size_t>(r)]) continue;
            for (int c = 0; c < p.cols; ++c) {
                const double d = p.at(r, c) - target.at(r, c);
                acc += d * d;
            }
        }
        Tensor out(1, 1);
        out.at(0, 0) = acc * inv;
        auto tgt = std::make_shared<Tensor>(target);
        auto fl = std::make_shared<std::vector<char>>(valid);
        return make(std::move(out), {pred}, [pred, tgt, fl, inv](Tape& t, Var self) {
            const double g = t.grad(self).at(0, 0);
            const Tensor& p = t.val(pred);
            Tensor dx(p.rows, p.cols);
            for (int r = 0; r < p.rows; ++r) {
                if (!(*fl)[static_cast<size_t>(r)]) continue;
                for (int c = 0; c < p.cols; ++c)
                    dx.at(r, c) = 2.0 * (p.at(r, c) - tgt->at(r, c)) * inv * g;
            }
            t.accum(pred, dx);
        });
    }

    /// Mean Gaussian negative log-likelihood with per-dimension mean and
    /// log-scale over valid rows. Returns a 1x1 scalar.
    Var gauss_nll_rows(Var mean, Var log_scale, const Tensor& target,
                       const std::vector<char>& valid) {
        const Tensor& mu = val(mean);
        const Tensor& ls = val(log_scale);
        if (!mu.same_shape(target) || !ls.same_shape(target) ||
            static_cast<int>(valid.size()) != mu.rows)
            throw std::invalid_argument("gauss_nll_rows: shape mismatch");
        int count = 0;
        for (char f : valid) count += f ? 1 : 0;
        if (count == 0) throw std::invalid_argument("gauss_nll_rows: empty batch");
        const double inv = 1.0 / (static_cast<double>(count) * mu.cols);
        constexpr double half_log_2pi = 0.91893853320467274178;
        double acc = 0.0;
        for (int r = 0; r < mu.rows; ++r) {
            if (!valid[static_cast<size_t>(r)]) continue;
            for (int c = 0; c < mu.cols; ++c) {
                const double d = target.at(r, c) - mu.at(r, c);
                const double e = std::exp(-2.0 * ls.at(r, c));
                acc += half_log_2pi + ls.at(r, c) + 0.5 * d * d * e;
            }
        }
        Tensor out(1, 1);
        out.at(0, 0) = acc * inv;
        auto tgt = std::make_shared<Tensor>(target);
        auto fl = std::make_shared<std::vector<char>>(valid);
        return make(std::move(out), {mean, log_scale},
                    [mean, log_scale, tgt, fl, inv](Tape& t, Var self) {
            const double g = t.grad(self).at(0, 0);
            const Tensor& mu = t.val(mean);
            const Tensor& ls = t.val(log_scale);
            Tensor dmu(mu.rows, mu.cols), dls(ls.rows, ls.cols);
            for (int r = 0; r < mu.rows; ++r) {
                if (!(*fl)[static_cast<size_t>(r)]) continue;
                for (int c = 0; c < mu.cols; ++c) {
                    const double d = tgt->at(r, c) - mu.at(r, c);
                    const double e = std::exp(-2.0 * ls.at(r, c));
                    dmu.at(r, c) = -d * e * inv * g;
                    dls.at(r, c) = (1.0 - d * d * e) * inv * g;
                }
            }
            t.accum(mean, dmu);
            t.accum(log_scale, dls);
        });
    }

    /// Reverse sweep from a scalar loss node. Parameter gradients accumulate
    /// into Parameter::grad (call zero_grad on parameters beforehand).
    void backward(Var loss) {
        Node& ln = nodes_[static_cast<size_t>(loss)];
        if (ln.val.rows != 1 || ln.val.cols != 1)
            throw std::invalid_argument("backward: loss must be scalar");
        if (ln.grad.v.empty()) ln.grad = Tensor(1, 1);
        ln.grad.at(0, 0) = 1.0;
        for (int i = loss; i >= 0; --i) {
            Node& n = nodes_[static_cast<size_t>(i)];
            if (n.needs_grad && n.back && !n.grad.v.empty()) n.back(*this);
        }
    }

    void accum(Var v, const Tensor& g) {
        Node& n = nodes_[static_cast<size_t>(v)];
        if (!n.needs_grad) return;
        if (n.grad.v.empty()) n.grad = Tensor(n.val.rows, n.val.cols);
        for (size_t i = 0; i < g.v.size(); ++i) n.grad.v[i] += g.v[i];
    }

    static double gelu_fwd(double x) {
        constexpr double c = 0.79788456080286535588;  // sqrt(2/pi)
        const double u = c * (x + 0.044715 * x * x * x);
        return 0.5 * x * (1.0 + std::tanh(u));
    }

    static double gelu_dx(double x) {
        constexpr double c = 0.79788456080286535588;
        const double u = c * (x + 0.044715 * x * x * x);
        const double th = std::tanh(u);
        const double du = c * (1.0 + 3.0 * 0.044715 * x * x);
        return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
    }

  private:
    std::vector<Node> nodes_;

    Var make(Tensor out, std::initializer_list<Var> parents,
             std::function<void(Tape&, Var)> back) {
        bool ng = false;
        for (Var p : parents) ng = ng || nodes_[static_cast<size_t>(p)].needs_grad;
        Node n;
        n.val = std::move(out);
        n.needs_grad = ng;
        const Var self = static_cast<Var>(nodes_.size());
        if (ng) n.back = [self, back](Tape& t) { back(t, self); };
        nodes_.push_back(std::move(n));
        return self;
    }

    Var make_multi(Tensor out, const std::vector<Var>& parents,
                   std::function<void(Tape&, Var)> back) {
        bool ng = false;
        for (Var p : parents) ng = ng || nodes_[static_cast<size_t>(p)].needs_grad;
        Node n;
        n.val = std::move(out);
        n.needs_grad = ng;
        const Var self = static_cast<Var>(nodes_.size());
        if (ng) n.back = [self, back](Tape& t) { back(t, self); };
        nodes_.push_back(std::move(n));
        return self;
    }
};

/// Adam / AdamW (decoupled weight decay) optimizer over a parameter list.
struct AdamOptimizer {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled (AdamW) when > 0
    int64_t t = 0;

    void step(const std::vector<Parameter*>& params) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (Parameter* p : params) {
            for (size_t i = 0; i < p->value.v.size(); ++i) {
                const double g = p->grad.v[i];
                p->adam_m.v[i] = beta1 * p->adam_m.v[i] + (1.0 - beta1) * g;
                p->adam_v.v[i] = beta2 * p->adam_v.v[i] + (1.0 - beta2) * g * g;
                const double mhat = p->adam_m.v[i] / bc1;
                const double vhat = p->adam_v.v[i] / bc2;
                p->value.v[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p->value.v[i]);
            }
        }
    }
};

inline double global_grad_norm(const std::vector<Parameter*>& params) {
    double acc = 0.0;
    for (const Parameter* p : params)
        for (double g : p->grad.v) acc += g * g;
    return std::sqrt(acc);
}

inline void clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
    const double norm = global_grad_norm(params);
    if (norm <= max_norm || norm == 0.0) return;
    const double scale = max_norm / norm;
    for (Parameter* p : params)
        for (double& g : p->grad.v) g *= scale;
}

inline void zero_grads(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) p->zero_grad();
}

}  // namespace dtcorl
