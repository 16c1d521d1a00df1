#include "gicnet/autodiff.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "gicnet/error.hpp"

namespace gicnet::nn {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionMismatch(std::string(op) + ": operand shapes " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
    }
}

void require_index(std::span<const int> index, Eigen::Index rows, const char* op) {
    for (int i : index) {
        if (i < 0 || i >= rows) throw DimensionMismatch(std::string(op) + ": row index out of range");
    }
}

}  // namespace

const Mat& Var::value() const { return tape_->value(id_); }
const Mat& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Mat value) {
    entries_.push_back({std::move(value), {}, false, {}, nullptr});
    return {this, static_cast<int>(entries_.size() - 1)};
}

Var Tape::leaf(Mat value) {
    entries_.push_back({std::move(value), {}, true, {}, nullptr});
    return {this, static_cast<int>(entries_.size() - 1)};
}

Var Tape::param(Parameter& p) {
    entries_.push_back({p.value, {}, true, {}, &p});
    return {this, static_cast<int>(entries_.size() - 1)};
}

Var Tape::record(Mat value, std::span<const Var> inputs, Backward backward) {
    bool needs = false;
    for (const auto& v : inputs) {
        if (v.tape() != this) throw InvalidArgument("operands belong to different tapes");
        needs = needs || requires_grad(v.id());
    }
    entries_.push_back({std::move(value), {}, needs, needs ? std::move(backward) : Backward{}, nullptr});
    return {this, static_cast<int>(entries_.size() - 1)};
}

void Tape::accumulate(const Var& v, const Mat& g) {
    auto& e = entries_[static_cast<std::size_t>(v.id())];
    if (!e.requires_grad) return;
    if (e.grad.size() == 0) {
        e.grad = g;
    } else {
        e.grad += g;
    }
}

void Tape::backward(const Var& loss) {
    if (loss.tape() != this) throw InvalidArgument("loss belongs to a different tape");
    if (loss.rows() != 1 || loss.cols() != 1) throw DimensionMismatch("backward needs a 1 x 1 loss");
    if (!requires_grad(loss.id())) throw DetachedTensorError("loss does not depend on any differentiable input");
    for (auto& e : entries_) e.grad.resize(0, 0);
    entries_[static_cast<std::size_t>(loss.id())].grad = Mat::Ones(1, 1);
    for (int i = loss.id(); i >= 0; --i) {
        auto& e = entries_[static_cast<std::size_t>(i)];
        if (!e.requires_grad || e.grad.size() == 0) continue;
        if (e.backward) e.backward(*this, e.grad);
        if (e.param) {
            if (e.param->grad.rows() != e.grad.rows() || e.param->grad.cols() != e.grad.cols()) e.param->zero_grad();
            e.param->grad += e.grad;
        }
    }
    // Leaves without a path to the loss still report a zero gradient.
    for (auto& e : entries_) {
        if (e.requires_grad && e.grad.size() == 0) e.grad = Mat::Zero(e.value.rows(), e.value.cols());
    }
}

Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
    Mat out = a.value() * b.value();
    const std::array in{a, b};
    return a.tape()->record(std::move(out), in, [a, b](Tape& t, const Mat& g) {
        if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
        if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
    });
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    const std::array in{a, b};
    return a.tape()->record(a.value() + b.value(), in, [a, b](Tape& t, const Mat& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    const std::array in{a, b};
    return a.tape()->record(a.value() - b.value(), in, [a, b](Tape& t, const Mat& g) {
        t.accumulate(a, g);
        if (b.requires_grad()) t.accumulate(b, -g);
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    const std::array in{a, b};
    return a.tape()->record(a.value().cwiseProduct(b.value()), in, [a, b](Tape& t, const Mat& g) {
        if (a.requires_grad()) t.accumulate(a, g.cwiseProduct(b.value()));
        if (b.requires_grad()) t.accumulate(b, g.cwiseProduct(a.value()));
    });
}

Var scale(const Var& a, double s) {
    const std::array in{a};
    return a.tape()->record(a.value() * s, in, [a, s](Tape& t, const Mat& g) { t.accumulate(a, g * s); });
}

Var add_row(const Var& a, const Var& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) throw DimensionMismatch("add_row: row width differs");
    Mat out = a.value();
    out.rowwise() += row.value().row(0);
    const std::array in{a, row};
    return a.tape()->record(std::move(out), in, [a, row](Tape& t, const Mat& g) {
        t.accumulate(a, g);
        if (row.requires_grad()) t.accumulate(row, g.colwise().sum());
    });
}

Var relu(const Var& a) {
    const std::array in{a};
    return a.tape()->record(a.value().cwiseMax(0.0), in, [a](Tape& t, const Mat& g) {
        t.accumulate(a, Mat((a.value().array() > 0.0).select(g.array(), 0.0)));
    });
}

Var sigmoid(const Var& a) {
    Mat out = a.value().unaryExpr([](double x) { return stable_sigmoid(x); });
    const std::array in{a};
    const int self = static_cast<int>(a.tape()->size());
    return a.tape()->record(std::move(out), in, [a, self](Tape& t, const Mat& g) {
        const Mat& s = t.value(self);
        t.accumulate(a, g.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix())));
    });
}

Var sum(const Var& a) {
    Mat out(1, 1);
    out(0, 0) = a.value().sum();
    const std::array in{a};
    return a.tape()->record(std::move(out), in, [a](Tape& t, const Mat& g) {
        t.accumulate(a, Mat::Constant(a.rows(), a.cols(), g(0, 0)));
    });
}

Var mean(const Var& a) {
    if (a.value().size() == 0) throw DimensionMismatch("mean of an empty matrix");
    const double n = static_cast<double>(a.value().size());
    Mat out(1, 1);
    out(0, 0) = a.value().sum() / n;
    const std::array in{a};
    return a.tape()->record(std::move(out), in, [a, n](Tape& t, const Mat& g) {
        t.accumulate(a, Mat::Constant(a.rows(), a.cols(), g(0, 0) / n));
    });
}

Var concat_cols(const Var& a, const Var& b) {
    if (a.rows() != b.rows()) throw DimensionMismatch("concat_cols: row counts differ");
    Mat out(a.rows(), a.cols() + b.cols());
    out << a.value(), b.value();
    const std::array in{a, b};
    return a.tape()->record(std::move(out), in, [a, b](Tape& t, const Mat& g) {
        if (a.requires_grad()) t.accumulate(a, g.leftCols(a.cols()));
        if (b.requires_grad()) t.accumulate(b, g.rightCols(b.cols()));
    });
}

Var gather_rows(const Var& a, std::span<const int> index) {
    require_index(index, a.rows(), "gather_rows");
    Mat out(static_cast<Eigen::Index>(index.size()), a.cols());
    for (std::size_t k = 0; k < index.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = a.value().row(index[k]);
    std::vector<int> idx(index.begin(), index.end());
    const std::array in{a};
    return a.tape()->record(std::move(out), in, [a, idx = std::move(idx)](Tape& t, const Mat& g) {
        Mat ga = Mat::Zero(a.rows(), a.cols());
        for (std::size_t k = 0; k < idx.size(); ++k) ga.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
        t.accumulate(a, ga);
    });
}

Var scatter_add_rows(const Var& a, std::span<const int> index, Eigen::Index rows) {
    if (static_cast<Eigen::Index>(index.size()) != a.rows()) {
        throw DimensionMismatch("scatter_add_rows: one index per row is required");
    }
    require_index(index, rows, "scatter_add_rows");
    Mat out = Mat::Zero(rows, a.cols());
    for (std::size_t k = 0; k < index.size(); ++k) out.row(index[k]) += a.value().row(static_cast<Eigen::Index>(k));
    std::vector<int> idx(index.begin(), index.end());
    const std::array in{a};
    return a.tape()->record(std::move(out), in, [a, idx = std::move(idx)](Tape& t, const Mat& g) {
        Mat ga(a.rows(), a.cols());
        for (std::size_t k = 0; k < idx.size(); ++k) ga.row(static_cast<Eigen::Index>(k)) = g.row(idx[k]);
        t.accumulate(a, ga);
    });
}

Var row_scale(const Var& a, const Eigen::VectorXd& s) {
    if (s.size() != a.rows()) throw DimensionMismatch("row_scale: one factor per row is required");
    Mat out = s.asDiagonal() * a.value();
    const std::array in{a};
    return a.tape()->record(std::move(out), in, [a, s](Tape& t, const Mat& g) { t.accumulate(a, s.asDiagonal() * g); });
}

Var head_dot(const Var& q, const Var& k, int heads) {
    require_same_shape(q, k, "head_dot");
    if (heads < 1 || q.cols() % heads != 0) throw DimensionMismatch("head_dot: width not divisible by heads");
    const Eigen::Index dh = q.cols() / heads;
    const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
    Mat out(q.rows(), heads);
    for (Eigen::Index e = 0; e < q.rows(); ++e) {
        for (int h = 0; h < heads; ++h) {
            out(e, h) = q.value().row(e).segment(h * dh, dh).dot(k.value().row(e).segment(h * dh, dh)) * inv;
        }
    }
    const std::array in{q, k};
    return q.tape()->record(std::move(out), in, [q, k, heads, dh, inv](Tape& t, const Mat& g) {
        Mat gq(q.rows(), q.cols());
        Mat gk(k.rows(), k.cols());
        for (Eigen::Index e = 0; e < q.rows(); ++e) {
            for (int h = 0; h < heads; ++h) {
                const double w = g(e, h) * inv;
                gq.row(e).segment(h * dh, dh) = w * k.value().row(e).segment(h * dh, dh);
                gk.row(e).segment(h * dh, dh) = w * q.value().row(e).segment(h * dh, dh);
            }
        }
        if (q.requires_grad()) t.accumulate(q, gq);
        if (k.requires_grad()) t.accumulate(k, gk);
    });
}

Var segment_softmax(const Var& scores, std::span<const int> segment, Eigen::Index segments) {
    if (static_cast<Eigen::Index>(segment.size()) != scores.rows()) {
        throw DimensionMismatch("segment_softmax: one segment id per row is required");
    }
    require_index(segment, segments, "segment_softmax");
    const Mat& x = scores.value();
    Mat mx = Mat::Constant(segments, x.cols(), -std::numeric_limits<double>::infinity());
    for (std::size_t e = 0; e < segment.size(); ++e) {
        mx.row(segment[e]) = mx.row(segment[e]).cwiseMax(x.row(static_cast<Eigen::Index>(e)));
    }
    Mat out(x.rows(), x.cols());
    Mat denom = Mat::Zero(segments, x.cols());
    for (std::size_t e = 0; e < segment.size(); ++e) {
        const auto r = static_cast<Eigen::Index>(e);
        out.row(r) = (x.row(r) - mx.row(segment[e])).array().exp().matrix();
        denom.row(segment[e]) += out.row(r);
    }
    for (std::size_t e = 0; e < segment.size(); ++e) {
        const auto r = static_cast<Eigen::Index>(e);
        out.row(r) = out.row(r).cwiseQuotient(denom.row(segment[e]));
    }
    std::vector<int> seg(segment.begin(), segment.end());
    const std::array in{scores};
    const int self = static_cast<int>(scores.tape()->size());
    return scores.tape()->record(std::move(out), in,
                                 [scores, seg = std::move(seg), segments, self](Tape& t, const Mat& g) {
                                     const Mat& y = t.value(self);
                                     Mat dot = Mat::Zero(segments, y.cols());
                                     for (std::size_t e = 0; e < seg.size(); ++e) {
                                         const auto r = static_cast<Eigen::Index>(e);
                                         dot.row(seg[e]) += g.row(r).cwiseProduct(y.row(r));
                                     }
                                     Mat gx(y.rows(), y.cols());
                                     for (std::size_t e = 0; e < seg.size(); ++e) {
                                         const auto r = static_cast<Eigen::Index>(e);
                                         gx.row(r) = y.row(r).cwiseProduct(g.row(r) - dot.row(seg[e]));
                                     }
                                     t.accumulate(scores, gx);
                                 });
}

Var head_weight(const Var& m, const Var& w, int heads) {
    if (w.rows() != m.rows() || w.cols() != heads || heads < 1 || m.cols() % heads != 0) {
        throw DimensionMismatch("head_weight: weights must be rows x heads and width divisible by heads");
    }
    const Eigen::Index dh = m.cols() / heads;
    Mat out(m.rows(), m.cols());
    for (Eigen::Index e = 0; e < m.rows(); ++e) {
        for (int h = 0; h < heads; ++h) out.row(e).segment(h * dh, dh) = w.value()(e, h) * m.value().row(e).segment(h * dh, dh);
    }
    const std::array in{m, w};
    return m.tape()->record(std::move(out), in, [m, w, heads, dh](Tape& t, const Mat& g) {
        Mat gm(m.rows(), m.cols());
        Mat gw(w.rows(), w.cols());
        for (Eigen::Index e = 0; e < m.rows(); ++e) {
            for (int h = 0; h < heads; ++h) {
                gm.row(e).segment(h * dh, dh) = w.value()(e, h) * g.row(e).segment(h * dh, dh);
                gw(e, h) = g.row(e).segment(h * dh, dh).dot(m.value().row(e).segment(h * dh, dh));
            }
        }
        if (m.requires_grad()) t.accumulate(m, gm);
        if (w.requires_grad()) t.accumulate(w, gw);
    });
}

Var bce_with_logits(const Var& logits, const Eigen::VectorXd& targets) {
    if (logits.cols() != 1 || logits.rows() != targets.size()) {
        throw DimensionMismatch("bce_with_logits: logits must be n x 1 with n targets");
    }
    if (targets.size() == 0) throw InvalidArgument("cross-entropy over an empty mask");
    const auto n = static_cast<double>(targets.size());
    double total = 0.0;
    for (Eigen::Index i = 0; i < targets.size(); ++i) {
        const double x = logits.value()(i, 0);
        total += std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
    }
    Mat out(1, 1);
    out(0, 0) = total / n;
    const std::array in{logits};
    return logits.tape()->record(std::move(out), in, [logits, targets, n](Tape& t, const Mat& g) {
        Mat gl(logits.rows(), 1);
        for (Eigen::Index i = 0; i < targets.size(); ++i) {
            gl(i, 0) = g(0, 0) * (stable_sigmoid(logits.value()(i, 0)) - targets[i]) / n;
        }
        t.accumulate(logits, gl);
    });
}

Var weighted_bce_with_logits(const Var& logits, const Eigen::VectorXd& targets, const Eigen::VectorXd& weights) {
    if (logits.cols() != 1 || logits.rows() != targets.size() || weights.size() != targets.size()) {
        throw DimensionMismatch("weighted_bce_with_logits: logits must be n x 1 with n targets and weights");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < targets.size(); ++i) {
        const double x = logits.value()(i, 0);
        total += weights[i] * (std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::abs(x))));
    }
    Mat out(1, 1);
    out(0, 0) = total;
    const std::array in{logits};
    return logits.tape()->record(std::move(out), in, [logits, targets, weights](Tape& t, const Mat& g) {
        Mat gl(logits.rows(), 1);
        for (Eigen::Index i = 0; i < targets.size(); ++i) {
            gl(i, 0) = g(0, 0) * weights[i] * (stable_sigmoid(logits.value()(i, 0)) - targets[i]);
        }
        t.accumulate(logits, gl);
    });
}

void check_finite(const Var& v, const std::string& what) {
    if (!v.value().allFinite()) throw NonFiniteError("non-finite values in " + what);
}

}  // namespace gicnet::nn
