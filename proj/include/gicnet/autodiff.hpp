#pragma once

// Reverse-mode automatic differentiation over dense matrices.

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gicnet::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
    std::string name;
    Mat value;
    Mat grad;  // same shape as value; accumulated by Tape::backward

    void zero_grad() { grad = Mat::Zero(value.rows(), value.cols()); }
};

class Tape;

// Handle to one value recorded on a tape.
class Var {
  public:
    Var() = default;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    [[nodiscard]] const Mat& value() const;
    [[nodiscard]] const Mat& grad() const;  // valid after backward
    [[nodiscard]] bool requires_grad() const;
    [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
    [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
    [[nodiscard]] Tape* tape() const { return tape_; }
    [[nodiscard]] int id() const { return id_; }

  private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

// Records values and their vector-Jacobian products in creation order.
class Tape {
  public:
    // Receives the gradient of the output and accumulates into the inputs.
    using Backward = std::function<void(Tape&, const Mat& grad_out)>;

    Var constant(Mat value);
    Var leaf(Mat value);            // differentiable input; read its grad after backward
    Var param(Parameter& p);        // gradient is added into p.grad on backward
    Var record(Mat value, std::span<const Var> inputs, Backward backward);

    // Seeds d loss / d loss = 1 on a 1 x 1 value and runs every recorded
    // backward in reverse order. Throws DetachedTensorError when nothing
    // differentiable reaches `loss`.
    void backward(const Var& loss);

    // Adds g into the gradient of v (no-op for constants).
    void accumulate(const Var& v, const Mat& g);

    [[nodiscard]] const Mat& value(int id) const { return entries_[static_cast<std::size_t>(id)].value; }
    [[nodiscard]] const Mat& grad(int id) const { return entries_[static_cast<std::size_t>(id)].grad; }
    [[nodiscard]] bool requires_grad(int id) const { return entries_[static_cast<std::size_t>(id)].requires_grad; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }

  private:
    struct Entry {
        Mat value;
        Mat grad;
        bool requires_grad = false;
        Backward backward;
        Parameter* param = nullptr;
    };
    std::deque<Entry> entries_;
};

// Primitive operations; every op records onto the tape of its first operand.
[[nodiscard]] Var matmul(const Var& a, const Var& b);
[[nodiscard]] Var add(const Var& a, const Var& b);
[[nodiscard]] Var sub(const Var& a, const Var& b);
[[nodiscard]] Var mul(const Var& a, const Var& b);          // elementwise
[[nodiscard]] Var scale(const Var& a, double s);
[[nodiscard]] Var add_row(const Var& a, const Var& row);    // row (1 x c) broadcast over a's rows
[[nodiscard]] Var relu(const Var& a);
[[nodiscard]] Var sigmoid(const Var& a);
[[nodiscard]] Var sum(const Var& a);                        // 1 x 1
[[nodiscard]] Var mean(const Var& a);                       // 1 x 1
[[nodiscard]] Var concat_cols(const Var& a, const Var& b);
[[nodiscard]] Var gather_rows(const Var& a, std::span<const int> index);
// out[index[k]] += a[k]; out has `rows` rows.
[[nodiscard]] Var scatter_add_rows(const Var& a, std::span<const int> index, Eigen::Index rows);
// Row k multiplied by the constant s[k].
[[nodiscard]] Var row_scale(const Var& a, const Eigen::VectorXd& s);

// Per-head scaled dot product of q and k rows (both E x d, d divisible by
// heads): E x heads scores.
[[nodiscard]] Var head_dot(const Var& q, const Var& k, int heads);
// Softmax of each score column over the rows sharing a segment id.
[[nodiscard]] Var segment_softmax(const Var& scores, std::span<const int> segment, Eigen::Index segments);
// Scales the head slices of m (E x d) by the weights w (E x heads).
[[nodiscard]] Var head_weight(const Var& m, const Var& w, int heads);

// Mean binary cross-entropy of logits (n x 1) against 0/1 targets, in the
// stable max(x,0) - x*y + log(1 + exp(-|x|)) form.
[[nodiscard]] Var bce_with_logits(const Var& logits, const Eigen::VectorXd& targets);

// sum_i w_i * bce_i with the same stable per-element form.
[[nodiscard]] Var weighted_bce_with_logits(const Var& logits, const Eigen::VectorXd& targets, const Eigen::VectorXd& weights);

// Throws NonFiniteError when any value of v is NaN or infinite.
void check_finite(const Var& v, const std::string& what);

}  // namespace gicnet::nn
