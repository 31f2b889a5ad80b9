#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace marc {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

struct TensorNode {
    Matrix value;
    Matrix grad;  // allocated lazily, always value-shaped once allocated
    bool requires_grad = false;
    std::string name;

    Matrix& ensure_grad() {
        if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
            grad = Matrix::Zero(value.rows(), value.cols());
        }
        return grad;
    }
};

/// Dense 64-bit matrix with an optional accumulated gradient.
///
/// Tensors are shared handles: copying a Tensor aliases the same storage,
/// which is how parameters are referenced from both a model and an optimizer.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Matrix value, bool requires_grad = false, std::string name = {});

    static Tensor zeros(Index rows, Index cols, bool requires_grad = false, std::string name = {});
    static Tensor scalar(double v);
    static Tensor row(std::initializer_list<double> values);

    bool defined() const { return node_ != nullptr; }
    Index rows() const { return node_->value.rows(); }
    Index cols() const { return node_->value.cols(); }
    Index size() const { return node_->value.size(); }

    const Matrix& value() const { return node_->value; }
    Matrix& mutable_value() { return node_->value; }

    /// Gradient; a zero matrix if nothing has been accumulated yet.
    const Matrix& grad() const { return node_->ensure_grad(); }
    Matrix& mutable_grad() { return node_->ensure_grad(); }
    void zero_grad();

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool flag) { node_->requires_grad = flag; }

    const std::string& name() const { return node_->name; }
    void set_name(std::string name) { node_->name = std::move(name); }

    /// Value of a 1x1 tensor.
    double item() const;

    /// Deep copy detached from any tape, with requires_grad cleared.
    Tensor detach() const;

    const std::shared_ptr<TensorNode>& node() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

std::string shape_string(const Tensor& t);
std::string shape_string(const Matrix& m);

/// Records primitive operations for reverse-mode differentiation.
///
/// Entries are replayed in exact reverse order by backward(). Forward values
/// are never modified during replay.
class Tape {
public:
    using BackwardFn = std::function<void(const Matrix& out_grad)>;

    struct Entry {
        std::string_view op;
        std::vector<std::shared_ptr<TensorNode>> inputs;
        std::shared_ptr<TensorNode> output;
        BackwardFn backward;
    };

    void record(std::string_view op, std::vector<std::shared_ptr<TensorNode>> inputs,
                const Tensor& output, BackwardFn backward);

    /// Accumulates d(loss)/d(leaf) into every leaf that requires grad.
    void backward(const Tensor& loss);

    std::size_t size() const { return entries_.size(); }
    const std::vector<Entry>& entries() const { return entries_; }
    void clear() { entries_.clear(); }

private:
    std::vector<Entry> entries_;
};

/// The tape that new operations record onto for this thread, or nullptr.
Tape* active_tape();

/// Makes `tape` the active tape of the calling thread for its lifetime.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

/// backward() on the active tape.
void backward(const Tensor& loss);

/// Throws NonFiniteError naming `what` if `m` holds NaN or Inf.
void check_finite(const Matrix& m, std::string_view what);

}  // namespace marc
