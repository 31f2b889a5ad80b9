#include "marc/numcore/tensor.hpp"

#include "marc/error.hpp"

#include <algorithm>
#include <sstream>

namespace marc {

Tensor::Tensor(Matrix value, bool requires_grad, std::string name)
    : node_(std::make_shared<TensorNode>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
    node_->name = std::move(name);
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad, std::string name) {
    return Tensor(Matrix::Zero(rows, cols), requires_grad, std::move(name));
}

Tensor Tensor::scalar(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return Tensor(std::move(m));
}

Tensor Tensor::row(std::initializer_list<double> values) {
    Matrix m(1, static_cast<Index>(values.size()));
    Index j = 0;
    for (double v : values) m(0, j++) = v;
    return Tensor(std::move(m));
}

void Tensor::zero_grad() {
    node_->grad = Matrix::Zero(node_->value.rows(), node_->value.cols());
}

double Tensor::item() const {
    if (rows() != 1 || cols() != 1) {
        throw ShapeError("item: expected 1x1 tensor, got " + shape_string(*this));
    }
    return node_->value(0, 0);
}

Tensor Tensor::detach() const { return Tensor(node_->value, false, node_->name); }

std::string shape_string(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

std::string shape_string(const Tensor& t) { return shape_string(t.value()); }

void check_finite(const Matrix& m, std::string_view what) {
    if (!m.allFinite()) {
        throw NonFiniteError("non-finite value in " + std::string(what));
    }
}

void Tape::record(std::string_view op, std::vector<std::shared_ptr<TensorNode>> inputs,
                  const Tensor& output, BackwardFn backward) {
    entries_.push_back(Entry{op, std::move(inputs), output.node(), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
        throw ShapeError("backward: loss must be 1x1, got " +
                         (loss.defined() ? shape_string(loss) : std::string("undefined")));
    }
    const auto& target = loss.node();
    const bool on_tape = std::any_of(entries_.begin(), entries_.end(),
                                     [&](const Entry& e) { return e.output == target; });
    if (!on_tape) throw Error("backward: loss was not produced on this tape");

    // Intermediate gradients restart from zero on every replay so that only
    // leaves accumulate across repeated backward() calls.
    for (auto& e : entries_) {
        e.output->grad = Matrix::Zero(e.output->value.rows(), e.output->value.cols());
    }
    target->grad(0, 0) = 1.0;

    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        const Matrix& g = it->output->grad;
        if (g.isZero(0.0)) continue;
        it->backward(g);
        for (const auto& in : it->inputs) {
            if (in->requires_grad && !in->grad.allFinite()) {
                throw NonFiniteError("non-finite gradient flowing out of '" + std::string(it->op) +
                                     "'" + (in->name.empty() ? "" : " into " + in->name));
            }
        }
    }
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

void backward(const Tensor& loss) {
    Tape* tape = active_tape();
    if (tape == nullptr) throw Error("backward: no active tape");
    tape->backward(loss);
}

}  // namespace marc
