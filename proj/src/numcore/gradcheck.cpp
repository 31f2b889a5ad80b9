#include "marc/numcore/gradcheck.hpp"

#include "marc/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace marc {

GradCheckReport finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                                  double step, double tol) {
    if (!(step > 0.0)) throw InvalidArgument("finite_diff_check: step must be positive");

    std::vector<Matrix> analytic;
    {
        for (auto& p : params) p.zero_grad();
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = f();
        tape.backward(loss);
        for (const auto& p : params) analytic.push_back(p.grad());
        for (auto& p : params) p.zero_grad();
    }

    GradCheckReport report;
    report.tolerance = tol;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = params[k];
        Matrix numeric(p.rows(), p.cols());
        for (Index i = 0; i < p.size(); ++i) {
            double& slot = p.mutable_value().data()[i];
            const double saved = slot;
            double plus = 0.0, minus = 0.0;
            try {
                slot = saved + step;
                plus = f().item();
                slot = saved - step;
                minus = f().item();
            } catch (const NonFiniteError& e) {
                slot = saved;
                throw NonFiniteError("finite_diff_check: parameter " + std::to_string(k) + ": " +
                                     e.what());
            }
            slot = saved;
            if (!std::isfinite(plus) || !std::isfinite(minus)) {
                throw NonFiniteError("finite_diff_check: non-finite loss perturbing parameter " +
                                     std::to_string(k));
            }
            numeric.data()[i] = (plus - minus) / (2.0 * step);
        }
        if (!analytic[k].allFinite()) {
            throw NonFiniteError("finite_diff_check: non-finite analytic gradient for parameter " +
                                 std::to_string(k));
        }
        const double denom = std::max(analytic[k].norm(), numeric.norm());
        const double err = denom > 0.0 ? (analytic[k] - numeric).norm() / denom : 0.0;
        report.relative_errors.push_back(err);
        report.max_relative_error = std::max(report.max_relative_error, err);
    }
    report.passed = report.max_relative_error < tol;
    return report;
}

}  // namespace marc
