#include "tomopet/linear_operator.hpp"

#include <string>

#include "tomopet/error.hpp"

namespace tomopet {

std::vector<double> IdentityOperator::apply(std::span<const double> x) const {
    if (x.size() != grid_.size()) throw ValidationError("identity operator: dimension mismatch");
    return {x.begin(), x.end()};
}

std::vector<double> IdentityOperator::apply_adjoint(std::span<const double> y) const {
    if (y.size() != grid_.size()) throw ValidationError("identity operator: dimension mismatch");
    return {y.begin(), y.end()};
}

std::vector<double> MatrixOperator::apply(std::span<const double> x) const { return forward_project(*matrix_, x); }

std::vector<double> MatrixOperator::apply_adjoint(std::span<const double> y) const {
    return back_project(*matrix_, y);
}

} // namespace tomopet
