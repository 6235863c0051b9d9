#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "tomopet/system_matrix.hpp"

namespace tomopet {

/// Linear map from images on a grid to a flat output vector.
class LinearOperator {
public:
    virtual ~LinearOperator() = default;
    virtual const GridSpec& domain() const = 0;
    virtual std::size_t range_size() const = 0;
    virtual std::vector<double> apply(std::span<const double> x) const = 0;
    virtual std::vector<double> apply_adjoint(std::span<const double> y) const = 0;
};

class IdentityOperator final : public LinearOperator {
public:
    explicit IdentityOperator(GridSpec grid) : grid_(grid) {}
    const GridSpec& domain() const override { return grid_; }
    std::size_t range_size() const override { return grid_.size(); }
    std::vector<double> apply(std::span<const double> x) const override;
    std::vector<double> apply_adjoint(std::span<const double> y) const override;

private:
    GridSpec grid_;
};

/// Wraps a sparse matrix (scanner system matrix or a Radon ray matrix).
class MatrixOperator : public LinearOperator {
public:
    explicit MatrixOperator(std::shared_ptr<const SystemMatrix> matrix) : matrix_(std::move(matrix)) {}
    const GridSpec& domain() const override { return matrix_->grid(); }
    std::size_t range_size() const override { return matrix_->n_bins(); }
    std::vector<double> apply(std::span<const double> x) const override;
    std::vector<double> apply_adjoint(std::span<const double> y) const override;
    const SystemMatrix& matrix() const { return *matrix_; }

private:
    std::shared_ptr<const SystemMatrix> matrix_;
};

} // namespace tomopet
