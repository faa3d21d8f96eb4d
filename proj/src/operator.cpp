#include "rbki/operator.hpp"

#include "rbki/dense.hpp"

#include <sstream>
#include <utility>

namespace rbki::core {

LinearOperator::LinearOperator(Index rows, Index cols) : rows_(rows), cols_(cols) {
    if (rows <= 0 || cols <= 0) throw config_error("operator: dimensions must be positive");
}

Matrix LinearOperator::apply(const Matrix& X) const {
    if (X.rows() != cols_) {
        std::ostringstream msg;
        msg << "operator apply: block has " << X.rows() << " rows, operator expects "
            << cols_;
        throw config_error(msg.str());
    }
    dense::require_finite(X, "operator apply");
    count_.fetch_add(X.cols(), std::memory_order_relaxed);
    return apply_impl(X);
}

Matrix LinearOperator::apply_transpose(const Matrix& X) const {
    if (X.rows() != rows_) {
        std::ostringstream msg;
        msg << "operator apply_transpose: block has " << X.rows()
            << " rows, operator expects " << rows_;
        throw config_error(msg.str());
    }
    dense::require_finite(X, "operator apply_transpose");
    count_.fetch_add(X.cols(), std::memory_order_relaxed);
    return apply_transpose_impl(X);
}

Matrix LinearOperator::materialize() const {
    throw config_error("operator: no dense materialization available");
}

DenseOperator::DenseOperator(Matrix A) : LinearOperator(A.rows(), A.cols()), A_(std::move(A)) {
    dense::require_finite(A_, "dense operator");
}

Matrix DenseOperator::apply_impl(const Matrix& X) const { return A_ * X; }

Matrix DenseOperator::apply_transpose_impl(const Matrix& X) const {
    return A_.transpose() * X;
}

SmoothedNormalOperator::SmoothedNormalOperator(const LinearOperator& op, Vector diag)
    : op_(op), diag_(std::move(diag)) {
    if (diag_.size() != op.rows())
        throw config_error("smoothed operator: diagonal length must match operator rows");
}

Matrix SmoothedNormalOperator::apply(const Matrix& X) const {
    Matrix Y = op_.apply(op_.apply_transpose(X));
    Y += diag_.asDiagonal() * X;
    return Y;
}

}  // namespace rbki::core
