#ifndef VASSO_CORE_HPP
#define VASSO_CORE_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace vasso {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Dense parameter vector. Every vector quantity of the optimizers (iterate,
/// adversary, EMA slope, gradient) shares this representation.
using ParamVector = Vector<double>;
using DenseMatrix = Matrix<double>;

/// Threshold below which a gradient is treated as degenerate.
inline constexpr double kDegenerateTol = 1e-12;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class NonFiniteError : public Error {
public:
    NonFiniteError(const std::string& what, long iteration)
        : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}
    long iteration() const { return iteration_; }

private:
    long iteration_;
};

template <typename DerivedX, typename DerivedY>
void require_same_dim(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y,
                      const char* op) {
    if (x.size() != y.size()) {
        throw DimensionError(std::string(op) + ": dimension mismatch (" + std::to_string(x.size()) +
                             " vs " + std::to_string(y.size()) + ")");
    }
}

/// alpha * x + y
template <typename DerivedX, typename DerivedY>
Vector<typename DerivedX::Scalar> axpy(typename DerivedX::Scalar alpha,
                                       const Eigen::MatrixBase<DerivedX>& x,
                                       const Eigen::MatrixBase<DerivedY>& y) {
    require_same_dim(x, y, "axpy");
    return alpha * x + y;
}

template <typename Derived>
typename Derived::Scalar norm2(const Eigen::MatrixBase<Derived>& x) {
    return x.norm();
}

/// Projects x radially onto the sphere of radius rho. Vectors with norm at or
/// below tol map to zero.
template <typename Derived>
Vector<typename Derived::Scalar> normalize_to_sphere(const Eigen::MatrixBase<Derived>& x,
                                                     typename Derived::Scalar rho,
                                                     typename Derived::Scalar tol = kDegenerateTol) {
    using Scalar = typename Derived::Scalar;
    const Scalar n = x.norm();
    if (!(n > tol)) {
        return Vector<Scalar>::Zero(x.size());
    }
    return (rho / n) * x;
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& x) {
    return x.allFinite();
}

}  // namespace vasso

#endif  // VASSO_CORE_HPP
