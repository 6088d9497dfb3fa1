///
/// \file numerics.hpp
///
/// Dense complex linear algebra used by the reconstruction algorithms:
/// Toeplitz embedding and its right dual, SVD-based least squares and null
/// vectors, companion-matrix root finding and pivoted Gaussian elimination.
///
#ifndef TEMPUS_FRI_NUMERICS_HPP
#define TEMPUS_FRI_NUMERICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <tempus_fri/error.hpp>
#include <tempus_fri/signal_model.hpp>

namespace tempus_fri
{

using ComplexMatrix = Eigen::MatrixXcd;

///
/// Toeplitz matrix `T_P(x)` of shape `(N-P) x (P+1)` with entries
/// `x[-M + P + i - j]` (1-based i, j). Multiplying it with a length-(P+1)
/// vector u yields the valid part of the linear convolution x * u.
///
struct ToeplitzEmbedding
{
    FourierVector generator;
    int order;
    ComplexMatrix matrix;
};

inline ToeplitzEmbedding toeplitzify(const FourierVector& x, int P)
{
    if (P < 0 || P > x.M())
        throw ArgumentError("Toeplitz order P must satisfy 0 <= P <= M");
    const int N = x.size();
    ComplexMatrix T(N - P, P + 1);
    for (int i = 0; i < N - P; ++i)
        for (int j = 0; j <= P; ++j)
            T(i, j) = x.coeffs()[P + i - j];
    return ToeplitzEmbedding{x, P, std::move(T)};
}

///
/// Right dual of the Toeplitz embedding: the `(N-P) x N` matrix `Z(u)` with
/// `toeplitzify(x, P).matrix * u == Z(u) * x` for every length-N vector x.
///
inline ComplexMatrix right_dual(const ComplexVector& u, int N)
{
    const int P = static_cast<int>(u.size()) - 1;
    if (P < 0)
        throw ArgumentError("right_dual needs a nonempty filter");
    if (N < P + 1)
        throw ArgumentError("right_dual needs N >= P + 1");
    ComplexMatrix Z = ComplexMatrix::Zero(N - P, N);
    for (int i = 0; i < N - P; ++i)
        for (int j = 0; j <= P; ++j)
            Z(i, P + i - j) = u[j];
    return Z;
}

///
/// Minimum-norm least-squares solution of `A x = b`. Singular values below
/// `rows * eps * sigma_max` are treated as zero.
///
inline ComplexVector lstsq(const ComplexMatrix& A, const ComplexVector& b)
{
    if (A.rows() < 1 || A.cols() < 1)
        throw ArgumentError("lstsq needs a nonempty matrix");
    if (A.rows() != b.size())
        throw ArgumentError("lstsq dimension mismatch");
    Eigen::JacobiSVD<ComplexMatrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(static_cast<double>(A.rows()) * std::numeric_limits<double>::epsilon());
    return svd.solve(b);
}

/// Singular values of A padded with zeros to `cols` entries, descending.
inline RealVector singular_values(const ComplexMatrix& A)
{
    Eigen::JacobiSVD<ComplexMatrix> svd(A);
    RealVector s = RealVector::Zero(A.cols());
    s.head(svd.singularValues().size()) = svd.singularValues();
    return s;
}

/// Numerical rank with the library-wide tolerance `rows * eps * sigma_max`.
inline int numerical_rank(const ComplexMatrix& A)
{
    const RealVector s = singular_values(A);
    if (s.size() == 0 || s[0] == 0.0)
        return 0;
    const double tol = static_cast<double>(A.rows()) * std::numeric_limits<double>::epsilon() * s[0];
    return static_cast<int>((s.array() > tol).count());
}

/// Right singular vector of the smallest singular value.
struct NullVector
{
    ComplexVector vector;
    double sigma_min;
    double sigma_second; ///< second smallest; equals sigma_min for one column
    double sigma_max;
};

inline NullVector nullspace_min_singular(const ComplexMatrix& A)
{
    if (A.cols() < 1)
        throw ArgumentError("nullspace_min_singular needs at least one column");
    Eigen::JacobiSVD<ComplexMatrix> svd(A, Eigen::ComputeFullV);
    const auto n = A.cols();
    RealVector s = RealVector::Zero(n);
    s.head(svd.singularValues().size()) = svd.singularValues();
    ComplexVector v = svd.matrixV().col(n - 1);
    v /= v.norm();
    return NullVector{std::move(v), s[n - 1], n >= 2 ? s[n - 2] : s[n - 1], s[0]};
}

namespace detail
{

// Horner evaluation of h[0] z^K + h[1] z^{K-1} + ... + h[K] and its derivative.
inline std::pair<Complex, Complex> horner(const ComplexVector& h, Complex z)
{
    Complex p = 0.0, dp = 0.0;
    for (Eigen::Index i = 0; i < h.size(); ++i)
    {
        dp = dp * z + p;
        p  = p * z + h[i];
    }
    return {p, dp};
}

} // namespace detail

///
/// Roots of `H(z) = h[0] z^K + ... + h[K]`, i.e. of the filter
/// `sum_k h[k] z^-k`, from the eigenvalues of the companion matrix of the
/// monic normalization. Each root gets Newton refinement steps that are kept
/// only when they reduce |H|.
///
inline std::vector<Complex> poly_roots(const ComplexVector& h)
{
    if (h.size() < 1)
        throw ArgumentError("poly_roots needs at least one coefficient");
    const double hnorm = h.norm();
    if (!(std::abs(h[0]) > 1e-12 * hnorm))
        throw DegenerateFilterError("leading filter coefficient vanishes");
    const int K = static_cast<int>(h.size()) - 1;
    if (K == 0)
        return {};

    ComplexMatrix C = ComplexMatrix::Zero(K, K);
    for (int j = 0; j < K; ++j)
        C(0, j) = -h[j + 1] / h[0];
    for (int i = 1; i < K; ++i)
        C(i, i - 1) = 1.0;

    Eigen::ComplexEigenSolver<ComplexMatrix> es(C, false);
    if (es.info() != Eigen::Success)
        throw DegenerateFilterError("companion eigenvalue iteration failed");

    std::vector<Complex> roots(es.eigenvalues().data(), es.eigenvalues().data() + K);
    for (auto& r : roots)
    {
        for (int it = 0; it < 3; ++it)
        {
            auto [p, dp] = detail::horner(h, r);
            if (dp == Complex(0.0))
                break;
            const Complex cand = r - p / dp;
            if (std::abs(detail::horner(h, cand).first) < std::abs(p))
                r = cand;
            else
                break;
        }
    }
    return roots;
}

/// Solution of a square system; `used_fallback` marks an SVD least-squares
/// answer after elimination left a large residual.
struct LinearSolution
{
    ComplexVector x;
    bool used_fallback = false;
};

///
/// Gaussian elimination with partial pivoting. A pivot below
/// `n * eps * max|A|` raises SingularSystemError. If the residual exceeds
/// `1e-9 * |b|` the least-squares solution is returned instead and flagged.
///
inline LinearSolution solve_linear(const ComplexMatrix& A, const ComplexVector& b)
{
    const Eigen::Index n = A.rows();
    if (A.cols() != n)
        throw ArgumentError("solve_linear needs a square matrix");
    if (b.size() != n)
        throw ArgumentError("solve_linear dimension mismatch");
    if (n == 0)
        return {ComplexVector(), false};

    ComplexMatrix U   = A;
    ComplexVector rhs = b;
    const double amax = A.cwiseAbs().maxCoeff();
    const double tiny = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * amax;

    for (Eigen::Index k = 0; k < n; ++k)
    {
        Eigen::Index piv;
        const double pmax = U.col(k).tail(n - k).cwiseAbs().maxCoeff(&piv);
        piv += k;
        if (!(pmax > tiny))
            throw SingularSystemError("matrix is singular to working precision at column " +
                                      std::to_string(k));
        if (piv != k)
        {
            U.row(k).swap(U.row(piv));
            std::swap(rhs[k], rhs[piv]);
        }
        for (Eigen::Index i = k + 1; i < n; ++i)
        {
            const Complex f = U(i, k) / U(k, k);
            if (f == Complex(0.0))
                continue;
            U.row(i).tail(n - k) -= f * U.row(k).tail(n - k);
            rhs[i] -= f * rhs[k];
        }
    }

    ComplexVector x(n);
    for (Eigen::Index i = n - 1; i >= 0; --i)
    {
        Complex acc = rhs[i];
        for (Eigen::Index j = i + 1; j < n; ++j)
            acc -= U(i, j) * x[j];
        x[i] = acc / U(i, i);
    }

    const double bnorm = b.norm();
    if ((A * x - b).norm() <= 1e-9 * bnorm || bnorm == 0.0)
        return {std::move(x), false};
    return {lstsq(A, b), true};
}

} // namespace tempus_fri

#endif // TEMPUS_FRI_NUMERICS_HPP
