#include "segpipe/error.hpp"
#include "segpipe/optim.hpp"

#include <cmath>

namespace segpipe {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw Error(Errc::ShapeMismatch, "matrix data does not match its shape");
    }
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            t(c, r) = (*this)(r, c);
        }
    }
    return t;
}

double Matrix::frobenius_norm() const {
    double sum = 0.0;
    for (const double v : data_) {
        sum += v * v;
    }
    return std::sqrt(sum);
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw Error(Errc::ShapeMismatch, "matmul inner dimensions differ");
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out(i, j) += aik * b(k, j);
            }
        }
    }
    return out;
}

Matrix gram(const Matrix& a) {
    Matrix out(a.rows(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                sum += a(i, k) * a(j, k);
            }
            out(i, j) = sum;
            out(j, i) = sum;
        }
    }
    return out;
}

Matrix newton_schulz(const Matrix& g, std::span<const QuinticCoefficients> schedule) {
    if (g.rows() == 0 || g.cols() == 0) {
        throw Error(Errc::NotTwoDimensional, "Newton-Schulz needs a non-empty 2-D matrix");
    }
    const double norm = g.frobenius_norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw Error(Errc::ZeroMatrix, "cannot orthogonalize a zero or non-finite matrix");
    }
    const bool tall = g.rows() > g.cols();
    Matrix x = tall ? g.transpose() : g;
    for (double& v : x.data()) {
        v /= norm;
    }
    for (const QuinticCoefficients& k : schedule) {
        const Matrix a = gram(x);
        Matrix poly = matmul(a, a);
        for (std::size_t i = 0; i < poly.data().size(); ++i) {
            poly.data()[i] = k.b * a.data()[i] + k.c * poly.data()[i];
        }
        Matrix next = matmul(poly, x);
        for (std::size_t i = 0; i < next.data().size(); ++i) {
            next.data()[i] += k.a * x.data()[i];
        }
        x = std::move(next);
    }
    return tall ? x.transpose() : x;
}

Matrix newton_schulz(const Matrix& g, int iters) {
    if (iters < 0) {
        throw Error(Errc::InvalidInput, "iteration count must be non-negative");
    }
    std::vector<QuinticCoefficients> schedule;
    for (int i = 0; i < iters; ++i) {
        schedule.push_back(kMinimaxSchedule[std::min<std::size_t>(i, kMinimaxSchedule.size() - 1)]);
    }
    return newton_schulz(g, schedule);
}

}  // namespace segpipe
