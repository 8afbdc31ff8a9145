#pragma once

// Feature-map visualization: pixels of one or more activation tensors are
// pooled, projected on the three leading principal components and mapped to
// RGB with a global min-max range per component.

#include <leader/tensor.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <vector>

namespace leader::eval {

struct PcaBasis {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;  // channels x 3, zero columns for missing components
    Eigen::Vector3d eigenvalues = Eigen::Vector3d::Zero();
    int rank = 0;  // non-degenerate components found (0..3)
};

/// Population covariance of all pooled pixels; leading eigenvectors, each
/// oriented so its largest-magnitude entry is positive.
inline PcaBasis fit_pca(const std::vector<Tensor>& stack, double tolerance = 1e-10) {
    if (stack.empty()) throw StructuralError("pca: empty activation stack");
    const std::size_t c = stack.front().channels();
    if (c < 3) throw StructuralError("pca: need at least 3 channels, got " + std::to_string(c));
    std::size_t count = 0;
    for (const Tensor& t : stack) {
        if (t.channels() != c) throw StructuralError("pca: tensors disagree in channel count");
        count += t.pixels();
    }
    const auto n = static_cast<Eigen::Index>(c);
    PcaBasis b;
    b.mean = Eigen::VectorXd::Zero(n);
    for (const Tensor& t : stack)
        for (std::size_t p = 0; p < t.pixels(); ++p)
            b.mean += Eigen::Map<const Eigen::VectorXf>(t.data() + p * c, n).cast<double>();
    b.mean /= static_cast<double>(count);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    for (const Tensor& t : stack) {
        for (std::size_t p = 0; p < t.pixels(); ++p) {
            const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXf>(t.data() + p * c, n).cast<double>() - b.mean;
            cov.selfadjointView<Eigen::Lower>().rankUpdate(v);
        }
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(count);

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericError("pca: eigendecomposition failed");
    const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
    const double scale = std::max(1.0, values(n - 1));
    b.components = Eigen::MatrixXd::Zero(n, 3);
    for (int k = 0; k < 3; ++k) {
        const Eigen::Index idx = n - 1 - k;
        if (values(idx) <= tolerance * scale) break;
        Eigen::VectorXd vec = solver.eigenvectors().col(idx);
        Eigen::Index arg = 0;
        vec.cwiseAbs().maxCoeff(&arg);
        if (vec(arg) < 0.0) vec = -vec;
        b.components.col(k) = vec;
        b.eigenvalues(k) = values(idx);
        b.rank = k + 1;
    }
    return b;
}

/// One h x w x 3 tensor per input, values in [0, 1].
inline std::vector<Tensor> pca_projection(const std::vector<Tensor>& stack) {
    const PcaBasis b = fit_pca(stack);
    const std::size_t c = stack.front().channels();
    const auto n = static_cast<Eigen::Index>(c);

    std::vector<std::vector<Eigen::Vector3d>> projected;
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (const Tensor& t : stack) {
        std::vector<Eigen::Vector3d> pts(t.pixels());
        for (std::size_t p = 0; p < t.pixels(); ++p) {
            const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXf>(t.data() + p * c, n).cast<double>() - b.mean;
            pts[p] = b.components.transpose() * v;
            lo = lo.cwiseMin(pts[p]);
            hi = hi.cwiseMax(pts[p]);
        }
        projected.push_back(std::move(pts));
    }

    std::vector<Tensor> out;
    for (std::size_t k = 0; k < stack.size(); ++k) {
        Tensor rgb(stack[k].height(), stack[k].width(), 3);
        for (std::size_t p = 0; p < stack[k].pixels(); ++p) {
            for (int ch = 0; ch < 3; ++ch) {
                const double range = hi(ch) - lo(ch);
                const bool live = ch < b.rank && range > 0.0;
                rgb.data()[p * 3 + static_cast<std::size_t>(ch)] =
                    live ? static_cast<float>((projected[k][p](ch) - lo(ch)) / range) : 0.0f;
            }
        }
        out.push_back(std::move(rgb));
    }
    return out;
}

}  // namespace leader::eval
