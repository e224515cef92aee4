#ifndef IMAFD_PROJECTION_HPP
#define IMAFD_PROJECTION_HPP

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "imafd/idss.hpp"

namespace imafd::idss {

/// 2-D principal-component coordinates of the prototype latents, for
/// plotting the bank. Each axis is sign-normalised so the first nonzero
/// component of its eigenvector is positive.
inline std::vector<std::array<double, 2>> project_prototypes_2d(const PrototypeBank& bank) {
    const auto n = static_cast<Eigen::Index>(bank.size());
    const auto d = static_cast<Eigen::Index>(bank.latent_dim);
    if (n < 2) throw InputError("projection needs at least two prototypes");

    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = bank.prototypes[static_cast<std::size_t>(i)].latent[j];
    x.rowwise() -= x.colwise().mean();
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    Eigen::MatrixXd axes = Eigen::MatrixXd::Zero(d, 2);
    for (Eigen::Index a = 0; a < std::min<Eigen::Index>(2, d); ++a) {
        Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - a);  // eigenvalues ascend
        for (Eigen::Index j = 0; j < d; ++j) {
            if (std::abs(v(j)) > 1e-12) {
                if (v(j) < 0) v = -v;
                break;
            }
        }
        axes.col(a) = v;
    }
    const Eigen::MatrixXd proj = x * axes;

    std::vector<std::array<double, 2>> out(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = {proj(i, 0), proj(i, 1)};
    return out;
}

} // namespace imafd::idss

#endif // IMAFD_PROJECTION_HPP
