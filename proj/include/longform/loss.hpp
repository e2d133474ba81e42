#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "longform/common.hpp"

namespace longform {

// values(i, j) = z_v^i . z_a^j; the diagonal holds the positive pairs.
inline Eigen::MatrixXd similarity_matrix(const Eigen::MatrixXd& z_video,
                                         const Eigen::MatrixXd& z_audio) {
    check_shape(z_video.rows() == z_audio.rows() && z_video.cols() == z_audio.cols(),
                "similarity_matrix: embedding shapes differ");
    return z_video * z_audio.transpose();
}

struct NceResult {
    double loss = 0.0;
    Eigen::MatrixXd d_z_video;
    Eigen::MatrixXd d_z_audio;
};

// Symmetric cross-modal NCE. For instance i the denominator holds the
// positive s_ii plus both directions of mismatched pairs, s_ij and s_ji for
// all j != i. Stabilized by per-instance max subtraction, which leaves the
// value unchanged.
inline NceResult nce_loss_and_grad(const Eigen::MatrixXd& z_video,
                                   const Eigen::MatrixXd& z_audio,
                                   double temperature = 1.0) {
    check_shape(z_video.rows() == z_audio.rows() && z_video.cols() == z_audio.cols(),
                "nce_loss_and_grad: embedding shapes differ");
    check_config(temperature > 0.0, "nce_loss_and_grad: temperature must be > 0");
    if (!z_video.allFinite() || !z_audio.allFinite())
        throw ShapeError("nce_loss_and_grad: non-finite embeddings");

    const Eigen::Index b = z_video.rows();
    Eigen::MatrixXd sims = similarity_matrix(z_video, z_audio) / temperature;

    NceResult out;
    Eigen::MatrixXd coeff = Eigen::MatrixXd::Zero(b, b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const double row_max = sims.row(i).maxCoeff();
        const double col_max = sims.col(i).maxCoeff();
        const double m = std::max(row_max, col_max);
        double z = 0.0;
        for (Eigen::Index j = 0; j < b; ++j) z += std::exp(sims(i, j) - m);
        for (Eigen::Index j = 0; j < b; ++j)
            if (j != i) z += std::exp(sims(j, i) - m);
        out.loss += -sims(i, i) + m + std::log(z);
        const double inv = 1.0 / z;
        for (Eigen::Index j = 0; j < b; ++j) coeff(i, j) += std::exp(sims(i, j) - m) * inv;
        for (Eigen::Index j = 0; j < b; ++j)
            if (j != i) coeff(j, i) += std::exp(sims(j, i) - m) * inv;
    }
    coeff.diagonal().array() -= 1.0;
    out.d_z_video = coeff * z_audio / temperature;
    out.d_z_audio = coeff.transpose() * z_video / temperature;
    return out;
}

}  // namespace longform
