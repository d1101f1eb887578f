#pragma once

// Centering and whitening of received frames ahead of source separation.
//
// Frames are held as a K-by-H complex matrix: one column per OFDM symbol
// (frame), H frames total. Whitening subtracts the per-subcarrier sample mean
// and applies A = D^{-1/2} E^H from the eigendecomposition E D E^H of the
// sample covariance, so the output's sample covariance is the identity by
// construction.
//
// A numerically singular covariance (smallest eigenvalue below 1e-12 of the
// largest) aborts with "degenerate sample covariance". That situation is not
// merely numerical: a rank-deficient mixing matrix makes the attack's
// inverse problem underdetermined, so the error doubles as a security signal.
//
// Noise is not explicitly compensated here (no quasi-whitening); the
// kurtosis contrast in the separation stage absorbs moderate noise instead.

#include "tmadm/types.hpp"

#include <stdexcept>

namespace tmadm {

struct WhiteningResult {
  CMat whitened;   // K x H, sample covariance = identity
  CMat transform;  // K x K whitening matrix A
  CVec mean;       // length-K centering vector
};

inline WhiteningResult center_and_whiten(const CMat& frames) {
  const Eigen::Index K = frames.rows();
  const Eigen::Index H = frames.cols();
  if (H < K)
    throw std::invalid_argument("need at least K frames to whiten");
  WhiteningResult r;
  r.mean = frames.rowwise().mean();
  CMat centered = frames.colwise() - r.mean;
  CMat cov = (centered * centered.adjoint()) / static_cast<double>(H);
  Eigen::SelfAdjointEigenSolver<CMat> eig(cov);
  const RVec d = eig.eigenvalues();
  if (d(0) < 1e-12 * d(K - 1))
    throw std::runtime_error("degenerate sample covariance");
  r.transform = d.array().rsqrt().matrix().asDiagonal() *
                eig.eigenvectors().adjoint();
  r.whitened.noalias() = r.transform * centered;
  return r;
}

}  // namespace tmadm
