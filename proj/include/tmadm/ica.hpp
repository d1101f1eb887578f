#pragma once

// Two-stage constant-modulus source separation.
//
// Stage 1 is a FastICA-style approximate Newton iteration on every column
// followed by symmetric decorrelation each sweep; it converges to the
// sample-global optimum of the summed non-Gaussianity contrast under the
// orthogonality constraint. Stage 2 fine-tunes each column independently
// (no decorrelation) with a small signed gradient step, exploiting the fact
// that for unit-modulus sources the contrast has an extremum exactly at the
// separating vectors.
//
// Contrasts are smooth functions of v = |w^H y|^2:
//   kurtosis:   G(v) = v^2/2,      g(v) = v,             g'(v) = 1
//   negentropy: G(v) = -exp(-v/2), g(v) = exp(-v/2)/2,   g'(v) = -exp(-v/2)/4
//
// The stage-2 step direction is chosen by the curvature of G at unit
// modulus: when g'(1) > 0 (kurtosis) the constant-modulus point is a local
// minimum of the contrast along unconstrained perturbations, so the step
// descends; otherwise (negentropy) it ascends. The direction is validated
// empirically per column by backtracking (step halving on non-improvement)
// rather than trusted analytically.

#include "tmadm/preprocess.hpp"
#include "tmadm/types.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace tmadm {

enum class ContrastKind { kurtosis, negentropy };

struct Contrast {
  ContrastKind kind = ContrastKind::kurtosis;

  double G(double v) const {
    return kind == ContrastKind::kurtosis ? 0.5 * v * v : -std::exp(-0.5 * v);
  }
  double g(double v) const {
    return kind == ContrastKind::kurtosis ? v : 0.5 * std::exp(-0.5 * v);
  }
  double gprime(double v) const {
    return kind == ContrastKind::kurtosis ? 1.0 : -0.25 * std::exp(-0.5 * v);
  }
};

struct IcaOptions {
  Contrast contrast{};
  int max_iter_stage1 = 200;
  int max_iter_stage2 = 500;
  double tol = 1e-6;       // stage-1 convergence threshold on |W_new^H W| vs I
  double mu = 0.1;         // stage-2 initial step size (halved on non-improvement)
  bool enable_stage2 = true;
  bool record_trace = true;  // per-iteration total non-Gaussianity
  std::uint64_t seed = 1;    // W initialization stream
};

// Sample mean of G(|w^H y|^2) over the whitened frames. Callers should pass
// a unit-norm w; the value is still well defined otherwise.
inline double nongaussianity(const CVec& w, const CMat& y_white,
                             const Contrast& c) {
  const Eigen::Index H = y_white.cols();
  double acc = 0.0;
  for (Eigen::Index t = 0; t < H; ++t) {
    const double v = std::norm(w.dot(y_white.col(t)));
    acc += c.G(v);
  }
  return acc / static_cast<double>(H);
}

// Lagrange-multiplier estimate lambda = E{ |w^H y|^2 g(|w^H y|^2) }.
inline double lambda_estimate(const CVec& w, const CMat& y_white,
                              const Contrast& c) {
  const Eigen::Index H = y_white.cols();
  double acc = 0.0;
  for (Eigen::Index t = 0; t < H; ++t) {
    const double v = std::norm(w.dot(y_white.col(t)));
    acc += v * c.g(v);
  }
  return acc / static_cast<double>(H);
}

namespace detail {
// Shared first-order statistics of the contrast at w:
//   numerator = E{ y (w^H y)^* g(|w^H y|^2) } - lambda * w
//   denom_gs  = E{ g(|w^H y|^2) + 2 |w^H y|^2 g'(|w^H y|^2) }
// The numerator is the gradient of the constrained objective with respect to
// the conjugate coordinates (half the real-coordinate gradient).
struct ContrastStats {
  CVec numerator;
  double lambda = 0.0;
  double denom_gs = 0.0;
};

inline ContrastStats contrast_stats(const CVec& w, const CMat& y_white,
                                    const Contrast& c) {
  const Eigen::Index K = y_white.rows();
  const Eigen::Index H = y_white.cols();
  ContrastStats st;
  st.numerator = CVec::Zero(K);
  for (Eigen::Index t = 0; t < H; ++t) {
    const cxd z = w.dot(y_white.col(t));  // w^H y
    const double v = std::norm(z);
    const double gv = c.g(v);
    st.numerator += y_white.col(t) * (std::conj(z) * gv);
    st.lambda += v * gv;
    st.denom_gs += gv + 2.0 * v * c.gprime(v);
  }
  const double invH = 1.0 / static_cast<double>(H);
  st.numerator *= invH;
  st.lambda *= invH;
  st.denom_gs *= invH;
  st.numerator -= st.lambda * w;
  return st;
}
}  // namespace detail

// One approximate Newton step:
//   w' = w - [E{y (w^H y)^* g} - lambda w] / [E{g + 2|w^H y|^2 g'} - lambda].
inline CVec newton_update(const CVec& w, const CMat& y_white,
                          const Contrast& c) {
  const detail::ContrastStats st = detail::contrast_stats(w, y_white, c);
  const double den = st.denom_gs - st.lambda;
  if (std::abs(den) < 1e-12)
    throw std::runtime_error("Newton denominator vanishes");
  return w - st.numerator / den;
}

// Symmetric decorrelation W' = W (W^H W)^{-1/2}; W'^H W' = I by construction.
inline CMat symmetric_decorrelate(const CMat& W) {
  Eigen::SelfAdjointEigenSolver<CMat> eig(W.adjoint() * W);
  const RVec d = eig.eigenvalues();
  if (d(0) < 1e-13 * d(d.size() - 1) || !(d(0) > 0.0))
    throw std::runtime_error("collapsed unmixing columns");
  return W * (eig.eigenvectors() *
              d.array().rsqrt().matrix().asDiagonal() *
              eig.eigenvectors().adjoint());
}

// One normalized gradient-ascent step on the constrained objective:
//   w' = normalize(w + mu * [E{y (w^H y)^* g} - lambda w]).
inline CVec gradient_update(const CVec& w, const CMat& y_white,
                            const Contrast& c, double mu) {
  const detail::ContrastStats st = detail::contrast_stats(w, y_white, c);
  CVec wn = w + mu * st.numerator;
  const double n = wn.norm();
  if (!(n > 0.0)) throw std::runtime_error("zero vector after gradient update");
  return wn / n;
}

struct CmicaResult {
  WhiteningResult white;
  CMat W;                     // unmixing matrix estimate, columns w_1..w_K
  std::vector<double> trace;  // total non-Gaussianity per iteration
  double stage1_plateau = 0.0;
  int stage1_iterations = 0;
  bool stage1_converged = false;
  bool stage2_converged = false;
};

// Full two-stage pipeline on raw frames (K x H, one column per frame).
// Non-convergence is not an error: the best iterate is returned with the
// converged flags left false.
inline CmicaResult cmica(const CMat& frames, const IcaOptions& opts) {
  const Eigen::Index K = frames.rows();
  CmicaResult out;
  out.white = center_and_whiten(frames);
  const CMat& Yw = out.white.whitened;
  Rng rng(opts.seed);

  CMat W(K, K);
  for (Eigen::Index i = 0; i < K; ++i)
    for (Eigen::Index j = 0; j < K; ++j) W(i, j) = cxd(rng.normal(), rng.normal());
  W = symmetric_decorrelate(W);

  const Contrast& c = opts.contrast;
  auto total_ng = [&](const CMat& M) {
    double acc = 0.0;
    for (Eigen::Index l = 0; l < K; ++l) acc += nongaussianity(M.col(l), Yw, c);
    return acc;
  };

  // Stage 1: Newton sweep + symmetric decorrelation until the aligned
  // cross-Gram |W_new^H W| stops moving.
  for (int it = 0; it < opts.max_iter_stage1; ++it) {
    CMat Wn(K, K);
    for (Eigen::Index l = 0; l < K; ++l) {
      CVec wl = W.col(l);
      for (int restart = 0;; ++restart) {
        try {
          Wn.col(l) = newton_update(wl, Yw, c);
          break;
        } catch (const std::runtime_error&) {
          if (restart >= 64) throw;  // systematically degenerate data
          // Restart the column from a fresh random vector.
          for (Eigen::Index i = 0; i < K; ++i) wl(i) = cxd(rng.normal(), rng.normal());
          wl.normalize();
        }
      }
    }
    Wn = symmetric_decorrelate(Wn);
    const CMat G = (Wn.adjoint() * W).cwiseAbs();
    double err = 0.0;
    for (Eigen::Index i = 0; i < K; ++i)
      for (Eigen::Index j = 0; j < K; ++j)
        err = std::max(err, std::abs(G(i, j) - (i == j ? 1.0 : 0.0)));
    W = Wn;
    out.stage1_iterations = it + 1;
    if (opts.record_trace) out.trace.push_back(total_ng(W));
    if (err < opts.tol) {
      out.stage1_converged = true;
      break;
    }
  }
  out.stage1_plateau = total_ng(W);
  if (opts.record_trace && out.trace.empty()) out.trace.push_back(out.stage1_plateau);
  out.W = W;

  if (!opts.enable_stage2) return out;

  // Stage 2: per-column signed gradient refinement without decorrelation.
  // Direction: descend when g'(1) > 0, else ascend (see header comment).
  const double sgn = c.gprime(1.0) > 0.0 ? -1.0 : 1.0;
  std::vector<double> mu(static_cast<std::size_t>(K), opts.mu);
  std::vector<double> J(static_cast<std::size_t>(K));
  for (Eigen::Index l = 0; l < K; ++l)
    J[static_cast<std::size_t>(l)] = nongaussianity(W.col(l), Yw, c);
  for (int it = 0; it < opts.max_iter_stage2; ++it) {
    double max_gain = 0.0;
    for (Eigen::Index l = 0; l < K; ++l) {
      auto& mul = mu[static_cast<std::size_t>(l)];
      auto& Jl = J[static_cast<std::size_t>(l)];
      const CVec wn = gradient_update(W.col(l), Yw, c, sgn * mul);
      const double Jn = nongaussianity(wn, Yw, c);
      if (sgn * (Jn - Jl) >= 0.0) {
        max_gain = std::max(max_gain, sgn * (Jn - Jl));
        W.col(l) = wn;
        Jl = Jn;
      } else {
        mul *= 0.5;  // backtrack; the step overshot the extremum
      }
    }
    if (opts.record_trace) out.trace.push_back(total_ng(W));
    if (max_gain < 1e-12 && it > 10) {
      out.stage2_converged = true;
      break;
    }
  }
  out.W = W;
  return out;
}

}  // namespace tmadm
