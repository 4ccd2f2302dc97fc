#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "neld/types.hpp"

namespace neld {

enum class FlowKind { Shear, PlanarElongation, Quiescent };

/// Hyperbolic SL(3,Z) automorphism used for Kraynik-Reinelt remapping,
/// with M * S = S * diag(lambda, 1/lambda, 1).
template <typename Scalar = double>
struct KrBasis {
  Mat3i M;
  Mat3<Scalar> S;
  Scalar lambda;
  Scalar eta;  // log(lambda)
};

template <typename Scalar = double>
KrBasis<Scalar> kr_basis() {
  using std::log;
  using std::sqrt;
  KrBasis<Scalar> basis;
  basis.M << 2, 1, 0,
             1, 1, 0,
             0, 0, 1;
  // Roots of x^2 - 3x + 1, the characteristic polynomial of the 2x2 block.
  basis.lambda = (Scalar(3) + sqrt(Scalar(5))) / Scalar(2);
  basis.eta = log(basis.lambda);
  // (M - mu I) v = 0 gives v = (1, mu - 2) for each eigenvalue mu of the block.
  Vec3<Scalar> expanding(Scalar(1), basis.lambda - Scalar(2), Scalar(0));
  Vec3<Scalar> contracting(Scalar(1), Scalar(1) / basis.lambda - Scalar(2), Scalar(0));
  basis.S.col(0) = expanding.normalized();
  basis.S.col(1) = contracting.normalized();
  basis.S.col(2) = Vec3<Scalar>::UnitZ();
  return basis;
}

/// Integer inverse of a unimodular matrix via the adjugate.
inline Mat3i unimodular_inverse(const Mat3i& m) {
  Mat3i adj;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const int r0 = (j + 1) % 3, r1 = (j + 2) % 3;
      const int c0 = (i + 1) % 3, c1 = (i + 2) % 3;
      adj(i, j) = m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0);
    }
  }
  const long long det = m(0, 0) * adj(0, 0) + m(0, 1) * adj(1, 0) + m(0, 2) * adj(2, 0);
  return det == 1 ? adj : Mat3i(-adj);
}

inline long long integer_det(const Mat3i& m) {
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

inline Mat3i integer_power(const Mat3i& m, long long k) {
  Mat3i base = k < 0 ? unimodular_inverse(m) : m;
  unsigned long long e = k < 0 ? static_cast<unsigned long long>(-k) : static_cast<unsigned long long>(k);
  Mat3i result = Mat3i::Identity();
  while (e != 0) {
    if (e & 1ULL) result = result * base;
    base = base * base;
    e >>= 1;
  }
  return result;
}

template <typename Scalar = double>
struct FlowSpec {
  FlowKind kind = FlowKind::Quiescent;
  Scalar rate = Scalar(0);
  Mat3<Scalar> A = Mat3<Scalar>::Zero();
  Scalar period = Scalar(1);
  // The conventional automorphism (LE shift or KR matrix), sign-adjusted
  // for negative rates.
  Mat3i automorphism = Mat3i::Identity();
  // Matrix applied on the right at every period boundary for the canonical
  // cell: exp(T A) * L0 * remap_matrix == L0.
  Mat3i remap_matrix = Mat3i::Identity();
  Mat3<Scalar> eigenbasis = Mat3<Scalar>::Identity();
  Scalar lambda = Scalar(1);
  Scalar eta = Scalar(0);
};

/// exp(t A) in closed form: affine for shear, diagonal for elongation.
template <typename Scalar>
Mat3<Scalar> stretch(const FlowSpec<Scalar>& flow, Scalar t) {
  using std::exp;
  Mat3<Scalar> e = Mat3<Scalar>::Identity();
  switch (flow.kind) {
    case FlowKind::Shear:
      e(0, 1) = t * flow.rate;
      break;
    case FlowKind::PlanarElongation:
      e(0, 0) = exp(t * flow.rate);
      e(1, 1) = exp(-t * flow.rate);
      break;
    case FlowKind::Quiescent:
      break;
  }
  return e;
}

/// Canonical initial cell: identity for shear, S^{-1} for planar elongation.
template <typename Scalar>
Mat3<Scalar> canonical_cell(const FlowSpec<Scalar>& flow) {
  if (flow.kind == FlowKind::PlanarElongation) {
    return flow.eigenbasis.inverse();
  }
  return Mat3<Scalar>::Identity();
}

/// Integer matrix L0^{-1} exp(-T A) L0; throws IncompatibleCell when the
/// deformed lattice after one period is not the lattice of L0.
template <typename Scalar>
Mat3i period_automorphism(const FlowSpec<Scalar>& flow, const Mat3<Scalar>& L0) {
  using std::abs;
  using std::llround;
  const Mat3<Scalar> real = L0.inverse() * stretch(flow, -flow.period) * L0;
  Mat3i m;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      m(i, j) = static_cast<long long>(llround(static_cast<double>(real(i, j))));
      if (abs(real(i, j) - Scalar(m(i, j))) > Scalar(1e-8)) {
        throw Error(ErrorCode::IncompatibleCell,
                    "cell lattice is not preserved after one remap period");
      }
    }
  }
  if (integer_det(m) != 1) {
    throw Error(ErrorCode::IncompatibleCell, "period automorphism does not have determinant 1");
  }
  return m;
}

template <typename Scalar>
FlowSpec<Scalar> make_flow(FlowKind kind, Scalar eps) {
  using std::abs;
  if (kind == FlowKind::Quiescent) {
    throw Error(ErrorCode::Config, "quiescent flow has no rate; use make_quiescent");
  }
  if (eps == Scalar(0) || !std::isfinite(static_cast<double>(eps))) {
    throw Error(ErrorCode::ZeroRate, "strain rate must be a nonzero real number");
  }
  FlowSpec<Scalar> flow;
  flow.kind = kind;
  flow.rate = eps;
  const bool negative = eps < Scalar(0);
  if (kind == FlowKind::Shear) {
    flow.A(0, 1) = eps;
    flow.period = Scalar(1) / abs(eps);
    Mat3i le = Mat3i::Identity();
    le(0, 1) = -1;
    flow.automorphism = negative ? unimodular_inverse(le) : le;
  } else {
    const KrBasis<Scalar> kr = kr_basis<Scalar>();
    flow.A(0, 0) = eps;
    flow.A(1, 1) = -eps;
    flow.period = kr.eta / abs(eps);
    flow.automorphism = negative ? unimodular_inverse(kr.M) : kr.M;
    flow.eigenbasis = kr.S;
    flow.lambda = kr.lambda;
    flow.eta = kr.eta;
  }
  flow.remap_matrix = period_automorphism(flow, canonical_cell(flow));
  return flow;
}

/// Zero background flow (equilibrium Langevin) sampled with period T.
template <typename Scalar>
FlowSpec<Scalar> make_quiescent(Scalar period) {
  if (!(period > Scalar(0))) {
    throw Error(ErrorCode::Config, "sampling period must be positive");
  }
  FlowSpec<Scalar> flow;
  flow.period = period;
  return flow;
}

template <typename Scalar>
Mat3<Scalar> deformed_lattice(const FlowSpec<Scalar>& flow, Scalar t, const Mat3<Scalar>& L0) {
  return stretch(flow, t) * L0;
}

template <typename Scalar = double>
struct Phase {
  Scalar theta;
  long long k;
};

/// t = k T + theta with k = floor(t / T) and theta in [0, T).
template <typename Scalar>
Phase<Scalar> phase(const FlowSpec<Scalar>& flow, Scalar t) {
  using std::floor;
  const Scalar T = flow.period;
  long long k = static_cast<long long>(floor(t / T));
  Scalar theta = t - Scalar(k) * T;
  if (theta < Scalar(0)) {
    theta += T;
    --k;
  } else if (theta >= T) {
    theta -= T;
    ++k;
  }
  return {theta, k};
}

/// Shear stretch centred in [-1/2, 1/2) (nearest-integer remap); display only.
template <typename Scalar>
Scalar centered_shear_offset(const FlowSpec<Scalar>& flow, Scalar t) {
  using std::floor;
  const Scalar s = t * flow.rate;
  return s - floor(s + Scalar(0.5));
}

template <typename Scalar = double>
struct LatticeFrame {
  Mat3<Scalar> L0 = Mat3<Scalar>::Identity();
  Scalar theta = Scalar(0);
  long long remap_count = 0;
  Mat3<Scalar> cell = Mat3<Scalar>::Identity();
};

template <typename Scalar>
LatticeFrame<Scalar> make_frame(const FlowSpec<Scalar>& flow, const Mat3<Scalar>& L0,
                                Scalar theta = Scalar(0), long long remap_count = 0) {
  return {L0, theta, remap_count, deformed_lattice(flow, theta, L0)};
}

/// Moves the phase forward by dtheta; theta may land on T, where the caller
/// must remap.
template <typename Scalar>
LatticeFrame<Scalar> advance_frame(const FlowSpec<Scalar>& flow, const LatticeFrame<Scalar>& frame,
                                   Scalar dtheta) {
  return make_frame(flow, frame.L0, frame.theta + dtheta, frame.remap_count);
}

inline constexpr double kPhaseBoundaryTolerance = 1e-9;

template <typename Scalar>
LatticeFrame<Scalar> remap_lattice(const FlowSpec<Scalar>& flow, const LatticeFrame<Scalar>& frame) {
  using std::abs;
  if (abs(frame.theta - flow.period) > Scalar(kPhaseBoundaryTolerance)) {
    throw Error(ErrorCode::NotAtBoundary, "remap requested before the phase reached the period");
  }
  // Validates that exp(T A) L0 M_eff = L0 for an integer M_eff.
  (void)period_automorphism(flow, frame.L0);
  return {frame.L0, Scalar(0), frame.remap_count + 1, frame.L0};
}

template <typename Scalar = double>
struct CellQuality {
  Scalar min_image;
  Scalar cond;
};

template <typename Scalar>
CellQuality<Scalar> cell_quality(const Mat3<Scalar>& cell) {
  using std::abs;
  const Scalar scale = cell.cwiseAbs().maxCoeff();
  if (!(scale > Scalar(0)) || abs(cell.determinant()) <= Scalar(1e-14) * scale * scale * scale) {
    throw Error(ErrorCode::SingularCell, "cell matrix is singular");
  }
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (int i = -2; i <= 2; ++i) {
    for (int j = -2; j <= 2; ++j) {
      for (int k = -2; k <= 2; ++k) {
        if (i == 0 && j == 0 && k == 0) continue;
        const Scalar len = (cell * Vec3<Scalar>(Scalar(i), Scalar(j), Scalar(k))).norm();
        if (len < best) best = len;
      }
    }
  }
  using std::sqrt;
  Eigen::SelfAdjointEigenSolver<Mat3<Scalar>> eig;
  eig.computeDirect(cell.transpose() * cell, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  return {best, sqrt(ev(2) / ev(0))};
}

}  // namespace neld
