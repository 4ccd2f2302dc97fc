#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "neld/flow_lattice.hpp"
#include "neld/types.hpp"

namespace neld {

enum class PotentialKind { Zero, FractionalCosine, SmoothPair };

template <typename Scalar = double>
struct CosineMode {
  Vec3i m;
  Scalar amplitude;
};

// phi(r) = -depth * (1 - (r/range)^2)^3 for r < range, zero beyond: C^2 with
// compact support.
template <typename Scalar = double>
struct PairParams {
  Scalar depth = Scalar(0);
  Scalar range = Scalar(0);
};

/// Lattice-periodic potential defined in fractional coordinates of the
/// current cell, so every automorphism remap is a symmetry of V.
template <typename Scalar = double>
struct PotentialSpec {
  PotentialKind kind = PotentialKind::Zero;
  std::vector<CosineMode<Scalar>> modes;
  PairParams<Scalar> pair;
  // Declared C with sup |grad V| <= C (entrywise).
  Scalar grad_bound = Scalar(1);
};

template <typename Scalar = double>
PotentialSpec<Scalar> zero_potential() {
  return {};
}

/// sup over the cells exp(theta A) L0, theta in [0,T], of the cosine gradient
/// 2-norm per particle, with a 5% margin for the finite theta grid.
template <typename Scalar>
Scalar cosine_grad_bound(const std::vector<CosineMode<Scalar>>& modes, const FlowSpec<Scalar>& flow,
                         const Mat3<Scalar>& L0) {
  using std::abs;
  constexpr int kGrid = 512;
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  Scalar worst = Scalar(0);
  for (int i = 0; i <= kGrid; ++i) {
    const Scalar theta = flow.period * Scalar(i) / Scalar(kGrid);
    const Mat3<Scalar> inv_t = deformed_lattice(flow, theta, L0).inverse().transpose();
    Scalar total = Scalar(0);
    for (const auto& mode : modes) {
      total += abs(mode.amplitude) * two_pi * (inv_t * mode.m.template cast<Scalar>()).norm();
    }
    if (total > worst) worst = total;
  }
  return Scalar(1.05) * worst;
}

template <typename Scalar>
PotentialSpec<Scalar> cosine_potential(std::vector<CosineMode<Scalar>> modes, Scalar grad_bound) {
  PotentialSpec<Scalar> spec;
  spec.kind = PotentialKind::FractionalCosine;
  spec.modes = std::move(modes);
  spec.grad_bound = grad_bound;
  return spec;
}

/// One cosine mode of amplitude c along each lattice axis.
template <typename Scalar>
PotentialSpec<Scalar> axis_cosine_potential(const FlowSpec<Scalar>& flow, const Mat3<Scalar>& L0,
                                            Scalar amplitude = Scalar(0.5)) {
  std::vector<CosineMode<Scalar>> modes = {
      {Vec3i(1, 0, 0), amplitude}, {Vec3i(0, 1, 0), amplitude}, {Vec3i(0, 0, 1), amplitude}};
  const Scalar bound = cosine_grad_bound(modes, flow, L0);
  return cosine_potential(std::move(modes), bound);
}

/// sup_r |phi'(r)| = 96 / (25 sqrt 5) * depth / range, attained at r = range / sqrt 5.
template <typename Scalar>
Scalar pair_force_bound(const PairParams<Scalar>& pair) {
  using std::sqrt;
  return Scalar(96) / (Scalar(25) * sqrt(Scalar(5))) * pair.depth / pair.range;
}

template <typename Scalar>
PotentialSpec<Scalar> smooth_pair_potential(Scalar depth, Scalar range, Eigen::Index particles) {
  PotentialSpec<Scalar> spec;
  spec.kind = PotentialKind::SmoothPair;
  spec.pair = {depth, range};
  const Scalar neighbours = particles > 1 ? Scalar(particles - 1) : Scalar(1);
  spec.grad_bound = neighbours * pair_force_bound(spec.pair);
  return spec;
}

template <typename Scalar>
void validate(const PotentialSpec<Scalar>& spec) {
  if (!std::isfinite(static_cast<double>(spec.grad_bound)) || !(spec.grad_bound > Scalar(0))) {
    throw Error(ErrorCode::Config, "potential gradient bound must be finite and positive");
  }
  if (spec.kind == PotentialKind::FractionalCosine) {
    if (spec.modes.empty()) throw Error(ErrorCode::Config, "cosine potential needs at least one mode");
    for (const auto& mode : spec.modes) {
      if (!std::isfinite(static_cast<double>(mode.amplitude))) {
        throw Error(ErrorCode::Config, "cosine amplitude must be finite");
      }
    }
  }
  if (spec.kind == PotentialKind::SmoothPair) {
    if (!(spec.pair.range > Scalar(0)) || !std::isfinite(static_cast<double>(spec.pair.range)) ||
        !std::isfinite(static_cast<double>(spec.pair.depth))) {
      throw Error(ErrorCode::Config, "pair potential needs a finite depth and a positive range");
    }
  }
}

/// Pair range must stay below half the minimum image of every cell visited
/// during one remapped period.
template <typename Scalar>
void check_pair_cutoff(const PotentialSpec<Scalar>& spec, const FlowSpec<Scalar>& flow, const Mat3<Scalar>& L0) {
  if (spec.kind != PotentialKind::SmoothPair) return;
  constexpr int kGrid = 256;
  for (int i = 0; i <= kGrid; ++i) {
    const Scalar theta = flow.period * Scalar(i) / Scalar(kGrid);
    const Scalar min_image = cell_quality(deformed_lattice(flow, theta, L0)).min_image;
    if (!(spec.pair.range < Scalar(0.5) * min_image)) {
      throw Error(ErrorCode::CutoffViolation, "pair range exceeds half the minimum image over one period");
    }
  }
}

namespace detail {

template <typename Scalar>
Mat3<Scalar> checked_inverse(const Mat3<Scalar>& cell) {
  using std::abs;
  const Scalar scale = cell.cwiseAbs().maxCoeff();
  if (!(scale > Scalar(0)) || abs(cell.determinant()) <= Scalar(1e-14) * scale * scale * scale) {
    throw Error(ErrorCode::SingularCell, "cell matrix is singular");
  }
  return cell.inverse();
}

template <typename Scalar>
void check_cutoff(const PotentialSpec<Scalar>& spec, const Mat3<Scalar>& cell) {
  if (spec.pair.range > Scalar(0.5) * cell_quality(cell).min_image) {
    throw Error(ErrorCode::CutoffViolation, "pair range exceeds half the current minimum image");
  }
}

// Calls visit(i, j, r_vec) for every image separation q_i - q_j - L n closer
// than the pair range, with i < j.
template <typename Scalar, typename Visit>
void for_each_close_pair(const PotentialSpec<Scalar>& spec, const Mat3<Scalar>& cell, const Mat3<Scalar>& inv,
                         const Particles<Scalar>& q, Visit&& visit) {
  using std::round;
  const Scalar range2 = spec.pair.range * spec.pair.range;
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < q.cols(); ++j) {
      Vec3<Scalar> ds = inv * (q.col(i) - q.col(j));
      for (int a = 0; a < 3; ++a) ds(a) -= round(ds(a));
      for (int a = -2; a <= 2; ++a) {
        for (int b = -2; b <= 2; ++b) {
          for (int c = -2; c <= 2; ++c) {
            const Vec3<Scalar> r = cell * (ds + Vec3<Scalar>(Scalar(a), Scalar(b), Scalar(c)));
            if (r.squaredNorm() < range2) visit(i, j, r);
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename Scalar>
Scalar value(const PotentialSpec<Scalar>& spec, const Mat3<Scalar>& cell, const Particles<Scalar>& q) {
  using std::cos;
  if (spec.kind == PotentialKind::Zero) return Scalar(0);
  const Mat3<Scalar> inv = detail::checked_inverse(cell);
  Scalar total = Scalar(0);
  if (spec.kind == PotentialKind::FractionalCosine) {
    const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
    for (Eigen::Index i = 0; i < q.cols(); ++i) {
      const Vec3<Scalar> s = inv * q.col(i);
      for (const auto& mode : spec.modes) {
        total += mode.amplitude * cos(two_pi * mode.m.template cast<Scalar>().dot(s));
      }
    }
    return total;
  }
  detail::check_cutoff(spec, cell);
  const Scalar depth = spec.pair.depth;
  const Scalar range2 = spec.pair.range * spec.pair.range;
  detail::for_each_close_pair(spec, cell, inv, q, [&](Eigen::Index, Eigen::Index, const Vec3<Scalar>& r) {
    const Scalar u = Scalar(1) - r.squaredNorm() / range2;
    total -= depth * u * u * u;
  });
  return total;
}

/// Analytic grad V with respect to Eulerian positions.
template <typename Scalar>
Particles<Scalar> gradient(const PotentialSpec<Scalar>& spec, const Mat3<Scalar>& cell, const Particles<Scalar>& q) {
  using std::sin;
  Particles<Scalar> g = Particles<Scalar>::Zero(3, q.cols());
  if (spec.kind == PotentialKind::Zero) return g;
  const Mat3<Scalar> inv = detail::checked_inverse(cell);
  if (spec.kind == PotentialKind::FractionalCosine) {
    const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
    const Mat3<Scalar> inv_t = inv.transpose();
    for (Eigen::Index i = 0; i < q.cols(); ++i) {
      const Vec3<Scalar> s = inv * q.col(i);
      for (const auto& mode : spec.modes) {
        const Vec3<Scalar> m = mode.m.template cast<Scalar>();
        g.col(i) -= mode.amplitude * two_pi * sin(two_pi * m.dot(s)) * (inv_t * m);
      }
    }
    return g;
  }
  detail::check_cutoff(spec, cell);
  const Scalar depth = spec.pair.depth;
  const Scalar range2 = spec.pair.range * spec.pair.range;
  detail::for_each_close_pair(spec, cell, inv, q, [&](Eigen::Index i, Eigen::Index j, const Vec3<Scalar>& r) {
    const Scalar u = Scalar(1) - r.squaredNorm() / range2;
    // d/dr_vec of -depth u^3 = 6 depth u^2 r_vec / range^2
    const Vec3<Scalar> f = Scalar(6) * depth * u * u / range2 * r;
    g.col(i) += f;
    g.col(j) -= f;
  });
  return g;
}

/// exp(-theta A) grad V(exp(theta A) q_bar) evaluated in the cell exp(theta A) L0.
template <typename Scalar>
Particles<Scalar> lagrangian_force(const PotentialSpec<Scalar>& spec, const FlowSpec<Scalar>& flow, Scalar theta,
                                   const Mat3<Scalar>& L0, const Particles<Scalar>& q_bar) {
  if (spec.kind == PotentialKind::Zero) return Particles<Scalar>::Zero(3, q_bar.cols());
  const Mat3<Scalar> forward = stretch(flow, theta);
  return stretch(flow, -theta) * gradient(spec, Mat3<Scalar>(forward * L0), Particles<Scalar>(forward * q_bar));
}

}  // namespace neld
