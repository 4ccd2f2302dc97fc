#pragma once

#include <cmath>

#include "neld/flow_lattice.hpp"
#include "neld/types.hpp"

namespace neld {

enum class Coords { AbsoluteLagrangian, RemappedLagrangian, AbsoluteEulerian, RemappedEulerian };

inline const char* to_string(Coords c) {
  switch (c) {
    case Coords::AbsoluteLagrangian: return "AbsoluteLagrangian";
    case Coords::RemappedLagrangian: return "RemappedLagrangian";
    case Coords::AbsoluteEulerian: return "AbsoluteEulerian";
    case Coords::RemappedEulerian: return "RemappedEulerian";
  }
  return "?";
}

template <typename Scalar = double>
struct SystemState {
  Coords coords = Coords::RemappedLagrangian;
  Particles<Scalar> q;
  Particles<Scalar> p;
  Scalar t = Scalar(0);

  Eigen::Index size() const { return q.cols(); }
};

inline constexpr double kWrapSnap = 1e-15;

template <typename Scalar>
Scalar wrap_coordinate(Scalar x) {
  using std::floor;
  if (!std::isfinite(static_cast<double>(x))) {
    throw Error(ErrorCode::NonFinite, "cannot wrap a non-finite coordinate");
  }
  Scalar y = x - floor(x);
  if (y >= Scalar(1) - Scalar(kWrapSnap)) y = Scalar(0);
  return y;
}

/// Componentwise x mod 1 into the half-open cell [0,1)^3.
template <typename Derived>
Vec3<typename Derived::Scalar> wrap_unit(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return Vec3<Scalar>(wrap_coordinate(Scalar(x(0))), wrap_coordinate(Scalar(x(1))), wrap_coordinate(Scalar(x(2))));
}

/// Folds an absolute Eulerian position into the remapped cell exp([t]A) L0.
template <typename Scalar>
Vec3<Scalar> remap_position_eulerian(const FlowSpec<Scalar>& flow, const Mat3<Scalar>& L0, Scalar t,
                                     const Vec3<Scalar>& q_tilde) {
  const Scalar theta = phase(flow, t).theta;
  const Vec3<Scalar> frac = L0.inverse() * (stretch(flow, -theta) * q_tilde);
  return stretch(flow, theta) * (L0 * wrap_unit(frac));
}

/// Lagrangian position remap, equal to exp(-[t]A) g_hat_t(exp(tA) q).
///
/// Evaluated in lattice coordinates: L0^{-1} exp(kTA) L0 is the integer matrix
/// M_eff^{-k}, so the fold is a wrap of M_eff^{-k} L0^{-1} q. Exact in integers
/// for |k| up to roughly 40 periods of elongational flow.
template <typename Scalar>
Vec3<Scalar> remap_position_lagrangian(const FlowSpec<Scalar>& flow, const Mat3<Scalar>& L0, Scalar t,
                                       const Vec3<Scalar>& q) {
  const long long k = phase(flow, t).k;
  const Mat3i lattice_map = integer_power(period_automorphism(flow, L0), -k);
  const Vec3<Scalar> frac = lattice_map.template cast<Scalar>() * (L0.inverse() * q);
  return L0 * wrap_unit(frac);
}

/// p_bar = exp(floor(t/T) T A) p.
template <typename Scalar>
Vec3<Scalar> remap_momentum_lagrangian(const FlowSpec<Scalar>& flow, Scalar t, const Vec3<Scalar>& p) {
  const long long k = phase(flow, t).k;
  return stretch(flow, Scalar(k) * flow.period) * p;
}

namespace detail {

inline void require(Coords actual, Coords expected) {
  if (actual != expected) {
    throw Error(ErrorCode::WrongFrame, std::string("expected ") + to_string(expected) + ", got " +
                                           to_string(actual));
  }
}

template <typename Scalar>
SystemState<Scalar> linear_map(const SystemState<Scalar>& in, const Mat3<Scalar>& m, Coords out) {
  SystemState<Scalar> s;
  s.coords = out;
  s.q = m * in.q;
  s.p = m * in.p;
  s.t = in.t;
  return s;
}

}  // namespace detail

/// Phi_t: remapped Lagrangian -> remapped Eulerian, block-diagonal exp([t]A).
template <typename Scalar>
SystemState<Scalar> to_remapped_eulerian(const FlowSpec<Scalar>& flow, const SystemState<Scalar>& state) {
  detail::require(state.coords, Coords::RemappedLagrangian);
  return detail::linear_map(state, stretch(flow, phase(flow, state.t).theta), Coords::RemappedEulerian);
}

template <typename Scalar>
SystemState<Scalar> to_remapped_lagrangian(const FlowSpec<Scalar>& flow, const SystemState<Scalar>& state) {
  detail::require(state.coords, Coords::RemappedEulerian);
  return detail::linear_map(state, stretch(flow, -phase(flow, state.t).theta), Coords::RemappedLagrangian);
}

/// Phi_tilde_t: absolute Lagrangian -> absolute Eulerian, exp(tA) on both blocks.
template <typename Scalar>
SystemState<Scalar> to_absolute_eulerian(const FlowSpec<Scalar>& flow, const SystemState<Scalar>& state) {
  detail::require(state.coords, Coords::AbsoluteLagrangian);
  return detail::linear_map(state, stretch(flow, state.t), Coords::AbsoluteEulerian);
}

template <typename Scalar>
SystemState<Scalar> to_absolute_lagrangian(const FlowSpec<Scalar>& flow, const SystemState<Scalar>& state) {
  detail::require(state.coords, Coords::AbsoluteEulerian);
  return detail::linear_map(state, stretch(flow, -state.t), Coords::AbsoluteLagrangian);
}

/// R_t: absolute Lagrangian -> remapped Lagrangian.
template <typename Scalar>
SystemState<Scalar> remap_lagrangian_state(const FlowSpec<Scalar>& flow, const Mat3<Scalar>& L0,
                                           const SystemState<Scalar>& state) {
  detail::require(state.coords, Coords::AbsoluteLagrangian);
  SystemState<Scalar> s = state;
  s.coords = Coords::RemappedLagrangian;
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    s.q.col(i) = remap_position_lagrangian(flow, L0, state.t, Vec3<Scalar>(state.q.col(i)));
    s.p.col(i) = remap_momentum_lagrangian(flow, state.t, Vec3<Scalar>(state.p.col(i)));
  }
  return s;
}

/// R_tilde_t: absolute Eulerian -> remapped Eulerian (momenta unchanged).
template <typename Scalar>
SystemState<Scalar> remap_eulerian_state(const FlowSpec<Scalar>& flow, const Mat3<Scalar>& L0,
                                         const SystemState<Scalar>& state) {
  detail::require(state.coords, Coords::AbsoluteEulerian);
  SystemState<Scalar> s = state;
  s.coords = Coords::RemappedEulerian;
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    s.q.col(i) = remap_position_eulerian(flow, L0, state.t, Vec3<Scalar>(state.q.col(i)));
  }
  return s;
}

/// Max-norm gap between Phi_t(R_t(x)) and R_tilde_t(Phi_tilde_t(x)) for x in
/// absolute Lagrangian coordinates.
template <typename Scalar>
Scalar check_diagram(const FlowSpec<Scalar>& flow, const Mat3<Scalar>& L0, const SystemState<Scalar>& x) {
  const SystemState<Scalar> via_lagrangian = to_remapped_eulerian(flow, remap_lagrangian_state(flow, L0, x));
  const SystemState<Scalar> via_eulerian = remap_eulerian_state(flow, L0, to_absolute_eulerian(flow, x));
  const Scalar dq = (via_lagrangian.q - via_eulerian.q).cwiseAbs().maxCoeff();
  const Scalar dp = (via_lagrangian.p - via_eulerian.p).cwiseAbs().maxCoeff();
  return dq > dp ? dq : dp;
}

}  // namespace neld
