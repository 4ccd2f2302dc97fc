#include <doctest.h>

#include <random>

#include "neld/potential.hpp"
#include "neld/remap.hpp"

using namespace neld;

namespace {

using P = Particles<double>;

P random_particles(std::mt19937_64& rng, const Mat3<double>& cell, Eigen::Index n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  P frac(3, n);
  for (Eigen::Index i = 0; i < frac.size(); ++i) frac.data()[i] = u(rng);
  return cell * frac;
}

P finite_difference(const PotentialSpec<double>& spec, const Mat3<double>& cell, const P& q) {
  constexpr double h = 1e-6;
  P fd(3, q.cols());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    P a = q, b = q;
    a.data()[i] += h;
    b.data()[i] -= h;
    fd.data()[i] = (value(spec, cell, a) - value(spec, cell, b)) / (2.0 * h);
  }
  return fd;
}

double relative_error(const PotentialSpec<double>& spec, const Mat3<double>& cell, const P& q) {
  const P g = gradient(spec, cell, q);
  const double scale = std::max(g.cwiseAbs().maxCoeff(), 1e-2 * spec.grad_bound);
  return (g - finite_difference(spec, cell, q)).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

TEST_CASE("zero potential") {
  const auto spec = zero_potential<double>();
  const P q = P::Random(3, 5);
  CHECK(value(spec, Mat3<double>(Mat3<double>::Identity()), q) == 0.0);
  CHECK(gradient(spec, Mat3<double>(Mat3<double>::Identity()), q).isZero());
}

TEST_CASE("cosine gradient matches finite differences") {
  std::mt19937_64 rng(5);
  const auto flow = make_flow(FlowKind::PlanarElongation, 1.0);
  const Mat3<double> L0 = canonical_cell(flow);
  const std::vector<CosineMode<double>> modes = {{Vec3i(1, 0, 0), 0.5}, {Vec3i(1, -2, 1), 0.2}};
  const auto spec = cosine_potential(modes, cosine_grad_bound(modes, flow, L0));
  std::uniform_real_distribution<double> ut(0.0, flow.period);
  for (int i = 0; i < 300; ++i) {
    const Mat3<double> cell = deformed_lattice(flow, ut(rng), L0);
    CHECK(relative_error(spec, cell, random_particles(rng, cell, 3)) <= 1e-6);
  }
}

TEST_CASE("pair gradient matches finite differences") {
  std::mt19937_64 rng(6);
  const auto flow = make_flow(FlowKind::Shear, 1.0);
  const auto spec = smooth_pair_potential(0.8, 0.3, 5);
  std::uniform_real_distribution<double> ut(0.0, flow.period), u(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const Mat3<double> cell = deformed_lattice(flow, ut(rng), canonical_cell(flow));
    P frac = P::Random(3, 5) * 0.15;
    frac.colwise() += Vec3<double>(u(rng), u(rng), u(rng));
    CHECK(relative_error(spec, cell, P(cell * frac)) <= 1e-6);
  }
}

TEST_CASE("pair potential has compact support") {
  const auto spec = smooth_pair_potential(1.0, 0.2, 2);
  P q(3, 2);
  q.col(0) = Vec3<double>(0.1, 0.1, 0.1);
  q.col(1) = Vec3<double>(0.5, 0.1, 0.1);
  const Mat3<double> cell = Mat3<double>::Identity();
  CHECK(value(spec, cell, q) == 0.0);
  CHECK(gradient(spec, cell, q).isZero());
  // Across the periodic boundary the pair interacts through its image.
  q.col(1) = Vec3<double>(0.95, 0.1, 0.1);
  CHECK(value(spec, cell, q) < 0.0);
}

TEST_CASE("pair force bound is the sup of |phi'|") {
  const PairParams<double> pair{1.3, 0.4};
  double sup = 0.0;
  for (int i = 0; i <= 200000; ++i) {
    const double r = pair.range * i / 200000.0;
    const double u = 1.0 - r * r / (pair.range * pair.range);
    sup = std::max(sup, 6.0 * pair.depth * u * u * r / (pair.range * pair.range));
  }
  CHECK(pair_force_bound(pair) == doctest::Approx(sup).epsilon(1e-8));
}

TEST_CASE("value and gradient are cell periodic") {
  std::mt19937_64 rng(7);
  const auto flow = make_flow(FlowKind::Shear, 1.0);
  const auto cosine = axis_cosine_potential(flow, canonical_cell(flow));
  const auto pair = smooth_pair_potential(1.0, 0.3, 3);
  std::uniform_int_distribution<int> z(-1, 1);
  for (int i = 0; i < 100; ++i) {
    const Mat3<double> cell = deformed_lattice(flow, 0.01 * i, canonical_cell(flow));
    const P q = random_particles(rng, cell, 3);
    P moved = q;
    moved.col(1) += cell * Vec3<double>(z(rng), z(rng), z(rng));
    for (const auto* spec : {&cosine, &pair}) {
      CHECK(std::abs(value(*spec, cell, q) - value(*spec, cell, moved)) < 1e-10);
      CHECK((gradient(*spec, cell, q) - gradient(*spec, cell, moved)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("sampled gradient stays below the declared bound") {
  std::mt19937_64 rng(8);
  for (const auto& flow : {make_flow(FlowKind::Shear, 1.0), make_flow(FlowKind::PlanarElongation, 1.0)}) {
    const Mat3<double> L0 = canonical_cell(flow);
    const auto spec = axis_cosine_potential(flow, L0);
    std::uniform_real_distribution<double> ut(0.0, flow.period);
    double sup = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const Mat3<double> cell = deformed_lattice(flow, ut(rng), L0);
      sup = std::max(sup, gradient(spec, cell, random_particles(rng, cell, 1)).cwiseAbs().maxCoeff());
    }
    CHECK(sup <= spec.grad_bound);
  }
}

TEST_CASE("lagrangian force") {
  std::mt19937_64 rng(9);
  const auto flow = make_flow(FlowKind::Shear, 1.0);
  const Mat3<double> L0 = canonical_cell(flow);
  const auto spec = axis_cosine_potential(flow, L0);
  const P q = random_particles(rng, L0, 2);
  CHECK(lagrangian_force(spec, flow, 0.0, L0, q) == gradient(spec, L0, q));
  CHECK(lagrangian_force(zero_potential<double>(), flow, 0.3, L0, q).isZero());

  Mat3<double> e = Mat3<double>::Identity();
  e(0, 1) = 0.5;
  Mat3<double> e_inv = Mat3<double>::Identity();
  e_inv(0, 1) = -0.5;
  const P ref = e_inv * gradient(spec, Mat3<double>(e * L0), P(e * q));
  CHECK((lagrangian_force(spec, flow, 0.5, L0, q) - ref).cwiseAbs().maxCoeff() < 1e-14);
}

namespace {

// max |exp(TA) F(T, q) - F(0, fold(q))| where fold is the end-of-period remap.
double remap_defect(const PotentialSpec<double>& spec, const FlowSpec<double>& flow, const P& q) {
  const Mat3<double> L0 = canonical_cell(flow);
  const P before = lagrangian_force(spec, flow, flow.period, L0, q);
  P folded(3, q.cols());
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    folded.col(j) = L0 * wrap_unit(L0.inverse() * stretch(flow, flow.period) * q.col(j));
  }
  const P after = lagrangian_force(spec, flow, 0.0, L0, folded);
  return (stretch(flow, flow.period) * before - after).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("lagrangian force is T-periodic in the phase") {
  std::mt19937_64 rng(10);
  const auto flow = make_flow(FlowKind::PlanarElongation, 1.0);
  const Mat3<double> L0 = canonical_cell(flow);
  const auto spec = axis_cosine_potential(flow, L0);
  for (int i = 0; i < 50; ++i) {
    const P q = random_particles(rng, L0, 2);
    const double theta = flow.period * i / 50.0;
    const double wrapped = phase(flow, theta + 3.0 * flow.period).theta;
    CHECK((lagrangian_force(spec, flow, theta, L0, q) - lagrangian_force(spec, flow, wrapped, L0, q))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  }
}

TEST_CASE("remap-invariant potentials give a continuous force across the remap") {
  std::mt19937_64 rng(11);
  for (const auto& flow : {make_flow(FlowKind::Shear, 1.0), make_flow(FlowKind::PlanarElongation, 1.0)}) {
    const auto pair = smooth_pair_potential(1.0, 0.3, 3);
    for (int i = 0; i < 100; ++i) {
      P frac = P::Random(3, 3) * 0.1;
      frac.colwise() += Vec3<double>(0.5, 0.5, 0.5);
      CHECK(remap_defect(pair, flow, P(canonical_cell(flow) * frac)) < 1e-10);
    }
  }
  // Shear modes with m_x = 0 are fixed by the transposed remap matrix.
  const auto shear = make_flow(FlowKind::Shear, 1.0);
  const std::vector<CosineMode<double>> modes = {{Vec3i(0, 1, 0), 0.5}, {Vec3i(0, 1, 2), 0.3}};
  const auto cosine = cosine_potential(modes, cosine_grad_bound(modes, shear, canonical_cell(shear)));
  for (int i = 0; i < 100; ++i) {
    CHECK(remap_defect(cosine, shear, random_particles(rng, canonical_cell(shear), 2)) < 1e-10);
  }
}

TEST_CASE("modes moved by the remap matrix make the force jump at the boundary") {
  std::mt19937_64 rng(12);
  const auto shear = make_flow(FlowKind::Shear, 1.0);
  const auto spec = axis_cosine_potential(shear, canonical_cell(shear));
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) worst = std::max(worst, remap_defect(spec, shear, random_particles(rng, canonical_cell(shear), 1)));
  CHECK(worst > 1e-3);
}

TEST_CASE("validation and cutoff") {
  auto spec = smooth_pair_potential(1.0, 0.6, 2);
  const auto flow = make_flow(FlowKind::Shear, 1.0);
  try {
    check_pair_cutoff(spec, flow, canonical_cell(flow));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CutoffViolation);
  }
  CHECK_NOTHROW(check_pair_cutoff(smooth_pair_potential(1.0, 0.2, 2), flow, canonical_cell(flow)));
  spec.grad_bound = 0.0;
  CHECK_THROWS_AS(validate(spec), Error);
  PotentialSpec<double> empty;
  empty.kind = PotentialKind::FractionalCosine;
  CHECK_THROWS_AS(validate(empty), Error);
}
