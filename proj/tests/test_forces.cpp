#include <doctest.h>

#include <cmath>

#include "fabsim/errors.hpp"
#include "fabsim/forces.hpp"
#include "fabsim/rng.hpp"

using namespace fabsim;

namespace {

TriMesh folded_hinge(double fold_rad, double rest_fold = 0.0) {
  TriMesh m;
  m.positions = {{0, 0, 0},
                 {1, 0, 0},
                 {0.5, std::cos(rest_fold), -std::sin(rest_fold)},
                 {0.5, -1, 0}};
  m.faces = {Eigen::Vector3i(0, 1, 2), Eigen::Vector3i(0, 3, 1)};
  m.velocities.assign(4, Vec3::Zero());
  finalize_topology(m, 0.1);
  m.positions[2] = Vec3(0.5, std::cos(fold_rad), -std::sin(fold_rad));
  return m;
}

MaterialParams test_material() {
  MaterialParams mp;
  // Distinct entries so the bilinear lookup is exercised off the axes.
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 5; ++c) mp.bend_matrix(r, c) = 1e-5 * (1 + r + 2 * c);
  mp.stiffness_scale = 1.3;
  return mp;
}

}  // namespace

TEST_CASE("stiffness lookup hits breakpoints exactly") {
  MaterialParams mp = test_material();
  CHECK(bending_stiffness_lookup(mp, 0.0, 0.0) ==
        doctest::Approx(1.3 * mp.bend_matrix(0, 0)).epsilon(1e-14));
  CHECK(bending_stiffness_lookup(mp, M_PI / 4, 0.0) ==
        doctest::Approx(1.3 * mp.bend_matrix(1, 0)).epsilon(1e-14));
  const double hi = mp.curvature_range[1];
  CHECK(bending_stiffness_lookup(mp, M_PI / 2, hi) ==
        doctest::Approx(1.3 * mp.bend_matrix(2, 4)).epsilon(1e-14));
}

TEST_CASE("stiffness lookup bilinear midpoint is the 4-corner average") {
  MaterialParams mp = test_material();
  const double theta = 22.5 * M_PI / 180.0;
  const double col_w = (mp.curvature_range[1] - mp.curvature_range[0]) / 4.0;
  const double reparam = mp.curvature_range[0] + 1.5 * col_w;  // cols 1|2
  const double expect = 1.3 * 0.25 *
                        (mp.bend_matrix(0, 1) + mp.bend_matrix(0, 2) +
                         mp.bend_matrix(1, 1) + mp.bend_matrix(1, 2));
  CHECK(bending_stiffness_lookup(mp, theta, reparam) ==
        doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("stiffness lookup clamps rows and columns") {
  MaterialParams mp = test_material();
  // Clamping oracle: out-of-range inputs equal the edge evaluations.
  CHECK(bending_stiffness_lookup(mp, 120.0 * M_PI / 180.0, 10.0) ==
        bending_stiffness_lookup(mp, 90.0 * M_PI / 180.0, 10.0));
  CHECK(bending_stiffness_lookup(mp, 0.3, mp.curvature_range[1] + 5.0) ==
        bending_stiffness_lookup(mp, 0.3, mp.curvature_range[1]));
}

TEST_CASE("bending force vanishes in the flat rest configuration") {
  TriMesh m = folded_hinge(0.0);
  HingeForce hf = bending_force(m, m.hinges[0], test_material());
  CHECK(hf.magnitude == 0.0);
  for (const auto& f : hf.f) CHECK(f.norm() == 0.0);
}

TEST_CASE("bending force sums to zero and has zero net edge torque") {
  Rng rng(99);
  MaterialParams mp = test_material();
  for (int trial = 0; trial < 30; ++trial) {
    TriMesh m = folded_hinge(rng.uniform(-1.2, 1.2));
    for (auto& p : m.positions) {
      p += Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                rng.uniform(-0.05, 0.05));
    }
    const Hinge& h = m.hinges[0];
    HingeForce hf = bending_force(m, h, mp);

    Vec3 sum = hf.f[0] + hf.f[1] + hf.f[2] + hf.f[3];
    double maxf = 0.0;
    for (const auto& f : hf.f) maxf = std::max(maxf, f.norm());
    REQUIRE(maxf > 0.0);
    CHECK(sum.norm() <= 1e-8 * maxf);

    const Vec3 mid = 0.5 * (m.positions[h.v0] + m.positions[h.v1]);
    Vec3 torque = (m.positions[h.v0] - mid).cross(hf.f[0]) +
                  (m.positions[h.v1] - mid).cross(hf.f[1]) +
                  (m.positions[h.opp0] - mid).cross(hf.f[2]) +
                  (m.positions[h.opp1] - mid).cross(hf.f[3]);
    CHECK(torque.norm() <= 1e-8 * maxf);
  }
}

TEST_CASE("bending force magnitude equals the stiffness law exactly") {
  Rng rng(4242);
  MaterialParams mp = test_material();
  for (int trial = 0; trial < 25; ++trial) {
    TriMesh m = folded_hinge(rng.uniform(-1.4, 1.4));
    for (auto& p : m.positions) {
      p += Vec3(rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03),
                rng.uniform(-0.03, 0.03));
    }
    const Hinge& h = m.hinges[0];

    // Independent evaluation from raw geometry.
    const Vec3 e = m.positions[h.v1] - m.positions[h.v0];
    const double elen = e.norm();
    const double theta = dihedral_angle(m, h);
    const double h1 =
        e.cross(m.positions[h.opp0] - m.positions[h.v0]).norm() / elen;
    const double h2 =
        (m.positions[h.opp1] - m.positions[h.v0]).cross(e).norm() / elen;
    const double ke = bending_stiffness_lookup(
        mp, theta, std::abs(std::sin(theta / 2.0)) / (h1 + h2));
    const double expect =
        ke * std::abs(std::sin((theta - h.rest_angle) / 2.0)) * elen / (h1 + h2);

    HingeForce hf = bending_force(m, h, mp);
    CHECK(std::abs(hf.magnitude - expect) <= 1e-10 * expect);
    // The wing forces are the moment spread over the triangle heights.
    CHECK(std::abs(hf.f[2].norm() - expect / h1) <= 1e-10 * expect / h1);
    CHECK(std::abs(hf.f[3].norm() - expect / h2) <= 1e-10 * expect / h2);
  }
}

TEST_CASE("bending force matches the finite-difference gradient of a frozen-"
          "coefficient hinge energy") {
  Rng rng(31);
  MaterialParams mp = test_material();
  for (int trial = 0; trial < 10; ++trial) {
    TriMesh m = folded_hinge(rng.uniform(0.2, 1.0));
    const Hinge& h = m.hinges[0];

    // Freeze k_e, |E| and h1+h2 at the base state; the energy
    // -2*K*cos((theta-rest)/2) then has derivative K*sin((theta-rest)/2)
    // whose gradient must match the implemented force field.
    const Vec3 e0 = m.positions[h.v1] - m.positions[h.v0];
    const double elen = e0.norm();
    const double theta0 = dihedral_angle(m, h);
    const double h1 =
        e0.cross(m.positions[h.opp0] - m.positions[h.v0]).norm() / elen;
    const double h2 =
        (m.positions[h.opp1] - m.positions[h.v0]).cross(e0).norm() / elen;
    const double ke = bending_stiffness_lookup(
        mp, theta0, std::abs(std::sin(theta0 / 2.0)) / (h1 + h2));
    const double K = ke * elen / (h1 + h2);
    auto energy = [&](const TriMesh& mm) {
      return -2.0 * K * std::cos((dihedral_angle(mm, h) - h.rest_angle) / 2.0);
    };

    HingeForce hf = bending_force(m, h, mp);
    const int verts[4] = {h.v0, h.v1, h.opp0, h.opp1};
    const double eps = 1e-6;
    for (int i = 0; i < 4; ++i) {
      for (int d = 0; d < 3; ++d) {
        TriMesh plus = m, minus = m;
        plus.positions[verts[i]][d] += eps;
        minus.positions[verts[i]][d] -= eps;
        const double grad = (energy(plus) - energy(minus)) / (2 * eps);
        const double tol =
            2e-5 * std::max(std::abs(hf.f[i][d]), std::abs(grad)) + 1e-9;
        CHECK(std::abs(hf.f[i][d] + grad) <= tol);
      }
    }
  }
}

TEST_CASE("bending force direction closes a small fold") {
  MaterialParams mp = test_material();
  TriMesh m = folded_hinge(0.3);
  const Hinge& h = m.hinges[0];
  const double before = std::abs(dihedral_angle(m, h) - h.rest_angle);
  HingeForce hf = bending_force(m, h, mp);
  const int verts[4] = {h.v0, h.v1, h.opp0, h.opp1};
  double maxf = 0.0;
  for (const auto& f : hf.f) maxf = std::max(maxf, f.norm());
  for (int i = 0; i < 4; ++i) m.positions[verts[i]] += 1e-3 / maxf * hf.f[i];
  CHECK(std::abs(dihedral_angle(m, h) - h.rest_angle) < before);
}

TEST_CASE("doubling the stiffness scale doubles every bending force") {
  MaterialParams mp = test_material();
  TriMesh m = folded_hinge(0.7);
  HingeForce a = bending_force(m, m.hinges[0], mp);
  mp.stiffness_scale *= 2.0;
  HingeForce b = bending_force(m, m.hinges[0], mp);
  CHECK(b.magnitude == doctest::Approx(2.0 * a.magnitude).epsilon(1e-15));
  for (int i = 0; i < 4; ++i) {
    CHECK(b.f[i].norm() == doctest::Approx(2.0 * a.f[i].norm()).epsilon(1e-15));
  }
}

TEST_CASE("bending force rejects degenerate hinges") {
  TriMesh m = folded_hinge(0.5);
  m.positions[2] = Vec3(0.5, 0, 0);  // collapse onto the shared edge
  CHECK_THROWS_AS(bending_force(m, m.hinges[0], test_material()),
                  DegenerateGeometryError);
}

TEST_CASE("total wind force follows the linear speed law") {
  WindSpec w;
  w.speed = 2.0;
  w.air_density = 1.225;
  CHECK(wind_force_total(1.0, w) == doctest::Approx(1.225).epsilon(1e-12));
  w.speed = 0.0;
  CHECK(wind_force_total(1.0, w) == 0.0);
  w.speed = 3.0;
  CHECK(wind_force_total(2.0, w) ==
        doctest::Approx(2.0 * wind_force_total(1.0, w)).epsilon(1e-12));
  w.quadratic = true;
  w.speed = 3.0;
  CHECK(wind_force_total(1.0, w) ==
        doctest::Approx(0.5 * 1.225 * 9.0).epsilon(1e-12));
}

TEST_CASE("face wind force projects on the face normal") {
  TriMesh m = build_grid_mesh(4, 1.0, 0.1, PinnedEdge::None);
  WindSpec w;
  w.speed = 2.5;

  // Grid normals are +x. Wind along x: full projection.
  w.direction = Vec3(1, 0, 0);
  const double area0 = face_area(m, 0);
  CHECK(face_wind_force(m, 0, w).norm() ==
        doctest::Approx(wind_force_total(area0, w)).epsilon(1e-12));

  // Edge-on wind: zero.
  w.direction = Vec3(0, 0, 1);
  CHECK(face_wind_force(m, 0, w).norm() == 0.0);
}

TEST_CASE("face wind forces over a flat facing sheet sum to the total") {
  TriMesh m = build_grid_mesh(6, 1.0, 0.1, PinnedEdge::None);
  WindSpec w;
  w.speed = 4.2;
  w.direction = Vec3(1, 0, 0);
  Vec3 sum = Vec3::Zero();
  for (int f = 0; f < m.face_count(); ++f) sum += face_wind_force(m, f, w);
  const double expect = wind_force_total(1.0, w);
  CHECK(sum.norm() == doctest::Approx(expect).epsilon(1e-9));
  CHECK(sum.normalized().dot(w.direction) == doctest::Approx(1.0));
}
