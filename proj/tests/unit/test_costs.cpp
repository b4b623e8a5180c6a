#include "oracles.hpp"
#include "vpsto/costs.hpp"
#include "vpsto/vpsto.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

using namespace vpsto;

namespace {

KinodynamicLimits limits_2d(double q_lim = 2.8) {
  return KinodynamicLimits::symmetric(Eigen::Vector2d(1, 1), Eigen::Vector2d(2, 2), Eigen::Vector2d(-q_lim, -q_lim),
                                      Eigen::Vector2d(q_lim, q_lim));
}

World2D disk_world() {
  return World2D(Rect{Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1)}, 0.0, {Disk{Eigen::Vector2d(0, 0), 0.2}});
}

Trajectory straight(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const PhaseGrid& grid) {
  const BoundaryConditions bc = BoundaryConditions::rest_to_rest(a, b);
  return synthesize(basis_for(1, 2), unstack_via(straight_line_init(bc, 1), 1, 2), bc, limits_2d(), grid);
}

}  // namespace

TEST_SUITE("costs") {

TEST_CASE("joint-limit barrier") {
  KinodynamicLimits lim = KinodynamicLimits::symmetric(Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 1.0),
                                                       Eigen::VectorXd::Constant(1, -2.8), Eigen::VectorXd::Constant(1, 2.8));
  Eigen::MatrixXd q(3, 1);
  q << 0.0, 3.0, 1.0;
  JointLimitCost c = cost_jla(q, lim);
  CHECK(c.cost == doctest::Approx(1.2));
  CHECK(c.violations == 1);
  q << 0.0, -3.1, 1.0;
  c = cost_jla(q, lim);
  CHECK(c.cost == doctest::Approx(1.3));
  CHECK(c.violations == 1);
  q << 0.0, 2.79, -2.79;
  c = cost_jla(q, lim);
  CHECK(c.cost == 0.0);
  CHECK(c.violations == 0);
}

TEST_CASE("joint-limit cost jumps by exactly one at the limit") {
  KinodynamicLimits lim = KinodynamicLimits::symmetric(Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 1.0),
                                                       Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0));
  Eigen::MatrixXd inside(1, 1), at(1, 1);
  inside << std::nextafter(1.0, 0.0);
  at << 1.0;
  CHECK(cost_jla(inside, lim).cost == 0.0);
  CHECK(cost_jla(at, lim).cost == 1.0);
}

TEST_CASE("collision count") {
  const World2D world = disk_world();
  Eigen::MatrixXd q(5, 2);
  q << -0.5, 0, -0.1, 0, 0, 0, 0.1, 0.05, 0.5, 0.5;
  const CollisionCost c = cost_collision(q, world);
  CHECK(c.hits == 3);
  CHECK(c.cost == 3.0);

  const PhaseGrid coarse(50);
  const PhaseGrid fine(100);
  const Trajectory through = straight(Eigen::Vector2d(-0.8, 0.0), Eigen::Vector2d(0.8, 0.0), coarse);
  const int h1 = cost_collision(through, world, coarse).hits;
  const int h2 = cost_collision(through, world, fine).hits;
  CHECK(h1 > 0);
  CHECK(h2 >= 2 * h1 - 1);
  CHECK(h2 <= 2 * h1 + 1);

  const Trajectory free_path = straight(Eigen::Vector2d(-0.8, 0.6), Eigen::Vector2d(0.8, 0.6), coarse);
  CHECK(cost_collision(free_path, world, coarse).hits == 0);
}

TEST_CASE("push cost") {
  CHECK(push_cost_from_errors(0.3, 0.3).cost == doctest::Approx(1.0));
  CHECK_FALSE(push_cost_from_errors(0.3, 0.3).valid);
  const PushCost closer = push_cost_from_errors(0.5, 0.2);
  CHECK(closer.cost == doctest::Approx(0.7408182206817179).epsilon(1e-14));
  CHECK(closer.valid);
  const PushCost away = push_cost_from_errors(0.2, 0.5);
  CHECK(away.cost > 1.0);
  CHECK_FALSE(away.valid);
}

TEST_CASE("weighted total of a valid trajectory") {
  const PhaseGrid grid(50);
  const Trajectory traj = straight(Eigen::Vector2d(-0.8, 0.6), Eigen::Vector2d(0.8, 0.7), grid);
  CostWeights w;
  w.duration = 1.0;
  w.smoothness = 0.01;
  w.push = 0.0;
  const World2D world = disk_world();
  const CostReport r = evaluate_total(traj, w, limits_2d(), &world, nullptr, grid);
  CHECK(r.valid);
  CHECK(r.violation_count == 0);
  CHECK(r.total == doctest::Approx(traj.duration() + 0.01 * traj.smoothness_cost()).epsilon(1e-14));
  CHECK(cost_duration(traj) == traj.duration());
}

TEST_CASE("collisions and limit violations make a candidate invalid") {
  const PhaseGrid grid(50);
  const World2D world = disk_world();
  const Trajectory hit = straight(Eigen::Vector2d(-0.8, 0.0), Eigen::Vector2d(0.8, 0.0), grid);
  const CostReport r = evaluate_total(hit, CostWeights{}, limits_2d(), &world, nullptr, grid);
  CHECK_FALSE(r.valid);
  CHECK(r.total >= 1e6);
  CHECK(r.violation_count == cost_collision(hit, world, grid).hits);
  const CostReport out_of_range = evaluate_total(hit, CostWeights{}, limits_2d(0.5), nullptr, nullptr, grid);
  CHECK_FALSE(out_of_range.valid);
  CHECK(out_of_range.terms.joint_limits > 0.0);
}

TEST_CASE("invalid candidates rank behind every valid one") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  const World2D world = disk_world();
  const PhaseGrid grid(30);
  const BoundaryConditions bc = BoundaryConditions::rest_to_rest(Eigen::Vector2d(-0.8, 0.05), Eigen::Vector2d(0.8, -0.05));
  int mixed = 0;
  for (int pop = 0; pop < 20; ++pop) {
    double worst_valid = -1.0;
    double best_invalid = std::numeric_limits<double>::infinity();
    for (int m = 0; m < 32; ++m) {
      Eigen::MatrixXd via(3, 2);
      for (int i = 0; i < 6; ++i) via(i) = u(rng);
      const Trajectory traj = synthesize(basis_for(3, 2), via, bc, limits_2d(), grid);
      const CostReport r = evaluate_total(traj, CostWeights{}, limits_2d(), &world, nullptr, grid);
      if (r.valid) {
        worst_valid = std::max(worst_valid, r.total);
      } else {
        best_invalid = std::min(best_invalid, r.total);
      }
    }
    if (worst_valid >= 0.0 && std::isfinite(best_invalid)) ++mixed;
    CHECK(worst_valid < best_invalid);
  }
  CHECK(mixed > 0);
}

TEST_CASE("evaluation is deterministic") {
  const PhaseGrid grid(50);
  const Trajectory traj = straight(Eigen::Vector2d(-0.8, 0.0), Eigen::Vector2d(0.8, 0.1), grid);
  const World2D world = disk_world();
  const CostReport a = evaluate_total(traj, CostWeights{}, limits_2d(), &world, nullptr, grid);
  const CostReport b = evaluate_total(traj, CostWeights{}, limits_2d(), &world, nullptr, grid);
  CHECK(std::memcmp(&a.total, &b.total, sizeof(double)) == 0);
  CHECK(a.violation_count == b.violation_count);
}

TEST_CASE("weights are validated") {
  CostWeights w;
  w.smoothness = -1.0;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
}

}  // TEST_SUITE
