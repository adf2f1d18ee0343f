#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "crowdsim/transport.hpp"
#include "oracles.hpp"

using namespace crowdsim;
using crowdsim::testing::polygon_clip_area;

namespace {

DensityField uniform_block(const Grid& g, int j0, int j1, int k0, int k1,
                           double value) {
  DensityField f(g);
  for (int k = k0; k <= k1; ++k)
    for (int j = j0; j <= j1; ++j) f({j, k}) = value;
  return f;
}

}  // namespace

TEST_CASE("push particles") {
  const Grid g(50.0, 50.0, 50, 50);
  SUBCASE("zero velocity leaves centers unchanged") {
    const auto r = push_particles({{25.0, 25.0}}, {{0.0, 0.0}}, 0.01, g);
    CHECK(r.centers[0] == Vec2{25.0, 25.0});
  }
  SUBCASE("constant velocity moves by dt*v") {
    const auto r = push_particles({{25.0, 25.0}}, {{1.34, 0.0}}, 0.01, g);
    CHECK(r.centers[0].x == doctest::Approx(25.0134).epsilon(1e-14));
    CHECK(r.centers[0].y == 25.0);
  }
  SUBCASE("leaving the domain throws by default") {
    CHECK_THROWS_AS(
        push_particles({{49.9, 25.0}}, {{20.0, 0.0}}, 0.01, g),
        BoundaryLossError);
  }
  SUBCASE("landing exactly on the boundary counts as leaving") {
    CHECK_THROWS_AS(push_particles({{49.0, 25.0}}, {{100.0, 0.0}}, 0.01, g),
                    BoundaryLossError);
  }
  SUBCASE("allow-loss drops the particle and reports it") {
    const auto r = push_particles({{49.9, 25.0}, {10.0, 10.0}},
                                  {{20.0, 0.0}, {0.0, 0.0}}, 0.01, g,
                                  BoundaryPolicy::AllowLoss);
    CHECK(r.centers.size() == 1);
    REQUIRE(r.lost.size() == 1);
    CHECK(r.lost[0].first == 0);
  }
}

TEST_CASE("advection identities") {
  const Grid g(50.0, 50.0, 50, 50);
  const DensityField f = uniform_block(g, 21, 30, 21, 30, 2.0);
  const std::vector<Vec2> zero(g.cell_count(), Vec2{0.0, 0.0});

  SUBCASE("zero velocity is the identity") {
    const auto r = advect_density(f, zero, 0.01);
    CHECK(r.boundary_loss == 0.0);
    for (int k = 1; k <= 50; ++k)
      for (int j = 1; j <= 50; ++j)
        CHECK(r.field({j, k}) == f({j, k}));  // bitwise on a unit grid
  }
  SUBCASE("whole-cell translation shifts one column") {
    const std::vector<Vec2> vel(g.cell_count(), Vec2{4.0, 0.0});
    const auto r = advect_density(f, vel, 0.25);  // shift of exactly h
    CHECK(r.boundary_loss == 0.0);
    for (int k = 1; k <= 50; ++k)
      for (int j = 2; j <= 50; ++j) CHECK(r.field({j, k}) == f({j - 1, k}));
    CHECK(r.field.total_mass() == doctest::Approx(200.0).epsilon(1e-13));
  }
  SUBCASE("half-cell translation splits mass evenly") {
    const std::vector<Vec2> vel(g.cell_count(), Vec2{2.0, 0.0});
    const auto r = advect_density(f, vel, 0.25);  // shift of exactly h/2
    CHECK(r.field({21, 25}) == doctest::Approx(1.0));
    CHECK(r.field({25, 25}) == doctest::Approx(2.0));
    CHECK(r.field({31, 25}) == doctest::Approx(1.0));
    CHECK(r.field.total_mass() == doctest::Approx(200.0).epsilon(1e-13));
  }
}

TEST_CASE("random translations preserve mass and positivity") {
  const Grid g(50.0, 50.0, 50, 50);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> shift(-2.5, 2.5);
  std::uniform_real_distribution<double> density(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    DensityField f(g);
    for (int k = 10; k <= 40; ++k)
      for (int j = 10; j <= 40; ++j) f({j, k}) = density(rng);
    std::vector<Vec2> vel(g.cell_count());
    for (auto& v : vel) v = {shift(rng) / 0.01, shift(rng) / 0.01};
    const auto r = advect_density(f, vel, 0.01, BoundaryPolicy::AllowLoss);
    double min_value = 0.0;
    for (double v : r.field.values()) min_value = std::min(min_value, v);
    CHECK(min_value >= 0.0);
    const double before = f.total_mass();
    const double after = r.field.total_mass() + r.boundary_loss;
    CHECK(after == doctest::Approx(before).epsilon(1e-12));
  }
}

TEST_CASE("deposits match the polygon-clipping oracle") {
  const Grid g(20.0, 20.0, 20, 20);
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> shift(-3.0, 3.0);
  std::uniform_int_distribution<int> cell(5, 15);
  for (int trial = 0; trial < 300; ++trial) {
    const CellIndex src{cell(rng), cell(rng)};
    DensityField f(g);
    f(src) = 1.7;
    std::vector<Vec2> vel(g.cell_count(), Vec2{});
    const Vec2 d{shift(rng), shift(rng)};
    vel[g.flat(src)] = d / 0.01;
    const auto r = advect_density(f, vel, 0.01, BoundaryPolicy::AllowLoss);
    const Rect moved = g.cell_rect(src).translated(0.01 * vel[g.flat(src)]);
    for (int k = 1; k <= 20; ++k)
      for (int j = 1; j <= 20; ++j) {
        const double expected =
            1.7 * polygon_clip_area(moved, g.cell_rect({j, k}));
        CHECK(r.field({j, k}) ==
              doctest::Approx(expected).epsilon(1e-12).scale(1.0));
      }
  }
}

TEST_CASE("density boundary loss") {
  const Grid g(50.0, 50.0, 50, 50);
  DensityField f(g);
  f({50, 25}) = 2.0;
  std::vector<Vec2> vel(g.cell_count(), Vec2{});
  vel[g.flat({50, 25})] = {50.0, 0.0};  // half a cell out at dt = 0.01
  SUBCASE("error by default") {
    CHECK_THROWS_AS(advect_density(f, vel, 0.01), BoundaryLossError);
  }
  SUBCASE("allowed loss is tallied") {
    const auto r = advect_density(f, vel, 0.01, BoundaryPolicy::AllowLoss);
    CHECK(r.boundary_loss == doctest::Approx(1.0));
    CHECK(r.field.total_mass() == doctest::Approx(1.0));
  }
}

namespace {

SimState lone_walker_state() {
  SimState s;
  s.grid = Grid(50.0, 50.0, 50, 50);
  Population p;
  p.id = "walker";
  p.measure = DiscreteMeasure{1.0, {{25.0, 25.0}}};
  p.desired_velocity = {1.34, 0.0};
  s.populations.push_back(std::move(p));
  s.interactions = InteractionTable(1);
  return s;
}

}  // namespace

TEST_CASE("step with no velocities is the identity on measures") {
  SimState s = lone_walker_state();
  s.populations[0].desired_velocity = {0.0, 0.0};
  Population crowd;
  crowd.id = "crowd";
  crowd.measure = uniform_block(s.grid, 21, 30, 21, 30, 2.0);
  s.populations.push_back(std::move(crowd));
  s.interactions = InteractionTable(2);

  const auto [next, report] = step(s);
  CHECK(next.step_index == 1);
  CHECK(next.time == doctest::Approx(0.01));
  CHECK(next.populations[0].discrete().centers[0] == Vec2{25.0, 25.0});
  for (int k = 1; k <= 50; ++k)
    for (int j = 1; j <= 50; ++j)
      CHECK(next.populations[1].density()({j, k}) ==
            s.populations[1].density()({j, k}));
  CHECK(!report.cfl_advisory);
}

TEST_CASE("free walker integrates its desired velocity exactly") {
  SimState s = lone_walker_state();
  StepOptions options;
  for (int n = 0; n < 100; ++n) {
    auto [next, report] = step(s, options);
    s = std::move(next);
  }
  CHECK(s.step_index == 100);
  CHECK(s.time == doctest::Approx(1.0));
  CHECK(s.populations[0].discrete().centers[0].x ==
        doctest::Approx(26.34).epsilon(1e-12));
  CHECK(s.populations[0].discrete().centers[0].y == 25.0);
}

TEST_CASE("step report masses balance") {
  SimState s = lone_walker_state();
  Population crowd;
  crowd.id = "crowd";
  crowd.measure = uniform_block(s.grid, 21, 30, 21, 30, 2.0);
  crowd.desired_velocity = {1.34, 0.0};
  s.populations.push_back(std::move(crowd));
  s.interactions = InteractionTable(2);
  const auto k = InteractionKernel::repel_only(0.03, 4.0);
  s.interactions.set(0, 1, k);
  s.interactions.set(1, 0, k);
  s.interactions.set(1, 1, InteractionKernel::attract_repel(0.03, 1.5, 3.0));

  const auto [next, report] = step(s);
  for (const auto& pr : report.populations) {
    CHECK(pr.mass_after + pr.boundary_loss ==
          doctest::Approx(pr.mass_before).epsilon(1e-12));
    CHECK(pr.boundary_loss == 0.0);
  }
  CHECK(report.populations[1].max_density.has_value());
  CHECK(!report.populations[0].max_density.has_value());
}

TEST_CASE("cfl advisory flags fast cells without failing") {
  SimState s = lone_walker_state();
  s.populations[0].desired_velocity = {150.0, 0.0};  // moves 1.5 cells per step
  const auto [next, report] = step(s);
  CHECK(report.cfl_advisory);
  CHECK(next.populations[0].discrete().centers[0].x ==
        doctest::Approx(26.5));
}
