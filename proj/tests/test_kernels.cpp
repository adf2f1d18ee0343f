#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "crowdsim/kernels.hpp"

using namespace crowdsim;

TEST_CASE("repulsion-only kernel values") {
  const auto k = InteractionKernel::repel_only(0.03, 4.0);
  CHECK(k(4.0) == doctest::Approx(0.0));
  CHECK(k(2.0) == doctest::Approx(-0.03));
  CHECK(k(5.0) == 0.0);
  // repulsive (negative) everywhere inside the support
  for (double s = 0.1; s < 4.0; s += 0.1) CHECK(k(s) < 0.0);
}

TEST_CASE("attraction-repulsion kernel values") {
  const auto k = InteractionKernel::attract_repel(0.03, 1.5, 3.0);
  CHECK(k(2.25) == doctest::Approx(0.0075));
  CHECK(k(5.0) == 0.0);
  CHECK(k(1.5) == doctest::Approx(0.0));
  CHECK(k(3.0) == doctest::Approx(0.0));
  CHECK(k(0.5) < 0.0);   // repulsive inside Rr
  CHECK(k(2.0) > 0.0);   // attractive between Rr and Ra
}

TEST_CASE("kernel parameter validation") {
  CHECK_THROWS_AS(InteractionKernel::attract_repel(0.03, 3.0, 1.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(InteractionKernel::attract_repel(0.03, 3.0, 3.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(InteractionKernel::repel_only(-1.0, 4.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(InteractionKernel::repel_only(0.03, 0.0),
                  std::invalid_argument);
}

TEST_CASE("attraction-repulsion kernel is differentiable at Rr") {
  const auto k = InteractionKernel::attract_repel(0.03, 1.5, 3.0);
  const double eps = 1e-7;
  const double left = (k(1.5) - k(1.5 - eps)) / eps;
  const double right = (k(1.5 + eps) - k(1.5)) / eps;
  CHECK(left == doctest::Approx(right).epsilon(1e-6));
}

TEST_CASE("repulsion-only kernel is continuous at Rr") {
  const auto k = InteractionKernel::repel_only(0.03, 4.0);
  CHECK(k(4.0 - 1e-10) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(k(4.0 + 1e-10) == 0.0);
}

TEST_CASE("anisotropy weight") {
  for (double sigma : {0.0, 0.3, 0.5, 1.0}) {
    const Anisotropy a(sigma);
    CHECK(a.weight(1.0) == doctest::Approx(1.0));   // straight ahead
    CHECK(a.weight(-1.0) == doctest::Approx(sigma));  // straight behind
  }
  CHECK(Anisotropy(0.5).weight(0.0) == doctest::Approx(0.75));
  // clamping of tiny overshoot
  CHECK(Anisotropy(0.5).weight(1.0 + 1e-15) == doctest::Approx(1.0));
  CHECK_THROWS_AS(Anisotropy(1.5), std::invalid_argument);
}

TEST_CASE("anisotropy range is [sigma, 1] and depends on the cosine only") {
  const Anisotropy a(0.3);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double c = u(rng);
    const double w = a.weight(c);
    CHECK(w >= 0.3);
    CHECK(w <= 1.0);
    CHECK(a.weight(std::cos(std::acos(c))) == doctest::Approx(w));
  }
}

TEST_CASE("cos_angle") {
  const Vec2 x{1.0, 1.0};
  const Vec2 vdes{2.0, 0.0};
  CHECK(*cos_angle(x, {5.0, 1.0}, vdes) == doctest::Approx(1.0));
  CHECK(*cos_angle(x, {1.0, 9.0}, vdes) == doctest::Approx(0.0));
  CHECK(*cos_angle(x, {-3.0, 1.0}, vdes) == doctest::Approx(-1.0));
  CHECK(!cos_angle(x, {5.0, 1.0}, {0.0, 0.0}).has_value());  // bypass
}

TEST_CASE("potential vanishes at the support edge and diverges at zero") {
  const auto k = InteractionKernel::repel_only(0.03, 4.0);
  const RadialPotential w(k);
  CHECK(w(4.0) == 0.0);
  CHECK(w(17.0) == 0.0);
  // Repulsive branch: W' = -f > 0, so W increases from -infinity
  // (logarithmically) up to the normalized zero at Rr.
  CHECK(w(1e-3) < w(1e-2));
  CHECK(w(1e-2) < 0.0);
  CHECK(w(1e-6) < -1.7);
  CHECK(w(1e-12) < w(1e-6) - 1.6);  // another ~6 decades down
}

TEST_CASE("potential derivative matches -f by central differences") {
  const auto check_pair = [](const InteractionKernel& k) {
    const RadialPotential w(k);
    const double eps = 1e-5;
    // spot check from the examples
    {
      const double d = (w(2.0 + eps) - w(2.0 - eps)) / (2.0 * eps);
      CHECK(d == doctest::Approx(-k(2.0)).epsilon(1e-8));
    }
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.05, k.support_radius() - 0.05);
    for (int i = 0; i < 1000; ++i) {
      const double s = u(rng);
      const double d = (w(s + eps) - w(s - eps)) / (2.0 * eps);
      const double f = k(s);
      const double tol = 1e-6 * std::max(1.0, std::abs(f));
      CHECK(std::abs(d + f) <= tol);
    }
  };
  check_pair(InteractionKernel::repel_only(0.03, 4.0));
  check_pair(InteractionKernel::attract_repel(0.03, 1.5, 3.0));
  check_pair(InteractionKernel::repel_only(1.0, 4.0));
}

TEST_CASE("attraction-repulsion potential is continuous at its breakpoints") {
  const auto k = InteractionKernel::attract_repel(0.03, 1.5, 3.0);
  const RadialPotential w(k);
  CHECK(w(1.5 - 1e-9) == doctest::Approx(w(1.5 + 1e-9)).epsilon(1e-9));
  CHECK(w(3.0 - 1e-9) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(w(3.0) == 0.0);
}
