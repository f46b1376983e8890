#include <doctest.h>

#include "mocapkit/camera.hpp"
#include "oracles.hpp"

using namespace mocapkit;

TEST_CASE("projection examples") {
  const WeakPerspectiveCamera unit;
  CHECK(project(unit, Vec3(2, 3, 7)) == Vec2(2, 3));
  const WeakPerspectiveCamera cam{2.0, Vec2(1, 1)};
  CHECK(project(cam, Vec3(1, 2, 5)) == Vec2(3, 5));
}

TEST_CASE("projection ignores depth") {
  std::mt19937_64 rng(1);
  const WeakPerspectiveCamera cam{3.5, Vec2(-2, 7)};
  Points3 pts = oracle::random_rows(rng, 50, 4.0);
  const Points2 a = project(cam, pts);
  pts.col(2).array() += 12.25;
  CHECK(project(cam, pts) == a);
  for (int i = 0; i < 50; ++i) CHECK(a.row(i).transpose() == project(cam, Vec3(pts.row(i).transpose())));
}

TEST_CASE("camera validity") {
  CHECK(WeakPerspectiveCamera{}.valid());
  CHECK_FALSE((WeakPerspectiveCamera{0.0, Vec2::Zero()}.valid()));
  CHECK_FALSE((WeakPerspectiveCamera{-1.0, Vec2::Zero()}.valid()));
  CHECK_FALSE((WeakPerspectiveCamera{1.0, Vec2(std::nan(""), 0)}.valid()));
}
