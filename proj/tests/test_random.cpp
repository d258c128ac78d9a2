#include <catch2/catch_amalgamated.hpp>

#include "smcs/random.hpp"

using smcs::RngStream;

TEST_CASE("streams are deterministic per seed") {
  RngStream a(1234), b(1234);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  RngStream c(1235);
  bool all_equal = true;
  RngStream a2(1234);
  for (int i = 0; i < 10; ++i) all_equal = all_equal && (a2.normal() == c.normal());
  CHECK_FALSE(all_equal);
}

TEST_CASE("fork derives children without touching the parent") {
  RngStream parent(7);
  RngStream child_before = parent.fork(3);
  const double parent_draw = parent.normal();
  RngStream child_after = parent.fork(3);
  CHECK(child_before.normal() == child_after.normal());

  RngStream parent2(7);
  CHECK(parent2.normal() == parent_draw);  // forking never consumed parent state
}

TEST_CASE("distinct fork tags give distinct streams") {
  RngStream parent(99);
  RngStream a = parent.fork(0);
  RngStream b = parent.fork(1);
  int equal = 0;
  for (int i = 0; i < 20; ++i)
    if (a.normal() == b.normal()) ++equal;
  CHECK(equal == 0);
}

TEST_CASE("uniform draws live in [0,1)") {
  RngStream r(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
