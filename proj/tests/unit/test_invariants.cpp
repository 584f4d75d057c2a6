#include <gtest/gtest.h>

#include "optlab/invariants.hpp"

TEST(InvariantSuite, EveryCheckPasses) {
  for (const auto& r : optlab::run_invariant_suite()) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(InvariantSuite, OtherSeedsPassToo) {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    for (const auto& r : optlab::run_invariant_suite(seed)) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
  }
}
