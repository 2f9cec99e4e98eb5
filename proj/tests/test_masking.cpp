// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <set>

#include "cycpaint/masking.hpp"
#include "doctest.h"
#include "support/helpers.hpp"

using namespace cycpaint;

namespace {

MaskSpec spec(double lo, double hi, std::uint64_t seed = 0) {
  MaskSpec s;
  s.min_fraction = lo;
  s.max_fraction = hi;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("degenerate fraction range forces the side") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Mask m = sample_mask(spec(0.25, 0.25), 16, 16, rng);
    CHECK(m.region.side == 8);
    CHECK(check_mask(m, spec(0.25, 0.25)).empty());
  }
}

TEST_CASE("16x16 with [0.25, 0.35] only yields sides 8 and 9") {
  // Enumerate sides 1..14 independently of the library.
  std::vector<int> expected;
  for (int s = 1; s <= 14; ++s) {
    const double f = s * s / 256.0;
    if (f >= 0.25 && f <= 0.35) expected.push_back(s);
  }
  REQUIRE(expected == std::vector<int>{8, 9});
  const auto [lo, hi] = feasible_sides(spec(0.25, 0.35), 16, 16);
  CHECK(lo == 8);
  CHECK(hi == 9);
  Rng rng(2);
  bool seen8 = false, seen9 = false;
  for (int i = 0; i < 2000; ++i) {
    const Mask m = sample_mask(spec(0.25, 0.35), 16, 16, rng);
    REQUIRE((m.region.side == 8 || m.region.side == 9));
    seen8 |= m.region.side == 8;
    seen9 |= m.region.side == 9;
  }
  CHECK(seen8);
  CHECK(seen9);
}

TEST_CASE("infeasible geometry is rejected") {
  Rng rng(3);
  try {
    sample_mask(spec(0.25, 0.35), 3, 3, rng);
    FAIL("expected a geometry error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::geometry);
    CHECK(std::string(e.what()).find("border") != std::string::npos);
  }
}

TEST_CASE("mask spec validation") {
  CHECK_THROWS_AS(spec(0.0, 0.3).validate(), Error);
  CHECK_THROWS_AS(spec(0.4, 0.3).validate(), Error);
  CHECK_THROWS_AS(spec(0.2, 1.0).validate(), Error);
  CHECK_NOTHROW(spec(0.25, 0.35).validate());
}

TEST_CASE("placements cover the whole interior") {
  Rng rng(4);
  const MaskSpec s = spec(0.25, 0.25);  // side 8 on 16x16: top, left in [1, 7]
  std::set<int> tops, lefts;
  for (int i = 0; i < 3000; ++i) {
    const Mask m = sample_mask(s, 16, 16, rng);
    tops.insert(m.region.top);
    lefts.insert(m.region.left);
  }
  CHECK(tops.size() == 7);
  CHECK(*tops.begin() == 1);
  CHECK(*tops.rbegin() == 7);
  CHECK(lefts.size() == 7);
}

TEST_CASE("identical seeds give identical mask sequences") {
  Rng a(99), b(99);
  for (int i = 0; i < 50; ++i) {
    const Mask ma = sample_mask(MaskSpec{}, 64, 64, a);
    const Mask mb = sample_mask(MaskSpec{}, 64, 64, b);
    CHECK(ma.grid == mb.grid);
    CHECK(ma.region == mb.region);
  }
}

TEST_CASE("check_mask names violated invariants") {
  Mask m = make_square_mask(8, 8, {1, 1, 4});
  CHECK(check_mask(m, spec(0.25, 0.25)).empty());
  Mask touching = make_square_mask(8, 8, {0, 1, 4});
  CHECK_FALSE(check_mask(touching, spec(0.25, 0.25)).empty());
  Mask two = m;
  two.grid.at(7, 7) = 1;
  CHECK_FALSE(check_mask(two, spec(0.25, 0.25)).empty());
  Mask nonbinary = m;
  nonbinary.grid.at(6, 6) = 2;
  CHECK_FALSE(check_mask(nonbinary, spec(0.25, 0.25)).empty());
  CHECK_FALSE(check_mask(m, spec(0.3, 0.35)).empty());
}

TEST_CASE("inside_masked hand example") {
  Tensor<float> x({1, 1, 4, 4}, 1.0f);
  const Mask m = make_square_mask(4, 4, {1, 1, 2});
  const Tensor<float> y = inside_masked(x, m.grid);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const bool hole = r >= 1 && r <= 2 && c >= 1 && c <= 2;
      CHECK(y.at(0, 0, r, c) == (hole ? 0.0f : 1.0f));
    }
  }
  const Tensor<float> o = outside_masked(x, m.grid);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const bool hole = r >= 1 && r <= 2 && c >= 1 && c <= 2;
      CHECK(o.at(0, 0, r, c) == (hole ? 1.0f : 0.0f));
    }
  }
}

TEST_CASE("mask algebra identities") {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const Tensor<float> x = testutil::random_tensor<float>({2, 3, 6, 6}, rng);
    const BinaryMap m = testutil::random_binary(6, 6, rng);
    const BinaryMap zeros(6, 6, 0), ones(6, 6, 1);

    CHECK(inside_masked(x, zeros) == x);
    CHECK(outside_masked(x, ones) == x);
    CHECK(outside_masked(x, zeros) == Tensor<float>(x.shape()));

    // Partition of unity, exact.
    Tensor<float> sum = inside_masked(x, m);
    add_inplace(sum, outside_masked(x, m));
    CHECK(sum == x);

    CHECK(inside_masked(inside_masked(x, m), m) == inside_masked(x, m));
    CHECK(complement(complement(m)) == m);
    CHECK(m.ones() + complement(m).ones() == 36);
    CHECK(complement(zeros) == ones);
  }
}

TEST_CASE("concat_mask_channel") {
  Rng rng(6);
  const Tensor<float> x = testutil::random_tensor<float>({2, 3, 8, 8}, rng);
  const BinaryMap a = testutil::random_binary(8, 8, rng);
  const BinaryMap b = testutil::random_binary(8, 8, rng);
  const Tensor<float> ya = concat_mask_channel(x, a);
  const Tensor<float> yb = concat_mask_channel(x, b);
  REQUIRE(ya.shape() == Shape{2, 4, 8, 8});
  for (int n = 0; n < 2; ++n) {
    for (int c = 0; c < 4; ++c) {
      for (int r = 0; r < 8; ++r) {
        for (int q = 0; q < 8; ++q) {
          if (c < 3) {
            CHECK(ya.at(n, c, r, q) == x.at(n, c, r, q));
            CHECK(yb.at(n, c, r, q) == ya.at(n, c, r, q));
          } else {
            CHECK(ya.at(n, c, r, q) == static_cast<float>(a.at(r, q)));
          }
        }
      }
    }
  }
  CHECK_THROWS_AS(concat_mask_channel(x, BinaryMap(7, 8)), Error);
  CHECK_THROWS_AS(inside_masked(x, BinaryMap(8, 7)), Error);
}

TEST_CASE("restore_known copies by selection") {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const Tensor<float> out = testutil::random_tensor<float>({2, 3, 5, 5}, rng);
    const Tensor<float> in = testutil::random_tensor<float>({2, 3, 5, 5}, rng);
    const BinaryMap known = testutil::random_binary(5, 5, rng);
    const Tensor<float> r = restore_known(out, in, known);
    for (int n = 0; n < 2; ++n)
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 5; ++y)
          for (int x = 0; x < 5; ++x)
            CHECK(r.at(n, c, y, x) == (known.at(y, x) ? in.at(n, c, y, x) : out.at(n, c, y, x)));
  }
  const Tensor<float> a = testutil::random_tensor<float>({1, 3, 4, 4}, rng);
  const Tensor<float> b = testutil::random_tensor<float>({1, 3, 4, 4}, rng);
  CHECK(restore_known(a, b, BinaryMap(4, 4, 1)) == b);
  CHECK(restore_known(a, b, BinaryMap(4, 4, 0)) == a);
  CHECK_THROWS_AS(restore_known(a, testutil::random_tensor<float>({1, 3, 4, 5}, rng), BinaryMap(4, 4)), Error);
}
