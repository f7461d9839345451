#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "viewrank/error.hpp"
#include "viewrank/grouping.hpp"

using namespace viewrank;

TEST_CASE("preset schemes assign half-open groups") {
  const GroupScheme k = GroupScheme::kuaishou();
  CHECK(k.group_count() == 5);
  CHECK(k.assign(25) == 2);  // third group, (18,30]
  CHECK(k.assign(8) == 0);
  CHECK(k.assign(8.01) == 1);
  CHECK(k.assign(0.5) == 0);
  CHECK(k.assign(60) == 4);
  CHECK_THROWS_AS(k.assign(60.5), DataError);
  CHECK_THROWS_AS(k.assign(0), DataError);

  const GroupScheme w = GroupScheme::wechat();
  CHECK(w.group_count() == 7);
  CHECK(w.assign(93) == 6);  // last group, (92,120]
  CHECK(w.assign(92) == 5);
  CHECK(w.max_length() == 120);
  CHECK(k.label(2) == "(18,30]");
}

TEST_CASE("assign is total over (0, max]") {
  const GroupScheme k = GroupScheme::kuaishou();
  for (double l = 0.25; l <= 60.0; l += 0.25) {
    const std::size_t g = k.assign(l);
    CHECK(l > k.lower(g));
    CHECK(l <= k.upper(g));
  }
}

TEST_CASE("scheme validation") {
  CHECK_THROWS_AS(GroupScheme({10, 5}), UsageError);
  CHECK_THROWS_AS(GroupScheme({0, 5}), UsageError);
  CHECK_THROWS_AS(GroupScheme(std::vector<double>{}), UsageError);
  CHECK(GroupScheme::preset("kuaishou"));
  CHECK_FALSE(GroupScheme::preset("nope"));
}

TEST_CASE("completion rate") {
  const Dataset d = fixtures::make({{"v", 30}, {"w", 30}, {"x", 10}, {"idle", 5}},
                                   {{"a", "v", 30}, {"b", "v", 15}, {"c", "v", 40}, {"d", "v", 30},
                                    {"a", "w", 10}, {"b", "w", 29.9}, {"a", "x", 10}});
  const Catalog& c = d.catalog();
  CHECK(*completion_rate(d, *c.find_video("v")) == doctest::Approx(0.75));
  CHECK(*completion_rate(d, *c.find_video("w")) == 0.0);
  CHECK(*completion_rate(d, *c.find_video("x")) == 1.0);
  CHECK_FALSE(completion_rate(d, *c.find_video("idle")));
}

TEST_CASE("completion curves per integer length") {
  // Two length-10 videos with rates 0.2 and 0.8; one length-7 video.
  std::vector<fixtures::Row> rows;
  for (int i = 0; i < 5; ++i) rows.emplace_back("u" + std::to_string(i), "p", i < 1 ? 10.0 : 1.0);
  for (int i = 0; i < 5; ++i) rows.emplace_back("u" + std::to_string(i), "q", i < 4 ? 10.0 : 1.0);
  rows.emplace_back("u0", "r", 7.0);
  const Dataset d = fixtures::make({{"p", 10}, {"q", 10}, {"r", 6.5}, {"unwatched", 3}}, rows);
  const auto curves = completion_curves(d);
  REQUIRE(curves.size() == 2);
  CHECK(curves[0].length == 7);
  CHECK(curves[0].p50 == 1.0);
  CHECK(curves[0].p75 == 1.0);
  CHECK(curves[0].count == 1);
  CHECK(curves[1].length == 10);
  CHECK(curves[1].p50 == doctest::Approx(0.5));
  CHECK(curves[1].p75 == doctest::Approx(0.65));
  CHECK(curves[1].count == 2);
}

TEST_CASE("tau is the configured percentile of progress per group") {
  // Group 0 gets progresses 0.1 .. 1.0; group 1 a constant 0.5.
  std::vector<fixtures::Row> rows;
  for (int i = 1; i <= 10; ++i) rows.emplace_back("u", "short", i * 1.0);
  for (int i = 0; i < 4; ++i) rows.emplace_back("u" + std::to_string(i), "long", 20.0);
  const Dataset d = fixtures::make({{"short", 10}, {"long", 40}}, rows);
  const GroupScheme s = compute_tau(d, GroupScheme({30, 60}));
  REQUIRE(s.has_tau());
  // sorted progresses, position 0.8 * 9 = 7.2 -> 0.8 + 0.2 * (0.9 - 0.8)
  CHECK(s.tau(0) == doctest::Approx(0.82).epsilon(1e-12));
  CHECK(s.tau(1) == doctest::Approx(0.5));
  const GroupScheme all_positive = compute_tau(d, GroupScheme({30, 60}), 0.0);
  CHECK(all_positive.tau(0) == doctest::Approx(0.1));
}

TEST_CASE("tau leaves at most the positive fraction above it") {
  std::vector<fixtures::Row> rows;
  std::vector<Video> videos;
  for (int v = 0; v < 40; ++v) videos.push_back({"v" + std::to_string(v), 1.0 + v * 1.4});
  for (int i = 0; i < 997; ++i)
    rows.emplace_back("u" + std::to_string(i % 13), "v" + std::to_string((i * 7) % 40),
                      std::fmod(i * 0.6180339887, 1.0) * (1.0 + ((i * 7) % 40) * 1.4) * 1.7);
  const Dataset d = fixtures::make(videos, rows);
  const GroupScheme k = compute_tau(d, GroupScheme::kuaishou());
  std::vector<std::size_t> n(k.group_count()), above(k.group_count());
  for (const auto& x : d.interactions()) {
    const std::size_t g = k.assign(d.length_of(x));
    ++n[g];
    above[g] += d.progress(x) > k.tau(g);
  }
  for (std::size_t g = 0; g < k.group_count(); ++g) {
    REQUIRE(n[g] > 0);
    CHECK(static_cast<double>(above[g]) / n[g] <= 0.2 + 1.0 / n[g]);
  }
}

TEST_CASE("tau on an empty group names the group") {
  const Dataset d = fixtures::make({{"v", 5}}, {{"u", "v", 1}});
  try {
    compute_tau(d, GroupScheme::kuaishou());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("(8,18]") != std::string::npos);
  }
}
