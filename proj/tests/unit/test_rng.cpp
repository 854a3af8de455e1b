#include "afc/rng.hpp"

#include "doctest.h"

#include <atomic>
#include <set>
#include <stdexcept>
#include <vector>

TEST_SUITE("rng") {
  TEST_CASE("derived seeds are stable and label-specific") {
    CHECK(afc::derive_seed(7, "laser") == afc::derive_seed(7, "laser"));
    CHECK(afc::derive_seed(7, "laser") != afc::derive_seed(7, "spins"));
    CHECK(afc::derive_seed(7, "laser") != afc::derive_seed(8, "laser"));
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(afc::derive_seed(42, i));
    CHECK(seen.size() == 10000);
  }

  TEST_CASE("FNV-1a reference values") {
    CHECK(afc::hash_label("") == 0xcbf29ce484222325ULL);
    CHECK(afc::hash_label("a") == 0xaf63dc4c8601ec8cULL);
  }

  TEST_CASE("parallel_for visits every index once for any worker count") {
    for (unsigned w : {1u, 2u, 3u, 8u, 64u}) {
      std::vector<std::atomic<int>> hits(257);
      afc::parallel_for(hits.size(), w, [&](std::size_t i) { hits[i].fetch_add(1); });
      for (auto& h : hits) CHECK(h.load() == 1);
    }
  }

  TEST_CASE("parallel_for rethrows the first failure") {
    CHECK_THROWS_AS(afc::parallel_for(100, 4,
                                      [](std::size_t i) {
                                        if (i == 37) throw std::runtime_error("boom");
                                      }),
                    std::runtime_error);
  }
}
