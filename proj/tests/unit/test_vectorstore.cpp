#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "gg/errors.hpp"
#include "gg/vectorstore.hpp"
#include "test_support.hpp"

using namespace gg;
using namespace gg::vectorstore;
using gg::embedding::EmbeddingVector;
using gg::embedding::normalize;
using gg::testing::Rng;
using gg::testing::TempDir;

namespace {

VectorIndex random_index(Rng& rng, std::size_t n, std::size_t dim) {
  VectorIndex::Builder b(dim);
  for (std::size_t i = 0; i < n; ++i) b.add({"doc" + std::to_string(i / 3), std::uint32_t(i % 3)}, rng.unit_vector(dim));
  return std::move(b).build({"fp", "test:model:" + std::to_string(dim), "2000-01-01T00:00:00Z"});
}

// Full sort by (-score, entry). Scores use the same float32-stored vectors.
std::vector<std::size_t> oracle_top_k(const VectorIndex& index, const EmbeddingVector& q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t e = 0; e < index.size(); ++e) {
    double dot = 0.0;
    const auto v = index.raw_vector(e);
    for (std::size_t i = 0; i < v.size(); ++i) dot += double(v[i]) * q[i];
    all.emplace_back(std::clamp(dot, -1.0, 1.0), e);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  const auto s = gg::testing::read_text(p);
  return {s.begin(), s.end()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& b) {
  gg::testing::write_text(p, std::string(b.begin(), b.end()));
}

std::string corrupt_field(const std::vector<unsigned char>& bytes) {
  try {
    decode_index(bytes);
  } catch (const IndexCorruptError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("cosine examples") {
  Rng rng(1);
  const auto u = rng.unit_vector(16);
  CHECK(cosine(u, u) == doctest::Approx(1.0));
  CHECK(cosine(EmbeddingVector({1, 0}), EmbeddingVector({0, 1})) == 0.0);
  const double expected = 32.0 / (std::sqrt(14.0) * std::sqrt(77.0));
  CHECK(cosine(normalize(EmbeddingVector({1, 2, 3})), normalize(EmbeddingVector({4, 5, 6}))) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.974632).epsilon(1e-6));
  CHECK_THROWS_AS(cosine(EmbeddingVector({1}), EmbeddingVector({1, 0})), EmbeddingError);
}

TEST_CASE("cosine is symmetric and clamped") {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto a = rng.unit_vector(33), b = rng.unit_vector(33);
    CHECK(std::abs(cosine(a, b) - cosine(b, a)) <= 1e-12);
    CHECK(cosine(a, b) <= 1.0);
    CHECK(cosine(a, b) >= -1.0);
  }
}

TEST_CASE("builder enforces dim, unit norm and unique refs") {
  VectorIndex::Builder b(2);
  b.add({"a", 0}, EmbeddingVector({1, 0}));
  CHECK_THROWS_AS(b.add({"a", 1}, EmbeddingVector({1, 0, 0})), EmbeddingError);
  CHECK_THROWS_AS(b.add({"a", 1}, EmbeddingVector({2, 0})), EmbeddingError);
  CHECK_THROWS_AS(b.add({"a", 0}, EmbeddingVector({0, 1})), Error);
  CHECK_THROWS_AS(VectorIndex::Builder(0), Error);
}

TEST_CASE("search_top_k examples") {
  Rng rng(3);
  VectorIndex::Builder b(8);
  const auto only = rng.unit_vector(8);
  b.add({"x", 0}, only);
  const auto single = std::move(b).build({});
  const auto hits = single.search_top_k(rng.unit_vector(8), 5);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].rank == 1);

  const auto index = random_index(rng, 50, 8);
  const auto q = index.vector(17);
  const auto top = index.search_top_k(q, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].entry == 17);
  CHECK(top[0].score == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(top[1].rank == 2);

  const auto empty = VectorIndex::Builder(8).build({});
  CHECK(empty.search_top_k(q, 4).empty());
  CHECK_THROWS_AS(index.search_top_k(rng.unit_vector(9), 1), EmbeddingError);
  CHECK_THROWS_AS(index.search_top_k(q, 0), Error);
}

TEST_CASE("ties break by build order") {
  VectorIndex::Builder b(2);
  const EmbeddingVector v({1, 0});
  for (std::uint32_t i = 0; i < 6; ++i) b.add({"t", i}, i % 2 ? EmbeddingVector({0, 1}) : v);
  const auto index = std::move(b).build({});
  const auto hits = index.search_top_k(v, 4);
  REQUIRE(hits.size() == 4);
  CHECK(hits[0].entry == 0);
  CHECK(hits[1].entry == 2);
  CHECK(hits[2].entry == 4);
  CHECK(hits[3].entry == 1);
}

TEST_CASE("property: top-k equals the full-sort oracle") {
  Rng rng(0x70bd);
  for (std::size_t n : {100u, 1000u}) {
    for (std::size_t dim : {8u, 64u}) {
      const auto index = random_index(rng, n, dim);
      for (int q = 0; q < 10; ++q) {
        // Some queries are stored vectors so exact-score ties with duplicates are exercised too.
        const auto query = q % 3 == 0 ? index.vector(rng.uniform(0, n - 1)) : rng.unit_vector(dim);
        for (std::size_t k : {1u, 5u, 10u}) {
          const auto hits = index.search_top_k(query, k);
          const auto expect = oracle_top_k(index, query, k);
          REQUIRE(hits.size() == expect.size());
          for (std::size_t i = 0; i < hits.size(); ++i) {
            CHECK(hits[i].entry == expect[i]);
            CHECK(hits[i].rank == i + 1);
            CHECK(hits[i].chunk_ref == index.ref(expect[i]));
          }
        }
      }
    }
  }
}

TEST_CASE("property: ranking is invariant to positive query scaling") {
  Rng rng(5);
  const auto index = random_index(rng, 300, 16);
  for (int t = 0; t < 30; ++t) {
    const auto q = rng.unit_vector(16);
    std::vector<double> scaled(q.values().begin(), q.values().end());
    const double s = rng.real(0.001, 1000.0);
    for (double& x : scaled) x *= s;
    const auto a = index.search_top_k(q, 10);
    const auto b = index.search_top_k(normalize(EmbeddingVector(scaled)), 10);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].entry == b[i].entry);
  }
}

TEST_CASE("save/load round trip is lossless at float32") {
  Rng rng(6);
  TempDir dir;
  const auto index = random_index(rng, 3, 5);
  save_index(index, dir / "i.ggix");
  const auto loaded = load_index(dir / "i.ggix");
  CHECK(loaded == index);
  CHECK(loaded.metadata() == index.metadata());
  for (std::size_t e = 0; e < 3; ++e) {
    const auto a = index.raw_vector(e), b = loaded.raw_vector(e);
    CHECK(std::memcmp(a.data(), b.data(), a.size_bytes()) == 0);
  }
  const auto q = rng.unit_vector(5);
  const auto ha = index.search_top_k(q, 3), hb = loaded.search_top_k(q, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(ha[i].entry == hb[i].entry);
    CHECK(ha[i].score == hb[i].score);
  }
  CHECK(encode_index(loaded) == encode_index(index));
}

TEST_CASE("fault injection names the failed field") {
  Rng rng(8);
  const auto bytes = encode_index(random_index(rng, 7, 4));

  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    CHECK(corrupt_field(b) == "magic");
  }
  SUBCASE("version bump") {
    auto b = bytes;
    b[4] += 1;
    CHECK(corrupt_field(b) == "version");
  }
  SUBCASE("flipped payload byte") {
    auto b = bytes;
    b[b.size() / 2] ^= 0x40;
    CHECK(corrupt_field(b) == "checksum");
  }
  SUBCASE("every truncation fails") {
    for (std::size_t len = 0; len < bytes.size(); ++len) {
      const std::vector<unsigned char> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(len));
      const auto field = corrupt_field(cut);
      CAPTURE(len);
      CHECK_FALSE(field.empty());
    }
  }
  SUBCASE("trailing garbage") {
    auto b = bytes;
    b.push_back(0);
    CHECK_FALSE(corrupt_field(b).empty());
  }
}

TEST_CASE("load_index reports missing files and truncated files") {
  TempDir dir;
  CHECK_THROWS_AS(load_index(dir / "absent.ggix"), IoError);
  Rng rng(9);
  save_index(random_index(rng, 4, 4), dir / "i.ggix");
  auto b = read_bytes(dir / "i.ggix");
  b.resize(b.size() - 9);
  write_bytes(dir / "cut.ggix", b);
  CHECK_THROWS_AS(load_index(dir / "cut.ggix"), IndexCorruptError);
}
