#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "gg/corpus.hpp"
#include "gg/embedding.hpp"
#include "gg/errors.hpp"
#include "gg/hash.hpp"
#include "gg/vectorstore.hpp"
#include "test_support.hpp"

using namespace gg;
using namespace gg::embedding;
using gg::testing::Rng;

namespace {

std::string join_words(const std::vector<std::string>& ws) {
  std::string out;
  for (const auto& w : ws) out += (out.empty() ? "" : " ") + w;
  return out;
}

// Independent restatement of the documented hashing rule.
std::vector<double> oracle_embed(const std::vector<std::string>& tokens, std::size_t dim) {
  std::map<std::size_t, double> acc;
  for (const auto& t : tokens) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : t) h = (h ^ c) * 0x100000001b3ULL;
    h ^= 0x67756964656c696eULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    h ^= h >> 31;
    acc[h % dim] += ((h / dim) % 2 == 0) ? 1.0 : -1.0;
  }
  std::vector<double> v(dim, 0.0);
  double norm = 0.0;
  for (const auto& [i, x] : acc) {
    v[i] = x;
    norm += x * x;
  }
  for (double& x : v) x /= std::sqrt(norm);
  return v;
}

class FixedBackend final : public EmbeddingBackend {
 public:
  explicit FixedBackend(std::size_t dim) : dim_(dim) {}
  std::vector<EmbeddingVector> embed_raw(std::span<const std::string> texts) override {
    std::vector<EmbeddingVector> out;
    for (std::size_t i = 0; i < texts.size(); ++i) out.emplace_back(std::vector<double>(dim_, 1.0 + double(i)));
    return out;
  }

 private:
  std::size_t dim_;
};

}  // namespace

TEST_CASE("EmbeddingVector rejects empty and non-finite values") {
  CHECK_THROWS_AS(EmbeddingVector(std::vector<double>{}), EmbeddingError);
  CHECK_THROWS_AS(EmbeddingVector({1.0, NAN}), EmbeddingError);
  CHECK_THROWS_AS(EmbeddingVector({INFINITY}), EmbeddingError);
}

TEST_CASE("normalize examples") {
  const auto v = normalize(EmbeddingVector({3.0, 4.0}));
  CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-12));
  const auto again = normalize(v);
  for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(again[i] - v[i]) < 1e-9);
  CHECK_THROWS_AS(normalize(EmbeddingVector({0.0, 0.0})), EmbeddingError);
}

TEST_CASE("truncate_matryoshka examples") {
  const auto a = truncate_matryoshka(EmbeddingVector({0.6, 0.8, 0.0, 0.0}), 2);
  CHECK(a[0] == doctest::Approx(0.6));
  CHECK(a[1] == doctest::Approx(0.8));
  const auto b = truncate_matryoshka(normalize(EmbeddingVector({1, 1, 1, 1})), 2);
  CHECK(b[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(b[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
  const EmbeddingVector raw({1.0, 2.0, 3.0});
  CHECK(truncate_matryoshka(raw, 3) == normalize(raw));
  CHECK_THROWS_AS(truncate_matryoshka(raw, 4), EmbeddingError);
  CHECK_THROWS_AS(truncate_matryoshka(raw, 0), EmbeddingError);
  CHECK_THROWS_AS(truncate_matryoshka(EmbeddingVector({0.0, 0.0, 1.0}), 2), EmbeddingError);
}

TEST_CASE("deterministic_embed matches the documented hashing rule") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ws = rng.words(rng.uniform(1, 30));
    const std::size_t dim = rng.uniform(1, 3) == 1 ? 64 : 768;
    const auto expected = oracle_embed(ws, dim);
    if (std::any_of(expected.begin(), expected.end(), [](double x) { return std::isnan(x); })) {
      CHECK_THROWS_AS(deterministic_embed(join_words(ws), dim), EmbeddingError);  // features cancelled
      continue;
    }
    const auto got = deterministic_embed(join_words(ws), dim);
    REQUIRE(got.dim() == dim);
    for (std::size_t i = 0; i < dim; ++i) CHECK(std::abs(got[i] - expected[i]) < 1e-12);
  }
}

TEST_CASE("deterministic_embed examples") {
  CHECK(deterministic_embed("aspirin dose", 768) == deterministic_embed("aspirin dose", 768));
  CHECK(deterministic_embed("a b", 64) == deterministic_embed("b a", 64));
  CHECK(vectorstore::cosine(deterministic_embed("a", 768), deterministic_embed("a a", 768)) ==
        doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(deterministic_embed("", 8), EmbeddingError);
  CHECK_THROWS_AS(deterministic_embed(" \n\t", 8), EmbeddingError);
  CHECK_THROWS_AS(deterministic_embed("a", 0), EmbeddingError);
}

TEST_CASE("embed over random word strings yields unit vectors") {
  Rng rng(99);
  EmbedderConfig cfg;
  const Embedder embedder(cfg);
  std::vector<std::string> texts;
  for (int i = 0; i < 100; ++i) texts.push_back(join_words(rng.words(rng.uniform(1, 40))));
  const auto out = embedder.embed(texts);
  REQUIRE(out.size() == texts.size());
  for (const auto& v : out) {
    CHECK(v.dim() == 768);
    CHECK(std::abs(v.norm() - 1.0) <= 1e-6);
  }
}

TEST_CASE("disjoint random vocabularies are nearly orthogonal") {
  Rng rng(2024);
  int below = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> a, b;
    for (int i = 0; i < 20; ++i) a.push_back("a" + rng.word(4, 8));
    for (int i = 0; i < 20; ++i) b.push_back("b" + rng.word(4, 8));
    const double c =
        std::abs(vectorstore::cosine(deterministic_embed(join_words(a), 768), deterministic_embed(join_words(b), 768)));
    worst = std::max(worst, c);
    if (c < 0.5) ++below;
  }
  MESSAGE("max |cosine| over 100 trials: " << worst);
  CHECK(below == 100);
}

TEST_CASE("Embedder truncates and renormalizes") {
  EmbedderConfig cfg;
  cfg.full_dim = 64;
  cfg.truncate_dim = 16;
  const Embedder embedder(cfg);
  const std::vector<std::string> texts{"one two three four five six seven eight nine ten eleven twelve"};
  const auto full = deterministic_embed(texts[0], 64);
  const auto out = embedder.embed(texts);
  REQUIRE(out[0].dim() == 16);
  CHECK(out[0] == truncate_matryoshka(full, 16));
  CHECK(embedder.identity() == "hash:signed-feature-hash-v1:64:16");
}

TEST_CASE("Embedder reports empty inputs and dimension mismatches") {
  EmbedderConfig cfg;
  cfg.full_dim = 8;
  const Embedder ok(cfg);
  const std::vector<std::string> with_empty{"fine", "  "};
  try {
    ok.embed(with_empty);
    FAIL("expected EmbeddingError");
  } catch (const EmbeddingError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }

  const Embedder wrong(cfg, std::make_unique<FixedBackend>(5));
  const std::vector<std::string> one{"x"};
  CHECK_THROWS_AS(wrong.embed(one), ConfigError);
}

TEST_CASE("EmbedderConfig validation") {
  EmbedderConfig cfg;
  cfg.truncate_dim = 769;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.truncate_dim = 0;
  cfg.full_dim = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.full_dim = 768;
  cfg.backend = BackendKind::Remote;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.remote.base_url = "http://localhost:1";
  CHECK_NOTHROW(cfg.validate());
  CHECK(parse_backend("HASH") == BackendKind::DeterministicHash);
  CHECK_THROWS_AS(parse_backend("bert"), ConfigError);
}

TEST_CASE("property: embedding invariants across dims") {
  Rng rng(0xE3BED);
  for (std::size_t dim : {64u, 256u, 768u}) {
    for (int trial = 0; trial < 200; ++trial) {
      auto ws = rng.words(rng.uniform(1, 25));
      const auto v = deterministic_embed(join_words(ws), dim);
      CHECK(std::abs(v.norm() - 1.0) <= 1e-6);

      auto shuffled = ws;
      std::shuffle(shuffled.begin(), shuffled.end(), rng.engine());
      CHECK(deterministic_embed(rng.messy_text(shuffled), dim) == v);

      const auto r = rng.unit_vector(dim);
      const double scale = rng.real(0.01, 100.0);
      std::vector<double> scaled(r.values().begin(), r.values().end());
      for (double& x : scaled) x *= scale;
      CHECK(vectorstore::cosine(normalize(EmbeddingVector(scaled)), r) == doctest::Approx(1.0).epsilon(1e-9));

      const auto full = truncate_matryoshka(r, dim);
      for (std::size_t i = 0; i < dim; ++i) CHECK(std::abs(full[i] - r[i]) < 1e-9);
    }
  }
}
