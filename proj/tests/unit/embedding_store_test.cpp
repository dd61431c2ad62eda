#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "conse/embedding_store.hpp"
#include "conse/error.hpp"
#include "support/oracles.hpp"

using namespace conse;

namespace {

EmbeddingTable parse(const std::string& text) {
  std::istringstream in(text);
  return load_embeddings(in);
}

ErrorCode parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

LabelCatalog catalog_from(const std::string& labels, const std::string& splits, const EmbeddingTable& table) {
  std::istringstream l(labels);
  std::istringstream s(splits);
  return load_catalog(l, s, table);
}

ErrorCode catalog_error(const std::string& labels, const std::string& splits, const EmbeddingTable& table) {
  try {
    catalog_from(labels, splits, table);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

double l2(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

const std::string kFixtures = CONSE_FIXTURE_DIR;

}  // namespace

TEST_SUITE("embedding_store") {

TEST_CASE("axis vectors are unit-normalized") {
  auto table = parse("2 3\ncat 1 0 0\ndog 0 2 0\n");
  REQUIRE(table.size() == 2);
  CHECK(table.dimension() == 3);
  auto cat = table.find("cat");
  auto dog = table.find("dog");
  REQUIRE(cat);
  REQUIRE(dog);
  CHECK(std::vector<double>(cat->begin(), cat->end()) == std::vector<double>{1, 0, 0});
  CHECK(std::vector<double>(dog->begin(), dog->end()) == std::vector<double>{0, 1, 0});
  CHECK_FALSE(table.find("Cat"));
}

TEST_CASE("norm fixture matches high-precision normalization") {
  // Frozen from a 50-digit mpmath run: (1,1,1,1)/2, (2,0,0,0)/2, (0,0,3,4)/5.
  const auto table = load_embeddings_file(kFixtures + "/norms.txt");
  const std::vector<std::vector<double>> expected{{0.5, 0.5, 0.5, 0.5}, {1, 0, 0, 0}, {0, 0, 0.6, 0.8}};
  for (std::size_t i = 0; i < 3; ++i) {
    auto v = table.vector(i);
    CHECK(std::abs(l2(v) - 1.0) <= 1e-9);
    for (std::size_t d = 0; d < 4; ++d) CHECK(v[d] == doctest::Approx(expected[i][d]).epsilon(1e-15));
  }
}

TEST_CASE("malformed embedding files are rejected") {
  CHECK(parse_error("1 3\na 0 0 0\n") == ErrorCode::ZeroVector);
  CHECK(parse_error("1 3\na 1 0\n") == ErrorCode::DimensionMismatch);
  CHECK(parse_error("1 3\na 1 0 0 4\n") == ErrorCode::DimensionMismatch);
  CHECK(parse_error("1 2\na 1 nan\n") == ErrorCode::NonFinite);
  CHECK(parse_error("1 2\na inf 1\n") == ErrorCode::NonFinite);
  CHECK(parse_error("2 2\na 1 0\na 0 1\n") == ErrorCode::DuplicateTerm);
  CHECK(parse_error("3 2\na 1 0\nb 0 1\n") == ErrorCode::CountMismatch);
  CHECK(parse_error("1 2\na 1 0\nb 0 1\n") == ErrorCode::CountMismatch);
  CHECK(parse_error("1 2\na 1 x\n") == ErrorCode::Parse);
  CHECK(parse_error("2\n") == ErrorCode::Parse);
  CHECK(parse_error("") == ErrorCode::Parse);
  CHECK(parse_error("0 0\n") == ErrorCode::Parse);
}

TEST_CASE("term matching is exact and case sensitive") {
  auto table = parse("2 2\nLion 1 0\nlion 0 1\n");
  CHECK(table.size() == 2);
  CHECK((*table.find("Lion"))[0] == 1.0);
  CHECK((*table.find("lion"))[1] == 1.0);
}

TEST_CASE("property: random tables load with unit norms and deterministically") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t q = 1 + trial % 9;
    std::ostringstream text;
    text << 20 << ' ' << q << '\n';
    std::uniform_real_distribution<double> scale(1e-3, 1e3);
    for (int i = 0; i < 20; ++i) {
      text << "w" << i;
      for (double x : conse::testing::random_vector(q, rng)) text << ' ' << x * scale(rng);
      text << '\n';
    }
    const auto a = parse(text.str());
    const auto b = parse(text.str());
    CHECK(a == b);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(l2(a.vector(i)) - 1.0) <= 1e-6);

    std::ostringstream emitted;
    write_embeddings(emitted, a);
    const auto c = parse(emitted.str());
    REQUIRE(c.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(c.term(i) == a.term(i));
      for (std::size_t d = 0; d < q; ++d) CHECK(std::abs(c.vector(i)[d] - a.vector(i)[d]) <= 1e-15);
    }
  }
}

TEST_CASE("catalog retains resolvable labels and reports fully OOV ones") {
  auto table = parse("1 2\nlion 1 0\n");
  auto catalog = catalog_from("7\tlion\n8\tliger,lion-tiger-hybrid\n", "7 TRAIN\n8 TEST\n", table);
  REQUIRE(catalog.labels().size() == 1);
  CHECK(catalog.labels()[0].id == 7);
  CHECK(catalog.labels()[0].synonyms.size() == 1);
  REQUIRE(catalog.exclusions().size() == 1);
  CHECK(catalog.exclusions()[0].id == 8);
  CHECK(catalog.is_declared(8));
  CHECK_FALSE(catalog.is_resolved(8));
  const auto report = exclusion_report(catalog);
  CHECK(report["retained"] == 1);
  CHECK(report["excluded"][0]["label_id"] == 8);
  CHECK(report["excluded"][0]["synonyms"] == nlohmann::json::array({"liger", "lion-tiger-hybrid"}));
}

TEST_CASE("five-label fixture resolves to four labels") {
  // Enumerated by hand: label 8 (liger, lion-tiger-hybrid) has no vector;
  // label 9 keeps big_cat and feline, dropping pantherine.
  const auto table = load_embeddings_file(kFixtures + "/catalog5/embeddings.txt");
  const auto catalog =
      load_catalog_files(kFixtures + "/catalog5/labels.tsv", kFixtures + "/catalog5/splits.txt", table);
  CHECK(catalog.labels().size() == 4);
  REQUIRE(catalog.exclusions().size() == 1);
  CHECK(catalog.exclusions()[0].id == 8);
  CHECK(catalog.exclusions()[0].split == Split::Test);
  CHECK(catalog.ids(Split::Train) == std::vector<LabelId>{7, 10});
  CHECK(catalog.ids(Split::Test) == std::vector<LabelId>{9, 11});
  CHECK(catalog.train_order() == std::vector<LabelId>{7, 10});
}

TEST_CASE("catalog input errors") {
  auto table = parse("2 2\nlion 1 0\ntiger 0 1\n");
  CHECK(catalog_error("1\tlion\n1\ttiger\n", "1 TRAIN\n", table) == ErrorCode::DuplicateLabel);
  CHECK(catalog_error("1\t\n", "1 TRAIN\n", table) == ErrorCode::EmptySynonyms);
  CHECK(catalog_error("1\t,,\n", "1 TRAIN\n", table) == ErrorCode::EmptySynonyms);
  CHECK(catalog_error("1\tlion\n", "1 TRAIN\n2 TEST\n", table) == ErrorCode::UnknownLabel);
  CHECK(catalog_error("1\tlion\n2\ttiger\n", "1 TRAIN\n", table) == ErrorCode::MissingSplit);
  CHECK(catalog_error("1\tlion\n", "1 VALID\n", table) == ErrorCode::Parse);
  CHECK(catalog_error("1\tlion\n", "1 TRAIN\n1 TEST\n", table) == ErrorCode::DuplicateLabel);
  CHECK(catalog_error("one\tlion\n", "1 TRAIN\n", table) == ErrorCode::Parse);
  CHECK(catalog_error("1 lion\n", "1 TRAIN\n", table) == ErrorCode::Parse);
}

TEST_CASE("train order keeps excluded TRAIN labels") {
  auto table = parse("2 2\nlion 1 0\ntiger 0 1\n");
  auto catalog = catalog_from("3\tlion\n1\tghost\n2\ttiger\n", "3 TRAIN\n1 TRAIN\n2 TEST\n", table);
  CHECK(catalog.train_order() == std::vector<LabelId>{3, 1});
  CHECK(catalog.ids(Split::Train) == std::vector<LabelId>{3});
}

TEST_CASE("label_embedding averages in-vocabulary synonyms") {
  auto table = parse("3 2\nlion 1 0\nx 1 0\ny 0 1\n");
  auto catalog = catalog_from("1\tlion\n2\tx,y\n3\tmissing\n", "1 TRAIN\n2 TEST\n3 TEST\n", table);

  auto lion = label_embedding(catalog, table, 1);
  CHECK(lion.mean_vector == std::vector<double>{1.0, 0.0});
  CHECK(lion.word_vectors.size() == 1);

  auto xy = label_embedding(catalog, table, 2);
  CHECK(xy.mean_vector == std::vector<double>{0.5, 0.5});
  CHECK(xy.terms == std::vector<std::string>{"x", "y"});

  CHECK_THROWS_AS(label_embedding(catalog, table, 3), Error);
  CHECK_THROWS_AS(label_embedding(catalog, table, 99), Error);
}

TEST_CASE("label_embedding skips an OOV synonym in the fixture") {
  // Hand computed: big_cat -> (0.6, 0.8, 0), feline -> (0, 0, 1), mean (0.3, 0.4, 0.5).
  const auto table = load_embeddings_file(kFixtures + "/catalog5/embeddings.txt");
  const auto catalog =
      load_catalog_files(kFixtures + "/catalog5/labels.tsv", kFixtures + "/catalog5/splits.txt", table);
  const auto e = label_embedding(catalog, table, 9);
  REQUIRE(e.word_vectors.size() == 2);
  CHECK(e.mean_vector[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(e.mean_vector[1] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(e.mean_vector[2] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("property: label_embedding is invariant to synonym order and equals the word mean") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t q = 2 + trial % 7;
    const std::size_t syn = 1 + trial % 5;
    std::vector<std::pair<std::string, std::vector<double>>> entries;
    std::vector<std::string> terms;
    for (std::size_t i = 0; i < syn; ++i) {
      terms.push_back("t" + std::to_string(i));
      entries.emplace_back(terms.back(), conse::testing::random_vector(q, rng));
    }
    const auto table = EmbeddingTable::from_vectors(q, entries);
    auto shuffled = terms;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const LabelCatalog a({{1, terms, Split::Test}}, table);
    const LabelCatalog b({{1, shuffled, Split::Test}}, table);
    const auto ea = label_embedding(a, table, 1);
    const auto eb = label_embedding(b, table, 1);
    CHECK(ea.mean_vector == eb.mean_vector);
    for (std::size_t d = 0; d < q; ++d) {
      double mean = 0;
      for (const auto& w : ea.word_vectors) mean += w[d];
      mean /= static_cast<double>(ea.word_vectors.size());
      CHECK(std::abs(mean - ea.mean_vector[d]) <= 1e-9);
    }
  }
}

TEST_CASE("LabelEmbeddings covers every retained label") {
  const auto table = load_embeddings_file(kFixtures + "/catalog5/embeddings.txt");
  const auto catalog =
      load_catalog_files(kFixtures + "/catalog5/labels.tsv", kFixtures + "/catalog5/splits.txt", table);
  const LabelEmbeddings embeddings(catalog, table);
  CHECK(embeddings.size() == 4);
  CHECK(embeddings.find(8) == nullptr);
  CHECK_THROWS_AS(embeddings.at(8), Error);
  CHECK(embeddings.at(11).word_vectors.size() == 2);
}

}  // TEST_SUITE
