#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "glore/analysis.hpp"
#include "support/synthdata.hpp"

using namespace glore;

TEST_CASE("cosine_similarity closed forms") {
  CHECK(cosine_similarity({1, 2}, {1, 2}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(cosine_similarity({1, 1}, {1, 0}) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
  CHECK_THROWS_AS(cosine_similarity({0, 0}, {1, 0}), Error);
}

TEST_CASE("cosine_similarity scaling behaviour") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(4);
    for (double& x : a) x = rng.uniform(-2, 2);
    if (vnorm(a) == 0.0) continue;
    double c = rng.uniform(0.1, 5.0);
    std::vector<double> pos = a, neg = a;
    for (double& x : pos) x *= c;
    for (double& x : neg) x *= -c;
    CHECK(std::fabs(cosine_similarity(a, pos) - 1.0) <= 1e-12);
    CHECK(std::fabs(cosine_similarity(a, neg) + 1.0) <= 1e-12);
  }
}

TEST_CASE("nearest_neighbors excludes the query and sorts by similarity") {
  EmbeddingTable table;
  table.names = {"<a>", "<b>", "<c>"};
  table.vectors = {{1, 0}, {0.9, 0.1}, {0, 1}};

  SUBCASE("exact string match excluded") {
    auto nn = nearest_neighbors("<a>", {1, 0}, table, 2);
    REQUIRE(nn.size() == 2);
    CHECK(nn[0].name == "<b>");
    CHECK(nn[1].name == "<c>");
  }
  SUBCASE("k beyond the table returns the full sorted table") {
    auto nn = nearest_neighbors("<zzz>", {1, 0}, table, 10);
    CHECK(nn.size() == 3);
    CHECK(nn[0].name == "<a>");
  }
  SUBCASE("empty table is an error") {
    EmbeddingTable empty;
    CHECK_THROWS_AS(nearest_neighbors("<q>", {1, 0}, empty, 1), Error);
  }
  SUBCASE("k below one is an error") {
    CHECK_THROWS_AS(nearest_neighbors("<q>", {1, 0}, table, 0), Error);
  }
  SUBCASE("tie-break by rendered string") {
    EmbeddingTable tied;
    tied.names = {"<y>", "<x>"};
    tied.vectors = {{2, 0}, {1, 0}};
    auto nn = nearest_neighbors("<q>", {1, 0}, tied, 2);
    CHECK(nn[0].name == "<x>");  // both similarity 1
    CHECK(nn[1].name == "<y>");
  }
}

TEST_CASE("nearest_neighbors matches a full-sort oracle") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    size_t n = 20 + rng.index(200);
    EmbeddingTable table;
    for (size_t i = 0; i < n; ++i) {
      table.names.push_back("<rel" + std::to_string(i) + ">");
      std::vector<double> v(6);
      for (double& x : v) x = rng.uniform(-1, 1);
      if (vnorm(v) == 0.0) v[0] = 1.0;
      table.vectors.push_back(v);
    }
    std::vector<double> q(6);
    for (double& x : q) x = rng.uniform(-1, 1);
    if (vnorm(q) == 0.0) q[0] = 1.0;

    auto got = nearest_neighbors(table.names[0], q, table, 5);

    std::vector<Neighbor> all;
    for (size_t i = 1; i < n; ++i) {
      all.push_back({table.names[i], cosine_similarity(q, table.vectors[i])});
    }
    std::stable_sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
      if (a.similarity != b.similarity) return a.similarity > b.similarity;
      return a.name < b.name;
    });
    REQUIRE(got.size() == 5);
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].name == all[i].name);
      CHECK(got[i].similarity == all[i].similarity);
    }
  }
}

TEST_CASE("auto_label follows the strict majority rule") {
  RelationGraph g;
  g.kb_vocab = {"founder", "named_after", "other"};
  g.textual_vocab = {"<dominant>", "<tied>", "<certain>"};
  g.rows = {{{0, 89, 0.8900}, {1, 11, 0.1100}},
            {{0, 1, 0.5}, {1, 1, 0.5}},
            {{2, 3, 1.0}}};
  auto labels = auto_label(g);
  CHECK(labels.at("<dominant>").label == "founder");
  CHECK(labels.at("<dominant>").dominant_weight == doctest::Approx(0.89));
  CHECK_FALSE(labels.at("<tied>").label.has_value());  // 0.5 is not "more than half"
  CHECK(labels.at("<certain>").label == "other");

  for (const auto& [name, rl] : labels) {
    (void)name;
    if (rl.dominant_weight <= 0.5) CHECK_FALSE(rl.label.has_value());
  }
}

TEST_CASE("labeled embedding export and table loading") {
  std::vector<LabeledEmbedding> rows = {
      {"<-dobj> founded <nsubj>", std::string("founder"), 0.89, {1.5, -2.5}},
      {"<tied>", std::nullopt, 0.5, {0.25, 0.75}},
  };
  std::ostringstream out;
  write_labeled_embeddings(out, rows, "# meta");
  std::string text = out.str();
  CHECK(text.find("founder") != std::string::npos);
  CHECK(text.find("<tied>\t\t") != std::string::npos);  // absent label stays empty

  std::istringstream table_in(
      "#relation\tz\n<-dobj> founded <nsubj>\t1.5 -2.5\n<x>\t0.5 0.25\n");
  EmbeddingTable table = EmbeddingTable::load(table_in);
  REQUIRE(table.names.size() == 2);
  CHECK(table.find("<x>") == 1);
  CHECK(table.find("<missing>") == -1);
  CHECK(table.vectors[0][1] == -2.5);

  std::istringstream bad("#relation\tz\n<x>\t1 2\n<y>\t1 2 3\n");
  CHECK_THROWS_AS(EmbeddingTable::load(bad), Error);
}

TEST_CASE("neighbor report formats similarities to four decimals") {
  std::string report = neighbor_report({{"<a>", 0.70711}, {"<b>", -0.5}});
  CHECK(report.find("1\t0.7071\t<a>") != std::string::npos);
  CHECK(report.find("2\t-0.5000\t<b>") != std::string::npos);
}
