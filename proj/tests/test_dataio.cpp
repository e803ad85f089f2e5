#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "molcycle/dataio.hpp"

using namespace molcycle;
using dataio::Dataset;
using dataio::MoleculeRecord;
using dataio::SplitSizes;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name)
      : path((std::filesystem::temp_directory_path() / name).string()) {}
  ~TempFile() { std::remove(path.c_str()); }
};

MoleculeRecord rec(const std::string& id, const std::string& smiles, double prop,
                   std::initializer_list<double> emb = {}) {
  MoleculeRecord r;
  r.id = id;
  r.smiles = smiles;
  if (emb.size() > 0) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(emb.size()));
    Eigen::Index i = 0;
    for (double x : emb) v(i++) = x;
    r.embedding = std::move(v);
  }
  r.properties["p"] = prop;
  return r;
}

std::set<std::string> ids_of(const Dataset& ds) {
  std::set<std::string> s;
  for (const auto& r : ds) s.insert(r.id);
  return s;
}

}  // namespace

TEST_CASE("jsonl round trip preserves records") {
  TempFile f("molcycle_dataio_rt.jsonl");
  Dataset ds{rec("a", "CCO", 1.5, {0.25, -1.0}), rec("b", "CCN", -2.0, {3.0, 4.0})};
  dataio::save_dataset(f.path, ds);
  Dataset back = dataio::load_dataset(f.path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "a");
  CHECK(back[0].smiles == "CCO");
  CHECK(*back[0].embedding == *ds[0].embedding);
  CHECK(back[1].properties.at("p") == -2.0);
}

TEST_CASE("dataset errors carry line numbers") {
  TempFile f("molcycle_dataio_err.jsonl");
  SUBCASE("invalid json") {
    std::ofstream(f.path) << "{\"id\":\"a\"}\n{not json\n";
    CHECK_THROWS_WITH_AS(dataio::load_dataset(f.path), doctest::Contains("line 2"),
                         molcycle::data_error);
  }
  SUBCASE("duplicate id") {
    std::ofstream(f.path) << "{\"id\":\"a\"}\n{\"id\":\"a\"}\n";
    CHECK_THROWS_WITH_AS(dataio::load_dataset(f.path), doctest::Contains("duplicate"),
                         molcycle::data_error);
  }
  SUBCASE("ragged embedding dims") {
    std::ofstream(f.path)
        << "{\"id\":\"a\",\"embedding\":[1,2]}\n{\"id\":\"b\",\"embedding\":[1]}\n";
    CHECK_THROWS_WITH_AS(dataio::load_dataset(f.path), doctest::Contains("line 2"),
                         molcycle::data_error);
  }
  SUBCASE("non-finite embedding") {
    std::ofstream(f.path) << "{\"id\":\"a\",\"embedding\":[1e999]}\n";
    CHECK_THROWS_AS(dataio::load_dataset(f.path), molcycle::data_error);
  }
  SUBCASE("missing id") {
    std::ofstream(f.path) << "{\"smiles\":\"C\"}\n";
    CHECK_THROWS_AS(dataio::load_dataset(f.path), molcycle::data_error);
  }
  CHECK_THROWS_AS(dataio::load_dataset("no_such_dir/x.jsonl"), molcycle::data_error);
}

TEST_CASE("csv conversion") {
  TempFile csv("molcycle_dataio.csv");
  TempFile jsonl("molcycle_dataio_conv.jsonl");
  std::ofstream(csv.path) << "id,smiles,embedding_0,embedding_1,logp\r\n"
                             "m1,CCO,0.5,-1.25,2.0\r\n"
                             "m2,CCN,1.0,2.0,-0.5\n";
  CHECK(dataio::convert_csv(csv.path, jsonl.path) == 2);
  Dataset ds = dataio::load_dataset(jsonl.path);
  REQUIRE(ds.size() == 2);
  CHECK(ds[0].id == "m1");
  CHECK(ds[0].smiles == "CCO");
  REQUIRE(ds[0].embedding.has_value());
  CHECK((*ds[0].embedding)(0) == 0.5);
  CHECK((*ds[0].embedding)(1) == -1.25);
  CHECK(ds[0].properties.at("logp") == 2.0);
  CHECK(ds[1].properties.at("logp") == -0.5);
}

TEST_CASE("csv conversion rejects malformed input") {
  TempFile csv("molcycle_dataio_bad.csv");
  TempFile jsonl("molcycle_dataio_bad.jsonl");
  SUBCASE("missing id column") {
    std::ofstream(csv.path) << "smiles,logp\nCCO,1.0\n";
    CHECK_THROWS_AS(dataio::convert_csv(csv.path, jsonl.path), molcycle::data_error);
  }
  SUBCASE("ragged row") {
    std::ofstream(csv.path) << "id,logp\nm1\n";
    CHECK_THROWS_WITH_AS(dataio::convert_csv(csv.path, jsonl.path),
                         doctest::Contains("row 2"), molcycle::data_error);
  }
  SUBCASE("non-numeric cell") {
    std::ofstream(csv.path) << "id,logp\nm1,abc\n";
    CHECK_THROWS_AS(dataio::convert_csv(csv.path, jsonl.path), molcycle::data_error);
  }
}

TEST_CASE("get_property and embedding_matrix") {
  MoleculeRecord r = rec("a", "C", 3.0, {1.0, 2.0});
  CHECK(dataio::get_property(r, "p") == 3.0);
  CHECK_THROWS_AS(dataio::get_property(r, "missing"), molcycle::data_error);

  Dataset ds{rec("a", "C", 0, {1.0, 2.0}), rec("b", "C", 0, {3.0, 4.0})};
  Eigen::MatrixXd m = dataio::embedding_matrix(ds);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 2);
  CHECK(m(1, 0) == 3.0);
  Dataset no_emb{rec("a", "C", 0)};
  CHECK_THROWS_AS(dataio::embedding_matrix(no_emb), molcycle::data_error);
}

TEST_CASE("structural split by halogen predicate") {
  Dataset ds{rec("h1", "CCl", 0), rec("h2", "CCF", 0),  rec("h3", "CC#N", 0),
             rec("p1", "CCO", 0), rec("p2", "CBr", 0),  rec("p3", "c1ccccc1", 0),
             rec("bad", "C1CC", 0)};
  std::size_t skipped = 0, excluded = 0;
  auto sp = dataio::split_structural(ds, dataio::StructuralPredicate::Halogen, {}, 1,
                                     &skipped, &excluded);
  CHECK(skipped == 1);
  CHECK(excluded == 0);
  std::set<std::string> y = ids_of(sp.y_train);
  y.merge(ids_of(sp.y_test));
  CHECK(y == std::set<std::string>{"h1", "h2", "h3"});
  std::set<std::string> x = ids_of(sp.x_train);
  x.merge(ids_of(sp.x_test));
  CHECK(x == std::set<std::string>{"p1", "p2", "p3"});
}

TEST_CASE("structural split by aromatic ring count") {
  Dataset ds{rec("one", "c1ccccc1", 0),
             rec("two", "c1ccc2ccccc2c1", 0),
             rec("twob", "c1ccc(-c2ccccc2)cc1", 0),
             rec("three", "c1ccc2cc3ccccc3cc2c1", 0),
             rec("zero", "C1CCCCC1", 0),
             rec("four", "c1ccc2cc3cc4ccccc4cc3cc2c1", 0)};
  std::size_t skipped = 0, excluded = 0;
  auto sp = dataio::split_structural(ds, dataio::StructuralPredicate::AromaticRings, {},
                                     1, &skipped, &excluded);
  CHECK(skipped == 0);
  CHECK(excluded == 2);  // zero rings and four rings drop out
  std::set<std::string> x = ids_of(sp.x_train);
  x.merge(ids_of(sp.x_test));
  CHECK(x == std::set<std::string>{"two", "twob"});
  std::set<std::string> y = ids_of(sp.y_train);
  y.merge(ids_of(sp.y_test));
  CHECK(y == std::set<std::string>{"one", "three"});
}

TEST_CASE("structural split respects sizes, seed and disjointness") {
  Dataset ds;
  for (int i = 0; i < 40; ++i)
    ds.push_back(rec("h" + std::to_string(i), i % 2 ? "CCl" : "CCO", 0));
  SplitSizes sizes;
  sizes.x_train = 10;
  sizes.x_test = 5;
  sizes.y_train = 12;
  sizes.y_test = 4;
  auto a = dataio::split_structural(ds, dataio::StructuralPredicate::Halogen, sizes, 7);
  auto b = dataio::split_structural(ds, dataio::StructuralPredicate::Halogen, sizes, 7);
  auto c = dataio::split_structural(ds, dataio::StructuralPredicate::Halogen, sizes, 8);
  CHECK(a.x_train.size() == 10);
  CHECK(a.x_test.size() == 5);
  CHECK(a.y_train.size() == 12);
  CHECK(a.y_test.size() == 4);
  CHECK(ids_of(a.x_train) == ids_of(b.x_train));  // same seed, same split
  CHECK(ids_of(a.x_train) != ids_of(c.x_train));  // different seed
  // train and test never overlap
  for (const auto& id : ids_of(a.x_test)) CHECK(ids_of(a.x_train).count(id) == 0);
  for (const auto& id : ids_of(a.y_test)) CHECK(ids_of(a.y_train).count(id) == 0);
}

TEST_CASE("median split sends ties to X and reserves the lowest tail for x_test") {
  Dataset ds;
  for (int i = 1; i <= 6; ++i)
    ds.push_back(rec("m" + std::to_string(i), "C", static_cast<double>(i)));
  SplitSizes sizes;
  sizes.x_test = 2;
  auto sp = dataio::split_by_median(ds, "p", sizes, 3);
  // median 3.5: X pool = {1,2,3}, Y pool = {4,5,6}
  CHECK(ids_of(sp.y_train) == std::set<std::string>{"m4", "m5", "m6"});
  // x_test = the two lowest, removed from x_train
  REQUIRE(sp.x_test.size() == 2);
  CHECK(sp.x_test[0].id == "m1");
  CHECK(sp.x_test[1].id == "m2");
  CHECK(ids_of(sp.x_train) == std::set<std::string>{"m3"});
}

TEST_CASE("median split puts a record equal to the median into X") {
  Dataset ds;
  for (int i = 1; i <= 5; ++i)
    ds.push_back(rec("m" + std::to_string(i), "C", static_cast<double>(i)));
  SplitSizes sizes;
  sizes.x_test = 1;
  auto sp = dataio::split_by_median(ds, "p", sizes, 3);  // median = 3
  std::set<std::string> x = ids_of(sp.x_train);
  x.merge(ids_of(sp.x_test));
  CHECK(x.count("m3") == 1);
  CHECK(ids_of(sp.y_train) == std::set<std::string>{"m4", "m5"});
}

TEST_CASE("top-fraction split samples Y from the best records") {
  Dataset ds;
  for (int i = 1; i <= 10; ++i)
    ds.push_back(rec("m" + std::to_string(i), "C", static_cast<double>(i)));
  SplitSizes sizes;
  sizes.x_test = 2;
  auto sp = dataio::split_top_fraction(ds, "p", 0.2, sizes, 5);
  // top 20% of 10 records = values {10, 9}
  CHECK(ids_of(sp.y_train) == std::set<std::string>{"m9", "m10"});
  REQUIRE(sp.x_test.size() == 2);
  CHECK(sp.x_test[0].id == "m1");
  // x_train drawn from everything except the test tail
  for (const auto& id : ids_of(sp.x_train)) {
    CHECK(id != "m1");
    CHECK(id != "m2");
  }
  CHECK_THROWS_AS(dataio::split_top_fraction(ds, "p", 0.0, sizes, 5),
                  molcycle::config_error);
  CHECK_THROWS_AS(dataio::split_top_fraction(ds, "p", 1.5, sizes, 5),
                  molcycle::config_error);
}

TEST_CASE("split manifest lists every id") {
  TempFile f("molcycle_manifest.json");
  dataio::SplitPair sp;
  sp.x_train = {rec("a", "C", 0)};
  sp.y_train = {rec("b", "C", 0)};
  sp.x_test = {rec("c", "C", 0)};
  sp.y_test = {rec("d", "C", 0)};
  dataio::write_split_manifest(f.path, sp, "halogen", 99);
  std::ifstream in(f.path);
  nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j.at("mode") == "halogen");
  CHECK(j.at("seed") == 99);
  CHECK(j.at("x_train") == nlohmann::json::array({"a"}));
  CHECK(j.at("y_train") == nlohmann::json::array({"b"}));
  CHECK(j.at("x_test") == nlohmann::json::array({"c"}));
  CHECK(j.at("y_test") == nlohmann::json::array({"d"}));
}
