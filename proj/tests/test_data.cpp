#include <algorithm>
#include <set>

#include "doctest.h"
#include "esam/data.hpp"
#include "test_util.hpp"

using namespace esam;
using test::TempDir;

namespace {

void write_generic(const TempDir& dir) {
  dir.write("items.tsv",
            "5\t0,1\t100\n"
            "7\t1\t200\n"
            "9\t2\t100\n"
            "11\t0\t300\n"
            "13\t1,2\t200\n"
            "15\t2\t300\n");
  dir.write("queries.tsv",
            "10\t0\n"
            "20\t1\n"
            "30\t0\n");
  dir.write("log.tsv",
            "10\t5\t1\t100\n"
            "10\t7\t0\t50\n"
            "20\t9\t1\t10\n"
            "10\t5\t0\t200\n"
            "30\t11\t2\t5\n"
            "20\t13\t0\t7\n");
}

// a log with controllable shape for the split / grouping tests
InteractionLog make_log(std::size_t num_items, std::size_t num_queries,
                        std::size_t num_genres) {
  InteractionLog log;
  log.similarity_field = 0;
  log.item_field_vocab = {num_genres, num_items};
  log.query_field_vocab = {num_queries};
  for (std::size_t i = 0; i < num_items; ++i) {
    ItemInput d;
    d.fields = {{static_cast<std::int64_t>(i % num_genres)},
                {static_cast<std::int64_t>(i)}};
    log.catalog.push_back(std::move(d));
  }
  for (std::size_t q = 0; q < num_queries; ++q) {
    QueryInput query;
    query.profile = {static_cast<std::int64_t>(q)};
    log.queries.push_back(std::move(query));
  }
  return log;
}

}  // namespace

TEST_CASE("generic log loader densifies, dedups and fills behavior") {
  TempDir dir("esam_generic");
  write_generic(dir);
  InteractionLog log = load_generic_log(dir.path());

  CHECK(log.num_items() == 6);
  CHECK(log.num_queries() == 3);
  CHECK(log.item_field_vocab == std::vector<std::size_t>{3, 3});
  CHECK(log.query_field_vocab == std::vector<std::size_t>{2});
  CHECK(log.similarity_field == 0);

  // raw item 5 -> dense 0 with genres {0,1}; raw 13 -> dense 4 with {1,2}
  CHECK(log.catalog[0].fields[0] == std::vector<std::int64_t>{0, 1});
  CHECK(log.catalog[4].fields[0] == std::vector<std::int64_t>{1, 2});
  // brand 100/200/300 -> 0/1/2
  CHECK(log.catalog[2].fields[1] == std::vector<std::int64_t>{0});
  CHECK(log.catalog[3].fields[1] == std::vector<std::int64_t>{2});

  // duplicate (query 10, item 5): the later timestamp (label 0) survives
  REQUIRE(log.records.size() == 5);
  bool found = false;
  for (const Interaction& r : log.records)
    if (r.query == 0 && r.item == 0) {
      found = true;
      CHECK(r.label == 0);
      CHECK(r.timestamp == 200);
    }
  CHECK(found);

  // non-binary labels collapse to 1
  for (const Interaction& r : log.records)
    if (r.query == 2) CHECK(r.label == 1);

  // behavior lists mirror the kept records
  std::size_t behavior_total = 0;
  for (const QueryInput& q : log.queries) behavior_total += q.behavior.size();
  CHECK(behavior_total == log.records.size());
}

TEST_CASE("generic loader reports file and line on bad input") {
  TempDir dir("esam_generic_bad");
  write_generic(dir);
  dir.write("log.tsv", "10\t5\t1\n99\t5\t1\n");
  CHECK_THROWS_WITH_AS(load_generic_log(dir.path()),
                       doctest::Contains("log.tsv:2"), DataError);

  dir.write("log.tsv", "10\tfive\t1\n");
  CHECK_THROWS_WITH_AS(load_generic_log(dir.path()),
                       doctest::Contains("bad integer"), DataError);

  dir.write("log.tsv", "10\t5\n");
  CHECK_THROWS_AS(load_generic_log(dir.path()), DataError);
}

TEST_CASE("movielens loader parses the :: format") {
  TempDir dir("esam_ml");
  dir.write("users.dat",
            "1::F::1::10::48067\n"
            "2::M::56::16::70072\n");
  dir.write("movies.dat",
            "1::Toy Story (1995)::Animation|Children's|Comedy\n"
            "2::Jumanji (1995)::Adventure|Children's\n"
            "3::Heat (1995)::Action|Crime\n");
  dir.write("ratings.dat",
            "1::1::5::978300760\n"
            "1::2::3::978302109\n"
            "2::3::4::978301968\n");

  InteractionLog log = load_movielens(dir.path());
  CHECK(log.num_queries() == 2);
  CHECK(log.num_items() == 3);
  // user id, age, gender, occupation
  CHECK(log.query_field_vocab == std::vector<std::size_t>{2, 2, 2, 2});
  // movie id, year, genre
  CHECK(log.item_field_vocab == std::vector<std::size_t>{3, 1, 6});
  CHECK(log.similarity_field == 2);

  REQUIRE(log.records.size() == 3);
  // ratings above 3 are positive
  CHECK(log.records[0].label == 1);
  CHECK(log.records[1].label == 0);
  CHECK(log.records[2].label == 1);

  // genre ids follow sorted raw order: Action < Adventure < Animation < ...
  CHECK(log.catalog[2].fields[2] == std::vector<std::int64_t>{0, 5});  // Action, Crime

  dir.write("movies.dat", "1::No Year Here::Comedy\n");
  CHECK_THROWS_WITH_AS(load_movielens(dir.path()), doctest::Contains("year"),
                       DataError);
}

TEST_CASE("record split is 8:1:1, disjoint and seed-deterministic") {
  InteractionLog log = make_log(50, 10, 5);
  Rng rng(4);
  for (int i = 0; i < 200; ++i)
    log.records.push_back({static_cast<std::int64_t>(rng.uniform_index(10)),
                           static_cast<std::int64_t>(rng.uniform_index(50)),
                           static_cast<int>(rng.uniform_index(2)),
                           i});

  Split s = split_records(log, 77);
  CHECK(s.train.size() == 160);
  CHECK(s.val.size() == 20);
  CHECK(s.test.size() == 20);

  auto key = [](const Interaction& r) {
    return std::tuple(r.query, r.item, r.label, r.timestamp);
  };
  std::multiset<std::tuple<std::int64_t, std::int64_t, int, std::int64_t>> all;
  for (const auto& r : s.train) all.insert(key(r));
  for (const auto& r : s.val) all.insert(key(r));
  for (const auto& r : s.test) all.insert(key(r));
  std::multiset<std::tuple<std::int64_t, std::int64_t, int, std::int64_t>> orig;
  for (const auto& r : log.records) orig.insert(key(r));
  CHECK(all == orig);

  Split s2 = split_records(log, 77);
  CHECK(s2.train.size() == s.train.size());
  for (std::size_t i = 0; i < s.train.size(); ++i)
    CHECK(key(s.train[i]) == key(s2.train[i]));

  Split s3 = split_records(log, 78);
  bool differs = false;
  for (std::size_t i = 0; i < s.train.size(); ++i)
    if (key(s.train[i]) != key(s3.train[i])) differs = true;
  CHECK(differs);

  CHECK_THROWS_AS(split_records(log, 1, 0, 1, 1), ConfigError);
}

TEST_CASE("display frequency marks the top fifth of displayed items hot") {
  // items 0..9 displayed with descending counts; item 10 never displayed
  std::vector<Interaction> train;
  for (std::int64_t i = 0; i < 10; ++i)
    for (std::int64_t c = 0; c < 10 - i; ++c) train.push_back({0, i, 1, 0});
  DisplayFrequencyIndex idx = build_display_frequency(train, 11);

  CHECK(idx.counts[0] == 10);
  CHECK(idx.counts[9] == 1);
  CHECK(idx.counts[10] == 0);
  // ceil(0.2 * 10) = 2 hot items: the two most displayed
  CHECK(idx.is_hot(0));
  CHECK(idx.is_hot(1));
  for (std::int64_t i = 2; i < 11; ++i) CHECK_FALSE(idx.is_hot(i));

  // ties break toward the smaller id
  std::vector<Interaction> tied;
  for (std::int64_t i = 0; i < 5; ++i) tied.push_back({0, i, 1, 0});
  DisplayFrequencyIndex t = build_display_frequency(tied, 5);  // ceil(1) = 1
  CHECK(t.is_hot(0));
  for (std::int64_t i = 1; i < 5; ++i) CHECK_FALSE(t.is_hot(i));

  CHECK_THROWS_AS(build_display_frequency({}, 5), DataError);
}

TEST_CASE("target sampling avoids displayed items and prefers shared attributes") {
  InteractionLog log = make_log(40, 2, 4);  // genres cycle 0..3
  SimilarityIndex sim(log);
  Rng rng(5);

  std::vector<std::int64_t> displayed = {0, 4, 8};  // all genre 0
  for (int trial = 0; trial < 50; ++trial) {
    auto targets = sim.sample_targets(displayed, 5, rng);
    CHECK(targets.size() == 5);
    std::set<std::int64_t> uniq(targets.begin(), targets.end());
    CHECK(uniq.size() == 5);  // no replacement
    for (std::int64_t t : targets) {
      CHECK(std::find(displayed.begin(), displayed.end(), t) == displayed.end());
      // genre-0 pool has 10 items, 3 displayed, 7 free >= 5: all shared
      CHECK(log.catalog[static_cast<std::size_t>(t)].fields[0][0] == 0);
    }
  }
}

TEST_CASE("target sampling pads from the whole catalog when the pool is short") {
  InteractionLog log = make_log(12, 1, 4);  // 3 items per genre
  SimilarityIndex sim(log);
  Rng rng(6);
  std::vector<std::int64_t> displayed = {0, 4};  // genre 0; only item 8 shares it
  auto targets = sim.sample_targets(displayed, 4, rng);
  CHECK(targets.size() == 4);
  CHECK(targets[0] == 8);  // the whole similar pool comes first
  for (std::int64_t t : targets)
    CHECK(std::find(displayed.begin(), displayed.end(), t) == displayed.end());

  // catalog too small to supply the request
  InteractionLog tiny = make_log(4, 1, 2);
  SimilarityIndex tsim(tiny);
  CHECK_THROWS_AS(tsim.sample_targets({0, 1}, 3, rng), DataError);
}

TEST_CASE("epochs share source groups but resample targets") {
  InteractionLog log = make_log(60, 4, 4);
  Rng rng(9);
  std::vector<Interaction> train;
  for (std::int64_t q = 0; q < 4; ++q)
    for (int i = 0; i < 7; ++i)  // 7 records per query, n=3 -> 3 groups
      train.push_back({q, static_cast<std::int64_t>(rng.uniform_index(60)),
                       static_cast<int>(rng.uniform_index(2)), 0});
  SimilarityIndex sim(log);

  auto e1 = make_epoch(log, train, sim, 3, 42, 1);
  auto e2 = make_epoch(log, train, sim, 3, 42, 2);
  auto e1b = make_epoch(log, train, sim, 3, 42, 1);

  REQUIRE(e1.size() == 4 * 3);
  for (const TrainingExample& ex : e1) {
    CHECK(ex.source_items.size() == 3);  // short last group is padded
    CHECK(ex.source_labels.size() == 3);
    CHECK(ex.target_items.size() == 3);
  }

  REQUIRE(e1.size() == e2.size());
  bool targets_differ = false;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    CHECK(e1[i].query == e2[i].query);
    CHECK(e1[i].source_items == e2[i].source_items);  // grouping pinned by seed
    CHECK(e1[i].source_labels == e2[i].source_labels);
    if (e1[i].target_items != e2[i].target_items) targets_differ = true;
    // same (seed, epoch) reproduces everything
    CHECK(e1[i].source_items == e1b[i].source_items);
    CHECK(e1[i].target_items == e1b[i].target_items);
  }
  CHECK(targets_differ);

  // targets never collide with the query's displayed items
  for (const TrainingExample& ex : e1)
    for (std::int64_t t : ex.target_items)
      for (const Interaction& r : train)
        if (r.query == ex.query) CHECK(t != r.item);

  CHECK_THROWS_AS(make_epoch(log, train, sim, 0, 1, 1), ConfigError);
}

TEST_CASE("cold-start split removes picked items from training") {
  Rng rng(3);
  std::vector<Interaction> test, train;
  for (int i = 0; i < 50; ++i)
    test.push_back({static_cast<std::int64_t>(i % 5),
                    static_cast<std::int64_t>(rng.uniform_index(30)), 1, i});
  for (int i = 0; i < 200; ++i)
    train.push_back({static_cast<std::int64_t>(i % 5),
                     static_cast<std::int64_t>(rng.uniform_index(30)), 1, i});

  ColdStartSplit cs = cold_start_split(test, train, 11);
  CHECK(cs.cold_test.size() == 10);  // 20% of 50

  std::set<std::int64_t> cold_items;
  for (const Interaction& r : cs.cold_test) cold_items.insert(r.item);
  for (const Interaction& r : cs.reduced_train)
    CHECK(cold_items.count(r.item) == 0);
  CHECK(cs.reduced_train.size() < train.size());

  // deterministic in the seed
  ColdStartSplit cs2 = cold_start_split(test, train, 11);
  CHECK(cs2.cold_test.size() == cs.cold_test.size());
  for (std::size_t i = 0; i < cs.cold_test.size(); ++i)
    CHECK(cs.cold_test[i].item == cs2.cold_test[i].item);
}
