#include "esam/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace esam {

namespace {

std::vector<std::string> split(const std::string& line, const std::string& delim) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = line.find(delim, pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + delim.size();
  }
}

std::int64_t parse_int(const std::string& s, const std::string& file, int lineno) {
  try {
    std::size_t used = 0;
    std::int64_t v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(file + ":" + std::to_string(lineno) + ": bad integer '" + s + "'");
  }
}

// raw value -> dense id, assigned in sorted raw order
template <typename K>
std::map<K, std::int64_t> densify(const std::set<K>& values) {
  std::map<K, std::int64_t> out;
  std::int64_t next = 0;
  for (const K& v : values) out[v] = next++;
  return out;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  return f;
}

void fill_behavior_from_records(InteractionLog& log) {
  for (const Interaction& r : log.records)
    log.queries[static_cast<std::size_t>(r.query)].behavior.push_back(r.item);
}

}  // namespace

InteractionLog load_movielens(const std::string& dir) {
  // users.dat: UserID::Gender::Age::Occupation::Zip-code
  std::set<std::int64_t> user_ids, ages, occupations;
  std::set<std::string> genders;
  struct RawUser {
    std::string gender;
    std::int64_t age, occupation;
  };
  std::unordered_map<std::int64_t, RawUser> users;
  {
    auto f = open_or_throw(dir + "/users.dat");
    std::string line;
    int ln = 0;
    while (std::getline(f, line)) {
      ++ln;
      if (line.empty()) continue;
      auto parts = split(line, "::");
      if (parts.size() < 5)
        throw DataError(dir + "/users.dat:" + std::to_string(ln) + ": want 5 fields, got " +
                        std::to_string(parts.size()));
      std::int64_t uid = parse_int(parts[0], "users.dat", ln);
      RawUser u{parts[1], parse_int(parts[2], "users.dat", ln),
                parse_int(parts[3], "users.dat", ln)};
      user_ids.insert(uid);
      genders.insert(u.gender);
      ages.insert(u.age);
      occupations.insert(u.occupation);
      users[uid] = std::move(u);
    }
  }

  // movies.dat: MovieID::Title (Year)::Genre|Genre|...
  std::set<std::int64_t> movie_ids, years;
  std::set<std::string> genres;
  struct RawMovie {
    std::int64_t year;
    std::vector<std::string> genres;
  };
  std::unordered_map<std::int64_t, RawMovie> movies;
  {
    auto f = open_or_throw(dir + "/movies.dat");
    std::string line;
    int ln = 0;
    while (std::getline(f, line)) {
      ++ln;
      if (line.empty()) continue;
      auto parts = split(line, "::");
      if (parts.size() != 3)
        throw DataError(dir + "/movies.dat:" + std::to_string(ln) + ": want 3 fields, got " +
                        std::to_string(parts.size()));
      std::int64_t mid = parse_int(parts[0], "movies.dat", ln);
      const std::string& title = parts[1];
      std::size_t close = title.rfind(')');
      std::size_t open = title.rfind('(');
      if (open == std::string::npos || close == std::string::npos || close < open + 2)
        throw DataError(dir + "/movies.dat:" + std::to_string(ln) +
                        ": no (year) in title '" + title + "'");
      std::int64_t year = parse_int(title.substr(open + 1, close - open - 1),
                                    "movies.dat", ln);
      RawMovie m{year, split(parts[2], "|")};
      if (m.genres.empty() || m.genres[0].empty())
        throw DataError(dir + "/movies.dat:" + std::to_string(ln) + ": empty genre list");
      movie_ids.insert(mid);
      years.insert(year);
      for (const auto& gname : m.genres) genres.insert(gname);
      movies[mid] = std::move(m);
    }
  }

  auto user_map = densify(user_ids);
  auto gender_map = densify(genders);
  auto age_map = densify(ages);
  auto occ_map = densify(occupations);
  auto movie_map = densify(movie_ids);
  auto year_map = densify(years);
  auto genre_map = densify(genres);

  InteractionLog log;
  log.query_field_vocab = {user_map.size(), age_map.size(), gender_map.size(),
                           occ_map.size()};
  log.item_field_vocab = {movie_map.size(), year_map.size(), genre_map.size()};
  log.similarity_field = 2;  // genres

  log.queries.resize(user_map.size());
  for (const auto& [uid, dense] : user_map) {
    const RawUser& u = users[uid];
    log.queries[static_cast<std::size_t>(dense)].profile = {
        dense, age_map[u.age], gender_map[u.gender], occ_map[u.occupation]};
  }
  log.catalog.resize(movie_map.size());
  for (const auto& [mid, dense] : movie_map) {
    const RawMovie& m = movies[mid];
    ItemInput item;
    item.fields.resize(3);
    item.fields[0] = {dense};
    item.fields[1] = {year_map[m.year]};
    for (const auto& gname : m.genres)
      item.fields[2].push_back(genre_map[gname]);
    std::sort(item.fields[2].begin(), item.fields[2].end());
    log.catalog[static_cast<std::size_t>(dense)] = std::move(item);
  }

  // ratings.dat: UserID::MovieID::Rating::Timestamp; rating > 3 is a positive
  {
    auto f = open_or_throw(dir + "/ratings.dat");
    std::string line;
    int ln = 0;
    while (std::getline(f, line)) {
      ++ln;
      if (line.empty()) continue;
      auto parts = split(line, "::");
      if (parts.size() != 4)
        throw DataError(dir + "/ratings.dat:" + std::to_string(ln) + ": want 4 fields, got " +
                        std::to_string(parts.size()));
      std::int64_t uid = parse_int(parts[0], "ratings.dat", ln);
      std::int64_t mid = parse_int(parts[1], "ratings.dat", ln);
      std::int64_t rating = parse_int(parts[2], "ratings.dat", ln);
      std::int64_t ts = parse_int(parts[3], "ratings.dat", ln);
      auto uit = user_map.find(uid);
      auto mit = movie_map.find(mid);
      if (uit == user_map.end())
        throw DataError(dir + "/ratings.dat:" + std::to_string(ln) + ": unknown user " +
                        std::to_string(uid));
      if (mit == movie_map.end())
        throw DataError(dir + "/ratings.dat:" + std::to_string(ln) + ": unknown movie " +
                        std::to_string(mid));
      log.records.push_back({uit->second, mit->second, rating > 3 ? 1 : 0, ts});
    }
  }
  fill_behavior_from_records(log);
  return log;
}

InteractionLog load_generic_log(const std::string& dir) {
  // items.tsv: item_id <TAB> field0 <TAB> field1 ...; fields comma-separated
  std::set<std::int64_t> item_ids;
  std::unordered_map<std::int64_t, std::vector<std::vector<std::int64_t>>> raw_items;
  std::size_t n_item_fields = 0;
  {
    auto f = open_or_throw(dir + "/items.tsv");
    std::string line;
    int ln = 0;
    while (std::getline(f, line)) {
      ++ln;
      if (line.empty()) continue;
      auto parts = split(line, "\t");
      if (parts.size() < 2)
        throw DataError(dir + "/items.tsv:" + std::to_string(ln) + ": want >= 2 columns");
      if (n_item_fields == 0)
        n_item_fields = parts.size() - 1;
      else if (parts.size() - 1 != n_item_fields)
        throw DataError(dir + "/items.tsv:" + std::to_string(ln) + ": inconsistent field count");
      std::int64_t iid = parse_int(parts[0], "items.tsv", ln);
      std::vector<std::vector<std::int64_t>> fields;
      for (std::size_t c = 1; c < parts.size(); ++c) {
        std::vector<std::int64_t> vals;
        for (const auto& tok : split(parts[c], ","))
          vals.push_back(parse_int(tok, "items.tsv", ln));
        fields.push_back(std::move(vals));
      }
      item_ids.insert(iid);
      raw_items[iid] = std::move(fields);
    }
  }
  if (item_ids.empty()) throw DataError(dir + "/items.tsv: no items");

  // queries.tsv: query_id <TAB> profile0 <TAB> profile1 ...
  std::set<std::int64_t> query_ids;
  std::unordered_map<std::int64_t, std::vector<std::int64_t>> raw_queries;
  std::size_t n_query_fields = 0;
  {
    auto f = open_or_throw(dir + "/queries.tsv");
    std::string line;
    int ln = 0;
    while (std::getline(f, line)) {
      ++ln;
      if (line.empty()) continue;
      auto parts = split(line, "\t");
      if (n_query_fields == 0)
        n_query_fields = parts.size() - 1;
      else if (parts.size() - 1 != n_query_fields)
        throw DataError(dir + "/queries.tsv:" + std::to_string(ln) + ": inconsistent field count");
      std::int64_t qid = parse_int(parts[0], "queries.tsv", ln);
      std::vector<std::int64_t> profile;
      for (std::size_t c = 1; c < parts.size(); ++c)
        profile.push_back(parse_int(parts[c], "queries.tsv", ln));
      query_ids.insert(qid);
      raw_queries[qid] = std::move(profile);
    }
  }
  if (query_ids.empty()) throw DataError(dir + "/queries.tsv: no queries");

  auto item_map = densify(item_ids);
  auto query_map = densify(query_ids);

  InteractionLog log;
  log.similarity_field = 0;

  // per-field value densification
  std::vector<std::set<std::int64_t>> item_vals(n_item_fields);
  for (const auto& [iid, fields] : raw_items)
    for (std::size_t f = 0; f < n_item_fields; ++f)
      for (std::int64_t v : fields[f]) item_vals[f].insert(v);
  std::vector<std::map<std::int64_t, std::int64_t>> item_val_map;
  for (auto& s : item_vals) item_val_map.push_back(densify(s));

  std::vector<std::set<std::int64_t>> query_vals(n_query_fields);
  for (const auto& [qid, profile] : raw_queries)
    for (std::size_t f = 0; f < n_query_fields; ++f) query_vals[f].insert(profile[f]);
  std::vector<std::map<std::int64_t, std::int64_t>> query_val_map;
  for (auto& s : query_vals) query_val_map.push_back(densify(s));

  for (const auto& m : item_val_map) log.item_field_vocab.push_back(m.size());
  for (const auto& m : query_val_map) log.query_field_vocab.push_back(m.size());

  log.catalog.resize(item_map.size());
  for (const auto& [iid, dense] : item_map) {
    ItemInput item;
    item.fields.resize(n_item_fields);
    for (std::size_t f = 0; f < n_item_fields; ++f) {
      for (std::int64_t v : raw_items[iid][f])
        item.fields[f].push_back(item_val_map[f][v]);
      std::sort(item.fields[f].begin(), item.fields[f].end());
    }
    log.catalog[static_cast<std::size_t>(dense)] = std::move(item);
  }
  log.queries.resize(query_map.size());
  for (const auto& [qid, dense] : query_map) {
    QueryInput q;
    for (std::size_t f = 0; f < n_query_fields; ++f)
      q.profile.push_back(query_val_map[f][raw_queries[qid][f]]);
    log.queries[static_cast<std::size_t>(dense)] = std::move(q);
  }

  // log.tsv: query_id <TAB> item_id <TAB> label [<TAB> timestamp]
  // duplicates per (query, item) keep the latest record
  std::map<std::pair<std::int64_t, std::int64_t>, Interaction> dedup;
  std::int64_t order = 0;
  {
    std::ifstream f(dir + "/log.tsv");
    if (!f) throw IoError("cannot open " + dir + "/log.tsv");
    std::string line;
    int ln = 0;
    while (std::getline(f, line)) {
      ++ln;
      if (line.empty()) continue;
      auto parts = split(line, "\t");
      if (parts.size() != 3 && parts.size() != 4)
        throw DataError(dir + "/log.tsv:" + std::to_string(ln) + ": want 3 or 4 columns, got " +
                        std::to_string(parts.size()));
      std::int64_t qid = parse_int(parts[0], "log.tsv", ln);
      std::int64_t iid = parse_int(parts[1], "log.tsv", ln);
      std::int64_t label = parse_int(parts[2], "log.tsv", ln);
      std::int64_t ts = parts.size() == 4 ? parse_int(parts[3], "log.tsv", ln) : order;
      ++order;
      auto qit = query_map.find(qid);
      auto iit = item_map.find(iid);
      if (qit == query_map.end())
        throw DataError(dir + "/log.tsv:" + std::to_string(ln) + ": unknown query " +
                        std::to_string(qid));
      if (iit == item_map.end())
        throw DataError(dir + "/log.tsv:" + std::to_string(ln) + ": unknown item " +
                        std::to_string(iid));
      Interaction rec{qit->second, iit->second, label != 0 ? 1 : 0, ts};
      auto key = std::make_pair(rec.query, rec.item);
      auto it = dedup.find(key);
      if (it == dedup.end() || it->second.timestamp <= rec.timestamp)
        dedup[key] = rec;
    }
  }
  for (const auto& [key, rec] : dedup) log.records.push_back(rec);
  fill_behavior_from_records(log);
  return log;
}

Split split_records(const InteractionLog& log, std::uint64_t seed, int r_train,
                    int r_val, int r_test) {
  if (r_train <= 0 || r_val <= 0 || r_test <= 0)
    throw ConfigError("split_records: ratios must be positive");
  std::vector<std::size_t> idx(log.records.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  std::size_t n = idx.size();
  std::size_t total = static_cast<std::size_t>(r_train + r_val + r_test);
  std::size_t b1 = n * static_cast<std::size_t>(r_train) / total;
  std::size_t b2 = n * static_cast<std::size_t>(r_train + r_val) / total;
  Split s;
  for (std::size_t i = 0; i < n; ++i) {
    const Interaction& r = log.records[idx[i]];
    if (i < b1)
      s.train.push_back(r);
    else if (i < b2)
      s.val.push_back(r);
    else
      s.test.push_back(r);
  }
  return s;
}

DisplayFrequencyIndex build_display_frequency(
    const std::vector<Interaction>& train, std::size_t num_items) {
  if (train.empty()) throw DataError("build_display_frequency: empty training split");
  DisplayFrequencyIndex idx;
  idx.counts.assign(num_items, 0);
  idx.hot.assign(num_items, false);
  for (const Interaction& r : train) ++idx.counts[static_cast<std::size_t>(r.item)];
  std::vector<std::int64_t> displayed;
  for (std::size_t i = 0; i < num_items; ++i)
    if (idx.counts[i] > 0) displayed.push_back(static_cast<std::int64_t>(i));
  // top ceil(0.2 * m) by count, ties to the smaller item id
  std::size_t hot_n = static_cast<std::size_t>(
      std::ceil(0.2 * static_cast<double>(displayed.size())));
  std::sort(displayed.begin(), displayed.end(),
            [&](std::int64_t a, std::int64_t b) {
              if (idx.counts[a] != idx.counts[b]) return idx.counts[a] > idx.counts[b];
              return a < b;
            });
  for (std::size_t i = 0; i < hot_n && i < displayed.size(); ++i)
    idx.hot[static_cast<std::size_t>(displayed[i])] = true;
  return idx;
}

SimilarityIndex::SimilarityIndex(const InteractionLog& log) : log_(log) {
  by_value_.resize(log.item_field_vocab[log.similarity_field]);
  for (std::size_t i = 0; i < log.catalog.size(); ++i)
    for (std::int64_t v : log.catalog[i].fields[log.similarity_field])
      by_value_[static_cast<std::size_t>(v)].push_back(static_cast<std::int64_t>(i));
}

std::vector<std::int64_t> SimilarityIndex::sample_targets(
    const std::vector<std::int64_t>& displayed, std::size_t n, Rng& rng) const {
  std::size_t num_items = log_.num_items();
  if (num_items < displayed.size() + n)
    throw DataError("sample_targets: catalog of " + std::to_string(num_items) +
                    " items cannot supply " + std::to_string(n) +
                    " non-displayed targets");
  std::vector<char> excluded(num_items, 0);
  for (std::int64_t d : displayed) excluded[static_cast<std::size_t>(d)] = 1;

  // union of items sharing a similarity value with any displayed item
  std::vector<char> seen(num_items, 0);
  std::vector<std::int64_t> pool;
  for (std::int64_t d : displayed)
    for (std::int64_t v : log_.catalog[static_cast<std::size_t>(d)].fields[log_.similarity_field])
      for (std::int64_t cand : by_value_[static_cast<std::size_t>(v)])
        if (!excluded[static_cast<std::size_t>(cand)] && !seen[static_cast<std::size_t>(cand)]) {
          seen[static_cast<std::size_t>(cand)] = 1;
          pool.push_back(cand);
        }
  std::sort(pool.begin(), pool.end());

  std::vector<std::int64_t> out;
  if (pool.size() >= n) {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(pool.size() - i));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }
  // similar pool too small: take it all, pad from uniform non-displayed items
  out = pool;
  std::vector<std::int64_t> rest;
  for (std::size_t i = 0; i < num_items; ++i)
    if (!excluded[i] && !seen[i]) rest.push_back(static_cast<std::int64_t>(i));
  std::size_t need = n - out.size();
  for (std::size_t i = 0; i < need; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(rest.size() - i));
    std::swap(rest[i], rest[j]);
    out.push_back(rest[i]);
  }
  return out;
}

std::vector<TrainingExample> make_epoch(const InteractionLog& log,
                                        const std::vector<Interaction>& train,
                                        const SimilarityIndex& sim,
                                        std::size_t n, std::uint64_t seed,
                                        std::uint64_t epoch) {
  if (n == 0) throw ConfigError("make_epoch: n must be >= 1");
  std::map<std::int64_t, std::vector<const Interaction*>> by_query;
  for (const Interaction& r : train) by_query[r.query].push_back(&r);

  // source grouping depends on seed only so epochs share source composition
  Rng rng_src(Rng::mix(seed, 0x736f7572));
  Rng rng_tgt(Rng::mix(seed, epoch + 1));

  std::vector<TrainingExample> out;
  for (auto& [qid, recs] : by_query) {
    rng_src.shuffle(recs);
    std::vector<std::int64_t> displayed;
    for (const Interaction* r : recs) displayed.push_back(r->item);
    std::size_t n_groups = (recs.size() + n - 1) / n;
    for (std::size_t gi = 0; gi < n_groups; ++gi) {
      TrainingExample ex;
      ex.query = qid;
      for (std::size_t j = gi * n; j < std::min((gi + 1) * n, recs.size()); ++j) {
        ex.source_items.push_back(recs[j]->item);
        ex.source_labels.push_back(recs[j]->label);
      }
      // pad short groups by resampling with replacement among the query's
      // displayed records
      while (ex.source_items.size() < n) {
        const Interaction* r = recs[rng_src.uniform_index(recs.size())];
        ex.source_items.push_back(r->item);
        ex.source_labels.push_back(r->label);
      }
      ex.target_items = sim.sample_targets(displayed, n, rng_tgt);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

ColdStartSplit cold_start_split(const std::vector<Interaction>& test,
                                const std::vector<Interaction>& train,
                                std::uint64_t seed) {
  std::vector<std::size_t> idx(test.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  std::size_t n_cold = static_cast<std::size_t>(
      std::llround(0.2 * static_cast<double>(test.size())));
  ColdStartSplit out;
  std::unordered_set<std::int64_t> cold_items;
  for (std::size_t i = 0; i < n_cold; ++i) {
    out.cold_test.push_back(test[idx[i]]);
    cold_items.insert(test[idx[i]].item);
  }
  for (const Interaction& r : train)
    if (!cold_items.count(r.item)) out.reduced_train.push_back(r);
  return out;
}

}  // namespace esam
