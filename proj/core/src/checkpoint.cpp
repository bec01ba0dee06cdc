#include "esam/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace esam {

namespace {

constexpr char kMagic[8] = {'E', 'S', 'A', 'M', 'C', 'K', 'P', '1'};

using json = nlohmann::json;

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw IoError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_tensor(std::ostream& os, const Tensor& t) {
  write_u64(os, t.rows());
  write_u64(os, t.cols());
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& is) {
  std::uint64_t rows = read_u64(is);
  std::uint64_t cols = read_u64(is);
  Tensor t(rows, cols);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!is) throw IoError("checkpoint: truncated tensor data");
  return t;
}

json tower_to_json(const TowerConfig& c) {
  return json{{"query_field_vocab", c.query_field_vocab},
              {"item_field_vocab", c.item_field_vocab},
              {"num_items", c.num_items},
              {"keyword_vocab", c.keyword_vocab},
              {"embed_dim", c.embed_dim},
              {"hidden", c.hidden},
              {"normalize_output", c.normalize_output}};
}

TowerConfig tower_from_json(const json& j) {
  TowerConfig c;
  c.query_field_vocab = j.at("query_field_vocab").get<std::vector<std::size_t>>();
  c.item_field_vocab = j.at("item_field_vocab").get<std::vector<std::size_t>>();
  c.num_items = j.at("num_items").get<std::size_t>();
  c.keyword_vocab = j.at("keyword_vocab").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.normalize_output = j.value("normalize_output", false);
  return c;
}

json loss_to_json(const LossConfig& c) {
  return json{{"lambda1", c.lambda1}, {"lambda2", c.lambda2},
              {"lambda3", c.lambda3}, {"m1", c.m1},
              {"m2", c.m2},           {"p1", c.p1},
              {"p2", c.p2},           {"num_classes", c.num_classes},
              {"detach_centers", c.detach_centers}};
}

LossConfig loss_from_json(const json& j) {
  LossConfig c;
  c.lambda1 = j.at("lambda1").get<double>();
  c.lambda2 = j.at("lambda2").get<double>();
  c.lambda3 = j.at("lambda3").get<double>();
  c.m1 = j.at("m1").get<double>();
  c.m2 = j.at("m2").get<double>();
  c.p1 = j.at("p1").get<double>();
  c.p2 = j.at("p2").get<double>();
  c.num_classes = j.at("num_classes").get<int>();
  c.detach_centers = j.at("detach_centers").get<bool>();
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os.write(kMagic, sizeof(kMagic));

  json header{{"tower", tower_to_json(ckpt.tower)},
              {"scoring", ckpt.scoring == ScoringKind::kDotSigmoid ? "dot_sigmoid"
                                                                   : "cosine"},
              {"loss", loss_to_json(ckpt.loss)},
              {"has_adam", ckpt.adam.has_value()}};
  if (ckpt.adam) {
    const AdamConfig& a = ckpt.adam->config();
    header["adam"] = json{{"lr", a.lr},   {"beta1", a.beta1},
                          {"beta2", a.beta2}, {"eps", a.eps},
                          {"grad_clip", a.grad_clip},
                          {"t", ckpt.adam->step_count()}};
  }
  std::string hs = header.dump();
  write_u64(os, hs.size());
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));

  auto tensors = ckpt.params.all();
  write_u64(os, tensors.size());
  for (const Tensor* t : tensors) write_tensor(os, *t);
  if (ckpt.adam) {
    write_u64(os, ckpt.adam->first_moments().size());
    for (const Tensor& t : ckpt.adam->first_moments()) write_tensor(os, t);
    for (const Tensor& t : ckpt.adam->second_moments()) write_tensor(os, t);
  }
  if (!os) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("checkpoint: bad magic in " + path +
                  " (wrong file or incompatible version)");
  std::uint64_t hlen = read_u64(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw IoError("checkpoint: truncated header");
  json header = json::parse(hs);

  Checkpoint ckpt;
  ckpt.tower = tower_from_json(header.at("tower"));
  ckpt.scoring = header.at("scoring").get<std::string>() == "cosine"
                     ? ScoringKind::kCosine
                     : ScoringKind::kDotSigmoid;
  ckpt.loss = loss_from_json(header.at("loss"));

  // rebuild the parameter structure, then overwrite arrays in all() order
  ckpt.params = init_params(ckpt.tower, 0);
  auto tensors = ckpt.params.all();
  std::uint64_t count = read_u64(is);
  if (count != tensors.size())
    throw IoError("checkpoint: expected " + std::to_string(tensors.size()) +
                  " tensors, file has " + std::to_string(count));
  for (Tensor* t : tensors) {
    Tensor loaded = read_tensor(is);
    if (!loaded.same_shape(*t))
      throw IoError("checkpoint: tensor shape mismatch against config");
    *t = std::move(loaded);
  }
  if (header.at("has_adam").get<bool>()) {
    const json& a = header.at("adam");
    AdamConfig ac;
    ac.lr = a.at("lr").get<double>();
    ac.beta1 = a.at("beta1").get<double>();
    ac.beta2 = a.at("beta2").get<double>();
    ac.eps = a.at("eps").get<double>();
    ac.grad_clip = a.at("grad_clip").get<double>();
    AdamOptimizer opt(ac);
    std::uint64_t n = read_u64(is);
    std::vector<Tensor> m, v;
    for (std::uint64_t i = 0; i < n; ++i) m.push_back(read_tensor(is));
    for (std::uint64_t i = 0; i < n; ++i) v.push_back(read_tensor(is));
    opt.restore(a.at("t").get<std::int64_t>(), std::move(m), std::move(v));
    ckpt.adam = std::move(opt);
  }
  return ckpt;
}

}  // namespace esam
