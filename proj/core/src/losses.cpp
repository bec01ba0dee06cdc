#include "esam/losses.hpp"

#include <cmath>
#include <map>
#include <string>

namespace esam {

void LossConfig::validate() const {
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0)
    throw ConfigError("LossConfig: lambdas must be non-negative");
  if (!(m1 >= 0 && m2 >= 0 && m1 < m2))
    throw ConfigError("LossConfig: need 0 <= m1 < m2");
  if (!(p1 > 0 && p2 < 1 && p1 < p2))
    throw ConfigError("LossConfig: need 0 < p1 < p2 < 1");
  if (num_classes < 2) throw ConfigError("LossConfig: num_classes must be >= 2");
}

Graph::NodeId loss_pointwise_ce(Graph& g, Graph::NodeId scores,
                                const std::vector<int>& labels) {
  const Tensor& s = g.value(scores);
  if (s.rows() != 1 || s.cols() != labels.size() || labels.empty())
    throw DimensionError("loss_pointwise_ce: scores 1x" + std::to_string(s.cols()) +
                         " vs " + std::to_string(labels.size()) + " labels");
  Tensor y(1, labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    y.values()[i] = labels[i] ? 1.0 : 0.0;
  Graph::NodeId yn = g.leaf(std::move(y));
  Graph::NodeId yn_inv = g.scalar_affine(yn, -1.0, 1.0);
  Graph::NodeId sc = g.clamp(scores, kProbEps, 1.0 - kProbEps);
  Graph::NodeId sc_inv = g.scalar_affine(sc, -1.0, 1.0);
  Graph::NodeId term = g.add(g.mul(yn, g.log(sc)), g.mul(yn_inv, g.log(sc_inv)));
  return g.scalar_affine(g.mean(term), -1.0, 0.0);
}

Graph::NodeId loss_a2c(Graph& g, Graph::NodeId source_feats,
                       Graph::NodeId target_feats) {
  const Tensor& ds = g.value(source_feats);
  const Tensor& dt = g.value(target_feats);
  if (!ds.same_shape(dt))
    throw DimensionError("loss_a2c: shapes differ, " + std::to_string(ds.rows()) +
                         "x" + std::to_string(ds.cols()) + " vs " +
                         std::to_string(dt.rows()) + "x" + std::to_string(dt.cols()));
  double L = static_cast<double>(ds.cols());
  Graph::NodeId gram_s = g.matmul(g.transpose(source_feats), source_feats);
  Graph::NodeId gram_t = g.matmul(g.transpose(target_feats), target_feats);
  Graph::NodeId fro = g.frobenius_sq(g.sub(gram_s, gram_t));
  return g.scalar_affine(fro, 1.0 / (L * L), 0.0);
}

Graph::NodeId loss_center_clustering(Graph& g, Graph::NodeId source_feats,
                                     const std::vector<int>& labels,
                                     const LossConfig& cfg) {
  const Tensor& ds = g.value(source_feats);
  if (ds.rows() == 0 || ds.rows() != labels.size())
    throw DimensionError("loss_center_clustering: " + std::to_string(ds.rows()) +
                         " rows vs " + std::to_string(labels.size()) + " labels");
  std::map<int, std::vector<std::int64_t>> members;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 0 || labels[j] >= cfg.num_classes)
      throw DimensionError("loss_center_clustering: label " +
                           std::to_string(labels[j]) + " outside [0, " +
                           std::to_string(cfg.num_classes) + ")");
    members[labels[j]].push_back(static_cast<std::int64_t>(j));
  }

  Graph::NodeId normed = g.l2_normalize_rows(source_feats);
  Graph::NodeId center_src =
      cfg.detach_centers ? g.leaf(g.value(normed)) : normed;

  std::map<int, Graph::NodeId> centers;
  for (const auto& [cls, idx] : members)
    centers[cls] = g.mean_rows(g.gather_rows(center_src, idx));

  Graph::NodeId total = g.leaf(Tensor(1, 1, 0.0));
  // intra: pull each sample toward its class center
  for (std::size_t j = 0; j < labels.size(); ++j) {
    Graph::NodeId diff = g.sub(
        g.gather_rows(normed, {static_cast<std::int64_t>(j)}), centers[labels[j]]);
    Graph::NodeId d2 = g.sum(g.square(diff));
    total = g.add(total, g.hinge(g.scalar_affine(d2, 1.0, -cfg.m1)));
  }
  // inter: push distinct class centers apart
  for (auto it = centers.begin(); it != centers.end(); ++it)
    for (auto jt = std::next(it); jt != centers.end(); ++jt) {
      Graph::NodeId d2 = g.sum(g.square(g.sub(it->second, jt->second)));
      total = g.add(total, g.hinge(g.scalar_affine(d2, -1.0, cfg.m2)));
    }
  return total;
}

Graph::NodeId loss_self_training(Graph& g, Graph::NodeId target_probs,
                                 const LossConfig& cfg) {
  const Tensor& s = g.value(target_probs);
  if (s.rows() != 1)
    throw DimensionError("loss_self_training: probs must be a row vector");
  // hard gate over current values; no gradient through the indicator
  std::vector<std::int64_t> selected;
  for (std::size_t j = 0; j < s.cols(); ++j) {
    double p = s.values()[j];
    if (p < cfg.p1 || p > cfg.p2) selected.push_back(static_cast<std::int64_t>(j));
  }
  if (selected.empty()) return g.leaf(Tensor(1, 1, 0.0));
  double m = static_cast<double>(selected.size());
  Graph::NodeId col = g.gather_rows(g.transpose(target_probs), selected);
  Graph::NodeId ent = g.mul(col, g.log(g.clamp(col, kProbEps, 1.0 - kProbEps)));
  return g.scalar_affine(g.sum(ent), -1.0 / m, 0.0);
}

Graph::NodeId loss_total(Graph& g, Graph::NodeId ls, Graph::NodeId lda,
                         Graph::NodeId ldc_center, Graph::NodeId ldc_pseudo,
                         const LossConfig& cfg) {
  auto check = [&](Graph::NodeId id, const char* name) {
    if (!std::isfinite(g.scalar(id)))
      throw NumericError(std::string("loss_total: non-finite component ") + name);
  };
  check(ls, "L_s");
  check(lda, "L_DA");
  check(ldc_center, "L_DCc");
  check(ldc_pseudo, "L_DCp");
  Graph::NodeId out = ls;
  out = g.add(out, g.scalar_affine(lda, cfg.lambda1, 0.0));
  out = g.add(out, g.scalar_affine(ldc_center, cfg.lambda2, 0.0));
  out = g.add(out, g.scalar_affine(ldc_pseudo, cfg.lambda3, 0.0));
  return out;
}

}  // namespace esam
