#include <cmath>

#include "doctest.h"
#include "esam/losses.hpp"
#include "test_util.hpp"

using namespace esam;
using test::GradCheck;
using test::random_tensor;

namespace {

// reference cross entropy on plain doubles
double ce_ref(const std::vector<double>& s, const std::vector<int>& y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double p = std::min(std::max(s[i], kProbEps), 1.0 - kProbEps);
    acc += y[i] ? std::log(p) : std::log(1.0 - p);
  }
  return -acc / static_cast<double>(s.size());
}

// pairwise double-sum form of the squared Gram distance:
// ||A^T A - B^T B||_F^2 = sum_ij (a_i.a_j)^2 - 2 sum_ij (a_i.b_j)^2
//                         + sum_ij (b_i.b_j)^2, over rows
double gram_distance_ref(const Tensor& a, const Tensor& b) {
  auto dot = [](const Tensor& x, std::size_t i, const Tensor& y, std::size_t j) {
    double s = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) s += x.at(i, c) * y.at(j, c);
    return s;
  };
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.rows(); ++j) {
      double daa = dot(a, i, a, j);
      double dbb = dot(b, i, b, j);
      double dab = dot(a, i, b, j);
      acc += daa * daa + dbb * dbb - 2.0 * dab * dab;
    }
  double L = static_cast<double>(a.cols());
  return acc / (L * L);
}

}  // namespace

TEST_CASE("loss config validation") {
  LossConfig ok;
  ok.validate();

  LossConfig bad = ok;
  bad.lambda2 = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ok;
  bad.m1 = 0.8;  // must stay below m2
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ok;
  bad.p1 = 0.9;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ok;
  bad.num_classes = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("pointwise cross entropy matches the scalar reference") {
  Graph g;
  std::vector<double> s = {0.9, 0.2, 0.5, 0.7};
  std::vector<int> y = {1, 0, 1, 0};
  auto node = loss_pointwise_ce(g, g.leaf(Tensor::row(s)), y);
  CHECK(g.scalar(node) == doctest::Approx(ce_ref(s, y)).epsilon(1e-12));
}

TEST_CASE("cross entropy stays finite at saturated scores") {
  Graph g;
  auto node = loss_pointwise_ce(g, g.leaf(Tensor::row({0.0, 1.0})), {0, 1});
  CHECK(std::isfinite(g.scalar(node)));
  CHECK(g.scalar(node) == doctest::Approx(-std::log(1.0 - kProbEps)).epsilon(1e-9));
}

TEST_CASE("cross entropy rejects shape mismatches") {
  Graph g;
  CHECK_THROWS_AS(loss_pointwise_ce(g, g.leaf(Tensor::row({0.5})), {1, 0}),
                  DimensionError);
  CHECK_THROWS_AS(loss_pointwise_ce(g, g.leaf(Tensor(2, 2, 0.5)), {1, 0, 1, 0}),
                  DimensionError);
}

TEST_CASE("gram alignment loss equals the pairwise double sum") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 1 + rng.uniform_index(6);
    std::size_t L = 1 + rng.uniform_index(8);
    Tensor a = random_tensor(n, L, rng);
    Tensor b = random_tensor(n, L, rng);
    Graph g;
    double got = g.scalar(loss_a2c(g, g.leaf(a), g.leaf(b)));
    CHECK(got == doctest::Approx(gram_distance_ref(a, b)).epsilon(1e-10));
  }
}

TEST_CASE("gram alignment loss properties") {
  Rng rng(8);
  Tensor a = random_tensor(5, 4, rng);
  Tensor b = random_tensor(5, 4, rng);

  Graph g;
  CHECK(g.scalar(loss_a2c(g, g.leaf(a), g.leaf(a))) == 0.0);
  CHECK(g.scalar(loss_a2c(g, g.leaf(a), g.leaf(b))) >= 0.0);

  // invariant under independent row permutations of either side
  Tensor ap(5, 4), bp(5, 4);
  std::vector<std::size_t> perm = {4, 2, 0, 3, 1};
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      ap.at(r, c) = a.at(perm[r], c);
      bp.at(r, c) = b.at(perm[4 - r], c);
    }
  Graph g2;
  double base = g2.scalar(loss_a2c(g2, g2.leaf(a), g2.leaf(b)));
  Graph g3;
  double permuted = g3.scalar(loss_a2c(g3, g3.leaf(ap), g3.leaf(bp)));
  CHECK(permuted == doctest::Approx(base).epsilon(1e-12));

  Graph g4;
  CHECK_THROWS_AS(loss_a2c(g4, g4.leaf(Tensor(3, 4)), g4.leaf(Tensor(4, 4))),
                  DimensionError);
}

TEST_CASE("center clustering on a worked two-class example") {
  LossConfig cfg;
  cfg.m1 = 0.2;
  cfg.m2 = 0.7;

  // two tight clusters on orthogonal axes: normalized rows collapse to the
  // axis unit vectors, so intra distances are 0 and the center gap is 2
  Graph g;
  Tensor feats = Tensor::from_rows({{2.0, 0.0}, {5.0, 0.0}, {0.0, 1.0}, {0.0, 3.0}});
  auto node = loss_center_clustering(g, g.leaf(feats), {0, 0, 1, 1}, cfg);
  // intra: all max(0, 0 - 0.2) = 0; inter: max(0, 0.7 - 2) = 0
  CHECK(g.scalar(node) == 0.0);

  // identical centers: inter hinge is active at full margin m2
  Graph g2;
  Tensor same = Tensor::from_rows({{1.0, 0.0}, {3.0, 0.0}});
  auto node2 = loss_center_clustering(g2, g2.leaf(same), {0, 1}, cfg);
  CHECK(g2.scalar(node2) == doctest::Approx(cfg.m2));
}

TEST_CASE("center clustering intra term matches hand arithmetic") {
  LossConfig cfg;
  cfg.m1 = 0.0;
  cfg.m2 = 10.0;  // inter hinge saturates at m2 - |c0 - c1|^2
  Graph g;
  // one class: rows (1,0) and (0,1) normalize to themselves, center (0.5,0.5)
  Tensor feats = Tensor::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  auto node = loss_center_clustering(g, g.leaf(feats), {0, 0}, cfg);
  // each row is at squared distance 0.5 from the center
  CHECK(g.scalar(node) == doctest::Approx(1.0));
}

TEST_CASE("center clustering rejects bad labels") {
  LossConfig cfg;
  Graph g;
  auto feats = g.leaf(Tensor::from_rows({{1.0, 0.0}}));
  CHECK_THROWS_AS(loss_center_clustering(g, feats, {2}, cfg), DimensionError);
  CHECK_THROWS_AS(loss_center_clustering(g, feats, {-1}, cfg), DimensionError);
  CHECK_THROWS_AS(loss_center_clustering(g, feats, {0, 1}, cfg), DimensionError);
}

TEST_CASE("detached centers keep the forward value") {
  LossConfig cfg;
  Rng rng(5);
  Tensor feats = random_tensor(6, 3, rng);
  for (std::size_t r = 0; r < 6; ++r) feats.at(r, 0) += 2.0;
  std::vector<int> labels = {0, 1, 0, 1, 1, 0};

  Graph g;
  double with_grad = g.scalar(loss_center_clustering(g, g.leaf(feats), labels, cfg));
  LossConfig detached = cfg;
  detached.detach_centers = true;
  Graph g2;
  double no_grad = g2.scalar(loss_center_clustering(g2, g2.leaf(feats), labels, detached));
  CHECK(with_grad == doctest::Approx(no_grad).epsilon(1e-14));
}

TEST_CASE("self-training loss gates on confidence") {
  LossConfig cfg;  // p1 = 0.2, p2 = 0.8

  SUBCASE("everything inside the band gives exactly zero") {
    Graph g;
    auto node = loss_self_training(g, g.leaf(Tensor::row({0.3, 0.5, 0.79})), cfg);
    CHECK(g.scalar(node) == 0.0);
  }
  SUBCASE("only confident scores contribute") {
    Graph g;
    std::vector<double> s = {0.1, 0.5, 0.9};
    auto node = loss_self_training(g, g.leaf(Tensor::row(s)), cfg);
    double expect = -(s[0] * std::log(s[0]) + s[2] * std::log(s[2])) / 2.0;
    CHECK(g.scalar(node) == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("band edges are not selected") {
    Graph g;
    auto node = loss_self_training(g, g.leaf(Tensor::row({0.2, 0.8})), cfg);
    CHECK(g.scalar(node) == 0.0);
  }
  SUBCASE("no gradient reaches unselected entries") {
    Graph g;
    auto probs = g.leaf(Tensor::row({0.1, 0.5, 0.9}), true);
    g.backward(loss_self_training(g, probs, cfg));
    const Tensor& grad = g.grad(probs);
    CHECK(grad.at(0, 1) == 0.0);
    CHECK(grad.at(0, 0) != 0.0);
    CHECK(grad.at(0, 2) != 0.0);
  }
}

TEST_CASE("total loss is the weighted component sum") {
  LossConfig cfg;
  cfg.lambda1 = 0.7;
  cfg.lambda2 = 0.3;
  cfg.lambda3 = 0.5;
  Graph g;
  auto c = [&](double v) { return g.leaf(Tensor(1, 1, v)); };
  auto total = loss_total(g, c(1.0), c(2.0), c(3.0), c(4.0), cfg);
  CHECK(g.scalar(total) == doctest::Approx(1.0 + 0.7 * 2 + 0.3 * 3 + 0.5 * 4));

  auto nan = g.leaf(Tensor(1, 1, std::nan("")));
  CHECK_THROWS_WITH_AS(loss_total(g, c(1.0), nan, c(0.0), c(0.0), cfg),
                       doctest::Contains("L_DA"), NumericError);
}

TEST_CASE("finite differences confirm loss gradients") {
  GradCheck fd;
  Rng rng(31);
  LossConfig cfg;

  SUBCASE("cross entropy") {
    for (int trial = 0; trial < 10; ++trial) {
      Tensor s = random_tensor(1, 6, rng, 0.05, 0.95);
      std::vector<int> y;
      for (std::size_t i = 0; i < 6; ++i)
        y.push_back(static_cast<int>(rng.uniform_index(2)));
      double worst = fd.run({s}, [&](Graph& g, std::vector<Graph::NodeId>& in) {
        return loss_pointwise_ce(g, in[0], y);
      });
      CHECK(worst < fd.tol);
    }
  }
  SUBCASE("gram alignment") {
    for (int trial = 0; trial < 10; ++trial) {
      double worst = fd.run(
          {random_tensor(4, 3, rng), random_tensor(4, 3, rng)},
          [](Graph& g, std::vector<Graph::NodeId>& in) {
            return loss_a2c(g, in[0], in[1]);
          });
      CHECK(worst < fd.tol);
    }
  }
  SUBCASE("center clustering") {
    std::vector<int> labels = {0, 1, 1, 0, 1};
    for (int trial = 0; trial < 10; ++trial) {
      Tensor feats = random_tensor(5, 3, rng);
      for (std::size_t r = 0; r < 5; ++r) feats.at(r, 1) += 2.0;
      double worst = fd.run({feats}, [&](Graph& g, std::vector<Graph::NodeId>& in) {
        return loss_center_clustering(g, in[0], labels, cfg);
      });
      CHECK(worst < 1e-4);  // hinge kinks make the comparison a bit looser
    }
  }
  SUBCASE("self training away from the gate") {
    for (int trial = 0; trial < 10; ++trial) {
      Tensor s(1, 5);
      for (double& v : s.values())
        v = rng.uniform_index(2) ? rng.uniform(0.02, 0.18) : rng.uniform(0.82, 0.98);
      double worst = fd.run({s}, [&](Graph& g, std::vector<Graph::NodeId>& in) {
        return loss_self_training(g, in[0], cfg);
      });
      CHECK(worst < fd.tol);
    }
  }
}
