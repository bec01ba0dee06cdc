#include <cmath>

#include "doctest.h"
#include "esam/optim.hpp"
#include "test_util.hpp"

using namespace esam;

TEST_CASE("sgd applies theta -= lr * g elementwise") {
  Tensor p = Tensor::from_rows({{1.0, 2.0}});
  Tensor g = Tensor::from_rows({{0.5, -1.0}});
  std::vector<Tensor*> ps = {&p};
  std::vector<const Tensor*> gs = {&g};
  sgd_step(ps, gs, 0.1);
  CHECK(p.at(0, 0) == doctest::Approx(0.95));
  CHECK(p.at(0, 1) == doctest::Approx(2.1));
}

TEST_CASE("optimizers reject shape mismatches") {
  Tensor p(2, 2), g(2, 3);
  std::vector<Tensor*> ps = {&p};
  std::vector<const Tensor*> gs = {&g};
  CHECK_THROWS_AS(sgd_step(ps, gs, 0.1), DimensionError);
  AdamOptimizer adam(AdamConfig{});
  CHECK_THROWS_AS(adam.step(ps, gs), DimensionError);

  Tensor g2(2, 2);
  std::vector<const Tensor*> gs2 = {&g2, &g2};
  CHECK_THROWS_AS(sgd_step(ps, gs2, 0.1), DimensionError);
}

TEST_CASE("adam first step matches the closed form") {
  AdamConfig cfg;
  cfg.lr = 0.01;
  AdamOptimizer adam(cfg);
  Tensor p = Tensor::from_rows({{1.0, -2.0, 0.5}});
  Tensor g = Tensor::from_rows({{0.3, -0.7, 0.0}});
  std::vector<Tensor*> ps = {&p};
  std::vector<const Tensor*> gs = {&g};
  adam.step(ps, gs);
  CHECK(adam.step_count() == 1);
  // after bias correction the first update is lr * g / (|g| + eps)
  for (std::size_t j = 0; j < 3; ++j) {
    double gj = g.at(0, j);
    double expect = (j == 0 ? 1.0 : j == 1 ? -2.0 : 0.5) -
                    cfg.lr * gj / (std::fabs(gj) + cfg.eps);
    CHECK(p.at(0, j) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("adam converges on a quadratic in a few hundred steps") {
  AdamConfig cfg;
  cfg.lr = 0.05;
  AdamOptimizer adam(cfg);
  Tensor p = Tensor::from_rows({{4.0, -3.0}});
  Tensor target = Tensor::from_rows({{1.0, 2.0}});
  std::vector<Tensor*> ps = {&p};
  for (int step = 0; step < 500; ++step) {
    Tensor g(1, 2);
    for (std::size_t j = 0; j < 2; ++j)
      g.at(0, j) = 2.0 * (p.at(0, j) - target.at(0, j));
    std::vector<const Tensor*> gs = {&g};
    adam.step(ps, gs);
  }
  CHECK(std::fabs(p.at(0, 0) - 1.0) < 1e-3);
  CHECK(std::fabs(p.at(0, 1) - 2.0) < 1e-3);
}

TEST_CASE("sgd converges on the same quadratic") {
  Tensor p = Tensor::from_rows({{4.0, -3.0}});
  std::vector<Tensor*> ps = {&p};
  for (int step = 0; step < 500; ++step) {
    Tensor g(1, 2);
    g.at(0, 0) = 2.0 * (p.at(0, 0) - 1.0);
    g.at(0, 1) = 2.0 * (p.at(0, 1) - 2.0);
    std::vector<const Tensor*> gs = {&g};
    sgd_step(ps, gs, 0.1);
  }
  CHECK(std::fabs(p.at(0, 0) - 1.0) < 1e-6);
  CHECK(std::fabs(p.at(0, 1) - 2.0) < 1e-6);
}

TEST_CASE("global norm clipping rescales large gradients") {
  AdamConfig with_clip;
  with_clip.grad_clip = 1.0;
  AdamConfig scaled;  // no clipping, but fed the pre-scaled gradient
  AdamOptimizer a(with_clip), b(scaled);

  Tensor pa = Tensor::from_rows({{0.0, 0.0}});
  Tensor pb = pa;
  Tensor g = Tensor::from_rows({{3.0, 4.0}});  // norm 5 -> scale 1/5
  Tensor gs = Tensor::from_rows({{0.6, 0.8}});

  std::vector<Tensor*> pas = {&pa}, pbs = {&pb};
  std::vector<const Tensor*> ga = {&g}, gb = {&gs};
  a.step(pas, ga);
  b.step(pbs, gb);
  CHECK(pa.at(0, 0) == doctest::Approx(pb.at(0, 0)).epsilon(1e-12));
  CHECK(pa.at(0, 1) == doctest::Approx(pb.at(0, 1)).epsilon(1e-12));

  // below the cap nothing changes
  AdamOptimizer c(with_clip), d(scaled);
  Tensor pc(1, 2), pd(1, 2);
  Tensor small = Tensor::from_rows({{0.3, 0.4}});
  std::vector<Tensor*> pcs = {&pc}, pds = {&pd};
  std::vector<const Tensor*> gsm = {&small};
  c.step(pcs, gsm);
  d.step(pds, gsm);
  CHECK(pc.values() == pd.values());
}

TEST_CASE("restore reinstates moments and the step counter") {
  AdamOptimizer a(AdamConfig{});
  Tensor p = Tensor::from_rows({{1.0}});
  Tensor g = Tensor::from_rows({{0.5}});
  std::vector<Tensor*> ps = {&p};
  std::vector<const Tensor*> gs = {&g};
  a.step(ps, gs);
  a.step(ps, gs);

  AdamOptimizer b(AdamConfig{});
  b.restore(a.step_count(), a.first_moments(), a.second_moments());
  Tensor pa = p, pb = p;
  std::vector<Tensor*> pas = {&pa}, pbs = {&pb};
  a.step(pas, gs);
  b.step(pbs, gs);
  CHECK(pa.values() == pb.values());

  CHECK_THROWS_AS(b.restore(1, {Tensor(1, 1)}, {}), DimensionError);
}
