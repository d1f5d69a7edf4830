#include <doctest.h>

#include <cmath>

#include "coagflow/binning.hpp"
#include "coagflow/typespace.hpp"

using namespace coagflow;

TEST_CASE("merge is commutative and mass additive") {
  CHECK(merge({1.0}, {2.0}).mass == 3.0);
  CHECK(merge({0.5}, {0.5}).mass == 1.0);
  Philox rng(11, 0);
  for (int i = 0; i < 1000; ++i) {
    ParticleType a{rng.uniform_range(0.1, 50.0)};
    ParticleType b{rng.uniform_range(0.1, 50.0)};
    CHECK(merge(a, b).mass == merge(b, a).mass);
    CHECK(merge(a, b).mass == a.mass + b.mass);
  }
}

TEST_CASE("kernel bound certification") {
  ConstantKernel one(1.0, 1.0);
  CHECK(kernel_bound_certify(one, 500) == doctest::Approx(1.0));

  CappedProductKernel capped(1.0, 10.0);
  CHECK(kernel_bound_certify(capped, 2000) <= 10.0);

  ConstantKernel liar(1.0, 0.5);
  CHECK_THROWS_AS((void)kernel_bound_certify(liar, 100), CertificationError);
}

TEST_CASE("kernel symmetry on random pairs") {
  CappedSumKernel k(0.3, 5.0);
  Philox rng(3, 1);
  for (int i = 0; i < 10000; ++i) {
    const double a = rng.uniform_range(0.1, 100.0);
    const double b = rng.uniform_range(0.1, 100.0);
    CHECK(k.evaluate(a, b) == k.evaluate(b, a));
  }
}

TEST_CASE("cell delocalisation evaluates the normalised indicator") {
  BoxDomain dom(1, 1.0);
  CellDelocalisation h(dom, 4);
  CHECK(h.evaluate({0.1, 0, 0}, {0.2, 0, 0}) == doctest::Approx(4.0));
  CHECK(h.evaluate({0.1, 0, 0}, {0.9, 0, 0}) == 0.0);
  CHECK(h.c1() == doctest::Approx(4.0));
  // Equal-cell construction is symmetric.
  Philox rng(5, 0);
  for (int i = 0; i < 2000; ++i) {
    Vec a{rng.uniform(), 0, 0}, b{rng.uniform(), 0, 0};
    CHECK(h.evaluate(a, b) == h.evaluate(b, a));
  }
}

TEST_CASE("uniform delocalisation") {
  BoxDomain dom(1, 1.0);
  UniformDelocalisation h(dom, 1.0);
  CHECK(h.evaluate({0.1, 0, 0}, {0.9, 0, 0}) == 1.0);
  CHECK(h.c1() == 1.0);
  CHECK(h.cell_count() == 1);
}

TEST_CASE("gaussian delocalisation respects its constants") {
  BoxDomain dom(1, 1.0);
  GaussianDelocalisation h(dom, 2.0, 0.2);
  CHECK(h.evaluate({0.3, 0, 0}, {0.3, 0, 0}) == doctest::Approx(2.0));
  Philox rng(6, 0);
  for (int i = 0; i < 2000; ++i) {
    Vec a{rng.uniform(), 0, 0}, b{rng.uniform(), 0, 0};
    const double v = h.evaluate(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= h.c1() + 1e-12);
  }
}

TEST_CASE("inception totals") {
  BoxDomain dom(1, 1.0);
  TypeMixture mono{{1.0}, {1.0}};
  {
    InceptionModel m({}, {{3.0, mono}}, 3.0);
    auto [a, b] = m.totals(0.0, dom);
    CHECK(a == 0.0);
    CHECK(b == doctest::Approx(3.0));
  }
  {
    InceptionModel m({{2.0, mono}}, {}, 0.0);
    auto [a, b] = m.totals(0.0, dom);
    CHECK(a == doctest::Approx(2.0));
    CHECK(b == 0.0);
  }
  {
    InceptionModel m({{2.0, mono}}, {{3.0, mono}}, 3.0);
    auto [a, b] = m.totals(0.0, dom);
    CHECK(a + b == doctest::Approx(5.0));
    CHECK(m.sup_total(dom) == doctest::Approx(5.0));
  }
}

TEST_CASE("flux bound certification") {
  BoxDomain dom(1, 1.0);
  auto u = make_velocity_field("constant", 1, {1.0}, dom);
  TypeMixture mono{{1.0}, {1.0}};
  InceptionModel ok({}, {{1.0, mono}}, 1.0);
  CHECK_NOTHROW(ok.certify_flux_bound(*u, dom, 1000));
  InceptionModel bad({}, {{1.0, mono}}, 0.5);
  CHECK_THROWS_AS(bad.certify_flux_bound(*u, dom, 1000), CertificationError);
}

TEST_CASE("negative intensities are rejected") {
  TypeMixture mono{{1.0}, {1.0}};
  CHECK_THROWS_AS(InceptionModel({{-1.0, mono}}, {}, 0.0), ModelError);
  CHECK_THROWS_AS(InceptionModel({}, {{-0.5, mono}}, 1.0), ModelError);
}

TEST_CASE("bin splits conserve number and mass") {
  auto bins = TypeBinning::geometric(1.0, 4096.0, std::pow(2.0, 0.25), {1.0});
  Philox rng(8, 0);
  for (int i = 0; i < 5000; ++i) {
    const double m = rng.uniform_range(1.0, 4000.0);
    auto s = bins->split(m);
    CHECK(s.w_lo + s.w_hi == doctest::Approx(1.0).epsilon(1e-12));
    const double mass = s.w_lo * bins->pivot(s.lo) + s.w_hi * bins->pivot(s.hi);
    CHECK(mass == doctest::Approx(m).epsilon(1e-12));
  }
  // Exact anchors stay on one pivot.
  auto s1 = bins->split(1.0);
  CHECK(s1.lo == s1.hi);
  CHECK(s1.w_lo == 1.0);
  // Integer sums of anchors that fall on the geometric grid are exact too.
  auto s2 = bins->split(2.0);
  CHECK(s2.lo == s2.hi);
}

TEST_CASE("bin overflow is flagged and conserves mass") {
  auto bins = TypeBinning::geometric(1.0, 8.0, 2.0);
  auto s = bins->split(20.0);
  CHECK(s.overflow);
  CHECK(s.w_lo * bins->pivot(s.lo) == doctest::Approx(20.0));
}
