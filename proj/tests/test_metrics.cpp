#include <doctest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"
#include "vastopo/metrics.hpp"
#include "vastopo/seed.hpp"

using namespace vastopo;

namespace {

// Fills a 1-row volume with label 1 at the given pred/gt/overlap counts.
std::pair<LabelVolume, LabelVolume> counts(int pred, int gt, int overlap) {
  const int n = pred + gt - overlap + 1;
  LabelVolume p(Dims{n, 1, 1}, 0), g(Dims{n, 1, 1}, 0);
  for (int i = 0; i < pred; ++i) p.at(i, 0, 0) = 1;
  for (int i = pred - overlap; i < pred - overlap + gt; ++i) g.at(i, 0, 0) = 1;
  return {p, g};
}

LabelVolume random_labels(CounterRng& rng, const Dims& d, int classes) {
  LabelVolume v(d, 0);
  for (auto& x : v.data()) x = static_cast<std::uint8_t>(rng.integer(0, classes));
  return v;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("identical maps") {
  CounterRng rng(1);
  const auto v = random_labels(rng, {9, 7, 5}, 3);
  const auto r = evaluate(v, v);
  CHECK(r.classes_in_gt == 3);
  for (const auto& c : r.classes) {
    CHECK(c.dsc == 100.0);
    CHECK(c.iou == 100.0);
    CHECK(*c.rvd == 0.0);
  }
  CHECK(r.macro_dsc == 100.0);
  CHECK(r.miou == 100.0);
  CHECK(r.mean_rvd == 0.0);
}

TEST_CASE("eight, eight, four") {
  const auto [p, g] = counts(8, 8, 4);
  const auto r = evaluate(p, g);
  REQUIRE(r.classes.size() == 1);
  CHECK(r.classes[0].overlap == 4);
  CHECK(r.classes[0].dsc == 50.0);
  CHECK(r.classes[0].iou == doctest::Approx(100.0 / 3).epsilon(1e-15));
  CHECK(*r.classes[0].rvd == 0.0);
}

TEST_CASE("relative volume difference is ten and not symmetric") {
  const auto [p, g] = counts(110, 100, 100);
  const auto r = evaluate(p, g);
  CHECK(*r.classes[0].rvd == doctest::Approx(10.0).epsilon(1e-15));
  const auto back = evaluate(g, p);
  CHECK(*back.classes[0].rvd == doctest::Approx(1000.0 / 110).epsilon(1e-15));
  CHECK(*back.classes[0].rvd != *r.classes[0].rvd);
  CHECK(back.classes[0].dsc == r.classes[0].dsc);
}

TEST_CASE("class predicted but absent from truth") {
  LabelVolume p(Dims{4, 1, 1}, 0), g(Dims{4, 1, 1}, 0);
  p.at(0, 0, 0) = 2;
  g.at(1, 0, 0) = 1;
  const auto r = evaluate(p, g);
  REQUIRE(r.classes.size() == 2);
  CHECK(r.classes[1].label == 2);
  CHECK_FALSE(r.classes[1].rvd.has_value());
  CHECK(r.classes_in_gt == 1);
  CHECK(r.mean_rvd == 100.0);
  CHECK(r.macro_dsc == 0.0);
  std::ostringstream out;
  write_report_json(out, r);
  CHECK(out.str() ==
        "{\"macro_dsc\":0,\"miou\":0,\"mean_rvd\":100,\"classes\":["
        "{\"label\":1,\"dsc\":0,\"iou\":0,\"rvd\":100,\"pred_voxels\":0,\"gt_voxels\":1,\"overlap\":0},"
        "{\"label\":2,\"dsc\":0,\"iou\":0,\"rvd\":null,\"pred_voxels\":1,\"gt_voxels\":0,\"overlap\":0}]}\n");
}

TEST_CASE("symmetry, Dice >= IoU and permutation invariance on random pairs") {
  CounterRng rng(2);
  for (int t = 0; t < 100; ++t) {
    const Dims d = vt::random_dims(rng, 2, 10);
    const auto a = random_labels(rng, d, 3);
    auto b = a;
    for (auto& x : b.data())
      if (rng.uniform(0, 1) < 0.4) x = static_cast<std::uint8_t>(rng.integer(0, 3));
    const auto ab = evaluate(a, b, 3);
    const auto ba = evaluate(b, a, 3);
    REQUIRE(ab.classes.size() == ba.classes.size());
    for (std::size_t i = 0; i < ab.classes.size(); ++i) {
      const auto& c = ab.classes[i];
      CHECK(c.dsc == ba.classes[i].dsc);
      CHECK(c.iou == ba.classes[i].iou);
      CHECK(c.dsc >= c.iou);
      if (c.dsc == c.iou) CHECK((c.dsc == 0.0 || c.dsc == 100.0));
      else CHECK((c.dsc > 0.0 && c.dsc < 100.0));
    }
    // Same voxel permutation applied to both maps.
    LabelVolume pa(Dims{int(a.size()), 1, 1}, 0), pb = pa;
    const std::size_t shift = rng.integer(0, int(a.size()) - 1);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::size_t j = (i * 7 + shift) % a.size();
      pa[i] = a[j];
      pb[i] = b[j];
    }
    if (a.size() % 7 == 0) continue;
    const auto perm = evaluate(pa, pb, 3);
    CHECK(perm.macro_dsc == ab.macro_dsc);
    CHECK(perm.miou == ab.miou);
    CHECK(perm.mean_rvd == ab.mean_rvd);
  }
}

TEST_CASE("dimension mismatch names both shapes") {
  try {
    evaluate(LabelVolume(Dims{4, 4, 4}), LabelVolume(Dims{4, 4, 5}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("4x4x4") != std::string::npos);
    CHECK(msg.find("4x4x5") != std::string::npos);
  }
}

TEST_CASE("labels above the class count are rejected") {
  LabelVolume p(Dims{2, 1, 1}, 0), g(Dims{2, 1, 1}, 0);
  p.at(0, 0, 0) = 4;
  CHECK_THROWS_AS(evaluate(p, g, 3), ValueError);
  CHECK_NOTHROW(evaluate(p, g, 4));
}

}
