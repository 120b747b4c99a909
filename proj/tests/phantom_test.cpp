#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "support.hpp"

namespace mavseg::phantom {
namespace {

PhantomSpec quiet() {
  PhantomSpec s;
  s.noise_sigma = 0;
  s.bias_strength = 0;
  return s;
}

std::size_t count(const MaskGrid& m) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.size(); ++i) n += m[i];
  return n;
}

TEST(GenAnatomy, NoLesionsRequested) {
  PhantomSpec s;
  s.lesion_count = {0, 0};
  Rng rng(1);
  auto an = gen_anatomy(s, rng);
  EXPECT_EQ(count(an.lesion_mask), 0u);
  EXPECT_GT(count(an.brain_mask), 0u);
}

TEST(GenAnatomy, BrainStrictlyInsideGrid) {
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    auto an = gen_anatomy(PhantomSpec{}, rng);
    const Dims d = an.brain_mask.dims();
    for (std::size_t z = 0; z < d.nz; ++z)
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t x = 0; x < d.nx; ++x) {
          const bool border = x == 0 || y == 0 || z == 0 || x + 1 == d.nx || y + 1 == d.ny || z + 1 == d.nz;
          if (border) {
            ASSERT_FALSE(an.brain_mask[d.index(x, y, z)]);
          }
        }
  }
}

TEST(GenAnatomy, SeedDeterministic) {
  Rng a(3), b(3);
  auto x = gen_anatomy(PhantomSpec{}, a), y = gen_anatomy(PhantomSpec{}, b);
  EXPECT_EQ(x.tissue.data, y.tissue.data);
  EXPECT_EQ(x.lesion_mask, y.lesion_mask);
  EXPECT_EQ(x.brain_mask, y.brain_mask);
}

TEST(GenAnatomyProperty, LesionInsideBrainAndTissueConsistent) {
  Rng rng(4);
  for (int t = 0; t < 40; ++t) {
    PhantomSpec s;
    s.dims = {16 + uniform_index(rng, 12), 16 + uniform_index(rng, 12), 16 + uniform_index(rng, 12)};
    s.lesion_count = {0, 4};
    s.lesion_radius = {1.0, 2.0};
    auto an = gen_anatomy(s, rng);
    for (std::size_t i = 0; i < s.dims.count(); ++i) {
      if (an.lesion_mask[i]) {
        ASSERT_TRUE(an.brain_mask[i]);
      }
      ASSERT_EQ(an.brain_mask[i], an.tissue.data[i] != Background);
    }
  }
}

TEST(GenAnatomy, RejectsLesionsThatCannotFit) {
  PhantomSpec s;
  s.lesion_radius = {6, 9};
  Rng rng(5);
  EXPECT_THROW(gen_anatomy(s, rng), ValidationError);
  s = {};
  s.noise_sigma = -1;
  EXPECT_THROW(gen_anatomy(s, rng), ValidationError);
}

TEST(RenderModality, NoiselessInvisibleLesionIsPiecewiseConstant) {
  Rng rng(6);
  const auto s = quiet();
  auto an = gen_anatomy(s, rng);
  const ModalityProfile p{"X", {0.0, 0.2, 0.5, 0.8}, 3.0, false};
  auto g = render_modality(an, p, s, rng);
  for (std::size_t i = 0; i < g.size(); ++i)
    ASSERT_EQ(g[i], static_cast<float>(p.tissue_means[static_cast<std::size_t>(an.tissue.data[i])]));
}

TEST(RenderModality, VisibleLesionRaisesMeanByOffset) {
  PhantomSpec s = quiet();
  s.noise_sigma = 0.1;
  s.lesion_count = {3, 3};
  Rng rng(7);
  auto an = gen_anatomy(s, rng);
  const ModalityProfile p{"X", {0.0, 0.2, 0.5, 0.8}, 2.0, true};
  auto g = render_modality(an, p, s, rng);
  double excess = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (an.lesion_mask[i]) {
      excess += g[i] - p.tissue_means[static_cast<std::size_t>(an.tissue.data[i])];
      ++n;
    }
  ASSERT_GT(n, 0u);
  EXPECT_NEAR(excess / n, 2.0, 3 * s.noise_sigma / std::sqrt(double(n)));
}

TEST(RenderModalityProperty, InvisibleLesionHasNoContrast) {
  Rng rng(8);
  PhantomSpec s = quiet();
  s.noise_sigma = 0.1;
  s.lesion_count = {2, 3};
  for (int t = 0; t < 10; ++t) {
    auto an = gen_anatomy(s, rng);
    auto g = render_modality(an, profile_p2(), s, rng);
    double diff = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (an.lesion_mask[i]) {
        diff += g[i] - profile_p2().tissue_means[static_cast<std::size_t>(an.tissue.data[i])];
        ++n;
      }
    if (n == 0) continue;
    EXPECT_NEAR(diff / n, 0.0, 4 * s.noise_sigma / std::sqrt(double(n)));
  }
}

TEST(RenderModality, BackgroundStaysZero) {
  Rng rng(9);
  PhantomSpec s;
  auto an = gen_anatomy(s, rng);
  auto g = render_modality(an, profile_p1(), s, rng);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!an.brain_mask[i]) {
      ASSERT_EQ(g[i], 0.0f);
    }
}

TEST(GenDataset, WritesLoadableManifest) {
  mavseg::testing::TempDir dir;
  PhantomSpec s;
  s.dims = {16, 16, 16};
  s.lesion_radius = {1.0, 2.0};
  auto desc = gen_dataset("ph", s, train_profiles(), 10, {0.8, 0.2}, dir.path(), 42);
  EXPECT_EQ(desc.cases.size(), 10u);
  EXPECT_EQ(desc.split.train.size(), 8u);
  EXPECT_EQ(desc.split.test.size(), 2u);
  const auto ds = load_dataset(dir.path());
  EXPECT_EQ(ds.descriptor.modalities, (std::vector<std::string>{"P1", "P2"}));
  ASSERT_EQ(ds.cases.size(), 10u);
  std::set<std::vector<std::uint8_t>> anatomies;
  for (auto& [id, c] : ds.cases) {
    EXPECT_EQ(c.volumes.size(), 2u);
    EXPECT_EQ(c.label, c.lesion_mask);
    EXPECT_NE(c.volume("P1"), c.volume("P2"));
    anatomies.insert(c.brain_mask.data());
  }
  EXPECT_EQ(anatomies.size(), 10u);

  mavseg::testing::TempDir again;
  gen_dataset("ph", s, train_profiles(), 10, {0.8, 0.2}, again.path(), 42);
  EXPECT_EQ(load_dataset(again.path()).cases.at("case003").volume("P2"), ds.cases.at("case003").volume("P2"));
}

TEST(GenDataset, Errors) {
  mavseg::testing::TempDir dir;
  EXPECT_THROW(gen_dataset("ph", {}, {}, 2, {}, dir.path(), 1), ValidationError);
  EXPECT_THROW(gen_dataset("ph", {}, {profile_p1(), profile_p1()}, 2, {}, dir.path(), 1), ValidationError);
  EXPECT_THROW(gen_dataset("ph", {}, train_profiles(), 2, {0.5, 0.4}, dir.path(), 1), ValidationError);
}

TEST(Profiles, JsonRoundTripAndValidation) {
  const auto p = profile_p3();
  EXPECT_EQ(profile_json(profile_from_json(profile_json(p))), profile_json(p));
  const auto arr = nlohmann::json::array({profile_json(profile_p1()), profile_json(profile_p2())});
  EXPECT_EQ(profiles_from_json(arr).size(), 2u);
  EXPECT_EQ(profiles_from_json(nlohmann::json{{"profiles", arr}}).size(), 2u);
  EXPECT_THROW(profiles_from_json(nlohmann::json::array({profile_json(p), profile_json(p)})), ValidationError);
  auto bad = profile_json(p);
  bad["tissue_means"] = {0, 1, 2};
  EXPECT_THROW(profile_from_json(bad), ValidationError);
  bad = profile_json(p);
  bad.erase("lesion_visible");
  EXPECT_THROW(profile_from_json(bad), ValidationError);

  mavseg::testing::TempDir dir;
  std::ofstream(dir / "p.json") << arr.dump();
  EXPECT_EQ(load_profiles(dir / "p.json")[1].name, "P2");
  std::ofstream(dir / "bad.json") << "[{";
  EXPECT_THROW(load_profiles(dir / "bad.json"), ValidationError);
}

}  // namespace
}  // namespace mavseg::phantom
