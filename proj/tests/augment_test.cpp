#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "suites/augment_suite.hpp"

namespace mavseg::augment {
namespace {

struct Fixture {
  Dims d{6, 5, 4};
  Rng rng{31};
  Case c = testing::box_case("c", d, {"A", "B", "C"}, rng);
  const MaskGrid& lesion = c.lesion_mask;
  const MaskGrid& brain = c.brain_mask;
};

TEST(ScaleShift, Examples) {
  Fixture f;
  const auto& g = f.c.volume("A");
  for (auto r : {Region::Lesion, Region::Brain, Region::Uniform}) EXPECT_EQ(scale_shift(g, 1, 0, r, f.lesion, f.brain), g);
  VoxelGrid three(f.d, {}, 3.0f);
  const auto seven = scale_shift(three, 2, 1, Region::Uniform, f.lesion, f.brain);
  for (float v : seven.data()) EXPECT_EQ(v, 7.0f);
  auto out = scale_shift(three, 2, 0, Region::Lesion, f.lesion, f.brain);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], f.lesion[i] ? 6.0f : 3.0f);
  EXPECT_THROW(scale_shift(g, NAN, 0, Region::Uniform, f.lesion, f.brain), ValidationError);
  EXPECT_THROW(scale_shift(VoxelGrid({2, 2, 2}, {}), 1, 0, Region::Uniform, f.lesion, f.brain), ValidationError);
}

TEST(Invert, Examples) {
  Fixture f;
  VoxelGrid g(f.d, {}, 1.5f);
  auto inv = invert(g, Region::Uniform, f.lesion, f.brain);
  for (float v : inv.data()) EXPECT_EQ(v, -1.5f);
  const auto& a = f.c.volume("A");
  for (auto r : {Region::Lesion, Region::Brain, Region::Uniform})
    EXPECT_EQ(invert(invert(a, r, f.lesion, f.brain), r, f.lesion, f.brain), a);
  MaskGrid none(f.d);
  EXPECT_EQ(invert(a, Region::Lesion, none, f.brain), a);
}

TEST(MixUp, Examples) {
  Fixture f;
  const auto &a = f.c.volume("A"), &b = f.c.volume("B");
  EXPECT_EQ(mixup(a, b, 1.0, Region::Uniform, f.lesion, f.brain), a);
  EXPECT_EQ(mixup(a, b, 0.0, Region::Uniform, f.lesion, f.brain), b);
  VoxelGrid two(f.d, {}, 2.0f), four(f.d, {}, 4.0f);
  const auto mid = mixup(two, four, 0.5, Region::Uniform, f.lesion, f.brain);
  for (float v : mid.data()) EXPECT_EQ(v, 3.0f);
  EXPECT_THROW(mixup(a, b, 1.5, Region::Uniform, f.lesion, f.brain), ValidationError);
  EXPECT_THROW(mixup(a, VoxelGrid({1, 1, 1}, {}), 0.5, Region::Uniform, f.lesion, f.brain), ValidationError);
}

TEST(LesionSwitch, Examples) {
  Fixture f;
  const auto &a = f.c.volume("A"), &b = f.c.volume("B");
  EXPECT_EQ(lesion_switch(a, a, f.lesion), a);
  EXPECT_EQ(lesion_switch(a, b, MaskGrid(f.d)), b);
  EXPECT_EQ(lesion_switch(a, b, MaskGrid(f.d, true)), a);
  EXPECT_THROW(lesion_switch(a, VoxelGrid({1, 1, 1}, {}), f.lesion), ValidationError);
}

TEST(AugmentProperty, LocalityInvolutionMixBoundsSwitch) {
  Rng rng(41);
  suites::SuiteResult r;
  suites::check_elementwise(r, rng, 100);
  EXPECT_TRUE(r.pass()) << r.summary();
}

TEST(SamplePipeline, ZeroAndFullProbabilities) {
  Rng rng(1);
  EXPECT_TRUE(sample_pipeline(AugmentConfig::none(), rng).empty());

  AugmentConfig all;
  all.lesion_switch = 1;
  all.inversion = all.mixup = all.scale = all.shift = {1, 0};
  auto spec = sample_pipeline(all, rng);
  ASSERT_EQ(spec.k(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(spec.steps[i].id, kCanonicalOrder[i]);
    EXPECT_EQ(spec.steps[i].applications.size(), 1u);
    EXPECT_EQ(spec.steps[i].applications[0].region, Region::Lesion);
  }

  // Both regions active: two applications per step, lesion first.
  all.inversion = all.mixup = all.scale = all.shift = {1, 1};
  spec = sample_pipeline(all, rng);
  ASSERT_EQ(spec.k(), 5u);
  for (std::size_t i = 1; i < 5; ++i) {
    ASSERT_EQ(spec.steps[i].applications.size(), 2u);
    EXPECT_EQ(spec.steps[i].applications[0].region, Region::Lesion);
    EXPECT_EQ(spec.steps[i].applications[1].region, Region::Brain);
  }
}

TEST(SamplePipeline, UniformModeSkipsLesionSwitch) {
  AugmentConfig c;
  c.uniform = true;
  c.lesion_switch = 1;
  c.inversion = {0, 1};
  c.mixup = c.scale = c.shift = {1, 0};
  Rng rng(2);
  auto spec = sample_pipeline(c, rng);
  ASSERT_EQ(spec.k(), 4u);
  EXPECT_EQ(spec.steps[0].id, AugId::Inversion);
  for (auto& s : spec.steps) {
    ASSERT_EQ(s.applications.size(), 1u);
    EXPECT_EQ(s.applications[0].region, Region::Uniform);
  }
}

TEST(SamplePipeline, ScaleFrequency) {
  AugmentConfig c = AugmentConfig::none();
  c.scale = {0.3, 0.0};
  Rng rng(3);
  int hits = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) hits += sample_pipeline(c, rng).k() == 1;
  EXPECT_NEAR(hits / double(n), 0.30, 0.02);
}

TEST(SamplePipelineProperty, CanonicalSubsequenceAndRanges) {
  Rng rng(4);
  suites::SuiteResult r;
  suites::check_pipeline_order(r, rng, 10000);
  EXPECT_TRUE(r.pass()) << r.summary();
}

TEST(IsCanonical, RejectsBadSpecs) {
  AugPipelineSpec out_of_order{{{AugId::Scale, {Application{}}}, {AugId::Inversion, {Application{}}}}};
  EXPECT_FALSE(is_canonical(out_of_order));
  Application brain;
  brain.region = Region::Brain;
  AugPipelineSpec bad_switch{{{AugId::LesionSwitch, {brain}}}};
  EXPECT_FALSE(is_canonical(bad_switch));
  AugPipelineSpec repeated{{{AugId::Inversion, {Application{}}}, {AugId::Inversion, {Application{}}}}};
  EXPECT_FALSE(is_canonical(repeated));
}

// ---------------------------------------------------------------------------
// synthesis

TEST(Synthesize, Examples) {
  Fixture f;
  const auto& src = f.c.volume("A");
  EXPECT_EQ(synthesize_modality(f.c, src, {}, AugPipelineSpec{}), src);

  Application uni;
  Application neg = uni;
  neg.alpha = -1;
  AugPipelineSpec undo{{{AugId::Inversion, {uni}}, {AugId::Scale, {neg}}}};
  EXPECT_EQ(synthesize_modality(f.c, src, {}, undo), src);

  AugPipelineSpec needs{{{AugId::MixUp, {uni}}}};
  EXPECT_THROW(synthesize_modality(f.c, src, {}, needs), ValidationError);
}

TEST(Synthesize, SeededPipelineIsDeterministic) {
  Fixture f;
  AugmentConfig all;
  all.lesion_switch = 1;
  all.inversion = all.mixup = all.scale = all.shift = {1, 1};
  Rng r1(9), r2(9);
  auto s1 = sample_pipeline(all, r1), s2 = sample_pipeline(all, r2);
  ASSERT_EQ(s1, s2);
  auto a = synthesize_modality(f.c, "A", {"B", "C"}, s1);
  auto b = synthesize_modality(f.c, "A", {"B", "C"}, s2);
  EXPECT_EQ(a.grid, b.grid);
  EXPECT_EQ(a.source, "A");
  EXPECT_EQ(a.spec, s1);
}

TEST(SynthesizeProperty, EqualsVoxelwiseFoldAndKeepsMasks) {
  Rng rng(51);
  suites::SuiteResult r;
  suites::check_synthesis(r, rng, 300);
  EXPECT_TRUE(r.pass()) << r.summary();
}

TEST(AugmentConfig, Validation) {
  AugmentConfig c;
  c.scale.lesion = 1.5;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.scale_shift.scale = {2, 1};
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.mix.lambda = {0.5, 1.2};
  EXPECT_THROW(c.validate(), ValidationError);
}

}  // namespace
}  // namespace mavseg::augment
