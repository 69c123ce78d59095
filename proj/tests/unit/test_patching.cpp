#include <gtest/gtest.h>

#include <random>

#include "mtseg/patching.hpp"
#include "mtseg/phantom.hpp"

using namespace mtseg;

namespace {

Volume3 ramp_volume(Dims d) {
  Volume3 v(centered_grid(d));
  for (std::size_t i = 0; i < v.values.size(); ++i) v.values[i] = static_cast<float>(i) * 0.25f - 3.0f;
  return v;
}

ChannelVolume as_channels(const Volume3& v) {
  ChannelVolume c(1, v.dims());
  c.values = v.values;
  return c;
}

}  // namespace

TEST(PatchSpec, Validation) {
  EXPECT_NO_THROW(validate_patch_spec(PatchSpec::cube(16, 8)));
  EXPECT_THROW(validate_patch_spec(PatchSpec::cube(12, 12)), std::invalid_argument);
  EXPECT_NO_THROW(validate_patch_spec(PatchSpec::cube(12, 12), false));
  EXPECT_THROW(validate_patch_spec(PatchSpec::cube(8, 9)), std::invalid_argument);
  EXPECT_THROW(validate_patch_spec(PatchSpec::cube(8, 0)), std::invalid_argument);
  EXPECT_THROW(validate_patch_spec(PatchSpec::cube(0, 0), false), std::invalid_argument);
}

TEST(Origins, EvenTilingAndClampedEdge) {
  EXPECT_EQ(patch_origins_1d(4, 2, 2), (std::vector<int>{0, 2}));
  EXPECT_EQ(patch_origins_1d(5, 2, 2), (std::vector<int>{0, 2, 3}));
  EXPECT_EQ(patch_origins_1d(32, 16, 16), (std::vector<int>{0, 16}));
  EXPECT_EQ(patch_origins_1d(32, 16, 8), (std::vector<int>{0, 8, 16}));
  EXPECT_EQ(patch_origins_1d(10, 16, 4), (std::vector<int>{0}));
  EXPECT_EQ(patch_origins_1d(16, 16, 16), (std::vector<int>{0}));
}

TEST(Origins, CountsAndOrder) {
  EXPECT_EQ(patch_origins({4, 4, 4}, PatchSpec::cube(2, 2)).size(), 8u);
  const auto o = patch_origins({5, 5, 5}, PatchSpec::cube(2, 2));
  ASSERT_EQ(o.size(), 27u);
  EXPECT_EQ(o[0], (Index3{0, 0, 0}));
  EXPECT_EQ(o[1], (Index3{2, 0, 0}));
  EXPECT_EQ(o[3], (Index3{0, 2, 0}));
  EXPECT_EQ(o[26], (Index3{3, 3, 3}));
}

TEST(Crop, PadsOutsideAndKeepsGeometry) {
  const Volume3 v = ramp_volume({3, 3, 3});
  const Volume3 c = crop(v, {-1, 1, 2}, {3, 2, 2}, -9.0f);
  EXPECT_EQ(c.dims(), (Dims{3, 2, 2}));
  EXPECT_EQ(c.grid.spacing, v.grid.spacing);
  EXPECT_EQ(c.grid.origin, v.grid.voxel_center(-1, 1, 2));
  EXPECT_EQ(c.at(0, 0, 0), -9.0f);
  EXPECT_EQ(c.at(1, 0, 0), v.at(0, 1, 2));
  EXPECT_EQ(c.at(2, 1, 0), v.at(1, 2, 2));
  EXPECT_EQ(c.at(2, 1, 1), -9.0f);
  LabelVolume m(v.grid, 2);
  const LabelVolume lc = crop(m, {2, 2, 2}, {2, 2, 2});
  EXPECT_EQ(lc.at(0, 0, 0), 2);
  EXPECT_EQ(lc.at(1, 1, 1), 0);
}

TEST(Reaggregate, IdentityRoundTripIsExact) {
  const Volume3 v = ramp_volume({7, 5, 6});
  for (const PatchSpec& spec : {PatchSpec::cube(2, 2), PatchSpec::cube(3, 2), PatchSpec::cube(4, 1), PatchSpec::cube(8, 8)}) {
    const auto patches = extract_patches(v, spec);
    std::vector<ChannelVolume> outputs;
    std::vector<Index3> origins;
    for (const auto& p : patches) {
      outputs.push_back(as_channels(p.data));
      origins.push_back(p.origin);
    }
    const ChannelVolume back = reaggregate(outputs, origins, v.dims());
    EXPECT_EQ(back.values, v.values);
  }
}

TEST(Reaggregate, ConstantOutputsGiveConstant) {
  const Dims d{6, 6, 6};
  const auto origins = patch_origins(d, PatchSpec::cube(4, 3));
  std::vector<ChannelVolume> outputs(origins.size(), ChannelVolume(2, {4, 4, 4}, 0.375f));
  const ChannelVolume out = reaggregate(outputs, origins, d);
  EXPECT_EQ(out.channels, 2);
  for (float x : out.values) EXPECT_EQ(x, 0.375f);
}

TEST(Reaggregate, AveragesOverlaps) {
  const std::vector<Index3> origins{{0, 0, 0}, {1, 0, 0}};
  std::vector<ChannelVolume> outputs{ChannelVolume(1, {2, 1, 1}, 1.0f), ChannelVolume(1, {2, 1, 1}, 2.0f)};
  const ChannelVolume out = reaggregate(outputs, origins, {3, 1, 1});
  EXPECT_EQ(out.values, (std::vector<float>{1.0f, 1.5f, 2.0f}));
}

TEST(Reaggregate, RejectsGapsAndChannelMismatch) {
  std::vector<ChannelVolume> outputs{ChannelVolume(1, {2, 1, 1})};
  const std::vector<Index3> origins{{0, 0, 0}};
  EXPECT_THROW(reaggregate(outputs, origins, {3, 1, 1}), std::invalid_argument);
  std::vector<ChannelVolume> mixed{ChannelVolume(1, {2, 1, 1}), ChannelVolume(2, {2, 1, 1})};
  const std::vector<Index3> two{{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(reaggregate(mixed, two, {3, 1, 1}), std::invalid_argument);
}

TEST(Sampling, PatchesStayInsideAndAreDeterministic) {
  const Phantom ph = make_phantom({24, 20, 32}, 4);
  const PatchSpec spec = PatchSpec::cube(16, 16);
  std::mt19937_64 a(5), b(5);
  for (int i = 0; i < 50; ++i) {
    const TrainingPatch p = sample_training_patch(ph.volume, ph.mask, spec, a);
    const TrainingPatch q = sample_training_patch(ph.volume, ph.mask, spec, b);
    EXPECT_EQ(p.origin, q.origin);
    EXPECT_GE(p.origin[0], 0);
    EXPECT_LE(p.origin[0] + 16, 24);
    EXPECT_LE(p.origin[1] + 16, 20);
    EXPECT_LE(p.origin[2] + 16, 32);
    EXPECT_EQ(p.volume.dims(), (Dims{16, 16, 16}));
    EXPECT_EQ(p.volume.values, crop(ph.volume, p.origin, spec.size, 0.0f).values);
    EXPECT_EQ(p.mask.labels, crop(ph.mask, p.origin, spec.size).labels);
  }
}

TEST(Sampling, ForcedForegroundAlwaysHitsLiver) {
  const Phantom ph = make_phantom({32, 32, 32}, 6);
  SamplingPolicy always{1.0, 100};
  std::mt19937_64 rng(2);
  for (int i = 0; i < 30; ++i) {
    const TrainingPatch p = sample_training_patch(ph.volume, ph.mask, PatchSpec::cube(8, 8), rng, always);
    bool fg = false;
    for (auto l : p.mask.labels) fg = fg || l >= 1;
    EXPECT_TRUE(fg);
  }
}

TEST(TensorConversion, MaskChannelsAndBatchLayout) {
  LabelVolume m(centered_grid({3, 1, 1}));
  m.labels = {0, 1, 2};
  const Tensor t = mask_tensor(std::span<const LabelVolume>(&m, 1));
  EXPECT_EQ(t.shape(), (Shape{1, 2, 3, 1, 1}));
  EXPECT_EQ(std::vector<Real>(t.values().begin(), t.values().end()), (std::vector<Real>{0, 1, 1, 0, 0, 1}));

  const std::vector<Volume3> vs{ramp_volume({2, 2, 2}), Volume3(centered_grid({2, 2, 2}), 1.0f)};
  const Tensor b = batch_tensor(vs);
  EXPECT_EQ(b.shape(), (Shape{2, 1, 2, 2, 2}));
  EXPECT_EQ(b.values()[8], Real(1));
  const ChannelVolume s = tensor_sample(b, 0);
  EXPECT_EQ(s.values, vs[0].values);
  const Tensor back = channel_tensor(s);
  EXPECT_EQ(back.shape(), (Shape{1, 1, 2, 2, 2}));
  EXPECT_EQ(volume_tensor(vs[1]).shape(), (Shape{1, 1, 2, 2, 2}));
}
