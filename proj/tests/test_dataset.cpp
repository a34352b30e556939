#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "eegatt/dataset.hpp"
#include "eegatt/error.hpp"
#include "eegatt/rng.hpp"
#include "eegatt/tensor.hpp"

namespace eegatt {
namespace {

TEST(RelativeLabel, Examples) {
  EXPECT_EQ(relative_label(Side::kLeft, 1), 0);
  EXPECT_EQ(relative_label(Side::kRight, 5), 0);
  EXPECT_EQ(relative_label(Side::kLeft, 3), 2);
  EXPECT_EQ(relative_label(Side::kRight, 3), 2);
  EXPECT_EQ(relative_label(Side::kLeft, 5), 4);
  EXPECT_EQ(relative_label(Side::kRight, 1), 4);
}

TEST(RelativeLabel, MirrorSymmetry) {
  for (int k = 1; k <= 5; ++k) EXPECT_EQ(relative_label(Side::kLeft, k), relative_label(Side::kRight, 6 - k));
}

TEST(RelativeLabel, OutOfRange) {
  for (int k : {0, 6, -1}) {
    try {
      relative_label(Side::kLeft, k);
      FAIL() << k;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kLabel);
    }
  }
}

EpochedDataset small_dataset(std::size_t subjects, std::size_t per_cell, std::uint64_t seed) {
  EpochedDataset d(3, 4, "toy");
  Rng rng(seed);
  std::vector<double> x(12);
  for (std::size_t s = 0; s < subjects; ++s)
    for (int spk = 1; spk <= 5; ++spk)
      for (Side side : {Side::kLeft, Side::kRight})
        for (std::size_t t = 0; t < per_cell; ++t) {
          for (auto& v : x) v = rng.normal();
          SampleInfo info;
          info.speaker = spk;
          info.side = side;
          info.subject = static_cast<int>(s);
          info.sequence_effect = t % 3 == 0;
          d.add(std::span<const double>(x), info);
        }
  return d;
}

TEST(Dataset, AddDerivesRelativeAndChecksLength) {
  EpochedDataset d(2, 3, "toy");
  std::vector<double> x(6, 1.0);
  SampleInfo info;
  info.speaker = 4;
  info.side = Side::kLeft;
  info.relative = 0;
  d.add(std::span<const double>(x), info);
  EXPECT_EQ(d.info(0).relative, 3);
  std::vector<double> bad(5);
  EXPECT_THROW(d.add(std::span<const double>(bad), info), Error);
}

TEST(Dataset, TimeAxis) {
  EpochedDataset d(2, 4, "toy");
  d.set_time_axis(-100.0, 2.0);
  EXPECT_EQ(d.time_ms(), (std::vector<double>{-100, -98, -96, -94}));
  EXPECT_THROW(d.set_time_axis(0.0, 0.0), Error);
}

TEST(Splits, TrialModeStratifiesEveryCell) {
  auto d = small_dataset(2, 20, 1);
  assign_splits(d, SplitMode::kTrial, 7);
  std::map<std::tuple<int, int, int, int>, int> counts;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& s = d.info(i);
    ++counts[{s.subject, s.speaker, static_cast<int>(s.side), static_cast<int>(s.split)}];
  }
  for (const auto& [key, n] : counts) {
    const int split = std::get<3>(key);
    EXPECT_EQ(n, split == 0 ? 16 : 2);
  }
  const auto rh = d.relative_histogram(Split::kTest);
  EXPECT_EQ(rh[0], 8u);
  EXPECT_EQ(d.side_histogram(Split::kVal)[1], 20u);
}

TEST(Splits, SubjectModeHoldsOutWholeSubjects) {
  auto d = small_dataset(5, 2, 2);
  assign_splits(d, SplitMode::kSubject, 3);
  std::map<int, std::set<int>> splits_of;
  for (std::size_t i = 0; i < d.size(); ++i) splits_of[d.info(i).subject].insert(static_cast<int>(d.info(i).split));
  std::set<int> used;
  for (const auto& [s, set] : splits_of) {
    EXPECT_EQ(set.size(), 1u);
    used.insert(*set.begin());
  }
  EXPECT_EQ(used.size(), 3u);
  auto two = small_dataset(2, 1, 2);
  EXPECT_THROW(assign_splits(two, SplitMode::kSubject, 3), Error);
}

TEST(Splits, SeedDeterminesAssignment) {
  auto a = small_dataset(2, 10, 1), b = small_dataset(2, 10, 1), c = small_dataset(2, 10, 1);
  assign_splits(a, SplitMode::kTrial, 5);
  assign_splits(b, SplitMode::kTrial, 5);
  assign_splits(c, SplitMode::kTrial, 6);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.info(i).split, b.info(i).split);
    differs = differs || a.info(i).split != c.info(i).split;
  }
  EXPECT_TRUE(differs);
}

TEST(Storage, BuffersAre64ByteAligned) {
  const auto aligned = [](const double* p) { return reinterpret_cast<std::uintptr_t>(p) % 64 == 0; };
  for (std::size_t n : {1u, 3u, 7u, 350u}) EXPECT_TRUE(aligned(Tensor({n}).data())) << n;
  const auto d = small_dataset(1, 2, 3);
  EXPECT_TRUE(aligned(d.eeg(0).data()));
}

TEST(Container, RoundTripAtFloatPrecision) {
  const auto dir = std::filesystem::temp_directory_path() / "eegatt_ds_test";
  std::filesystem::create_directories(dir);
  auto d = small_dataset(3, 2, 4);
  assign_splits(d, SplitMode::kTrial, 1);
  d.set_time_axis(-100.0, 2.0);
  d.set_provenance("unit");
  save_dataset(d, dir / "d.bin");
  const auto e = load_dataset(dir / "d.bin");
  ASSERT_EQ(e.size(), d.size());
  EXPECT_EQ(e.provenance(), "unit");
  EXPECT_EQ(e.montage(), "toy");
  EXPECT_EQ(e.start_ms(), -100.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(e.info(i).speaker, d.info(i).speaker);
    EXPECT_EQ(e.info(i).side, d.info(i).side);
    EXPECT_EQ(e.info(i).split, d.info(i).split);
    EXPECT_EQ(e.info(i).subject, d.info(i).subject);
    EXPECT_EQ(e.info(i).sequence_effect, d.info(i).sequence_effect);
    for (std::size_t k = 0; k < d.sample_size(); ++k) {
      EXPECT_EQ(e.eeg(i)[k], static_cast<double>(static_cast<float>(d.eeg(i)[k])));
    }
  }
  // a second save of the loaded data is byte-identical
  save_dataset(e, dir / "e.bin");
  std::ifstream f1(dir / "d.bin", std::ios::binary), f2(dir / "e.bin", std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), {}), b2((std::istreambuf_iterator<char>(f2)), {});
  EXPECT_EQ(b1, b2);
  std::filesystem::remove_all(dir);
}

TEST(Container, CorruptFilesAreFormatErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "eegatt_ds_bad";
  std::filesystem::create_directories(dir);
  save_dataset(small_dataset(1, 1, 1), dir / "d.bin");
  const auto full = std::filesystem::file_size(dir / "d.bin");
  std::filesystem::resize_file(dir / "d.bin", full - 3);
  try {
    load_dataset(dir / "d.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
  }
  std::ofstream(dir / "junk.bin") << "not a dataset at all";
  EXPECT_THROW(load_dataset(dir / "junk.bin"), Error);
  try {
    load_dataset(dir / "missing.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace eegatt
