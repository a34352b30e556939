#include "eegatt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "eegatt/error.hpp"
#include "eegatt/io.hpp"
#include "eegatt/rng.hpp"

namespace eegatt {

const char* side_name(Side side) { return side == Side::kLeft ? "left" : "right"; }

Side side_from_name(const std::string& name) {
  if (name == "left" || name == "L" || name == "l" || name == "0") return Side::kLeft;
  if (name == "right" || name == "R" || name == "r" || name == "1") return Side::kRight;
  fail(ErrorCode::kLabel, "unknown attended side '" + name + "'");
}

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

int relative_label(Side side, int speaker_index) {
  if (speaker_index < 1 || speaker_index > kSpeakers) {
    fail(ErrorCode::kLabel, "speaker index " + std::to_string(speaker_index) + " outside 1..5");
  }
  return side == Side::kLeft ? speaker_index - 1 : kSpeakers - speaker_index;
}

EpochedDataset::EpochedDataset(std::size_t electrodes, std::size_t time_points, std::string montage)
    : electrodes_(electrodes), time_points_(time_points), montage_(std::move(montage)) {}

void EpochedDataset::add(std::span<const double> eeg, SampleInfo info) {
  if (eeg.size() != sample_size()) fail(ErrorCode::kDimension, "sample has " + std::to_string(eeg.size()) + " values, expected " + std::to_string(sample_size()));
  info.relative = relative_label(info.side, info.speaker);
  eeg_.insert(eeg_.end(), eeg.begin(), eeg.end());
  info_.push_back(info);
}

void EpochedDataset::add(std::span<const float> eeg, SampleInfo info) {
  if (eeg.size() != sample_size()) fail(ErrorCode::kDimension, "sample has " + std::to_string(eeg.size()) + " values, expected " + std::to_string(sample_size()));
  info.relative = relative_label(info.side, info.speaker);
  eeg_.insert(eeg_.end(), eeg.begin(), eeg.end());
  info_.push_back(info);
}

void EpochedDataset::set_time_axis(double start_ms, double step_ms) {
  if (!std::isfinite(start_ms) || !(step_ms > 0.0)) fail(ErrorCode::kConfig, "invalid time axis");
  start_ms_ = start_ms;
  step_ms_ = step_ms;
}

std::vector<double> EpochedDataset::time_ms() const {
  std::vector<double> t(time_points_);
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = start_ms_ + step_ms_ * static_cast<double>(k);
  return t;
}

std::span<const double> EpochedDataset::eeg(std::size_t i) const {
  if (i >= info_.size()) fail(ErrorCode::kDimension, "sample index out of range");
  return {eeg_.data() + i * sample_size(), sample_size()};
}

std::vector<std::size_t> EpochedDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < info_.size(); ++i)
    if (info_[i].split == split) out.push_back(i);
  return out;
}

std::array<std::size_t, kRelativeClasses> EpochedDataset::relative_histogram(Split split) const {
  std::array<std::size_t, kRelativeClasses> h{};
  for (const auto& s : info_)
    if (s.split == split) ++h[static_cast<std::size_t>(s.relative)];
  return h;
}

std::array<std::size_t, 2> EpochedDataset::side_histogram(Split split) const {
  std::array<std::size_t, 2> h{};
  for (const auto& s : info_)
    if (s.split == split) ++h[static_cast<std::size_t>(s.side)];
  return h;
}

void assign_splits(EpochedDataset& data, SplitMode mode, std::uint64_t seed) {
  Rng rng(seed);
  auto assign = [](std::size_t rank, std::size_t n) {
    const auto n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
    if (rank < n_train) return Split::kTrain;
    if (rank < n_train + n_val) return Split::kVal;
    return Split::kTest;
  };
  if (mode == SplitMode::kTrial) {
    std::map<std::tuple<int, int, int>, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& s = data.info(i);
      cells[{s.subject, s.speaker, static_cast<int>(s.side)}].push_back(i);
    }
    for (auto& [key, members] : cells) {
      rng.shuffle(members.begin(), members.end());
      for (std::size_t r = 0; r < members.size(); ++r) data.info(members[r]).split = assign(r, members.size());
    }
    return;
  }
  std::vector<int> subjects;
  for (std::size_t i = 0; i < data.size(); ++i) subjects.push_back(data.info(i).subject);
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  if (subjects.size() < 3) fail(ErrorCode::kConfig, "subject split needs at least 3 subjects");
  rng.shuffle(subjects.begin(), subjects.end());
  std::map<int, Split> by_subject;
  const std::size_t n = subjects.size();
  // At least one held-out subject each for validation and test.
  const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n))));
  const std::size_t n_test = n_val;
  for (std::size_t r = 0; r < n; ++r) {
    by_subject[subjects[r]] = r < n - n_val - n_test ? Split::kTrain : (r < n - n_test ? Split::kVal : Split::kTest);
  }
  for (std::size_t i = 0; i < data.size(); ++i) data.info(i).split = by_subject[data.info(i).subject];
}

void save_dataset(const EpochedDataset& data, const std::filesystem::path& path) {
  io::ByteWriter w;
  w.bytes(std::string_view(kDatasetMagic, 8));
  w.u32(kDatasetVersion);
  w.u64(data.size());
  w.u32(static_cast<std::uint32_t>(data.electrodes()));
  w.u32(static_cast<std::uint32_t>(data.time_points()));
  w.str(data.montage());
  w.str(data.provenance());
  w.f64(data.start_ms());
  w.f64(data.step_ms());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.info(i);
    w.u8(static_cast<std::uint8_t>(s.speaker));
    w.u8(static_cast<std::uint8_t>(s.side));
    w.u8(static_cast<std::uint8_t>(s.relative));
    w.u8(static_cast<std::uint8_t>(s.split));
    w.u16(static_cast<std::uint16_t>(s.subject));
    w.u8(s.sequence_effect ? 1 : 0);
    w.u8(0);
  }
  for (std::size_t i = 0; i < data.size(); ++i)
    for (double v : data.eeg(i)) w.f32(static_cast<float>(v));
  io::write_file_atomic(path, w.buffer());
}

EpochedDataset load_dataset(const std::filesystem::path& path) {
  const std::string source = path.string();
  io::ByteReader r(io::read_file(path), source);
  r.expect_magic(std::string_view(kDatasetMagic, 8));
  const auto version = r.u32();
  if (version != kDatasetVersion) fail(ErrorCode::kFormat, source + ": unsupported dataset version " + std::to_string(version));
  const auto n = r.u64();
  const auto electrodes = r.u32();
  const auto time_points = r.u32();
  auto montage = r.str();
  auto provenance = r.str();
  const double start_ms = r.f64();
  const double step_ms = r.f64();
  if (!std::isfinite(start_ms) || !(step_ms > 0.0)) fail(ErrorCode::kFormat, source + ": invalid time axis");
  if (electrodes == 0 || time_points == 0) fail(ErrorCode::kFormat, source + ": empty sample shape");
  if (n > r.remaining() / 8) fail(ErrorCode::kFormat, source + ": sample count exceeds file size");
  std::vector<SampleInfo> infos(n);
  for (auto& s : infos) {
    s.speaker = r.u8();
    const auto side = r.u8();
    s.relative = r.u8();
    const auto split = r.u8();
    s.subject = r.u16();
    s.sequence_effect = r.u8() != 0;
    r.u8();
    if (side > 1 || split > 2) fail(ErrorCode::kFormat, source + ": invalid label record");
    s.side = static_cast<Side>(side);
    s.split = static_cast<Split>(split);
    if (s.speaker < 1 || s.speaker > kSpeakers || s.relative != relative_label(s.side, s.speaker)) {
      fail(ErrorCode::kFormat, source + ": inconsistent labels in record");
    }
  }
  const std::size_t per = static_cast<std::size_t>(electrodes) * time_points;
  if (r.remaining() != n * per * 4) fail(ErrorCode::kFormat, source + ": payload size does not match header");
  EpochedDataset data(electrodes, time_points, montage);
  data.set_provenance(provenance);
  data.set_time_axis(start_ms, step_ms);
  std::vector<float> buf(per);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : buf) v = r.f32();
    data.add(std::span<const float>(buf), infos[i]);
  }
  return data;
}

}  // namespace eegatt
