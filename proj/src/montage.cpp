#include "eegatt/montage.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <set>

#include "eegatt/error.hpp"

namespace eegatt {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

const char* const kLabels[] = {
    "Fp1", "Fpz", "Fp2", "AF3", "AF4", "F7",  "F5",  "F3",  "F1",  "Fz",  "F2",  "F4",  "F6",  "F8",  "FT7", "FC5",
    "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "FT8", "T7",  "C5",  "C3",  "C1",  "Cz",  "C2",  "C4",  "C6",  "T8",
    "M1",  "TP7", "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6", "TP8", "M2",  "P7",  "P5",  "P3",  "P1",  "Pz",
    "P2",  "P4",  "P6",  "P8",  "PO7", "PO5", "PO3", "POz", "PO4", "PO6", "PO8", "CB1", "O1",  "Oz",  "O2",  "CB2",
};

// Coronal rows of the 10-10 system: elevation of the midline site along the
// nasion-inion arc (90 = front equator, -90 = back equator).
struct Row {
  const char* prefix;
  double elevation;
};
const Row kRows[] = {{"Fp", 90.0}, {"AF", 67.5}, {"FT", 22.5}, {"FC", 22.5}, {"F", 45.0},   {"TP", -22.5},
                     {"T", 0.0},   {"CP", -22.5}, {"C", 0.0},  {"PO", -67.5}, {"P", -45.0}, {"O", -90.0}};

Vec3 normalize(Vec3 v) {
  const double n = std::sqrt(dot(v, v));
  return {v[0] / n, v[1] / n, v[2] / n};
}

Vec3 slerp(const Vec3& a, const Vec3& b, double t) {
  const double omega = angular_distance(a, b);
  if (omega < 1e-12) return a;
  const double s = std::sin(omega);
  const double wa = std::sin((1.0 - t) * omega) / s, wb = std::sin(t * omega) / s;
  return normalize({wa * a[0] + wb * b[0], wa * a[1] + wb * b[1], wa * a[2] + wb * b[2]});
}

// Site given by elevation above the equator and azimuth from the nose; left sites
// have negative x.
Vec3 from_angles(double elevation_deg, double azimuth_deg, bool left) {
  const double el = elevation_deg * kDeg, az = azimuth_deg * kDeg;
  const double x = std::cos(el) * std::sin(az);
  return {left ? -x : x, std::cos(el) * std::cos(az), std::sin(el)};
}

Vec3 place(const std::string& label) {
  if (label == "M1" || label == "M2") return from_angles(-25.0, 115.0, label == "M1");
  if (label == "CB1" || label == "CB2") return from_angles(-25.0, 155.0, label == "CB1");

  for (const auto& row : kRows) {
    const std::string prefix = row.prefix;
    if (label.compare(0, prefix.size(), prefix) != 0) continue;
    const std::string rest = label.substr(prefix.size());
    if (rest.empty() || !(rest == "z" || std::isdigit(static_cast<unsigned char>(rest[0])))) continue;

    const double alpha = row.elevation * kDeg;
    const Vec3 midline{0.0, std::sin(alpha), std::cos(alpha)};
    if (rest == "z") return midline;
    const int number = std::stoi(rest);
    const bool left = number % 2 == 1;
    // Lateral end of the row on the equator; the azimuth step is 18 degrees per
    // 22.5 degrees of elevation.
    const double azimuth = 90.0 - 0.8 * row.elevation;
    const Vec3 end = from_angles(0.0, azimuth, left);
    const bool polar_row = prefix == "Fp" || prefix == "O";
    const double fraction = polar_row ? 1.0 : static_cast<double>((number + 1) / 2) / 4.0;
    return slerp(midline, end, fraction);
  }
  fail(ErrorCode::kLookup, "no 10-10 placement rule for electrode '" + label + "'");
}

}  // namespace

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

double angular_distance(const Vec3& a, const Vec3& b) { return std::acos(std::clamp(dot(a, b), -1.0, 1.0)); }

std::size_t Montage::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return i;
  fail(ErrorCode::kLookup, "montage '" + name + "' has no electrode '" + std::string(label) + "'");
}

void Montage::validate() const {
  if (labels.size() != positions.size()) fail(ErrorCode::kDimension, "montage labels and positions differ in count");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!seen.insert(labels[i]).second) fail(ErrorCode::kConfig, "duplicate electrode label '" + labels[i] + "'");
    if (std::abs(std::sqrt(dot(positions[i], positions[i])) - 1.0) > 1e-9) {
      fail(ErrorCode::kConfig, "electrode '" + labels[i] + "' is not on the unit sphere");
    }
  }
}

Montage standard_montage() {
  Montage m;
  m.name = "standard-64";
  for (const char* label : kLabels) {
    m.labels.emplace_back(label);
    m.positions.push_back(place(label));
  }
  return m;
}

Montage montage_by_name(std::string_view name) {
  if (name == "standard-64") return standard_montage();
  fail(ErrorCode::kLookup, "unknown montage '" + std::string(name) + "'");
}

std::array<double, 2> project_azimuthal(const Vec3& p) {
  const double polar = std::acos(std::clamp(p[2], -1.0, 1.0));
  const double rho = std::hypot(p[0], p[1]);
  if (rho < 1e-15) return {0.0, 0.0};
  const double r = polar / (std::numbers::pi / 2.0);
  return {r * p[0] / rho, r * p[1] / rho};
}

Vec3 unproject_azimuthal(double x, double y) {
  const double r = std::hypot(x, y);
  if (r < 1e-15) return {0.0, 0.0, 1.0};
  const double polar = r * std::numbers::pi / 2.0;
  const double s = std::sin(polar);
  return {s * x / r, s * y / r, std::cos(polar)};
}

}  // namespace eegatt
