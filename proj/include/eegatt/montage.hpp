#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace eegatt {

using Vec3 = std::array<double, 3>;

// Electrode labels with unit-sphere positions: x towards the right ear, y towards
// the nose, z towards the vertex.
struct Montage {
  std::string name;
  std::vector<std::string> labels;
  std::vector<Vec3> positions;

  std::size_t size() const { return labels.size(); }
  // Throws a lookup error for unknown labels.
  std::size_t index_of(std::string_view label) const;
  void validate() const;
};

// The 64-channel 10-10 layout (with mastoid and cerebellar sites) of common
// clinical caps. Positions follow the idealized spherical 10-10 construction.
Montage standard_montage();

// "standard-64" is the only built-in montage.
Montage montage_by_name(std::string_view name);

double dot(const Vec3& a, const Vec3& b);
// Great-circle angle between two unit vectors, in radians.
double angular_distance(const Vec3& a, const Vec3& b);

// Azimuthal-equidistant projection centred on the vertex. The equator maps to the
// unit circle; sites below the equator fall outside it.
std::array<double, 2> project_azimuthal(const Vec3& p);
Vec3 unproject_azimuthal(double x, double y);

}  // namespace eegatt
