#pragma once

#include <filesystem>
#include <string>

#include "eegatt/network.hpp"

// Parameter container layout (all integers little-endian):
//   "EEGATTPB" | u32 version | u32 entry count
//   per entry: u32 name length, name bytes, u8 trainable, u8 penalty group,
//              u32 rank, u64 dims[rank], f64 values[product(dims)]
namespace eegatt::nn {

inline constexpr char kParamMagic[] = "EEGATTPB";
inline constexpr std::uint32_t kParamVersion = 1;

std::string encode_params(const ParamBundle& params);
ParamBundle decode_params(std::string bytes, const std::string& source);

void save_params(const ParamBundle& params, const std::filesystem::path& path);

// Loads a container into `network`; every name and shape must match.
void load_params(Network& network, const std::filesystem::path& path);
void assign_params(Network& network, const ParamBundle& loaded, const std::string& source);

std::string spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const std::string& text, const std::string& source);

}  // namespace eegatt::nn
