#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mrnet/mrnet.hpp"

// Binary model format, little-endian:
//
//   "MRN1" | version u8 | variant u8 (0=S,1=L,2=M) | precision u8 (4|8)
//   | input_dim u8 | channels u8 | width u16 | num_stages u16
//   | hidden_layers u8 | wiring u8 (0=concat,1=add)
//   then per stage:
//   band_limit f64 | omega_g f64 | alpha f64 | frozen u8
//   | scalar_count u32 | layer blobs (first, hidden..., linear;
//     each row-major weights then bias, scalars of `precision` bytes)
namespace mrnet {

inline constexpr std::uint8_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const MRNet& net);
MRNet deserialize_model(std::span<const std::uint8_t> bytes);

/// Bytes of one stage's record (header fields and parameter blob) exactly as
/// they appear in the model file.
std::vector<std::uint8_t> serialize_stage(const StageParams& stage, Precision precision);

void save_model(const MRNet& net, const std::filesystem::path& path);
MRNet load_model(const std::filesystem::path& path);

}  // namespace mrnet
