#pragma once

#include "marc/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>

namespace marc {

inline constexpr char kModelMagic[8] = {'M', 'A', 'R', 'C', 'M', 'D', 'L', '1'};
inline constexpr std::uint32_t kModelVersion = 1;

/// Layout: magic (8 bytes), version u32 LE, header length u64 LE, JSON
/// header, then float32 LE payloads at the offsets listed in the header
/// (relative to the end of the header). Requires a frozen model so the
/// float32 payloads hold the exact parameter values.
void save_model(const MarcModel& model, const std::filesystem::path& path);

/// Throws FormatError on bad magic, version mismatch, truncation or a
/// manifest that does not match the model built from the header config.
MarcModel load_model(const std::filesystem::path& path);

/// The JSON header of a model file.
nlohmann::json read_model_header(const std::filesystem::path& path);

}  // namespace marc
